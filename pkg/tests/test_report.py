"""Envelope round-trips and renderer purity."""

import json

from ivlingam.core import RandomSource
from ivlingam.extests import TestConfig, run_all
from ivlingam.report import (
    body_json,
    emit_json,
    envelope,
    render_power,
    render_verdict,
)
from ivlingam.simulate import SimulationSpec, generate, power_analysis

FAST = TestConfig(bootstrap_replicates=99, permutation_replicates=99)


def test_envelope_round_trips():
    verdict = run_all(generate(SimulationSpec(n=120, seed=1)), FAST, RandomSource(1))
    payload = envelope("verdict", verdict.to_dict(), 1, {"seed": 1}, "0.1.0")
    parsed = json.loads(emit_json(payload))
    assert parsed == payload
    assert body_json(parsed) == body_json(payload)


def test_render_verdict_uses_r_nr_vocabulary():
    verdict = run_all(
        generate(SimulationSpec(n=120, alpha_zy=0.6, seed=2)), FAST, RandomSource(2)
    )
    text = render_verdict(verdict.to_dict())
    assert " R" in text or " NR" in text
    assert "Result:" in text


def test_render_is_pure_function_of_body():
    verdict = run_all(generate(SimulationSpec(n=120, seed=3)), FAST, RandomSource(3))
    body = verdict.to_dict()
    assert render_verdict(body) == render_verdict(json.loads(json.dumps(body)))


def test_render_power_matrix_layout():
    table = power_analysis([0.0], [60], reps=1, config=FAST, rng=RandomSource(4))
    text = render_power(table.to_dict())
    header = text.splitlines()[0]
    for label in ("alpha_zy", "n", "HSIC", "Asympt.", "Boots", "Perm", "LR"):
        assert label in header
