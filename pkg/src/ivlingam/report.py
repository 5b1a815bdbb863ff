"""JSON report envelope and plain-text table rendering.

The envelope carries schema id, tool version, timestamp, master seed and a
config echo sufficient to reproduce the run; the body is the serialized
report. Byte-identical reproduction applies to the body (the timestamp is
envelope metadata). Every renderer is a pure function of the body dict so
the printed tables cannot drift from the machine-readable output.
"""

from __future__ import annotations

import json
from datetime import datetime, timezone
from typing import Iterable

SCHEMA = "ivlingam/1"

DISPLAY_NAMES = {
    "BootstrapPercentile": "Bootstrap Percentile",
    "AsymptoticNormal": "Asymptotic Normal",
    "Permutation": "Permutation Test",
    "LikelihoodRatio": "Likelihood Ratio",
    "HSIC": "Independence (HSIC)",
    "JarqueBera": "Jarque-Bera",
    "ShapiroWilk": "Shapiro-Wilk",
    "FirstStageF": "First-stage F",
}

POWER_HEADERS = (
    ("HSIC", "HSIC"),
    ("AsymptoticNormal", "Asympt."),
    ("BootstrapPercentile", "Boots"),
    ("Permutation", "Perm"),
    ("LikelihoodRatio", "LR"),
)


def envelope(kind: str, body: dict, master_seed: int, config: dict, version: str) -> dict:
    return {
        "schema": SCHEMA,
        "version": version,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "master_seed": int(master_seed),
        "kind": kind,
        "config": config,
        "body": body,
    }


def emit_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def body_json(payload: dict) -> str:
    """Canonical serialization of the body alone (determinism contract)."""
    return json.dumps(payload["body"], sort_keys=True, separators=(",", ":"))


def _fmt(value, width: int = 10, digits: int = 4) -> str:
    if value is None:
        return "-".rjust(width)
    return f"{value:.{digits}f}".rjust(width)


def _decision_code(decision) -> str:
    if decision is None:
        return "ERR"
    return "R" if decision == "Reject" else "NR"


def _outcome_p(outcome: dict):
    if outcome["p_value"] is not None:
        return outcome["p_value"]
    return outcome["payload"].get("percentile_p")


def _outcome_rows(outcomes: Iterable[dict]) -> list[str]:
    rows = []
    for outcome in outcomes:
        name = DISPLAY_NAMES.get(outcome["test_name"], outcome["test_name"])
        suffix = ""
        payload = outcome["payload"]
        if outcome["test_name"] == "BootstrapPercentile" and "replicates" in payload:
            suffix = f" ({payload['replicates']} iter.)"
        elif outcome["test_name"] == "Permutation" and "permutations" in payload:
            suffix = f" ({payload['permutations']} perm.)"
        rows.append(
            f"{name + suffix:<36}{_fmt(outcome['statistic'])}"
            f"{_fmt(_outcome_p(outcome))}  {_decision_code(outcome['decision']):>3}"
        )
    return rows


def render_verdict(body: dict) -> str:
    lines = [
        "Direct-effect tests (H0: no direct instrument-outcome effect)",
        f"{'Test':<36}{'Statistic':>10}{'p-value':>10}  {'Dec':>3}",
        "-" * 63,
    ]
    lines.extend(_outcome_rows(body["outcomes"]))
    lines.append("-" * 63)
    lines.append(
        f"Result: {body['label']}    direct-effect estimate: {body['alpha_zy_hat']:.4f}"
    )
    if not body.get("ordering_consistent", True):
        ordering = " -> ".join(body.get("ordering", ())) or "unknown"
        lines.append(
            f"caution: estimated ordering ({ordering}) contradicts the IV layout; "
            "the direct-effect estimate is not structurally meaningful"
        )
    return "\n".join(lines)


def render_normality(body: dict) -> str:
    lines = [
        f"{'Column':<12}{'Role':<12}{'JB stat':>10}{'JB p':>10}{'SW W':>10}{'SW p':>10}  {'Dec':>3}",
        "-" * 70,
    ]
    for col in body["columns"]:
        jb = col["jarque_bera"]
        sw = col["shapiro_wilk"]
        lines.append(
            f"{col['name']:<12}{col['role']:<12}{_fmt(jb['statistic'], 10, 2)}"
            f"{_fmt(jb['p_value'])}{_fmt(sw['statistic'])}{_fmt(sw['p_value'])}"
            f"  {_decision_code(jb['decision']):>3}"
        )
    verdict = "satisfied" if body["satisfied"] else "NOT satisfied - proceed with caution"
    lines.append(f"Non-Gaussianity prerequisite: {verdict}")
    return "\n".join(lines)


def render_protocol(body: dict) -> str:
    step2 = body["step2"]
    step3 = body["step3"]
    step4 = body["step4"]
    step6 = body["step6"]
    parts = [
        "== Step 1: Non-Gaussianity verification ==",
        render_normality(body["step1"]),
        "",
        "== Step 2: First-stage strength ==",
        f"F = {step2['statistic']:.4f} (p = {step2['p_value']:.4g}), "
        f"instrument is {step2['payload']['strength']}",
        "",
        "== Step 3: Exogeneity (instrument vs first-stage residual) ==",
        f"HSIC = {step3['statistic']:.6f}, p = {step3['p_value']:.4f} "
        f"-> {_decision_code(step3['decision'])}",
        "",
        "== Step 4: Causal structure ==",
        f"ordering: {' -> '.join(step4['ordering'])}"
        + ("" if step4["consistent_with_iv"] else "   [INCONSISTENT WITH IV LAYOUT]"),
        f"instrument->treatment: {step4['instrument_to_treatment']:.4f}   "
        f"treatment->outcome: {step4['treatment_to_outcome']:.4f}   "
        f"instrument->outcome: {step4['instrument_to_outcome']:.4f}",
        "",
        "== Step 5: Direct-effect test battery ==",
        render_verdict(body["step5"]),
        "",
        "== Step 6: Comparison with two-stage least squares ==",
        f"structural treatment effect: {step6['lingam_effect']:.4f}   "
        f"2SLS: {step6['tsls_estimate']:.4f} (SE {step6['tsls_se']:.4f})   "
        f"gap: {step6['gap']:.4f}",
    ]
    if body["warnings"]:
        parts.append("")
        parts.append("Warnings: " + ", ".join(body["warnings"]))
    return "\n".join(parts)


def render_multi_iv(body: dict) -> str:
    lines = [
        f"Multiple-instrument validation: K = {body['instrument_count']}, "
        f"alpha = {body['alpha']}, alpha_adj = {body['alpha_adj']}",
        "",
    ]
    for record in body["per_instrument"]:
        lines.append(f"Instrument {record['instrument']} "
                     f"(direct-effect estimate {record['direct_effect']:.4f})")
        lines.append(f"{'Test':<36}{'Statistic':>10}{'p-value':>10}  {'Bonf':>4}")
        lines.append("-" * 64)
        for outcome in record["outcomes"]:
            name = DISPLAY_NAMES.get(outcome["test_name"], outcome["test_name"])
            rejected = record["bonferroni_rejections"][outcome["test_name"]]
            lines.append(
                f"{name:<36}{_fmt(outcome['statistic'])}"
                f"{_fmt(_outcome_p(outcome))}  {'R' if rejected else 'NR':>4}"
            )
        lines.append("")
    lines.append(f"Final result: {body['final_label']}")
    return "\n".join(lines)


def render_power(body: dict) -> str:
    header = f"{'alpha_zy':>9} {'n':>6}" + "".join(f"{label:>9}" for _, label in POWER_HEADERS)
    lines = [header, "-" * len(header)]
    for cell in body["cells"]:
        row = f"{cell['alpha_zy']:>9.3g} {cell['n']:>6}"
        for key, _ in POWER_HEADERS:
            rate = cell["rates"][key]
            row += f"{rate:>9.3f}" if rate == rate else f"{'nan':>9}"
        lines.append(row)
    lines.append(f"replications per cell: {body['reps']}")
    return "\n".join(lines)
