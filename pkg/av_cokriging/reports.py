# av_cokriging/reports.py
# Text reports (banner + fixed-width tables) and CSV/JSON exports.
from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from av_cokriging.multifidelity import MultiFidelityModel, iter_layers

WIDTH = 58


def ensure_dir(path: Union[str, Path]) -> None:
    os.makedirs(path, exist_ok=True)


def banner(title: str) -> List[str]:
    return ["=" * WIDTH, f" {title}", "=" * WIDTH]


def fmt(v: Any) -> str:
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, (float, np.floating)):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return "(" + ", ".join(fmt(x) for x in v) + ")"
    return str(v)


def format_table(rows: Sequence[Dict[str, Any]], headers: Sequence[Tuple[str, str]]) -> List[str]:
    if not rows:
        return ["(no rows)"]
    widths = []
    for key, title in headers:
        maxw = len(title)
        for r in rows:
            maxw = max(maxw, len(fmt(r.get(key))))
        widths.append(maxw)

    line = " | ".join(title.ljust(widths[i]) for i, (_, title) in enumerate(headers))
    out = [line, "-" * len(line)]
    for r in rows:
        out.append(" | ".join(fmt(r.get(key)).ljust(widths[i]) for i, (key, _) in enumerate(headers)))
    return out


def layer_rows(model: MultiFidelityModel) -> List[Dict[str, Any]]:
    rows = []
    for t, label, layer in iter_layers(model):
        rows.append({
            "t": t,
            "label": label,
            "n": layer.n,
            "beta": layer.beta,
            "tau2": layer.params.tau2,
            "theta": layer.params.theta.tolist(),
            "nugget": layer.params.nugget,
            "log_likelihood": layer.fit_info.get("log_likelihood"),
        })
    return rows


LAYER_HEADERS = [
    ("t", "t"),
    ("label", "Label"),
    ("n", "n"),
    ("beta", "beta"),
    ("tau2", "tau2"),
    ("theta", "theta"),
    ("nugget", "nugget"),
    ("log_likelihood", "loglik"),
]


def render_fit(model: MultiFidelityModel, source: str) -> str:
    lines = banner("CO-KRIGING FIT")
    lines.append(f"Bundle : {source}")
    lines.append(f"Levels : {model.T}")
    lines.append("")
    lines.extend(format_table(layer_rows(model), LAYER_HEADERS))
    return "\n".join(lines)


def render_exp1(report: Dict[str, Any]) -> str:
    lines = banner("EXPERIMENT 1 - 1D THREE-FIDELITY BENCHMARK")
    lines.append(f"Seed        : {report['seed']}")
    lines.append(f"Eval grid   : {report['grid_size']} points on [-5, 5]")
    lines.append("")
    rows = [{"model": k, "levels": v["levels"], "mse": v["mse"]} for k, v in report["models"].items()]
    lines.extend(format_table(rows, [("model", "Model"), ("levels", "Levels"), ("mse", "MSE")]))
    lines.append("")
    lines.append("Checks:")
    for name, ok in report["checks"].items():
        lines.append(f"  - {name}: {'pass' if ok else 'FAIL'}")
    return "\n".join(lines)


def render_exp2(report: Dict[str, Any]) -> str:
    lines = banner("EXPERIMENT 2 - LANE-CHANGE SCENARIO")
    lines.append(f"Seeds       : {report['seeds'][0]}..{report['seeds'][-1]}")
    lines.append(f"Test points : {report['runs'][0]['n_test']}")
    lines.append("")
    lines.extend(format_table(report["runs"], [
        ("seed", "Seed"),
        ("mse_kriging", "MSE Kriging"),
        ("mse_multifidelity", "MSE co-Kriging"),
        ("reduction", "Reduction"),
    ]))
    lines.append("")
    s = report["summary"]
    lines.append(f"Co-Kriging better : {s['wins']}/{s['runs']}")
    lines.append(f"Median reduction  : {100.0 * s['median_reduction']:.1f}%")
    return "\n".join(lines)


def render_estimate(est: Dict[str, Any], title: str = "EVENT PROBABILITY") -> str:
    lines = banner(title)
    for key in ("value", "std_error", "n_samples", "seed", "gamma", "direction"):
        lines.append(f"{key:<10}: {fmt(est[key])}")
    return "\n".join(lines)


def render_choice(choice: Dict[str, Any], table: pd.DataFrame) -> str:
    lines = banner("NEXT EXPERIMENT")
    lines.append(f"x     : {fmt(choice['x'])}")
    lines.append(f"level : {choice['t']}")
    lines.append(f"IG    : {fmt(choice['ig'])}")
    lines.append(f"cost  : {fmt(choice['cost'])}")
    lines.append(f"score : {fmt(choice['score'])}")
    lines.append("")
    top = table.sort_values("score", ascending=False, kind="mergesort").head(10)
    headers = [(c, c) for c in table.columns]
    lines.append("Top candidates:")
    lines.extend(format_table(top.to_dict("records"), headers))
    return "\n".join(lines)


def to_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def export_json(path: Union[str, Path], obj: Any) -> None:
    Path(path).write_text(to_json(obj), encoding="utf-8")


def export_csv(path: Union[str, Path], rows: Union[pd.DataFrame, Sequence[Dict[str, Any]]]) -> None:
    df = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows))
    df.to_csv(path, index=False, encoding="utf-8", float_format="%.17g")
