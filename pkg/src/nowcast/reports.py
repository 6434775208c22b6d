"""Report tables emitted from a completed run ledger, as CSV plus JSON.

Column schemas are fixed per report kind; floats are written with ten
significant digits so identical runs produce identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any

from .pipeline import RunConfig, RunLedger

KINDS = ("metrics", "ratios", "intervals", "importance", "weights", "tests", "diagnostics")

SCHEMAS = {
    "metrics": ["series", "period", "msfe", "rmsfe", "mafe", "n"],
    "ratios": ["series", "benchmark", "period", "rmsfe_ratio"],
    "intervals": ["model", "quarter", "point", "lower", "upper", "actual"],
    "importance": ["model", "measure", "period", "rank", "feature", "mean", "ci_range"],
    "importance_trajectory": ["model", "feature", "quarter", "value"],
    "weights": ["scheme", "quarter", "model", "weight", "dominant"],
    "tests": ["series", "benchmark", "intercept", "intercept_p", "wald", "wald_p", "flag"],
    "diagnostics": ["series", "sw_w", "sw_p", "lb_q", "lb_p"],
    "mcs": ["model", "mcs_pvalue", "survived"],
    "losses": ["quarter"],  # followed by one column per model
    "hyperparameters": ["model", "quarter", "params", "best_epoch", "trials_complete", "trials_pruned"],
    "spearman": ["feature", "spearman"],
}


class ReportError(RuntimeError):
    pass


def _fmt(v: Any) -> Any:
    if isinstance(v, float):
        return format(v, ".10g")
    return v


def _write(out: Path, name: str, header: list[str], rows: list[list[Any]]) -> None:
    with open(out / f"{name}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    records = [dict(zip(header, r)) for r in rows]
    (out / f"{name}.json").write_text(json.dumps(records, indent=1, sort_keys=False))


def _need(ledger: RunLedger, *keys: str) -> dict:
    missing = [k for k in keys if k not in ledger.summary]
    if missing:
        raise ReportError(f"ledger is missing {missing}; run the evaluation stage first")
    return ledger.summary


def _split_key(key: str) -> list[str]:
    return key.split("|")


def report(ledger: RunLedger, kind: str, out: str | Path) -> list[Path]:
    """Write one report kind; returns the files produced."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def emit(name, rows):
        header = SCHEMAS[name]
        _write(out, name, header, rows)
        written.extend([out / f"{name}.csv", out / f"{name}.json"])

    if kind == "metrics":
        s = _need(ledger, "metrics")
        emit("metrics", [[*_split_key(k), v["msfe"], v["rmsfe"], v["mafe"], v["n"]] for k, v in s["metrics"].items()])
    elif kind == "ratios":
        s = _need(ledger, "ratios")
        emit("ratios", [[*_split_key(k), v] for k, v in s["ratios"].items()])
    elif kind == "intervals":
        if not ledger.records:
            raise ReportError("ledger has no forecast records")
        emit("intervals", [[r.model, r.quarter, r.forecast, r.lower, r.upper, r.actual] for r in ledger.records])
        emit("hyperparameters", [
            [r.model, r.quarter, json.dumps(r.params, sort_keys=True), r.best_epoch if r.best_epoch else "",
             r.trials_complete, r.trials_pruned]
            for r in ledger.records
        ])
        models = ledger.models
        quarters, F, y = ledger.forecast_matrix(models)
        header = ["quarter", *models]
        rows = [[q, *((F[i] - y[i]) ** 2).tolist()] for i, q in enumerate(quarters)]
        _write(out, "losses", header, rows)
        written.extend([out / "losses.csv", out / "losses.json"])
    elif kind == "importance":
        s = _need(ledger, "importance")
        rows, traj_rows = [], []
        for model, d in s["importance"].items():
            for period, ranked in d["top"].items():
                for rank, (feat, mean, ci_range) in enumerate(ranked, 1):
                    rows.append([model, d["measure"], period, rank, feat, mean, ci_range])
            quarters = [r.quarter for r in ledger.table(model)]
            for feat in sorted(d["trajectory"]):
                for q, v in zip(quarters, d["trajectory"][feat]):
                    traj_rows.append([model, feat, q, v])
        emit("importance", rows)
        emit("importance_trajectory", traj_rows)
        emit("spearman", [[k, v] for k, v in sorted(ledger.spearman.items(), key=lambda kv: (-abs(kv[1]), kv[0]))])
    elif kind == "weights":
        s = _need(ledger, "combinations", "quarters", "mcs")
        c = s["combinations"]
        members, rows = c["members"], []
        for scheme in ("WA", "EWA"):
            for q, w in zip(s["quarters"], c["weights"][scheme]):
                top = max(range(len(w)), key=lambda j: (w[j], -j))
                for j, m in enumerate(members):
                    rows.append([scheme, q, m, w[j], int(j == top)])
        emit("weights", rows)
        mc = s["mcs"]
        emit("mcs", [[m, p, int(m in mc["survivors"])] for m, p in mc["pvalues"].items()])
    elif kind == "tests":
        s = _need(ledger, "tests")
        emit("tests", [
            [*_split_key(k), v["intercept"], v["intercept_p"], v["wald"], v["wald_p"], v["degenerate"]]
            for k, v in s["tests"].items()
        ])
    elif kind == "diagnostics":
        s = _need(ledger, "diagnostics")
        emit("diagnostics", [
            [k, v.get("sw_w", ""), v.get("sw_p", ""), v.get("lb_q", ""), v.get("lb_p", "")]
            for k, v in s["diagnostics"].items()
        ])
    else:
        raise ReportError(f"unknown report kind {kind!r}; choose from {KINDS}")
    return written


def write_reports(ledger: RunLedger, cfg: RunConfig | None, out: str | Path) -> list[Path]:
    files = []
    for kind in KINDS:
        files.extend(report(ledger, kind, out))
    return files
