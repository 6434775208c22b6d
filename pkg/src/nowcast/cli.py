"""Command-line entry point: ``ingest``, ``run``, ``combine``, ``report``, ``selftest``.

Exit codes: 0 success, 2 configuration problem, 3 data problem, 4 numerical
failure during fitting or evaluation, 1 failed self-test.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from .combine import DEFAULT_ETA_GRID, combine_ewa, combine_meta_ewa, combine_sa, combine_wa, mcs
from .data import DataError, TransformSpec, ingest
from .pipeline import ConfigError, PipelineError, RunConfig, RunLedger, run
from .reports import KINDS, ReportError, report

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, EXIT_SELFTEST = 2, 3, 4, 1

log = logging.getLogger("nowcast")


def _load_config(args) -> RunConfig:
    d = RunConfig.load(args.config).to_dict() if args.config else {}
    if getattr(args, "seed", None) is not None:
        d["seed"] = args.seed
    if getattr(args, "models", None):
        d["models"] = [m.strip() for m in args.models.split(",") if m.strip()]
    if getattr(args, "out", None):
        d["output"] = args.out
    return RunConfig.from_dict(d)


def cmd_ingest(args) -> int:
    spec = TransformSpec(**json.loads(args.transform)) if args.transform else TransformSpec()
    frame, ledger = ingest(args.data, args.target, spec, args.deflator)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    frame.write_csv(out / "clean.csv")
    (out / "ingestion_ledger.json").write_text(ledger.to_json())
    print(f"{frame}: {len(ledger.removed)} columns removed -> {out}")
    return 0


def cmd_run(args) -> int:
    cfg = _load_config(args)
    if not cfg.data:
        raise ConfigError("config has no data path")
    ledger = run(cfg)
    print(f"{len(ledger.records)} split forecasts; reports in {cfg.output}")
    return 0


def cmd_combine(args) -> int:
    """Combine forecasts from a CSV with a ``quarter`` column, an ``actual`` column and one column per model."""
    df = pd.read_csv(args.forecasts, dtype={"quarter": str})
    if "actual" not in df.columns or "quarter" not in df.columns:
        raise DataError("forecast CSV needs 'quarter' and 'actual' columns")
    models = [c for c in df.columns if c not in ("quarter", "actual")]
    F = df[models].to_numpy(float)
    y = df["actual"].to_numpy(float)
    survivors = models
    if args.mcs:
        res = mcs((F - y[:, None]) ** 2, models, alpha=args.alpha, n_boot=args.n_boot, seed=args.seed)
        survivors = res.survivors
        print("MCS survivors:", ", ".join(survivors))
    idx = [models.index(m) for m in survivors]
    Fs = F[:, idx]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    combos = pd.DataFrame({"quarter": df["quarter"], "actual": y})
    combos["SA"] = combine_sa(Fs, survivors)[0]
    wa, wa_w = combine_wa(Fs, y, survivors)
    ewa, ewa_w = combine_ewa(Fs, y, args.eta, survivors)
    combos["WA"], combos["EWA"] = wa, ewa
    combos["Meta-EWA"] = combine_meta_ewa(Fs, y, DEFAULT_ETA_GRID, args.lam, survivors).combined
    combos.to_csv(out / "combinations.csv", index=False, float_format="%.10g")
    rows = []
    for scheme, traj in (("WA", wa_w), ("EWA", ewa_w)):
        for t, q in enumerate(df["quarter"]):
            dom = traj.dominant(t)
            for j, m in enumerate(survivors):
                rows.append({"scheme": scheme, "quarter": q, "model": m, "weight": traj.weights[t, j],
                             "dominant": int(m == dom)})
    pd.DataFrame(rows).to_csv(out / "weights.csv", index=False, float_format="%.10g")
    print(f"combinations for {len(survivors)} models -> {out}")
    return 0


def cmd_report(args) -> int:
    ledger = RunLedger.from_json(Path(args.ledger).read_text())
    kinds = KINDS if args.kind == "all" else [args.kind]
    for k in kinds:
        for f in report(ledger, k, args.out):
            log.info("wrote %s", f)
    print(f"reports ({', '.join(kinds)}) -> {args.out}")
    return 0


def cmd_selftest(args) -> int:
    """Quick numerical sanity checks that need no data."""
    from .evaluate import ljung_box, metrics, shapiro_wilk
    from .explain import spearman
    from .linear import lasso_fit
    from .trees import impurity_decrease, xgb_split_gain

    rng = np.random.default_rng(42)
    checks = {
        "impurity decrease": abs(impurity_decrease([0, 0, 10, 10], [1, 1, 0, 0]) - 25.0) < 1e-12,
        "boosting gain": abs(xgb_split_gain(-4, 2, 4, 2, 0, 0) - 16.0) < 1e-12,
        "spearman": abs(spearman([1, 2, 3, 4], [1, 3, 2, 4]) - 0.8) < 1e-12,
        "metrics": abs(metrics([3, 4], [0, 0]).msfe - 12.5) < 1e-12,
        "lasso soft threshold": abs(lasso_fit(_unit_design(), 2 * _unit_design()[:, 0], 0.5).coef[0] - 1.5) < 1e-6,
        "shapiro-wilk range": 0 < shapiro_wilk(rng.normal(size=20))[0] <= 1,
        "ljung-box nonnegative": ljung_box(rng.normal(size=40))[0] >= 0,
        "combination rows sum to 1": bool(np.allclose(
            combine_ewa(rng.normal(size=(10, 3)), rng.normal(size=10), 0.5)[1].weights.sum(axis=1), 1.0, atol=1e-12)),
    }
    for name, ok in checks.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return 0 if all(checks.values()) else EXIT_SELFTEST


def _unit_design() -> np.ndarray:
    x = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    return (x / x.std())[:, None]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nowcast", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    s = sub.add_parser("ingest", help="clean a raw quarterly CSV")
    s.add_argument("--data", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--deflator")
    s.add_argument("--transform", help="JSON object of transform overrides")
    s.add_argument("--out", default="clean")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("run", help="run the full walk-forward pipeline")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--seed", type=int)
    s.add_argument("--models", help="comma-separated roster filter")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("combine", help="combine forecasts from a CSV")
    s.add_argument("--forecasts", required=True)
    s.add_argument("--out", default="combine")
    s.add_argument("--eta", type=float, default=0.1)
    s.add_argument("--lam", type=float, default=1.0)
    s.add_argument("--mcs", action="store_true", help="screen models with the confidence set first")
    s.add_argument("--alpha", type=float, default=0.10)
    s.add_argument("--n-boot", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=42)
    s.set_defaults(func=cmd_combine)

    s = sub.add_parser("report", help="re-emit report files from a saved ledger")
    s.add_argument("--ledger", required=True)
    s.add_argument("--kind", default="all", choices=["all", *KINDS])
    s.add_argument("--out", default="reports")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("selftest", help="run quick built-in numerical checks")
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.stage in ("ingest", "plan"):
            return EXIT_DATA
        return EXIT_NUMERIC
    except (DataError, ReportError, OSError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
