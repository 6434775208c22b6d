"""Walk-forward nowcasting on a synthetic quarterly panel.

We plant a signal in four of ten AR(1) regressors, push the raw table
through ingestion, and let a small roster of learners forecast 26 test
quarters. Each split is tuned, refit and bootstrapped using only the rows
that were available at the time.

    python demos/01_walk_forward.py [output_dir]
"""

import sys

from nowcast.data import ingest
from nowcast.pipeline import RunConfig, run
from nowcast.synthetic import make_synthetic
from nowcast.windows import plan_walk_forward

out = sys.argv[1] if len(sys.argv) > 1 else "demo_walk_forward"

# Raw data: target first, then x00..x09. Only x00..x03 matter.
raw = make_synthetic(seed=42)
frame, ingestion = ingest(raw, "gdp_growth")
print(f"ingested {frame}")
print("removed columns:", ingestion.removed or "none")
print("shock dummies:", [n for n in frame.names if n.startswith("shock")])

# The split plan is fixed before any model sees the data.
plans = plan_walk_forward(frame.index[0], frame.index[-1])
first, last = plans[0], plans[-1]
print(f"\n{len(plans)} splits, first tests {first.test_quarter}, last tests {last.test_quarter}")
print(f"validation window is {first.val_end - first.val_start + 1} quarters")

# A modest budget keeps this under a minute; the defaults are larger.
cfg = RunConfig(
    models=["RW", "AR", "Ridge", "EN", "PLSR"],
    n_trials=20,
    bootstrap={"block_len": 4, "n_boot": 200, "alpha": 0.025},
    mcs={"alpha": 0.10, "n_boot": 2000, "block_len": 4, "statistic": "TR"},
    output=out,
)
ledger = run(cfg, frame)

print("\nOverall RMSFE and ratio to the random walk")
for name in [*cfg.models, "SA", "WA", "EWA", "Meta-EWA"]:
    m = ledger.summary["metrics"].get(f"{name}|Overall")
    ratio = ledger.summary["ratios"].get(f"{name}|RW|Overall")
    if m:
        print(f"  {name:<9} {m['rmsfe']:.3f}   {ratio:.3f}")

# Every point forecast carries a 95% block-bootstrap interval.
print("\nRidge, last four quarters")
for r in ledger.table("Ridge")[-4:]:
    print(f"  {r.quarter}: {r.forecast:6.2f} in [{r.lower:6.2f}, {r.upper:6.2f}], actual {r.actual:6.2f}")

print(f"\nreports written to {out}/")
