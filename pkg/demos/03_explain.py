"""What drives the forecasts, and are the gains significant?

Each family reports its own importance measure per split: signed
coefficients for the penalized regressions, VIP for PLS, impurity
decrease for the forest. Averaging over test quarters gives stable
rankings; a rank correlation with the target gives a model-free check.
Predictive-ability tests then ask whether the accuracy gain over the
random walk is more than noise.

    python demos/03_explain.py
"""

from nowcast.data import ingest
from nowcast.pipeline import RunConfig, run
from nowcast.synthetic import make_synthetic

frame, _ = ingest(make_synthetic(seed=42), "gdp_growth")

cfg = RunConfig(
    models=["RW", "Ridge", "LASSO", "PLSR", "RF"],
    n_trials=8,
    n_startup=4,
    bootstrap={"block_len": 4, "n_boot": 20, "alpha": 0.025},
    mcs={"alpha": 0.10, "n_boot": 2000, "block_len": 4, "statistic": "TR"},
    # a small forest keeps the demo quick; the default space is much larger
    search_spaces={"RF": {"n_estimators": {"type": "int", "low": 10, "high": 20},
                          "max_depth": {"type": "int", "low": 2, "high": 4}}},
    top_k=4,
)
ledger = run(cfg, frame, emit=False)

# x00..x03 carry the signal with alternating signs (+, -, +, -).
for model, d in ledger.summary["importance"].items():
    print(f"{model} ({d['measure']}), Overall top features:")
    for feat, mean, ci_range in d["top"]["Overall"]:
        print(f"    {feat:<16} {mean:+.3f}   mean CI width {ci_range:.3f}")

print("\nrank correlation with the target:")
for feat, rho in sorted(ledger.spearman.items(), key=lambda kv: -abs(kv[1]))[:5]:
    print(f"    {feat:<16} {rho:+.3f}")

print("\npredictive ability vs RW (negative intercept favours the model)")
for key, t in ledger.summary["tests"].items():
    model, bench = key.split("|")
    if bench == "RW":
        flag = f"  [{t['degenerate']}]" if t["degenerate"] else ""
        print(f"    {model:<9} intercept {t['intercept']:+7.2f}  p={t['wald_p']:.3f}{flag}")
