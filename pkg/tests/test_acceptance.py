"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s`` to see the lines
inline; they are also collected into the terminal summary.
"""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE, fast_config, poison_after
from oracles import lasso_by_enumeration, subspace_angle

from nowcast.bootstrap import BootstrapConfig, run_bootstrap
from nowcast.combine import combine_ewa, combine_meta_ewa, combine_sa, combine_wa, dominant_model, mcs
from nowcast.factor import pca_decompose, pls_fit
from nowcast.linear import lasso_fit
from nowcast.neural import MlpNet, integrated_gradients
from nowcast.pipeline import RunConfig, run, run_split
from nowcast.windows import plan_walk_forward

from test_bootstrap import _ridge_problem, structure_violations
from test_combine import PRINTED_WA_2017Q1, inflated_model_elimination_rate, replay
from test_evaluate import diagnostics_gaps, gw_rejection_rates
from test_explain import spearman_max_gap
from test_neural import gru_gradient_errors, ig_completeness_gap, mlp_gradient_errors


def verdict(num: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {num:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    assert ok, line


def _timed(fn):
    t = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t


def test_criterion_01_oracle_equivalences():
    def lasso_gap():
        gap = 0.0
        for seed in range(5):
            rng = np.random.default_rng(seed)
            X = rng.normal(size=(10, 5))
            y = X @ rng.normal(size=5) + 0.3 * rng.normal(size=10)
            for lam in (0.01, 0.1, 0.4):
                gap = max(gap, np.abs(lasso_fit(X, y, lam, tol=1e-10).coef - lasso_by_enumeration(X, y, lam)).max())
        return gap

    def pca_angle():
        worst = 0.0
        for seed in range(3):
            rng = np.random.default_rng(seed)
            X = rng.normal(size=(40, 6)) @ rng.normal(size=(6, 6))
            _, vecs = np.linalg.eigh(np.cov(X.T))
            worst = max(worst, subspace_angle(pca_decompose(X, 3).loadings, vecs[:, ::-1][:, :3]))
        return worst

    def pls_cosine():
        worst = 1.0
        for seed in range(3):
            rng = np.random.default_rng(seed)
            X = rng.normal(size=(40, 6)) @ rng.normal(size=(6, 6))
            y = X @ rng.normal(size=6) + rng.normal(size=40)
            w = (X - X.mean(0)).T @ (y - y.mean())
            worst = min(worst, pls_fit(X, y, 3).weights[:, 0] @ (w / np.linalg.norm(w)))
        return worst

    (dl, tl), (ang, ta), (cos, tp), (sg, ts) = (
        _timed(lasso_gap), _timed(pca_angle), _timed(pls_cosine), _timed(spearman_max_gap))
    ok = dl <= 1e-4 and ang <= 1e-6 and cos >= 1 - 1e-8 and sg <= 1e-15 and max(tl, ta, tp, ts) < 5
    verdict(1, "oracle equivalences", ok,
            f"lasso max|db|={dl:.1e}, pca angle={ang:.1e}, pls cos-1={cos - 1:.1e}, spearman gap={sg:.1e}")


def test_criterion_02_gradient_checks():
    errs = {}
    for seed in range(3):
        errs.update({f"mlp{seed}.{k}": v for k, v in mlp_gradient_errors(seed).items()})
    for layers in (1, 2):
        errs.update({f"gru{layers}.{k}": v for k, v in gru_gradient_errors(1, layers).items()})
    worst = max(errs, key=errs.get)
    verdict(2, "gradient checks", errs[worst] <= 1e-4, f"{len(errs)} parameter blocks, worst {worst}={errs[worst]:.1e}")


def test_criterion_03_ig_completeness():
    smooth = max(ig_completeness_gap(256, seed) for seed in range(10))
    linear = 0.0
    for steps in (2, 7, 256):
        net = MlpNet(3, (), seed=steps)
        x = np.random.default_rng(steps).normal(size=3)
        ig = integrated_gradients(net.input_gradient, x, steps=steps)
        gap = abs(ig.sum() - (net.predict(x[None])[0] - net.predict(np.zeros((1, 3)))[0]))
        linear = max(linear, gap)
    verdict(3, "IG completeness", smooth <= 1e-3 and linear <= 1e-10,
            f"smooth net gap={smooth:.1e} (m=256), linear gap={linear:.1e}")


def test_criterion_04_bootstrap_structure():
    bad = structure_violations(24, 200, 4, 42)
    replicate, segs = _ridge_problem()
    a = run_bootstrap(replicate, segs, BootstrapConfig(n_boot=200, seed=42))
    b = run_bootstrap(replicate, segs, BootstrapConfig(n_boot=200, seed=42))
    same = a.points.tobytes() == b.points.tobytes() and a.interval == b.interval
    verdict(4, "bootstrap structure", bad == 0 and same, f"{bad}/200 replicates broke a block, bit-exact={same}")


def test_criterion_05_combination_algebra():
    F, y = replay(3, N=26, M=6)
    trajs = [combine_sa(F)[1], combine_wa(F, y)[1], combine_ewa(F, y, 0.1)[1]]
    meta = combine_meta_ewa(F, y)
    mats = [t.weights for t in trajs] + [t.weights for t in meta.experts.values()] + [meta.meta_weights]
    row_gap = max(np.abs(W.sum(axis=1) - 1).max() for W in mats)
    eta0 = np.array_equal(combine_ewa(F, y, 0.0)[0], combine_sa(F)[0])
    single = np.array_equal(combine_meta_ewa(F, y, [0.3], 1.0).combined, combine_ewa(F, y, 0.3)[0])
    first = np.array_equal(trajs[1].weights[0], np.full(6, 1 / 6))
    names = list(PRINTED_WA_2017Q1)
    dom = dominant_model([PRINTED_WA_2017Q1[n] for n in names], names)
    ok = row_gap <= 1e-12 and eta0 and single and first and dom == "LASSO"
    verdict(5, "combination algebra", ok,
            f"row-sum gap={row_gap:.1e}, eta0=SA {eta0}, meta1=EWA {single}, WA uniform start {first}, 2017 Q1 -> {dom}")


def test_criterion_06_mcs_behaviour():
    L = np.tile(np.random.default_rng(0).chisquare(1, size=(30, 1)), (1, 4))
    res = mcs(L, list("abcd"), n_boot=2000)
    full = res.survivors == list("abcd") and all(p == 1.0 for p in res.pvalues.values())
    rate, secs = _timed(lambda: inflated_model_elimination_rate(200, 40, 4, 2000, 0.10))
    verdict(6, "MCS behaviour", full and rate >= 0.95 and secs < 120,
            f"identical columns survive={full}, inflated model eliminated {rate:.1%} of 200 runs in {secs:.0f}s")


def test_criterion_07_gw_calibration():
    size, power = gw_rejection_rates(2000, 26, 0)
    verdict(7, "GW calibration", 0.02 <= size <= 0.09 and power >= 0.99,
            f"null rejection {size:.2%}, power {power:.2%}")


def test_criterion_08_diagnostics():
    dw, dp, dq, dqp = diagnostics_gaps(42)
    ok = dw <= 1e-3 and dp <= 5e-3 and dq <= 1e-6 and dqp <= 5e-3
    verdict(8, "diagnostics", ok, f"|dW|={dw:.1e}, |dp_sw|={dp:.1e}, |dQ|={dq:.1e}, |dp_lb|={dqp:.1e}")


def test_criterion_09_no_look_ahead(synthetic_frame):
    plans = plan_walk_forward(synthetic_frame.index[0], synthetic_frame.index[-1])
    cheap = fast_config(models=["RW", "AR", "Ridge", "EN", "LASSO", "PCR", "PLSR", "DFM"])
    costly = fast_config(
        models=["RF", "XGB", "MLP", "GRU"], n_trials=3, n_startup=2,
        bootstrap={"block_len": 4, "n_boot": 3, "alpha": 0.025},
        search_spaces={
            "RF": {"n_estimators": {"type": "int", "low": 5, "high": 10}},
            "XGB": {"n_estimators": {"type": "int", "low": 5, "high": 10}},
            "MLP": {"hidden_dim": {"type": "int", "low": 2, "high": 4}},
            "GRU": {"hidden_dim": {"type": "int", "low": 2, "high": 3}},
        },
    )
    checked, changed = 0, []
    for i, plan in enumerate(plans):
        poisoned = poison_after(synthetic_frame, plan.test_quarter)
        cases = [(m, cheap) for m in cheap.models]
        if i in (0, len(plans) - 1):
            cases += [(m, costly) for m in costly.models]
        for model, cfg in cases:
            checked += 1
            if run_split(synthetic_frame, plan, model, cfg).to_json() != run_split(poisoned, plan, model, cfg).to_json():
                changed.append(f"{model}@{plan.test_quarter}")
    verdict(9, "no look-ahead", not changed, f"{checked} split records compared, {len(changed)} changed {changed[:3]}")


@pytest.mark.slow
def test_criterion_10_end_to_end(synthetic_frame):
    cfg = RunConfig(models=["RW", "AR", "Ridge", "EN", "PCR", "PLSR"])
    ledger, secs = _timed(lambda: run(cfg, synthetic_frame, emit=False))
    ratios = ledger.summary["ratios"]
    ridge, en = ratios["Ridge|RW|Overall"], ratios["EN|RW|Overall"]
    n = len(ledger.summary["quarters"])
    verdict(10, "end-to-end synthetic run", n == 26 and secs <= 600 and ridge < 1 and en < 1,
            f"{n} splits in {secs:.0f}s, RMSFE ratio vs RW: Ridge {ridge:.3f}, EN {en:.3f}")
