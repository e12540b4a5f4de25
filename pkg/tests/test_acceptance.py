"""Acceptance suite: one PASS/FAIL line per criterion, echoed in the pytest summary.

Run alone with ``pytest tests/test_acceptance.py -v``. Criteria that need the
Australian or Japanese tables fail (not skip) when those files are absent,
naming the missing file.
"""

import json
import time
from importlib import resources

import numpy as np
import pytest
from scipy.integrate import quad

from csgm.classifier import posterior_good, predict
from csgm.cli import PipelineConfig, evaluate_model, main, prepare_data, train_model
from csgm.dataset import SplitSpec, builtin_config, load_encoded, standardize_fit_apply, train_test_split
from csgm.gmm import EmConfig, e_step, fit_em, log_gaussian_pdf
from csgm.metrics import ConfusionMatrix, accuracy, f1, precision, recall, roc_curve
from csgm.resample import SmoteConfig, smote_balance

from conftest import DATA_DIR, acceptance_line, dataset_available, random_spd
from test_metrics import brute_auc
from test_resample import check_smote_contract

DATASETS = ("german", "australian", "japanese")
REFERENCE = json.loads(resources.files("csgm").joinpath("reference_scores.json").read_text())


def _need(criterion, name):
    if not dataset_available(name):
        acceptance_line(criterion, False, f"{name}: raw file {builtin_config(name).file} not found "
                                          f"under {DATA_DIR}; criterion not evaluated")
        pytest.fail(f"{name} data missing")


# --------------------------------------------------------------------------
# 1. metric layer against the published confusion matrices
# --------------------------------------------------------------------------


def test_criterion_1_metric_layer():
    t0 = time.perf_counter()
    problems = []
    for split in ("train", "test"):
        for name in DATASETS:
            cm = ConfusionMatrix(**REFERENCE["confusion_matrices"][split][name])
            published = REFERENCE["accuracy"][split][name]["GMM"]
            if abs(accuracy(cm) - published) > 1e-4:
                problems.append(f"{split} {name} accuracy {accuracy(cm):.6f} vs {published}")
            scores = REFERENCE["scores"][split][name]["GMM"]
            for key, fn in (("precision", precision), ("recall", recall), ("f1", f1)):
                if abs(fn(cm) - scores[key]) > 5e-3:
                    problems.append(f"{split} {name} {key} {fn(cm):.4f} vs {scores[key]}")
    elapsed = time.perf_counter() - t0
    ok = not problems and elapsed < 1.0
    acceptance_line(1, ok, f"6 matrices, accuracies within 0.01%, P/R/F1 within 0.5%, "
                           f"{elapsed * 1e3:.1f} ms" + ("" if ok else f"; {problems}"))
    assert ok, problems


# --------------------------------------------------------------------------
# 2. EM invariants
# --------------------------------------------------------------------------


def _em_violations(X, k, seed):
    params, report = fit_em(X, EmConfig(n_components=k, seed=seed))
    worst_step = min((float(np.min(np.diff(t))) for t in report.restart_traces
                      if t is not None and len(t) > 1), default=0.0)
    resp, _ = e_step(X, params)
    return (worst_step, float(np.max(np.abs(resp.sum(axis=1) - 1.0))),
            abs(float(params.weights.sum()) - 1.0))


def _check_em(criterion, label, cases):
    t0 = time.perf_counter()
    worst = [0.0, 0.0, 0.0]
    for X, k, seed in cases:
        step, rsum, wsum = _em_violations(X, k, seed)
        worst = [min(worst[0], step), max(worst[1], rsum), max(worst[2], wsum)]
    elapsed = time.perf_counter() - t0
    ok = worst[0] >= -1e-8 and worst[1] <= 1e-12 and worst[2] <= 1e-12
    acceptance_line(criterion, ok, f"{label}: {len(cases)} fits, smallest step {worst[0]:.3g}, "
                                   f"resp-sum err {worst[1]:.2g}, weight-sum err {worst[2]:.2g}, "
                                   f"{elapsed:.1f} s")
    return ok, elapsed


def test_criterion_2_em_synthetic():
    rng = np.random.default_rng(2024)
    cases = []
    for i in range(50):
        d, k = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        centres = rng.normal(scale=4.0, size=(k, d))
        X = centres[rng.integers(0, k, 200)] + rng.normal(size=(200, d))
        cases.append((X, k, i))
    ok, elapsed = _check_em(2, "50 synthetic instances", cases)
    assert ok and elapsed < 120


@pytest.mark.parametrize("name", DATASETS)
def test_criterion_2_em_real(name):
    _need(2, name)
    cfg = PipelineConfig(dataset=name, seed=0, data_dir=str(DATA_DIR))
    X = prepare_data(cfg).fit_data().features
    ok, elapsed = _check_em(2, f"{name} train split", [(X, k, 0) for k in (1, 3, 6)])
    assert ok and elapsed < 60


# --------------------------------------------------------------------------
# 3. parameter recovery, 4. density oracle, 5. AUC oracle
# --------------------------------------------------------------------------


def test_criterion_3_parameter_recovery():
    t0 = time.perf_counter()
    hits, worst_mu, worst_w = 0, 0.0, 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        z = rng.integers(0, 2, 1000)
        X = (np.where(z == 1, 3.0, -3.0) + rng.normal(size=1000))[:, None]
        params, _ = fit_em(X, EmConfig(n_components=2, seed=seed))
        order = np.argsort(params.means[:, 0])
        err_mu = float(np.max(np.abs(params.means[order, 0] - [-3.0, 3.0])))
        err_w = float(np.max(np.abs(params.weights[order] - 0.5)))
        worst_mu, worst_w = max(worst_mu, err_mu), max(worst_w, err_w)
        hits += err_mu <= 0.2 and err_w <= 0.05
    elapsed = time.perf_counter() - t0
    ok = hits == 10 and elapsed < 10
    acceptance_line(3, ok, f"{hits}/10 seeds, worst mean error {worst_mu:.3f}, "
                           f"worst weight error {worst_w:.3f}, {elapsed:.1f} s")
    assert ok


def test_criterion_4_density_oracle():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(1, 6))
        cov, mean, x = random_spd(rng, d), rng.normal(size=d), rng.normal(size=d)
        diff = x - mean
        brute = (-0.5 * d * np.log(2 * np.pi) - 0.5 * np.log(np.linalg.det(cov))
                 - 0.5 * diff @ np.linalg.inv(cov) @ diff)
        worst = max(worst, abs(log_gaussian_pdf(x, mean, cov) - brute))
    mass, _ = quad(lambda t: np.exp(log_gaussian_pdf(t, 0.7, 2.3)), -np.inf, np.inf)
    ok = worst <= 1e-9 and abs(mass - 1.0) <= 1e-6
    acceptance_line(4, ok, f"100 SPD instances, max |diff| {worst:.2g}; "
                           f"1-D integral {mass:.10f}")
    assert ok


def test_criterion_5_auc_oracle():
    rng = np.random.default_rng(5)
    worst, done = 0.0, 0
    while done < 100:
        n = int(rng.integers(2, 51))
        labels = rng.integers(0, 2, n)
        if labels.min() == labels.max():
            continue
        # half the instances use coarse scores to exercise ties
        scores = rng.random(n) if done % 2 else rng.integers(0, 5, n) / 4
        worst = max(worst, abs(roc_curve(scores, labels).auc - brute_auc(scores, labels)))
        done += 1
    ok = worst <= 1e-9
    acceptance_line(5, ok, f"100 instances, max |trapezoid - pair count| {worst:.2g}")
    assert ok


# --------------------------------------------------------------------------
# 6. SMOTE on the German split
# --------------------------------------------------------------------------


def _german_train(seed):
    data = load_encoded(builtin_config("german"), DATA_DIR)
    train, test = train_test_split(data, SplitSpec(seed=seed))
    return standardize_fit_apply(train, test)[0]


def test_criterion_6_smote_german():
    _need(6, "german")
    train = _german_train(0)
    after = smote_balance(train, SmoteConfig(seed=0))
    check_smote_contract(train, after)
    # find a split seed that yields the published 458/208 train counts
    seed = next(s for s in range(500) if _german_train(s).class_counts() == (208, 458))
    published = smote_balance(_german_train(seed), SmoteConfig(seed=seed)).class_counts()
    ok = published == (458, 458)
    acceptance_line(6, ok, f"seed 0: {train.class_counts()} -> {after.class_counts()}, majority "
                           f"rows identical, synthetic rows in segment boxes; seed {seed}: "
                           f"(208, 458) -> {published}")
    assert ok


# --------------------------------------------------------------------------
# 7. end-to-end bands
# --------------------------------------------------------------------------

BANDS = {"german": 0.62, "australian": 0.78, "japanese": 0.78}
PUBLISHED_TEST = {"german": 0.7035, "australian": 0.8478, "japanese": 0.8371}


@pytest.mark.slow
@pytest.mark.parametrize("name", DATASETS)
def test_criterion_7_end_to_end(name):
    _need(7, name)
    t0 = time.perf_counter()
    train_acc, test_acc, n_comp = [], [], []
    for seed in range(10):
        cfg = PipelineConfig(dataset=name, seed=seed, data_dir=str(DATA_DIR))
        prep = prepare_data(cfg)
        model, report, _ = train_model(cfg, prep)
        train_acc.append(report.train_accuracy)
        test_acc.append(evaluate_model(model, prep.test)["accuracy"])
        n_comp.append(report.n_components)
    elapsed = time.perf_counter() - t0
    mean_test = float(np.mean(test_acc))
    gap = float(np.max(np.abs(np.subtract(train_acc, test_acc))))
    ok = mean_test >= BANDS[name] and elapsed < 600
    detail = (f"{name}: mean test accuracy {mean_test:.4f} (band >= {BANDS[name]}, published "
              f"{PUBLISHED_TEST[name]}), mean train {np.mean(train_acc):.4f}, N_c {n_comp}")
    if name != "german":
        ok = ok and gap < 0.12
        detail += f", max |train - test| {gap:.4f} (< 0.12)"
    acceptance_line(7, ok, detail + f", {elapsed:.0f} s")
    assert ok


# --------------------------------------------------------------------------
# 8. determinism, 9. decision-boundary sweep
# --------------------------------------------------------------------------


def test_criterion_8_determinism(tmp_path):
    _need(8, "german")
    out = tmp_path / "run"
    base = ["--dataset", "german", "--seed", "5", "--range", "2:4", "--data-dir", str(DATA_DIR),
            "--out", str(out)]
    commands = ["prepare", "select", "train", "evaluate", "roc", "benchmark"]

    def run_all():
        for cmd in commands:
            assert main([cmd, *base]) == 0
        return {p.name: p.read_bytes() for p in sorted(out.iterdir())}

    first, second = run_all(), run_all()
    ok = first == second
    acceptance_line(8, ok, f"{len(commands)} commands rerun, {len(first)} output files "
                           f"byte-identical: {ok}")
    assert ok


def test_criterion_9_boundary_sweep():
    _need(9, "australian")
    cfg = PipelineConfig(dataset="australian", seed=0, data_dir=str(DATA_DIR))
    prep = prepare_data(cfg)
    model, _, _ = train_model(cfg, prep)
    X, y = prep.test.features, prep.test.labels
    recalls, flips, prev = [], 0, None
    for D in np.round(np.arange(0, 1.01, 0.1), 10):
        pred = predict(X, model.with_boundary(float(D)))
        recalls.append(recall(ConfusionMatrix(
            tn=int(np.sum((pred == 0) & (y == 0))), fp=int(np.sum((pred == 1) & (y == 0))),
            fn=int(np.sum((pred == 0) & (y == 1))), tp=int(np.sum((pred == 1) & (y == 1))))))
        if prev is not None:
            flips += int(np.sum((prev == 0) & (pred == 1)))
        prev = pred
    ok = all(a >= b for a, b in zip(recalls, recalls[1:])) and flips == 0
    acceptance_line(9, ok, f"recall over D=0..1: {[round(r, 3) for r in recalls]}, "
                           f"0->1 flips {flips}")
    assert ok
