"""Exit criteria for the package, one test per criterion.

Each test prints a PASS/FAIL line; the lines are repeated in the pytest
terminal summary. Statistical thresholds were frozen from oracle runs with
master seed 9999; the tests below use different seeds.
"""
import subprocess
import sys
import time

import numpy as np
import pytest

from dcvfactor.criteria import ic1_curve, ic1_penalty, residual_variance
from dcvfactor.dcv import dcv_curve, make_folds, press_error
from dcvfactor.factors import (
    common_factors,
    estimate_loadings,
    projection_leverages,
    rescale_loadings,
)
from dcvfactor.harness import ExperimentSpec, run_experiment
from dcvfactor.ingest import write_returns_csv
from dcvfactor.simgen import SimConfig, gen_factor_data
from dcvfactor.spectra import gram_eigen

from conftest import rank_k, record_acceptance
from oracles import brute_force_dcv, jacobi_eigh, loo_variable_press
from test_ingest import make_panel

# frozen from the seed-9999 oracle run at (n=160, p=90)
FIG1_THETA2_BASELINE = 1.0
ROBUST_THETA = {"E2": 8.0, "E3": 16.0}


def test_criterion_01_press_identity():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst, count = 0.0, 0
    while count < 1000:
        n, p = int(rng.integers(6, 31)), int(rng.integers(2, 31))
        K = n if rng.random() < 0.5 else 5
        X = rng.standard_normal((n, p)) + rng.standard_normal((n, 2)) @ rng.standard_normal((2, p))
        plan = make_folds(n, K, seed=int(rng.integers(2**31)))
        k = int(rng.integers(K))
        fold = plan.folds[k]
        # d cannot exceed the rank of the retained rows
        d = int(rng.integers(0, min(5, p - 1, n - len(fold)) + 1))
        X_minus = np.delete(X, fold, axis=0)
        L_hat = rescale_loadings(X_minus, estimate_loadings(X_minus, d))
        w = projection_leverages(L_hat)
        for i in fold[:2]:
            got = press_error(X[i], L_hat, w)
            ref = loo_variable_press(X[i], L_hat.loadings)
            worst = max(worst, abs(got - ref) / abs(ref))
            count += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 60
    record_acceptance(1, "PRESS shortcut == explicit leave-one-variable-out refit", ok,
                      f"{count} instances, max rel err {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_criterion_02_double_loop_oracle():
    rng = np.random.default_rng(202)
    t0 = time.perf_counter()
    worst, sel_ok = 0.0, True
    for inst in range(25):
        n, p = int(rng.integers(6, 16)), int(rng.integers(3, 9))
        d_max = int(rng.integers(1, min(4, p - 1) + 1))
        K = [n, 3, 5][inst % 3]
        X = rank_k(rng, n, p, int(rng.integers(1, 3)), noise=float(rng.uniform(0.1, 1.0)))
        curve = dcv_curve(X, K=K, d_min=0, d_max=d_max, seed=inst, transpose_policy="never")
        ref = brute_force_dcv(X, curve.fold_plan.folds, 0, d_max)
        worst = max(worst, float(np.max(np.abs(curve.values - ref) / np.abs(ref))))
        sel_ok &= curve.selected == int(np.flatnonzero(ref == ref.min())[0])
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and sel_ok and elapsed < 120
    record_acceptance(2, "dcv_curve == brute-force double-loop refit", ok,
                      f"max rel err {worst:.2e}, selections equal={sel_ok}, {elapsed:.1f}s")
    assert ok


def test_criterion_03_noiseless_recovery():
    misses = []
    for d0 in (1, 3, 5):
        for seed in range(50):
            X = gen_factor_data(SimConfig(n=40, p=30, theta=0.0, d0=d0, seed=seed)).X
            got = {
                "DCV1": dcv_curve(X, K=40, d_min=1, d_max=8, seed=seed,
                                  transpose_policy="never").selected,
                "DCV10": dcv_curve(X, K=10, d_min=1, d_max=8, seed=seed,
                                   transpose_policy="never").selected,
                "IC1": ic1_curve(X, 1, 8).selected,
            }
            misses += [(d0, seed, m, s) for m, s in got.items() if s != d0]
    ok = not misses
    record_acceptance(3, "theta=0 recovery of d0 in {1,3,5}, 50 seeds, DCV1/DCV10/IC1", ok,
                      f"{450 - len(misses)}/450 exact; first misses {misses[:3]}")
    assert ok


def _freq(summary, method, n, p, theta, em):
    return summary.correct_frequency(method, n, p, theta, em)


def test_criterion_04_fig1_regression():
    thetas = [0.5, 1.0, 2.0, 32.0]
    t0 = time.perf_counter()
    s = run_experiment(ExperimentSpec(sizes=[(160, 90)], thetas=thetas, error_models=["E1"],
                                      methods=["DCV10"], replications=200, master_seed=4004))
    f = [_freq(s, "DCV10", 160, 90, t, "E1") for t in thetas]
    elapsed = time.perf_counter() - t0
    R = 200
    se = [np.sqrt(max(x * (1 - x), 1e-12) / R) for x in f]
    degrades = all(f[j + 1] <= f[j] + 3 * np.hypot(se[j], se[j + 1]) for j in range(3))
    ok = (f[0] >= 0.90 and f[1] >= 0.90 and abs(f[2] - FIG1_THETA2_BASELINE) <= 0.05
          and degrades and f[3] < f[0] and elapsed < 15 * 60)
    record_acceptance(4, "E1 (160,90) DCV10 frequencies vs theta", ok,
                      f"theta {thetas} -> {f}, {elapsed:.0f}s")
    assert ok


@pytest.mark.parametrize("em", ["E2", "E3"])
def test_criterion_05_robustness(em):
    theta = ROBUST_THETA[em]
    s = run_experiment(ExperimentSpec(sizes=[(160, 90)], thetas=[theta], error_models=[em],
                                      methods=["DCV10", "IC1"], replications=200,
                                      master_seed=5005))
    dcv = _freq(s, "DCV10", 160, 90, theta, em)
    ic = _freq(s, "IC1", 160, 90, theta, em)
    ok = dcv - ic >= 0.10
    record_acceptance(5, f"{em} (160,90) DCV10 beats IC1 by >= 0.10", ok,
                      f"theta={theta}: DCV10 {dcv:.3f} vs IC1 {ic:.3f}")
    assert ok


def test_criterion_06_consistency_trend():
    sizes = [(40, 30), (160, 90), (640, 270)]
    s = run_experiment(ExperimentSpec(sizes=sizes, thetas=[1.0], error_models=["E1"],
                                      methods=["DCV10"], replications=100, master_seed=6006))
    f = [_freq(s, "DCV10", n, p, 1.0, "E1") for n, p in sizes]
    se = [np.sqrt(x * (1 - x) / 100) for x in f]
    ok = all(f[j + 1] >= f[j] - 3 * np.hypot(se[j], se[j + 1]) for j in range(2))
    record_acceptance(6, "DCV10 frequency nondecreasing along (40,30)->(160,90)->(640,270)",
                      ok, f"frequencies {f}")
    assert ok


def test_criterion_07_dcv1_dcv10_agreement():
    spec = ExperimentSpec(sizes=[(160, 90)], thetas=[1.0], error_models=["E1"],
                          methods=["DCV1", "DCV10"], replications=200, master_seed=7007)
    s = run_experiment(spec)
    by_rep = {}
    for r in s.raw:
        by_rep.setdefault(r.replication, {})[r.method] = (r.selected, r.digest)
    agree = np.mean([v["DCV1"][0] == v["DCV10"][0] for v in by_rep.values()])
    shared = all(v["DCV1"][1] == v["DCV10"][1] for v in by_rep.values())
    f1 = _freq(s, "DCV1", 160, 90, 1.0, "E1")
    ok = agree >= 0.80 and shared and f1 >= 0.90
    record_acceptance(7, "DCV1 and DCV10 agree on shared draws", ok,
                      f"agreement {agree:.3f}, DCV1 correct {f1:.3f}")
    assert ok


def _cli(*args):
    proc = subprocess.run([sys.executable, "-m", "dcvfactor", *args],
                          capture_output=True, check=True)
    return proc.stdout


def test_criterion_08_cli_determinism(tmp_path):
    X = rank_k(np.random.default_rng(8), 50, 14, 3, noise=0.5)
    mat = tmp_path / "m.csv"
    np.savetxt(mat, X, delimiter=",")
    spec = tmp_path / "spec.json"
    spec.write_text('{"sizes": [[40, 30]], "error_models": ["E1", "E4"], "thetas": [2.0],'
                    ' "methods": ["DCV1", "DCV10", "IC1"], "replications": 3,'
                    ' "master_seed": 8}')
    returns = tmp_path / "r.csv"
    write_returns_csv(make_panel(stop="2002-07-01", p=16, d0=3, theta=0.1, seed=8), returns)
    checks = {}
    for name, args in {
        "select": ["select", "--input", str(mat), "--dmax", "6", "--seed", "3"],
        "simulate": ["simulate", "--spec", str(spec), "--output", str(tmp_path / "o.csv")],
        "simulate-json": ["simulate", "--spec", str(spec), "--format", "json"],
        "empirical": ["empirical", "--input", str(returns), "--dmax", "8", "--seed", "2",
                      "--output", str(tmp_path / "e.json")],
    }.items():
        outs = []
        for threads in ("1", "1", "3"):
            out = _cli(*args, "--threads", threads)
            files = [p.read_bytes() for p in sorted(tmp_path.glob("[oe].*"))]
            outs.append((out, files))
        checks[name] = outs[0] == outs[1] == outs[2]
    ok = all(checks.values())
    record_acceptance(8, "CLI output byte-identical across runs and --threads", ok, str(checks))
    assert ok


def test_criterion_09_eigen_kernel():
    rng = np.random.default_rng(909)
    worst = dict(recon=0.0, trace=0.0, val=0.0, vec=0.0)
    for _ in range(500):
        n, p = int(rng.integers(1, 51)), int(rng.integers(1, 51))
        X = rng.standard_normal((n, p))
        es = gram_eigen(X)
        G = X.T @ X
        recon = (es.vectors * es.values) @ es.vectors.T
        worst["recon"] = max(worst["recon"], np.abs(recon - G).max() / np.abs(G).max())
        worst["trace"] = max(worst["trace"], abs(es.values.sum() - np.sum(X * X)) / np.sum(X * X))
        vals, vecs = jacobi_eigh(G)
        worst["val"] = max(worst["val"], np.abs(es.values - vals).max() / vals[0])
        # eigenvector comparison only where the eigenvalue is well separated
        gaps = np.abs(vals[:, None] - vals[None, :])
        np.fill_diagonal(gaps, np.inf)
        simple = (gaps.min(axis=1) > 1e-6 * vals[0]) & (vals > 1e-10 * vals[0])
        cos = np.abs(np.sum(es.vectors * vecs, axis=0))[simple]
        if cos.size:
            worst["vec"] = max(worst["vec"], np.abs(cos - 1).max())
    ok = (worst["recon"] <= 1e-8 and worst["trace"] <= 1e-8 and worst["val"] <= 1e-8
          and worst["vec"] <= 1e-6)
    record_acceptance(9, "eigen kernel reconstruction/trace/Jacobi oracle on 500 matrices",
                      ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert ok


def test_criterion_10_ic1_arithmetic():
    pen = ic1_penalty(100, 100)
    rng = np.random.default_rng(1010)
    worst = 0.0
    for _ in range(100):
        n, p = int(rng.integers(5, 40)), int(rng.integers(5, 40))
        X = rng.standard_normal((n, p))
        d = int(rng.integers(0, min(n, p)))
        vals, _ = jacobi_eigh(X.T @ X)
        tail = vals[d:].sum() / (n * p)
        L = estimate_loadings(X, d)
        resid = X - common_factors(X, L).scores @ L.loadings.T
        direct = np.mean(resid * resid)
        v = residual_variance(X, d)
        for ref in (tail, direct):
            if ref > 0:
                worst = max(worst, abs(v - ref) / ref)
    ok = abs(pen - 0.0782405) <= 1e-6 and worst <= 1e-9
    record_acceptance(10, "IC1 penalty and eigen-tail residual variance", ok,
                      f"penalty {pen:.7f}, max rel err {worst:.2e}")
    assert ok
