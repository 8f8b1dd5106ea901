"""Acceptance criteria 1-9.

Every criterion prints one ``CRITERION n: PASS|FAIL`` line (also collected
in the terminal summary).  Criteria 4-8 read the benchmark runs cached by
``tests/acceptance_runs.py``; without a cache they compute it, which takes
a couple of hours on one core.
"""

import time

import numpy as np
import pytest
from scipy.stats import norm, spearmanr

from acceptance_runs import reference, repeats
from codriven.benchmarks import BeamPair, BoucWenPair, DamperPair
from codriven.calibrate import pearson
from codriven.estimator import CorrectionConfig, correction_factor, surrogate_probability
from codriven.hetgp import ErrorDataset, fit
from codriven.learner import SurrogatePredictor
from codriven.sampler import SmcConfig, estimate_probability, mcmc_conditional
from codriven.stochastic_input import (ProcessSpec, RandomFieldSpec, field_factor, realize_field,
                                       stream, synthesize_excitation)
from conftest import VERDICTS, threshold_pair


def verdict(n, checks):
    """``checks`` maps a description to a boolean; all must hold."""
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'}"
    if failed:
        line += "  (failed: " + "; ".join(failed) + ")"
    print(line)
    VERDICTS.append(line)
    assert ok, line


def median(runs, key):
    return float(np.median([r[key] for r in runs])) if runs else float("nan")


# -- 1 -------------------------------------------------------------------------

def test_criterion_1_analytic_tails():
    checks = {}
    for n in (2, 1000):
        a = np.zeros(n)
        a[0] = 1.0
        for beta in (0.0, 2.0, 3.0, 4.5):
            cfg = SmcConfig(n_per_level=2000 if beta == 0 else 20_000, seed=int(10 * beta) + n)
            t0 = time.perf_counter()
            res = estimate_probability(lambda X: beta - X @ a, n, cfg)
            dt = time.perf_counter() - t0
            exact = norm.cdf(-beta)
            tag = f"n={n} beta={beta}"
            print(f"  {tag}: p={res.p_hat:.4e} exact={exact:.4e} cov={res.cov:.3f} {dt:.1f}s")
            checks[f"{tag} within 3 CoV"] = abs(res.p_hat - exact) <= 3 * res.cov * exact
            checks[f"{tag} CoV <= 0.1"] = res.cov <= 0.1
            checks[f"{tag} runtime < 30 s"] = dt < 30
    verdict(1, checks)


# -- 2 -------------------------------------------------------------------------

def test_criterion_2_correction_exactness():
    oracle = norm.sf(2.0) / norm.sf(2.2)
    pair, pred = threshold_pair(1, 2.0, 2.2)
    sm = surrogate_probability(pred, cfg=SmcConfig(seed=1))
    res = correction_factor(pair, pred, sm.terminal_samples, cfg=CorrectionConfig(seed=1))
    p = res.c_p * sm.p_hat
    cov_p = np.hypot(res.cov, sm.cov)
    print(f"  c_P={res.c_p:.4f} (oracle {oracle:.4f}, cov {res.cov:.3f}); "
          f"c_P*P_hat={p:.5f} (oracle {norm.cdf(-2):.5f}, cov {cov_p:.3f})")
    pair_x, pred_x = threshold_pair(1, 2.0, 2.0)
    sm_x = surrogate_probability(pred_x, cfg=SmcConfig(seed=1))
    exact = correction_factor(pair_x, pred_x, sm_x.terminal_samples).c_p
    verdict(2, {
        "c_P within 3 CoV of oracle": abs(res.c_p - oracle) <= 3 * res.cov * oracle,
        "c_P*P_hat within 3 CoV of Phi(-2)": abs(p - norm.cdf(-2)) <= 3 * cov_p * norm.cdf(-2),
        "exact surrogate gives c_P = 1": exact == 1.0,
    })


# -- 3 -------------------------------------------------------------------------

def _lognormal_pair(n=200, seed=0):
    # ln Y = s z1, ln Y_p = b + s (r z1 + sqrt(1 - r^2) z2); corr(Y, Y_p) = 0.946
    s, r, b = 0.27624985, 0.94790563, 0.10104644
    z = stream(seed, 0).standard_normal((n, 2))
    y = np.exp(s * z[:, 0])
    y_p = np.exp(b + s * (r * z[:, 0] + np.sqrt(1 - r**2) * z[:, 1]))
    return y, y_p


def _monotone(model):
    return not model.failed_starts and all(
        np.all(np.diff(t) >= -1e-9 * (1 + np.abs(t[:-1]))) for t in model.elbo_traces)


def test_criterion_3_hetgp():
    y, y_p = _lognormal_pair()
    model = fit(ErrorDataset.from_responses(y, y_p), seed=0)
    mu, _ = model.predict(y_p)
    pre = 100 * np.mean(np.abs(y_p - y) / np.abs(y))
    post = 100 * np.mean(np.abs(y_p + mu - y) / np.abs(y))
    print(f"  lognormal pair: rho={pearson(y, y_p):.3f}  MARE {pre:.2f}% -> {post:.2f}% "
          "(reference values 12.19% -> 7.08%)")

    rng = stream(5, 0)
    s = rng.uniform(-2.0, 2.0, 200)
    sd = 0.1 * np.exp(s)
    het = fit(ErrorDataset(s, np.sin(s) + sd * rng.standard_normal(200)), seed=0)
    rank = spearmanr(np.sqrt(het.predict(s)[1]), sd).statistic
    print(f"  heteroscedastic recovery: rank correlation {rank:.3f}")

    extra = [fit(ErrorDataset(rng.uniform(-1, 1, 40), rng.standard_normal(40)), seed=k)
             for k in range(3)]
    verdict(3, {
        "(a) bound non-decreasing on every fit": all(_monotone(m) for m in [model, het, *extra]),
        "(b) MARE improves by >= 3 points": post <= pre - 3.0,
        "(c) rank correlation > 0.8": rank > 0.8,
    })


# -- 4-8 -----------------------------------------------------------------------

class Runs(list):
    """Completed repeats; ``failed`` holds the error messages of the others."""

    def __init__(self, payloads):
        super().__init__(r for r in payloads if "error" not in r)
        self.failed = [r["error"] for r in payloads if "error" in r]
        for msg in self.failed:
            print(f"  failed repeat: {msg}")


@pytest.fixture(scope="module")
def beam_runs():
    return Runs(repeats("beam"))


@pytest.fixture(scope="module")
def damper_runs():
    return Runs(repeats("damper"))


@pytest.fixture(scope="module")
def boucwen_runs():
    return Runs(repeats("boucwen"))


def _describe(name, runs, ref=None):
    p = [r["p_surrogate"] for r in runs]
    c = [r["correction"]["c_p"] for r in runs]
    print(f"  {name}: median P_hat={np.median(p):.3e}  median P={median(runs, 'p_final'):.3e}"
          f"  c_P in [{min(c):.3f}, {max(c):.3f}]  rho min {min(r['rho'] for r in runs):.4f}"
          f"  added {[r['n_added'] for r in runs]}")
    if ref is not None:
        print(f"  {name} reference: {ref['p']:.3e} (cov {ref['cov']:.3f}, "
              f"{ref['original_calls']} original calls)")


def _within_factor(a, b, f):
    return b / f <= a <= b * f


@pytest.mark.slow
def test_criterion_4_beam(beam_runs):
    ref = reference("beam")
    _describe("beam", beam_runs, ref)
    verdict(4, {
        "every repeat completed": not beam_runs.failed,
        "median P_hat in [1.5e-5, 6e-5]": 1.5e-5 <= median(beam_runs, "p_surrogate") <= 6e-5,
        "reference uses >= 5e4 original calls": ref["original_calls"] >= 50_000,
        "median P within 1.5x of reference": _within_factor(median(beam_runs, "p_final"), ref["p"], 1.5),
        "c_P in [1, 2] on every run": all(1.0 <= r["correction"]["c_p"] <= 2.0 for r in beam_runs),
        "rho >= 0.95 on every run": all(r["rho"] >= 0.95 for r in beam_runs),
        "<= 30 min per repeat": all(r["elapsed_s"] <= 1800 for r in beam_runs),
    })


@pytest.mark.slow
def test_criterion_5_damper(damper_runs):
    ref = reference("damper")
    _describe("damper", damper_runs, ref)
    verdict(5, {
        "every repeat completed": not damper_runs.failed,
        "median P_hat within 2x of 2.2e-7": _within_factor(median(damper_runs, "p_surrogate"), 2.2e-7, 2),
        "reference uses >= 5e4 original calls": ref["original_calls"] >= 50_000,
        "median P within 2x of reference": _within_factor(median(damper_runs, "p_final"), ref["p"], 2),
        "c_P in [1, 2] on every run": all(1.0 <= r["correction"]["c_p"] <= 2.0 for r in damper_runs),
        "rho >= 0.99 on every run": all(r["rho"] >= 0.99 for r in damper_runs),
    })


@pytest.mark.slow
def test_criterion_6_boucwen(boucwen_runs):
    ref = reference("boucwen")
    _describe("boucwen", boucwen_runs, ref)
    verdict(6, {
        "every repeat completed": not boucwen_runs.failed,
        "median P_hat within 2x of 1.3e-3": _within_factor(median(boucwen_runs, "p_surrogate"), 1.3e-3, 2),
        "reference in [0.7, 2] x 1.4e-3": 0.7 * 1.4e-3 <= ref["p"] <= 2 * 1.4e-3,
        "rho >= 0.99 on every run": all(r["rho"] >= 0.99 for r in boucwen_runs),
        "added points in [25, 80] on every run": all(25 <= r["n_added"] <= 80 for r in boucwen_runs),
    })


@pytest.mark.slow
def test_criterion_7_learning_stability(beam_runs, damper_runs, boucwen_runs):
    runs = beam_runs + damper_runs + boucwen_runs
    verdict(7, {
        "stop rule met before max_iters on every run":
            all(r["converged"] for r in runs) and not any(
                x.failed for x in (beam_runs, damper_runs, boucwen_runs)),
        "beam added points in [20, 60] on every run": all(20 <= r["n_added"] <= 60 for r in beam_runs),
    })


@pytest.mark.slow
def test_criterion_8_budget(beam_runs, damper_runs):
    calls = [r["original_calls_correction"] for r in beam_runs + damper_runs]
    print(f"  correction-stage original calls: max {max(calls)}")
    verdict(8, {"<= 800 original calls in the correction stage": max(calls) <= 800})


# -- 9 -------------------------------------------------------------------------

def test_criterion_9_properties():
    checks = {}
    # truncated standard normal on x1 >= 1
    ind = lambda X: X[:, 0] >= 1.0
    seeds = np.full((50, 1), 1.5)
    xs, _, _ = mcmc_conditional(ind, seeds, 400, SmcConfig(), rng=stream(9, 0), burn_in=100)
    lam = norm.pdf(1) / norm.sf(1)
    checks["truncated-normal mean"] = abs(xs.mean() - lam) <= 0.05
    checks["truncated-normal variance"] = abs(xs.var() - (1 + lam - lam**2)) <= 0.05

    spec = RandomFieldSpec()
    L = field_factor(spec)
    E = realize_field(spec, L, stream(9, 1).standard_normal((20_000, spec.n)))
    Z = (E - spec.mean) / spec.std
    R = spec.correlation()
    idx = [(0, 1), (0, 10), (0, 50), (123, 777), (5, 999)]
    checks["field covariance"] = all(abs(np.mean(Z[:, i] * Z[:, j]) - R[i, j]) <= 0.02 for i, j in idx)

    p = ProcessSpec()
    a = synthesize_excitation(p, stream(9, 2).standard_normal((10_000, p.n_vars)))
    checks["spectral variance 2 S0 w_max"] = abs(a[:, 1500].var() / (2 * p.s0 * p.omega_max) - 1) <= 0.05

    r1 = np.random.default_rng(9)
    u, v = r1.standard_normal((2, 100))
    checks["Pearson affine invariance"] = abs(pearson(u, 3 * v + 2) - pearson(u, v)) <= 1e-12

    beam = BeamPair()
    D_y, D_p = np.linspace(-1, 1, 20) * 1e-3, np.linspace(-1, 1, 20) * 1e-3
    gp = fit(ErrorDataset.from_responses(D_y + 1e-4 * r1.standard_normal(20), D_p), seed=0)
    pred = SurrogatePredictor(beam, beam.theta_init, gp)
    ev = pred.evaluate(r1.standard_normal((50, beam.dim)))
    checks["predictor variant ordering"] = bool(np.all(ev.lower < ev.mean) and np.all(ev.mean < ev.upper))

    for pair in (beam, DamperPair(), BoucWenPair()):
        y = pair.eval_original_batch(np.zeros((1, pair.dim)))[0]
        print(f"  {pair.name}: y(0) = {y:.6g}, threshold {pair.threshold:.6g}")
        checks[f"no failure at zero input ({pair.name})"] = y > 0
        checks[f"zero input y = threshold ({pair.name})"] = y == pytest.approx(pair.threshold, abs=1e-12)
    verdict(9, checks)
