"""Variational heteroscedastic Gaussian process on a one-dimensional input.

Model: ``eps = f(s) + noise``, ``f ~ GP(0, k_f)``, noise variance
``exp(g(s))`` with ``g ~ GP(mu_g, k_g)``.  The posterior over ``g`` at the
training inputs is Gaussian with the reduced parameterization

    mu    = K_g (lam - 1/2) + mu_g
    Sigma = (K_g^-1 + Lam)^-1

with one non-negative ``lam_i`` per point, and all hyperparameters and
``lam`` maximize the marginalized variational bound

    F = log N(eps | 0, K_f + R) - tr(Sigma)/4 - KL(N(mu, Sigma) || N(mu_g, K_g)),
    R_ii = exp(mu_i - Sigma_ii / 2).

Everything is computed on standardized inputs and targets; ``Lam`` enters
only through ``S = Lam^(1/2)`` and ``B = I + S K_g S`` so that zero entries
are harmless.  Both kernels are squared exponentials.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.optimize import minimize
from scipy.special import expit

from .errors import FitError, NotPositiveDefiniteError

JITTER = 1e-8
_LOG2PI = np.log(2.0 * np.pi)


def softplus(x):
    return np.logaddexp(0.0, x)


def softplus_inv(y):
    y = np.asarray(y, dtype=float)
    return y + np.log(-np.expm1(-y))


def se_kernel(a, b, variance, lengthscale):
    d = a[:, None] - b[None, :]
    return variance * np.exp(-0.5 * (d / lengthscale) ** 2)


class ErrorDataset:
    """Surrogate outputs ``y_p`` and errors ``eps = y - y_p`` with standardization maps."""

    def __init__(self, inputs, targets):
        self.inputs = np.asarray(inputs, dtype=float).ravel()
        self.targets = np.asarray(targets, dtype=float).ravel()
        if self.inputs.shape != self.targets.shape:
            raise ValueError("inputs and targets differ in length")
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.targets))):
            raise ValueError("error dataset contains non-finite values")
        self.x_shift, self.x_scale = _affine(self.inputs)
        self.y_shift, self.y_scale = _affine(self.targets)

    @classmethod
    def from_responses(cls, y, y_p):
        y_p = np.asarray(y_p, dtype=float)
        return cls(y_p, np.asarray(y, dtype=float) - y_p)

    def __len__(self):
        return self.inputs.size

    @property
    def s(self):
        return (self.inputs - self.x_shift) / self.x_scale

    @property
    def t(self):
        return (self.targets - self.y_shift) / self.y_scale


def _affine(v):
    shift = float(v.mean())
    scale = float(v.std())
    if not scale > 1e-12 * max(abs(shift), 1e-300):
        scale = abs(shift) if shift != 0.0 else 1.0
    return shift, scale


@dataclass
class Hyper:
    """Hyperparameters in standardized units."""

    var_f: float
    len_f: float
    var_g: float
    len_g: float
    mu_g: float

    def pack(self):
        return np.array([np.log(self.var_f), np.log(self.len_f), np.log(self.var_g),
                         np.log(self.len_g), self.mu_g])

    @classmethod
    def unpack(cls, v):
        return cls(float(np.exp(v[0])), float(np.exp(v[1])), float(np.exp(v[2])),
                   float(np.exp(v[3])), float(v[4]))


class _State:
    """Posterior quantities shared by the bound, its gradient and prediction."""

    def __init__(self, s, t, hyp, lam):
        n = s.size
        self.s, self.t, self.hyp, self.lam = s, t, hyp, lam
        self.Cf = se_kernel(s, s, 1.0, hyp.len_f) + JITTER * np.eye(n)
        self.Cg = se_kernel(s, s, 1.0, hyp.len_g) + JITTER * np.eye(n)
        self.Kf = hyp.var_f * self.Cf
        self.Kg = hyp.var_g * self.Cg
        self.sq = np.sqrt(lam)
        B = np.eye(n) + self.sq[:, None] * self.Kg * self.sq[None, :]
        self.LB = _chol(B, "I + S K_g S")
        # SBinvS = S B^-1 S, so Sigma = K_g - K_g SBinvS K_g
        Binv = cho_solve((self.LB, True), np.eye(n))
        self.Binv = Binv
        self.SBinvS = self.sq[:, None] * Binv * self.sq[None, :]
        self.P = np.eye(n) - self.SBinvS @ self.Kg
        self.Sigma = self.Kg @ self.P
        self.Sigma = 0.5 * (self.Sigma + self.Sigma.T)
        self.h = lam - 0.5
        self.mu = self.Kg @ self.h + hyp.mu_g
        with np.errstate(over="ignore"):
            self.R = np.exp(self.mu - 0.5 * np.diag(self.Sigma))
        if not np.all(np.isfinite(self.R)):
            raise FloatingPointError("noise variance overflow")
        A = self.Kf + np.diag(self.R)
        self.LA = _chol(A, "K_f + R")
        self.alpha = cho_solve((self.LA, True), t)

    def bound(self):
        n = self.s.size
        loglik = -0.5 * self.t @ self.alpha - np.log(np.diag(self.LA)).sum() - 0.5 * n * _LOG2PI
        kl = 0.5 * (np.trace(self.Binv) + self.h @ self.Kg @ self.h - n
                    + 2.0 * np.log(np.diag(self.LB)).sum())
        return loglik - 0.25 * np.trace(self.Sigma) - kl

    def gradient(self):
        """Gradient w.r.t. (log var_f, log len_f, log var_g, log len_g, mu_g) and lam."""
        n = self.s.size
        Ainv = cho_solve((self.LA, True), np.eye(n))
        W = 0.5 * (np.outer(self.alpha, self.alpha) - Ainv)
        a = np.diag(W) * self.R                      # dF/dmu through R
        sdiag = -0.5 * a - 0.25                      # dF/dSigma_ii
        P, Kg, h, lam = self.P, self.Kg, self.h, self.lam
        PT = P.T
        GK = (np.outer(a, h) + (P * sdiag[None, :]) @ PT
              - 0.5 * (-lam[:, None] * (PT @ PT) + np.outer(h, h) + lam[:, None] * PT))
        GK = 0.5 * (GK + GK.T)
        d2 = (self.s[:, None] - self.s[None, :]) ** 2
        dKf_ll = self.Kf * d2 / self.hyp.len_f ** 2
        dKg_ll = self.Kg * d2 / self.hyp.len_g ** 2
        g_hyp = np.array([
            np.sum(W * self.Kf),
            np.sum(W * dKf_ll),
            np.sum(GK * Kg),
            np.sum(GK * dKg_ll),
            a.sum(),
        ])
        KP = Kg @ P
        g_lam = (Kg @ a - (self.Sigma ** 2) @ sdiag
                 - 0.5 * (-np.einsum("ij,ji->i", KP, P) + 2.0 * Kg @ h + np.diag(KP)))
        return g_hyp, g_lam


def _chol(M, what):
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(
            f"{what} is not positive definite; increase the kernel jitter") from exc


@dataclass
class HetGpModel:
    data: ErrorDataset
    hyp: Hyper
    lam: np.ndarray
    elbo_value: float = np.nan
    elbo_traces: list = field(default_factory=list, repr=False)
    failed_starts: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=float)
        self._state = _State(self.data.s, self.data.t, self.hyp, self.lam)
        self.elbo_value = float(self._state.bound())

    # -- prediction ------------------------------------------------------------

    def predict_standardized(self, s_star):
        st = self._state
        hyp = self.hyp
        kf = se_kernel(s_star, st.s, hyp.var_f, hyp.len_f)
        kg = se_kernel(s_star, st.s, hyp.var_g, hyp.len_g)
        mean = kf @ st.alpha
        v = solve_triangular(st.LA, kf.T, lower=True)
        var_f = np.maximum(hyp.var_f * (1.0 + JITTER) - np.sum(v * v, axis=0), 0.0)
        g_mean = kg @ st.h + hyp.mu_g
        g_var = np.maximum(hyp.var_g * (1.0 + JITTER)
                           - np.einsum("ij,jk,ik->i", kg, st.SBinvS, kg), 0.0)
        noise = np.exp(g_mean + 0.5 * g_var)
        return mean, var_f, noise

    def predict(self, y_p):
        """Error mean and variance at surrogate outputs ``y_p`` (original units)."""
        y_p = np.asarray(y_p, dtype=float)
        shape = y_p.shape
        d = self.data
        mean, var_f, noise = self.predict_standardized((y_p.ravel() - d.x_shift) / d.x_scale)
        mu = d.y_shift + d.y_scale * mean
        var = d.y_scale ** 2 * (var_f + noise)
        return mu.reshape(shape), var.reshape(shape)

    def noise_variance(self, y_p):
        """Heteroscedastic noise part of the predictive variance (original units)."""
        d = self.data
        y_p = np.asarray(y_p, dtype=float)
        _, _, noise = self.predict_standardized((y_p.ravel() - d.x_shift) / d.x_scale)
        return (d.y_scale ** 2 * noise).reshape(y_p.shape)

    # -- serialization -----------------------------------------------------------

    def to_dict(self):
        return {
            "inputs": self.data.inputs.tolist(),
            "targets": self.data.targets.tolist(),
            "hyper": self.hyp.__dict__.copy(),
            "lam": self.lam.tolist(),
            "elbo": self.elbo_value,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(ErrorDataset(d["inputs"], d["targets"]), Hyper(**d["hyper"]), np.asarray(d["lam"]))


def elbo(model_or_hyp, data, lam=None):
    """Variational lower bound ``F`` for a model, or for ``(Hyper, data, lam)``."""
    if isinstance(model_or_hyp, HetGpModel):
        return model_or_hyp.elbo_value
    return float(_State(data.s, data.t, model_or_hyp, np.asarray(lam, dtype=float)).bound())


def elbo_and_grad(v, data):
    """Bound and gradient in the optimizer's coordinates.

    ``v = [log var_f, log len_f, log var_g, log len_g, mu_g, raw_1..raw_n]``
    with ``lam = softplus(raw)``.
    """
    hyp = Hyper.unpack(v[:5])
    raw = v[5:]
    st = _State(data.s, data.t, hyp, softplus(raw))
    g_hyp, g_lam = st.gradient()
    return st.bound(), np.concatenate([g_hyp, g_lam * expit(raw)])


def _search_bounds(data, n):
    r = max(float(np.ptp(data.s)), 1e-6)
    return ([(np.log(1e-6), np.log(1e2)), (np.log(1e-2 * r), np.log(1e2 * r)),
             (np.log(1e-6), np.log(1e2)), (np.log(1e-2 * r), np.log(1e2 * r)),
             (np.log(1e-8), np.log(1e1))]
            + [(-30.0, 30.0)] * n)


def _starts(data, n_starts, rng, init):
    n = len(data)
    r = max(float(np.ptp(data.s)), 1e-6)
    raw0 = float(softplus_inv(0.5))
    starts = []
    if init is not None:
        lam = np.full(n, 0.5)
        m = min(n, init.lam.size)
        lam[:m] = init.lam[:m]
        starts.append(np.concatenate([init.hyp.pack(), softplus_inv(np.maximum(lam, 1e-12))]))
    starts.append(np.concatenate([[0.0, np.log(0.3 * r), 0.0, np.log(0.5 * r), np.log(0.05)],
                                  np.full(n, raw0)]))
    while len(starts) < n_starts:
        hyp = [np.log(rng.uniform(0.1, 2.0)), np.log(r * rng.uniform(0.05, 1.0)),
               np.log(rng.uniform(0.1, 2.0)), np.log(r * rng.uniform(0.1, 1.0)),
               np.log(rng.uniform(0.005, 0.5))]
        starts.append(np.concatenate([hyp, np.full(n, raw0)]))
    return starts[:n_starts]


def fit(data, *, n_starts=5, seed=0, maxiter=1000, init=None):
    """Maximize the bound over hyperparameters and ``lam`` with multi-start L-BFGS-B.

    The bound is checked to be non-decreasing along each accepted iterate
    sequence; the best start wins.  ``init`` (a previous model) contributes
    an extra warm start whose ``lam`` is padded with 1/2 for new points.
    """
    n = len(data)
    if n < 4:
        raise FitError("heteroscedastic GP needs at least 4 points")
    rng = np.random.default_rng(seed)
    bounds = _search_bounds(data, n)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    best, best_f, traces, failures = None, -np.inf, [], []
    for v0 in _starts(data, n_starts, rng, init):
        v0 = np.clip(v0, lo, hi)
        trace = []

        def fun(v):
            try:
                f, g = elbo_and_grad(v, data)
            except (NotPositiveDefiniteError, FloatingPointError):
                return np.inf, np.zeros_like(v)
            if not np.isfinite(f):
                return np.inf, np.zeros_like(v)
            return -f, -g

        def monitor(intermediate_result):
            f = -intermediate_result.fun
            if trace and f < trace[-1] - 1e-9 * (1.0 + abs(trace[-1])):
                raise FitError(f"variational bound decreased from {trace[-1]} to {f}")
            trace.append(f)

        try:
            f0, _ = fun(v0)
            if not np.isfinite(f0):
                continue
            trace.append(-f0)
            res = minimize(fun, v0, jac=True, method="L-BFGS-B", bounds=bounds,
                           callback=monitor, options={"maxiter": maxiter})
        except (FitError, NotPositiveDefiniteError, FloatingPointError) as exc:
            failures.append(f"{type(exc).__name__}: {exc}")
            continue
        traces.append(trace)
        if np.isfinite(res.fun) and -res.fun > best_f:
            best, best_f = res.x, -res.fun
    if best is None:
        raise FitError(f"all {n_starts} optimizer starts failed: {failures[-1:] or 'no finite start'}")
    model = HetGpModel(data, Hyper.unpack(best[:5]), softplus(best[5:]))
    model.elbo_traces = traces
    model.failed_starts = failures
    return model


def fit_errors(y, y_p, **kwargs):
    """Convenience wrapper: fit on ``eps = y - y_p`` against ``y_p``."""
    return fit(ErrorDataset.from_responses(y, y_p), **kwargs)
