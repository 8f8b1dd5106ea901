"""Rare-event sampling in standard normal space.

Subset simulation with adaptive conditional sampling: each conditional
level grows Markov chains from the seeds below the current intermediate
threshold using the prior-preserving proposal

    x' = rho x + sqrt(1 - rho^2) xi,   xi ~ N(0, I),

which is accepted iff it stays in the current level set.  The proposal
spread ``sigma = sqrt(1 - rho^2)`` is adapted after every chain step toward
a 0.44 acceptance rate.  All functions evaluate their limit-state function
on whole batches, one row per chain.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import LevelOverflowError, RegionUnreachableError
from .stochastic_input import stream

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SmcConfig:
    n_per_level: int = 1000
    p0: float = 0.1
    max_levels: int = 12
    seed: int = 0
    sigma0: float = 0.6          # initial proposal spread
    target_accept: float = 0.44

    def __post_init__(self):
        if not 0.0 < self.p0 <= 0.5:
            raise ValueError("p0 must lie in (0, 0.5]")
        if self.n_per_level * self.p0 < 10:
            raise ValueError("n_per_level * p0 must be at least 10")
        if self.max_levels < 1:
            raise ValueError("max_levels must be positive")

    @property
    def n_seeds(self):
        return int(round(self.n_per_level * self.p0))


@dataclass
class SmcResult:
    p_hat: float
    cov: float
    levels: list                   # intermediate thresholds, last one is 0
    terminal_samples: np.ndarray   # points of the last level with g <= 0
    terminal_values: np.ndarray
    n_evals: int = 0
    accept_rates: list = field(default_factory=list)
    level_covs: list = field(default_factory=list)


class _Adapter:
    """Robbins-Monro style adaptation of the proposal spread."""

    def __init__(self, sigma0, target):
        self.log_lam = np.log(sigma0)
        self.target = target
        self.k = 0

    @property
    def sigma(self):
        return float(min(1.0, np.exp(self.log_lam)))

    def restart(self):
        """Keep the current spread but restore full adaptation gain (new level)."""
        self.k = 0

    def update(self, rate):
        self.k += 1
        self.log_lam += (rate - self.target) / np.sqrt(self.k)
        self.log_lam = min(self.log_lam, 0.0)


def _grow_chains(g, x0, g0, threshold, n_steps, rng, adapter):
    """Advance one chain per row of ``x0`` for ``n_steps`` steps.

    Returns states and values with shape ``(n_steps, n_chains, ...)`` (the
    seeds themselves are not included), the number of ``g`` calls and the
    mean acceptance rate.
    """
    nc, dim = x0.shape
    xs = np.empty((n_steps, nc, dim))
    gs = np.empty((n_steps, nc))
    x, gx = x0.copy(), g0.copy()
    accepted = 0
    for step in range(n_steps):
        sigma = adapter.sigma
        rho = np.sqrt(1.0 - sigma * sigma)
        cand = rho * x + sigma * rng.standard_normal((nc, dim))
        gc = np.asarray(g(cand), dtype=float)
        ok = gc <= threshold
        x[ok] = cand[ok]
        gx[ok] = gc[ok]
        rate = ok.mean()
        accepted += ok.sum()
        adapter.update(rate)
        xs[step] = x
        gs[step] = gx
    return xs, gs, nc * n_steps, accepted / (nc * n_steps)


def _gamma(indicator):
    """Chain-correlation factor of the subset estimator; ``indicator`` is (steps, chains)."""
    ns, nc = indicator.shape
    p = indicator.mean()
    r0 = p * (1.0 - p)
    if ns < 2 or r0 <= 0.0:
        return 0.0
    I = indicator.astype(float)
    gamma = 0.0
    for k in range(1, ns):
        rk = (I[:-k] * I[k:]).mean() - p * p
        gamma += 2.0 * (1.0 - k / ns) * rk / r0
    return max(gamma, 0.0)


def estimate_probability(g, n, cfg=SmcConfig()):
    """Subset-simulation estimate of ``P(g(X) <= 0)``, ``X ~ N(0, I_n)``.

    ``g`` maps an ``(N, n)`` batch to ``N`` values.
    """
    if n < 1:
        raise ValueError("dimension must be positive")
    N, nc = cfg.n_per_level, cfg.n_seeds
    steps = N // nc
    rng = stream(cfg.seed, 0)
    x = rng.standard_normal((N, n))
    gv = np.asarray(g(x), dtype=float)
    n_evals = N
    adapter = _Adapter(cfg.sigma0, cfg.target_accept)
    p_hat, levels, deltas, rates = 1.0, [], [], []
    chain_values = None  # (steps, chains) values of the current level
    for level in range(cfg.max_levels):
        order = np.argsort(gv, kind="stable")
        b = 0.5 * (gv[order[nc - 1]] + gv[order[nc]])
        if b <= 0.0 or np.sum(gv <= 0.0) >= nc:
            pf = float(np.mean(gv <= 0.0))
            levels.append(0.0)
            ind = None if chain_values is None else chain_values <= 0.0
            deltas.append(_level_cov(pf, N, ind))
            p_hat *= pf
            keep = gv <= 0.0
            cov = float(np.sqrt(np.sum(np.square(deltas)))) if p_hat > 0 else np.inf
            log.debug("subset simulation finished: p=%.3e cov=%.3f levels=%d", p_hat, cov, level + 1)
            return SmcResult(p_hat, cov, levels, x[keep], gv[keep], n_evals, rates, deltas)
        levels.append(float(b))
        frac = float(np.mean(gv <= b))
        ind = None if chain_values is None else chain_values <= b
        deltas.append(_level_cov(frac, N, ind))
        p_hat *= frac
        seeds = order[:nc]
        srng = stream(cfg.seed, level + 1)
        adapter.restart()
        xs, gs, used, rate = _grow_chains(g, x[seeds], gv[seeds], b, steps - 1, srng, adapter)
        n_evals += used
        rates.append(rate)
        log.debug("level %d threshold %.4g acceptance %.2f", level + 1, b, rate)
        # chain layout (steps, chains): seeds are the first state
        states = np.concatenate([x[seeds][None], xs], axis=0)
        values = np.concatenate([gv[seeds][None], gs], axis=0)
        x = states.reshape(-1, n)
        gv = values.reshape(-1)
        chain_values = values
    raise LevelOverflowError(
        f"no failure samples after {cfg.max_levels} levels (last threshold {levels[-1]:.4g})",
        last_threshold=levels[-1])


def _level_cov(p, N, indicator):
    if p <= 0.0:
        return np.inf
    gamma = 0.0 if indicator is None else _gamma(indicator)
    return float(np.sqrt((1.0 - p) / (N * p) * (1.0 + gamma)))


def mcmc_conditional(indicator, seeds, n_steps, cfg=SmcConfig(), *, rng=None, thin=1,
                     burn_in=0, check_seeds=True):
    """Chains targeting the standard normal density restricted to a region.

    ``indicator`` maps a batch to booleans; every seed must satisfy it
    (verified unless ``check_seeds`` is false, which saves expensive calls
    when membership is already known).  Each chain runs ``burn_in + n_steps * thin`` steps and keeps every
    ``thin``-th state after the burn-in.  Returns ``(samples, accept_rate,
    n_calls)`` with ``samples`` of shape ``(n_steps * n_chains, n)`` ordered
    step-major; seeds are not included.
    """
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    if seeds.shape[0] == 0 or seeds.size == 0:
        raise ValueError("mcmc_conditional needs at least one seed")
    if check_seeds and not np.asarray(indicator(seeds), dtype=bool).all():
        raise ValueError("every seed must lie inside the region")
    rng = stream(cfg.seed, 0) if rng is None else rng
    g = lambda X: np.where(np.asarray(indicator(X), dtype=bool), 0.0, 1.0)
    adapter = _Adapter(cfg.sigma0, cfg.target_accept)
    xs, gs, used, rate = _grow_chains(g, seeds, np.zeros(seeds.shape[0]), 0.0,
                                      burn_in + n_steps * thin, rng, adapter)
    assert np.all(gs <= 0.0), "chain left the region"
    xs = xs[burn_in + thin - 1::thin]
    return xs.reshape(-1, seeds.shape[1]), rate, used


@dataclass
class CriticalRegionSample:
    x: np.ndarray               # candidates, one per row
    u: np.ndarray               # |y_hat| / sigma at the candidates
    y_p: np.ndarray             # surrogate response at the candidates
    p_region: float             # estimated probability of the region
    cov: float
    n_evals: int


def sample_critical_region(predictor, delta, N=2000, cfg=SmcConfig(), max_levels=25):
    """Draw ``N`` points from the standard normal restricted to ``|y_hat| / sigma <= delta``.

    The statistic ``U`` is driven down by subset-simulation levels until the
    region is reached; the remaining points come from chains seeded at the
    region samples.  The region can be a very thin slab when the error model
    is nearly noise-free, hence the separate, larger level budget.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if N < 1:
        raise ValueError("N must be positive")
    n = predictor.dim

    def u_of(X):
        return predictor.u_statistic(X)

    try:
        res = estimate_probability(lambda X: u_of(X) - delta, n,
                                   replace(cfg, max_levels=max(cfg.max_levels, max_levels)))
    except LevelOverflowError as exc:
        raise RegionUnreachableError(
            f"critical region |y|/sigma <= {delta} not reached: {exc}",
            last_threshold=exc.last_threshold) from exc
    seeds = res.terminal_samples
    pool = [seeds]
    have = seeds.shape[0]
    n_evals = res.n_evals
    rng = stream(cfg.seed, 10_000)
    if have < N:
        steps = int(np.ceil((N - have) / seeds.shape[0]))
        ind = lambda X: u_of(X) <= delta
        more, _, used = mcmc_conditional(ind, seeds, steps, cfg, rng=rng)
        n_evals += used
        pool.append(more)
    X = np.concatenate(pool, axis=0)
    if X.shape[0] > N:
        X = X[rng.choice(X.shape[0], size=N, replace=False)]
    ev = predictor.evaluate(X)
    u = ev.u
    assert np.all(u <= delta * (1.0 + 1e-12)), "candidate outside the critical region"
    return CriticalRegionSample(X, u, ev.y_p, res.p_hat, res.cov, n_evals + X.shape[0])
