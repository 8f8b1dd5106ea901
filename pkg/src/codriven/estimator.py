"""Surrogate-based failure probability with an importance-sampling correction.

With ``F = {M <= 0}`` (original) and ``F_hat = {M_hat <= 0}`` (surrogate),

    P(F) = P(F_hat) * P(F | F_hat) / P(F_hat | F),

so the surrogate estimate is multiplied by ``c_P = p_num / p_den``.  The
numerator averages the original-model failure indicator over the surrogate
failure density; the denominator averages the surrogate indicator over the
original failure density, sampled by chains that call the original model.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import CodrivenError, StageError, ZeroOverlapError
from .learner import LearnerConfig, run_active_learning
from .sampler import SmcConfig, _Adapter, _gamma, estimate_probability, mcmc_conditional
from .stochastic_input import derive_seed, stream

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CorrectionConfig:
    budget: int = 400          # original-model calls for the correction stage
    split: float = 0.5         # share of the budget spent on the numerator
    thin: int = 5              # thinning of the surrogate-failure chains
    n_chains: int = 10         # chains on the original failure domain
    discard: float = 0.25      # leading fraction of each of those chains left out of p_den
    cov_target: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if (self.budget < 2 or not 0.0 < self.split < 1.0 or self.thin < 1 or self.n_chains < 1
                or not 0.0 <= self.discard < 1.0):
            raise ValueError("invalid correction configuration")


@dataclass
class CorrectionResult:
    p_num: float
    p_den: float
    c_p: float
    cov_num: float
    cov_den: float
    original_calls: int
    low_confidence: bool = False

    @property
    def cov(self):
        return float(np.hypot(self.cov_num, self.cov_den))


def surrogate_probability(predictor, variant="mean", cfg=SmcConfig()):
    """Subset-simulation estimate of ``P(variant(x) <= 0)``; no original-model calls."""
    return estimate_probability(predictor.variant(variant), predictor.dim, cfg)


def _fails(values):
    return np.asarray(values) <= 0.0


def _binomial_cov(p, n, gamma=0.0):
    if p <= 0.0:
        return np.inf
    return float(np.sqrt((1.0 - p) / (n * p) * (1.0 + gamma)))


def correction_factor(pair, predictor, surrogate_fail_samples, budget=None, cfg=CorrectionConfig()):
    """Two-density estimate of ``c_P = P(F | F_hat) / P(F_hat | F)``.

    Parameters
    ----------
    pair : ModelPair
        Supplies the original model; its call counter measures the cost.
    predictor : SurrogatePredictor
        Anything with a batch method ``mean(X)``.
    surrogate_fail_samples : ndarray
        Seeds with ``M_hat <= 0``, typically the terminal subset-simulation pool.
    budget : int, optional
        Original-model calls; overrides ``cfg.budget``.

    Notes
    -----
    The chains on ``F`` start inside ``F & F_hat`` and so over-represent it
    early on; ``cfg.discard`` drops that transient from ``p_den``.
    """
    if budget is not None:
        cfg = replace(cfg, budget=int(budget))
    seeds = np.atleast_2d(np.asarray(surrogate_fail_samples, dtype=float))
    if seeds.shape[0] == 0:
        raise ValueError("need at least one surrogate failure sample")
    m_hat = predictor.mean
    assert np.all(_fails(m_hat(seeds))), "seed outside the surrogate failure domain"
    calls0 = pair.original_calls
    n_num = max(1, int(round(cfg.budget * cfg.split)))
    n_den = cfg.budget - n_num
    smc = SmcConfig(seed=cfg.seed)

    # numerator: thinned chains on F_hat, original model on each kept state
    rng = stream(cfg.seed, 1)
    n_seed = min(seeds.shape[0], n_num)
    start = seeds[rng.choice(seeds.shape[0], size=n_seed, replace=False)]
    steps = int(np.ceil(n_num / n_seed))
    pts, _, _ = mcmc_conditional(lambda X: _fails(m_hat(X)), start, steps, smc, rng=rng,
                                 thin=cfg.thin, check_seeds=False)
    pts = pts[:n_num]
    assert np.all(_fails(m_hat(pts))), "numerator sample outside the surrogate failure domain"
    y = pair.eval_original_batch(pts)
    hit = _fails(y)
    p_num = float(hit.mean())
    # kept states are step-major: reshape to (steps, chains) for the correlation factor
    ind = hit[: (len(hit) // n_seed) * n_seed].reshape(-1, n_seed)
    cov_num = _binomial_cov(p_num, len(hit), _gamma(ind) if ind.shape[0] > 1 else 0.0)
    if not hit.any():
        raise ZeroOverlapError("no surrogate-failure sample fails the original model")

    # denominator: chains on F seeded from points in both failure domains
    both = pts[hit]
    rng = stream(cfg.seed, 2)
    n_ch = min(cfg.n_chains, both.shape[0], n_den)
    start = both[rng.choice(both.shape[0], size=n_ch, replace=False)]
    steps = max(1, n_den // n_ch)
    states, _, _ = mcmc_conditional(lambda X: _fails(pair.eval_original_batch(X)), start, steps,
                                    smc, rng=rng, check_seeds=False)
    chains = np.concatenate([start[None], states.reshape(steps, n_ch, -1)], axis=0)
    chains = chains[int(cfg.discard * (steps + 1)):]
    in_hat = _fails(m_hat(chains.reshape(-1, chains.shape[-1]))).reshape(-1, n_ch)
    p_den = float(in_hat.mean())
    cov_den = _binomial_cov(p_den, in_hat.size, _gamma(in_hat))
    used = pair.original_calls - calls0
    assert used <= cfg.budget, "correction exceeded its original-model budget"
    if p_den <= 0.0:
        raise ZeroOverlapError("no original-failure sample fails the surrogate")
    c_p = p_num / p_den
    res = CorrectionResult(p_num, p_den, c_p, cov_num, cov_den, used)
    res.low_confidence = res.cov > cfg.cov_target
    log.info("correction: p_num=%.3f p_den=%.3f c_P=%.3f (%d original calls)", p_num, p_den, c_p, used)
    return res


def correction_factor_union(pair, predictor, seeds, budget=None, cfg=CorrectionConfig(),
                            pool_size=None):
    """``c_P`` from one chain pool on the union ``{M <= 0} | {M_hat <= 0}``.

    Both conditionals ``P(F | union)`` and ``P(F_hat | union)`` are read off
    the same pool; the original model is called only where the surrogate
    alone does not settle union membership, plus once per distinct pool
    state whose original indicator is still unknown.
    """
    if budget is not None:
        cfg = replace(cfg, budget=int(budget))
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    if seeds.shape[0] == 0:
        raise ValueError("need at least one seed in the union")
    m_hat = predictor.mean
    N = cfg.budget // 2 if pool_size is None else int(pool_size)
    calls0 = pair.original_calls
    rng = stream(cfg.seed, 3)
    n_ch = min(cfg.n_chains, seeds.shape[0])
    x = seeds[rng.choice(seeds.shape[0], size=n_ch, replace=False)].copy()
    fh = _fails(m_hat(x))
    fo = np.full(n_ch, np.nan)          # original indicator, NaN while unknown
    adapter = _Adapter(0.6, 0.44)
    n_steps = int(np.ceil(N / n_ch / (1.0 - cfg.discard)))
    skip = n_steps - int(np.ceil(N / n_ch))
    pool_x, pool_fh, pool_fo = [x.copy()], [fh.copy()], [fo.copy()]
    budget_hit = False
    for _ in range(n_steps - 1):
        sigma = adapter.sigma
        cand = np.sqrt(1.0 - sigma ** 2) * x + sigma * rng.standard_normal(x.shape)
        c_fh = _fails(m_hat(cand))
        c_fo = np.full(n_ch, np.nan)
        need = ~c_fh
        # keep room for resolving the pool afterwards
        if pair.original_calls - calls0 + need.sum() + N > cfg.budget:
            budget_hit = True
            break
        if need.any():
            c_fo[need] = _fails(pair.eval_original_batch(cand[need]))
        ok = c_fh | (c_fo == 1.0)
        x[ok], fh[ok], fo[ok] = cand[ok], c_fh[ok], c_fo[ok]
        adapter.update(ok.mean())
        pool_x.append(x.copy())
        pool_fh.append(fh.copy())
        pool_fo.append(fo.copy())
    skip = min(skip, max(0, len(pool_x) - 1))
    X = np.concatenate(pool_x[skip:])[:N]
    FH = np.concatenate(pool_fh[skip:])[:N]
    FO = np.concatenate(pool_fo[skip:])[:N]
    unknown = np.isnan(FO)
    if unknown.any():
        uniq, inv = np.unique(X[unknown], axis=0, return_inverse=True)
        FO[unknown] = _fails(pair.eval_original_batch(uniq))[inv.ravel()]
    FO = FO.astype(bool)
    steps = len(FO) // n_ch
    q_o, q_h = float(FO.mean()), float(FH.mean())
    if q_o == 0.0 or q_h == 0.0:
        raise ZeroOverlapError("union pool contains no failures of one of the models")
    cov_o = _binomial_cov(q_o, len(FO), _gamma(FO[: steps * n_ch].reshape(steps, n_ch)))
    cov_h = _binomial_cov(q_h, len(FH), _gamma(FH[: steps * n_ch].reshape(steps, n_ch)))
    used = pair.original_calls - calls0
    res = CorrectionResult(q_o, q_h, q_o / q_h, cov_o, cov_h, used)
    res.low_confidence = budget_hit or res.cov > cfg.cov_target
    return res


@dataclass
class EstimatorConfig:
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    smc: SmcConfig = field(default_factory=SmcConfig)
    correction: CorrectionConfig = field(default_factory=CorrectionConfig)
    union: bool = False
    seed: int = 0


@dataclass
class EstimationReport:
    problem: str
    seed: int
    p_surrogate: float
    p_plus: float
    p_minus: float
    cov_surrogate: float
    correction: CorrectionResult
    p_final: float
    original_calls_learning: int
    original_calls_correction: int
    n_train: int
    n_added: int
    converged: bool
    rho: float
    theta: list
    history: list = field(default_factory=list)
    scatter: dict = field(default_factory=dict)   # training points: y, y_p, y_hat, sigma

    def to_dict(self):
        d = asdict(self)
        d["correction"]["cov"] = self.correction.cov
        return d


def estimate_rare_event(pair, cfg=EstimatorConfig(), state=None):
    """Active learning, surrogate probabilities and the correction factor in one go."""
    lcfg = replace(cfg.learner, seed=derive_seed(cfg.seed, 11))
    pair.reset_calls()
    try:
        predictor, st = run_active_learning(pair, lcfg, state=state)
    except StageError:
        raise
    except CodrivenError as exc:
        raise StageError("active learning", exc) from exc
    calls_learning = pair.original_calls
    smc = replace(cfg.smc, seed=derive_seed(cfg.seed, 12))
    try:
        res = {v: surrogate_probability(predictor, v, smc) for v in ("mean", "lower", "upper")}
    except CodrivenError as exc:
        raise StageError("surrogate probability", exc) from exc
    ccfg = replace(cfg.correction, seed=derive_seed(cfg.seed, 13))
    try:
        if cfg.union:
            corr = correction_factor_union(pair, predictor, res["mean"].terminal_samples, cfg=ccfg)
        else:
            corr = correction_factor(pair, predictor, res["mean"].terminal_samples, cfg=ccfg)
    except ZeroOverlapError:
        raise
    except CodrivenError as exc:
        raise StageError("correction", exc) from exc
    p_hat = res["mean"].p_hat
    ev = predictor.evaluate(st.D.x)
    scatter = {"y": st.D.y.tolist(), "y_p": ev.y_p.tolist(), "y_hat": ev.mean.tolist(),
               "sigma": ev.sigma.tolist()}
    return EstimationReport(
        problem=pair.name, seed=cfg.seed,
        p_surrogate=p_hat, p_plus=res["lower"].p_hat, p_minus=res["upper"].p_hat,
        cov_surrogate=res["mean"].cov, correction=corr, p_final=corr.c_p * p_hat,
        original_calls_learning=calls_learning, original_calls_correction=corr.original_calls,
        n_train=len(st.D), n_added=st.added, converged=st.converged,
        rho=st.history[-1].rho, theta=np.asarray(st.theta).tolist(),
        history=[asdict(h) for h in st.history], scatter=scatter)


def original_probability(pair, cfg=SmcConfig(), chunk=500):
    """Reference subset simulation directly on the original model.

    Inputs the pair declares inadmissible (e.g. a non-positive modulus
    somewhere in the beam field) count as non-failures.  Batches are
    evaluated ``chunk`` rows at a time to bound memory.
    """

    def g(X):
        out = np.full(X.shape[0], np.nan)
        for i in range(0, X.shape[0], chunk):
            part = X[i:i + chunk]
            ok = pair.admissible(part)
            if ok.any():
                out[i:i + chunk][ok] = pair.eval_original_batch(part[ok])
        return out

    return estimate_probability(g, pair.dim, cfg)
