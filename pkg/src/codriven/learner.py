"""Active learning of the coupled physics/data surrogate.

Each iteration recalibrates the physics surrogate, refits the error GP,
estimates the failure probability under the lower and upper confidence
surrogates, and (unless the width ``P+ - P-`` has stabilized) adds the
candidate from the critical region ``|y_hat| / sigma <= delta`` whose
surrogate output is farthest from those already in the training set.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .calibrate import calibrate
from .errors import CodrivenError, LevelOverflowError, RegionUnreachableError, StageError
from .hetgp import ErrorDataset, HetGpModel, fit
from .models import TrainingSet
from .sampler import SmcConfig, estimate_probability, sample_critical_region
from .stochastic_input import derive_seed, stream

log = logging.getLogger(__name__)


@dataclass
class PredictorEval:
    y_p: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray

    @property
    def mean(self):
        return self.y_p + self.mu

    @property
    def lower(self):
        return self.mean - self.sigma

    @property
    def upper(self):
        return self.mean + self.sigma

    @property
    def u(self):
        return np.abs(self.mean) / self.sigma


class SurrogatePredictor:
    """``y_hat = y_p + mu_eps(y_p)`` with confidence variants ``y_hat -/+ sigma_eps``.

    Rows where the physics surrogate cannot be evaluated come back as NaN,
    which the samplers treat as outside every level set.
    """

    def __init__(self, pair, theta, gp):
        self.pair = pair
        self.theta = pair.check_theta(theta)
        self.gp = gp

    @property
    def dim(self):
        return self.pair.dim

    def evaluate(self, X):
        F = self.pair.features(X)
        y_p = self.pair.eval_surrogate_features(F, self.theta, errors="mask")
        return self.evaluate_yp(y_p)

    def evaluate_yp(self, y_p):
        mu = np.full_like(y_p, np.nan)
        sd = np.full_like(y_p, np.nan)
        ok = np.isfinite(y_p)
        if ok.any():
            m, v = self.gp.predict(y_p[ok])
            mu[ok], sd[ok] = m, np.sqrt(v)
        return PredictorEval(y_p, mu, sd)

    def mean(self, X):
        return self.evaluate(X).mean

    def lower(self, X):
        return self.evaluate(X).lower

    def upper(self, X):
        return self.evaluate(X).upper

    def variant(self, name):
        if name not in ("mean", "lower", "upper"):
            raise ValueError(f"unknown predictor variant {name!r}")
        return getattr(self, name)

    def u_statistic(self, X):
        return self.evaluate(X).u


@dataclass
class LearnerConfig:
    n0: int = 30
    delta: float = 2.0
    eta: float = 0.05
    k_consec: int = 2
    max_iters: int = 100
    n_candidates: int = 2000
    smc: SmcConfig = field(default_factory=SmcConfig)
    calib_restarts: int = 3
    seed: int = 0
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if self.n0 < 4:
            raise ValueError("n0 must be at least 4")
        if self.delta <= 0 or self.eta <= 0 or self.k_consec < 1 or self.max_iters < 0:
            raise ValueError("delta, eta, k_consec must be positive and max_iters non-negative")


@dataclass
class HistoryEntry:
    iteration: int
    n_train: int
    rho: float
    theta: list
    p_mean: float
    p_plus: float
    p_minus: float
    p_delta: float
    covs: list


@dataclass
class LearningState:
    D: TrainingSet
    iteration: int = 0
    history: list = field(default_factory=list)
    stopped: bool = False
    converged: bool = False
    theta: np.ndarray | None = None
    gp: HetGpModel | None = None
    n0: int = 0

    @property
    def added(self):
        return len(self.D) - self.n0

    def p_delta_history(self):
        return [h.p_delta for h in self.history]


def initial_design(pair, n0, seed):
    """``n0`` independent standard normal points evaluated by the original model."""
    if n0 < 4:
        raise ValueError("initial design needs at least 4 points")
    rng = stream(seed, 0)
    X = rng.standard_normal((n0, pair.dim))
    return TrainingSet(X, pair.eval_original_batch(X))


def select_next(cand_yp, train_yp, exclude=None):
    """Index of the candidate whose surrogate output is farthest from the training outputs.

    ``exclude`` is an optional boolean mask of inadmissible candidates
    (e.g. duplicates of training inputs).  Ties go to the lowest index.
    """
    cand_yp = np.asarray(cand_yp, dtype=float).ravel()
    train_yp = np.asarray(train_yp, dtype=float).ravel()
    if cand_yp.size == 0 or train_yp.size == 0:
        raise ValueError("select_next needs candidates and training outputs")
    dist = np.abs(cand_yp[:, None] - train_yp[None, :]).min(axis=1)
    dist = np.where(np.isfinite(dist), dist, -np.inf)
    if exclude is not None:
        dist = np.where(exclude, -np.inf, dist)
        if np.all(np.isneginf(dist)):
            raise ValueError("no admissible candidate")
    return int(np.argmax(dist))


def check_stop(p_delta, eta, k_consec=1):
    """True when the last ``k_consec`` relative changes of ``P_delta`` are all within ``eta``."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    p = list(p_delta)
    if len(p) < k_consec + 1:
        return False
    for prev, cur in zip(p[-k_consec - 1:-1], p[-k_consec:]):
        if cur == 0.0:
            if prev != 0.0:
                return False
        elif abs(cur - prev) / cur > eta:
            return False
    return True


def _probability(predictor, variant, cfg):
    g = predictor.variant(variant)
    try:
        return estimate_probability(g, predictor.dim, cfg)
    except LevelOverflowError:
        # beyond the reach of the level budget: below p0 ** max_levels
        return None


def run_active_learning(pair, cfg=LearnerConfig(), state=None):
    """Train the coupled surrogate; returns ``(SurrogatePredictor, LearningState)``.

    Pass a ``LearningState`` (e.g. from ``load_checkpoint``) to resume.
    """
    if state is None:
        try:
            D = initial_design(pair, cfg.n0, derive_seed(cfg.seed, 1))
        except CodrivenError as exc:
            raise StageError("initial design", exc) from exc
        state = LearningState(D, theta=pair.theta_init.copy(), n0=cfg.n0)
    features = pair.features(state.D.x)
    # one sampler seed for the whole run: P+/P- changes then reflect the model
    smc = replace(cfg.smc, seed=derive_seed(cfg.seed, 2))
    predictor = None
    while True:
        m = state.iteration
        try:
            cal = calibrate(pair, state.D, state.theta, features=features,
                            restarts=cfg.calib_restarts, seed=derive_seed(cfg.seed, 3, m))
        except CodrivenError as exc:
            raise StageError("calibration", exc, m) from exc
        state.theta = cal.theta_star
        y_p = pair.eval_surrogate_features(features, state.theta)
        try:
            state.gp = fit(ErrorDataset.from_responses(state.D.y, y_p), init=state.gp,
                           seed=derive_seed(cfg.seed, 4, m))
        except CodrivenError as exc:
            raise StageError("error model", exc, m) from exc
        predictor = SurrogatePredictor(pair, state.theta, state.gp)

        res = {v: _probability(predictor, v, smc) for v in ("mean", "lower", "upper")}
        p = {v: (0.0 if r is None else r.p_hat) for v, r in res.items()}
        covs = [np.nan if r is None else r.cov for r in res.values()]
        entry = HistoryEntry(m, len(state.D), cal.rho_star, state.theta.tolist(), p["mean"],
                             p["lower"], p["upper"], p["lower"] - p["upper"], covs)
        state.history.append(entry)
        log.info("iter %d  n=%d  rho=%.5f  P=%.3e  P+=%.3e  P-=%.3e", m, len(state.D),
                 cal.rho_star, p["mean"], p["lower"], p["upper"])

        if check_stop(state.p_delta_history(), cfg.eta, cfg.k_consec):
            state.stopped = state.converged = True
        elif m >= cfg.max_iters:
            state.stopped = True
        if state.stopped:
            _save(state, cfg)
            return predictor, state

        rcfg = replace(smc, seed=derive_seed(cfg.seed, 5, m))
        try:
            try:
                region = sample_critical_region(predictor, cfg.delta, cfg.n_candidates, rcfg)
            except RegionUnreachableError as exc:
                # widen to the statistic level the sampler did reach
                delta = cfg.delta + 1.001 * exc.last_threshold
                log.info("iter %d: critical region unreachable, widening delta to %.3g", m, delta)
                region = sample_critical_region(predictor, delta, cfg.n_candidates, rcfg)
        except CodrivenError as exc:
            raise StageError("critical region", exc, m) from exc
        cand_x, cand_yp = region.x, region.y_p
        ok = pair.admissible(cand_x)
        if not ok.any():
            # region lies where the original is undefined: pull candidates back to its edge
            cand_x = shrink_to_admissible(pair, cand_x)
            cand_yp = pair.eval_surrogate_features(pair.features(cand_x), state.theta, errors="mask")
            ok = np.ones(len(cand_x), dtype=bool)
            log.info("iter %d: no admissible candidate, using radial projections", m)
        exclude = np.array([state.D.contains(x) for x in cand_x]) | ~ok
        try:
            idx = select_next(cand_yp, y_p, exclude=exclude)
        except ValueError as exc:
            raise StageError("point selection", exc, m) from exc
        x_new = cand_x[idx]
        try:
            y_new = pair.eval_original_batch(x_new[None, :])[0]
        except CodrivenError as exc:
            raise StageError("original model", exc, m) from exc
        state.D = state.D.add(x_new, y_new)
        features = _append(features, pair.features(x_new[None, :]))
        state.iteration = m + 1
        _save(state, cfg)


def shrink_to_admissible(pair, X, n_bisect=40):
    """Scale each row of ``X`` toward the origin until the pair admits it.

    Returns ``t * x`` with ``t`` in ``[0, 1]`` the largest admissible factor
    found by bisection; the origin (mean input) must be admissible.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if not pair.admissible(np.zeros((1, X.shape[1])))[0]:
        raise ValueError("the mean input is not admissible")
    lo = np.where(pair.admissible(X), 1.0, 0.0)
    hi = np.ones(X.shape[0])
    todo = lo < 1.0
    for _ in range(n_bisect):
        if not todo.any():
            break
        mid = 0.5 * (lo[todo] + hi[todo])
        good = pair.admissible(mid[:, None] * X[todo])
        lo[todo] = np.where(good, mid, lo[todo])
        hi[todo] = np.where(good, hi[todo], mid)
    return lo[:, None] * X


def _append(F, row):
    return np.concatenate([F, row], axis=0)


# -- checkpoints ---------------------------------------------------------------

def _save(state, cfg):
    if cfg.checkpoint_dir is None:
        return
    save_checkpoint(state, Path(cfg.checkpoint_dir))


def save_checkpoint(state, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    np.savez(directory / "training.npz", x=state.D.x, y=state.D.y)
    meta = {
        "iteration": state.iteration,
        "n0": state.n0,
        "stopped": state.stopped,
        "converged": state.converged,
        "theta": None if state.theta is None else np.asarray(state.theta).tolist(),
        "gp": None if state.gp is None else state.gp.to_dict(),
        "history": [asdict(h) for h in state.history],
    }
    tmp = directory / "state.json.tmp"
    tmp.write_text(json.dumps(meta))
    tmp.replace(directory / "state.json")


def load_checkpoint(directory):
    """Rebuild a ``LearningState`` saved by ``save_checkpoint``.

    A state saved after a point was added resumes at the next iteration; a
    stopped state is returned as is.
    """
    directory = Path(directory)
    meta = json.loads((directory / "state.json").read_text())
    arr = np.load(directory / "training.npz")
    state = LearningState(TrainingSet(arr["x"], arr["y"]), meta["iteration"],
                          [HistoryEntry(**h) for h in meta["history"]],
                          meta["stopped"], meta["converged"],
                          None if meta["theta"] is None else np.asarray(meta["theta"]),
                          None if meta["gp"] is None else HetGpModel.from_dict(meta["gp"]),
                          meta["n0"])
    if not state.stopped:
        # history entries of the resumed iteration are recomputed
        state.history = [h for h in state.history if h.iteration < state.iteration]
    return state
