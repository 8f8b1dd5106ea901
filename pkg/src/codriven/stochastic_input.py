"""Gaussian inputs: i.i.d. standard normals, random fields and white-noise excitations.

Every random quantity in the package is driven by a vector ``x`` of i.i.d.
standard normal variables.  The helpers here map such vectors to the physical
inputs of the benchmark problems: an exponentially correlated Young's modulus
field sampled at element centroids, and a band-limited white-noise ground
acceleration built with the spectral representation method.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import InvalidDimensionError, NotPositiveDefiniteError


def stream(seed, index=0):
    """Counter-based random stream keyed by ``(seed, index)``.

    Streams with different indices are statistically independent, so per-sample
    generators can be created in any order without changing results.
    """
    key = np.random.SeedSequence([int(seed), int(index)])
    return np.random.Generator(np.random.Philox(key))


def derive_seed(seed, *keys):
    """Deterministic 63-bit seed derived from a master seed and integer keys."""
    ss = np.random.SeedSequence([int(seed), *[int(k) for k in keys]])
    return int(ss.generate_state(2, dtype=np.uint32).astype(np.uint64) @ [1 << 31, 1])


def sample_standard_normal(n, rng, size=None):
    """Draw ``n`` i.i.d. standard normal values (``size`` rows of them if given)."""
    if n < 1:
        raise InvalidDimensionError(f"dimension must be >= 1, got {n}")
    shape = (n,) if size is None else (size, n)
    return rng.standard_normal(shape)


# --------------------------------------------------------------------------
# Random field
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RandomFieldSpec:
    """Homogeneous Gaussian field with isotropic exponential correlation.

    Field values live at the centroids of an ``nx`` x ``ny`` grid of cells
    covering ``lx`` x ``ly``; cells are ordered row-major (x index fastest).
    """

    nx: int = 50
    ny: int = 20
    lx: float = 5.0
    ly: float = 2.0
    corr_length: float = 10.0
    mean: float = 200e9
    std: float = 30e9

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise InvalidDimensionError("grid must have at least one cell")
        if not self.corr_length > 0:
            raise ValueError("correlation length must be positive")
        if not self.std > 0:
            raise ValueError("standard deviation must be positive")

    @property
    def n(self):
        return self.nx * self.ny

    def centroids(self):
        hx, hy = self.lx / self.nx, self.ly / self.ny
        cx = (np.arange(self.nx) + 0.5) * hx
        cy = (np.arange(self.ny) + 0.5) * hy
        xx, yy = np.meshgrid(cx, cy)  # rows follow y
        return np.column_stack([xx.ravel(), yy.ravel()])

    def correlation(self):
        c = self.centroids()
        d = np.sqrt(((c[:, None, :] - c[None, :, :]) ** 2).sum(-1))
        return np.exp(-d / self.corr_length)


def field_factor(spec, max_retries=3):
    """Lower Cholesky factor of the centroid correlation matrix.

    Diagonal jitter starts at ``1e-10 * trace(R) / n`` and grows tenfold per
    retry when the plain factorization fails.
    """
    R = spec.correlation()
    try:
        return scipy.linalg.cholesky(R, lower=True)
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-10 * np.trace(R) / R.shape[0]
    for _ in range(max_retries):
        try:
            return scipy.linalg.cholesky(R + jitter * np.eye(R.shape[0]), lower=True)
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise NotPositiveDefiniteError(
        f"correlation matrix not positive definite after {max_retries} jitter retries"
    )


def realize_field(spec, L, x):
    """Map standard normal coordinates to cell values ``mean + std * L x``.

    ``x`` may be a single vector of length ``spec.n`` or a ``(batch, n)`` array.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.n:
        raise InvalidDimensionError(f"expected {spec.n} field variables, got {x.shape[-1]}")
    return spec.mean + spec.std * (x @ L.T)


def field_average(cell_values, x=None):
    """Arithmetic mean of the physical field values (last axis)."""
    return np.asarray(cell_values, dtype=float).mean(axis=-1)


# --------------------------------------------------------------------------
# Spectral representation of band-limited white noise
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ProcessSpec:
    s0: float = 5e-3
    omega_max: float = 25 * np.pi
    n_vars: int = 1000
    duration: float = 15.0
    dt: float = 0.005

    def __post_init__(self):
        if self.n_vars < 2 or self.n_vars % 2:
            raise InvalidDimensionError("number of random variables must be even and >= 2")
        if not (self.duration > 0 and self.dt > 0 and self.omega_max > 0):
            raise ValueError("duration, time step and cutoff frequency must be positive")

    @property
    def d_omega(self):
        return 2.0 * self.omega_max / self.n_vars

    @property
    def omegas(self):
        return (np.arange(1, self.n_vars // 2 + 1) - 0.5) * self.d_omega

    @property
    def n_steps(self):
        return int(round(self.duration / self.dt))

    def times(self, dt=None):
        dt = self.dt if dt is None else dt
        return np.arange(int(round(self.duration / dt)) + 1) * dt

    @property
    def variance(self):
        return 2.0 * self.s0 * self.omega_max


@lru_cache(maxsize=8)
def _fft_plan(d_omega, dt, n_times):
    period = 2.0 * np.pi / (d_omega * dt)
    m = int(round(period))
    if abs(period - m) > 1e-9 * period:
        return None
    k = np.arange(n_times)
    phase = np.exp(-0.5j * d_omega * dt * k)
    return m, k % m, phase


@lru_cache(maxsize=4)
def _direct_basis(d_omega, half, dt, n_times):
    t = np.arange(n_times) * dt
    w = (np.arange(1, half + 1) - 0.5) * d_omega
    arg = np.outer(w, t)
    return np.cos(arg), np.sin(arg)


def synthesize_excitation(spec, x, dt=None):
    """Ground acceleration at times ``0, dt, ..., duration``.

    The first half of ``x`` multiplies the cosine terms and the second half the
    sine terms.  When the frequency step and ``dt`` are commensurate the sum is
    evaluated exactly with an inverse FFT; otherwise by direct summation.
    Accepts a single vector or a ``(batch, n_vars)`` array.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.n_vars:
        raise InvalidDimensionError(f"expected {spec.n_vars} process variables, got {x.shape[-1]}")
    dt = spec.dt if dt is None else dt
    single = x.ndim == 1
    X = np.atleast_2d(x)
    half = spec.n_vars // 2
    amp = np.sqrt(2.0 * spec.s0 * spec.d_omega)
    n_times = int(round(spec.duration / dt)) + 1

    plan = _fft_plan(spec.d_omega, dt, n_times)
    if plan is not None and plan[0] > half:
        m, idx, phase = plan
        coef = np.zeros((X.shape[0], m), dtype=complex)
        coef[:, 1 : half + 1] = amp * (X[:, :half] - 1j * X[:, half:])
        series = np.fft.ifft(coef, axis=1) * m
        out = np.ascontiguousarray((series[:, idx] * phase).real)
    else:
        cos_b, sin_b = _direct_basis(spec.d_omega, half, dt, n_times)
        out = amp * (X[:, :half] @ cos_b + X[:, half:] @ sin_b)
    return out[0] if single else out
