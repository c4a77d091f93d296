"""Exact Gaussian sampling of the per-step noise functionals.

For each source mode ``j`` (rate ``a = lambda_j``, weight ``b = b_j``,
independent Brownian motion ``beta_j``) a step of size ``h`` needs the
jointly Gaussian vector

* ``X_j``     — endpoint of the stochastic convolution restarted at the
  step's left endpoint, ``b int_0^h e^{-a(h-r)} dbeta_j(r)``;
* ``I_kj``    — semigroup-weighted time integrals of that running
  convolution, ``int_0^h e^{-lambda_k (h-s)} X_j(s) ds``, one per target
  mode ``k``, with Ito kernel
  ``K_kj(r) = (e^{-a(h-r)} - e^{-lambda_k(h-r)}) / (lambda_k - a)``;
* optionally ``T_j``   — the plain time integral (the ``lambda_k = 0`` row
  of the same family);
* optionally ``R_j``   — the convolution increment at the shifted rate
  ``a - alpha``, the exact-solution increment of a constant-linear drift.

All second moments reduce to the divided differences of
``m0(a, h) = int_0^h e^{-a u} du`` provided by :mod:`spdetaylor.kernels`,
so every covariance entry is a closed form.  Per-mode matrices are
factorized once per ``(model, h)`` and reused across steps and paths.

``aggregate_step`` is the independent oracle: it simulates the same
functionals from jointly Gaussian per-substep increments on a fine grid
(exact Ornstein--Uhlenbeck recursion for the convolution, left-endpoint
quadrature for the time integrals) and returns the fine record so that the
SAME randomness can be aggregated to any coarser step partition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import dd1_m0, dd2_m0, m0
from .model import SpectralModel

__all__ = [
    "NonPositiveStep",
    "FactorizationError",
    "NoiseBundle",
    "StepCovariance",
    "FineNoiseRecord",
    "conv_variance",
    "draw_fine_increments",
    "step_covariance",
    "sample_step",
    "aggregate_step",
    "aggregate_range",
]


class NonPositiveStep(ValueError):
    """The step size must be strictly positive."""


class FactorizationError(RuntimeError):
    """A per-mode covariance stayed indefinite after the jitter ladder."""


def conv_variance(lam: float, b: float, h: float) -> float:
    """Variance ``b^2 (1 - e^{-2 lam h}) / (2 lam)`` with exact ``lam -> 0`` limit."""
    return b * b * m0(2.0 * lam, h)


@dataclass(frozen=True)
class NoiseBundle:
    """One step's worth of noise functionals for every mode.

    ``time_integrals[k, j]`` is ``I_kj`` (target mode ``k``, source mode
    ``j``).  ``carried_conv`` is the convolution state *entering* the step;
    ``updated_carried`` is ``e^{-lambda h} carried + conv``, the state at
    the step's end.  ``flat_integrals`` and ``reference`` are present only
    when requested from :func:`step_covariance` / :func:`aggregate_step`.
    """

    h: float
    conv: np.ndarray
    time_integrals: np.ndarray | None
    carried_conv: np.ndarray
    updated_carried: np.ndarray
    flat_integrals: np.ndarray | None = None
    reference: np.ndarray | None = None


@dataclass(frozen=True)
class StepCovariance:
    """Per-source-mode joint covariance of ``(X_j, I_1j..I_Nj[, T_j][, R_j])``.

    ``per_mode[j]`` is the covariance matrix for source mode ``j`` and
    ``factors[j]`` a matrix square root reproducing it to relative 1e-10.
    ``decay`` caches ``e^{-lambda h}`` for the carried-state update.
    """

    h: float
    per_mode: np.ndarray  # (N, dim, dim)
    factors: np.ndarray  # (N, dim, dim)
    decay: np.ndarray  # (N,)
    include_flat: bool
    reference_rate_shift: float | None

    @property
    def dim(self) -> int:
        return self.per_mode.shape[1]

    @property
    def n_modes(self) -> int:
        return self.per_mode.shape[0]


def _mode_covariance(
    a: float,
    b: float,
    rho: np.ndarray,
    h: float,
    reference_rate_shift: float | None,
) -> np.ndarray:
    """Joint covariance of ``(X, I_{rho_1}, ..., I_{rho_m}[, R])`` for one mode."""
    m = rho.size
    dim = 1 + m + (1 if reference_rate_shift is not None else 0)
    C = np.zeros((dim, dim))
    if b == 0.0:
        return C
    C[0, 0] = m0(2.0 * a, h)
    cross = dd1_m0(2.0 * a, a + rho, h)
    C[0, 1 : 1 + m] = cross
    C[1 : 1 + m, 0] = cross
    s = rho[:, None] - a
    t = rho[None, :] - a
    C[1 : 1 + m, 1 : 1 + m] = dd2_m0(2.0 * a, s, t, h)
    if reference_rate_shift is not None:
        ar = a - reference_rate_shift
        r = dim - 1
        C[r, r] = m0(2.0 * ar, h)
        C[r, 0] = C[0, r] = m0(a + ar, h)
        ref_cross = dd1_m0(a + ar, ar + rho, h)
        C[r, 1 : 1 + m] = ref_cross
        C[1 : 1 + m, r] = ref_cross
    return b * b * C


def _factorize(C: np.ndarray) -> np.ndarray:
    """Cholesky factor with a jitter ladder: 1e-12 trace, at most 3 doublings."""
    if not np.any(C):
        return np.zeros_like(C)
    trace = np.trace(C)
    jitter = 0.0
    for attempt in range(4):
        try:
            return np.linalg.cholesky(C + jitter * np.eye(C.shape[0]))
        except np.linalg.LinAlgError:
            jitter = 1e-12 * trace * 2.0**attempt
    raise FactorizationError(
        "covariance not positive semidefinite within the jitter budget"
    )


def step_covariance(
    model: SpectralModel,
    h: float,
    include_flat: bool = False,
    reference_rate_shift: float | None = None,
) -> StepCovariance:
    """Assemble and factorize the per-mode joint covariances for step ``h``.

    ``include_flat`` appends the plain time integral ``T_j`` (the
    ``lambda = 0`` row).  ``reference_rate_shift = alpha`` appends the
    shifted-rate convolution increment ``R_j`` used as the exact one-step
    reference for the constant-linear drift ``F = alpha I``.
    """
    if not h > 0.0:
        raise NonPositiveStep(f"step size must be positive: {h}")
    lam = model.lambdas
    N = model.dim
    rho = np.concatenate([lam, [0.0]]) if include_flat else lam
    dim = 1 + rho.size + (1 if reference_rate_shift is not None else 0)
    per_mode = np.empty((N, dim, dim))
    factors = np.empty((N, dim, dim))
    for j in range(N):
        C = _mode_covariance(
            float(lam[j]), float(model.bs[j]), rho, h, reference_rate_shift
        )
        per_mode[j] = C
        factors[j] = _factorize(C)
    return StepCovariance(
        h=h,
        per_mode=per_mode,
        factors=factors,
        decay=np.exp(-lam * h),
        include_flat=include_flat,
        reference_rate_shift=reference_rate_shift,
    )


def sample_step(
    model: SpectralModel,
    cov: StepCovariance,
    rng: np.random.Generator,
    carried: np.ndarray,
    size: int | None = None,
) -> NoiseBundle:
    """Draw one step's noise bundle through the precomputed factorization.

    With ``size`` given, draws that many independent bundles at once; all
    bundle arrays then carry a leading sample axis (``size = 1`` consumes
    the stream exactly like the scalar call).
    """
    N = cov.n_modes
    if model.dim != N:
        raise ValueError("covariance was built for a different model size")
    carried = np.asarray(carried, dtype=float)
    shape = (N, cov.dim) if size is None else (size, N, cov.dim)
    z = rng.standard_normal(shape)
    v = np.einsum("jab,...jb->...ja", cov.factors, z)
    conv = v[..., 0]
    time_integrals = np.swapaxes(v[..., 1 : 1 + N], -1, -2).copy()
    flat = v[..., 1 + N] if cov.include_flat else None
    reference = v[..., -1] if cov.reference_rate_shift is not None else None
    return NoiseBundle(
        h=cov.h,
        conv=conv,
        time_integrals=time_integrals,
        carried_conv=carried,
        updated_carried=cov.decay * carried + conv,
        flat_integrals=flat,
        reference=reference,
    )


# ---------------------------------------------------------------------------
# Fine-grid aggregation oracle


@dataclass(frozen=True)
class FineNoiseRecord:
    """Per-substep jointly Gaussian increments on a uniform fine grid.

    ``dbeta[..., m, j]`` is the Brownian increment over substep ``m``;
    ``xi`` the matching exact convolution increment at rate ``lambda_j``
    (weight ``b_j`` included); ``xi_ref`` the increment at the shifted
    rate ``lambda_j - reference_rate_shift`` driven by the same Brownian
    motion (identical array when the shift is zero).  Leading axes, if
    any, index independent samples.
    """

    tau: float
    dbeta: np.ndarray
    xi: np.ndarray
    xi_ref: np.ndarray | None = None
    reference_rate_shift: float | None = None

    @property
    def substeps(self) -> int:
        return self.dbeta.shape[-2]


def draw_fine_increments(
    model: SpectralModel,
    tau: float,
    shape: tuple[int, ...],
    rng: np.random.Generator,
    reference_rate_shift: float | None,
) -> FineNoiseRecord:
    lam = model.lambdas
    b = model.bs
    sqrt_tau = np.sqrt(tau)
    # Conditional construction: dbeta = c0 z0, xi = c1 z0 + c2 z1 with
    # c1 = Cov(dbeta, xi)/sqrt(tau) and c2 the conditional standard
    # deviation (exactly zero when lambda = 0, where xi = b dbeta).
    var_xi = b**2 * m0(2.0 * lam, tau)
    c1 = b * m0(lam, tau) / sqrt_tau
    c2 = np.sqrt(np.maximum(var_xi - c1**2, 0.0))
    want_ref = reference_rate_shift is not None and reference_rate_shift != 0.0
    draws = 3 if want_ref else 2
    z = rng.standard_normal(shape + (model.dim, draws))
    dbeta = sqrt_tau * z[..., 0]
    xi = c1 * z[..., 0] + c2 * z[..., 1]
    if reference_rate_shift is None:
        return FineNoiseRecord(tau, dbeta, xi)
    if not want_ref:
        return FineNoiseRecord(tau, dbeta, xi, xi, 0.0)
    lam_ref = lam - reference_rate_shift
    d1 = b * m0(lam_ref, tau) / sqrt_tau
    cov_xi_ref = b**2 * m0(lam + lam_ref, tau)
    # Third orthogonal direction; when xi is a deterministic multiple of
    # dbeta (c2 = 0) the cross constraint holds automatically and d2 = 0.
    degenerate = c2 <= 1e-12 * np.sqrt(np.maximum(var_xi, 1e-300))
    safe_c2 = np.where(degenerate, 1.0, c2)
    d2 = np.where(degenerate, 0.0, (cov_xi_ref - d1 * c1) / safe_c2)
    var_ref = b**2 * m0(2.0 * lam_ref, tau)
    d3 = np.sqrt(np.maximum(var_ref - d1**2 - d2**2, 0.0))
    xi_ref = d1 * z[..., 0] + d2 * z[..., 1] + d3 * z[..., 2]
    return FineNoiseRecord(tau, dbeta, xi, xi_ref, reference_rate_shift)


def convolution_path(
    model: SpectralModel, record: FineNoiseRecord, lo: int, hi: int
) -> np.ndarray:
    """Running convolution restarted at substep ``lo``: shape (..., hi-lo+1, N).

    Exact Ornstein--Uhlenbeck recursion
    ``X_{m+1} = e^{-lambda tau} X_m + xi_m``.
    """
    decay = np.exp(-model.lambdas * record.tau)
    xi = record.xi
    X = np.empty(xi.shape[:-2] + (hi - lo + 1, model.dim))
    X[..., 0, :] = 0.0
    for m in range(lo, hi):
        X[..., m - lo + 1, :] = decay * X[..., m - lo, :] + xi[..., m, :]
    return X


def aggregate_range(
    model: SpectralModel,
    record: FineNoiseRecord,
    lo: int,
    hi: int,
    with_time_integrals: bool = True,
    include_flat: bool = False,
) -> NoiseBundle:
    """Aggregate the fine record over substeps ``[lo, hi)`` into one bundle.

    The convolution endpoint is exact for the fine grid; the time
    integrals use left-endpoint-frozen values of the running convolution
    against exactly integrated semigroup weights (first order in the
    substep width).
    """
    if not 0 <= lo < hi <= record.substeps:
        raise ValueError(f"invalid substep range [{lo}, {hi})")
    tau = record.tau
    n = hi - lo
    lam = model.lambdas
    X = convolution_path(model, record, lo, hi)
    conv = X[..., -1, :]
    time_integrals = None
    flat = None
    if with_time_integrals:
        # weights[k, m] = e^{-lambda_k (n-1-m) tau} m0(lambda_k, tau)
        powers = np.exp(-np.outer(lam, tau * np.arange(n - 1, -1, -1)))
        weights = powers * m0(lam, tau)[:, None]
        time_integrals = np.einsum("km,...mj->...kj", weights, X[..., :-1, :])
    if include_flat:
        flat = tau * X[..., :-1, :].sum(axis=-2)
    h = n * tau
    return NoiseBundle(
        h=h,
        conv=conv,
        time_integrals=time_integrals,
        carried_conv=np.zeros(model.dim),
        updated_carried=conv,
        flat_integrals=flat,
    )


def aggregate_step(
    model: SpectralModel,
    h: float,
    substeps: int,
    rng: np.random.Generator,
    reference_rate_shift: float | None = None,
    with_time_integrals: bool = True,
    include_flat: bool = False,
    samples: int | None = None,
) -> tuple[NoiseBundle, FineNoiseRecord]:
    """Simulate one step of size ``h`` on a fine grid of ``substeps`` pieces.

    With ``samples`` given, that many independent steps are simulated at
    once and every array gains a leading sample axis.
    """
    if not h > 0.0:
        raise NonPositiveStep(f"step size must be positive: {h}")
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    shape = (substeps,) if samples is None else (samples, substeps)
    record = draw_fine_increments(
        model, h / substeps, shape, rng, reference_rate_shift
    )
    bundle = aggregate_range(
        model, record, 0, substeps, with_time_integrals, include_flat
    )
    return bundle, record
