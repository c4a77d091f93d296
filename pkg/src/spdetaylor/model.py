"""Concrete SPDE instances with simultaneously diagonal linear part and noise.

A model holds the eigenvalues ``lambdas`` of the negative generator, diagonal
noise weights ``bs``, a shift ``kappa`` making ``kappa + lambda_i > 0``, a
nonlinearity with directional derivatives, and the smoothness parameters
``(gamma, delta)`` that drive the order predictions.

Nonlinearities come in three kinds:

* ``zero`` — the trivial drift.
* ``linear_mult`` — multiplication by a constant or by a fixed spatial
  profile; constant multiplication is exact in the eigenbasis, profiles go
  through collocation.
* ``pointwise`` — a smooth scalar function applied to the field values,
  evaluated by collocation: transform to a physical grid, apply the
  derivative table pointwise, multiply the transformed directions, and
  project back.  The grid has 2N+1 points per axis so products of two
  retained modes are alias-free; higher products are approximate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Sequence

import numpy as np
from scipy.fft import dst, dstn

__all__ = [
    "DerivativeOrderExceeded",
    "SmoothnessParams",
    "NonlinearitySpec",
    "GalerkinState",
    "SpectralModel",
    "heat_1d_model",
    "trace_class_3d_model",
    "sode_model",
    "apply_F",
    "apply_F_array",
    "Assumption3Report",
    "assumption3_report",
]


class DerivativeOrderExceeded(Exception):
    """A directional derivative beyond the nonlinearity's table was requested."""


@dataclass(frozen=True)
class SmoothnessParams:
    """Regularity exponents; ``*_strict`` marks an open-interval supremum.

    When a flag is set the stored value is the supremum of admissible
    exponents (e.g. ``gamma = 0.25`` standing for "any gamma < 1/4"), and
    order predictions derived from it are open bounds.
    """

    gamma: float
    delta: float
    gamma_strict: bool = False
    delta_strict: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1]: {self.gamma}")
        if self.gamma == 1.0 and not self.gamma_strict:
            raise ValueError("gamma = 1 is only admissible as a supremum")
        if not 0.0 < self.delta <= 0.5:
            raise ValueError(f"delta must lie in (0, 1/2]: {self.delta}")


# Derivative tables for the built-in pointwise nonlinearities, indexed by
# derivative order 0..4.  sech^2 = 1 - tanh^2 keeps everything in terms of
# a single stable primitive.
def _tanh_table() -> list[Callable[[np.ndarray], np.ndarray]]:
    def d0(x):
        return np.tanh(x)

    def d1(x):
        return 1.0 - np.tanh(x) ** 2

    def d2(x):
        t = np.tanh(x)
        return -2.0 * t * (1.0 - t**2)

    def d3(x):
        t = np.tanh(x)
        return -2.0 * (1.0 - t**2) * (1.0 - 3.0 * t**2)

    def d4(x):
        t = np.tanh(x)
        return 8.0 * t * (1.0 - t**2) * (2.0 - 3.0 * t**2)

    return [d0, d1, d2, d3, d4]


def _cubic_table() -> list[Callable[[np.ndarray], np.ndarray]]:
    return [
        lambda x: x**3,
        lambda x: 3.0 * x**2,
        lambda x: 6.0 * x,
        lambda x: np.full_like(x, 6.0),
        lambda x: np.zeros_like(x),
    ]


_POINTWISE_TABLES: dict[str, Callable[[], list]] = {
    "tanh": _tanh_table,
    "cubic": _cubic_table,
}


@dataclass(frozen=True)
class NonlinearitySpec:
    """Drift specification: kind plus the data needed to evaluate it.

    Use the factory classmethods; the constructor is not validated for
    arbitrary field combinations.
    """

    kind: str  # "zero" | "linear_mult" | "pointwise"
    alpha: float | None = None
    alpha_profile: Callable[..., np.ndarray] | None = None
    g_name: str | None = None
    max_derivative: int = 4

    @classmethod
    def zero(cls) -> "NonlinearitySpec":
        return cls(kind="zero", max_derivative=2**31 - 1)

    @classmethod
    def linear_mult(
        cls, alpha: float | Callable[..., np.ndarray]
    ) -> "NonlinearitySpec":
        """Multiplication by a constant or by a spatial profile ``alpha(x)``.

        A callable receives the physical grid coordinates (one array per
        spatial axis) and must return the profile values on that grid.
        """
        if callable(alpha):
            return cls(
                kind="linear_mult", alpha_profile=alpha, max_derivative=2**31 - 1
            )
        return cls(kind="linear_mult", alpha=float(alpha), max_derivative=2**31 - 1)

    @classmethod
    def pointwise(cls, g: str) -> "NonlinearitySpec":
        """Smooth scalar nonlinearity applied to field values (``tanh``/``cubic``)."""
        if g not in _POINTWISE_TABLES:
            raise ValueError(
                f"unknown pointwise nonlinearity {g!r}; choose from "
                f"{sorted(_POINTWISE_TABLES)}"
            )
        if g == "cubic":
            warnings.warn(
                "the cubic nonlinearity has unbounded derivatives; order "
                "guarantees assume bounded derivatives and may degrade",
                stacklevel=2,
            )
        return cls(kind="pointwise", g_name=g, max_derivative=4)

    @property
    def is_linear(self) -> bool:
        """True when second and higher derivatives vanish identically."""
        return self.kind in ("zero", "linear_mult")

    @property
    def is_constant_linear(self) -> bool:
        """True for multiplication by a constant (exact in the eigenbasis)."""
        return self.kind == "zero" or (
            self.kind == "linear_mult" and self.alpha is not None
        )

    @property
    def constant_alpha(self) -> float:
        """The constant multiplier (0 for the zero drift)."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "linear_mult" and self.alpha is not None:
            return self.alpha
        raise ValueError("nonlinearity has no constant multiplier")


@dataclass(frozen=True)
class GalerkinState:
    """Coordinates of a field in the truncated eigenbasis."""

    coeffs: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.coeffs, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("coeffs must be a nonempty 1-D real vector")
        if not np.all(np.isfinite(arr)):
            raise ValueError("coeffs must be finite")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    def __len__(self) -> int:
        return self.coeffs.size


@dataclass(frozen=True)
class SpectralModel:
    """Diagonal SPDE instance: eigenvalues, noise weights, drift, smoothness.

    ``collocation`` selects the physical-space representation used for
    non-constant nonlinearities: ``"sine_1d"`` (Dirichlet sine basis on the
    unit interval), ``"sine_3d"`` (product sine basis on the unit cube,
    ``modes_per_axis`` per direction), or ``"identity"`` (coefficients are
    the physical values, as for systems of scalar equations).
    """

    name: str
    lambdas: np.ndarray
    bs: np.ndarray
    kappa: float
    nonlinearity: NonlinearitySpec
    smoothness: SmoothnessParams
    collocation: str = "identity"
    modes_per_axis: int | None = None
    index_set: tuple | None = None

    def __post_init__(self) -> None:
        lam = np.asarray(self.lambdas, dtype=float)
        b = np.asarray(self.bs, dtype=float)
        if lam.ndim != 1 or lam.size < 1:
            raise ValueError("lambdas must be a nonempty 1-D vector")
        if b.shape != lam.shape:
            raise ValueError("bs must have the same length as lambdas")
        if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(b))):
            raise ValueError("lambdas and bs must be finite")
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        if self.kappa + lam.min() <= 0:
            raise ValueError("kappa + lambda_i must be positive for every mode")
        if self.collocation not in ("identity", "sine_1d", "sine_3d"):
            raise ValueError(f"unknown collocation {self.collocation!r}")
        if self.collocation == "sine_3d":
            n = self.modes_per_axis
            if n is None or n**3 != lam.size:
                raise ValueError(
                    "sine_3d collocation needs modes_per_axis with "
                    "modes_per_axis**3 == dim"
                )
        for arr, name in ((lam, "lambdas"), (b, "bs")):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.lambdas.size

    def state(self, coeffs: Sequence[float]) -> GalerkinState:
        """Wrap coefficients as a state of this model, checking the length."""
        st = GalerkinState(np.asarray(coeffs, dtype=float))
        if len(st) != self.dim:
            raise ValueError(f"expected {self.dim} coefficients, got {len(st)}")
        return st


# ---------------------------------------------------------------------------
# Model presets


def heat_1d_model(
    N: int, nonlinearity: NonlinearitySpec | None = None
) -> SpectralModel:
    """Heat equation on the unit interval with space-time white noise.

    Eigenvalues ``pi^2 n^2`` for ``n = 1..N``, unit noise weights.  The
    noise is only in the domain of smoothing orders ``gamma < 1/4``, so the
    preset stores ``gamma = 1/4`` as a strict supremum, with ``delta = 1/4``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if nonlinearity is None:
        nonlinearity = NonlinearitySpec.zero()
    n = np.arange(1, N + 1, dtype=float)
    return SpectralModel(
        name="heat1d",
        lambdas=np.pi**2 * n**2,
        bs=np.ones(N),
        kappa=0.0,
        nonlinearity=nonlinearity,
        smoothness=SmoothnessParams(
            gamma=0.25, delta=0.25, gamma_strict=True, delta_strict=False
        ),
        collocation="sine_1d",
        index_set=tuple(range(1, N + 1)),
    )


def trace_class_3d_model(
    n: int, nonlinearity: NonlinearitySpec | None = None
) -> SpectralModel:
    """Heat equation on the unit cube with trace-class noise.

    Index set ``{1..n}^3`` flattened lexicographically; ``lambda_i =
    pi^2 (i1^2 + i2^2 + i3^2)`` and ``b_i = 1/(i1 i2 i3)``.  Preset
    smoothness ``gamma = 1/2`` (strict supremum), ``delta = 1/2``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if nonlinearity is None:
        nonlinearity = NonlinearitySpec.zero()
    idx = tuple(product(range(1, n + 1), repeat=3))
    arr = np.array(idx, dtype=float)
    return SpectralModel(
        name="trace3d",
        lambdas=np.pi**2 * (arr**2).sum(axis=1),
        bs=1.0 / arr.prod(axis=1),
        kappa=0.0,
        nonlinearity=nonlinearity,
        smoothness=SmoothnessParams(
            gamma=0.5, delta=0.5, gamma_strict=True, delta_strict=False
        ),
        collocation="sine_3d",
        modes_per_axis=n,
        index_set=idx,
    )


def sode_model(
    d: int,
    bs: Sequence[float] | None = None,
    nonlinearity: NonlinearitySpec | None = None,
) -> SpectralModel:
    """System of scalar equations: zero eigenvalues, identity semigroup.

    With ``lambda = 0`` the exponential integrators collapse to their
    classical counterparts (exponential Euler becomes Euler--Maruyama).
    ``kappa = 1`` keeps ``kappa + lambda_i`` positive.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if bs is None:
        bs = np.ones(d)
    if nonlinearity is None:
        nonlinearity = NonlinearitySpec.zero()
    return SpectralModel(
        name="sode",
        lambdas=np.zeros(d),
        bs=np.asarray(bs, dtype=float),
        kappa=1.0,
        nonlinearity=nonlinearity,
        smoothness=SmoothnessParams(
            gamma=1.0, delta=0.5, gamma_strict=True, delta_strict=False
        ),
        collocation="identity",
        index_set=tuple(range(1, d + 1)),
    )


# ---------------------------------------------------------------------------
# Collocation transforms
#
# Sine basis on (0,1): e_n(x) = sqrt(2) sin(n pi x).  On the grid
# x_p = p/(L+1), p = 1..L with L = 2N+1, the type-I discrete sine transform
# satisfies dst(a, 1)[p-1] = 2 sum_j a_j sin(pi j p / (L+1)), and is its own
# inverse up to the factor 2(L+1).  Products of two retained modes have
# frequency <= 2N < L and are therefore represented exactly.

_SQRT2 = math.sqrt(2.0)


def _grid_points_1d(N: int) -> np.ndarray:
    L = 2 * N + 1
    return np.arange(1, L + 1) / (L + 1)


def _to_grid(model: SpectralModel, c: np.ndarray) -> np.ndarray:
    """Coefficients ``(..., N)`` -> field values on the collocation grid."""
    if model.collocation == "identity":
        return c
    if model.collocation == "sine_1d":
        N = model.dim
        L = 2 * N + 1
        padded = np.zeros(c.shape[:-1] + (L,))
        padded[..., :N] = c * (0.5 * _SQRT2)
        return dst(padded, type=1, axis=-1)
    n = model.modes_per_axis
    L = 2 * n + 1
    cube = c.reshape(c.shape[:-1] + (n, n, n))
    padded = np.zeros(c.shape[:-1] + (L, L, L))
    padded[..., :n, :n, :n] = cube * (0.5 * _SQRT2) ** 3
    return dstn(padded, type=1, axes=(-3, -2, -1))


def _from_grid(model: SpectralModel, u: np.ndarray) -> np.ndarray:
    """Field values on the collocation grid -> coefficients ``(..., N)``."""
    if model.collocation == "identity":
        return u
    if model.collocation == "sine_1d":
        N = model.dim
        L = 2 * N + 1
        full = dst(u, type=1, axis=-1) / ((L + 1) * _SQRT2)
        return full[..., :N]
    n = model.modes_per_axis
    L = 2 * n + 1
    full = dstn(u, type=1, axes=(-3, -2, -1)) / ((L + 1) * _SQRT2) ** 3
    trunc = full[..., :n, :n, :n]
    return trunc.reshape(u.shape[:-3] + (n**3,))


def _profile_on_grid(model: SpectralModel) -> np.ndarray:
    """Evaluate a linear-multiplication profile on the collocation grid."""
    prof = model.nonlinearity.alpha_profile
    if model.collocation == "identity":
        raise ValueError(
            "profile nonlinearities need a spatial collocation grid"
        )
    if model.collocation == "sine_1d":
        return np.asarray(prof(_grid_points_1d(model.dim)), dtype=float)
    x = _grid_points_1d(model.modes_per_axis)
    x1, x2, x3 = np.meshgrid(x, x, x, indexing="ij")
    return np.asarray(prof(x1, x2, x3), dtype=float)


# ---------------------------------------------------------------------------
# Directional derivatives of the drift


def apply_F_array(
    model: SpectralModel,
    order: int,
    v: np.ndarray,
    dirs: Sequence[np.ndarray] = (),
) -> np.ndarray:
    """Coordinates of ``F^(order)(v)(dirs...)``, batched over leading axes.

    ``v`` has shape ``(..., N)``; each direction must broadcast against it.
    The result broadcasts all inputs.
    """
    spec = model.nonlinearity
    if order < 0:
        raise ValueError("order must be >= 0")
    if len(dirs) != order:
        raise ValueError(f"order {order} needs exactly {order} directions")
    if order > spec.max_derivative:
        raise DerivativeOrderExceeded(
            f"derivative order {order} exceeds the nonlinearity's table "
            f"({spec.max_derivative})"
        )
    v = np.asarray(v, dtype=float)
    dirs = [np.asarray(w, dtype=float) for w in dirs]
    shape = np.broadcast_shapes(v.shape, *(w.shape for w in dirs))

    if spec.kind == "zero":
        return np.zeros(shape)

    if spec.kind == "linear_mult":
        if order >= 2:
            return np.zeros(shape)
        arg = v if order == 0 else dirs[0]
        if spec.alpha is not None:
            return np.broadcast_to(spec.alpha * arg, shape).copy()
        prof = _profile_on_grid(model)
        out = _from_grid(model, prof * _to_grid(model, arg))
        return np.broadcast_to(out, shape).copy()

    table = _POINTWISE_TABLES[spec.g_name]()
    values = table[order](_to_grid(model, v))
    for w in dirs:
        values = values * _to_grid(model, w)
    out = _from_grid(model, values)
    return np.broadcast_to(out, shape).copy()


def apply_F(
    model: SpectralModel,
    order: int,
    v: GalerkinState,
    dirs: Sequence[GalerkinState] = (),
) -> GalerkinState:
    """Directional derivative ``F^(order)(v)(dirs...)`` on wrapped states."""
    out = apply_F_array(
        model, order, v.coeffs, [w.coeffs for w in dirs]
    )
    return GalerkinState(out)


# ---------------------------------------------------------------------------
# Noise-regularity diagnostic


@dataclass(frozen=True)
class Assumption3Report:
    """Partial sums of ``b_i^2 (kappa + lambda_i)^{2 gamma - 1}`` + verdict."""

    gamma: float
    partial_sums: np.ndarray
    verdict: str  # "Converges" | "Diverges" | "Unknown"
    rule: str


def _family_summands(model: SpectralModel, gamma: float, terms: int) -> np.ndarray:
    """Summands for the model's infinite family, extended past the truncation."""
    s = 2.0 * gamma - 1.0
    if model.name == "heat1d":
        n = np.arange(1, terms + 1, dtype=float)
        return (np.pi**2 * n**2) ** s
    if model.name == "trace3d":
        # Enumerate the cube {1..m}^3 by increasing eigenvalue until we have
        # enough terms; the ordering does not affect convergence of the
        # nonnegative series, only the shape of the partial sums.
        m = max(2, math.ceil(terms ** (1.0 / 3.0)) + 2)
        arr = np.array(list(product(range(1, m + 1), repeat=3)), dtype=float)
        lam = np.pi**2 * (arr**2).sum(axis=1)
        b2 = 1.0 / arr.prod(axis=1) ** 2
        order = np.argsort(lam, kind="stable")
        return (b2 * lam**s)[order][:terms]
    # sode / ad-hoc: use the stored finite data.
    vals = model.bs**2 * (model.kappa + model.lambdas) ** s
    return vals[:terms]


def assumption3_report(
    model: SpectralModel, gamma: float, terms: int
) -> Assumption3Report:
    """Partial sums of the noise-regularity series and a convergence verdict.

    For the built-in families the verdict comes from the closed-form
    exponent of the summands; for ad-hoc models only the truncated partial
    sums are available and the verdict is ``Unknown`` (unless all noise
    weights vanish, which converges trivially).
    """
    if terms < 1:
        raise ValueError("terms must be >= 1")
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    summands = _family_summands(model, gamma, terms)
    sums = np.cumsum(summands)

    if not np.any(model.bs):
        return Assumption3Report(gamma, sums, "Converges", "all noise weights are zero")
    if model.name == "heat1d":
        # Summand ~ n^{4 gamma - 2}: a p-series converging iff gamma < 1/4.
        verdict = "Converges" if gamma < 0.25 else "Diverges"
        rule = f"p-series with exponent {4 * gamma - 2:g}"
    elif model.name == "trace3d":
        # b_i^2 lambda_i^{2 gamma - 1} with b_i = 1/(i1 i2 i3): converges
        # iff 2 gamma - 1 < 1/2, i.e. gamma < 3/4.
        verdict = "Converges" if gamma < 0.75 else "Diverges"
        rule = "product family, threshold gamma = 3/4"
    elif model.name == "sode":
        verdict = "Converges"
        rule = "finite family"
    else:
        verdict = "Unknown"
        rule = "no symbolic tail rule for ad-hoc models"
    return Assumption3Report(gamma, sums, verdict, rule)
