"""Stable closed forms for exponential moment integrals and their divided
differences.

Everything downstream (phi-weights, deterministic double integrals, covariances
of convolution functionals) reduces to the primitives

    m0(a, h) = int_0^h e^{-a u} du
    m1(a, h) = int_0^h u e^{-a u} du
    m2(a, h) = int_0^h u^2 e^{-a u} du

and to first/second divided differences of m0 in the rate argument.  Direct
evaluation of the closed forms suffers catastrophic cancellation for small
|a|*h and for nearly coincident rates; each function below switches to a
truncated power series inside a window chosen so that the worst-case relative
error stays near 1e-11.  All functions broadcast over numpy arrays.
"""

from __future__ import annotations

from math import factorial as _factorial

import numpy as np

__all__ = [
    "m0", "m1", "m2", "two_exp_integral", "dd1_m0", "dd2_m0",
    "ou_trapezoid_cumulative",
]

# Series windows (on the dimensionless x = a*h).  PHI_SERIES_WINDOW is the
# contractual two-term switch used by the scheme workspace; the wider windows
# carry enough terms that both branches agree to ~1e-11 at the boundary.
PHI_SERIES_WINDOW = 1e-12
_M_SERIES_WINDOW = 0.05
_DD_TIE_WINDOW = 1e-5
_DD2_SMALL_WINDOW = 1e-3


def _asarrays(*vals):
    arrs = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in vals))
    return arrs


def m0(a, h):
    """int_0^h e^{-a u} du = (1 - e^{-a h})/a, with the a -> 0 limit h.

    Uses expm1 away from zero; inside |a*h| < 1e-12 the two-term series
    h*(1 - a*h/2) (the same switch the scheme workspace documents).
    """
    a, h = _asarrays(a, h)
    x = a * h
    small = np.abs(x) < PHI_SERIES_WINDOW
    safe_a = np.where(small, 1.0, a)
    general = -np.expm1(-x) / safe_a
    series = h * (1.0 - 0.5 * x)
    out = np.where(small, series, general)
    return out if out.ndim else float(out)


def _poly_series(x, coeffs):
    # Horner evaluation of sum coeffs[k] * x^k.
    acc = np.zeros_like(x)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


# Series coefficients of m1/h^2 and m2/h^3 in x = a*h:
#   m1 = h^2 * sum (-x)^k / (k! (k+2)),  m2 = h^3 * sum (-x)^k / (k! (k+3)).
_M1_COEFFS = [(-1.0) ** k / _factorial(k) / (k + 2) for k in range(9)]
_M2_COEFFS = [(-1.0) ** k / _factorial(k) / (k + 3) for k in range(9)]


def m1(a, h):
    """int_0^h u e^{-a u} du = (1 - (1 + a h) e^{-a h})/a^2, series near 0."""
    a, h = _asarrays(a, h)
    x = a * h
    small = np.abs(x) < _M_SERIES_WINDOW
    safe_a = np.where(small, 1.0, a)
    general = (1.0 - (1.0 + x) * np.exp(-x)) / safe_a**2
    series = h**2 * _poly_series(x, _M1_COEFFS)
    out = np.where(small, series, general)
    return out if out.ndim else float(out)


def m2(a, h):
    """int_0^h u^2 e^{-a u} du = (2 - (x^2+2x+2) e^{-x})/a^3, series near 0."""
    a, h = _asarrays(a, h)
    x = a * h
    small = np.abs(x) < _M_SERIES_WINDOW
    safe_a = np.where(small, 1.0, a)
    general = (2.0 - (x * x + 2.0 * x + 2.0) * np.exp(-x)) / safe_a**3
    series = h**3 * _poly_series(x, _M2_COEFFS)
    out = np.where(small, series, general)
    return out if out.ndim else float(out)


def two_exp_integral(lk, lj, h):
    """int_0^h e^{-lk (h-s)} e^{-lj s} ds, symmetric in (lk, lj).

    Evaluated as e^{-min(lk,lj) h} * m0(|lk - lj|, h): expanding around the
    smaller rate keeps the m0 argument nonnegative, so nothing overflows even
    for widely separated rates, and m0's tie handling covers lk = lj.
    """
    lk, lj, h = _asarrays(lk, lj, h)
    lo = np.minimum(lk, lj)
    out = np.exp(-lo * h) * m0(np.abs(lk - lj), h)
    return out if out.ndim else float(out)


def dd1_m0(p, q, h):
    """First divided difference (m0(p, h) - m0(q, h)) / (q - p).

    Equals int_0^h u e^{-c u} du at some c between p and q; near ties it is
    evaluated as m1 at the midpoint (the symmetric expansion kills the linear
    term, leaving a relative error ~(|q-p| h)^2 / 24).
    """
    p, q, h = _asarrays(p, q, h)
    gap = q - p
    tie = np.abs(gap * h) < _DD_TIE_WINDOW
    safe_gap = np.where(tie, 1.0, gap)
    general = (m0(p, h) - m0(q, h)) / safe_gap
    mid = m1(0.5 * (p + q), h)
    out = np.where(tie, mid, general)
    return out if out.ndim else float(out)


def dd2_m0(x, s, t, h):
    """Second difference [m0(x) - m0(x+s) - m0(x+t) + m0(x+s+t)] / (s t).

    This is the mean of m2-type curvature over the rectangle [x, x+s] x
    [x, x+t]; it equals int_0^h u^2 e^{-c u} du at an intermediate rate c and
    is always positive.  Three branches keep the worst-case relative error
    around 1e-8 near branch boundaries:

    - both |s| h and |t| h below the window: m2 at the midpoint rate;
    - one small: first divided difference of m1 across the other gap;
    - both large: the four-term closed form.
    """
    x, s, t, h = _asarrays(x, s, t, h)
    s_small = np.abs(s * h) < _DD2_SMALL_WINDOW
    t_small = np.abs(t * h) < _DD2_SMALL_WINDOW

    # Both-large branch.
    safe_s = np.where(s_small, 1.0, s)
    safe_t = np.where(t_small, 1.0, t)
    general = (m0(x, h) - m0(x + safe_s, h) - m0(x + safe_t, h)
               + m0(x + safe_s + safe_t, h)) / (safe_s * safe_t)

    # One-small branches: (m1(x + s/2) - m1(x + s/2 + t)) / t and symmetric.
    def one_small(small_gap, big_gap):
        base = x + 0.5 * small_gap
        big_tie = np.abs(big_gap * h) < _DD_TIE_WINDOW
        safe_big = np.where(big_tie, 1.0, big_gap)
        diff = (m1(base, h) - m1(base + safe_big, h)) / safe_big
        mid = m2(base + 0.5 * big_gap, h)
        return np.where(big_tie, mid, diff)

    s_branch = one_small(s, t)
    t_branch = one_small(t, s)
    both = m2(x + 0.5 * (s + t), h)

    out = np.where(
        s_small & t_small, both,
        np.where(s_small, s_branch, np.where(t_small, t_branch, general)),
    )
    return out if out.ndim else float(out)


def ou_trapezoid_cumulative(rates, values, tau):
    """Cumulative trapezoid of int_{t0}^{s} e^{-rate (s - r)} G(r) dr on a grid.

    ``values`` holds G at the grid points, shape (..., S+1, N) (or (S+1,));
    ``rates`` has shape (N,) (or scalar); ``tau`` is the uniform spacing.
    Grid points run along axis -2 (or axis 0 for 1-D input); leading axes
    are independent batches.  Returns an array of the same shape with entry
    m equal to the composite-trapezoid approximation of the integral up to
    grid point m, where the semigroup weight is carried exactly per substep:

        I_{m+1} = e^{-rate tau} I_m + (tau/2) (e^{-rate tau} G_m + G_{m+1}).

    This is algebraically the trapezoid rule with exact per-mode semigroup
    factors, and it never forms growing exponentials.
    """
    values = np.asarray(values, dtype=float)
    rates = np.asarray(rates, dtype=float)
    decay = np.exp(-rates * tau)
    out = np.zeros_like(values)
    half = 0.5 * tau
    if values.ndim == 1:
        for mdx in range(values.shape[0] - 1):
            out[mdx + 1] = decay * out[mdx] + half * (
                decay * values[mdx] + values[mdx + 1]
            )
        return out
    for mdx in range(values.shape[-2] - 1):
        out[..., mdx + 1, :] = decay * out[..., mdx, :] + half * (
            decay * values[..., mdx, :] + values[..., mdx + 1, :]
        )
    return out
