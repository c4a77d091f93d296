"""Pathwise numeric evaluation of tree functionals on a fine noise grid.

Every stochastic tree denotes an iterated integral operator: the root's
label picks the operator and the root's subtrees supply the integrand
processes.  On a :class:`PathRecord` (uniform fine grid carrying Brownian
increments, exact convolution values, and a reference trajectory) each
operator is evaluated over the whole grid so that parents can integrate
their children:

* label ``0`` leaf   — ``(e^{A(s-t0)} - I) U_{t0}``, closed form;
* label ``2`` leaf   — convolution increment over ``[t0, s]``, read off
  the record exactly;
* label ``1`` leaf   — ``int e^{A(s-u)} F(U_{t0}) du``, closed form;
* label ``1`` node   — ``(1/n!) int e^{A(s-u)} F^(n)(U_{t0})(g_1..g_n) du``
  by semigroup-exact composite trapezoid;
* label ``1*`` leaf  — ``int e^{A(s-u)} F(U_u) du``, trapezoid;
* label ``1*`` node  — same with the Taylor-remainder kernel
  ``int_0^1 F^(n)(U_{t0} + r dU_u)(g_1..g_n) (1-r)^{n-1}/(n-1)! dr``,
  16-point Gauss--Legendre in ``r``.

The semigroup factor inside every time integral is exact per mode; only
the ``s``-quadrature (trapezoid) and the reference trajectory carry
discretization error, both first order in the substep width.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import m0, ou_trapezoid_cumulative
from .model import GalerkinState, SpectralModel, apply_F_array
from .sampler import FineNoiseRecord, draw_fine_increments
from .trees import NodeLabel, STree, SWood, expand, subtrees

__all__ = [
    "UnsupportedDepth",
    "PathRecord",
    "build_path_record",
    "decimate_record",
    "phi_numeric",
    "phi_wood",
    "psi_numeric",
    "IdentityCheckResult",
    "identity_check",
    "MAX_TIME_INTEGRAL_DEPTH",
]

#: Trees nesting more time integrals than this along any root-to-leaf path
#: are rejected: the trapezoid error of deeper nests dominates any signal
#: at realistic grid resolutions.
MAX_TIME_INTEGRAL_DEPTH = 4

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_GL_NODES = 0.5 * (_GL_X + 1.0)
_GL_WEIGHTS = 0.5 * _GL_W


class UnsupportedDepth(Exception):
    """Tree nests more time integrals than the record can resolve."""


@dataclass(frozen=True)
class PathRecord:
    """Fine-grid noise path plus the reference trajectory driven by it.

    Arrays may carry leading batch axes indexing independent paths; the
    grid axis is always second-to-last.  ``conv`` holds the running
    stochastic convolution from time zero (exact OU recursion); ``U`` the
    reference trajectory (exponential Euler on the fine grid).  ``xi_ref``
    optionally carries convolution increments at the shifted rates
    ``lambda - reference_rate_shift`` for exact linear references.
    """

    tau: float
    times: np.ndarray  # (S+1,)
    dbeta: np.ndarray  # (..., S, N)
    xi: np.ndarray  # (..., S, N)
    conv: np.ndarray  # (..., S+1, N)
    U: np.ndarray  # (..., S+1, N)
    u0: np.ndarray  # (N,)
    xi_ref: np.ndarray | None = None
    reference_rate_shift: float | None = None

    @property
    def substeps(self) -> int:
        return self.times.size - 1


def _assemble_record(
    model: SpectralModel, fine: FineNoiseRecord, u0: np.ndarray
) -> PathRecord:
    tau = fine.tau
    S = fine.substeps
    lam = model.lambdas
    decay = np.exp(-lam * tau)
    phi1 = m0(lam, tau)
    shape = fine.xi.shape[:-2] + (S + 1, model.dim)
    conv = np.empty(shape)
    U = np.empty(shape)
    conv[..., 0, :] = 0.0
    U[..., 0, :] = u0
    for mdx in range(S):
        conv[..., mdx + 1, :] = decay * conv[..., mdx, :] + fine.xi[..., mdx, :]
        Um = U[..., mdx, :]
        U[..., mdx + 1, :] = (
            decay * Um + phi1 * apply_F_array(model, 0, Um) + fine.xi[..., mdx, :]
        )
    return PathRecord(
        tau=tau,
        times=tau * np.arange(S + 1),
        dbeta=fine.dbeta,
        xi=fine.xi,
        conv=conv,
        U=U,
        u0=np.asarray(u0, dtype=float),
        xi_ref=fine.xi_ref,
        reference_rate_shift=fine.reference_rate_shift,
    )


def build_path_record(
    model: SpectralModel,
    u0: np.ndarray | GalerkinState,
    T: float,
    substeps: int,
    rng: np.random.Generator,
    reference_rate_shift: float | None = None,
    paths: int | None = None,
) -> PathRecord:
    """Simulate a fine-grid record over ``[0, T]`` from initial state ``u0``.

    With ``paths`` given, that many independent records share the grid and
    all arrays gain a leading path axis.
    """
    if not T > 0.0:
        raise ValueError(f"horizon must be positive: {T}")
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    if isinstance(u0, GalerkinState):
        u0 = u0.coeffs
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (model.dim,):
        raise ValueError(f"u0 must have shape ({model.dim},)")
    shape = (substeps,) if paths is None else (paths, substeps)
    fine = draw_fine_increments(
        model, T / substeps, shape, rng, reference_rate_shift
    )
    return _assemble_record(model, fine, u0)


def decimate_record(model: SpectralModel, record: PathRecord) -> PathRecord:
    """Coarsen a record by a factor of two on the SAME randomness.

    Pairs of convolution increments recombine exactly
    (``xi' = e^{-lambda tau} xi_{2m} + xi_{2m+1}``); the reference
    trajectory is recomputed on the coarse grid, so only discretization
    error changes.
    """
    S = record.substeps
    if S % 2 != 0:
        raise ValueError("record must have an even number of substeps")
    decay = np.exp(-model.lambdas * record.tau)
    xi2 = decay * record.xi[..., 0::2, :] + record.xi[..., 1::2, :]
    dbeta2 = record.dbeta[..., 0::2, :] + record.dbeta[..., 1::2, :]
    xi_ref2 = None
    if record.xi_ref is not None:
        if record.reference_rate_shift == 0.0:
            xi_ref2 = xi2
        else:
            decay_ref = np.exp(
                -(model.lambdas - record.reference_rate_shift) * record.tau
            )
            xi_ref2 = (
                decay_ref * record.xi_ref[..., 0::2, :]
                + record.xi_ref[..., 1::2, :]
            )
    fine = FineNoiseRecord(
        tau=2.0 * record.tau,
        dbeta=dbeta2,
        xi=xi2,
        xi_ref=xi_ref2,
        reference_rate_shift=record.reference_rate_shift,
    )
    return _assemble_record(model, fine, record.u0)


# ---------------------------------------------------------------------------
# Tree evaluation


def _time_integral_depth(tree: STree) -> int:
    """Maximum number of label-1/1* nodes along any root-to-leaf path."""
    depth = {}
    best = 0
    for j in range(1, tree.length + 1):
        own = 1 if tree.label(j) in (NodeLabel.ONE, NodeLabel.ONE_STAR) else 0
        depth[j] = own + (depth[tree.parent(j)] if j > 1 else 0)
        best = max(best, depth[j])
    return best


def _grid_index(record: PathRecord, t: float, name: str) -> int:
    idx = t / record.tau
    i = int(round(idx))
    if not 0 <= i <= record.substeps or abs(idx - i) > 1e-6:
        raise ValueError(
            f"{name} = {t} does not lie on the record grid (tau = {record.tau})"
        )
    return i


def _phi_on_grid(
    tree: STree,
    model: SpectralModel,
    record: PathRecord,
    i0: int,
    i1: int,
    base: np.ndarray,
) -> np.ndarray:
    """Evaluate the tree's process on grid points ``i0..i1``: (..., n+1, N).

    ``base`` is the state the derivative operators are frozen at (the
    record's own state at ``t0`` for the representation identities, or an
    arbitrary expansion point for scheme equivalences).
    """
    lam = model.lambdas
    dt = record.times[i0 : i1 + 1] - record.times[i0]  # (n+1,)
    label = tree.label(1)
    subs = subtrees(tree)

    if label in (NodeLabel.ZERO, NodeLabel.TWO):
        if subs:
            raise ValueError(f"label {label.value} must be a leaf")
        if label is NodeLabel.ZERO:
            return np.expm1(-np.outer(dt, lam)) * base[..., None, :]
        conv = record.conv
        return conv[..., i0 : i1 + 1, :] - np.exp(-np.outer(dt, lam)) * conv[
            ..., i0 : i0 + 1, :
        ]

    if label is NodeLabel.ONE and not subs:
        F0 = apply_F_array(model, 0, base)
        return m0(lam[None, :], dt[:, None]) * F0[..., None, :]

    if label is NodeLabel.ONE_STAR and not subs:
        G = apply_F_array(model, 0, record.U[..., i0 : i1 + 1, :])
        return ou_trapezoid_cumulative(lam, G, record.tau)

    kids = [
        _phi_on_grid(sub, model, record, i0, i1, base) for sub in subs
    ]
    return _assemble_internal(label, model, record, i0, i1, base, kids)


def _assemble_internal(
    label: NodeLabel,
    model: SpectralModel,
    record: PathRecord,
    i0: int,
    i1: int,
    base: np.ndarray,
    kids: list[np.ndarray],
) -> np.ndarray:
    """Semigroup time integral of the F^(n) term against the kid processes.

    Multilinear in each entry of ``kids`` (the derivative action and both
    quadratures are linear in every direction slot).
    """
    lam = model.lambdas
    n = len(kids)
    frozen = base[..., None, :]
    if label is NodeLabel.ONE:
        G = apply_F_array(model, n, frozen, kids) / math.factorial(n)
    else:
        dU = record.U[..., i0 : i1 + 1, :] - record.U[..., i0 : i0 + 1, :]
        G = 0.0
        for r_q, w_q in zip(_GL_NODES, _GL_WEIGHTS):
            G = G + (w_q * (1.0 - r_q) ** (n - 1)) * apply_F_array(
                model, n, frozen + r_q * dU, kids
            )
        G = G / math.factorial(n - 1)
    return ou_trapezoid_cumulative(lam, G, record.tau)


def _check_depth(tree: STree) -> None:
    depth = _time_integral_depth(tree)
    if depth > MAX_TIME_INTEGRAL_DEPTH:
        raise UnsupportedDepth(
            f"tree nests {depth} time integrals; at most "
            f"{MAX_TIME_INTEGRAL_DEPTH} are resolvable"
        )


def phi_numeric(
    tree: STree,
    model: SpectralModel,
    record: PathRecord,
    t0: float,
    t1: float,
) -> np.ndarray:
    """Evaluate the tree functional at ``t1`` expanded around ``t0``."""
    _check_depth(tree)
    i0 = _grid_index(record, t0, "t0")
    i1 = _grid_index(record, t1, "t1")
    if i0 >= i1:
        raise ValueError("t0 must precede t1 on the record grid")
    base = record.U[..., i0, :]
    return _phi_on_grid(tree, model, record, i0, i1, base)[..., -1, :]


def phi_wood(
    w: SWood,
    model: SpectralModel,
    record: PathRecord,
    t0: float,
    t1: float,
) -> np.ndarray:
    """Sum of the tree functionals over every tree in the wood."""
    out = 0.0
    for tree in w.trees:
        out = out + phi_numeric(tree, model, record, t0, t1)
    return out


def psi_numeric(
    w: SWood,
    model: SpectralModel,
    state: GalerkinState | np.ndarray,
    record: PathRecord,
    t0: float,
    t1: float,
) -> np.ndarray:
    """Sum of the tree functionals over the wood's INACTIVE trees only.

    The derivative operators are frozen at ``state`` (a scheme's current
    iterate); the record supplies only the noise functionals.  Inactive
    trees never reference the trajectory between the endpoints, which is
    what makes them implementable as schemes.
    """
    if isinstance(state, GalerkinState):
        state = state.coeffs
    state = np.asarray(state, dtype=float)
    i0 = _grid_index(record, t0, "t0")
    i1 = _grid_index(record, t1, "t1")
    if i0 >= i1:
        raise ValueError("t0 must precede t1 on the record grid")
    out = np.zeros(
        np.broadcast_shapes(
            state.shape, record.U[..., i1, :].shape
        )
    )
    for tree in w.trees:
        if tree.is_active:
            continue
        _check_depth(tree)
        out = out + _phi_on_grid(tree, model, record, i0, i1, state)[..., -1, :]
    return out


# ---------------------------------------------------------------------------
# Expansion-identity checking


@dataclass(frozen=True)
class IdentityCheckResult:
    """Residual of one expansion identity on one record.

    ``residual`` is ``|Phi(w) - Phi(expand(w, a))|`` at the endpoint;
    ``quad_estimate`` the difference against the same residual on the
    half-resolution record (a Richardson-style proxy for the quadrature
    error: a genuine identity violation would NOT move under refinement);
    ``du_norm`` the reference increment's norm for relative reporting.
    """

    residual: float | np.ndarray
    quad_estimate: float | np.ndarray
    du_norm: float | np.ndarray


def identity_check(
    w: SWood,
    address: tuple[int, int],
    model: SpectralModel,
    record: PathRecord,
    t0: float,
    t1: float,
) -> IdentityCheckResult:
    """Check ``Phi(w) = Phi(expand(w, address))`` pathwise on the record."""
    expanded = expand(w, address)
    fine = phi_wood(w, model, record, t0, t1) - phi_wood(
        expanded, model, record, t0, t1
    )
    residual = np.linalg.norm(fine, axis=-1)
    coarse_rec = decimate_record(model, record)
    coarse = phi_wood(w, model, coarse_rec, t0, t1) - phi_wood(
        expanded, model, coarse_rec, t0, t1
    )
    coarse_residual = np.linalg.norm(coarse, axis=-1)
    i0 = _grid_index(record, t0, "t0")
    i1 = _grid_index(record, t1, "t1")
    du_norm = np.linalg.norm(
        record.U[..., i1, :] - record.U[..., i0, :], axis=-1
    )
    return IdentityCheckResult(
        residual=residual,
        quad_estimate=np.abs(coarse_residual - residual),
        du_norm=du_norm,
    )
