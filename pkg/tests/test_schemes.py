"""One-step integrators: closed-form weights, step maps, trajectories.

Oracles:
  * mpmath (50 digits) for the workspace's double-integral matrix D on
    stiff rate grids, via the independently derived antiderivative;
  * the exact algebraic identity m0(lam,h) + D_kk = h e^{-lam h};
  * the pathwise tree evaluator (quadrature route) for the Taylor
    corrections, and for the full step maps via psi over the matching
    inactive-tree woods on a shared record;
  * classical limits: A=0 reduces every exponential scheme to classical
    Euler(-Maruyama), F=0 to the exact OU transition (KS test);
  * per-mode scalar recursions for constant-coefficient linear drift
    (mode decoupling).
"""

import mpmath as mp
import numpy as np
import pytest
import scipy.stats

from spdetaylor.evaluator import build_path_record, phi_numeric, psi_numeric
from spdetaylor.kernels import m0
from spdetaylor.model import (
    NonlinearitySpec,
    SmoothnessParams,
    SpectralModel,
    apply_F_array,
    heat_1d_model,
    sode_model,
    trace_class_3d_model,
)
from spdetaylor.sampler import (
    FineNoiseRecord,
    NoiseBundle,
    aggregate_range,
    sample_step,
    step_covariance,
)
from spdetaylor.schemes import (
    MissingTimeIntegrals,
    SchemeId,
    StepWorkspace,
    WorkspaceSelfTestError,
    exp_euler_step,
    implicit_euler_step,
    integrate,
    rk_step,
    step_map,
    taylor_w2_step,
    taylor_w3_step,
)

mp.mp.dps = 50

Y0_4 = np.array([0.3, -0.2, 0.1, 0.05])


def silent_model(n=4):
    """Zero drift, zero noise: pure semigroup dynamics."""
    m = heat_1d_model(n)
    return SpectralModel(
        name=m.name,
        lambdas=m.lambdas,
        bs=np.zeros(n),
        kappa=m.kappa,
        nonlinearity=m.nonlinearity,
        smoothness=m.smoothness,
        collocation=m.collocation,
        modes_per_axis=m.modes_per_axis,
        index_set=m.index_set,
    )


def mild_linear_model(alpha=0.8):
    """Small, well-separated rates: asymptotics visible at h ~ 2^-4."""
    return SpectralModel(
        name="mild_linear",
        lambdas=np.array([1.0, 2.5, 6.0, 12.0]),
        bs=np.ones(4),
        kappa=0.0,
        nonlinearity=NonlinearitySpec.linear_mult(alpha),
        smoothness=SmoothnessParams(gamma=0.5, delta=0.5),
        collocation="identity",
    )


def zero_bundle(model, h):
    n = model.dim
    return NoiseBundle(
        h=h,
        conv=np.zeros(n),
        time_integrals=np.zeros((n, n)),
        carried_conv=np.zeros(n),
        updated_carried=np.zeros(n),
        flat_integrals=np.zeros(n),
    )


def sampled_bundle(model, h, seed=0, include_flat=True, size=None):
    cov = step_covariance(model, h, include_flat=include_flat)
    return sample_step(
        model, cov, np.random.default_rng(seed), np.zeros(model.dim), size=size
    )


# ---------------------------------------------------------------------------
# workspace


def _mp_D(lk, lj, h):
    lk, lj, h = mp.mpf(lk), mp.mpf(lj), mp.mpf(h)
    two = h * mp.e ** (-lk * h) if lk == lj else (
        (mp.e ** (-lj * h) - mp.e ** (-lk * h)) / (lk - lj)
    )
    base = h if lk == 0 else (1 - mp.e ** (-lk * h)) / lk
    return two - base


STIFF_RATES = [0.0, 1e-9, 0.5, np.pi**2, 631.0, 4e4]


@pytest.mark.parametrize("h", [1e-3, 0.1, 1.0])
def test_D_matrix_matches_mpmath_on_stiff_grid(h):
    lam = np.array(STIFF_RATES)
    m = SpectralModel(
        name="stiff",
        lambdas=lam,
        bs=np.ones(lam.size),
        kappa=1.0,
        nonlinearity=NonlinearitySpec.zero(),
        smoothness=SmoothnessParams(gamma=0.5, delta=0.5),
        collocation="identity",
    )
    ws = StepWorkspace.build(m, h)
    for k, lk in enumerate(STIFF_RATES):
        for j, lj in enumerate(STIFF_RATES):
            ref = float(_mp_D(lk, lj, h))
            got = ws.D[k, j]
            if ref == 0.0:
                assert got == 0.0
            else:
                # near-cancelled entries (|D| ~ lam_j h^2 with tiny lam_j)
                # are accurate absolutely, not relatively
                tol = max(1e-10 * abs(ref), 1e-15 * h)
                assert abs(got - ref) <= tol, (lk, lj, h, got, ref)


def test_phi1_plus_diagonal_D_identity():
    # int_0^h e^{-lam s} ds + int_0^h e^{-lam(h-s)}(e^{-lam s}-1) ds
    #   = h e^{-lam h} exactly.
    for model in (
        heat_1d_model(8),
        trace_class_3d_model(2),
        sode_model(3),
        mild_linear_model(),
    ):
        for h in (1e-3, 0.05, 0.7):
            ws = StepWorkspace.build(model, h)
            lhs = ws.phi1 + np.diag(ws.D)
            rhs = h * np.exp(-model.lambdas * h)
            np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-18)


def test_workspace_zero_rate_limits_exact():
    ws = StepWorkspace.build(sode_model(3), 0.25)
    np.testing.assert_array_equal(ws.phi1, np.full(3, 0.25))
    np.testing.assert_array_equal(ws.D, np.zeros((3, 3)))
    np.testing.assert_array_equal(ws.dtilde, np.zeros(3))
    np.testing.assert_array_equal(ws.decay, np.ones(3))


def test_workspace_self_test_accepts_presets():
    StepWorkspace.build(heat_1d_model(16), 0.1)
    StepWorkspace.build(trace_class_3d_model(2), 0.25)
    StepWorkspace.build(sode_model(5), 1.0)


def test_workspace_self_test_detects_corruption():
    m = heat_1d_model(4)
    ws = StepWorkspace.build(m, 0.05)
    bad_D = ws.D.copy()
    bad_D[0, 0] *= 1.0 + 1e-6
    object.__setattr__(ws, "D", bad_D)
    with pytest.raises(WorkspaceSelfTestError):
        ws._self_test(m.lambdas)
    ws2 = StepWorkspace.build(m, 0.05)
    bad_phi = ws2.phi1.copy()
    bad_phi[1] *= 1.0 + 1e-6
    object.__setattr__(ws2, "phi1", bad_phi)
    with pytest.raises(WorkspaceSelfTestError):
        ws2._self_test(m.lambdas)


def test_workspace_rejects_nonpositive_step():
    with pytest.raises(ValueError):
        StepWorkspace.build(heat_1d_model(2), 0.0)


def test_workspace_large_dim_skips_self_test_but_builds():
    ws = StepWorkspace.build(heat_1d_model(64), 0.01)
    assert ws.D.shape == (64, 64)
    assert np.all(np.isfinite(ws.D))


# ---------------------------------------------------------------------------
# exponential Euler


def test_exp_euler_reduces_to_classical_euler_without_operator_and_noise():
    m = sode_model(3, nonlinearity=NonlinearitySpec.pointwise("tanh"))
    ws = StepWorkspace.build(m, 0.2)
    y = np.array([0.4, -0.3, 0.1])
    nb = zero_bundle(m, 0.2)
    got = exp_euler_step(m, ws, y, nb)
    np.testing.assert_array_equal(got, y + 0.2 * apply_F_array(m, 0, y))


def test_exp_euler_is_euler_maruyama_on_scalar_sode():
    m = sode_model(1, nonlinearity=NonlinearitySpec.pointwise("tanh"))
    h = 0.1
    ws = StepWorkspace.build(m, h)
    rng = np.random.default_rng(123)
    y = np.array([0.37])
    for _ in range(100):
        nb = sample_step(m, step_covariance(m, h), rng, np.zeros(1))
        got = exp_euler_step(m, ws, y, nb)
        expected = y + h * apply_F_array(m, 0, y) + nb.conv
        np.testing.assert_array_equal(got, expected)
        y = got


def test_exp_euler_zero_drift_matches_exact_ou_law():
    m = heat_1d_model(1)  # single mode, lam = pi^2, b = 1, zero drift
    h = 0.3
    lam = float(m.lambdas[0])
    ws = StepWorkspace.build(m, h)
    nb = sampled_bundle(m, h, seed=42, include_flat=False, size=10_000)
    y = np.array([0.8])
    out = exp_euler_step(m, ws, y, nb)[:, 0]
    mean = np.exp(-lam * h) * 0.8
    std = np.sqrt(float(m0(np.array([2 * lam]), h)[0]))
    p = scipy.stats.kstest(out, "norm", args=(mean, std)).pvalue
    assert p > 0.01


# ---------------------------------------------------------------------------
# Taylor corrections vs the quadrature evaluator


def test_taylor_w2_equals_exp_euler_for_zero_drift():
    m = heat_1d_model(4)
    ws = StepWorkspace.build(m, 0.05)
    nb = sampled_bundle(m, 0.05, seed=1)
    np.testing.assert_array_equal(
        taylor_w2_step(m, ws, Y0_4, nb), exp_euler_step(m, ws, Y0_4, nb)
    )


def test_taylor_w2_correction_vanishes_without_operator():
    m = sode_model(4, nonlinearity=NonlinearitySpec.pointwise("tanh"))
    ws = StepWorkspace.build(m, 0.05)
    nb = sampled_bundle(m, 0.05, seed=2)
    np.testing.assert_array_equal(
        taylor_w2_step(m, ws, Y0_4, nb), exp_euler_step(m, ws, Y0_4, nb)
    )


@pytest.mark.parametrize(
    "nl",
    [NonlinearitySpec.linear_mult(0.8), NonlinearitySpec.pointwise("tanh")],
    ids=["linear", "tanh"],
)
def test_taylor_w2_correction_matches_evaluator_quadrature(nl):
    m = heat_1d_model(2, nonlinearity=nl)
    h = 0.1
    u0 = np.array([0.25, -0.15])
    rec = build_path_record(m, u0, h, 2048, np.random.default_rng(1))
    y = rec.U[0]
    ws = StepWorkspace.build(m, h)
    nb = sampled_bundle(m, h, seed=3)
    corr = taylor_w2_step(m, ws, y, nb) - exp_euler_step(m, ws, y, nb)
    from spdetaylor.trees import make_tree

    quad = phi_numeric(make_tree([1], ["1", "0"]), m, rec, 0.0, h)
    np.testing.assert_allclose(corr, quad, rtol=1e-6)


def test_taylor_w2_linear_closed_form():
    alpha = 0.8
    m = heat_1d_model(4, nonlinearity=NonlinearitySpec.linear_mult(alpha))
    ws = StepWorkspace.build(m, 0.07)
    nb = sampled_bundle(m, 0.07, seed=4)
    corr = taylor_w2_step(m, ws, Y0_4, nb) - exp_euler_step(m, ws, Y0_4, nb)
    np.testing.assert_allclose(corr, alpha * np.diag(ws.D) * Y0_4, rtol=1e-12)


def test_taylor_w3_requires_time_integrals():
    m = heat_1d_model(4, nonlinearity=NonlinearitySpec.pointwise("tanh"))
    ws = StepWorkspace.build(m, 0.05)
    nb = sampled_bundle(m, 0.05, seed=5)
    stripped = NoiseBundle(
        h=nb.h,
        conv=nb.conv,
        time_integrals=None,
        carried_conv=nb.carried_conv,
        updated_carried=nb.updated_carried,
    )
    with pytest.raises(MissingTimeIntegrals):
        taylor_w3_step(m, ws, Y0_4, stripped)


def test_taylor_w3_equals_w2_for_zero_noise():
    m = heat_1d_model(4, nonlinearity=NonlinearitySpec.pointwise("tanh"))
    ws = StepWorkspace.build(m, 0.05)
    nb = zero_bundle(m, 0.05)
    np.testing.assert_array_equal(
        taylor_w3_step(m, ws, Y0_4, nb), taylor_w2_step(m, ws, Y0_4, nb)
    )


def test_taylor_w3_linear_stochastic_correction():
    alpha = 0.8
    m = heat_1d_model(4, nonlinearity=NonlinearitySpec.linear_mult(alpha))
    ws = StepWorkspace.build(m, 0.07)
    nb = sampled_bundle(m, 0.07, seed=6)
    corr = taylor_w3_step(m, ws, Y0_4, nb) - taylor_w2_step(m, ws, Y0_4, nb)
    np.testing.assert_allclose(
        corr, alpha * np.diagonal(nb.time_integrals), rtol=1e-12
    )


# ---------------------------------------------------------------------------
# scheme / evaluator agreement on a shared record


def _record_and_bundle(model, u0, h, substeps, seed):
    rec = build_path_record(model, u0, h, substeps, np.random.default_rng(seed))
    fine = FineNoiseRecord(tau=rec.tau, dbeta=rec.dbeta, xi=rec.xi)
    nb = aggregate_range(model, fine, 0, substeps, include_flat=True)
    return rec, nb


def test_exp_euler_increment_equals_psi_w1_on_shared_record():
    from spdetaylor.trees import derive_wood

    m = heat_1d_model(2, nonlinearity=NonlinearitySpec.pointwise("tanh"))
    u0 = np.array([0.25, -0.15])
    h = 0.1
    rec, nb = _record_and_bundle(m, u0, h, 2048, seed=2)
    ws = StepWorkspace.build(m, h)
    inc = exp_euler_step(m, ws, u0, nb) - u0
    psi = psi_numeric(derive_wood([(2, 1)]), m, u0, rec, 0.0, h)
    np.testing.assert_allclose(inc, psi, rtol=0, atol=1e-14)


def test_taylor_w3_increment_equals_psi_w3_on_shared_record():
    from spdetaylor.evaluator import decimate_record
    from spdetaylor.trees import derive_wood

    m = heat_1d_model(2, nonlinearity=NonlinearitySpec.pointwise("tanh"))
    u0 = np.array([0.25, -0.15])
    h = 0.1
    w3 = derive_wood([(2, 1), (4, 1), (6, 1)])
    rec_f = build_path_record(m, u0, h, 4096, np.random.default_rng(2))
    rec_c = decimate_record(m, rec_f)
    diffs = {}
    for rec in (rec_f, rec_c):
        S = rec.substeps
        fine = FineNoiseRecord(tau=rec.tau, dbeta=rec.dbeta, xi=rec.xi)
        nb = aggregate_range(m, fine, 0, S, include_flat=True)
        ws = StepWorkspace.build(m, h)
        inc = taylor_w3_step(m, ws, u0, nb) - u0
        psi = psi_numeric(w3, m, u0, rec, 0.0, h)
        diffs[S] = np.max(np.abs(inc - psi))
    # closed form vs quadrature: agreement at quadrature level, improving
    # under refinement of the shared record
    assert diffs[4096] < 3e-5
    assert diffs[4096] < diffs[2048]


# ---------------------------------------------------------------------------
# Runge--Kutta scheme


def test_rk_requires_flat_integrals():
    m = heat_1d_model(4, nonlinearity=NonlinearitySpec.pointwise("tanh"))
    ws = StepWorkspace.build(m, 0.05)
    nb = sampled_bundle(m, 0.05, seed=7, include_flat=False)
    with pytest.raises(MissingTimeIntegrals):
        rk_step(m, ws, Y0_4, nb)


def test_rk_equals_exp_euler_for_zero_drift():
    m = heat_1d_model(4)
    ws = StepWorkspace.build(m, 0.05)
    nb = sampled_bundle(m, 0.05, seed=8)
    np.testing.assert_array_equal(
        rk_step(m, ws, Y0_4, nb), exp_euler_step(m, ws, Y0_4, nb)
    )


def test_rk_deterministic_exponential_integrator_form():
    m = heat_1d_model(4, nonlinearity=NonlinearitySpec.pointwise("tanh"))
    h = 0.05
    ws = StepWorkspace.build(m, h)
    nb = zero_bundle(m, h)
    got = rk_step(m, ws, Y0_4, nb)
    expected = ws.decay * Y0_4 + h * ws.decay * apply_F_array(m, 0, Y0_4)
    np.testing.assert_array_equal(got, expected)


def test_rk_minus_taylor_w3_is_second_order_on_common_bundle():
    m = mild_linear_model()
    y0 = Y0_4
    hs = [2.0 ** -k for k in range(4, 9)]
    diffs = []
    for h in hs:
        nb = sampled_bundle(m, h, seed=77, size=64)
        ws = StepWorkspace.build(m, h)
        a = rk_step(m, ws, y0, nb)
        b = taylor_w3_step(m, ws, y0, nb)
        diffs.append(np.sqrt(np.mean(np.sum((a - b) ** 2, axis=-1))))
    slope = np.polyfit(np.log2(hs), np.log2(diffs), 1)[0]
    assert slope >= 2.0, f"slope {slope}"


# ---------------------------------------------------------------------------
# implicit Euler baseline


def test_implicit_euler_reduces_to_euler_maruyama_without_operator():
    m = sode_model(3, nonlinearity=NonlinearitySpec.pointwise("tanh"))
    h = 0.2
    ws = StepWorkspace.build(m, h)
    nb = sampled_bundle(m, h, seed=9)
    y = np.array([0.4, -0.3, 0.1])
    got = implicit_euler_step(m, ws, y, nb)
    np.testing.assert_array_equal(got, y + h * apply_F_array(m, 0, y) + nb.conv)


def test_implicit_euler_zero_drift_formula():
    m = heat_1d_model(3)
    h = 0.1
    ws = StepWorkspace.build(m, h)
    nb = sampled_bundle(m, h, seed=10)
    y = np.array([0.5, 0.2, -0.1])
    got = implicit_euler_step(m, ws, y, nb)
    np.testing.assert_allclose(
        got, (y + nb.conv) / (1.0 + m.lambdas * h), rtol=1e-15
    )


# ---------------------------------------------------------------------------
# cross-scheme invariants


def test_exponential_schemes_coincide_on_pure_semigroup():
    m = silent_model(4)
    h = 0.1
    ws = StepWorkspace.build(m, h)
    nb = zero_bundle(m, h)
    outs = [
        step(m, ws, Y0_4, nb)
        for step in (exp_euler_step, taylor_w2_step, taylor_w3_step, rk_step)
    ]
    for out in outs[1:]:
        np.testing.assert_array_equal(out, outs[0])
    np.testing.assert_array_equal(outs[0], ws.decay * Y0_4)
    # the implicit baseline approximates the semigroup differently by
    # construction (this gap is the point of the order comparison)
    imp = implicit_euler_step(m, ws, Y0_4, nb)
    assert np.max(np.abs(imp - outs[0])) > 1e-4


def test_all_five_schemes_coincide_without_operator_drift_and_noise():
    m = sode_model(4, bs=np.zeros(4))
    h = 0.1
    ws = StepWorkspace.build(m, h)
    nb = zero_bundle(m, h)
    outs = [step_map(sid)(m, ws, Y0_4, nb) for sid in SchemeId]
    for out in outs[1:]:
        np.testing.assert_array_equal(out, outs[0])
    np.testing.assert_array_equal(outs[0], Y0_4)


def test_mode_decoupling_constant_linear_drift():
    # With F = alpha * identity the Jacobian is diagonal, so every scheme's
    # N-dimensional step map must equal the per-mode scalar recursion (the
    # drift merely shifts each rate lambda_k by -alpha).
    alpha = 0.8
    m = heat_1d_model(4, nonlinearity=NonlinearitySpec.linear_mult(alpha))
    h, M = 0.02, 6
    cov = step_covariance(m, h, include_flat=True)
    rng = np.random.default_rng(5)
    carried = np.zeros(4)
    bundles = []
    for _ in range(M):
        nb = sample_step(m, cov, rng, carried)
        carried = nb.updated_carried
        bundles.append(nb)
    lam = m.lambdas
    ws = StepWorkspace.build(m, h)
    decay, phi1 = np.exp(-lam * h), m0(lam, h)
    for sid in SchemeId:
        traj = integrate(sid, m, Y0_4, h * M, M, iter(bundles))
        y = Y0_4.astype(float)
        carried = np.zeros(4)
        for nb in bundles:
            if sid is SchemeId.EXP_EULER:
                y = decay * y + phi1 * alpha * y + nb.conv
            elif sid is SchemeId.TAYLOR_W2:
                y = decay * y + phi1 * alpha * y + alpha * np.diag(ws.D) * y + nb.conv
            elif sid is SchemeId.TAYLOR_W3:
                y = (
                    decay * y
                    + phi1 * alpha * y
                    + alpha * np.diag(ws.D) * y
                    + alpha * np.diagonal(nb.time_integrals)
                    + nb.conv
                )
            elif sid is SchemeId.RK:
                Z = (ws.dtilde * carried + nb.flat_integrals) / h
                y = decay * y + h * decay * alpha * (y + Z) + nb.conv
            else:
                y = (y + h * alpha * y + nb.conv) / (1.0 + lam * h)
            carried = decay * carried + nb.conv
        np.testing.assert_allclose(traj[-1], y, rtol=1e-12, atol=1e-16)


# ---------------------------------------------------------------------------
# trajectory integration


def test_integrate_single_step_equals_step_map():
    m = heat_1d_model(4, nonlinearity=NonlinearitySpec.pointwise("tanh"))
    h = 0.05
    for sid in SchemeId:
        traj = integrate(sid, m, Y0_4, h, 1, np.random.default_rng(31))
        cov = step_covariance(m, h, include_flat=sid.needs_flat_integrals)
        nb = sample_step(m, cov, np.random.default_rng(31), np.zeros(4))
        ws = StepWorkspace.build(m, h)
        np.testing.assert_array_equal(traj[1], step_map(sid)(m, ws, Y0_4, nb))


def test_integrate_pure_semigroup_trajectory():
    m = silent_model(4)
    T, M = 0.8, 16
    for sid in SchemeId:
        traj = integrate(sid, m, Y0_4, T, M, np.random.default_rng(0))
        if sid is SchemeId.IMPLICIT_EULER:
            expected = Y0_4 / (1.0 + m.lambdas * T / M) ** np.arange(M + 1)[:, None]
        else:
            expected = Y0_4 * np.exp(-np.outer(np.arange(M + 1) * T / M, m.lambdas))
        np.testing.assert_allclose(traj, expected, rtol=1e-12)


def test_integrate_accepts_precomputed_bundles_bitwise():
    m = heat_1d_model(4, nonlinearity=NonlinearitySpec.pointwise("tanh"))
    T, M = 0.3, 6
    h = T / M
    for sid in (SchemeId.EXP_EULER, SchemeId.TAYLOR_W3, SchemeId.RK):
        ref = integrate(sid, m, Y0_4, T, M, np.random.default_rng(17))
        cov = step_covariance(m, h, include_flat=sid.needs_flat_integrals)
        rng = np.random.default_rng(17)
        carried = np.zeros(4)
        bundles = []
        for _ in range(M):
            nb = sample_step(m, cov, rng, carried)
            carried = nb.updated_carried
            bundles.append(nb)
        got = integrate(sid, m, Y0_4, T, M, iter(bundles))
        np.testing.assert_array_equal(got, ref)


def test_integrate_tracks_carried_state_for_coupled_bundles():
    # Coupled-mode bundles carry a zeroed running-convolution state; the
    # trajectory loop must substitute its own tracked state (only the
    # Runge--Kutta scheme consumes it).
    m = heat_1d_model(4, nonlinearity=NonlinearitySpec.pointwise("tanh"))
    T, M = 0.3, 6
    h = T / M
    cov = step_covariance(m, h, include_flat=True)
    rng = np.random.default_rng(23)
    carried = np.zeros(4)
    bundles, zeroed = [], []
    for _ in range(M):
        nb = sample_step(m, cov, rng, carried)
        carried = nb.updated_carried
        bundles.append(nb)
        zeroed.append(
            NoiseBundle(
                h=nb.h,
                conv=nb.conv,
                time_integrals=nb.time_integrals,
                carried_conv=np.zeros(4),
                updated_carried=nb.conv,
                flat_integrals=nb.flat_integrals,
            )
        )
    ref = integrate(SchemeId.RK, m, Y0_4, T, M, iter(bundles))
    got = integrate(SchemeId.RK, m, Y0_4, T, M, iter(zeroed))
    np.testing.assert_allclose(got, ref, rtol=1e-13)


def test_integrate_rejects_bad_inputs():
    m = heat_1d_model(4)
    with pytest.raises(ValueError):
        integrate(SchemeId.EXP_EULER, m, Y0_4, 0.1, 0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        integrate(
            SchemeId.EXP_EULER, m, np.zeros(3), 0.1, 2, np.random.default_rng(0)
        )
    with pytest.raises(ValueError, match="exhausted"):
        integrate(SchemeId.EXP_EULER, m, Y0_4, 0.1, 2, iter([]))
