import math

import numpy as np
import pytest
import scipy.linalg

from flagcones.certificate import (
    CertGrid,
    PAIRING_SIGN,
    RegimeError,
    alpha_closed_forms,
    alpha_coefficient,
    certificate_margin,
    commutator_fields,
    default_grid,
    flow_generator,
    model_matrices,
    pointing_vector,
    projector_flag,
    projector_pi,
    pushforward_check,
    real_structure_defect,
    sweep,
)
from flagcones.flags import FRAME_TO_COMPLEX, SpdPoint, busemann
from flagcones.plane import PlanePoint, fiber_over_interior


def sample_params(rng, n, beta_max=0.95, d_max=5.0):
    for _ in range(n):
        beta = rng.uniform(0, beta_max) * np.exp(1j * rng.uniform(0, 2 * math.pi))
        d = rng.uniform(-d_max, d_max)
        z = np.exp(1j * rng.uniform(0, 2 * math.pi))
        yield beta, d, z


def test_model_matrices_d_zero():
    mm = model_matrices(0.4 + 0.1j, 0.0)
    assert np.allclose(mm.ed, np.eye(3))
    assert np.allclose(mm.hprime, mm.h.mat)


def test_model_matrices_conjugation_oracle():
    # strict check at moderate d (the float conjugation oracle loses
    # digits like cosh(2d)^2 further out)
    rng = np.random.default_rng(0)
    h0perp = np.array([[0, 0, -1j], [0, 0, 0], [1j, 0, 0]], dtype=complex)
    for beta, d, _ in sample_params(rng, 25, d_max=2.0):
        mm = model_matrices(beta, d)
        ed_oracle = scipy.linalg.expm(d * h0perp)
        assert np.abs(mm.ed - ed_oracle).max() <= 1e-12 * max(1.0, abs(np.cosh(d)))
        conj = np.linalg.inv(mm.ed) @ mm.h.mat @ mm.ed
        assert np.abs(mm.hprime - conj).max() <= 1e-12
    for beta, d, _ in sample_params(rng, 15, d_max=5.0):
        mm = model_matrices(beta, d)
        conj = np.linalg.inv(mm.ed) @ mm.h.mat @ mm.ed
        assert np.abs(mm.hprime - conj).max() <= 1e-14 * np.cosh(2 * d) ** 2


def test_model_matrices_regime():
    with pytest.raises(RegimeError):
        model_matrices(1.0, 0.3)


def test_real_structure_of_model_matrices():
    rng = np.random.default_rng(1)
    for beta, d, z in sample_params(rng, 20, d_max=2.0):
        mm = model_matrices(beta, d)
        for m in (mm.h.mat, mm.h0.mat, mm.h0perp.mat, mm.ed, mm.hprime):
            scale = max(1.0, float(np.abs(m).max()))
            assert real_structure_defect(m) <= 1e-13 * scale
        assert real_structure_defect(projector_pi(z).mat) <= 1e-13
        assert real_structure_defect(pointing_vector(projector_pi(z)).mat) <= 1e-13


def test_projector_example_and_nilpotency():
    p = projector_pi(1.0)
    r2 = math.sqrt(2)
    expected = 0.25 * np.array(
        [[-1, r2, -1], [-r2, 2, -r2], [-1, r2, -1]], dtype=complex
    )
    assert np.abs(p.mat - expected).max() <= 1e-15
    rng = np.random.default_rng(2)
    for _ in range(64):
        z = np.exp(1j * rng.uniform(0, 2 * math.pi))
        m = projector_pi(z).mat
        assert np.abs(m @ m).max() <= 1e-14
        s = np.linalg.svd(m, compute_uv=False)
        assert s[1] <= 1e-14


def test_projector_rejects_bad_modulus():
    from flagcones.flags import GeometryError

    with pytest.raises(GeometryError):
        projector_pi(1.1)


def test_projector_flag_matches_fiber():
    for theta in np.linspace(0, 2 * math.pi, 16, endpoint=False):
        f = projector_flag(projector_pi(np.exp(1j * theta)))
        g = fiber_over_interior(PlanePoint.identity(), theta)
        assert f.same_as(g, tol=1e-12)


def test_pointing_vector_display_and_orthogonality():
    v = pointing_vector(projector_pi(1.0))
    r22 = math.sqrt(2) / 2
    expected = np.array(
        [[0, r22, 0], [r22, 0, r22], [0, r22, 0]], dtype=complex
    )
    assert np.abs(v.mat - expected).max() <= 1e-15
    h0 = np.array([[0, 0, 1], [0, 0, 0], [1, 0, 0]], dtype=complex)
    h0p = np.array([[0, 0, -1j], [0, 0, 0], [1j, 0, 0]], dtype=complex)
    rng = np.random.default_rng(3)
    norms = []
    for _ in range(32):
        z = np.exp(1j * rng.uniform(0, 2 * math.pi))
        m = pointing_vector(projector_pi(z)).mat
        assert abs(np.trace(m @ h0)) <= 1e-14
        assert abs(np.trace(m @ h0p)) <= 1e-14
        assert abs(np.trace(m)) <= 1e-14
        norms.append(np.linalg.norm(m))
    assert max(norms) - min(norms) <= 1e-13


def test_pointing_vector_busemann_derivative_sign():
    # the horofunction of the encoded flag increases along the real image
    # of the pointing field at the identity (calibrated sign)
    cinv = np.linalg.inv(FRAME_TO_COMPLEX)
    origin = SpdPoint.identity()
    for theta in np.linspace(0, 2 * math.pi, 12, endpoint=False):
        z = np.exp(1j * theta)
        w = cinv @ pointing_vector(projector_pi(z)).mat @ FRAME_TO_COMPLEX
        assert np.abs(w.imag).max() <= 1e-12
        w = w.real
        f = fiber_over_interior(PlanePoint.identity(), theta)
        eps = 1e-6
        x1 = SpdPoint.from_matrix(scipy.linalg.expm(eps * w))
        deriv = busemann(f, origin, x1) / eps
        assert deriv > 0.1  # positive: descent direction is the negative


def test_commutator_fields_hermitian_and_beta_independence_of_m2():
    rng = np.random.default_rng(4)
    for beta, d, z in sample_params(rng, 20):
        m1, m2 = commutator_fields(beta, d, z)
        for m in (m1.mat, m2.mat):
            scale = max(1.0, float(np.abs(m).max()))
            assert np.abs(m - m.conj().T).max() <= 1e-13 * scale
        m2_other = commutator_fields(0.1, -2.0, z)[1]
        assert np.abs(m2.mat - m2_other.mat).max() <= 1e-13


def test_alpha_closed_forms_examples():
    a1, a2 = alpha_closed_forms(0.0, 0.0, 1.0)
    assert a1 == pytest.approx(0.5, abs=1e-15)
    assert a2 == pytest.approx(1j, abs=1e-15)
    a1, a2 = alpha_closed_forms(0.0, 0.0, 1j)
    assert a1 == pytest.approx(0.5, abs=1e-15)
    assert a2 == pytest.approx(1j, abs=1e-15)


def test_alpha_oracle_matches_closed_forms():
    rng = np.random.default_rng(5)
    for beta, d, z in sample_params(rng, 60):
        m1, m2 = commutator_fields(beta, d, z)
        a1c, a2c = alpha_closed_forms(beta, d, z)
        scale = max(1.0, abs(a1c))
        assert abs(alpha_coefficient(m1) - a1c) <= 1e-10 * scale
        assert abs(alpha_coefficient(m2) - a2c) <= 1e-12


def test_alpha_m2_modulus_range():
    rng = np.random.default_rng(6)
    for _, _, z in sample_params(rng, 50):
        _, a2 = alpha_closed_forms(0.0, 0.0, z)
        assert 0.5 - 1e-12 <= abs(a2) <= 1.0 + 1e-12


def test_margin_examples():
    # margin vanishes identically at beta = 0
    rng = np.random.default_rng(7)
    for _ in range(40):
        d = rng.uniform(-5, 5)
        z = np.exp(1j * rng.uniform(0, 2 * math.pi))
        margin, eta = certificate_margin(0.0, d, z)
        assert abs(margin) <= 1e-12
        assert eta >= 0.5 - 1e-12
    margin, eta = certificate_margin(0.0, 0.0, 1.0)
    assert margin == pytest.approx(0.0, abs=1e-15)
    assert eta == pytest.approx(0.5, abs=1e-15)


def test_margin_nonnegative_on_samples():
    rng = np.random.default_rng(8)
    for beta, d, z in sample_params(rng, 300):
        margin, eta = certificate_margin(beta, d, z)
        assert margin >= -1e-9
        assert eta >= 0.5 * (1 - abs(beta)) - 1e-12
        assert eta <= 1.0 + abs(beta) + 1e-12


def test_sweep_small_grid():
    grid = CertGrid(beta_moduli=(0.0, 0.3, 0.6, 0.9), beta_phases=4, z_phases=16, d_step=0.5)
    report = sweep(grid)
    assert report.min_margin >= -1e-9
    assert report.beta0_max_abs_margin <= 1e-12
    assert report.oracle_dev <= 1e-10
    assert report.eta_floor_gap_min >= -1e-12
    assert report.sign_constant
    assert report.pairing_sign == PAIRING_SIGN == -1.0
    assert report.bounded_surrogate_max <= 1.0 + 0.9 + 1e-9
    keys = set(report.to_json())
    assert {"min_margin", "min_eta", "argmin", "oracle_dev", "grid"} <= keys


def test_margin_gauge_identity():
    # the residual gauge of the normalized flow direction is the fourth
    # roots of unity: margin(i beta, d, i z) = margin(beta, d, z) exactly,
    # so per-modulus shell minima over fourth-root-closed grids coincide
    rng = np.random.default_rng(9)
    for beta, d, z in sample_params(rng, 60):
        m0, e0 = certificate_margin(beta, d, z)
        for w in (1j, -1.0, -1j):
            m1, e1 = certificate_margin(beta * w, d, z * w)
            assert abs(m1 - m0) <= 1e-12 * max(1.0, abs(m0))
            assert abs(e1 - e0) <= 1e-12 * max(1.0, abs(e0))


def test_sweep_shell_minimum_gauge_stable():
    # the sweep's grids are closed under the fourth-root gauge, so the
    # per-shell minimum is unchanged when beta phases are rotated by pi/2
    base = CertGrid(beta_moduli=(0.5,), beta_phases=8, z_phases=32, d_step=0.5)
    r1 = sweep(base)
    mins = []
    for ph in np.linspace(0, 2 * math.pi, 8, endpoint=False) + math.pi / 2:
        beta = 0.5 * np.exp(1j * ph)
        for d in base.d_values():
            for z in base.z_values():
                mins.append(certificate_margin(beta, d, z)[0])
    assert abs(min(mins) - r1.min_margin) <= 1e-10


def test_default_grid_shape():
    g = default_grid()
    assert g.beta_moduli[0] == 0.0 and g.beta_moduli[-1] == 0.95
    assert len(g.d_values()) == 201
    assert len(g.z_values()) == 64


def test_sweep_restricted_to_zero_modulus_is_identically_tight():
    grid = CertGrid(beta_moduli=(0.0,), beta_phases=2, z_phases=32, d_step=0.25)
    report = sweep(grid)
    assert abs(report.min_margin) <= 1e-12
    assert report.beta0_max_abs_margin <= 1e-12
    assert report.min_eta >= 0.5 - 1e-12


def test_flow_generator_real_symmetric():
    for beta in (0.0, 0.5, 0.3 + 0.2j):
        v = flow_generator(beta).mat
        assert np.abs(v - v.T).max() <= 1e-12
        assert abs(np.trace(v)) <= 1e-12
    assert np.allclose(flow_generator(0.0).mat, np.diag([1.0, 0.0, -1.0]), atol=1e-14)


def test_pushforward_check_inside_and_displacement():
    reports = {b: pushforward_check(b, 1e-3, n_samples=128) for b in (0.0, 0.5, 0.9)}
    for b, rep in reports.items():
        assert rep["all_inside"], f"beta={b}"
        assert rep["inside"] == rep["samples"]
        assert rep["min_displacement"] > 0
    assert reports[0.9]["min_displacement"] < reports[0.5]["min_displacement"]
    assert reports[0.0]["min_displacement"] == pytest.approx(2e-3, rel=1e-6)


def test_pushforward_zero_step_all_boundary():
    rep = pushforward_check(0.0, 0.0, n_samples=64)
    assert rep["boundary"] == rep["samples"]
    assert rep["inside"] == 0
