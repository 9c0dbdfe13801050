import math

import numpy as np
import pytest

from flagcones.pde import (
    DomainError,
    DomainSpec,
    GaugeParams,
    HiggsDatum,
    ScalarField,
    SolveError,
    beta_field,
    curvature_field,
    gauge_equivalent,
    max_principle_check,
    ratio_identity_residual,
    read_field_csv,
    residual,
    slice_dimensions,
    solve,
    write_field_csv,
)


def test_domain_validation():
    with pytest.raises(DomainError):
        DomainSpec("torus", 8)
    with pytest.raises(DomainError):
        DomainSpec("disk", 32, radius=1.2)  # reference profile needs radius < 1
    with pytest.raises(DomainError):
        DomainSpec("klein", 32)


def test_residual_constant_solution_on_torus():
    dom = DomainSpec("torus", 32)
    u = ScalarField(np.zeros(dom.shape), dom)
    r = residual(u, HiggsDatum.constant(1.0, dom), dom)
    assert np.abs(r.values).max() == 0.0


def test_residual_obstruction_on_torus():
    dom = DomainSpec("torus", 32)
    u = ScalarField(np.zeros(dom.shape), dom)
    r = residual(u, HiggsDatum.zero(dom), dom)
    assert np.abs(r.values - 1.0).max() == 0.0


def test_residual_disk_reference_rate():
    sups = []
    for n in (32, 64, 128):
        dom = DomainSpec("disk", n, radius=0.8)
        u = ScalarField(dom.reference_profile(), dom)
        r = residual(u, HiggsDatum.zero(dom), dom)
        sups.append(r.sup_interior())
    assert sups[1] <= 0.35 * sups[0]
    assert sups[2] <= 0.35 * sups[1]


@pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
def test_solve_torus_constant(c):
    dom = DomainSpec("torus", 32)
    u, report = solve(dom, HiggsDatum.constant(c, dom))
    assert report.converged
    assert np.abs(u.values + (2.0 / 3.0) * math.log(c)).max() <= 1e-8
    assert report.residual_norm <= 1e-10


def test_solve_torus_from_far_start():
    dom = DomainSpec("torus", 32)
    u0 = ScalarField(np.full(dom.shape, 2.0), dom)
    u, report = solve(dom, HiggsDatum.constant(1.0, dom), u0=u0)
    assert report.converged
    assert np.abs(u.values).max() <= 1e-8


def test_newton_contraction_is_quadratic():
    dom = DomainSpec("torus", 24)
    datum = HiggsDatum.constant(1.0, dom)
    u0 = ScalarField(np.full(dom.shape, 0.3), dom)
    u1, rep1 = solve(dom, datum, u0=u0, tol=1e-4)
    assert rep1.residual_norm <= 1e-4
    # one squaring step reaches 1e-8, a second lands at roundoff
    u2, rep2 = solve(dom, datum, u0=u1, tol=1e-10)
    assert rep2.iterations <= 2


def test_solve_disk_reference():
    dom = DomainSpec("disk", 128, radius=0.8)
    u, report = solve(dom, HiggsDatum.zero(dom))
    ref = dom.reference_profile()
    mask = dom.interior_mask()
    assert np.abs(u.values - ref)[mask].max() <= 5e-3
    assert report.curvature_max < 0


def test_disk_convergence_order():
    errs = []
    ns = [32, 48, 64, 96, 128]
    for n in ns:
        dom = DomainSpec("disk", n, radius=0.8)
        u, _ = solve(dom, HiggsDatum.zero(dom))
        mask = dom.interior_mask()
        errs.append(np.abs(u.values - dom.reference_profile())[mask].max())
    slope = -np.polyfit(np.log(ns), np.log(errs), 1)[0]
    assert 1.8 <= slope <= 2.2


def test_beta_field_examples():
    dom = DomainSpec("torus", 32)
    u = ScalarField(np.zeros(dom.shape), dom)
    assert np.abs(beta_field(u, HiggsDatum.zero(dom)).values).max() == 0.0
    for c in (0.5, 2.0):
        u, _ = solve(dom, HiggsDatum.constant(c, dom))
        b = beta_field(u, HiggsDatum.constant(c, dom))
        assert np.abs(b.values - 1.0).max() <= 1e-8


def test_max_principle_check_zero_field():
    dom = DomainSpec("torus", 32)
    report = max_principle_check(ScalarField(np.zeros(dom.shape), dom))
    assert report["strict"] and report["sup"] == 0.0


def test_curvature_flat_at_unit_constant():
    # c = 1 on the torus: the two source terms cancel, curvature reported
    # numerically as zero
    dom = DomainSpec("torus", 32)
    u, _ = solve(dom, HiggsDatum.constant(1.0, dom))
    k = curvature_field(u, dom)
    assert np.abs(k.values).max() <= 1e-8


def test_max_principle_check():
    dom = DomainSpec("torus", 32)
    u, _ = solve(dom, HiggsDatum.constant(1.0, dom))
    beta = beta_field(u, HiggsDatum.constant(1.0, dom))
    report = max_principle_check(beta)
    assert not report["strict"]
    assert report["sup"] == pytest.approx(1.0, abs=1e-8)

    dom = DomainSpec("disk", 64, radius=0.8)
    datum = HiggsDatum.monomial(1.0, 1, dom)
    u, rep = solve(dom, datum)
    report = max_principle_check(beta_field(u, datum))
    assert report["strict"]
    assert report["sup"] < 1.0
    assert rep.beta_sup == pytest.approx(report["sup"])


def test_curvature_reference_value():
    dom = DomainSpec("disk", 96, radius=0.8)
    u, _ = solve(dom, HiggsDatum.zero(dom))
    k = curvature_field(u, dom)
    mask = dom.interior_mask()
    assert np.abs(k.values[mask] + 4.0).max() <= 5e-3


def test_curvature_negative_in_admissible_regime():
    dom = DomainSpec("disk", 64, radius=0.8)
    for datum in (HiggsDatum.zero(dom), HiggsDatum.monomial(1.0, 1, dom), HiggsDatum.monomial(0.5, 2, dom)):
        u, report = solve(dom, datum)
        if report.beta_sup < 1.0:
            k = curvature_field(u, dom)
            assert k.values[dom.interior_mask()].max() < 0


def test_ratio_identity_diagnostic_shrinks():
    vals = []
    for n in (48, 96):
        dom = DomainSpec("disk", n, radius=0.8)
        datum = HiggsDatum.monomial(1.0, 1, dom)
        u, _ = solve(dom, datum)
        vals.append(ratio_identity_residual(u, datum, dom))
    assert vals[1] <= 0.5 * vals[0]
    assert vals[1] <= 0.05


def test_slice_dimensions():
    assert slice_dimensions(2) == (2, 4)
    assert slice_dimensions(3) == (4, 8)
    with pytest.raises(DomainError):
        slice_dimensions(1)


def test_gauge_equivalent():
    p = GaugeParams((0.3, -1.0), (0.0,), (0.0,))
    q = GaugeParams((-0.3, 1.0), (0.0,), (0.0,))
    assert gauge_equivalent(p, p)
    assert not gauge_equivalent(p, q)
    assert gauge_equivalent(p, q, over_complex=True)
    r = GaugeParams((0.3, -1.0), (0.5,), (0.0,))
    assert not gauge_equivalent(p, r, over_complex=True)


def test_field_csv_round_trip(tmp_path):
    dom = DomainSpec("torus", 16)
    rng = np.random.default_rng(0)
    u = ScalarField(rng.normal(size=dom.shape), dom)
    path = tmp_path / "field.csv"
    write_field_csv(path, u)
    back = read_field_csv(path, dom)
    assert np.array_equal(back.values, u.values)


def test_solve_error_reports_residual():
    dom = DomainSpec("torus", 16)
    with pytest.raises(SolveError) as err:
        solve(dom, HiggsDatum.constant(2.0, dom), tol=1e-30, max_iter=2)
    assert err.value.residual_norm is not None
