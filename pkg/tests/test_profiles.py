import math

import numpy as np
import pytest

from gmshadow import profiles


def test_phi0_values():
    assert profiles.phi0(0.0, 2.0) == pytest.approx(1.0, abs=1e-15)
    assert profiles.phi0(0.0, 3.0) == pytest.approx(2.0 ** -0.5, abs=1e-15)
    # bracket terms equal when |z|^2 = 4p/(p-1)
    z = math.sqrt(4 * 2.0 / (2.0 - 1.0))
    assert profiles.phi0(z, 2.0) == pytest.approx(0.5, abs=1e-15)


def test_phi0_monotone_and_bounded():
    z = np.linspace(0.0, 50.0, 500)
    vals = profiles.phi0(z, 2.5)
    assert np.all(np.diff(vals) < 0.0)
    assert np.all(vals <= profiles.kappa(2.5) + 1e-15)


def test_phi_values():
    assert profiles.phi(0.0, 10.0, 2.0, 1) == pytest.approx(1.025, abs=1e-15)
    y = math.sqrt(25.0) * math.sqrt(4 * 2.0 / 1.0)
    assert profiles.phi(y, 25.0, 2.0, 3) == pytest.approx(0.5 + 0.03, abs=1e-14)
    # correction vanishes as s -> infinity
    assert profiles.phi(0.0, 1e12, 2.0, 3) == pytest.approx(1.0, abs=1e-11)


def test_phi_rejects_small_s():
    with pytest.raises(ValueError):
        profiles.phi(0.0, 1.0, 2.0, 3)


def test_phi_matches_phi0_identity():
    # phi(z*sqrt(s), s) == phi0(z) + kappa*N/(2ps) as an algebraic identity
    rng = np.random.RandomState(0)
    for p, dim in [(2.0, 3), (3.0, 1), (1.5, 2)]:
        for s in (2.0, 7.0, 40.0):
            z = rng.uniform(0.0, 30.0, size=64)
            lhs = profiles.phi(z * math.sqrt(s), s, p, dim)
            rhs = profiles.phi0(z, p) + profiles.kappa(p) * dim / (2 * p * s)
            assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_hat_U_values():
    assert profiles.hat_U(0.0, 2.0, 8.0) == pytest.approx(2.0 / 3.0, rel=1e-14)
    assert profiles.hat_U(1.0, 2.0, 8.0) == pytest.approx(2.0, rel=1e-14)


def test_hat_U_solves_its_ode():
    p, K0 = 2.0, 8.0
    h = 1e-4
    tau = np.linspace(0.0, 0.9, 19)
    num = (profiles.hat_U(tau + h, p, K0) - profiles.hat_U(tau - h, p, K0)) / (2 * h)
    residual = np.abs(num - profiles.hat_U(tau, p, K0) ** p)
    assert np.max(residual) < 50 * h ** 2


def test_hat_U_rejects_bad_tau():
    with pytest.raises(ValueError):
        profiles.hat_U(3.0, 2.0, 8.0)


def test_H_star_far_branch_and_point_value():
    assert profiles.H_star(0.9, 2.0, 1.0) == 1.0
    # singular branch at |x| = 1/e with the boundary far away
    val = profiles.H_star(math.exp(-1.0), 2.0, 10.0)
    assert val == pytest.approx(16.0 * math.e ** 2, rel=1e-13)


def test_H_star_continuity_at_junctions():
    p, d = 2.0, 1.0
    x1, x2 = 0.25, 0.5
    # the blend agrees with both outer branches at the junctions to 1e-10
    inner_jump = abs(float(profiles.H_star(x1, p, d))
                     - float(profiles.final_profile_shape(x1, p)))
    assert inner_jump < 1e-10
    outer_jump = abs(float(profiles.H_star(x2, p, d)) - 1.0)
    assert outer_jump < 1e-10
    # first derivatives match too (finite-difference probe)
    eps = 1e-7
    for x, exact in ((x1, None), (x2, 0.0)):
        fd = (float(profiles.H_star(x + eps, p, d))
              - float(profiles.H_star(x - eps, p, d))) / (2 * eps)
        if exact is None:
            shape_fd = (float(profiles.final_profile_shape(x, p))
                        - float(profiles.final_profile_shape(x - 2 * eps, p))) / (2 * eps)
            assert fd == pytest.approx(shape_fd, rel=1e-3)
        else:
            assert abs(fd - exact) < 1e-3
    # monotone decreasing across the blend
    xs = np.linspace(x1, x2, 400)
    vals = profiles.H_star(xs, p, d)
    assert np.all(np.diff(vals) <= 1e-12)


def test_H_star_rejects_origin():
    with pytest.raises(ValueError):
        profiles.H_star(0.0, 2.0, 1.0)


def test_chi0_plateau_support():
    assert profiles.chi0(0.5) == 1.0
    assert profiles.chi0(1.0) == 1.0
    assert profiles.chi0(3.0) == 0.0
    assert profiles.chi0(2.0) == 0.0
    mid = profiles.chi0(1.5)
    assert 0.0 < mid < 1.0


def test_cutoffs_range_and_monotone():
    x = np.linspace(0.0, 3.0, 601)
    for vals in (profiles.chi0(x), profiles.chi1(x, 1e-3),
                 profiles.psi_M0(x, 8.0, 2.0), profiles.chi(x, 9.0, 10.0)):
        assert np.all(vals >= 0.0) and np.all(vals <= 1.0)
        assert np.all(np.diff(vals) <= 1e-12)


def test_chi_support_condition():
    K0, s = 10.0, 9.0
    y = 3.0 * K0 * math.sqrt(s)
    assert profiles.chi(y, s, K0) == 0.0


def test_chi0_derivatives_match_finite_differences():
    x = np.linspace(1.05, 1.95, 181)
    h = 1e-6
    fd1 = (profiles.chi0(x + h) - profiles.chi0(x - h)) / (2 * h)
    assert np.max(np.abs(fd1 - profiles.chi0_prime(x))) < 1e-7
    fd2 = (profiles.chi0(x + h) - 2 * profiles.chi0(x) + profiles.chi0(x - h)) / h ** 2
    assert np.max(np.abs(fd2 - profiles.chi0_second(x))) < 1e-3


def test_profile_derivatives_match_finite_differences():
    p, dim, s = 2.5, 3, 12.0
    y = np.linspace(0.0, 40.0, 81)
    h = 1e-5
    fd_s = (profiles.phi(y, s + h, p, dim) - profiles.phi(y, s - h, p, dim)) / (2 * h)
    assert np.max(np.abs(fd_s - profiles.phi_s(y, s, p, dim))) < 1e-9
    fd_y = (profiles.phi(y + h, s, p, dim) - profiles.phi(np.abs(y - h), s, p, dim)) / (2 * h)
    assert np.max(np.abs(fd_y - profiles.phi_radial_deriv(y, s, p))) < 1e-8
    # Laplacian against 1D second difference plus the angular term away from 0
    yy = y[4:]
    fd_lap = ((profiles.phi(yy + h, s, p, dim) - 2 * profiles.phi(yy, s, p, dim)
               + profiles.phi(yy - h, s, p, dim)) / h ** 2
              + (dim - 1) / yy * profiles.phi_radial_deriv(yy, s, p))
    assert np.max(np.abs(fd_lap - profiles.phi_laplacian(yy, s, p, dim))) < 1e-5
