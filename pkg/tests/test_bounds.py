import math

import numpy as np
import pytest

from beurling_lab import bounds as bd
from beurling_lab.errors import DomainError

THETAS = [0.0, 0.3, 0.5, 0.7, 0.9]


def test_c_mu_anchor_values():
    assert bd.c_mu(2 / 3) == pytest.approx(3.0, abs=1e-12)
    assert bd.c_mu(1.0) == pytest.approx(4.0, abs=1e-12)


def test_c_mu_increasing_on_upper_range():
    grid = np.linspace(2 / 3, 1, 2001)
    vals = np.array([bd.c_mu(m) for m in grid])
    assert np.all(np.diff(vals) > 0)


def test_alpha_of_nu_at_one():
    for th in THETAS:
        assert bd.alpha_of_nu(1.0, th) == pytest.approx(1.0, abs=1e-12)


def test_F_nu_vanishes_at_root():
    for th in THETAS:
        for nu in np.linspace(1.0, 1.5, 11):
            a = bd.alpha_of_nu(nu, th)
            assert abs(bd.F_nu(a, nu, th)) <= 1e-12


def test_discriminant_sign_change():
    lim = (5 + math.sqrt(32)) / 7
    assert lim == pytest.approx(1.5224, abs=1e-4)
    assert bd.D_nu(lim - 1e-6, 0.3) > 0
    assert bd.D_nu(lim + 1e-6, 0.3) < 0
    with pytest.raises(DomainError):
        bd.alpha_of_nu(lim + 1e-3, 0.3)


def test_density_exponent_matches_c_mu():
    for th in THETAS:
        for mu in np.linspace(0.52, 1.0, 50):
            alpha = bd.alpha_from_mu(mu, th)
            nu = bd.nu_of_alpha(mu)
            assert bd.density_exponent_nu(alpha, nu, th) == pytest.approx(
                bd.c_mu(mu) * (1 - mu), abs=1e-10)


def test_eps_forms():
    for mu in np.linspace(0.6, 1, 9):
        assert bd.c_mu_eps(mu, 0.0) == pytest.approx(bd.c_mu(mu), abs=1e-14)
        assert bd.nu_alpha_eps(mu, 0.0) == pytest.approx(bd.nu_of_alpha(mu), abs=1e-14)
    assert bd.nu_of_alpha(1.0) == pytest.approx(1.0, abs=1e-15)


def test_fixed_point_alpha_nu():
    for th in THETAS:
        for mu in np.linspace(0.7, 1.0, 13):
            nu = bd.nu_of_alpha(mu)
            if nu > bd.NU_DISCRIMINANT_LIMIT:
                continue
            assert bd.alpha_of_nu(nu, th) == pytest.approx(bd.alpha_from_mu(mu, th), abs=1e-10)


def test_hm_alpha_tilde_dominates():
    for th in THETAS:
        assert bd.hm_alpha_tilde(1.0, th) == pytest.approx(bd.alpha_of_nu(1.0, th), abs=1e-12)
        for nu in np.linspace(1.01, 1.5, 50):
            assert bd.hm_alpha_tilde(nu, th) > bd.alpha_of_nu(nu, th)
            assert abs(bd.hm_quadratic(bd.hm_alpha_tilde(nu, th), nu, th)) <= 1e-12


def test_ram_alpha_inverse_and_endpoint():
    for th in [0.5, 0.6, 0.8]:
        assert bd.ram_alpha(1.5, th) == pytest.approx((th + 2) / 3, abs=1e-12)
        for alpha in np.linspace((th + 2) / 3 + 0.01, 0.99, 15):
            nu = bd.ram_nu_of_alpha(alpha, th)
            assert bd.ram_alpha(nu, th) == pytest.approx(alpha, abs=1e-10)
            assert abs(bd.ram_quadratic(alpha, nu, th)) <= 1e-12
            assert bd.ram_exponent_nu(alpha, nu, th) == pytest.approx(bd.ram_exponent(alpha, th),
                                                                       abs=1e-10)


def test_lambda_thresholds():
    assert bd.pnt_lambda_thresholds(0.1, math.inf, 12 / 5, 3.0) == pytest.approx(7 / 12, abs=1e-15)
    for th in [0.0, 0.4, 0.8]:
        c = 4 / (1 - th)
        for d in [0.1, 1.0, 10.0]:
            assert bd.pnt_lambda_thresholds(0.0, d, c, 9.0) == pytest.approx(
                bd.corollary_lambda(d, th), abs=1e-14)
        assert bd.corollary_lambda(1e12, th) == pytest.approx((th + 3) / 4, abs=1e-10)
        assert bd.corollary_lambda(math.inf, th) == (th + 3) / 4


def test_appendix_exponents():
    line, strip = bd.appendix_exponents(0.8, 0.6, 0.1)
    assert strip(0.8) == pytest.approx(line, abs=1e-15)
    assert strip(0.6) == pytest.approx(0.9, abs=1e-15)
    line0, _ = bd.appendix_exponents(1 - 1e-12, 0.6, 0.0)
    assert line0 == pytest.approx(0.0, abs=1e-10)
    with pytest.raises(DomainError):
        bd.appendix_exponents(0.5, 0.6, 0.1)


def test_exponent_table_csv():
    table = bd.exponent_table(0.0, [2 / 3, 1.0], eps=0.01)
    assert table.lookup("c_mu")[1][1] == pytest.approx(4.0)
    text = table.to_csv()
    assert text.startswith("# beurling-lab v1\nname,args,value\n")
    assert table.lookup("corollary_lambda_limit")[0][1] == 0.75
