import math

import numpy as np
import pytest

from beurling_lab.continuous import ContinuousSystem, psi_C
from beurling_lab.errors import DomainError, GeometryError
from beurling_lab.zeros import (BoxQuery, N_alpha_T, box_winding, density_report, entire_f,
                                explicit_formula_residual, known_count, known_zeros,
                                predicted_line_count, strip_counts, system_winding, winding_count,
                                zeros_to_csv)

RHO = complex(0.8, 10.0)


def test_winding_simple_and_double():
    box = (0.5, 1.0, 5.0, 15.0)
    assert winding_count(lambda s: s - RHO, box) == 1
    assert winding_count(lambda s: (s - RHO) ** 2, box) == 2
    assert winding_count(lambda s: s - (0.3 + 10j), box) == 0


def test_winding_zero_on_edge():
    with pytest.raises(GeometryError):
        winding_count(lambda s: s - complex(0.5, 10.0), (0.5, 1.0, 5.0, 15.0))


def test_winding_subdivision(appendix_system):
    whole = system_winding(appendix_system, (0.6, 1.0, 0.5, 60.3))
    parts = sum(system_winding(appendix_system, (0.6, 1.0, a, b))
                for a, b in [(0.5, 17.1), (17.1, 33.7), (33.7, 60.3)])
    assert whole == parts > 0


def test_conjugate_symmetry(appendix_system):
    up = system_winding(appendix_system, (0.6, 1.0, 3.3, 45.1))
    down = system_winding(appendix_system, (0.6, 1.0, -45.1, -3.3))
    assert up == down


def test_winding_matches_known_near_rho(appendix_system):
    rho = appendix_system.rhos[0]
    q = BoxQuery(0.6, rho.imag - 1.5, rho.imag + 1.5)
    n = known_count(appendix_system, q)
    assert n >= 2
    assert box_winding(appendix_system, q) == n


def test_known_zeros_right_of_beta(appendix_system):
    zs = known_zeros(appendix_system, BoxQuery(0.7 - 1e-9, 0.0, 200.0))
    rhos = {round(r.imag, 6) for r in appendix_system.rhos if r.imag <= 200}
    assert {round(abs(z.gamma), 6) for z in zs} == rhos
    assert all(abs(z.beta - 0.7) < 1e-9 for z in zs)
    assert all(z.residual <= 1e-8 for z in zs)


def test_known_zeros_empty_system():
    assert known_zeros(ContinuousSystem.empty(), BoxQuery(0.6, 0.0, 100.0)) == []
    with pytest.raises(DomainError):
        known_zeros(ContinuousSystem.empty(), BoxQuery(0.52, 0.0, 100.0))


def test_box_query_validation():
    with pytest.raises(DomainError):
        BoxQuery(0.4, 0.0, 1.0)
    with pytest.raises(DomainError):
        BoxQuery(0.7, 3.0, 1.0)


def test_N_alpha_T_counts(appendix_system):
    for T in [20.0, 50.0]:
        assert N_alpha_T(appendix_system, 0.7, T) == predicted_line_count(appendix_system, T)
    assert N_alpha_T(appendix_system, 1.0, 100.0) == 0
    assert N_alpha_T(appendix_system, 0.6, 20.0) == known_count(appendix_system, BoxQuery(0.6, 0, 20.0))


def test_strip_counts_total(appendix_system):
    sc = strip_counts(appendix_system, 0.6, 30.0)
    assert sc.total == N_alpha_T(appendix_system, 0.6, 30.0)
    assert np.all(np.diff(sc.cuts) > 0)


def test_entire_f_positive_on_real_axis(appendix_system):
    xs = np.linspace(0.6, 3.0, 50)
    v = entire_f(appendix_system, xs)
    assert np.all(np.abs(v.imag) <= 1e-12 * np.abs(v)) and np.all(v.real > 0)


def test_density_report(appendix_system):
    rep = density_report(appendix_system, [0.65, 0.7, 1.0], [20.0, 60.0])
    for r in rep.rows:
        if r.alpha == 1.0:
            assert r.N == 0
        if r.upper_applicable:
            assert r.N <= r.upper
    assert rep.lower_constants[0.7] > 0
    assert rep.passed()
    text = rep.to_csv()
    assert text.splitlines()[0] == "# beurling-lab v1"
    assert len(text.splitlines()) == 2 + 6


def test_explicit_formula_empty():
    for x in [100.0, 1000.0]:
        r = explicit_formula_residual(ContinuousSystem.empty(), x, 0.65, 50.0)
        assert r.residual == pytest.approx(1 + math.log(x), rel=1e-12)
        assert r.residual <= r.budget


def test_explicit_formula_ablation():
    sysm = ContinuousSystem.from_zeros([(3.0, RHO)])
    x = 1e4
    with_zero = explicit_formula_residual(sysm, x, 0.75, 50.0)
    assert with_zero.n_zeros == 2
    without = abs(psi_C(sysm, x) - x)
    assert with_zero.residual < without


def test_explicit_formula_domain(appendix_system):
    with pytest.raises(DomainError):
        explicit_formula_residual(appendix_system, 100.0, 0.55, 50.0)
    with pytest.raises(DomainError):
        explicit_formula_residual(appendix_system, 100.0, 0.65, 500.0)


def test_zeros_csv(appendix_system):
    zs = known_zeros(appendix_system, BoxQuery(0.65, 0.0, 30.0))
    lines = zeros_to_csv(zs).splitlines()
    assert lines[0] == "# beurling-lab v1"
    assert lines[1] == "beta,gamma,multiplicity,residual,source"
    assert len(lines) == 2 + len(zs)
