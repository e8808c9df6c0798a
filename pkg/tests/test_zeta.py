import math

import mpmath
import numpy as np
import pytest

from beurling_lab.continuous import zeta_C
from beurling_lab.errors import DomainError, ResourceError, UsageError
from beurling_lab.systems import (PrimeSequence, WellBehavedCertificate, classical_stream,
                                  enumerate_integers)
from beurling_lab.zeros import BoxQuery, known_zeros
from beurling_lab.zeta import (DetectionConfig, classical_tail, detection_check,
                               detection_coefficients, dyadic_blocks, mollifier_M, mollifier_polynomial,
                               zeta_approx, zeta_partial, zeta_partial_mp)

from conftest import DETECT_X, DETECT_Y, random_prime_sequence


def stream_of(*ps, x_max):
    return enumerate_integers(PrimeSequence(tuple(float(p) for p in ps)), x_max)


def test_zeta_partial_geometric():
    s = stream_of(2, x_max=8)
    assert zeta_partial(s, 2, 8) == pytest.approx(1 + 1 / 4 + 1 / 16 + 1 / 64, rel=1e-15)
    assert zeta_partial(s, 0, 8) == 4


def test_zeta_partial_against_mp():
    rng = np.random.default_rng(20)
    stream = enumerate_integers(random_prime_sequence(rng, 8, 1.1, 7), 2000)
    for _ in range(5):
        s = complex(rng.uniform(0.3, 2), rng.uniform(-50, 50))
        ref = complex(zeta_partial_mp(stream, s, 2000, dps=80))
        assert abs(zeta_partial(stream, s, 2000) - ref) <= 1e-12 * abs(ref)


def test_zeta_partial_beyond_cutoff():
    with pytest.raises(DomainError):
        zeta_partial(stream_of(2, 3, x_max=9), 2, 10)


def test_zeta_approx_classical_s2():
    stream = classical_stream(1e3)
    cert = WellBehavedCertificate(1.0, 0.0, 1.0)
    val, err = zeta_approx(stream, cert, 2.0, 1e3)
    assert abs(val - math.pi ** 2 / 6) <= err


def test_zeta_approx_error_bound_on_grid():
    # N(x) = floor(x) gives A = 1, theta = 0 and |N(x) - x| <= 1
    stream = classical_stream(1e4)
    cert = WellBehavedCertificate(1.0, 0.0, 1.0)
    worst = 0.0
    for sigma in np.linspace(0.5, 2.0, 4):
        for t in [20.0, 35.0]:
            s = complex(sigma, t)
            val, err = zeta_approx(stream, cert, s, 1e4)
            true = complex(mpmath.zeta(s))
            worst = max(worst, abs(val - true) / err)
    assert worst <= 1.0


def test_zeta_approx_zero_remainder():
    cert = WellBehavedCertificate(1.0, 0.5, 0.0)
    _, err = zeta_approx(classical_stream(100), cert, 2 + 1j, 100)
    assert err == 0.0
    with pytest.raises(DomainError):
        zeta_approx(classical_stream(100), cert, 0.4, 100)


def test_classical_tail():
    stream = classical_stream(100)
    s = 0.7 + 12j
    total = zeta_partial(stream, s, 100) + classical_tail(s, 100)
    assert abs(total - complex(mpmath.zeta(s))) < 1e-12


def test_mollifier_examples():
    s = stream_of(2, 3, x_max=50)
    assert mollifier_M(s, 1.3 + 4j, 1.5)[0] == 1
    assert mollifier_M(s, 0, 3)[0] == -1
    rng = np.random.default_rng(21)
    for _ in range(10):
        st = enumerate_integers(random_prime_sequence(rng, 8, 1.1, 9), 200)
        X = float(rng.uniform(2, 200))
        sig = float(rng.uniform(0, 1.5))
        val, size = mollifier_M(st, complex(sig, rng.uniform(-30, 30)), X)
        assert abs(val) <= st.count_N(X) * max(1.0, X ** -sig)
        assert abs(val) <= sum(abs(m) * v ** -sig for m, v in zip(st.mu, st.values) if v <= X) + 1e-12


def test_detection_coefficients_hand_table():
    s = stream_of(2, 3, x_max=20)
    a = detection_coefficients(s, 3, 4)
    got = {round(f, 9): int(c.real) for f, c in zip(a.freqs, a.coeffs) if c != 0}
    assert got == {1.0: 1, 6.0: -2, 8.0: -1, 9.0: -1, 12.0: -1}


def test_detection_coefficients_by_pairs():
    rng = np.random.default_rng(22)
    for _ in range(5):
        st = enumerate_integers(random_prime_sequence(rng, 5, 1.2, 4), 400)
        X, Y = 8.0, 40.0
        a = detection_coefficients(st, X, Y)
        expect = {}
        for i in range(st.count_N(Y)):
            for j in range(st.count_N(X)):
                key = tuple(sorted(st.indices(i) + st.indices(j)))
                expect[key] = expect.get(key, 0) + int(st.mu[j])
        for k in range(len(a)):
            assert a.coeffs[k].real == expect.get(st.indices(k), 0)
            assert abs(a.coeffs[k]) <= st.d[k]
            if 1 < st.values[k] <= X:
                assert a.coeffs[k] == 0


def test_full_mollification_is_delta():
    st = stream_of(2, 3, 5, x_max=300)
    a = detection_coefficients(st, 300, 300, truncate=True)
    assert a.coeffs[0] == 1
    assert np.all(a.coeffs[1:] == 0)


def test_detection_coefficients_preconditions():
    st = stream_of(2, 3, x_max=20)
    with pytest.raises(DomainError):
        detection_coefficients(st, 3, 0.5)
    with pytest.raises(ResourceError):
        detection_coefficients(st, 3, 10)


def test_dyadic_blocks_partition():
    st = stream_of(2, 3, 5, 7, x_max=4096)
    a = detection_coefficients(st, 4, 1024)
    assert dyadic_blocks(a, 4, 2).L + 1 == 1
    run = dyadic_blocks(a, 4, 1024)
    assert run.L + 1 == 10
    freqs = np.concatenate([b.freqs for b in run.blocks])
    coeffs = np.concatenate([b.coeffs for b in run.blocks])
    tail = a.freqs > 4
    assert sorted(zip(freqs, coeffs.real)) == sorted(zip(a.freqs[tail], a.coeffs[tail].real))
    assert "l,N,block_size,max_abs_a,abs_D_at_s" in run.to_csv(2.0)


def test_detection_check_generic_residual():
    st = classical_stream(4096)
    X, Y = 4.0, 1024.0
    run = dyadic_blocks(detection_coefficients(st, X, Y), X, Y, mollifier=mollifier_polynomial(st, X))
    s = 2.0
    out = detection_check(run, lambda z: complex(mpmath.zeta(z)), s, generic=True)
    # the identity: zeta M - 1 - sum D = (zeta - Z_Y) M
    M = mollifier_M(st, s, X)[0]
    assert out.residual == pytest.approx(abs(classical_tail(s, Y) * M), rel=1e-8)
    assert out.threshold == 1 / (2 * (run.L + 1))
    with pytest.raises(UsageError):
        detection_check(run, lambda z: complex(mpmath.zeta(z)), s)


def test_one_block_threshold():
    st = classical_stream(16)
    run = dyadic_blocks(detection_coefficients(st, 4, 2), 4, 2, mollifier=mollifier_polynomial(st, 4))
    out = detection_check(run, lambda z: 0.0, 2.0, generic=True)
    assert run.L == 0 and len(run.blocks) == 1
    assert out.threshold == 0.5
    run2 = dyadic_blocks(detection_coefficients(st, 4, 4), 4, 4, mollifier=mollifier_polynomial(st, 4))
    assert len(run2.blocks) == 2
    assert detection_check(run2, lambda z: 0.0, 2.0, generic=True).threshold == 0.25


def test_detection_config_conditions():
    cfg = DetectionConfig(T=100.0, nu=1.5, theta=0.5, X=10.0, alpha=0.8)
    assert cfg.Y == pytest.approx(100.0 ** 3)
    with pytest.raises(DomainError):
        DetectionConfig(T=100.0, nu=1.5, theta=0.5, X=1e7, alpha=0.8)
    with pytest.raises(DomainError):
        DetectionConfig(T=100.0, nu=2.5, theta=0.5, X=10.0, alpha=0.8)


def test_detection_at_appendix_zero(detect_system, detect_stream):
    run = dyadic_blocks(detection_coefficients(detect_stream, DETECT_X, DETECT_Y), DETECT_X, DETECT_Y,
                        mollifier=mollifier_polynomial(detect_stream, DETECT_X))
    zs = known_zeros(detect_system, BoxQuery(0.8, 0.0, 1e4))
    assert zs
    out = detection_check(run, lambda s: zeta_C(detect_system, s), zs[0].rho)
    assert out.passed
