import itertools
import math

import numpy as np
import pytest

from beurling_lab.continuous import ContinuousSystem
from beurling_lab.systems import PrimeSequence


# Desk-scale appendix systems.  k0 is the smallest value for which the
# prime measure stays positive on [1, 10^6] (see positivity_scan).
APPENDIX_ZEROS = dict(beta=0.7, theta=0.6, eps=0.1, k0=4, k_max=60)
APPENDIX_DETECT = dict(beta=0.85, theta=0.6, eps=0.1, k0=5, k_max=60)


@pytest.fixture(scope="session")
def appendix_system():
    return ContinuousSystem.appendix(**APPENDIX_ZEROS)


@pytest.fixture(scope="session")
def detect_system():
    return ContinuousSystem.appendix(**APPENDIX_DETECT)


def brute_force_integers(primes, x_max):
    """All index multisets with product <= x_max, by exhaustive exponent boxes."""
    ps = list(primes)
    bounds = [int(math.floor(math.log(x_max) / math.log(p) + 1e-12)) for p in ps]
    out = []
    for exps in itertools.product(*[range(b + 1) for b in bounds]):
        v = 1.0
        for p, e in zip(ps, exps):
            v *= p ** e
        if v <= x_max * (1 + 1e-12):
            out.append((v, exps))
    out.sort(key=lambda t: t[0])
    return out


def random_prime_sequence(rng, n_max=8, lo=1.1, hi=20.0):
    n = int(rng.integers(1, n_max + 1))
    ps = np.sort(rng.uniform(lo, hi, n))
    return PrimeSequence(tuple(ps.tolist()), label="random")


DETECT_X = 4.0
DETECT_Y = 2.0 ** 14


@pytest.fixture(scope="session")
def detect_stream(detect_system):
    from beurling_lab.continuous import discretize
    from beurling_lab.systems import enumerate_integers

    primes = discretize(detect_system, u_max=DETECT_X * DETECT_Y * 1.01).primes
    return enumerate_integers(primes, DETECT_X * DETECT_Y)
