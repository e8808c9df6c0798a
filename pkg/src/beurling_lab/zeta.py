"""Partial sums, mollifiers and zero-detecting Dirichlet polynomials.

With ``Z_Y(s) = sum_{n <= Y} n^{-s}`` and ``M_X(s) = sum_{n <= X} mu(n) n^{-s}``
the detection coefficients are those of the product ``Z_Y M_X``, formed on
the level of factorizations.  Because ``mu`` is the convolution inverse of
the constant function, the product equals ``1`` plus terms supported on
``(X, XY]``, which are then cut into dyadic blocks ``D_l``.  The identity

    zeta(s) M_X(s) - 1 - sum_l D_l(s) = (zeta(s) - Z_Y(s)) M_X(s)

holds exactly, so at a zero of zeta the blocks must be large unless the
right-hand side is.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator

import mpmath
import numpy as np

from .errors import DomainError, ResourceError, UsageError
from .selberg import CSV_HEADER, DirichletPolynomial
from .systems import IntegerStream, WellBehavedCertificate

#: |zeta(s)| below this (relative to the size of the partial sum) counts as a zero
ZERO_TOLERANCE = 1e-8


def _fsum_complex(z: np.ndarray) -> complex:
    return complex(math.fsum(z.real), math.fsum(z.imag))


def _powers(values: np.ndarray, s: complex) -> np.ndarray:
    return np.exp(-complex(s) * np.log(values))


def zeta_partial(stream: IntegerStream, s: complex, Y: float) -> complex:
    """``sum_{n_k <= Y} n_k^{-s}`` with compensated summation."""
    n = stream.count_N(Y)
    return _fsum_complex(_powers(stream.values[:n], s))


def zeta_partial_mp(stream: IntegerStream, s: complex, Y: float, dps: int = 80) -> mpmath.mpc:
    """Term-by-term reference value at high precision."""
    n = stream.count_N(Y)
    with mpmath.workdps(dps):
        ms = mpmath.mpc(s)
        return mpmath.fsum(mpmath.power(mpmath.mpf(float(v)), -ms) for v in stream.values[:n])


def zeta_approx(stream: IntegerStream, cert: WellBehavedCertificate, s: complex, Y: float,
                T: float | None = None) -> tuple[complex, float]:
    """Partial sum with the density correction ``A Y^{1-s}/(s-1)``.

    The error bound is ``K (Y^{1-sigma}/T + Y^{theta-sigma}
    + T Y^{theta-sigma}/(sigma-theta))`` with ``K`` from the certificate and
    ``T = |s|`` unless given.
    """
    s = complex(s)
    sigma = s.real
    if sigma <= cert.theta:
        raise DomainError(f"Re s = {sigma} must exceed theta = {cert.theta}")
    if s == 1:
        raise DomainError("s = 1 is the pole")
    if T is None:
        T = abs(s)
    value = zeta_partial(stream, s, Y) + cert.A * Y ** (1 - s) / (s - 1)
    K = cert.K_const
    err = K * (Y ** (1 - sigma) / T + Y ** (cert.theta - sigma)
               + T * Y ** (cert.theta - sigma) / (sigma - cert.theta))
    return value, float(err)


def classical_tail(s: complex, Y: float, dps: int = 30, terms: int = 12) -> complex:
    """``zeta(s) - sum_{n <= Y} n^{-s}`` for the ordinary integers.

    Terms are summed directly up to ``N >= |s|``, after which the
    Euler-Maclaurin expansion of ``sum_{n > N} n^{-s}`` converges like
    ``(2 pi)^{-2k}``.
    """
    n0 = int(math.floor(Y))
    N = max(n0, int(math.ceil(abs(complex(s)))) + 10)
    with mpmath.workdps(dps):
        ms = mpmath.mpc(s)
        total = mpmath.fsum(mpmath.power(n, -ms) for n in range(n0 + 1, N + 1))
        Nm = mpmath.mpf(N)
        total += mpmath.power(Nm, 1 - ms) / (ms - 1) - mpmath.power(Nm, -ms) / 2
        rising = ms
        for k in range(1, terms + 1):
            total += mpmath.bernoulli(2 * k) / mpmath.factorial(2 * k) * rising * mpmath.power(Nm, -ms - 2 * k + 1)
            rising *= (ms + 2 * k - 1) * (ms + 2 * k)
        return complex(total)


def mollifier_M(stream: IntegerStream, s: complex, X: float) -> tuple[complex, float]:
    """``M_X(s)`` and the trivial size ``X^{1-sigma} log(X+1)``."""
    n = stream.count_N(X)
    mu = stream.mu[:n]
    nz = mu != 0
    val = _fsum_complex(mu[nz] * _powers(stream.values[:n][nz], s))
    return val, float(X ** (1 - complex(s).real) * math.log(X + 1))


def mollifier_polynomial(stream: IntegerStream, X: float) -> DirichletPolynomial:
    n = stream.count_N(X)
    return DirichletPolynomial(stream.values[:n], stream.mu[:n].astype(complex), N_max=max(X, 1.0),
                               keys=np.arange(n))


def _squarefree_walk(stream: IntegerStream, X: float) -> Iterator[tuple[tuple[int, ...], float]]:
    """Squarefree products of distinct prime indices with value ``<= X``."""
    ps = stream.primes.primes
    npr = int(np.searchsorted(np.asarray(ps), X, side="right"))

    def rec(start: int, chosen: tuple[int, ...], val: float):
        yield chosen, val
        for i in range(start, npr):
            v = val * ps[i]
            if v > X * (1 + 1e-15):
                break
            yield from rec(i + 1, chosen + (i,), v)

    yield from rec(0, (), 1.0)


def detection_coefficients(stream: IntegerStream, X: float, Y: float,
                           truncate: bool = False) -> DirichletPolynomial:
    """Coefficients of ``Z_Y M_X`` on the stream members up to ``XY``.

    ``a_k = sum mu(n_j)`` over factorizations ``n_k = n_l n_j`` with
    ``n_l <= Y`` and ``n_j <= X``.  With ``truncate=True`` the support is cut
    at the stream cutoff instead of raising.
    """
    if X < 1 or Y < 1:
        raise DomainError(f"need X >= 1 and Y >= 1, got X={X}, Y={Y}")
    limit = X * Y
    if limit > stream.cutoff:
        if not truncate:
            raise ResourceError(
                f"X*Y = {limit:.6g} exceeds the stream cutoff {stream.cutoff:.6g}; enumerate further")
        limit = stream.cutoff
    n_out = stream.count_N(limit)
    a = np.zeros(n_out, dtype=np.int64)
    vals = stream.values
    # cache[m] holds the indices of n_l * m for the sorted prefix of n_l;
    # extending m by a prime only shortens the admissible prefix.
    cache: dict[tuple[int, ...], np.ndarray] = {}
    for chosen, m in _squarefree_walk(stream, X):
        src_n = int(np.searchsorted(vals, min(Y, limit / m), side="right"))
        if chosen:
            base = cache[chosen[:-1]][:src_n]
            idx = stream.prime_shift(chosen[-1])[base[base >= 0]]
        else:
            idx = np.arange(src_n, dtype=np.int64)
        cache[chosen] = idx
        hit = idx[(idx >= 0) & (idx < n_out)]
        np.add.at(a, hit, -1 if len(chosen) % 2 else 1)
    keys = np.arange(n_out)
    return DirichletPolynomial(vals[:n_out], a.astype(complex), N_max=max(limit, 1.0), keys=keys)


@dataclass
class DetectionConfig:
    T: float
    nu: float
    theta: float
    X: float
    alpha: float

    def __post_init__(self):
        if not self.T > 2:
            raise DomainError("T must exceed 2")
        if not 1 < self.nu <= 2:
            raise DomainError("nu must lie in (1, 2]")
        if not 0 <= self.theta < 1:
            raise DomainError("theta must lie in [0, 1)")
        if self.X < 1:
            raise DomainError("X must be at least 1")
        if self.X > self.Y:
            raise DomainError(f"X = {self.X} exceeds T^(nu/(1-theta)) = {self.Y}")

    @property
    def Y(self) -> float:
        return self.T ** (self.nu / (1 - self.theta))


@dataclass
class DetectionRun:
    blocks: list[DirichletPolynomial]
    L: int
    mollifier_len: float
    Y: float
    alpha: float
    edges: list[float] = field(default_factory=list)
    mollifier: DirichletPolynomial | None = None
    constant: complex = 1.0

    def block_values(self, s: complex) -> np.ndarray:
        return np.array([blk(s) if len(blk) else 0j for blk in self.blocks])

    def to_csv(self, s: complex | None = None) -> str:
        buf = io.StringIO()
        buf.write(CSV_HEADER + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["l", "N", "block_size", "max_abs_a", "abs_D_at_s"])
        vals = self.block_values(s) if s is not None else None
        for l, blk in enumerate(self.blocks):
            amax = float(np.max(np.abs(blk.coeffs))) if len(blk) else 0.0
            dv = repr(float(abs(vals[l]))) if vals is not None else ""
            w.writerow([l, repr(self.edges[l]), len(blk), repr(amax), dv])
        return buf.getvalue()


def dyadic_blocks(coeffs: DirichletPolynomial, X: float, Y: float, alpha: float = float("nan"),
                  mollifier: DirichletPolynomial | None = None) -> DetectionRun:
    """Split the terms in ``(X, XY]`` into blocks ``(2^l X, 2^{l+1} X]``, ``l = 0..L``."""
    if Y < 1:
        raise DomainError("Y must be at least 1")
    L = max(int(math.ceil(math.log2(Y) - 1e-12)) - 1, 0)
    f, c = coeffs.freqs, coeffs.coeffs
    blocks, edges = [], []
    for l in range(L + 1):
        lo, hi = X * 2.0 ** l, X * 2.0 ** (l + 1)
        sel = (f > lo) & (f <= hi)
        keys = None if coeffs.keys is None else np.asarray(coeffs.keys)[sel]
        blocks.append(DirichletPolynomial(f[sel], c[sel], N_max=hi, keys=keys))
        edges.append(lo)
    const = complex(np.sum(c[f <= X]))
    return DetectionRun(blocks, L, X, Y, alpha, edges, mollifier, const)


@dataclass
class DetectionOutcome:
    lhs: float
    passed: bool
    residual: float
    threshold: float
    slack: float
    block_abs: np.ndarray

    def __iter__(self):
        yield self.lhs
        yield self.passed


def detection_check(run: DetectionRun, zeta_eval: Callable[[complex], complex], s: complex,
                    generic: bool = False, zero_tol: float = ZERO_TOLERANCE) -> DetectionOutcome:
    """Check the detector inequality at a zero, or the residual identity at a generic point.

    At a zero, ``lhs = max_l |D_l(s)|`` and the test is
    ``lhs >= 1/(2(L+1)) - slack`` with ``slack = max(0, |E| - 1/2)/(L+1)``,
    where ``E = zeta M_X - 1 - sum D_l`` is measured.  At a generic point
    ``lhs = |E|`` and ``passed`` reports whether the block sum reproduces
    ``zeta M_X`` up to ``|E|``, i.e. is finite and consistent.
    """
    if run.mollifier is None:
        raise UsageError("run carries no mollifier; build it with dyadic_blocks(..., mollifier=...)")
    z = complex(zeta_eval(s))
    m = run.mollifier(s)
    dv = run.block_values(s)
    E = z * m - run.constant - complex(np.sum(dv))
    resid = abs(E)
    threshold = 1.0 / (2 * (run.L + 1))
    slack = max(0.0, resid - 0.5) / (run.L + 1)
    babs = np.abs(dv)
    if generic:
        return DetectionOutcome(resid, bool(np.isfinite(resid)), resid, threshold, slack, babs)
    scale = max(1.0, abs(run.constant) + float(np.sum(babs)))
    if abs(z) > zero_tol * scale:
        raise UsageError(f"|zeta(s)| = {abs(z):.3e} is not a zero; pass generic=True for a residual check")
    lhs = float(babs.max()) if babs.size else 0.0
    return DetectionOutcome(lhs, lhs >= threshold - slack - 1e-15, resid, threshold, slack, babs)
