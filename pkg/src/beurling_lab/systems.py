"""Discrete Beurling systems: generalized primes, their integers, and the
arithmetic counting functions built on them.

Generalized integers are produced in nondecreasing order from a priority
queue.  Integers with equal numerical value but different factorizations are
different integers and stay separate entries; equal values are ordered by
the sorted tuple of prime indices of their factorization.

The stream does not store factorizations explicitly.  Entry ``k`` records its
parent ``n_k / p`` and the index of the largest prime ``p`` in it, so a
factorization is recovered by walking parents, and ``mu``, ``d`` and
``Lambda`` are computed incrementally while enumerating.
"""

from __future__ import annotations

import csv
import heapq
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import mpmath
import numpy as np

from .errors import DomainError, ResourceError

DEFAULT_MAX_ITEMS = 5_000_000
TIE_RELATIVE_GAP = 2.0 ** -40
CERTIFICATE_GRID_POINTS = 64


@dataclass(frozen=True)
class PrimeSequence:
    primes: tuple[float, ...]
    label: str = ""

    def __post_init__(self):
        ps = tuple(float(p) for p in self.primes)
        object.__setattr__(self, "primes", ps)
        if ps and ps[0] <= 1.0:
            raise DomainError(f"generalized primes must exceed 1, got {ps[0]}")
        if any(b < a for a, b in zip(ps, ps[1:])):
            raise DomainError("generalized primes must be nondecreasing")

    def __len__(self) -> int:
        return len(self.primes)

    def truncated(self, p_max: float) -> "PrimeSequence":
        return PrimeSequence(tuple(p for p in self.primes if p <= p_max), self.label)

    @classmethod
    def from_text(cls, text: str, label: str = "") -> "PrimeSequence":
        """Parse one decimal prime per line; ``#`` starts a comment."""
        ps = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                ps.append(float(line))
        return cls(tuple(sorted(ps)), label)

    @classmethod
    def from_file(cls, path: str | Path) -> "PrimeSequence":
        path = Path(path)
        return cls.from_text(path.read_text(), label=path.stem)

    def to_text(self) -> str:
        head = f"# {self.label}\n" if self.label else ""
        return head + "".join(f"{p!r}\n" for p in self.primes)


def rational_primes(limit: float) -> PrimeSequence:
    """Classical primes up to ``limit`` (sieve of Eratosthenes)."""
    n = int(limit)
    if n < 2:
        return PrimeSequence((), "rational")
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, math.isqrt(n) + 1):
        if sieve[p]:
            sieve[p * p::p] = False
    return PrimeSequence(tuple(float(p) for p in np.flatnonzero(sieve)), "rational")


@dataclass(frozen=True)
class GenInteger:
    """A generalized integer with its factorization.

    ``exponents`` is a sorted tuple of ``(prime_index, multiplicity)`` pairs;
    ``primes`` holds the corresponding prime values so that the Mangoldt
    function can be evaluated without the parent sequence.
    """
    value: float
    exponents: tuple[tuple[int, int], ...]
    primes: tuple[float, ...] = ()

    @classmethod
    def from_indices(cls, indices: Iterable[int], sequence: PrimeSequence) -> "GenInteger":
        counts: dict[int, int] = {}
        for i in indices:
            counts[i] = counts.get(i, 0) + 1
        exps = tuple(sorted(counts.items()))
        value = 1.0
        for i, e in exps:
            value *= sequence.primes[i] ** e
        return cls(value, exps, tuple(sequence.primes[i] for i, _ in exps))


def moebius(n: GenInteger) -> int:
    if any(e >= 2 for _, e in n.exponents):
        return 0
    return -1 if len(n.exponents) % 2 else 1


def divisor_d(n: GenInteger) -> int:
    out = 1
    for _, e in n.exponents:
        out *= e + 1
    return out


def von_mangoldt(n: GenInteger) -> float:
    if len(n.exponents) != 1:
        return 0.0
    if n.primes:
        return math.log(n.primes[0])
    return math.log(n.value) / n.exponents[0][1]


@dataclass(frozen=True)
class WellBehavedCertificate:
    A: float
    theta: float
    K_const: float


class IntegerStream:
    """Sorted, complete list of generalized integers up to ``cutoff``.

    Query methods are pure; a stream is never modified after construction.
    """

    def __init__(self, primes: PrimeSequence, cutoff: float, values: np.ndarray,
                 parent: np.ndarray, last_prime: np.ndarray, last_exp: np.ndarray,
                 mu: np.ndarray, d: np.ndarray, omega: np.ndarray):
        self.primes = primes
        self.cutoff = float(cutoff)
        self.values = values
        self.parent = parent
        self.last_prime = last_prime
        self.last_exp = last_exp
        self.mu = mu
        self.d = d
        self.omega = omega
        logs = np.log(np.asarray(primes.primes, dtype=float)) if len(primes) else np.zeros(0)
        lam = np.zeros(len(values))
        pp = omega == 1
        lam[pp] = logs[last_prime[pp]]
        self.Lambda = lam
        self._cache: dict = {}
        for arr in (values, parent, last_prime, last_exp, mu, d, omega, lam):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def big_omega(self) -> np.ndarray:
        """Number of prime factors counted with multiplicity."""
        cached = self._cache.get("big_omega")
        if cached is None:
            par = self.parent.tolist()
            out = [0] * len(par)
            for k in range(1, len(par)):
                out[k] = out[par[k]] + 1
            cached = np.asarray(out, dtype=np.int64)
            cached.setflags(write=False)
            self._cache["big_omega"] = cached
        return cached

    def _pair_lookup(self, parents: np.ndarray, primes: np.ndarray) -> np.ndarray:
        """Index of the entry with the given (parent, last prime), or -1."""
        table = self._cache.get("pair_table")
        if table is None:
            P = max(len(self.primes), 1)
            codes = self.parent[1:] * P + self.last_prime[1:]
            order = np.argsort(codes, kind="stable")
            table = (P, codes[order], order + 1)
            self._cache["pair_table"] = table
        P, codes, idx = table
        q = parents * P + primes
        pos = np.searchsorted(codes, q)
        pos_c = np.minimum(pos, max(len(codes) - 1, 0))
        hit = (pos < len(codes)) & (codes[pos_c] == q) if len(codes) else np.zeros(len(q), bool)
        return np.where(hit, idx[pos_c] if len(codes) else -1, -1)

    def prime_shift(self, i: int) -> np.ndarray:
        """Index map ``k -> index of n_k * p_i`` for every ``k`` whose product
        stays within the cutoff (``-1`` where it does not).

        The product is located through the factorization, never by value,
        so equal-valued integers with different factorizations stay apart.
        """
        key = ("shift", int(i))
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        n = len(self.values)
        out = np.full(n, -1, dtype=np.int64)
        depth = self.big_omega
        out[0] = self._pair_lookup(np.array([0]), np.array([i]))[0]
        for lev in range(1, int(depth.max()) + 1 if n > 1 else 1):
            ks = np.flatnonzero(depth == lev)
            direct = self.last_prime[ks] <= i
            kd = ks[direct]
            out[kd] = self._pair_lookup(kd, np.full(kd.size, i))
            ki = ks[~direct]
            via = out[self.parent[ki]]
            ok = via >= 0
            res = np.full(ki.size, -1, dtype=np.int64)
            res[ok] = self._pair_lookup(via[ok], self.last_prime[ki][ok])
            out[ki] = res
        out.setflags(write=False)
        self._cache[key] = out
        return out

    def indices(self, k: int) -> tuple[int, ...]:
        """Prime indices of entry ``k`` in nondecreasing order."""
        out = []
        while k > 0:
            out.append(int(self.last_prime[k]))
            k = int(self.parent[k])
        return tuple(reversed(out))

    def exponents(self, k: int) -> tuple[tuple[int, int], ...]:
        counts: dict[int, int] = {}
        for i in self.indices(k):
            counts[i] = counts.get(i, 0) + 1
        return tuple(sorted(counts.items()))

    def __getitem__(self, k: int) -> GenInteger:
        exps = self.exponents(k)
        return GenInteger(float(self.values[k]), exps,
                          tuple(self.primes.primes[i] for i, _ in exps))

    @property
    def items(self) -> list[GenInteger]:
        return [self[k] for k in range(len(self))]

    def _check(self, x: float) -> None:
        if x > self.cutoff:
            raise DomainError(f"x={x} lies beyond the stream cutoff {self.cutoff}")

    def count_N(self, x: float) -> int:
        self._check(x)
        return int(np.searchsorted(self.values, x, side="right"))

    def chebyshev_psi(self, x: float) -> float:
        n = self.count_N(x)
        return math.fsum(self.Lambda[:n])

    def chi(self, x: float, lam: float) -> int:
        if lam < 0:
            raise DomainError("window radius must be nonnegative")
        self._check(x + lam)
        lo = np.searchsorted(self.values, x - lam, side="left")
        hi = np.searchsorted(self.values, x + lam, side="right")
        return int(hi - lo)

    def chi_many(self, xs: np.ndarray, lam: float) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if xs.size:
            self._check(float(xs.max()) + lam)
        lo = np.searchsorted(self.values, xs - lam, side="left")
        hi = np.searchsorted(self.values, xs + lam, side="right")
        return hi - lo

    def divisor_moment(self, x: float, j: int) -> int:
        if j < 1:
            raise DomainError("moment order must be >= 1")
        n = self.count_N(x)
        return sum(int(v) ** j for v in self.d[:n])

    def ramanujan_moment(self, x: float, p: float) -> float:
        if p < 1.0:
            raise DomainError("Ramanujan exponent must be >= 1")
        n = self.count_N(x)
        chis = self.chi_many(self.values[:n], 1.0).astype(float)
        return math.fsum(chis ** p)

    def index_of(self, value: float, rtol: float = 1e-12) -> int:
        """Index of an entry numerically equal to ``value`` (first one)."""
        k = int(np.searchsorted(self.values, value * (1.0 - rtol), side="left"))
        if k < len(self) and abs(self.values[k] - value) <= rtol * max(1.0, value):
            return k
        raise DomainError(f"{value} is not a generalized integer of this stream")

    def fit_certificate(self, theta: float, n_points: int = CERTIFICATE_GRID_POINTS
                        ) -> WellBehavedCertificate:
        """Least-squares density ``A`` and the sup of ``|N(x) - A x| / x^theta``
        over a log-spaced grid on ``[cutoff/100, cutoff]``."""
        lo = max(1.0, self.cutoff / 100.0)
        if n_points < 3 or not lo < self.cutoff:
            raise DomainError("certificate grid needs at least 3 distinct points")
        xs = np.geomspace(lo, self.cutoff, n_points)
        Ns = np.searchsorted(self.values, xs, side="right").astype(float)
        A = float(np.dot(Ns, xs) / np.dot(xs, xs))
        K = float(np.max(np.abs(Ns - A * xs) / xs ** theta))
        return WellBehavedCertificate(A, theta, K)

    def residual_exponent(self, A: float, n_windows: int = 16) -> float:
        """Log-log slope of the windowed maximum of ``|N(x) - A x|``."""
        lo = max(2.0, self.cutoff / 1000.0)
        edges = np.geomspace(lo, self.cutoff, n_windows + 1)
        mids, peaks = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            i0 = np.searchsorted(self.values, a, side="left")
            i1 = np.searchsorted(self.values, b, side="right")
            if i1 <= i0:
                continue
            v = self.values[i0:i1]
            # N jumps at each entry: check just before and at each value
            N_at = np.arange(i0 + 1, i1 + 1, dtype=float)
            dev = np.maximum(np.abs(N_at - A * v), np.abs(N_at - 1 - A * v))
            mids.append(math.sqrt(a * b))
            peaks.append(float(dev.max()))
        slope = np.polyfit(np.log(mids), np.log(np.maximum(peaks, 1e-300)), 1)[0]
        return float(slope)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# beurling-lab v1\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["value", "mu", "d", "Lambda"])
        for v, m, dd, lam in zip(self.values, self.mu, self.d, self.Lambda):
            w.writerow([repr(float(v)), int(m), int(dd), repr(float(lam))])
        return buf.getvalue()


def enumerate_integers(primes: PrimeSequence, x_max: float,
                       max_items: int = DEFAULT_MAX_ITEMS,
                       tie_bits: int = 256) -> IntegerStream:
    """All generalized integers ``<= x_max`` in nondecreasing order.

    Each integer is generated exactly once as ``parent * p_i`` where ``p_i``
    is its largest prime index, so the frontier only ever multiplies by
    primes with index at least that of the last factor.
    """
    if x_max < 1:
        raise DomainError(f"x_max must be >= 1, got {x_max}")
    if len(primes) == 0:
        raise DomainError("prime sequence is empty")
    ps = primes.primes
    P = len(ps)
    heap: list = [(1.0, (), -1, -1)]
    values: list[float] = []
    parent: list[int] = []
    lastp: list[int] = []
    keys: list[tuple] = []
    while heap:
        v, key, par, pi = heapq.heappop(heap)
        idx = len(values)
        if idx >= max_items:
            raise ResourceError(
                f"more than max_items={max_items} integers below x_max={x_max}; "
                "raise the memory budget or lower the cutoff")
        values.append(v)
        parent.append(par)
        lastp.append(pi)
        keys.append(key)
        for i in range(max(pi, 0), P):
            nv = v * ps[i]
            if nv > x_max:
                break
            heapq.heappush(heap, (nv, key + (i,), idx, i))

    order = _stabilize_ties(values, keys, ps, tie_bits)
    return _build_stream(primes, x_max, values, parent, lastp, order)


def _stabilize_ties(values: list[float], keys: list[tuple], ps: Sequence[float],
                    bits: int) -> np.ndarray | None:
    """Re-sort clusters of nearly equal values by extended-precision value.

    Members of a cluster are also replaced, in place, by the correctly
    rounded product, so equal products get equal floats and the sorted
    floats stay nondecreasing.  Returns a permutation, or None if the float
    order is already final.
    """
    vals = np.asarray(values)
    if len(vals) < 2:
        return None
    close = np.diff(vals) <= TIE_RELATIVE_GAP * vals[1:]
    if not close.any():
        return None
    order = np.arange(len(vals))
    changed = False
    n = len(vals)
    starts = np.flatnonzero(close)
    visited_to = -1
    with mpmath.workprec(bits):
        for s in starts:
            if s <= visited_to:
                continue
            e = s + 1
            while e < n - 1 and close[e]:
                e += 1
            visited_to = e
            cluster = list(range(s, e + 1))

            def hp(k):
                out = mpmath.mpf(1)
                for j in keys[k]:
                    out *= mpmath.mpf(ps[j])
                return out

            exact = {k: hp(k) for k in cluster}
            for k in cluster:
                values[k] = float(exact[k])
            ranked = sorted(cluster, key=lambda k: (exact[k], keys[k]))
            if ranked != cluster:
                order[s:e + 1] = ranked
                changed = True
    return order if changed else None


def _build_stream(primes: PrimeSequence, x_max: float, values: list[float],
                  parent: list[int], lastp: list[int],
                  order: np.ndarray | None) -> IntegerStream:
    vals = np.asarray(values, dtype=float)
    par = np.asarray(parent, dtype=np.int64)
    lp = np.asarray(lastp, dtype=np.int64)
    if order is not None:
        inv = np.empty_like(order)
        inv[order] = np.arange(len(order))
        vals = vals[order]
        par = par[order]
        par = np.where(par >= 0, inv[np.maximum(par, 0)], -1)
        lp = lp[order]
    n = len(vals)
    le = np.zeros(n, dtype=np.int64)
    mu = np.zeros(n, dtype=np.int64)
    d = np.zeros(n, dtype=np.int64)
    om = np.zeros(n, dtype=np.int64)
    # parents always precede children once sorted (primes exceed 1)
    par_l = par.tolist()
    lp_l = lp.tolist()
    le_l = [0] * n
    mu_l = [0] * n
    d_l = [0] * n
    om_l = [0] * n
    for k in range(n):
        q = par_l[k]
        if q < 0:
            mu_l[k], d_l[k] = 1, 1
            continue
        if lp_l[q] == lp_l[k]:
            e = le_l[q] + 1
            le_l[k] = e
            mu_l[k] = 0
            d_l[k] = d_l[q] // e * (e + 1)
            om_l[k] = om_l[q]
        else:
            le_l[k] = 1
            mu_l[k] = -mu_l[q]
            d_l[k] = 2 * d_l[q]
            om_l[k] = om_l[q] + 1
    le[:] = le_l
    mu[:] = mu_l
    d[:] = d_l
    om[:] = om_l
    return IntegerStream(primes, x_max, vals, par, lp, le, mu, d, om)


def classical_stream(x_max: float, max_items: int = DEFAULT_MAX_ITEMS) -> IntegerStream:
    """The ordinary integers ``1..x_max`` as a Beurling stream."""
    # there are floor(x_max) of them, so the budget is checked before sieving
    if math.floor(x_max) > max_items:
        raise ResourceError(f"{math.floor(x_max)} integers exceed max_items={max_items}")
    return enumerate_integers(rational_primes(x_max), x_max, max_items=max_items)
