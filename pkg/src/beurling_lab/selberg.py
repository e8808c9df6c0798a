"""Beurling-Selberg majorants and mean-value estimates for Dirichlet polynomials.

The majorant ``B`` is evaluated from Vaaler's series

    B(x) = sum_{n>=0} sinc^2(x - n) - sum_{n>=1} sinc^2(x + n) + 2 x sinc^2(x)

truncated after ``M`` terms.  Both tails are sums of ``sin^2(pi x)/pi^2 /
(n -+ x)^2`` and are bounded by Euler-Maclaurin with a completely monotone
summand, so the returned value is a rigorous upper bound on the true ``B``
(the positive tail is bounded above, the negative one below).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import digamma, polygamma

from .errors import DomainError, PrecisionError, UsageError
from .systems import IntegerStream

DEFAULT_TERMS = 256
CSV_HEADER = "# beurling-lab v1"

_GL16 = np.polynomial.legendre.leggauss(16)
_GL8 = np.polynomial.legendre.leggauss(8)
_CHUNK = 4096


# ---------------------------------------------------------------------------
# Domain types

@dataclass
class DirichletPolynomial:
    """``S(s) = sum_k a_k n_k^{-s}`` over real frequencies ``n_k >= 1``.

    ``keys`` optionally carries the factorization (sorted prime-index tuple)
    of each frequency so that equal-valued integers stay distinguishable.
    """

    freqs: np.ndarray
    coeffs: np.ndarray
    N_max: float | None = None
    keys: tuple | None = None

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=float).reshape(-1)
        self.coeffs = np.asarray(self.coeffs, dtype=complex).reshape(-1)
        if self.freqs.shape != self.coeffs.shape:
            raise DomainError("frequencies and coefficients differ in length")
        if self.freqs.size and (self.freqs[0] < 1.0 or np.any(np.diff(self.freqs) < 0)):
            raise DomainError("frequencies must be >= 1 and nondecreasing")
        top = float(self.freqs[-1]) if self.freqs.size else 1.0
        if self.N_max is None:
            self.N_max = top
        elif self.N_max < top:
            raise DomainError(f"N_max={self.N_max} is below the largest frequency {top}")
        self.N_max = float(self.N_max)
        if self.keys is not None and len(self.keys) != self.freqs.size:
            raise DomainError("keys must match the number of terms")

    @classmethod
    def from_terms(cls, terms: Sequence[tuple[float, complex]], N_max: float | None = None
                   ) -> "DirichletPolynomial":
        terms = sorted(terms, key=lambda t: t[0])
        return cls(np.array([t[0] for t in terms], dtype=float),
                   np.array([t[1] for t in terms], dtype=complex), N_max)

    def __len__(self) -> int:
        return self.freqs.size

    @property
    def terms(self) -> list[tuple[float, complex]]:
        return list(zip(self.freqs.tolist(), self.coeffs.tolist()))

    def __call__(self, s):
        """Evaluate at complex ``s`` (scalar or array)."""
        s_arr = np.asarray(s, dtype=complex)
        flat = s_arr.reshape(-1)
        logs = np.log(self.freqs)
        out = np.empty(flat.size, dtype=complex)
        for i in range(0, flat.size, _CHUNK):
            blk = flat[i:i + _CHUNK]
            out[i:i + _CHUNK] = np.exp(-np.outer(blk, logs)) @ self.coeffs
        out = out.reshape(s_arr.shape)
        return complex(out) if s_arr.ndim == 0 else out

    def at_height(self, t):
        """``S(t) = sum a_k n_k^{-it}``."""
        return self(1j * np.asarray(t, dtype=float))

    def l2_mass(self) -> float:
        return float(np.sum(np.abs(self.coeffs) ** 2))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(CSV_HEADER + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n_k", "re_a", "im_a"])
        for n, a in zip(self.freqs, self.coeffs):
            w.writerow([repr(float(n)), repr(float(a.real)), repr(float(a.imag))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, N_max: float | None = None) -> "DirichletPolynomial":
        rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
        if rows and rows[0][0] == "n_k":
            rows = rows[1:]
        return cls(np.array([float(r[0]) for r in rows]),
                   np.array([complex(float(r[1]), float(r[2])) for r in rows]), N_max)

    @classmethod
    def from_file(cls, path: str | Path) -> "DirichletPolynomial":
        return cls.from_csv(Path(path).read_text())


@dataclass(frozen=True)
class MajorantWindow:
    T0: float
    T: float
    eta: float
    delta: float = 1.0

    def __post_init__(self):
        for name in ("T", "eta", "delta"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise DomainError(f"{name} must be positive and finite, got {v}")


@dataclass
class WellSpacedSet:
    points: np.ndarray
    delta: float
    window: MajorantWindow | None = None

    def __post_init__(self):
        self.points = np.sort(np.asarray(self.points, dtype=float))
        if self.points.size > 1 and np.min(np.diff(self.points)) < self.delta * (1 - 1e-12):
            raise DomainError("points are not delta-well-spaced")
        w = self.window
        if w is not None and self.points.size:
            lo, hi = w.T0 + w.delta / 2, w.T0 + w.T - w.delta / 2
            if self.points[0] < lo - 1e-12 or self.points[-1] > hi + 1e-12:
                raise DomainError("points leave [T0 + delta/2, T0 + T - delta/2]")

    def __len__(self) -> int:
        return self.points.size


# ---------------------------------------------------------------------------
# Vaaler's function

def _em_tail(y: np.ndarray, upper: bool) -> np.ndarray:
    """Bound ``sum_{j>=0} (y + j)^-2`` for ``y > 0`` from above or below."""
    inv = 1.0 / y
    val = inv + 0.5 * inv ** 2 + inv ** 3 / 6.0
    if not upper:
        val = val - inv ** 5 / 30.0
    return val


def beurling_selberg_B(x, terms: int = DEFAULT_TERMS):
    """Certified upper bound for Vaaler's majorant of ``sgn`` at ``x``."""
    if terms < 8:
        raise DomainError("terms must be >= 8")
    xa = np.asarray(x, dtype=float)
    flat = xa.reshape(-1)
    out = np.empty(flat.size)
    for i in range(0, flat.size, _CHUNK):
        out[i:i + _CHUNK] = _vaaler_block(flat[i:i + _CHUNK], terms)
    out = out.reshape(xa.shape)
    return float(out) if xa.ndim == 0 else out


def _vaaler_block(x: np.ndarray, terms: int) -> np.ndarray:
    if x.size == 0:
        return x.copy()
    M = max(terms, int(math.ceil(float(np.max(np.abs(x))))) + terms)
    n = np.arange(0, M + 1, dtype=float)
    xc = x[:, None]
    pos = np.sum(np.sinc(xc - n[None, :]) ** 2, axis=1)
    neg = np.sum(np.sinc(xc + n[None, 1:]) ** 2, axis=1)
    s = np.sin(np.pi * x) ** 2 / np.pi ** 2
    a = M + 1.0
    tail = _em_tail(a - x, upper=True) - _em_tail(a + x, upper=False)
    return pos - neg + 2.0 * x * np.sinc(x) ** 2 + s * tail


def _B_minus_sgn_tails(u: float) -> tuple[float, float]:
    """Integrals of ``B - sgn`` over ``(u, inf)`` and ``(-inf, -u)`` for ``u >= 1``.

    For ``x > 0`` one has ``B(x) - 1 = 2 s(x) (1/x - psi'(1 + x))`` and
    ``B(-x) + 1 = 2 s(x) (1/x^2 - 1/x + psi'(1 + x))`` with
    ``s = sin^2(pi x) / pi^2``.  Writing ``2 s = (1 - cos 2 pi x) / pi^2``, the
    non-oscillating parts integrate to digamma values and the oscillating
    parts are replaced by their first boundary term; the remainder is of
    order ``u^-3``.
    """
    f = 1.0 / u - float(polygamma(1, 1.0 + u))
    g = 1.0 / (u * u) - f
    osc = math.sin(2 * math.pi * u) / (2 * math.pi ** 3)
    right = (float(digamma(1.0 + u)) - math.log(u)) / math.pi ** 2 + osc * f
    left = (math.log(u) - float(digamma(u))) / math.pi ** 2 + osc * g
    return right, left


def _panel_nodes(a: float, b: float, n_panels: int, rule=_GL16):
    x, w = rule
    edges = np.linspace(a, b, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).reshape(-1)
    weights = (half[:, None] * w[None, :]).reshape(-1)
    return nodes, weights


def B_sgn_integral(R: int = 50, terms: int = DEFAULT_TERMS, with_tails: bool = True) -> float:
    """``int (B - sgn)`` over ``[-R, R]`` plus, optionally, the analytic tails."""
    R = int(R)
    if R < 1:
        raise DomainError("R must be a positive integer")
    nodes, weights = _panel_nodes(-R, R, 2 * R * 2)
    vals = beurling_selberg_B(nodes, terms) - np.sign(nodes)
    total = math.fsum(vals * weights)
    if with_tails:
        total += sum(_B_minus_sgn_tails(R))
    return total


# ---------------------------------------------------------------------------
# The window majorant

def majorant_F(x, w: MajorantWindow, terms: int = DEFAULT_TERMS):
    """``F(x) = (B(eta (x - T0)) + B(eta (T0 + T - x))) / 2``."""
    xa = np.asarray(x, dtype=float)
    val = 0.5 * (beurling_selberg_B(w.eta * (xa - w.T0), terms)
                 + beurling_selberg_B(w.eta * (w.T0 + w.T - xa), terms))
    return float(val) if xa.ndim == 0 else val


def majorant_integral(w: MajorantWindow, R: int = 50, terms: int = DEFAULT_TERMS) -> float:
    """Quadrature of ``int F`` over the real line.

    The window ``[T0 - R/eta, T0 + T + R/eta]`` is integrated numerically in
    the scaled variable; the two outer tails are added in closed form.
    """
    R = int(R)
    tau = w.eta * w.T
    n_panels = int(math.ceil(2 * (tau + 2 * R)))
    y, wt = _panel_nodes(-R, tau + R, n_panels)
    vals = 0.5 * (beurling_selberg_B(y, terms) + beurling_selberg_B(tau - y, terms))
    inner = math.fsum(vals * wt)
    # Outside the window the constants 1/2 sgn(y) + 1/2 sgn(tau - y) cancel,
    # leaving one (B - sgn) tail of each argument on either side.
    right_far, _ = _B_minus_sgn_tails(tau + R)
    _, left_near = _B_minus_sgn_tails(R)
    tails = left_near + right_far
    return (inner + tails) / w.eta


def majorant_transform(w: MajorantWindow, xi, R: int = 400, terms: int = DEFAULT_TERMS,
                       panels_per_unit: int = 2) -> np.ndarray:
    """Numerical Fourier transform ``int F(x) e^{-i xi x} dx`` over a truncated window."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    tau = w.eta * w.T
    n_panels = int(math.ceil(panels_per_unit * (tau + 2 * R)))
    y, wt = _panel_nodes(-R, tau + R, n_panels, np.polynomial.legendre.leggauss(24))
    vals = 0.5 * (beurling_selberg_B(y, terms) + beurling_selberg_B(tau - y, terms)) * wt
    k = xi / w.eta
    phase = np.exp(-1j * np.outer(k, y))
    return np.exp(-1j * xi * w.T0) * (phase @ vals) / w.eta


# ---------------------------------------------------------------------------
# Mean-value quantities

def required_quad_points(S: DirichletPolynomial, w: MajorantWindow) -> int:
    """Points needed to put 8 nodes in every period of the fastest phase."""
    omega = math.log(S.N_max) if S.N_max > 1 else 0.0
    return max(16, int(math.ceil(8 * w.T * omega / (2 * math.pi))))


def _abs2_on(S: DirichletPolynomial, t: np.ndarray) -> np.ndarray:
    return np.abs(S.at_height(t)) ** 2


def mvt_lhs(S: DirichletPolynomial, w: MajorantWindow, quad_points: int | None = None
            ) -> tuple[float, float]:
    """``int_{T0}^{T0+T} |S(t)|^2 dt`` and an error estimate.

    Panels carry a 16-point Gauss-Legendre rule; the 8-point rule on the same
    panels gives the error estimate.  Panel width never exceeds
    ``2 pi / log N_max``.
    """
    need = required_quad_points(S, w)
    if quad_points is None:
        quad_points = 2 * need
    if quad_points < need:
        raise PrecisionError(
            f"quad_points={quad_points} under-resolves the phase log(N_max)={math.log(S.N_max):.4g}; "
            f"use at least {need}")
    omega = math.log(S.N_max) if S.N_max > 1 else 1.0
    n_panels = max(int(math.ceil(quad_points / 16)),
                   int(math.ceil(w.T * omega / (2 * math.pi))), 1)
    a, b = w.T0, w.T0 + w.T
    t16, w16 = _panel_nodes(a, b, n_panels, _GL16)
    t8, w8 = _panel_nodes(a, b, n_panels, _GL8)
    v16 = math.fsum(_abs2_on(S, t16) * w16)
    v8 = math.fsum(_abs2_on(S, t8) * w8)
    return v16, abs(v16 - v8)


def mvt_lhs_exact(S: DirichletPolynomial, w: MajorantWindow) -> float:
    """Closed form of :func:`mvt_lhs` via ``sum a_k conj(a_l) int (n_l/n_k)^{it}``."""
    L = np.log(S.freqs)
    d = L[None, :] - L[:, None]
    a, b = w.T0, w.T0 + w.T
    with np.errstate(invalid="ignore", divide="ignore"):
        ker = np.where(np.abs(d) < 1e-300, w.T + 0j,
                       (np.exp(1j * d * b) - np.exp(1j * d * a)) / (1j * np.where(d == 0, 1, d)))
    c = S.coeffs
    return float(np.real(c @ ker @ np.conj(c)))


def _chi_sum(S: DirichletPolynomial, w: MajorantWindow, stream: IntegerStream | None) -> float:
    lam = w.eta * S.N_max
    weights = np.abs(S.coeffs) ** 2
    if stream is None:
        lo = np.searchsorted(S.freqs, S.freqs - lam, side="left")
        hi = np.searchsorted(S.freqs, S.freqs + lam, side="right")
        return float(np.dot(hi - lo, weights))
    for n in S.freqs:
        stream.index_of(float(n))
    if S.freqs.size and S.freqs.max() + lam > stream.cutoff:
        raise DomainError(
            f"chi window reaches {S.freqs.max() + lam:.6g}, beyond stream cutoff {stream.cutoff:.6g}")
    return float(np.dot(stream.chi_many(S.freqs, lam), weights))


def mvt_rhs(S: DirichletPolynomial, w: MajorantWindow, stream: IntegerStream | None = None) -> float:
    """``(T + 1/eta) sum chi(n_k, eta N) |a_k|^2``.

    With ``stream=None`` the counting function is taken over the frequencies
    of ``S`` itself, which is the right notion for polynomials whose support
    is not a full integer system.
    """
    return (w.T + 1.0 / w.eta) * _chi_sum(S, w, stream)


def discrete_factor(N: float, delta: float) -> float:
    return math.log(N) + 1.0 / delta


def discrete_mvt_rhs(S: DirichletPolynomial, w: MajorantWindow,
                     stream: IntegerStream | None = None) -> float:
    return mvt_rhs(S, w, stream) * discrete_factor(S.N_max, w.delta)


def large_values_cap(S: DirichletPolynomial, w: MajorantWindow, stream: IntegerStream | None,
                     V: float) -> float:
    if not V > 0:
        raise DomainError("V must be positive")
    return discrete_mvt_rhs(S, w, stream) / (V * V)


def discrete_sum(S: DirichletPolynomial, pts: WellSpacedSet) -> float:
    return math.fsum(_abs2_on(S, pts.points))


def random_well_spaced(w: MajorantWindow, rng: np.random.Generator, fill: float = 0.5
                       ) -> WellSpacedSet:
    """Random delta-well-spaced subset of the admissible window.

    Each slot of a delta-grid is kept with probability ``fill`` and jittered
    inside its slot while keeping gaps of at least ``delta``.
    """
    lo, hi = w.T0 + w.delta / 2, w.T0 + w.T - w.delta / 2
    if hi < lo:
        return WellSpacedSet(np.empty(0), w.delta, w)
    n = int(math.floor((hi - lo) / w.delta)) + 1
    base = lo + w.delta * np.arange(n)
    slack = (hi - lo) - w.delta * (n - 1)
    shift = rng.uniform(0.0, slack) if slack > 0 else 0.0
    pts = base[rng.random(n) < fill] + shift
    return WellSpacedSet(pts, w.delta, w)


def well_spaced_large_values(S: DirichletPolynomial, w: MajorantWindow, V: float,
                             grid_step: float | None = None) -> WellSpacedSet:
    """Greedy left-to-right selection of well-spaced points with ``|S(t)| >= V``."""
    if not V > 0:
        raise DomainError("V must be positive")
    lo, hi = w.T0 + w.delta / 2, w.T0 + w.T - w.delta / 2
    if hi < lo:
        return WellSpacedSet(np.empty(0), w.delta, w)
    if grid_step is None:
        omega = math.log(S.N_max) if S.N_max > 1 else 1.0
        grid_step = min(w.delta / 4, 2 * math.pi / omega / 16)
    t = np.arange(lo, hi + 0.5 * grid_step, grid_step)
    t = t[t <= hi]
    big = t[np.abs(S.at_height(t)) >= V]
    chosen = []
    last = -math.inf
    for x in big:
        if x - last >= w.delta:
            chosen.append(x)
            last = x
    return WellSpacedSet(np.array(chosen), w.delta, w)


@dataclass
class MVTSample:
    seed: int
    family: str
    lhs: float
    rhs: float
    lv_count: int = 0
    lv_cap: float = math.inf

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs


@dataclass
class MVTSummary:
    samples: list[MVTSample] = field(default_factory=list)

    def constant(self) -> float:
        return max(s.ratio for s in self.samples)

    def large_values_constant(self) -> float:
        return max((s.lv_count / s.lv_cap for s in self.samples if s.lv_cap > 0), default=0.0)

    def family_constants(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for s in self.samples:
            out[s.family] = max(out.get(s.family, 0.0), s.ratio)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(CSV_HEADER + "\n")
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["seed", "family", "lhs", "rhs", "ratio", "large_values", "large_values_cap"])
        for s in self.samples:
            wr.writerow([s.seed, s.family, repr(s.lhs), repr(s.rhs), repr(s.ratio), s.lv_count,
                         repr(s.lv_cap)])
        return buf.getvalue()


def random_polynomial(stream: IntegerStream, n_terms: int, rng: np.random.Generator,
                      n_lo: float = 1.0, n_hi: float | None = None) -> DirichletPolynomial:
    """Random complex-Gaussian coefficients on distinct stream members in ``[n_lo, n_hi]``."""
    vals = stream.values
    hi = stream.cutoff if n_hi is None else n_hi
    pool = np.flatnonzero((vals >= n_lo) & (vals <= hi))
    if pool.size < n_terms:
        raise UsageError(f"only {pool.size} integers available in [{n_lo}, {hi}]")
    idx = np.sort(rng.choice(pool, size=n_terms, replace=False))
    coeffs = rng.standard_normal(n_terms) + 1j * rng.standard_normal(n_terms)
    return DirichletPolynomial(vals[idx], coeffs, N_max=float(vals[idx[-1]]))
