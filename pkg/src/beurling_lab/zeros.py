"""Locating and counting zeros of continuous zeta functions.

Counts come from the argument principle applied to the entire function
``f(s) = (s - 1) zeta_C(s) = s * prod_k G(l_k(s - rho_k)) G(l_k(s - conj rho_k))``,
which has the same zeros as ``zeta_C`` in ``Re s > 0`` and no pole.  The
phase of ``f`` is followed along the boundary with segments halved until
every phase step is below ``pi/2``.

Zeros are also known in closed form: the factor for ``rho_k`` vanishes at
``rho_k + z/l_k`` for ``z = 0`` and every zero ``z_j`` (and ``conj z_j``) of
``G``.  Both lists are compared box by box.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from . import bounds
from .continuous import (CSV_HEADER, ContinuousSystem, G_eval, G_log, G_logderiv, G_zero_seed,
                         G_zeros, psi_C)
from .errors import ConsistencyError, DomainError, GeometryError

#: distance kept from the abscissa 1/2, where the product representation degrades
MARGIN = 0.05
#: offset used to make edges through a zero count that zero (inclusive bounds)
EDGE_SHIFT = 1e-6
#: zeros closer than this are merged into one record with summed multiplicity
MERGE_DIST = 1e-8


@dataclass(frozen=True)
class BoxQuery:
    """Rectangle ``[alpha, 1] x [T1, T2]``, mirrored to ``[-T2, -T1]`` if asked."""

    alpha: float
    T1: float
    T2: float
    include_conjugates: bool = True

    def __post_init__(self):
        if not 0.5 < self.alpha <= 1:
            raise DomainError(f"alpha = {self.alpha} must lie in (1/2, 1]")
        if not 0 <= self.T1 < self.T2:
            raise DomainError(f"need 0 <= T1 < T2, got T1={self.T1}, T2={self.T2}")

    def contains(self, s: complex, tol: float = 0.0) -> bool:
        t = abs(s.imag) if self.include_conjugates else s.imag
        return s.real >= self.alpha - tol and self.T1 - tol <= t <= self.T2 + tol


@dataclass
class ZeroRecord:
    rho: complex
    multiplicity: int = 1
    residual: float = 0.0
    source: str = "known_param"

    @property
    def beta(self) -> float:
        return self.rho.real

    @property
    def gamma(self) -> float:
        return self.rho.imag


def zeros_to_csv(records: Iterable[ZeroRecord]) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["beta", "gamma", "multiplicity", "residual", "source"])
    for r in records:
        w.writerow([repr(r.beta), repr(r.gamma), r.multiplicity, repr(r.residual), r.source])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# The entire function and the argument principle

def _factor_matrix(system: ContinuousSystem, s: np.ndarray) -> np.ndarray:
    l = np.asarray(system.ells)[:, None]
    rho = (np.asarray(system.betas) + 1j * np.asarray(system.gammas))[:, None]
    return np.concatenate([l * (s[None, :] - rho), l * (s[None, :] - np.conj(rho))])


def entire_f(system: ContinuousSystem, s):
    """``(s - 1) zeta_C(s)``, vectorized over ``s``."""
    s_arr = np.atleast_1d(np.asarray(s, dtype=complex))
    out = s_arr.copy()
    if len(system):
        z = _factor_matrix(system, s_arr)
        if np.all(z.real > -20):
            out = out * np.prod(G_eval(z), axis=0)
        else:
            out = out * np.exp(np.sum(G_log(z), axis=0))
    return complex(out[0]) if np.ndim(s) == 0 else out


def entire_f_logderiv(system: ContinuousSystem, s: complex) -> complex:
    s = complex(s)
    tot = 1 / s
    for l, b, g in zip(system.ells, system.betas, system.gammas):
        tot += l * (complex(G_logderiv(l * (s - complex(b, g)))) + complex(G_logderiv(l * (s - complex(b, -g)))))
    return tot


def winding_count(f: Callable[[np.ndarray], np.ndarray], box: Sequence[float], *,
                  init_step: float = 0.0625, min_rel_modulus: float = 1e-10,
                  min_seg: float = 1e-13, max_points: int = 1 << 20) -> int:
    """Number of zeros (with multiplicity) of ``f`` in ``[a, b] x [c, d]``.

    ``f`` must accept an array of complex points.  The boundary is walked
    counterclockwise and every segment is halved until the phase step
    across it is below ``pi/2``.  A boundary modulus below
    ``min_rel_modulus`` times the median, or a segment shrinking below
    ``min_seg``, signals a zero on (or extremely near) the boundary and
    raises :class:`GeometryError`.
    """
    a, b, c, d = (float(v) for v in box)
    if not (a < b and c < d):
        raise DomainError(f"degenerate box {box}")
    corners = [complex(a, c), complex(b, c), complex(b, d), complex(a, d)]
    params, starts, vecs = [], [], []
    for i in range(4):
        z0, z1 = corners[i], corners[(i + 1) % 4]
        n = max(8, int(math.ceil(abs(z1 - z0) / init_step)))
        params.append(np.linspace(0.0, 1.0, n + 1))
        starts.append(z0)
        vecs.append(z1 - z0)

    def points(i, t):
        return starts[i] + vecs[i] * t

    def checked(pts: np.ndarray) -> np.ndarray:
        v = np.asarray(f(pts), dtype=complex)
        hit = np.flatnonzero(v == 0)
        if hit.size:
            raise GeometryError(f"f vanishes at s = {pts[hit[0]]:.12g} on the boundary; perturb the box")
        return v

    vals = []
    allp = np.concatenate([points(i, params[i]) for i in range(4)])
    allv = checked(allp)
    off = 0
    for i in range(4):
        vals.append(allv[off:off + params[i].size])
        off += params[i].size

    while True:
        bad = []
        for i in range(4):
            dphi = np.angle(vals[i][1:] / vals[i][:-1])
            bad.append(np.flatnonzero(~(np.abs(dphi) < 0.5 * math.pi)))
        if all(bb.size == 0 for bb in bad):
            break
        mids = []
        for i in range(4):
            p = params[i]
            seg = p[bad[i] + 1] - p[bad[i]]
            if seg.size and seg.min() * abs(vecs[i]) < min_seg:
                j = int(bad[i][np.argmin(seg)])
                raise GeometryError(
                    f"phase does not settle near s = {points(i, p[j]):.12g}; "
                    "a zero is on the boundary, perturb the box")
            mids.append(0.5 * (p[bad[i]] + p[bad[i] + 1]))
        newp = np.concatenate([points(i, mids[i]) for i in range(4)])
        newv = checked(newp)
        off = 0
        for i in range(4):
            k = mids[i].size
            if k:
                pos = bad[i] + 1
                params[i] = np.insert(params[i], pos, mids[i])
                vals[i] = np.insert(vals[i], pos, newv[off:off + k])
            off += k
        if sum(p.size for p in params) > max_points:
            raise GeometryError(f"boundary refinement exceeded {max_points} points")

    mods = np.abs(np.concatenate(vals))
    if not np.all(np.isfinite(mods)):
        raise GeometryError("f is not finite on the boundary")
    scale = float(np.median(mods))
    if mods.min() < min_rel_modulus * scale:
        i_min = int(np.argmin(mods))
        allp = np.concatenate([points(i, params[i]) for i in range(4)])
        raise GeometryError(f"|f| = {mods.min():.3e} at s = {allp[i_min]:.12g} suggests a boundary zero; "
                            "perturb the box")
    total = sum(float(np.sum(np.angle(v[1:] / v[:-1]))) for v in vals) / (2 * math.pi)
    n = int(round(total))
    if abs(total - n) > 1e-6:
        raise GeometryError(f"winding {total:.6f} is not close to an integer")
    return n


def system_winding(system: ContinuousSystem, box: Sequence[float], **kw) -> int:
    a = float(box[0])
    if a < 0.5 + MARGIN:
        raise DomainError(f"left edge {a} is within the margin {MARGIN} of Re s = 1/2")
    return winding_count(lambda s: entire_f(system, s), box, **kw)


# ---------------------------------------------------------------------------
# Zeros from the parameters

def _newton_on_f(system: ContinuousSystem, s: complex, iters: int = 8) -> complex:
    for _ in range(iters):
        with np.errstate(divide="ignore", invalid="ignore"):
            L = entire_f_logderiv(system, s)
        if not np.isfinite(L) or L == 0:
            break
        step = 1 / L
        s = s - step
        if abs(step) < 1e-15 * max(1.0, abs(s)):
            break
    return s


def _g_zero_count(depth: float) -> int:
    """Number of ``z_j`` with ``Re z_j >= -depth`` (seeds are accurate to O(1/j))."""
    if depth <= 0:
        return 0
    j = max(int(math.exp(2 * depth) / math.pi) + 2, 1)
    while j > 1 and G_zero_seed(j).real < -depth - 0.1:
        j -= 1
    return j


def known_zeros(system: ContinuousSystem, box: BoxQuery) -> list[ZeroRecord]:
    """Zeros of ``zeta_C`` in the box, from the parameters, Newton-refined on ``zeta_C``."""
    if box.alpha < 0.5 + MARGIN:
        raise DomainError(f"alpha = {box.alpha} is within the margin {MARGIN} of Re s = 1/2")
    cands: list[complex] = []
    for l, b, g in zip(system.ells, system.betas, system.gammas):
        if b < box.alpha:
            continue
        J = _g_zero_count(l * (b - box.alpha))
        zs = [0j]
        if J:
            for zj in G_zeros(J):
                zs.extend([zj, zj.conjugate()])
        for rho in (complex(b, g), complex(b, -g)):
            for z in zs:
                s = rho + z / l
                if box.contains(s, 0.1 * EDGE_SHIFT):
                    cands.append(s)
    recs: list[ZeroRecord] = []
    for s in sorted(cands, key=lambda v: (v.imag, v.real)):
        s = _newton_on_f(system, s)
        if recs and abs(recs[-1].rho - s) < MERGE_DIST:
            recs[-1].multiplicity += 1
            continue
        recs.append(ZeroRecord(s, 1, 0.0, "known_param"))
    for r in recs:
        r.residual = float(abs(entire_f(system, r.rho)) / abs(r.rho - 1))
    return [r for r in recs if box.contains(r.rho, 0.1 * EDGE_SHIFT)]


def known_count(system: ContinuousSystem, box: BoxQuery) -> int:
    return sum(r.multiplicity for r in known_zeros(system, box))


def box_winding(system: ContinuousSystem, box: BoxQuery, **kw) -> int:
    """Winding count over the region of a :class:`BoxQuery`, edges made inclusive."""
    a = box.alpha - EDGE_SHIFT
    lo = box.T1 - EDGE_SHIFT if box.T1 > 0 else 0.0
    hi = box.T2 + EDGE_SHIFT
    n = system_winding(system, (a, 1.0, lo, hi), **kw) if box.alpha < 1 else 0
    if box.include_conjugates:
        # real coefficients: the mirrored box holds the conjugate zeros
        n *= 2
    return n


# ---------------------------------------------------------------------------
# N(alpha, T)

@dataclass
class StripCounts:
    alpha: float
    cuts: np.ndarray
    counts: np.ndarray

    @property
    def total(self) -> int:
        """Zeros with ``beta >= alpha`` and ``|gamma| <= T`` (both half planes)."""
        return 2 * int(self.counts.sum())


def strip_counts(system: ContinuousSystem, alpha: float, T: float, height: float = 1.0,
                 offset: float = 0.0137, **kw) -> StripCounts:
    """Winding counts on strips ``[alpha, 1] x [t_n, t_{n+1}]`` covering ``[0, T]``.

    The interior cuts sit at ``n * height + offset`` and are moved when a
    zero lies on one.  The real axis carries no zeros (``f > 0`` there), so
    the bottom edge is safe.
    """
    if alpha < 0.5 + MARGIN:
        raise DomainError(f"alpha = {alpha} is within the margin {MARGIN} of Re s = 1/2")
    if T <= 0:
        raise DomainError("T must be positive")
    if alpha >= 1:
        return StripCounts(alpha, np.array([0.0, T]), np.zeros(1, dtype=np.int64))
    a = alpha - EDGE_SHIFT
    top = T + EDGE_SHIFT
    cuts = [0.0]
    t = offset + height
    while t < top - 0.25 * height:
        cuts.append(t)
        t += height
    cuts.append(top)
    cuts = np.array(cuts)
    counts = []
    i = 0
    while i < len(cuts) - 1:
        try:
            counts.append(system_winding(system, (a, 1.0, cuts[i], cuts[i + 1]), **kw))
            i += 1
        except GeometryError:
            if i + 1 == len(cuts) - 1:
                raise
            # move the upper cut and recount
            cuts[i + 1] += 0.0731 * height
    return StripCounts(alpha, cuts, np.array(counts, dtype=np.int64))


def N_alpha_T(system: ContinuousSystem, alpha: float, T: float, **kw) -> int:
    """``#{rho : beta >= alpha, |gamma| <= T}`` by winding over unit strips."""
    if alpha >= 1:
        return 0
    return strip_counts(system, alpha, T, **kw).total


def predicted_line_count(system: ContinuousSystem, T: float) -> int:
    """``2 #{k : gamma_k <= T}``, the zeros ``rho_k`` and their conjugates."""
    return 2 * sum(1 for g in system.gammas if g <= T)


# ---------------------------------------------------------------------------
# Reports

@dataclass
class DensityRow:
    alpha: float
    T: float
    N: int
    upper: float
    upper_applicable: bool
    lower: float
    upper_ok: bool
    lower_ratio: float


@dataclass
class DensityReport:
    rows: list[DensityRow]
    lower_constants: dict[float, float]

    def passed(self) -> bool:
        ok_up = all(r.upper_ok for r in self.rows if r.upper_applicable)
        ok_lo = all(c > 0 for c in self.lower_constants.values())
        return ok_up and ok_lo

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(CSV_HEADER + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["alpha", "T", "N", "upper_bound", "upper_applicable", "upper_pass",
                    "lower_bound", "lower_ratio", "lower_constant", "lower_pass"])
        for r in self.rows:
            c = self.lower_constants.get(r.alpha, math.nan)
            w.writerow([repr(r.alpha), repr(r.T), r.N, repr(r.upper), int(r.upper_applicable),
                        int(r.upper_ok), repr(r.lower), repr(r.lower_ratio), repr(c),
                        int(not (c <= 0))])
        return buf.getvalue()


def density_report(system: ContinuousSystem, alphas: Sequence[float], Ts: Sequence[float],
                   theta: float | None = None, eps: float | None = None) -> DensityReport:
    """Tabulate ``N(alpha, T)`` against the zero-density bound and the sharpness lower bound.

    The upper bound ``T^((c(mu)+eps)(1-mu)) (log T)^9`` is flagged
    applicable for ``mu >= 2/3``.  For appendix systems the lower bound
    ``T^((1+beta-2 alpha)(1-eps)/(1+beta-2 theta))`` applies when
    ``theta <= alpha <= beta``; the fitted constant for each ``alpha`` is the
    smallest ratio ``N / lower`` over the ``T`` grid.
    """
    p = dict(system.params)
    if theta is None:
        theta = p.get("theta")
    if eps is None:
        eps = p.get("eps", 0.0)
    beta = p.get("beta")
    rows = []
    for alpha in alphas:
        for T in Ts:
            N = N_alpha_T(system, alpha, T) if alpha < 1 else 0
            if theta is not None and alpha > theta:
                mu = bounds.mu_from_alpha(alpha, theta)
                up = bounds.density_upper_bound(alpha, T, theta, eps)
                app = mu >= 2.0 / 3.0
            else:
                up, app = math.inf, False
            if beta is not None and theta is not None and theta <= alpha <= beta:
                _, strip = bounds.appendix_exponents(beta, theta, eps)
                lo = float(T) ** strip(alpha)
            else:
                lo = 0.0
            ratio = N / lo if lo > 0 else math.nan
            rows.append(DensityRow(float(alpha), float(T), N, up, app, lo, N <= up, ratio))
    consts = {}
    for alpha in alphas:
        rs = [r.lower_ratio for r in rows if r.alpha == alpha and not math.isnan(r.lower_ratio)]
        if rs:
            consts[float(alpha)] = min(rs)
    return DensityReport(rows, consts)


@dataclass
class ExplicitFormulaResult:
    x: float
    b: float
    T: float
    psi: float
    main: float
    residual: float
    budget: float
    n_zeros: int

    @property
    def constant(self) -> float:
        return self.residual / self.budget


def explicit_formula_residual(system: ContinuousSystem, x: float, b: float, T: float,
                              check: bool = True) -> ExplicitFormulaResult:
    """``|psi_C(x) - (x - sum_{beta >= b, |gamma| <= T} x^rho / rho)|`` and its budget.

    The zero list comes from :func:`known_zeros`; with ``check`` it is
    compared against a winding count of the same region first.
    """
    theta = dict(system.params).get("theta")
    if not 0.5 < b < 1 or (theta is not None and b <= theta):
        raise DomainError(f"b = {b} must lie in (theta, 1)")
    if not 4 <= T <= x:
        raise DomainError(f"need 4 <= T <= x, got T={T}, x={x}")
    box = BoxQuery(b, 0.0, T, include_conjugates=True)
    zs = known_zeros(system, box)
    n_known = sum(r.multiplicity for r in zs)
    if check:
        n_wind = N_alpha_T(system, b, T)
        if n_wind != n_known:
            raise ConsistencyError(f"winding finds {n_wind} zeros but the parameter list has {n_known}")
    zsum = 0j
    for r in zs:
        zsum += r.multiplicity * x ** r.rho / r.rho
    main = x - zsum.real
    psi = psi_C(system, x)
    budget = (x ** b + x / T) * math.log(x) ** 3
    return ExplicitFormulaResult(float(x), float(b), float(T), psi, main, abs(psi - main), budget, n_known)
