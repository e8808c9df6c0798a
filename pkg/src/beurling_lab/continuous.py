"""Continuous Beurling systems built from the kernel ``G(z) = 1 - (e^-z - e^-2z)/z``.

A system is a finite list of zero parameters ``(l_k, rho_k)``; its zeta
function is

    zeta_C(s) = s/(s-1) * prod_k G(l_k (s - rho_k)) G(l_k (s - conj rho_k)).

Writing ``H(z) = (e^-z - e^-2z)/z = int_1^2 e^{-zw} dw`` one has
``-log G = sum_j H^j / j``, so ``-log G`` is the Laplace transform of

    g(e^w) = sum_{j>=1} f_j(w) / j,

with ``f_j`` the density of a sum of ``j`` independent uniforms on ``[1, 2]``.
On each unit interval ``[m, m+1]`` this is a polynomial of degree ``m - 1``
in ``w`` with rational coefficients, which we build exactly.

The prime-counting measure is then

    dPi(u) = (1 - 1/u)/log u du - 2 sum_k g(u^{1/l_k}) u^{beta_k - 1} cos(gamma_k log u)/l_k du

and every integral against it reduces, after ``u = e^{l w}``, to integrals of
polynomial times exponential over unit pieces, done in closed form.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial
from typing import Callable, Sequence

import mpmath
import numpy as np
from scipy.special import expi

from .errors import DomainError, NumericError, PrecisionError
from .systems import PrimeSequence

CSV_HEADER = "# beurling-lab v1"
DEFAULT_PREC = 256
TAYLOR_RADIUS = 1e-3
EULER_GAMMA = 0.5772156649015329

_GL10 = np.polynomial.legendre.leggauss(10)
_GL32 = np.polynomial.legendre.leggauss(32)


# ---------------------------------------------------------------------------
# The kernel G

def _H_taylor(z):
    # int_1^2 e^{-zw} dw = sum_n (-z)^n (2^{n+1} - 1) / (n+1)!
    out = np.zeros_like(z)
    term = np.ones_like(z)
    for n in range(12):
        out = out + term * (2.0 ** (n + 1) - 1.0) / (n + 1)
        term = term * (-z) / (n + 1)
    return out


def _H(z):
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < TAYLOR_RADIUS
    zs = np.where(small, 1.0, z)
    with np.errstate(over="ignore", invalid="ignore"):
        big = (np.exp(-zs) - np.exp(-2 * zs)) / zs
    return np.where(small, _H_taylor(z), big)


def G_eval(z):
    """``G(z) = 1 - (e^{-z} - e^{-2z})/z`` with a Taylor branch near 0."""
    z_arr = np.asarray(z, dtype=complex)
    small = np.abs(z_arr) < TAYLOR_RADIUS
    # near 0 write G = z * (3/2 - 7 z/6 + ...) to keep relative accuracy
    zz = np.where(small, z_arr, 0.0)
    series = np.zeros_like(zz)
    for n in range(1, 12):
        series = series + (-1.0) ** (n + 1) * (2.0 ** (n + 1) - 1.0) / math.factorial(n + 1) * zz ** (n - 1)
    out = np.where(small, zz * series, 1.0 - _H(np.where(small, 1.0, z_arr)))
    return complex(out) if z_arr.ndim == 0 else out


def G_log(z):
    """A branch of ``log G(z)``, stable when ``Re z`` is very negative."""
    z_arr = np.asarray(z, dtype=complex)
    neg = z_arr.real < -20.0
    zn = np.where(neg, z_arr, -30.0)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        lneg = -2 * zn - np.log(zn) + np.log(1 - np.exp(zn) + zn * np.exp(2 * zn))
        lpos = np.log(G_eval(np.where(neg, 1.0, z_arr)))
    out = np.where(neg, lneg, lpos)
    return complex(out) if z_arr.ndim == 0 else out


def G_prime(z):
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < TAYLOR_RADIUS
    zs = np.where(small, 1.0, z)
    e1, e2 = np.exp(-zs), np.exp(-2 * zs)
    big = (e1 - 2 * e2) / zs + (e1 - e2) / zs ** 2
    series = 1.5 - 7.0 / 3.0 * z + 1.25 * z * z
    return np.where(small, series, big)


def G_logderiv(z):
    z_arr = np.asarray(z, dtype=complex)
    out = G_prime(z_arr) / np.asarray(G_eval(z_arr))
    return complex(out) if z_arr.ndim == 0 else out


def G_mp(z):
    z = mpmath.mpc(z)
    if abs(z) < mpmath.mpf(2) ** (-mpmath.mp.prec // 4):
        return z * (mpmath.mpf(3) / 2 - mpmath.mpf(7) / 6 * z)
    return 1 - (mpmath.exp(-z) - mpmath.exp(-2 * z)) / z


def G_zero_seed(j: int) -> complex:
    return complex(-0.5 * math.log(math.pi * j), math.pi * (j + 0.25))


def G_zeros(j_max: int, tol: float = 1e-12) -> list[complex]:
    """Zeros ``z_1..z_{j_max}`` of ``G`` in the upper half plane.

    Their conjugates are zeros as well, and ``z = 0`` is the only real zero.
    """
    if j_max < 1:
        raise DomainError("j_max must be >= 1")
    return [_refine_G_zero(G_zero_seed(j)) for j in range(1, j_max + 1)]


@lru_cache(maxsize=None)
def _refine_G_zero(seed: complex, tol: float = 1e-12) -> complex:
    z = seed
    for _ in range(60):
        g = G_eval(z)
        dz = g / complex(G_prime(z))
        z -= dz
        if abs(dz) < 1e-15 * max(1.0, abs(z)) and abs(G_eval(z)) <= tol:
            return z
    if abs(G_eval(z)) <= tol:
        return z
    raise NumericError(f"Newton on G did not converge from seed {seed}")


@dataclass(frozen=True)
class GKernel:
    """Function object bundling ``G`` and its density ``g``."""

    series_depth: int | None = None

    def __call__(self, z):
        return G_eval(z)

    def logderiv(self, z):
        return G_logderiv(z)

    def g(self, u):
        return g_density(u, self.series_depth)

    def zeros(self, j_max: int) -> list[complex]:
        return G_zeros(j_max)


# ---------------------------------------------------------------------------
# The density g

@lru_cache(maxsize=None)
def g_piece(m: int, depth: int | None = None) -> tuple[Fraction, ...]:
    """Exact coefficients (ascending in ``t = w - m``) of ``g(e^w)`` on ``[m, m+1]``."""
    if m < 1:
        return ()
    coeffs = [Fraction(0)] * m
    j_hi = m if depth is None else min(m, depth)
    for j in range((m + 2) // 2, j_hi + 1):
        r = m - j
        fj = factorial(j)
        for i in range(j):
            s = sum((-1) ** k * comb(j, k) * (r - k) ** (j - 1 - i) for k in range(r + 1))
            if s:
                coeffs[i] += Fraction(comb(j - 1, i) * s, fj)
    return tuple(coeffs)


@lru_cache(maxsize=None)
def _g_piece_float(m: int, depth: int | None = None) -> np.ndarray:
    c = np.array([float(x) for x in g_piece(m, depth)], dtype=float)
    c.setflags(write=False)
    return c


def _g_piece_mp(m: int, depth: int | None = None) -> list:
    return [mpmath.mpf(c.numerator) / c.denominator for c in g_piece(m, depth)]


def g_of_w(w, depth: int | None = None):
    """``g(e^w)`` for real ``w`` (vectorized, double precision)."""
    w_arr = np.asarray(w, dtype=float)
    flat = w_arr.reshape(-1)
    out = np.zeros(flat.size)
    m = np.floor(flat).astype(np.int64)
    for mm in np.unique(m):
        if mm < 1:
            continue
        sel = m == mm
        out[sel] = np.polynomial.polynomial.polyval(flat[sel] - mm, _g_piece_float(int(mm), depth))
    out = out.reshape(w_arr.shape)
    return float(out) if w_arr.ndim == 0 else out


def g_density(u, depth: int | None = None):
    """``g(u)``: zero below ``e``, a polynomial in ``log u`` on each ``[e^m, e^{m+1})``."""
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr < 1):
        raise DomainError("g is defined for u >= 1")
    return g_of_w(np.log(u_arr), depth)


def g_density_mp(u, depth: int | None = None):
    w = mpmath.log(u)
    m = int(mpmath.floor(w))
    if m < 1:
        return mpmath.mpf(0)
    return mpmath.polyval(list(reversed(_g_piece_mp(m, depth))), w - m)


def g_transform(z: complex, w_max: int = 80, depth: int | None = None) -> complex:
    """Numerical ``int_1^inf g(u) u^{-z-1} du`` by piecewise Gauss-Legendre.

    Beyond ``w_max`` the density is replaced by its limit ``1/w`` and the
    tail integrated exactly through ``E1``.
    """
    x, wts = _GL32
    t = 0.5 * (x + 1)
    total = 0j
    for m in range(1, w_max):
        vals = np.polynomial.polynomial.polyval(t, _g_piece_float(m, depth))
        total += 0.5 * np.sum(wts * vals * np.exp(-z * (m + t)))
    total += complex(mpmath.e1(z * w_max))
    return total


# ---------------------------------------------------------------------------
# Systems

@dataclass(frozen=True)
class ContinuousSystem:
    """Finite family of zero parameters defining ``zeta_C``.

    ``kind`` is one of ``"dmv"``, ``"appendix"``, ``"custom"``; ``params``
    holds the defining constants so that high-precision copies of
    ``gamma_k`` can be regenerated.
    """

    ells: tuple[float, ...]
    betas: tuple[float, ...]
    gammas: tuple[float, ...]
    kind: str = "custom"
    params: tuple[tuple[str, float], ...] = ()
    k_values: tuple[int, ...] = ()

    def __post_init__(self):
        n = len(self.ells)
        if len(self.betas) != n or len(self.gammas) != n:
            raise DomainError("parameter tuples differ in length")
        for l, b in zip(self.ells, self.betas):
            if not l > 0:
                raise DomainError("l_k must be positive")
            if not 0.5 < b < 1:
                raise DomainError(f"Re rho_k = {b} must lie in (1/2, 1)")
        if not self.k_values:
            object.__setattr__(self, "k_values", tuple(range(1, n + 1)))

    # -- constructors -----------------------------------------------------

    @classmethod
    def empty(cls) -> "ContinuousSystem":
        return cls((), (), (), "custom")

    @classmethod
    def from_zeros(cls, zeros: Sequence[tuple[float, complex]]) -> "ContinuousSystem":
        return cls(tuple(float(l) for l, _ in zeros), tuple(float(r.real) for _, r in zeros),
                   tuple(float(r.imag) for _, r in zeros), "custom")

    @classmethod
    def dmv(cls, k_max: int, k_min: int = 1) -> "ContinuousSystem":
        ks = tuple(range(k_min, k_max + 1))
        ells = tuple(4.0 ** k for k in ks)
        with np.errstate(over="ignore"):
            gammas = tuple(float(np.exp(l)) for l in ells)
        return cls(ells, tuple(1 - 1 / l for l in ells), gammas, "dmv", (), ks)

    @classmethod
    def appendix(cls, beta: float, theta: float, eps: float, k0: int, k_max: int
                 ) -> "ContinuousSystem":
        if not (0.5 < theta < beta < 1):
            raise DomainError(f"need 1/2 < theta < beta < 1, got theta={theta}, beta={beta}")
        if not eps > 0:
            raise DomainError("eps must be positive")
        if k0 < 2:
            raise DomainError("k0 must be >= 2 so that l_k = alpha log k > 0")
        a = 1 / (1 - beta) + eps
        expo = 2 * a * (beta - theta) + 1 + eps
        ks = tuple(range(k0, k_max + 1))
        return cls(tuple(a * math.log(k) for k in ks), tuple(beta for _ in ks),
                   tuple(float(k) ** expo for k in ks), "appendix",
                   (("beta", beta), ("theta", theta), ("eps", eps), ("alpha", a), ("expo", expo)), ks)

    def param(self, name: str) -> float:
        return dict(self.params)[name]

    def __len__(self) -> int:
        return len(self.ells)

    @property
    def rhos(self) -> list[complex]:
        return [complex(b, g) for b, g in zip(self.betas, self.gammas)]

    def mp_params(self, i: int) -> tuple:
        """``(l, beta, gamma)`` of the ``i``-th factor at the current mpmath precision."""
        k = self.k_values[i]
        if self.kind == "dmv":
            l = mpmath.mpf(4) ** k
            return l, 1 - 1 / l, mpmath.exp(l)
        if self.kind == "appendix":
            a = mpmath.mpf(self.param("alpha"))
            return (a * mpmath.log(k), mpmath.mpf(self.param("beta")),
                    mpmath.power(k, mpmath.mpf(self.param("expo"))))
        return mpmath.mpf(self.ells[i]), mpmath.mpf(self.betas[i]), mpmath.mpf(self.gammas[i])

    def residue(self) -> float:
        """``A = lim (s-1) zeta_C(s)`` at ``s = 1``."""
        z = np.array([l * (1 - complex(b, g)) for l, b, g in zip(self.ells, self.betas, self.gammas)])
        return float(np.exp(np.sum(2 * np.real(np.asarray(G_log(z)))))) if z.size else 1.0

    def extended(self, extra: int) -> "ContinuousSystem":
        """The same family with ``extra`` further factors (for tail estimates)."""
        if self.kind == "dmv":
            return ContinuousSystem.dmv(self.k_values[-1] + extra, self.k_values[0])
        if self.kind == "appendix":
            p = dict(self.params)
            return ContinuousSystem.appendix(p["beta"], p["theta"], p["eps"], self.k_values[0],
                                             self.k_values[-1] + extra)
        return self


def system_from_config(cfg: dict) -> ContinuousSystem:
    """Build a system from a parsed config table (keys as in the CLI configs)."""
    kind = str(cfg.get("kind", "")).lower()
    if kind == "dmv":
        return ContinuousSystem.dmv(int(cfg.get("k_max", 3)), int(cfg.get("k_min", 1)))
    if kind == "appendix":
        return ContinuousSystem.appendix(float(cfg["beta"]), float(cfg["theta"]), float(cfg["eps"]),
                                         int(cfg.get("k0", 2)), int(cfg.get("k_max", 8)))
    if kind in ("custom", "zeros"):
        zs = [(float(z["ell"]), complex(float(z["beta"]), float(z["gamma"]))) for z in cfg.get("zeros", [])]
        return ContinuousSystem.from_zeros(zs)
    if kind == "empty":
        return ContinuousSystem.empty()
    raise DomainError(f"unknown system kind {kind!r}")


# ---------------------------------------------------------------------------
# zeta_C

def _log_product(system: ContinuousSystem, s: np.ndarray) -> np.ndarray:
    out = np.zeros(s.shape, dtype=complex)
    for l, b, g in zip(system.ells, system.betas, system.gammas):
        out += G_log(l * (s - complex(b, g))) + G_log(l * (s - complex(b, -g)))
    return out


def zeta_C_product(system: ContinuousSystem, s):
    """``prod_k G(l_k(s-rho_k)) G(l_k(s-conj rho_k))`` (no pole factor)."""
    s_arr = np.asarray(s, dtype=complex)
    out = np.ones(s_arr.shape, dtype=complex)
    for l, b, g in zip(system.ells, system.betas, system.gammas):
        z1 = l * (s_arr - complex(b, g))
        z2 = l * (s_arr - complex(b, -g))
        if np.all(z1.real > -20) and np.all(z2.real > -20):
            out = out * G_eval(z1) * G_eval(z2)
        else:
            out = out * np.exp(G_log(z1) + G_log(z2))
    return complex(out) if s_arr.ndim == 0 else out


def zeta_C(system: ContinuousSystem, s):
    """``zeta_C(s)``; raises for ``Re s <= 1/2`` or ``s = 1``."""
    s_arr = np.asarray(s, dtype=complex)
    if np.any(s_arr.real <= 0.5):
        raise DomainError("zeta_C is only evaluated for Re s > 1/2")
    if np.any(s_arr == 1):
        raise DomainError("s = 1 is the pole")
    out = s_arr / (s_arr - 1) * np.asarray(zeta_C_product(system, s_arr))
    return complex(out) if s_arr.ndim == 0 else out


def zeta_C_tail_bound(system: ContinuousSystem, s: complex, extra: int = 64) -> float:
    """Size of ``|log|`` of the factors a longer family would add beyond ``k_max``.

    Estimated by summing ``|log G|`` over the next ``extra`` factors; zero
    for custom systems, which are finite by definition.
    """
    if system.kind == "custom" or not len(system):
        return 0.0
    ext = system.extended(extra)
    n = len(system)
    tot = 0.0
    for l, b, g in zip(ext.ells[n:], ext.betas[n:], ext.gammas[n:]):
        tot += abs(complex(G_log(l * (s - complex(b, g))))) + abs(complex(G_log(l * (s - complex(b, -g)))))
    return tot


def zeta_C_mp(system: ContinuousSystem, s) -> mpmath.mpc:
    s = mpmath.mpc(s)
    out = s / (s - 1)
    for i in range(len(system)):
        l, b, g = system.mp_params(i)
        out *= G_mp(l * (s - mpmath.mpc(b, g))) * G_mp(l * (s - mpmath.mpc(b, -g)))
    return out


# ---------------------------------------------------------------------------
# The prime measure

def _zero_free_density(u: np.ndarray) -> np.ndarray:
    y = np.log(u)
    small = y < 1e-8
    ys = np.where(small, 1.0, y)
    return np.where(small, 1.0 - 0.5 * y, (1 - 1 / u) / ys)


def pi_density(system: ContinuousSystem, u):
    """Density of ``dPi`` at ``u >= 1`` (the value at ``u = 1`` is the limit 1)."""
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr < 1):
        raise DomainError("the prime measure lives on u >= 1")
    y = np.log(u_arr)
    out = _zero_free_density(u_arr)
    for l, b, g in zip(system.ells, system.betas, system.gammas):
        w = y / l
        act = w >= 1
        if np.any(act):
            term = np.zeros_like(y)
            term[act] = g_of_w(w[act]) * np.exp((b - 1) * y[act]) * np.cos(g * y[act]) / l
            out = out - 2 * term
    return float(out) if u_arr.ndim == 0 else out


def _log_density(system: ContinuousSystem, y: np.ndarray) -> np.ndarray:
    """Density of ``dPi`` in the variable ``y = log u``."""
    return pi_density(system, np.exp(y)) * np.exp(y)


def _breakpoints(system: ContinuousSystem, y_max: float) -> np.ndarray:
    pts = [0.0, y_max]
    for l in system.ells:
        m = 1
        while l * m < y_max:
            pts.append(l * m)
            m += 1
    return np.unique(np.array(pts))


def _cells(system: ContinuousSystem, y_max: float, base_step: float = 0.01,
           per_period: int = 8) -> np.ndarray:
    """Cell edges in ``y`` aligned with the pieces of every active ``g``."""
    active = [g for l, g in zip(system.ells, system.gammas) if l < y_max]
    step = base_step
    if active:
        step = min(step, 2 * math.pi / max(active) / per_period)
    bps = _breakpoints(system, y_max)
    edges = [np.linspace(a, b, max(int(math.ceil((b - a) / step)), 1) + 1)[:-1]
             for a, b in zip(bps[:-1], bps[1:])]
    return np.concatenate(edges + [np.array([y_max])])


def positivity_scan(system: ContinuousSystem, u_max: float, per_period: int = 16
                    ) -> tuple[bool, float | None]:
    """Scan the density of ``dPi`` on ``[1, u_max]``; report the first negative point."""
    y_max = math.log(u_max)
    edges = _cells(system, y_max, base_step=0.005, per_period=per_period)
    # sample cell interiors as well as just inside each edge
    pts = np.concatenate([edges[:-1] + 1e-12, 0.5 * (edges[:-1] + edges[1:]), edges[1:] - 1e-12])
    pts.sort()
    dens = _log_density(system, pts)
    bad = np.flatnonzero(dens < 0)
    if bad.size == 0:
        return True, None
    i = int(bad[0])
    lo = pts[i - 1] if i > 0 else 0.0
    hi = pts[i]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _log_density(system, np.array([mid]))[0] < 0:
            hi = mid
        else:
            lo = mid
    return False, float(math.exp(hi))


def find_k0(beta: float, theta: float, eps: float, k_max: int, u_max: float,
            k_start: int = 2) -> int:
    """Smallest ``k0`` making the appendix measure positive on ``[1, u_max]``."""
    for k0 in range(k_start, k_max + 1):
        ok, _ = positivity_scan(ContinuousSystem.appendix(beta, theta, eps, k0, k_max), u_max)
        if ok:
            return k0
    raise DomainError(f"no k0 <= {k_max} gives a positive measure on [1, {u_max}]")


# ---------------------------------------------------------------------------
# Closed-form piece integrals

def _poly_mul_linear(coeffs: list, a0, a1) -> list:
    """Multiply a polynomial (ascending) by ``a0 + a1 t``."""
    out = [a0 * c for c in coeffs] + [0 * a0]
    for i, c in enumerate(coeffs):
        out[i + 1] = out[i + 1] + a1 * c
    return out


def _poly_deriv(coeffs: list) -> list:
    return [i * coeffs[i] for i in range(1, len(coeffs))]


def _poly_eval(coeffs: list, t):
    acc = 0 * t
    for c in reversed(coeffs):
        acc = acc * t + c
    return acc


def _antideriv_series(coeffs: list, c, t, ctx) -> object:
    """``e^{ct} sum_n (-1)^n Q^{(n)}(t) / c^{n+1}`` (without the exponential)."""
    total = 0
    q = list(coeffs)
    cpow = c
    sign = 1
    while q:
        total = total + sign * _poly_eval(q, t) / cpow
        q = _poly_deriv(q)
        cpow = cpow * c
        sign = -sign
    return total


def _piece_integral_mp(coeffs: list, c, m: int, a, b):
    """``int_a^b Q(t) e^{c (m + t)} dt`` in mpmath at the current precision."""
    deg = len(coeffs) - 1
    extra = 0
    if abs(c) < 4 * (deg + 1):
        extra = int((deg + 1) * max(0.0, math.log2(4 * (deg + 1) / max(float(abs(c)), 1e-300)))) + 16
    with mpmath.extraprec(extra):
        ea = mpmath.exp(c * (m + a))
        eb = mpmath.exp(c * (m + b))
        return eb * _antideriv_series(coeffs, c, b, mpmath) - ea * _antideriv_series(coeffs, c, a, mpmath)


def _piece_integral_float(coeffs: np.ndarray, c: complex, m: int, a: float, b: float) -> complex:
    deg = len(coeffs) - 1
    if abs(c) >= 2 * (deg + 1) + 4:
        cl = list(coeffs)
        return (np.exp(c * (m + b)) * _antideriv_series(cl, c, b, None)
                - np.exp(c * (m + a)) * _antideriv_series(cl, c, a, None))
    x, w = _GL32
    t = 0.5 * (b - a) * x + 0.5 * (a + b)
    return complex(0.5 * (b - a) * np.sum(w * np.polynomial.polynomial.polyval(t, coeffs)
                                          * np.exp(c * (m + t))))


def _k_integral(l, beta, gamma, w_lo, w_hi, with_w: bool, use_mp: bool):
    """``int_{w_lo}^{w_hi} w^{with_w} g(e^w) e^{l(beta + i gamma) w} dw`` (``w_lo >= 1``)."""
    if use_mp:
        c = l * mpmath.mpc(beta, gamma)
        total = mpmath.mpc(0)
        lo_m = int(mpmath.floor(w_lo))
        hi_m = int(mpmath.floor(w_hi))
    else:
        c = l * complex(beta, gamma)
        total = 0j
        lo_m, hi_m = int(math.floor(w_lo)), int(math.floor(w_hi))
    for m in range(max(lo_m, 1), hi_m + 1):
        a = max(w_lo - m, 0)
        b = min(w_hi - m, 1)
        if b <= a:
            continue
        if use_mp:
            coeffs = _g_piece_mp(m)
            if with_w:
                coeffs = _poly_mul_linear(coeffs, mpmath.mpf(m), mpmath.mpf(1))
            total += _piece_integral_mp(coeffs, c, m, a, b)
        else:
            coeffs = _g_piece_float(m)
            if with_w:
                coeffs = np.array(_poly_mul_linear(list(coeffs), float(m), 1.0))
            total += _piece_integral_float(np.asarray(coeffs), c, m, float(a), float(b))
    return total


def required_bits(gamma: float, x: float) -> float:
    return math.log2(max(gamma * math.log(x), 2.0)) + 48


def _check_precision(system: ContinuousSystem, x: float, prec: int) -> None:
    y = math.log(x)
    for l, g in zip(system.ells, system.gammas):
        if y / l > 1:
            need = required_bits(g, x)
            if prec < need:
                raise PrecisionError(
                    f"phase gamma*log x = {g * y:.3e} needs at least {math.ceil(need)} bits, have {prec}")


def _mp_log(x):
    return mpmath.log(mpmath.mpf(x)) if not isinstance(x, mpmath.mpf) else mpmath.log(x)


def psi_terms_mp(system: ContinuousSystem, x, prec: int = DEFAULT_PREC, x2=None) -> list:
    """The terms ``I_k(x)`` (or ``I_k(x2) - I_k(x)`` when ``x2`` is given) at ``prec`` bits."""
    xf = float(x2 if x2 is not None else x)
    _check_precision(system, xf, prec)
    out = []
    with mpmath.workprec(prec):
        lx = _mp_log(x)
        lx2 = _mp_log(x2) if x2 is not None else None
        for i in range(len(system)):
            l, b, g = system.mp_params(i)
            if x2 is None:
                lo, hi = mpmath.mpf(1), lx / l
            else:
                lo, hi = max(mpmath.mpf(1), lx / l), lx2 / l
            if hi <= lo:
                out.append(mpmath.mpf(0))
                continue
            out.append(mpmath.re(l * _k_integral(l, b, g, lo, hi, True, True)))
    return out


def psi_C_mp(system: ContinuousSystem, x, prec: int = DEFAULT_PREC):
    """``psi_C(x) = x - 1 - log x - 2 sum_k I_k(x)`` as an mpmath number."""
    if x < 1:
        raise DomainError("x must be >= 1")
    terms = psi_terms_mp(system, x, prec)
    with mpmath.workprec(prec):
        xm = mpmath.mpf(x)
        return xm - 1 - mpmath.log(xm) - 2 * mpmath.fsum(terms)


def psi_C(system: ContinuousSystem, x: float, prec: int = DEFAULT_PREC) -> float:
    return float(psi_C_mp(system, x, prec))


def psi_C_diff_mp(system: ContinuousSystem, x, h, prec: int = DEFAULT_PREC) -> tuple:
    """``psi_C(x + h) - psi_C(x)`` and its per-``k`` terms, computed on ``[x, x+h]`` directly."""
    with mpmath.workprec(prec):
        xm, hm = mpmath.mpf(x), mpmath.mpf(h)
        terms = psi_terms_mp(system, xm, prec, x2=xm + hm)
        val = hm - mpmath.log1p(hm / xm) - 2 * mpmath.fsum(terms)
    return val, terms


def psi_C_float(system: ContinuousSystem, x: float) -> float:
    """Double-precision ``psi_C`` for systems with moderate ``gamma_k``."""
    y = math.log(x)
    tot = x - 1 - y
    for l, b, g in zip(system.ells, system.betas, system.gammas):
        if y / l > 1:
            tot -= 2 * (l * _k_integral(l, b, g, 1.0, y / l, True, False)).real
    return tot


def ein(y):
    """``int_0^y (e^t - 1)/t dt``."""
    y = np.asarray(y, dtype=float)
    small = y < 2
    ys = np.where(small, 1.0, y)
    big = expi(ys) - np.log(ys) - EULER_GAMMA
    ser = np.zeros_like(y)
    term = np.ones_like(y)
    for n in range(1, 40):
        term = term * y / n
        ser = ser + term / n
    return np.where(small, ser, big)


def Pi_C(system: ContinuousSystem, x: float) -> float:
    """``Pi_C(x) = int_1^x dPi`` in closed form (double precision)."""
    if x < 1:
        raise DomainError("x must be >= 1")
    y = math.log(x)
    tot = float(ein(y))
    for l, b, g in zip(system.ells, system.betas, system.gammas):
        if y / l > 1:
            tot -= 2 * _k_integral(l, b, g, 1.0, y / l, False, False).real
    return tot


def Pi_C_mp(system: ContinuousSystem, x, prec: int = DEFAULT_PREC):
    _check_precision(system, float(x), prec)
    with mpmath.workprec(prec):
        y = _mp_log(x)
        tot = mpmath.ei(y) - mpmath.log(y) - mpmath.euler
        for i in range(len(system)):
            l, b, g = system.mp_params(i)
            if y / l > 1:
                tot -= 2 * mpmath.re(_k_integral(l, b, g, mpmath.mpf(1), y / l, False, True))
        return tot


# ---------------------------------------------------------------------------
# Counting function of the integers

@dataclass
class NCResult:
    x: np.ndarray
    value: np.ndarray
    error: np.ndarray
    method: str

    def to_csv(self) -> str:
        return export_csv(self.x, self.value, self.error)


def export_csv(xs, values, errors) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "value", "error_bound"])
    for x, v, e in zip(np.atleast_1d(xs), np.atleast_1d(values), np.atleast_1d(errors)):
        w.writerow([repr(float(x)), repr(float(v)), repr(float(e))])
    return buf.getvalue()


def _hat_masses(system: ContinuousSystem, y_max: float, n: int) -> np.ndarray:
    """Masses of ``dPi`` (in ``y = log u``) against hat functions on ``n`` cells."""
    h = y_max / n
    x, w = _GL10
    t = 0.5 * (x + 1)
    # split cells at the breakpoints of g so no rule straddles a jump
    bps = _breakpoints(system, y_max)
    inner = bps[(bps > 0) & (bps < y_max)]
    edges = np.unique(np.concatenate([np.linspace(0, y_max, n + 1), inner]))
    a, b = edges[:-1], edges[1:]
    nodes = a[:, None] + (b - a)[:, None] * t[None, :]
    wts = 0.5 * (b - a)[:, None] * w[None, :]
    dens = _log_density(system, nodes.reshape(-1)).reshape(nodes.shape) * wts
    left = np.minimum((0.5 * (a + b) // h).astype(np.int64), n - 1)
    frac = nodes / h - left[:, None]
    masses = np.bincount(left, weights=np.sum(dens * (1 - frac), axis=1), minlength=n + 1)
    masses += np.bincount(left + 1, weights=np.sum(dens * frac, axis=1), minlength=n + 1)
    return masses


def _hat_cdf(s: np.ndarray) -> np.ndarray:
    s = np.clip(s, -1, 1)
    return np.where(s < 0, 0.5 * (1 + s) ** 2, 1 - 0.5 * (1 - s) ** 2)


def _conv_exp_masses(nu: np.ndarray, rel_tol: float = 1e-12, max_terms: int = 2000) -> np.ndarray:
    n = nu.size
    L = 1 << int(math.ceil(math.log2(2 * n)))
    V = np.fft.rfft(nu, L)
    acc = np.zeros(n)
    acc[0] = 1.0
    term = acc.copy()
    for j in range(1, max_terms):
        term = np.fft.irfft(np.fft.rfft(term, L) * V, L)[:n] / j
        acc += term
        mass = abs(term.sum())
        if mass < rel_tol * acc.sum() and j > 2:
            return acc
    raise NumericError("convolution exponential did not converge")


def _N_from_masses(masses: np.ndarray, h: float, ys: np.ndarray) -> np.ndarray:
    """CDF of the node masses, each smeared back into its hat function.

    The mass at node 0 is the unit point mass of ``N`` at ``u = 1`` plus
    the hat-mass of the first half cell, counted in full.
    """
    nodes = np.arange(masses.size) * h
    out = np.empty(ys.size)
    for i, y in enumerate(ys):
        hi = int(min(masses.size, math.floor(y / h) + 2))
        out[i] = masses[0] + float(np.dot(masses[1:hi], _hat_cdf((y - nodes[1:hi]) / h)))
    return out


def N_C_conv(system: ContinuousSystem, xs, cells: int = 1 << 14) -> NCResult:
    """``N_C`` at the points ``xs`` via the convolution exponential on a log grid.

    The error column is the difference to a run on half as many cells,
    divided by three (second-order scheme).
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if np.any(xs < 1):
        raise DomainError("x must be >= 1")
    y_max = math.log(float(xs.max())) * 1.0001 + 1e-9
    ys = np.log(xs)
    vals = []
    for n in (cells, cells // 2):
        h = y_max / n
        nu = _hat_masses(system, y_max, n)
        masses = _conv_exp_masses(nu)
        vals.append(_N_from_masses(masses, h, ys))
    err = np.abs(vals[0] - vals[1]) / 3
    return NCResult(xs, vals[0], err, "conv_exp")


def _perron_window(system: ContinuousSystem, x: float, delta: float, H: float,
                   panel: float) -> float:
    kappa = 1 + 1 / math.log(x)
    n_panels = int(math.ceil(H / panel))
    gx, gw = np.polynomial.legendre.leggauss(16)
    edges = np.linspace(0.0, H, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    t = (mid[:, None] + half[:, None] * gx[None, :]).reshape(-1)
    w = (half[:, None] * gw[None, :]).reshape(-1)
    total = 0.0
    for i in range(0, t.size, 1 << 16):
        tt = t[i:i + (1 << 16)]
        s = kappa + 1j * tt
        D = s / (s - 1) * (np.asarray(zeta_C_product(system, s)) - 1)
        lp, lm = math.log(x + delta), math.log(x - delta)
        ker = (np.exp((s + 1) * lp) - np.exp((s + 1) * lm)) / (2 * delta * s * (s + 1))
        total += math.fsum(np.real(D * ker) * w[i:i + (1 << 16)])
    return total / math.pi


def N_C_perron(system: ContinuousSystem, xs, H: float = 1000.0, delta: float = 1.0,
               panel: float = 0.25) -> NCResult:
    """``N_C`` from a Perron integral of a symmetric window average.

    The average of ``N`` over ``[x - delta, x + delta]`` is a contour
    integral on ``Re s = 1 + 1/log x``.  The part coming from ``s/(s-1)``
    is exactly ``x`` and is added back analytically; the remainder is
    integrated up to height ``H``.  Averages at ``delta`` and ``delta/2``
    are Richardson-extrapolated.  The error column combines the
    extrapolation change with the change from halving ``H``.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if np.any(xs - delta < 1):
        raise DomainError("need x - delta >= 1")
    vals, errs = [], []
    for x in xs:
        a1 = _perron_window(system, x, delta, H, panel)
        a2 = _perron_window(system, x, delta / 2, H, panel)
        a2h = _perron_window(system, x, delta / 2, H / 2, panel)
        rich = (4 * a2 - a1) / 3
        vals.append(x + rich)
        errs.append(abs(rich - a2) + abs(a2 - a2h))
    return NCResult(xs, np.array(vals), np.array(errs), "perron")


def N_C(system: ContinuousSystem, x, method: str = "conv_exp", **kw) -> NCResult:
    if method == "conv_exp":
        return N_C_conv(system, x, **kw)
    if method == "perron":
        return N_C_perron(system, x, **kw)
    raise DomainError(f"unknown method {method!r}")


def residual_exponent(xs: np.ndarray, Ns: np.ndarray, A: float, n_windows: int = 12) -> float:
    """Log-log slope of windowed maxima of ``|N(x) - A x|``."""
    xs = np.asarray(xs, dtype=float)
    dev = np.abs(np.asarray(Ns) - A * xs)
    edges = np.geomspace(xs.min(), xs.max(), n_windows + 1)
    mx, my = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        sel = (xs >= a) & (xs <= b)
        if np.any(sel) and dev[sel].max() > 0:
            mx.append(math.log(math.sqrt(a * b)))
            my.append(math.log(dev[sel].max()))
    if len(mx) < 2:
        return -math.inf
    return float(np.polyfit(mx, my, 1)[0])


# ---------------------------------------------------------------------------
# Discretization

@dataclass
class CountingTable:
    """Cumulative ``Pi`` on cells in ``y = log u`` with Gauss-Legendre partials."""

    edges: np.ndarray
    cum: np.ndarray
    density: Callable[[np.ndarray], np.ndarray]

    @classmethod
    def build(cls, density: Callable[[np.ndarray], np.ndarray], edges: np.ndarray) -> "CountingTable":
        x, w = _GL10
        a, b = edges[:-1], edges[1:]
        nodes = 0.5 * (b - a)[:, None] * x[None, :] + 0.5 * (a + b)[:, None]
        vals = density(nodes.reshape(-1)).reshape(nodes.shape)
        cell = np.sum(vals * w[None, :], axis=1) * 0.5 * (b - a)
        cum = np.concatenate([[0.0], np.cumsum(cell)])
        return cls(edges, cum, density)

    def value(self, y: np.ndarray, cell: np.ndarray) -> np.ndarray:
        x, w = _GL10
        a = self.edges[cell]
        nodes = 0.5 * (y - a)[:, None] * x[None, :] + 0.5 * (y + a)[:, None]
        part = np.sum(self.density(nodes.reshape(-1)).reshape(nodes.shape) * w[None, :], axis=1)
        return self.cum[cell] + part * 0.5 * (y - a)

    def invert(self, targets: np.ndarray, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
        """Solve ``Pi(y) = target`` by safeguarded Newton inside the bracketing cell."""
        if np.any(np.diff(self.cum) <= 0):
            bad = int(np.flatnonzero(np.diff(self.cum) <= 0)[0])
            raise DomainError(f"counting function is not strictly increasing near y={self.edges[bad]:.6g}")
        cell = np.searchsorted(self.cum, targets, side="right") - 1
        if np.any(cell >= self.edges.size - 1) or np.any(cell < 0):
            raise DomainError("target beyond the tabulated range")
        lo = self.edges[cell].copy()
        hi = self.edges[cell + 1].copy()
        y = 0.5 * (lo + hi)
        for _ in range(100):
            f = self.value(y, cell) - targets
            lo = np.where(f < 0, y, lo)
            hi = np.where(f >= 0, y, hi)
            d = self.density(y)
            with np.errstate(divide="ignore", invalid="ignore"):
                ny = y - f / d
            bad = ~np.isfinite(ny) | (ny <= lo) | (ny >= hi)
            ny = np.where(bad, 0.5 * (lo + hi), ny)
            if np.all(np.abs(f) < tol) and np.all(np.abs(ny - y) < 1e-15 * np.maximum(1, y)):
                y = ny
                break
            y = ny
        resid = np.abs(self.value(y, cell) - targets)
        return y, resid


def counting_table(system: ContinuousSystem, u_max: float) -> CountingTable:
    y_max = math.log(u_max)
    edges = _cells(system, y_max, base_step=0.01, per_period=8)
    return CountingTable.build(lambda y: _log_density(system, y), edges)


@dataclass
class Discretization:
    primes: PrimeSequence
    residuals: np.ndarray


def discretize(system: ContinuousSystem, j_max: int | None = None, u_max: float | None = None
               ) -> Discretization:
    """Primes ``q_j = Pi_C^{-1}(j - 1/2)`` for ``j = 1..j_max`` (or all up to ``u_max``)."""
    if j_max is None and u_max is None:
        raise DomainError("give j_max or u_max")
    if u_max is None:
        u_max = 4.0
        while Pi_C(system, u_max) < j_max:
            u_max *= 2
    table = counting_table(system, u_max)
    total = table.cum[-1]
    if j_max is None:
        j_max = int(math.floor(total + 0.5))
    targets = np.arange(1, j_max + 1) - 0.5
    if targets.size and targets[-1] > total:
        raise DomainError(f"Pi_C(u_max) = {total:.6g} is below the last target")
    y, resid = table.invert(targets)
    return Discretization(PrimeSequence(tuple(np.exp(y).tolist()), label=f"discretized-{system.kind}"),
                          resid)


def invert_counting(Pi: Callable[[np.ndarray], np.ndarray], dens: Callable[[np.ndarray], np.ndarray],
                    targets: np.ndarray, lo: float, hi: float, tol: float = 1e-12) -> np.ndarray:
    """Bisection-safeguarded Newton for ``Pi(q) = target`` with user-supplied ``Pi``."""
    targets = np.asarray(targets, dtype=float)
    a = np.full(targets.shape, float(lo))
    b = np.full(targets.shape, float(hi))
    if np.any(Pi(a) > targets) or np.any(Pi(b) < targets):
        raise DomainError("targets are not bracketed by [lo, hi]")
    q = 0.5 * (a + b)
    for _ in range(200):
        f = Pi(q) - targets
        a = np.where(f < 0, q, a)
        b = np.where(f >= 0, q, b)
        with np.errstate(divide="ignore", invalid="ignore"):
            nq = q - f / dens(q)
        bad = ~np.isfinite(nq) | (nq <= a) | (nq >= b)
        nq = np.where(bad, 0.5 * (a + b), nq)
        if np.all(np.abs(nq - q) <= 1e-15 * np.maximum(1, np.abs(q))):
            return nq
        q = nq
    if np.max(np.abs(Pi(q) - targets)) > tol * max(1.0, float(np.max(np.abs(targets)))):
        raise NumericError("counting-function inversion did not converge")
    return q
