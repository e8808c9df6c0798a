"""Closed-form exponent functions for zero-density estimates.

Everything here is a plain double-precision formula.  Zero-density exponents
are written in terms of ``mu``, the position of ``alpha`` on the segment
``[theta, 1]``::

    alpha = (1 - mu) * theta + mu        1 - mu = (1 - alpha) / (1 - theta)

Root functions return the *largest* root of their quadratic and raise
:class:`DomainError` when the discriminant is negative.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .errors import DomainError

#: nu above which the discriminant -7 nu^2 + 10 nu + 1 is negative
NU_DISCRIMINANT_LIMIT = (5.0 + math.sqrt(32.0)) / 7.0


def mu_from_alpha(alpha: float, theta: float) -> float:
    return (alpha - theta) / (1.0 - theta)


def alpha_from_mu(mu: float, theta: float) -> float:
    return (1.0 - mu) * theta + mu


def c_mu(mu: float) -> float:
    """Zero-density constant ``4 mu / (2 mu^2 - 3 mu + 2)``."""
    return 4.0 * mu / (2.0 * mu * mu - 3.0 * mu + 2.0)


def _disc_mvt(nu: float) -> float:
    return -7.0 * nu * nu + 10.0 * nu + 1.0


def F_nu(alpha: float, nu: float, theta: float) -> float:
    """Quadratic whose positivity is the admissibility condition on ``X``."""
    return (2.0 * nu * alpha * alpha
            - (3.0 * nu - 1.0 + (nu + 1.0) * theta) * alpha
            + (2.0 * nu - 2.0 + (3.0 - nu) * theta + (nu - 1.0) * theta * theta))


def D_nu(nu: float, theta: float) -> float:
    """Discriminant of :func:`F_nu` as a polynomial in ``alpha``."""
    return (1.0 - theta) ** 2 * _disc_mvt(nu)


def alpha_of_nu(nu: float, theta: float) -> float:
    """Largest root of ``F_nu``; the left end of the range where the
    mean-value-theorem estimate with sum length ``T^(nu/(1-theta))`` works."""
    disc = _disc_mvt(nu)
    if disc < 0.0:
        raise DomainError(
            f"nu={nu} exceeds (5+sqrt(32))/7 = {NU_DISCRIMINANT_LIMIT:.6f}: F_nu has no real root")
    return (3.0 * nu - 1.0 + (nu + 1.0) * theta + (1.0 - theta) * math.sqrt(disc)) / (4.0 * nu)


def nu_of_alpha(mu: float) -> float:
    """The ``nu`` with ``alpha_of_nu(nu) == alpha``, expressed through ``mu``."""
    return (2.0 - mu) / (2.0 * mu * mu - 3.0 * mu + 2.0)


def _eps_denominator(mu: float, eps: float) -> float:
    return 2.0 * mu * mu - 3.0 * mu + 2.0 - 2.0 * eps * (4.0 * mu - 3.0 - 4.0 * eps)


def c_mu_eps(mu: float, eps: float) -> float:
    """Exact closed form of the perturbed constant (no O(eps^2) expansion)."""
    return (4.0 * mu + 8.0 * eps * (1.0 - mu + 2.0 * eps)) / _eps_denominator(mu, eps)


def nu_alpha_eps(mu: float, eps: float) -> float:
    return (2.0 - mu + 2.0 * eps) / _eps_denominator(mu, eps)


def density_exponent_nu(alpha: float, nu: float, theta: float) -> float:
    """Exponent of T in the fixed-nu zero-density estimate (without logs)."""
    r = (1.0 - alpha) / (1.0 - theta)
    return r * (2.0 + 2.0 * nu - 4.0 * nu * r)


def density_range_start(nu: float, theta: float) -> float:
    """``(theta + 2 nu - 1) / (2 nu)``, from the condition ``X >= 1``."""
    return (theta + 2.0 * nu - 1.0) / (2.0 * nu)


def hm_exponent(alpha: float, nu: float, theta: float) -> float:
    """Exponent obtained through the Halasz-Montgomery route (formula only)."""
    r = (1.0 - alpha) / (1.0 - theta)
    return r * (4.0 + 2.0 * (nu - 1.0) - 4.0 * (nu - 1.0) * (1.0 - alpha) / (2.0 * alpha - theta - 1.0))


def hm_quadratic(alpha: float, nu: float, theta: float) -> float:
    """Quadratic whose largest root is :func:`hm_alpha_tilde`.

    Obtained by clearing the denominator ``2 alpha - theta - 1`` in the
    admissibility condition for the Halasz-Montgomery choice of ``X``.
    """
    return (4.0 * nu * alpha * alpha
            - (5.0 * nu + 1.0 + (3.0 * nu - 1.0) * theta) * alpha
            + (2.0 * nu + (nu + 1.0) * theta + (nu - 1.0) * theta * theta))


def hm_alpha_tilde(nu: float, theta: float) -> float:
    disc = _disc_mvt(nu)
    if disc < 0.0:
        raise DomainError(
            f"nu={nu} exceeds (5+sqrt(32))/7 = {NU_DISCRIMINANT_LIMIT:.6f}: no real root")
    return (5.0 * nu + 1.0 + (3.0 * nu - 1.0) * theta + (1.0 - theta) * math.sqrt(disc)) / (8.0 * nu)


def ram_quadratic(alpha: float, nu: float, theta: float) -> float:
    return (2.0 * nu * alpha * alpha + (1.0 - theta - 3.0 * nu) * alpha
            + (2.0 * (nu - 1.0) + (2.0 - nu) * theta))


def ram_alpha(nu: float, theta: float) -> float:
    """Largest root of the admissibility quadratic under the average
    Ramanujan condition."""
    disc = (8.0 * theta - 7.0) * nu * nu + 10.0 * (1.0 - theta) * nu + (1.0 - theta) ** 2
    if disc < 0.0:
        raise DomainError(f"negative discriminant {disc:.3e} at nu={nu}, theta={theta}")
    return (3.0 * nu + theta - 1.0 + math.sqrt(disc)) / (4.0 * nu)


def ram_nu_of_alpha(alpha: float, theta: float) -> float:
    """Inverse of :func:`ram_alpha` on ``alpha > (theta + 2) / 3``."""
    return (1.0 - theta) * (2.0 - alpha) / (2.0 * alpha * alpha - 3.0 * alpha + 2.0 - theta)


def ram_exponent_nu(alpha: float, nu: float, theta: float) -> float:
    return (1.0 - alpha) / (1.0 - theta) * (4.0 * nu * alpha + 2.0 - 2.0 * nu - 2.0 * theta)


def ram_exponent(alpha: float, theta: float) -> float:
    return (1.0 - alpha) * (4.0 * alpha - 2.0 * theta) / (2.0 * alpha * alpha - 3.0 * alpha + 2.0 - theta)


def lemma_partial_sum_exponent(sigma: float, nu: float, theta: float) -> float:
    """Exponent of T in the error of the length ``T^(nu/(1-theta))`` partial sum."""
    return (1.0 + (nu - 1.0) * theta - nu * sigma) / (1.0 - theta)


def pnt_lambda_thresholds(b: float, d1: float, c: float, L: float) -> float:
    """Short-interval PNT threshold under a Littlewood-type zero-free region."""
    if math.isinf(d1):
        return max(b, 1.0 - 1.0 / c)
    return max(b, 1.0 - d1 / (c * d1 + L))


def pnt_lambda_cheb(b: float, d2: float, c: float, Kconst: float) -> float:
    """Chebyshev-bound threshold under a de la Vallee Poussin region and a
    log-free density estimate with constant ``Kconst``."""
    return max(b, 1.0 - d2 / (c * d2 + max(math.log(2.0 * Kconst), c * d2)))


def corollary_lambda(d: float, theta: float) -> float:
    """Threshold with ``c = 4/(1-theta)`` and ``L = 9``."""
    if math.isinf(d):
        return (theta + 3.0) / 4.0
    return 1.0 - (1.0 - theta) * d / (4.0 * d + 9.0 * (1.0 - theta))


def density_upper_bound(alpha: float, T: float, theta: float, eps: float = 0.0) -> float:
    """``T^((c(mu)+eps)(1-mu)) (log T)^9`` without the implicit constant."""
    mu = mu_from_alpha(alpha, theta)
    return T ** ((c_mu(mu) + eps) * (1.0 - mu)) * math.log(T) ** 9


def log_free_bound(alpha: float, T: float, c: float, Kconst: float) -> float:
    """``K T^(c(1-alpha))``, the log-free shape used for reporting."""
    return Kconst * T ** (c * (1.0 - alpha))


def appendix_exponents(beta: float, theta: float, eps: float
                       ) -> tuple[float, Callable[[float], float]]:
    """Lower-bound exponents for zero counts of the sharpness family.

    Returns ``(line_exp, strip_exp)``: the exponent for ``N(beta, T)`` and
    a function giving the exponent for ``N(sigma, T)``.
    """
    if not (0.5 < theta < beta < 1.0):
        raise DomainError(f"need 1/2 < theta < beta < 1, got theta={theta}, beta={beta}")
    denom = 1.0 + beta - 2.0 * theta
    line_exp = (1.0 - beta) * (1.0 - eps) / denom

    def strip_exp(sigma: float) -> float:
        return (1.0 + beta - 2.0 * sigma) * (1.0 - eps) / denom

    return line_exp, strip_exp


@dataclass
class ExponentTable:
    theta: float
    entries: list[tuple[str, tuple, float]] = field(default_factory=list)

    def add(self, name: str, args: tuple, value: float) -> None:
        if not math.isfinite(value):
            raise DomainError(f"{name}{args} is not finite")
        self.entries.append((name, args, value))

    def lookup(self, name: str) -> list[tuple[tuple, float]]:
        return [(a, v) for n, a, v in self.entries if n == name]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# beurling-lab v1\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "args", "value"])
        for name, args, value in self.entries:
            w.writerow([name, " ".join(repr(float(a)) for a in args), repr(float(value))])
        return buf.getvalue()


def exponent_table(theta: float, mus: Iterable[float], eps: float = 0.0) -> ExponentTable:
    """Evaluate the main exponent functions at each ``mu``."""
    table = ExponentTable(theta)
    for mu in mus:
        alpha = alpha_from_mu(mu, theta)
        table.add("c_mu", (mu,), c_mu(mu))
        table.add("alpha", (mu,), alpha)
        table.add("density_exponent", (mu,), c_mu(mu) * (1.0 - mu))
        if mu > 0.5:
            table.add("nu_of_alpha", (mu,), nu_of_alpha(mu))
        if eps > 0.0:
            table.add("c_mu_eps", (mu, eps), c_mu_eps(mu, eps))
        if alpha > (theta + 2.0) / 3.0 and alpha < 1.0:
            table.add("ram_exponent", (mu,), ram_exponent(alpha, theta))
    table.add("corollary_lambda_limit", (), corollary_lambda(math.inf, theta))
    return table
