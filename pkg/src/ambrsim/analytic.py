"""Closed-form route-success model for monitor-based routing, plus a Monte Carlo check.

Symbols follow the usual notation of the model:

* ``lam`` -- packet arrival rate, ``mu`` -- location-change rate
* ``pb`` -- probability that a route breaks before the next packet
* ``e_n`` -- number of monitors, ``kk`` -- hop count of a failed self diagnosis
* ``p0`` -- per-step probability that the next desired node is found
* ``e_l`` -- expected route length, ``k`` -- hop index of the failure

All probabilities are evaluated with ``0 ** 0 == 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def _check_prob(name, value):
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")


def _check_count(name, value):
    if value < 0 or int(value) != value:
        raise ValueError(f"{name} must be a nonnegative integer, got {value!r}")


def eval_pb(lam, mu):
    """Probability that a route is broken: mu / (mu + lam)."""
    if lam < 0 or mu < 0:
        raise ValueError("rates must be nonnegative")
    if lam + mu <= 0:
        raise ValueError("lam + mu must be positive")
    return mu / (mu + lam)


def route_found_prob(pb):
    """Probability that a single monitor finds the route, (1 - pb) ** 3."""
    _check_prob("pb", pb)
    return (1.0 - pb) ** 3


def eval_pn(pb, e_n):
    """Probability that at least one of ``e_n`` monitors can route."""
    _check_count("e_n", e_n)
    rho = route_found_prob(pb)
    return 1.0 - (1.0 - rho) ** int(e_n)


def eval_pk_distribution(e_n, pb):
    """Binomial(e_n, rho) pmf over K = 0..e_n as a numpy array."""
    _check_count("e_n", e_n)
    e_n = int(e_n)
    rho = route_found_prob(pb)
    ks = np.arange(e_n + 1)
    coeff = np.array([math.comb(e_n, int(k)) for k in ks], dtype=float)
    return coeff * rho**ks * (1.0 - rho) ** (e_n - ks)


def eval_pf0(p0, kk):
    """Self-diagnosis failure probability (1 - p0) ** kk."""
    _check_prob("p0", p0)
    if kk < 0:
        raise ValueError("kk must be nonnegative")
    return (1.0 - p0) ** kk


def eval_pf1(p0, kk, e_n):
    """Probability that all ``e_n`` monitors fail: (1 - p0) ** (kk * e_n)."""
    _check_prob("p0", p0)
    if kk < 0 or e_n < 0:
        raise ValueError("kk and e_n must be nonnegative")
    return (1.0 - p0) ** (kk * e_n)


def eval_pr(p0, kk, e_n):
    """Route discovery success probability, 1 - P_F0 * P_F1."""
    return 1.0 - eval_pf0(p0, kk) * eval_pf1(p0, kk, e_n)


@dataclass(frozen=True)
class AnalyticParams:
    """Input set for :func:`eval_ps`.

    ``pb`` may be given directly; otherwise it is derived from ``lam`` and ``mu``.
    ``n`` and ``r`` are carried for bookkeeping only; no closed form uses them.
    """

    lam: float = 1.0
    mu: float = 1.0
    e_l: float = 2.0
    e_n: int = 1
    kk: float = 1.0
    p0: float = 0.5
    k: float = 1.0
    n: int | None = None
    r: float | None = None
    pb: float | None = field(default=None)

    def __post_init__(self):
        if self.lam < 0 or self.mu < 0:
            raise ValueError("rates must be nonnegative")
        _check_prob("p0", self.p0)
        if self.pb is not None:
            _check_prob("pb", self.pb)
        if self.e_l < 1:
            raise ValueError(f"e_l must be >= 1, got {self.e_l!r}")
        if self.e_n < 0:
            raise ValueError(f"e_n must be >= 0, got {self.e_n!r}")
        if self.kk < 0:
            raise ValueError(f"kk must be >= 0, got {self.kk!r}")
        if not 1 <= self.k <= self.e_l:
            raise ValueError(f"k must satisfy 1 <= k <= e_l, got k={self.k!r}")

    @property
    def p_b(self):
        if self.pb is not None:
            return self.pb
        return eval_pb(self.lam, self.mu)


@dataclass(frozen=True)
class PsResult:
    value: float
    mode: str
    term1: float
    term2: float
    term3: float

    @property
    def in_unit_interval(self):
        return 0.0 <= self.value <= 1.0


def _root(base, degree):
    # base ** (1/degree) with the degree == 0 case only defined for base == 1
    if degree == 0:
        if base != 1.0:
            raise ValueError("exponent 1/0 is undefined unless the base is 1")
        return 1.0
    return base ** (1.0 / degree)


def eval_ps(params, mode="dedup"):
    """End-to-end routing success expression, returned unclamped with its terms.

    The printed expression repeats its middle term; ``mode="literal"`` counts
    it twice, ``mode="dedup"`` once. ``k`` stands for both k and k-hat.
    """
    if mode not in ("literal", "dedup"):
        raise ValueError(f"mode must be 'literal' or 'dedup', got {mode!r}")
    p = params
    pb = p.p_b
    pf0 = eval_pf0(p.p0, p.kk)
    pf1 = eval_pf1(p.p0, p.kk, p.e_n)
    rest = p.e_l - p.k

    term1 = (1.0 - _root(pf0, p.kk)) ** p.e_l
    term2 = rest * (1.0 - _root(pf1, p.kk * p.e_n)) ** rest
    term3 = (1.0 - pb) ** p.k * (
        1.0 - (1.0 - p.p0) ** p.kk * (1.0 - p.p0) ** (p.kk * p.e_n * rest)
    )
    mult = 2.0 if mode == "literal" else 1.0
    return PsResult(term1 + mult * term2 + term3, mode, term1, term2, term3)


def monte_carlo_pb(lam, mu, samples, stream, chunk=200_000):
    """Fraction of trials in which an Exp(mu) break precedes an Exp(lam) arrival."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if lam < 0 or mu < 0 or lam + mu <= 0:
        raise ValueError("rates must be nonnegative with a positive sum")
    if mu == 0:
        return 0.0
    if lam == 0:
        return 1.0
    hits = 0
    left = int(samples)
    while left:
        m = min(chunk, left)
        breaks = stream.exponential(1.0 / mu, size=m)
        arrivals = stream.exponential(1.0 / lam, size=m)
        hits += int(np.count_nonzero(breaks < arrivals))
        left -= m
    return hits / samples


def analytic_row(params):
    """One sweep row as an ordered dict of column -> value."""
    lit = eval_ps(params, "literal")
    ded = eval_ps(params, "dedup")
    pb = params.p_b
    pf0 = eval_pf0(params.p0, params.kk)
    pf1 = eval_pf1(params.p0, params.kk, params.e_n)
    return {
        "lambda": params.lam,
        "mu": params.mu,
        "E_L": params.e_l,
        "E_N": params.e_n,
        "K": params.kk,
        "P_0": params.p0,
        "k": params.k,
        "P_B": pb,
        "P_N": eval_pn(pb, params.e_n),
        "P_F0": pf0,
        "P_F1": pf1,
        "P_R": eval_pr(params.p0, params.kk, params.e_n),
        "P_R_check": 1.0 - pf0 * pf1,
        "P_S_literal": lit.value,
        "P_S_dedup": ded.value,
        "term1": lit.term1,
        "term2": lit.term2,
        "term3": lit.term3,
        "P_S_in_unit": ded.in_unit_interval,
    }
