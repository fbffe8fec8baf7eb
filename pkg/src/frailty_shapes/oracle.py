"""Brute-force conditional (survivor) frailty distribution.

Among clusters still event-free at generic time ``lam``, the frailty of the
survivors is distributed as

    P(Z = z | T > t)  proportional to  exp(-z * lam) * P(Z = z).

This module computes that distribution by direct summation over the truncated
support, recentred at the smallest support point so the weights stay in
floating-point range at any ``lam``.  It serves as an independent cross-check
of the closed-form shape formulas: the two routes share no code beyond the
probability tables.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DegenerateConditional, NumericalOverflow, ParameterOutOfRange
from .families import FrailtyFamily, TAIL_MASS, support_table

#: The post-conditioning tail bound enforced on every survivor distribution.
TAIL_BOUND = 1e-12


@dataclass(frozen=True)
class SurvivorPmf:
    """Conditional frailty distribution among survivors at generic time ``lam``."""

    lam: float
    support: np.ndarray
    probs: np.ndarray
    tail_mass_bound: float


def _check_lam(lam: float) -> float:
    lam = float(lam)
    if not (np.isfinite(lam) and lam >= 0.0):
        raise ParameterOutOfRange(f"generic time must be finite and nonnegative, got {lam}")
    return lam


def _weights(family: FrailtyFamily, lam: float):
    """(support, unconditional pmf, recentred weights, post-conditioning tail bound)."""
    for attempt in range(3):
        table = support_table(family, TAIL_MASS * 10.0 ** (-4 * attempt))
        z, g = table.z, table.pmf
        w = g * np.exp(-(z - z[0]) * lam)
        total = w.sum()
        if total <= 0.0 or not np.isfinite(total):
            raise NumericalOverflow(
                f"survivor weights of {family} degenerate at lam={lam}"
            )
        # Mass beyond the truncation point, after conditioning, is at most
        # exp(-(z_K - z_1) lam) * tail / total -- conditioning only downweights
        # support points beyond z_K relative to the retained ones.
        bound = np.exp(-(z[-1] - z[0]) * lam) * table.tail_mass / total
        if bound < TAIL_BOUND:
            return z, g, w, float(bound)
    raise NumericalOverflow(
        f"could not push the survivor tail bound below {TAIL_BOUND} for {family}"
    )


def survivor_pmf(family: FrailtyFamily, lam: float) -> SurvivorPmf:
    """Conditional pmf of Z among survivors at generic time ``lam``."""
    lam = _check_lam(lam)
    z, _, w, bound = _weights(family, lam)
    return SurvivorPmf(lam=lam, support=z, probs=w / w.sum(), tail_mass_bound=bound)


def survivor_moment(family: FrailtyFamily, lam: float, q: int) -> float:
    """q-th raw moment of the survivor frailty distribution."""
    if q not in (1, 2):
        raise ParameterOutOfRange(f"only moments q=1,2 are supported, got {q}")
    lam = _check_lam(lam)
    z, _, w, _ = _weights(family, lam)
    probs = w / w.sum()
    return float(probs @ z) if q == 1 else float(probs @ (z * z))


def rfv(family: FrailtyFamily, lam: float) -> float:
    """Relative frailty variance Var(Z | T > t) / E(Z | T > t)^2 at ``lam``.

    Variance is formed from moments recentred at the smallest support point,
    which keeps it accurate when the survivors concentrate there.
    """
    lam = _check_lam(lam)
    z, g, _, _ = _weights(family, lam)
    _, m1, m2, _ = _kernels.survivor_moment_grid(z, g, np.array([lam]))
    mean = z[0] + m1[0]
    var = m2[0] - m1[0] ** 2
    if mean <= 0.0:
        raise DegenerateConditional(
            f"survivor mean of {family} vanished at lam={lam}"
        )
    return float(var / mean**2)


def rfv_grid(family: FrailtyFamily, lams) -> np.ndarray:
    """Vectorized :func:`rfv` over a grid of generic times."""
    lams = np.asarray(lams, dtype=np.float64)
    if lams.size and (not np.all(np.isfinite(lams)) or float(lams.min()) < 0.0):
        raise ParameterOutOfRange("generic-time grid must be finite and nonnegative")
    table = support_table(family)
    z, g = table.z, table.pmf
    _, m1, m2, _ = _kernels.survivor_moment_grid(z, g, lams)
    mean = z[0] + m1
    if np.any(mean <= 0.0):
        raise DegenerateConditional(f"survivor mean of {family} vanished on the grid")
    return (m2 - m1**2) / mean**2


def smallest_point_prob_grid(family: FrailtyFamily, lams) -> np.ndarray:
    """Conditional probability of the smallest support point over a grid."""
    lams = np.asarray(lams, dtype=np.float64)
    table = support_table(family)
    _, _, _, first = _kernels.survivor_moment_grid(table.z, table.pmf, lams)
    return first
