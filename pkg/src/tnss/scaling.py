"""Analytic AsrPL scaling law and operation-count model.

All big-O constants are set to 1, so only ratios and crossovers between
the terms carry meaning. Logarithms in the scaling law are natural; that is
the base for which ``qubits_needed`` inverts ``scaling_rho`` exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, InvalidArgumentError


@dataclass(frozen=True)
class ScalingParams:
    C1: float = 1.0
    C2: float = 0.013
    mu: float = 1.61
    omega: float = 9.3

    def __post_init__(self):
        if min(self.C1, self.C2, self.mu, self.omega) <= 0:
            raise InvalidArgumentError("scaling parameters must be positive")


DEFAULT_SCALING = ScalingParams()


def scaling_rho(ell: float, n: float, gamma: float, sp: ScalingParams = DEFAULT_SCALING) -> float:
    """rho = C1 ell^gamma exp(-C2 (ell / n^(1/omega))^mu)."""
    if ell <= 0 or n <= 0:
        raise InvalidArgumentError("ell and n must be positive")
    ell_eff = ell / n ** (1.0 / sp.omega)
    return sp.C1 * ell**gamma * math.exp(-sp.C2 * ell_eff**sp.mu)


def qubits_needed(ell: float, rho: float, gamma: float, sp: ScalingParams = DEFAULT_SCALING) -> float:
    """n = [C2 ell^mu / (ln C1 - ln rho + gamma ln ell)]^(omega/mu)."""
    if ell <= 0 or rho <= 0:
        raise InvalidArgumentError("ell and rho must be positive")
    den = math.log(sp.C1) - math.log(rho) + gamma * math.log(ell)
    if den <= 0:
        raise DomainError(f"rho = {rho} is unreachable at gamma = {gamma} (denominator {den:.3g} <= 0)")
    return (sp.C2 * ell**sp.mu / den) ** (sp.omega / sp.mu)


def bond_dim_law(n: float, A: float = 6.6, zeta: float = 0.42) -> float:
    """Bond dimension needed for a stable sieve yield, m(n) = A n^zeta."""
    return A * n**zeta


@dataclass(frozen=True)
class CostBreakdown:
    n: float
    ell: float
    gamma: float
    m: float
    T1: float
    T2: float
    T3: float

    @property
    def T(self) -> float:
        return self.T1 + self.T2


def cost_model(n: float, ell: float, gamma: float, m: float) -> CostBreakdown:
    """Babai (T1), tensor network (T2) and smoothness/processing (T3) counts."""
    if min(n, ell, m) < 1 or gamma < 0:
        raise InvalidArgumentError("n, ell, m must be >= 1 and gamma >= 0")
    T1 = n**7 * ell * math.log10(n) ** 3
    T2 = n**4 * ell * m**4 + n**2 * ell ** (gamma + 1) * m**4
    T3 = n**4 * ell + n**3 * ell ** (gamma + 1) + n**2 * ell ** (gamma + 2)
    return CostBreakdown(n, ell, gamma, m, T1, T2, T3)


def cost_curve(ell: float, gamma: float, rho: float = 1.0, sp: ScalingParams = DEFAULT_SCALING) -> CostBreakdown:
    """Costs at the qubit count the scaling law requires for ``rho``."""
    n = math.ceil(qubits_needed(ell, rho, gamma, sp))
    n = max(n, 1)
    return cost_model(n, ell, gamma, max(1.0, bond_dim_law(n)))
