"""Inseparability criteria for four-mode continuous-variable states.

A criterion is a quadrature combination whose variance must drop below the
shot-noise limit SNL = sum of squared coefficients (vacuum variance 1 per
quadrature).  The amplifier resource state is certified by four three-mode
combinations; for comparison, the standard cluster-state and GHZ-state
combination sets (which include two-mode terms) can be evaluated on any
user-supplied four-mode state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .gaussian import GaussianState, QuadratureCombination, combination_variance
from .ledger import HeisenbergLedger, ledger_variance
from .protocol import resource_criteria_combination

PASS_SLACK = 1e-12
_SNAP_REL = 16 * 2.2204460492503131e-16  # integer snap for sums of squares


def _snap_integer(value):
    # Bounds like 1 + (√R)² + (√(1-R))² are integers in exact arithmetic but
    # land an ulp off after squaring irrational coefficients; snap within a
    # few ulp so saturation comparisons stay exact.
    nearest = round(value)
    if nearest > 0 and abs(value - nearest) <= _SNAP_REL * nearest:
        return float(nearest)
    return value


@dataclass(frozen=True)
class Criterion:
    """Labeled combination with its shot-noise bound (recomputed, not stored)."""

    label: str
    combo: QuadratureCombination

    @property
    def bound(self):
        b = _snap_integer(math.fsum(c * c for _, _, c in self.combo.terms))
        if not b > 0:
            raise ValueError("criterion bound must be positive")
        return b


@dataclass(frozen=True)
class CriterionResult:
    label: str
    variance: float
    bound: float
    margin: float = field(init=False)
    passed: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "margin", self.bound - self.variance)
        object.__setattr__(self, "passed", self.variance < self.bound - PASS_SLACK)


@dataclass(frozen=True)
class CriterionReport:
    results: tuple

    @property
    def passed(self):
        return all(r.passed for r in self.results)


def evaluate(target, criteria):
    """Evaluate criteria on a GaussianState or a HeisenbergLedger."""
    if isinstance(target, GaussianState):
        var = lambda combo: combination_variance(target, combo)
    elif isinstance(target, HeisenbergLedger):
        var = lambda combo: ledger_variance(target, combo)
    else:
        raise TypeError(f"cannot evaluate criteria on {type(target).__name__}")
    return CriterionReport(
        tuple(CriterionResult(c.label, var(c.combo), c.bound) for c in criteria)
    )


def nopa_criteria(R):
    """The four three-mode criteria certifying the amplifier resource.

    X_a1 - √R X_a2 + √(1-R) X_a3,   √(1-R) X_a2 + √R X_a3 + X_a4,
    P_a1 + √R P_a2 - √(1-R) P_a3,   √(1-R) P_a2 + √R P_a3 - P_a4,
    each with bound 2.
    """
    if not 0.0 <= R <= 1.0:
        raise ValueError(f"reflectivity must lie in [0, 1], got {R}")
    kinds = (
        ("X[a1,a2,a3]", "x_signal"),
        ("X[a2,a3,a4]", "x_idler"),
        ("P[a1,a2,a3]", "p_signal"),
        ("P[a2,a3,a4]", "p_idler"),
    )
    return [Criterion(label, resource_criteria_combination(kind, R)) for label, kind in kinds]


def cluster_combos(modes=("m1", "m2", "m3", "m4")):
    """Linear-cluster criteria on four ordered modes (bounds 3, 2, 2, 3)."""
    m1, m2, m3, m4 = modes
    spec = (
        ("X[1,2,3]", ((m1, "X", 1.0), (m2, "X", 1.0), (m3, "X", 1.0))),
        ("X[3,4]", ((m3, "X", 1.0), (m4, "X", 1.0))),
        ("P[1,2]", ((m1, "P", 1.0), (m2, "P", -1.0))),
        ("P[2,3,4]", ((m2, "P", 1.0), (m3, "P", -1.0), (m4, "P", 1.0))),
    )
    return [Criterion(label, QuadratureCombination(terms)) for label, terms in spec]


def ghz_combos(modes=("m1", "m2", "m3", "m4")):
    """GHZ criteria: total X (bound 4) plus all pairwise P differences."""
    combos = [
        Criterion(
            "X[1,2,3,4]",
            QuadratureCombination(tuple((m, "X", 1.0) for m in modes)),
        )
    ]
    for i in range(4):
        for j in range(i + 1, 4):
            combos.append(
                Criterion(
                    f"P[{i + 1},{j + 1}]",
                    QuadratureCombination(((modes[i], "P", 1.0), (modes[j], "P", -1.0))),
                )
            )
    return combos


@dataclass(frozen=True)
class ContrastReport:
    """How many modes each combination touches, per criterion family."""

    mode_counts: dict  # family -> tuple of per-combo mode counts
    nopa_all_three_mode: bool
    cluster_has_two_mode: bool
    ghz_has_two_mode: bool


def criteria_contrast(R):
    """Structural comparison of the three criterion families.

    Every amplifier-resource combination touches exactly three of the four
    modes, whereas the cluster and GHZ sets both contain two-mode
    combinations.
    """
    if not 0.0 < R < 1.0:
        raise ValueError(f"reflectivity must lie in (0, 1), got {R}")
    counts = {
        family: tuple(len(c.combo.modes_touched()) for c in combos)
        for family, combos in (
            ("nopa", nopa_criteria(R)),
            ("cluster", cluster_combos()),
            ("ghz", ghz_combos()),
        )
    }
    return ContrastReport(
        mode_counts=counts,
        nopa_all_three_mode=all(c == 3 for c in counts["nopa"]),
        cluster_has_two_mode=2 in counts["cluster"],
        ghz_has_two_mode=2 in counts["ghz"],
    )
