"""Exact Heisenberg-picture ledger over a fixed basis of source quadratures.

Each live mode's X and P operators are stored as linear combinations of the
basis-mode quadratures plus a constant offset.  Symplectic optics mixes
rows; homodyne measurement with classical feedforward adds measured rows
(scaled by gains) onto target rows, which is an exact operator identity as
long as the measured operators mutually commute.  Because rows stay exact,
the ledger serves as the independent check on the covariance engine and on
the closed-form output coefficients of the amplifier.

Variances evaluate through an optional factor F with basis_cov = F·Fᵀ
(‖Fᵀc‖² instead of cᵀ·cov·c): for strongly squeezed bases the covariance
entries grow like e^{2r} while the physical variances shrink like e^{-2r},
and the factored form avoids that cancellation entirely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussian import QUADS, SYMMETRY_TOL, check_physicality, omega
from .jsonutil import render

COMMUTATOR_TOL = 1e-12


def _as_row_key(mode, quad):
    q = str(quad).upper()
    if q not in QUADS:
        raise ValueError(f"quadrature must be 'X' or 'P', got {quad!r}")
    return (str(mode), q)


@dataclass(frozen=True, eq=False)
class BasisSpec:
    """Ordered basis modes with their second moments (and optional factor).

    factor, when given, satisfies cov = factor·factorᵀ and is used for all
    variance evaluation; mean defaults to zero.
    """

    modes: tuple
    cov: np.ndarray
    mean: np.ndarray = None
    factor: np.ndarray = None

    def __post_init__(self):
        modes = tuple(str(m) for m in self.modes)
        if not modes:
            raise ValueError("basis needs at least one mode")
        if len(set(modes)) != len(modes):
            raise ValueError(f"duplicate basis modes: {modes}")
        object.__setattr__(self, "modes", modes)
        n = 2 * len(modes)
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (n, n):
            raise ValueError(f"basis cov must be {n}x{n}, got {cov.shape}")
        scale = max(1.0, float(np.abs(cov).max()))
        if np.abs(cov - cov.T).max() > SYMMETRY_TOL * scale:
            raise ValueError("basis cov is not symmetric")
        report = check_physicality(cov)
        if report.min_eigenvalue < report.eigenvalue_floor:
            raise ValueError(
                f"basis cov violates the uncertainty relation "
                f"(min eigenvalue {report.min_eigenvalue:.3e})"
            )
        object.__setattr__(self, "cov", cov)
        mean = np.zeros(n) if self.mean is None else np.asarray(self.mean, dtype=float)
        if mean.shape != (n,):
            raise ValueError(f"basis mean must have shape ({n},)")
        object.__setattr__(self, "mean", mean)
        if self.factor is not None:
            F = np.asarray(self.factor, dtype=float)
            if F.shape != (n, n):
                raise ValueError(f"basis factor must be {n}x{n}")
            if np.abs(F @ F.T - cov).max() > 1e-11 * scale:
                raise ValueError("basis factor does not reproduce the covariance")
            object.__setattr__(self, "factor", F)

    @property
    def dim(self):
        return 2 * len(self.modes)

    def index(self, mode, quad):
        mode, q = _as_row_key(mode, quad)
        try:
            i = self.modes.index(mode)
        except ValueError:
            raise ValueError(f"unknown basis mode {mode!r}; have {self.modes}") from None
        return 2 * i + (0 if q == "X" else 1)


@dataclass(frozen=True, eq=False)
class HeisenbergLedger:
    """Live-mode quadrature rows over a fixed basis.  Value semantics."""

    basis: BasisSpec
    rows: dict  # (mode, 'X'|'P') -> coefficient vector, length basis.dim
    offsets: dict  # (mode, 'X'|'P') -> float

    def live_modes(self):
        return tuple(dict.fromkeys(mode for mode, _ in self.rows))

    def row(self, mode, quad):
        key = _as_row_key(mode, quad)
        if key not in self.rows:
            raise ValueError(f"row {key} is not live (live modes: {self.live_modes()})")
        return self.rows[key]

    def offset(self, mode, quad):
        return self.offsets[_as_row_key(mode, quad)]


def ledger_new(spec):
    """Fresh ledger: every basis mode live with unit self-coefficients."""
    rows, offsets = {}, {}
    for i, mode in enumerate(spec.modes):
        for j, quad in enumerate(QUADS):
            e = np.zeros(spec.dim)
            e[2 * i + j] = 1.0
            rows[(mode, quad)] = e
            offsets[(mode, quad)] = 0.0
    return HeisenbergLedger(spec, rows, offsets)


def ledger_apply(ledger, op, targets):
    """Mix target rows with a symplectic map (same convention as states)."""
    targets = tuple(targets)
    if len(targets) != op.arity:
        raise ValueError(f"op acts on {op.arity} modes, got {len(targets)} targets")
    keys = [(str(m), q) for m in targets for q in QUADS]
    for key in keys:
        if key not in ledger.rows:
            raise ValueError(f"row {key} is not live")
    S = op.matrix
    stacked = np.array([ledger.rows[k] for k in keys])
    offs = np.array([ledger.offsets[k] for k in keys])
    new_rows = dict(ledger.rows)
    new_offs = dict(ledger.offsets)
    mixed = S @ stacked
    mixed_offs = S @ offs
    for i, key in enumerate(keys):
        new_rows[key] = mixed[i]
        new_offs[key] = float(mixed_offs[i])
    return HeisenbergLedger(ledger.basis, new_rows, new_offs)


def ledger_displace(ledger, mode, dx, dp):
    """Add constant offsets to one live mode's rows."""
    kx, kp = _as_row_key(mode, "X"), _as_row_key(mode, "P")
    if kx not in ledger.rows:
        raise ValueError(f"mode {mode!r} is not live")
    new_offs = dict(ledger.offsets)
    new_offs[kx] += float(dx)
    new_offs[kp] += float(dp)
    return HeisenbergLedger(ledger.basis, dict(ledger.rows), new_offs)


def symplectic_product(ledger, row_a, row_b):
    """a·Omega·b over the basis: equals the commutator [A, B]/i."""
    om = omega(len(ledger.basis.modes))
    return float(ledger.row(*row_a) @ om @ ledger.row(*row_b))


def measure_feedforward(ledger, measured, targets, gains):
    """Measure quadratures, feed outcomes onto targets, drop measured modes.

    measured: list of (mode, quad) that are homodyned; they must mutually
    commute (zero symplectic products), otherwise the wiring is invalid.
    targets: list of (mode, quad) receiving feedforward.
    gains: matrix with shape (len(targets), len(measured)); target row t
    gains sum_k gains[t, k] * measured row k.  Both quadrature rows of every
    measured mode are removed.
    """
    measured = [_as_row_key(*mq) for mq in measured]
    targets = [_as_row_key(*mq) for mq in targets]
    gains = np.asarray(gains, dtype=float)
    if gains.shape != (len(targets), len(measured)):
        raise ValueError(
            f"gains must have shape ({len(targets)},{len(measured)}), got {gains.shape}"
        )
    for key in measured + targets:
        if key not in ledger.rows:
            raise ValueError(f"row {key} is not live")
    dead = {mode for mode, _ in measured}
    if any(mode in dead for mode, _ in targets):
        raise ValueError("measured modes cannot receive feedforward")
    om = omega(len(ledger.basis.modes))
    for i in range(len(measured)):
        for j in range(i + 1, len(measured)):
            prod = float(ledger.rows[measured[i]] @ om @ ledger.rows[measured[j]])
            if abs(prod) > COMMUTATOR_TOL:
                raise ValueError(
                    f"measured quadratures {measured[i]} and {measured[j]} do not "
                    f"commute (symplectic product {prod:.3e}); invalid wiring"
                )
    new_rows = dict(ledger.rows)
    new_offs = dict(ledger.offsets)
    for t, tkey in enumerate(targets):
        row = new_rows[tkey].copy()
        off = new_offs[tkey]
        for k, mkey in enumerate(measured):
            row = row + gains[t, k] * ledger.rows[mkey]
            off = off + gains[t, k] * ledger.offsets[mkey]
        new_rows[tkey] = row
        new_offs[tkey] = off
    for mode in dead:
        for quad in QUADS:
            new_rows.pop((mode, quad))
            new_offs.pop((mode, quad))
    return HeisenbergLedger(ledger.basis, new_rows, new_offs)


def row_coefficient(ledger, row, basis_entry):
    """Stored coefficient of one basis quadrature in one live row."""
    return float(ledger.row(*row)[ledger.basis.index(*basis_entry)])


def ledger_variance(ledger, combo):
    """Variance of a combination of live rows, evaluated over the basis."""
    c = np.zeros(ledger.basis.dim)
    for mode, quad, coeff in combo.terms:
        c = c + coeff * ledger.row(mode, quad)
    if ledger.basis.factor is not None:
        v = ledger.basis.factor.T @ c
        return float(v @ v)
    return float(c @ ledger.basis.cov @ c)


def ledger_mean(ledger, mode, quad):
    """Expectation of one live row: coefficients·basis_mean + offset."""
    return float(ledger.row(mode, quad) @ ledger.basis.mean + ledger.offset(mode, quad))


def ledger_to_covariance(ledger, modes):
    """Mean vector and covariance of a set of live modes (interleaved X,P)."""
    keys = [(str(m), q) for m in modes for q in QUADS]
    C = np.array([ledger.row(*k) for k in keys])
    offs = np.array([ledger.offsets[k] for k in keys])
    mean = C @ ledger.basis.mean + offs
    if ledger.basis.factor is not None:
        CF = C @ ledger.basis.factor
        cov = CF @ CF.T
    else:
        cov = C @ ledger.basis.cov @ C.T
    return mean, 0.5 * (cov + cov.T)


def ledger_relabel(ledger, mapping):
    """Rename live modes; basis labels are untouched."""
    live = ledger.live_modes()
    for old in mapping:
        if old not in live:
            raise ValueError(f"mode {old!r} is not live")
    new_rows = {(mapping.get(m, m), q): v for (m, q), v in ledger.rows.items()}
    if len(new_rows) != len(ledger.rows):
        raise ValueError("relabeling collides live modes")
    new_offs = {(mapping.get(m, m), q): v for (m, q), v in ledger.offsets.items()}
    return HeisenbergLedger(ledger.basis, new_rows, new_offs)


@dataclass(frozen=True)
class CommutatorReport:
    """Deviations of live-row commutators from the canonical values."""

    max_self_error: float  # worst |[X,P]/i - 2| over live modes
    max_cross_error: float  # worst |product| between rows of distinct modes
    passed: bool


def check_commutators(ledger, tol=COMMUTATOR_TOL):
    """Verify [X,P] = 2i per live mode and commuting distinct modes."""
    om = omega(len(ledger.basis.modes))
    live = ledger.live_modes()
    self_err = 0.0
    cross_err = 0.0
    for i, a in enumerate(live):
        prod = float(ledger.rows[(a, "X")] @ om @ ledger.rows[(a, "P")])
        self_err = max(self_err, abs(prod - 2.0))
        for b in live[i + 1 :]:
            for qa in QUADS:
                for qb in QUADS:
                    prod = float(ledger.rows[(a, qa)] @ om @ ledger.rows[(b, qb)])
                    cross_err = max(cross_err, abs(prod))
    return CommutatorReport(self_err, cross_err, self_err <= tol and cross_err <= tol)


def ledger_to_json(ledger):
    """JSON dump: rows keyed "mode.X"/"mode.P" with coefficient arrays."""
    doc = {
        "basis": [f"{m}.{q}" for m in ledger.basis.modes for q in QUADS],
        "rows": {
            f"{mode}.{quad}": {"coefficients": vec, "offset": ledger.offsets[(mode, quad)]}
            for (mode, quad), vec in ledger.rows.items()
        },
    }
    return render(doc)
