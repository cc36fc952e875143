"""Gaussian states of multimode optical fields and their primitive operations.

Conventions used throughout the package:

* Quadratures are X = a + a†, P = -i(a - a†), so [X, P] = 2i and every
  vacuum quadrature has variance 1.  The shot-noise limit for a linear
  combination sum_k c_k Q_k of vacuum quadratures is therefore sum_k c_k².
* State vectors are interleaved per mode: (X1, P1, X2, P2, ...).
* The commutation form Omega has per-mode blocks ((0, 2), (-2, 0)), i.e.
  [r_j, r_k] = i·Omega_jk.  A physical covariance matrix satisfies the
  Robertson-Schrodinger condition cov + i·Omega/2 >= 0, which the vacuum
  saturates (minimum eigenvalue 0).

All operations are value-in / value-out: states are never mutated, so
values can be shared freely across threads.  Randomness enters only through
an explicitly passed numpy Generator.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .jsonutil import render

SYMMETRY_TOL = 1e-12
SYMPLECTIC_TOL = 1e-12
EIGENVALUE_FLOOR = -1e-9

QUADS = ("X", "P")


def omega(n_modes):
    """Commutation form for n modes, per-mode blocks ((0, 2), (-2, 0))."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 2.0], [-2.0, 0.0]]))


def _unit_form(n_modes):
    # omega / 2: unit symplectic blocks, used for inverses and the
    # uncertainty matrix.
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _check_label_list(labels):
    labels = tuple(str(m) for m in labels)
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate mode labels: {labels}")
    return labels


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Mean vector and covariance matrix over an ordered set of labeled modes."""

    modes: tuple
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "modes", _check_label_list(self.modes))
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        n = 2 * len(self.modes)
        if mean.shape != (n,):
            raise ValueError(f"mean must have shape ({n},), got {mean.shape}")
        if cov.shape != (n, n):
            raise ValueError(f"cov must have shape ({n},{n}), got {cov.shape}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValueError("state moments must be finite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def num_modes(self):
        return len(self.modes)

    def mode_index(self, mode):
        try:
            return self.modes.index(mode)
        except ValueError:
            raise ValueError(f"unknown mode {mode!r}; have {self.modes}") from None

    def quad_index(self, mode, quad):
        """Row index of a quadrature in the interleaved (X1,P1,...) layout."""
        q = str(quad).upper()
        if q not in QUADS:
            raise ValueError(f"quadrature must be 'X' or 'P', got {quad!r}")
        return 2 * self.mode_index(mode) + (0 if q == "X" else 1)


@dataclass(frozen=True)
class SymplecticOp:
    """A symplectic matrix acting on k modes' interleaved quadratures."""

    matrix: np.ndarray

    def __post_init__(self):
        S = np.asarray(self.matrix, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] % 2:
            raise ValueError(f"symplectic matrix must be 2k x 2k, got {S.shape}")
        om = omega(S.shape[0] // 2)
        resid = np.abs(S @ om @ S.T - om).max()
        if resid > SYMPLECTIC_TOL:
            raise ValueError(f"matrix is not symplectic (residual {resid:.3e})")
        object.__setattr__(self, "matrix", S)

    @property
    def arity(self):
        return self.matrix.shape[0] // 2

    def inverse(self):
        # S^-1 = -J S^T J with J the unit symplectic form; exact for the
        # signed-permutation structure of J.
        J = _unit_form(self.arity)
        return SymplecticOp(-J @ self.matrix.T @ J)


@dataclass(frozen=True)
class QuadratureCombination:
    """Linear combination of quadratures: terms (mode, 'X'|'P', coefficient)."""

    terms: tuple

    def __post_init__(self):
        terms = []
        seen = set()
        for mode, quad, coeff in self.terms:
            q = str(quad).upper()
            if q not in QUADS:
                raise ValueError(f"quadrature must be 'X' or 'P', got {quad!r}")
            coeff = float(coeff)
            if not math.isfinite(coeff):
                raise ValueError("combination coefficients must be finite")
            key = (str(mode), q)
            if key in seen:
                raise ValueError(f"duplicate term for {key}")
            seen.add(key)
            terms.append((str(mode), q, coeff))
        if not terms:
            raise ValueError("combination needs at least one term")
        object.__setattr__(self, "terms", tuple(terms))

    def coefficient_vector(self, state):
        """Coefficient vector aligned with the state's quadrature layout."""
        c = np.zeros(2 * state.num_modes)
        for mode, quad, coeff in self.terms:
            c[state.quad_index(mode, quad)] = coeff
        return c

    def modes_touched(self):
        return tuple(dict.fromkeys(mode for mode, _, _ in self.terms))


@dataclass(frozen=True)
class InputSpec:
    """Source specification for a single input mode."""

    kind: str = "vacuum"
    mean_x: float = 0.0
    mean_p: float = 0.0
    r: float = 0.0
    squeezed_quad: str = "X"

    def __post_init__(self):
        if self.kind not in ("vacuum", "coherent", "squeezed"):
            raise ValueError(f"unknown input kind {self.kind!r}")
        for v in (self.mean_x, self.mean_p, self.r):
            if not math.isfinite(float(v)):
                raise ValueError("input parameters must be finite")
        if str(self.squeezed_quad).upper() not in QUADS:
            raise ValueError("squeezed_quad must be 'X' or 'P'")
        object.__setattr__(self, "squeezed_quad", str(self.squeezed_quad).upper())

    @classmethod
    def vacuum(cls):
        return cls("vacuum")

    @classmethod
    def coherent(cls, mean_x, mean_p):
        return cls("coherent", mean_x=float(mean_x), mean_p=float(mean_p))

    @classmethod
    def squeezed(cls, r, quad="X"):
        if float(r) < 0:
            raise ValueError("squeezing parameter must be >= 0")
        return cls("squeezed", r=float(r), squeezed_quad=quad)


@dataclass(frozen=True)
class PhysicalityReport:
    """Diagnostics from check_physicality."""

    symmetry_residual: float
    min_eigenvalue: float
    eigenvalue_floor: float
    passed: bool = field(init=False)

    def __post_init__(self):
        ok = (
            self.symmetry_residual <= SYMMETRY_TOL
            and self.min_eigenvalue >= self.eigenvalue_floor
        )
        object.__setattr__(self, "passed", bool(ok))


# ---------------------------------------------------------------------------
# state constructors
# ---------------------------------------------------------------------------


def vacuum_state(n, labels=None):
    """n-mode vacuum: zero mean, identity covariance."""
    if n < 1:
        raise ValueError("need at least one mode")
    if labels is None:
        labels = tuple(f"m{i}" for i in range(n))
    labels = _check_label_list(labels)
    if len(labels) != n:
        raise ValueError(f"expected {n} labels, got {len(labels)}")
    return GaussianState(labels, np.zeros(2 * n), np.eye(2 * n))


def single_mode_state(spec, label):
    """Build the one-mode state described by an InputSpec."""
    mean = np.zeros(2)
    cov = np.eye(2)
    if spec.kind == "coherent":
        mean = np.array([spec.mean_x, spec.mean_p])
    elif spec.kind == "squeezed":
        lo, hi = math.exp(-2 * spec.r), math.exp(2 * spec.r)
        cov = np.diag([lo, hi] if spec.squeezed_quad == "X" else [hi, lo])
    return GaussianState((label,), mean, cov)


def input_factor(spec):
    """Matrix F with cov = F·Fᵀ for a single input mode (analytic, stable)."""
    if spec.kind == "squeezed":
        lo, hi = math.exp(-spec.r), math.exp(spec.r)
        return np.diag([lo, hi] if spec.squeezed_quad == "X" else [hi, lo])
    return np.eye(2)


def epr_state(r, labels=("epr1", "epr2")):
    """Two-mode squeezed state with correlated quadratures.

    Var(X_i) = Var(P_i) = cosh 2r, Cov(X1, X2) = -sinh 2r and
    Cov(P1, P2) = +sinh 2r, so the sum amplitude X1+X2 and the difference
    phase P1-P2 both have variance 2e^{-2r}.
    """
    r = float(r)
    if not math.isfinite(r) or r < 0:
        raise ValueError(f"squeezing parameter must be finite and >= 0, got {r}")
    labels = _check_label_list(labels)
    if len(labels) != 2:
        raise ValueError("epr_state needs exactly two labels")
    c, s = math.cosh(2 * r), math.sinh(2 * r)
    cov = np.array(
        [
            [c, 0.0, -s, 0.0],
            [0.0, c, 0.0, s],
            [-s, 0.0, c, 0.0],
            [0.0, s, 0.0, c],
        ]
    )
    return GaussianState(labels, np.zeros(4), cov)


def epr_factor(r):
    """Matrix F with epr_state(r).cov = F·Fᵀ, built without cancellation.

    F is the balanced combiner applied to an X-squeezed and a P-squeezed
    vacuum; its entries are e^{±r}/√2, so products of F never suffer the
    cosh-sinh cancellation that plagues the covariance itself at large r.
    """
    lo, hi = math.exp(-float(r)), math.exp(float(r))
    sq = np.diag([lo, hi, hi, lo])
    return balanced_combiner_map().matrix @ sq


# ---------------------------------------------------------------------------
# symplectic building blocks
# ---------------------------------------------------------------------------


def beam_splitter_map(R):
    """Two-mode splitter with reflectivity R.

    Acting on ordered targets (u, v): the u slot becomes √(1-R)·v - √R·u
    (the transmitted port) and the v slot becomes √R·v + √(1-R)·u (the
    reflected port), identically for X and P.
    """
    R = float(R)
    if not 0.0 <= R <= 1.0:
        raise ValueError(f"reflectivity must lie in [0, 1], got {R}")
    t, q = math.sqrt(1.0 - R), math.sqrt(R)
    m = np.array([[-q, t], [t, q]])
    return SymplecticOp(np.kron(m, np.eye(2)))


def balanced_combiner_map():
    """Balanced combiner: (u, v) -> ((u+v)/√2, (u-v)/√2) on X and P."""
    h = 1.0 / math.sqrt(2.0)
    m = np.array([[h, h], [h, -h]])
    return SymplecticOp(np.kron(m, np.eye(2)))


def phase_flip_map():
    """π rotation of a single mode: (X, P) -> (-X, -P)."""
    return SymplecticOp(-np.eye(2))


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def apply_symplectic(state, op, targets):
    """Apply a symplectic map to the named target modes; others untouched."""
    targets = tuple(targets)
    if len(targets) != op.arity:
        raise ValueError(f"op acts on {op.arity} modes, got {len(targets)} targets")
    if len(set(targets)) != len(targets):
        raise ValueError("target modes must be distinct")
    idx = np.concatenate([[state.quad_index(m, "X"), state.quad_index(m, "P")] for m in targets])
    S = op.matrix
    mean = state.mean.copy()
    cov = state.cov.copy()
    mean[idx] = S @ mean[idx]
    cov[idx, :] = S @ cov[idx, :]
    cov[:, idx] = cov[:, idx] @ S.T
    cov = 0.5 * (cov + cov.T)  # scrub last-ulp asymmetry from the matmuls
    return GaussianState(state.modes, mean, cov)


def displace(state, mode, dx, dp):
    """Shift the mean of one mode by (dx, dp); covariance unchanged."""
    if not (math.isfinite(float(dx)) and math.isfinite(float(dp))):
        raise ValueError("displacement must be finite")
    i = state.quad_index(mode, "X")
    mean = state.mean.copy()
    mean[i] += dx
    mean[i + 1] += dp
    return GaussianState(state.modes, mean, state.cov)


def homodyne_measure(state, mode, quad, rng):
    """Measure one quadrature; return (outcome, conditioned remaining state).

    The outcome is drawn from the Gaussian marginal of the measured
    quadrature.  The surviving modes are conditioned with the generalized
    inverse of the measured 1x1 block (the conjugate quadrature becomes
    fully uncertain and is discarded with the measured mode).
    """
    q = state.quad_index(mode, quad)
    var = state.cov[q, q]
    if not var > 0.0:
        raise ValueError(
            f"measured quadrature has non-positive variance {var}; state is corrupted"
        )
    outcome = state.mean[q] + math.sqrt(var) * rng.standard_normal()

    m = state.mode_index(mode)
    keep = np.array([i for i in range(2 * state.num_modes) if i // 2 != m], dtype=int)
    c = state.cov[keep, q]
    t = (outcome - state.mean[q]) / var
    mean = state.mean[keep] + c * t
    cov = state.cov[np.ix_(keep, keep)] - np.outer(c, c) / var
    labels = tuple(lbl for lbl in state.modes if lbl != mode)
    return float(outcome), GaussianState(labels, mean, cov)


def combination_variance(state, combo):
    """Variance of a quadrature combination: cᵀ·cov·c (mean-independent)."""
    c = combo.coefficient_vector(state)
    return float(c @ state.cov @ c)


def check_physicality(state_or_cov):
    """Symmetry and uncertainty-relation diagnostics for a covariance matrix.

    The eigenvalue floor is -1e-9 scaled by max(1, max|cov|): for order-1
    covariances this is the plain absolute criterion, while for strongly
    squeezed states it keeps the check meaningful within double precision
    (eigensolver noise grows with the matrix norm).
    """
    cov = state_or_cov.cov if isinstance(state_or_cov, GaussianState) else np.asarray(state_or_cov)
    n = cov.shape[0] // 2
    sym = float(np.abs(cov - cov.T).max())
    U = cov + 0.5j * omega(n)
    min_eig = float(np.linalg.eigvalsh(U).min())
    floor = EIGENVALUE_FLOOR * max(1.0, float(np.abs(cov).max()))
    return PhysicalityReport(sym, min_eig, floor)


# ---------------------------------------------------------------------------
# plumbing: relabeling, joining, serialization
# ---------------------------------------------------------------------------


def join_states(*states):
    """Tensor product of independent states (block-diagonal covariance)."""
    labels = _check_label_list([m for s in states for m in s.modes])
    n = sum(s.num_modes for s in states)
    mean = np.concatenate([s.mean for s in states])
    cov = np.zeros((2 * n, 2 * n))
    off = 0
    for s in states:
        d = 2 * s.num_modes
        cov[off : off + d, off : off + d] = s.cov
        off += d
    return GaussianState(labels, mean, cov)


def relabel(state, mapping):
    """Rename modes; mapping keys must be existing labels."""
    for old in mapping:
        state.mode_index(old)
    labels = tuple(mapping.get(m, m) for m in state.modes)
    return GaussianState(labels, state.mean, state.cov)


def reorder(state, labels):
    """Return the same state with modes listed in the given order."""
    labels = tuple(labels)
    if sorted(labels) != sorted(state.modes):
        raise ValueError(f"labels {labels} are not a permutation of {state.modes}")
    idx = np.concatenate([[state.quad_index(m, "X"), state.quad_index(m, "P")] for m in labels])
    return GaussianState(labels, state.mean[idx], state.cov[np.ix_(idx, idx)])


def state_to_json(state):
    """Canonical JSON document {"modes":[...],"mean":[...],"cov":[[...]]}."""
    return render({"modes": list(state.modes), "mean": state.mean, "cov": state.cov})


def state_from_json(text):
    doc = json.loads(text)
    try:
        return GaussianState(tuple(doc["modes"]), np.array(doc["mean"], dtype=float),
                             np.array(doc["cov"], dtype=float))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed state document: {exc}") from exc
