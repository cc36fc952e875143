"""The nonlocal two-mode amplifier protocol.

Pipeline: two EPR pairs are mixed on a beam splitter of reflectivity R to
form the four-mode entangled resource a1..a4.  The signal and idler inputs
are each combined with one resource mode on a balanced splitter and
homodyned (x1, p1, x2, p2); the outcomes are broadcast classically and the
two remaining resource modes are displaced with outcome-proportional gains.
In the limit of perfect EPR correlations the displaced outputs realize a
two-mode amplifier of gain G = 1/(1-R); at finite squeezing they carry an
extra noise floor with a simple closed form.

Two engines run every configuration: a Monte Carlo covariance engine
(sampled homodyne outcomes, conditioned states, per-shot displacements) and
the exact Heisenberg ledger (operator bookkeeping, no sampling).  Their
agreement is the package's master consistency property.

Sign conventions: the displaced idler mode is read through a π phase
rotation (X, P -> -X, -P).  The rotation is a local redefinition of the
output mode with no observable effect, chosen so that the reported
transfer coefficients take the standard amplifier form
out_i = √(G-1)·in_s† + √G·in_i - (b_EPR2† + b_EPR1) + √(G-1)·(a_EPR1 + a_EPR2†).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.random import PCG64, Generator

from . import _kernels
from .gaussian import (
    GaussianState,
    InputSpec,
    QuadratureCombination,
    SymplecticOp,
    apply_symplectic,
    balanced_combiner_map,
    beam_splitter_map,
    check_physicality,
    displace,
    epr_factor,
    epr_state,
    homodyne_measure,
    input_factor,
    join_states,
    phase_flip_map,
    relabel,
    reorder,
    single_mode_state,
)
from .jsonutil import render
from .ledger import (
    BasisSpec,
    check_commutators,
    ledger_apply,
    ledger_new,
    ledger_relabel,
    ledger_to_covariance,
    measure_feedforward,
)

# Mode labels used throughout the pipeline.
SIGNAL_IN = "in_s"
IDLER_IN = "in_i"
RESOURCE = ("a1", "a2", "a3", "a4")
EPR_MODES = ("aEPR1", "aEPR2", "bEPR1", "bEPR2")
SIGNAL_OUT = "out_s"
IDLER_OUT = "out_i"

R_MAX = 1.0 - 1e-9


@dataclass(frozen=True)
class FeedforwardGains:
    """Scaling factors mapping homodyne outcomes to displacement signals."""

    g_x1_a3: float
    g_p1_a3: float
    g_x2_a3: float
    g_p2_a3: float
    g_x1_a4: float
    g_p1_a4: float
    g_x2_a4: float
    g_p2_a4: float

    def as_matrix(self):
        """Rows (x_a3, p_a3, x_a4, p_a4) applied to columns (x1, p1, x2, p2)."""
        return np.array(
            [
                [self.g_x1_a3, 0.0, self.g_x2_a3, 0.0],
                [0.0, self.g_p1_a3, 0.0, self.g_p2_a3],
                [self.g_x1_a4, 0.0, self.g_x2_a4, 0.0],
                [0.0, self.g_p1_a4, 0.0, self.g_p2_a4],
            ]
        )


def paper_gains(R):
    """Default feedforward gains for reflectivity R.

    g_x1_a3 = -g_p1_a3 = √(2/(1-R)),  g_x2_a3 = g_p2_a3 = -√(2R/(1-R)),
    g_x1_a4 = g_p1_a4 = -√(2R/(1-R)), g_x2_a4 = -g_p2_a4 = √(2/(1-R)).
    """
    R = float(R)
    if not 0.0 <= R < 1.0:
        raise ValueError(f"reflectivity must lie in [0, 1), got {R}")
    big = math.sqrt(2.0 / (1.0 - R))
    small = math.sqrt(2.0 * R / (1.0 - R))
    return FeedforwardGains(
        g_x1_a3=big, g_p1_a3=-big, g_x2_a3=-small, g_p2_a3=-small,
        g_x1_a4=-small, g_p1_a4=-small, g_x2_a4=big, g_p2_a4=-big,
    )


@dataclass(frozen=True)
class MeasurementRecord:
    """Homodyne outcomes of the two input stations."""

    x1: float
    p1: float
    x2: float
    p2: float


@dataclass(frozen=True)
class DisplacementSignal:
    """Modulated sum signals applied to the two output modes."""

    x_a3: float
    p_a3: float
    x_a4: float
    p_a4: float


def displacement_signal(record, gains):
    """Combine homodyne outcomes with the gains into displacement signals."""
    return DisplacementSignal(
        x_a3=gains.g_x1_a3 * record.x1 + gains.g_x2_a3 * record.x2,
        p_a3=gains.g_p1_a3 * record.p1 + gains.g_p2_a3 * record.p2,
        x_a4=gains.g_x1_a4 * record.x1 + gains.g_x2_a4 * record.x2,
        p_a4=gains.g_p1_a4 * record.p1 + gains.g_p2_a4 * record.p2,
    )


@dataclass(frozen=True)
class ProtocolConfig:
    """Full parameterization of one protocol run."""

    R: float = 0.5
    r1: float = 1.0
    r2: float = 1.0
    input_s: InputSpec = field(default_factory=InputSpec.vacuum)
    input_i: InputSpec = field(default_factory=InputSpec.vacuum)
    gains: FeedforwardGains = None  # None -> paper_gains(R)
    seed: int = 0
    shots: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.R) and 0.0 <= self.R <= R_MAX):
            raise ValueError(f"reflectivity must lie in [0, {R_MAX}], got {self.R}")
        for name, r in (("r1", self.r1), ("r2", self.r2)):
            if not (math.isfinite(r) and r >= 0.0):
                raise ValueError(f"{name} must be finite and >= 0, got {r}")
        if self.shots < 1:
            raise ValueError("shots must be >= 1")

    @property
    def gain(self):
        return 1.0 / (1.0 - self.R)

    def effective_gains(self):
        return self.gains if self.gains is not None else paper_gains(self.R)

    def to_dict(self):
        def spec_dict(spec):
            d = {"kind": spec.kind}
            if spec.kind == "coherent":
                d.update(mean_x=spec.mean_x, mean_p=spec.mean_p)
            if spec.kind == "squeezed":
                d.update(r=spec.r, squeezed_quad=spec.squeezed_quad)
            return d

        return {
            "R": self.R, "r1": self.r1, "r2": self.r2,
            "input_s": spec_dict(self.input_s), "input_i": spec_dict(self.input_i),
            "seed": self.seed, "shots": self.shots,
        }


# ---------------------------------------------------------------------------
# ideal amplifier reference
# ---------------------------------------------------------------------------


def ideal_nopa_map(G):
    """Two-mode amplifier symplectic of power gain G >= 1.

    X_s' = √G X_s + √(G-1) X_i,  P_s' = √G P_s - √(G-1) P_i (and the
    mirrored idler rows): amplification plus the conjugate-coupled noise
    that keeps the output commutators canonical.
    """
    G = float(G)
    if G < 1.0:
        raise ValueError(f"gain must be >= 1, got {G}")
    cg, sg = math.sqrt(G), math.sqrt(G - 1.0)
    return SymplecticOp(
        np.array(
            [
                [cg, 0.0, sg, 0.0],
                [0.0, cg, 0.0, -sg],
                [sg, 0.0, cg, 0.0],
                [0.0, -sg, 0.0, cg],
            ]
        )
    )


def ideal_nopa(state, G, targets=None):
    """Apply the ideal two-mode amplifier to a (signal, idler) mode pair."""
    if targets is None:
        if state.num_modes != 2:
            raise ValueError("targets required unless the state has exactly two modes")
        targets = state.modes
    return apply_symplectic(state, ideal_nopa_map(G), targets)


def ideal_reference(config):
    """Output state of the ideal amplifier fed with this config's inputs."""
    inputs = join_states(
        single_mode_state(config.input_s, SIGNAL_OUT),
        single_mode_state(config.input_i, IDLER_OUT),
    )
    return ideal_nopa(inputs, config.gain)


# ---------------------------------------------------------------------------
# resource construction
# ---------------------------------------------------------------------------

_RESOURCE_RELABEL = {"aEPR1": "a1", "aEPR2": "a2", "bEPR2": "a3", "bEPR1": "a4"}


def _resource_basis(r1, r2, input_s=None, input_i=None):
    """BasisSpec over (inputs +) EPR modes, with analytic cov factor."""
    modes, blocks, factors, means = [], [], [], []
    if input_s is not None:
        for label, spec in ((SIGNAL_IN, input_s), (IDLER_IN, input_i)):
            st = single_mode_state(spec, label)
            modes.append(label)
            blocks.append(st.cov)
            factors.append(input_factor(spec))
            means.append(st.mean)
    for pair, r in ((EPR_MODES[:2], r1), (EPR_MODES[2:], r2)):
        modes.extend(pair)
        blocks.append(epr_state(r, pair).cov)
        factors.append(epr_factor(r))
        means.append(np.zeros(4))
    n = sum(b.shape[0] for b in blocks)
    cov = np.zeros((n, n))
    factor = np.zeros((n, n))
    off = 0
    for b, f in zip(blocks, factors):
        d = b.shape[0]
        cov[off : off + d, off : off + d] = b
        factor[off : off + d, off : off + d] = f
        off += d
    return BasisSpec(tuple(modes), cov, mean=np.concatenate(means), factor=factor)


def build_four_mode_state(r1, r2, R):
    """Entangled four-mode resource from two EPR pairs and one splitter.

    Returns the same wiring in both engines: a GaussianState over a1..a4
    and a HeisenbergLedger whose basis is the four EPR modes.
    """
    bs = beam_splitter_map(R)

    state = join_states(epr_state(r1, EPR_MODES[:2]), epr_state(r2, EPR_MODES[2:]))
    state = apply_symplectic(state, bs, ("aEPR2", "bEPR2"))
    state = reorder(relabel(state, _RESOURCE_RELABEL), RESOURCE)

    led = ledger_new(_resource_basis(r1, r2))
    led = ledger_apply(led, bs, ("aEPR2", "bEPR2"))
    led = ledger_relabel(led, _RESOURCE_RELABEL)
    return state, led


def _wire_with_inputs(config):
    """Six-mode state and ledger: inputs plus the four-mode resource."""
    bs = beam_splitter_map(config.R)

    state = join_states(
        single_mode_state(config.input_s, SIGNAL_IN),
        single_mode_state(config.input_i, IDLER_IN),
        epr_state(config.r1, EPR_MODES[:2]),
        epr_state(config.r2, EPR_MODES[2:]),
    )
    state = apply_symplectic(state, bs, ("aEPR2", "bEPR2"))
    state = reorder(
        relabel(state, _RESOURCE_RELABEL), (SIGNAL_IN, IDLER_IN) + RESOURCE
    )

    led = ledger_new(_resource_basis(config.r1, config.r2, config.input_s, config.input_i))
    led = ledger_apply(led, bs, ("aEPR2", "bEPR2"))
    led = ledger_relabel(led, _RESOURCE_RELABEL)
    return state, led


# Station port labels and the fixed homodyne order (x1, p1, x2, p2).
PORT_SUM_S, PORT_DIFF_S = "sum_s", "diff_s"
PORT_SUM_I, PORT_DIFF_I = "sum_i", "diff_i"
MEASURED_QUADS = (
    (PORT_SUM_S, "X"),   # x1 = (X_a1 + X_in_s)/√2
    (PORT_DIFF_S, "P"),  # p1 = (P_a1 - P_in_s)/√2
    (PORT_DIFF_I, "X"),  # x2 = (X_a2 - X_in_i)/√2
    (PORT_SUM_I, "P"),   # p2 = (P_a2 + P_in_i)/√2
)
FEEDFORWARD_TARGETS = (("a3", "X"), ("a3", "P"), ("a4", "X"), ("a4", "P"))
OUTPUT_SIGNS = np.array([1.0, 1.0, -1.0, -1.0])  # π rotation of the idler
_OUTPUT_RELABEL = {"a3": SIGNAL_OUT, "a4": IDLER_OUT}


def apply_input_stations(state):
    """Combine (a1, in_s) and (a2, in_i) on balanced splitters.

    The resulting port modes carry exactly the measured operators listed in
    MEASURED_QUADS.
    """
    comb = balanced_combiner_map()
    state = apply_symplectic(state, comb, ("a1", SIGNAL_IN))
    state = relabel(state, {"a1": PORT_SUM_S, SIGNAL_IN: PORT_DIFF_S})
    state = apply_symplectic(state, comb, ("a2", IDLER_IN))
    state = relabel(state, {"a2": PORT_SUM_I, IDLER_IN: PORT_DIFF_I})
    return state


def _ledger_pipeline(config):
    """Exact engine: wiring, measurement + feedforward, output rotation."""
    gains = config.effective_gains()
    comb = balanced_combiner_map()
    _, led = _wire_with_inputs(config)
    led = ledger_apply(led, comb, ("a1", SIGNAL_IN))
    led = ledger_relabel(led, {"a1": PORT_SUM_S, SIGNAL_IN: PORT_DIFF_S})
    led = ledger_apply(led, comb, ("a2", IDLER_IN))
    led = ledger_relabel(led, {"a2": PORT_SUM_I, IDLER_IN: PORT_DIFF_I})
    led = measure_feedforward(led, MEASURED_QUADS, FEEDFORWARD_TARGETS, gains.as_matrix())
    led = ledger_apply(led, phase_flip_map(), ("a4",))
    return ledger_relabel(led, _OUTPUT_RELABEL)


@dataclass(frozen=True, eq=False)
class RunResult:
    """Outcome of one protocol run: exact moments plus sampled shots."""

    config: ProtocolConfig
    gains: FeedforwardGains
    output_modes: tuple
    mean: np.ndarray  # exact output means (X_s, P_s, X_i, P_i), ledger engine
    cov: np.ndarray  # exact unconditional output covariance, ledger engine
    conditional_cov: np.ndarray  # covariance engine: per-shot output covariance
    outcomes: np.ndarray  # (shots, 4) homodyne outcomes x1, p1, x2, p2
    signals: np.ndarray  # (shots, 4) displacement signals
    shot_means: np.ndarray  # (shots, 4) displaced output means per shot
    sampled_mean: np.ndarray
    sampled_cov: np.ndarray
    ledger: object

    @property
    def output_state(self):
        return GaussianState(self.output_modes, self.mean, self.cov)

    def records(self, limit=None):
        """Per-shot (MeasurementRecord, DisplacementSignal) transcripts."""
        n = self.outcomes.shape[0] if limit is None else min(limit, self.outcomes.shape[0])
        return [
            (MeasurementRecord(*self.outcomes[i]), DisplacementSignal(*self.signals[i]))
            for i in range(n)
        ]

    def to_json(self, max_records=16):
        doc = {
            "config": self.config.to_dict(),
            "gain": self.config.gain,
            "output_modes": list(self.output_modes),
            "mean": self.mean,
            "cov": self.cov,
            "conditional_cov": self.conditional_cov,
            "sampled_mean": self.sampled_mean,
            "sampled_cov": self.sampled_cov,
            "shots": int(self.outcomes.shape[0]),
            "records": [
                {
                    "x1": r.x1, "p1": r.p1, "x2": r.x2, "p2": r.p2,
                    "x_a3": s.x_a3, "p_a3": s.p_a3, "x_a4": s.x_a4, "p_a4": s.p_a4,
                }
                for r, s in self.records(max_records)
            ],
        }
        return render(doc)


def run_protocol(config, backend=None, validate=False):
    """Run the full protocol: ledger once, covariance engine for all shots."""
    gains = config.effective_gains()
    ff = gains.as_matrix()

    led = _ledger_pipeline(config)
    mean, cov = ledger_to_covariance(led, (SIGNAL_OUT, IDLER_OUT))

    state, _ = _wire_with_inputs(config)
    combined = apply_input_stations(state)
    meas_idx = [combined.quad_index(m, q) for m, q in MEASURED_QUADS]
    out_idx = [combined.quad_index(m, q) for m, q in FEEDFORWARD_TARGETS]
    outcomes, shot_means, cond_cov = _kernels.simulate_shots(
        combined.mean, combined.cov, meas_idx, out_idx, ff, OUTPUT_SIGNS,
        config.shots, config.seed, backend=backend,
    )
    signals = outcomes @ ff.T
    sampled_mean = shot_means.mean(axis=0)
    if config.shots > 1:
        scatter = np.cov(shot_means.T, ddof=1)
    else:
        scatter = np.zeros((4, 4))
    result = RunResult(
        config=config, gains=gains, output_modes=(SIGNAL_OUT, IDLER_OUT),
        mean=mean, cov=cov, conditional_cov=cond_cov, outcomes=outcomes,
        signals=signals, shot_means=shot_means, sampled_mean=sampled_mean,
        sampled_cov=cond_cov + scatter, ledger=led,
    )
    if validate:
        _validate_run(config, result)
    return result


def protocol_stage_states(config, rng=None):
    """One explicit pass through the covariance engine, stage by stage.

    Returns [(label, GaussianState), ...] covering source preparation, the
    input stations, every conditional state after each homodyne, and the
    displaced outputs.  Used for physicality audits; the sampling path is
    identical to one shot of run_protocol.
    """
    if rng is None:
        rng = Generator(PCG64(config.seed))
    gains = config.effective_gains()
    stages = []
    state, _ = _wire_with_inputs(config)
    stages.append(("sources+resource", state))
    state = apply_input_stations(state)
    stages.append(("input stations combined", state))
    outcomes = []
    for mode, quad in MEASURED_QUADS:
        value, state = homodyne_measure(state, mode, quad, rng)
        outcomes.append(value)
        stages.append((f"after homodyne {quad}({mode})", state))
    sig = displacement_signal(MeasurementRecord(*outcomes), gains)
    state = displace(state, "a3", sig.x_a3, sig.p_a3)
    state = displace(state, "a4", sig.x_a4, sig.p_a4)
    state = apply_symplectic(state, phase_flip_map(), ("a4",))
    state = reorder(relabel(state, _OUTPUT_RELABEL), (SIGNAL_OUT, IDLER_OUT))
    stages.append(("displaced outputs", state))
    return stages


def _validate_run(config, result):
    for label, state in protocol_stage_states(config):
        report = check_physicality(state)
        if not report.passed:
            raise ValueError(f"unphysical state at stage {label!r}: {report}")
    report = check_physicality(result.output_state)
    if not report.passed:
        raise ValueError(f"unphysical analytic output state: {report}")
    comm = check_commutators(result.ledger)
    if not comm.passed:
        raise ValueError(f"output commutators violated: {comm}")


# ---------------------------------------------------------------------------
# closed-form reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransferReport:
    """Exact output-quadrature coefficients over the source basis."""

    R: float
    gain: float
    row_labels: tuple  # e.g. ("out_s.X", "out_s.P", "out_i.X", "out_i.P")
    basis_labels: tuple  # e.g. ("in_s.X", "in_s.P", ...)
    matrix: np.ndarray  # (4, 2M)

    def coefficient(self, row, basis_entry):
        """row and basis_entry are (mode, quad) pairs."""
        r = f"{row[0]}.{str(row[1]).upper()}"
        b = f"{basis_entry[0]}.{str(basis_entry[1]).upper()}"
        return float(self.matrix[self.row_labels.index(r), self.basis_labels.index(b)])


def transfer_report(config):
    """Ledger coefficients of the output quadratures on every source quadrature."""
    led = _ledger_pipeline(config)
    rows = [(m, q) for m in (SIGNAL_OUT, IDLER_OUT) for q in ("X", "P")]
    matrix = np.array([led.row(m, q) for m, q in rows])
    return TransferReport(
        R=config.R,
        gain=config.gain,
        row_labels=tuple(f"{m}.{q}" for m, q in rows),
        basis_labels=tuple(f"{m}.{q}" for m in led.basis.modes for q in ("X", "P")),
        matrix=matrix,
    )


@dataclass(frozen=True)
class AddedNoise:
    """Excess output variances beyond the ideal amplifier (vacuum inputs)."""

    out_s_x: float
    out_s_p: float
    out_i_x: float
    out_i_p: float


def added_noise(r1, r2, R):
    """Closed-form excess noise at finite squeezing.

    excess(out_s) = (2/(1-R))·e^{-2 r1} on both quadratures;
    excess(out_i) = 2·e^{-2 r2} + (2R/(1-R))·e^{-2 r1} on both quadratures.
    """
    if not 0.0 <= R < 1.0:
        raise ValueError(f"reflectivity must lie in [0, 1), got {R}")
    e1, e2 = math.exp(-2.0 * r1), math.exp(-2.0 * r2)
    s = 2.0 / (1.0 - R) * e1
    i = 2.0 * e2 + 2.0 * R / (1.0 - R) * e1
    return AddedNoise(out_s_x=s, out_s_p=s, out_i_x=i, out_i_p=i)


# ---------------------------------------------------------------------------
# Monte Carlo consistency
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConsistencyZScores:
    """Sampled-vs-exact moment deviations in units of standard error."""

    mean_z: np.ndarray  # (4,)
    cov_z: np.ndarray  # (4, 4)

    @property
    def max_abs(self):
        return float(max(np.abs(self.mean_z).max(), np.abs(self.cov_z).max()))


def consistency_zscores(result):
    """Compare sampled output moments against the exact ledger moments.

    The conditional covariance is exact; all sampling error lives in the
    scatter of the per-shot displaced means, so standard errors derive from
    the scatter matrix (Gaussian formulas, n shots).
    """
    n = result.shot_means.shape[0]
    if n < 2:
        raise ValueError("need at least 2 shots for z-scores")
    scatter = result.sampled_cov - result.conditional_cov

    def safe_div(num, se):
        out = np.zeros_like(num)
        nz = se > 0
        out[nz] = num[nz] / se[nz]
        out[~nz & (np.abs(num) > 0)] = np.inf
        return out

    se_mean = np.sqrt(np.clip(np.diag(scatter), 0.0, None) / n)
    mean_z = safe_div(result.sampled_mean - result.mean, se_mean)
    d = np.clip(np.diag(scatter), 0.0, None)
    se_cov = np.sqrt((np.outer(d, d) + scatter**2) / (n - 1))
    cov_z = safe_div(result.sampled_cov - result.cov, se_cov)
    return ConsistencyZScores(mean_z=mean_z, cov_z=cov_z)


def resource_criteria_combination(kind, R):
    """The three-mode combinations whose variances certify the resource.

    kind selects one of the four: 'x_signal', 'x_idler', 'p_signal',
    'p_idler'.  Exposed here for reuse; the criteria module wraps these
    with bounds and evaluation.
    """
    sr, st = math.sqrt(R), math.sqrt(1.0 - R)
    combos = {
        "x_signal": (("a1", "X", 1.0), ("a2", "X", -sr), ("a3", "X", st)),
        "x_idler": (("a2", "X", st), ("a3", "X", sr), ("a4", "X", 1.0)),
        "p_signal": (("a1", "P", 1.0), ("a2", "P", sr), ("a3", "P", -st)),
        "p_idler": (("a2", "P", st), ("a3", "P", sr), ("a4", "P", -1.0)),
    }
    return QuadratureCombination(combos[kind])
