"""Message-passing realization of the protocol's distributed structure.

Five actors: an entanglement distributor, two input stations (signal,
idler) and two output stations.  Quantum modes live on one shared bench
(the nonlocality of interest is in the classical communication pattern,
not in simulating spacelike separation); classical messages travel through
a pluggable transport with per-sender FIFO, no loss and no duplication.

Each input station combines its resource mode with its input on a balanced
splitter, homodynes the two ports, and broadcasts the outcome pair to both
output stations.  An output station displaces its mode only once both
messages have arrived, so any interleaving of the two broadcasts yields
the same final state.  run_network reproduces run_protocol exactly under
the same seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from numpy.random import PCG64, Generator

from .gaussian import (
    apply_symplectic,
    balanced_combiner_map,
    displace,
    homodyne_measure,
    phase_flip_map,
    relabel,
    reorder,
)
from .jsonutil import render
from .protocol import (
    IDLER_OUT,
    SIGNAL_OUT,
    MeasurementRecord,
    RunResult,
    _ledger_pipeline,
    _wire_with_inputs,
    displacement_signal,
)
from .ledger import ledger_to_covariance

ROLES = ("distributor", "input_s", "input_i", "output_s", "output_i")
SENDER_ROLES = ("input_s", "input_i")


class ProtocolViolation(RuntimeError):
    """An event arrived that the station's phase does not allow."""


@dataclass(frozen=True)
class ClassicalMessage:
    seq: int
    sender: str
    x: float
    p: float


def encode_message(msg):
    """Canonical wire form: fixed key order, no whitespace, 17-digit floats."""
    if msg.sender not in SENDER_ROLES:
        raise ValueError(f"unknown sender role {msg.sender!r}")
    doc = {"seq": int(msg.seq), "from": msg.sender, "payload": {"x": msg.x, "p": msg.p}}
    return render(doc).encode("utf-8")


def _reject_constant(name):
    raise ValueError(f"non-finite payload constant {name!r}")


def decode_message(data):
    """Parse and validate a wire message; raises ValueError on any defect."""
    try:
        doc = json.loads(data.decode("utf-8"), parse_constant=_reject_constant)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"malformed message: {exc}") from exc
    if not isinstance(doc, dict) or set(doc) != {"seq", "from", "payload"}:
        raise ValueError(f"message must have exactly keys seq/from/payload, got {doc}")
    seq, sender, payload = doc["seq"], doc["from"], doc["payload"]
    if not isinstance(seq, int) or isinstance(seq, bool) or seq < 0:
        raise ValueError(f"seq must be a non-negative integer, got {seq!r}")
    if sender not in SENDER_ROLES:
        raise ValueError(f"unknown sender role {sender!r}")
    if not isinstance(payload, dict) or set(payload) != {"x", "p"}:
        raise ValueError(f"payload must have exactly keys x/p, got {payload!r}")
    values = {}
    for key in ("x", "p"):
        v = payload[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ValueError(f"payload {key} must be a finite number, got {v!r}")
        values[key] = float(v)
    return ClassicalMessage(seq=seq, sender=sender, x=values["x"], p=values["p"])


class InProcessTransport:
    """Reliable in-process broadcast transport (per-sender FIFO)."""

    def __init__(self):
        self._pending = []  # (sender, recipient, bytes) in send order

    def broadcast(self, sender, recipients, data):
        for recipient in recipients:
            self._pending.append((sender, recipient, data))

    def drain(self):
        """All pending deliveries in send order; clears the queue."""
        out, self._pending = self._pending, []
        return out


# ---------------------------------------------------------------------------
# events and the shared quantum bench
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PrepareResource:
    pass


@dataclass(frozen=True)
class EntanglementArrival:
    pass


@dataclass(frozen=True)
class LocalMeasurement:
    pass


@dataclass(frozen=True)
class MessageDelivery:
    message: ClassicalMessage


class QuantumBench:
    """Holder of the global Gaussian state and the run's RNG stream."""

    def __init__(self, rng, state=None):
        self.state = state
        self.rng = rng

    def apply(self, op, targets):
        self.state = apply_symplectic(self.state, op, targets)

    def relabel(self, mapping):
        self.state = relabel(self.state, mapping)

    def homodyne(self, mode, quad):
        outcome, self.state = homodyne_measure(self.state, mode, quad, self.rng)
        return outcome

    def displace(self, mode, dx, dp):
        self.state = displace(self.state, mode, dx, dp)


class Distributor:
    """Prepares the inputs and the entangled resource on the shared bench."""

    role = "distributor"

    def __init__(self, config):
        self.config = config
        self.phase = "ready"

    def reset(self):
        self.phase = "ready"

    def step(self, event, bench):
        if isinstance(event, PrepareResource):
            if self.phase != "ready":
                raise ProtocolViolation(f"distributor: cannot prepare in phase {self.phase}")
            state, _ = _wire_with_inputs(self.config)
            bench.state = state
            self.phase = "done"
            return []
        raise ProtocolViolation(f"distributor: cannot handle {type(event).__name__}")


class InputStation:
    """Measures its two splitter ports and broadcasts the outcome pair.

    port_plan fixes the wiring: ((sum_label, diff_label), first and second
    measured (port, quad)), matching the protocol's x/p definitions.
    """

    def __init__(self, role, resource_mode, input_mode, port_plan):
        self.role = role
        self.resource_mode = resource_mode
        self.input_mode = input_mode
        self.port_plan = port_plan
        self.phase = "await_entanglement"
        self._seq = 0

    def reset(self):
        self.phase = "await_entanglement"

    def step(self, event, bench):
        if isinstance(event, EntanglementArrival):
            if self.phase != "await_entanglement":
                raise ProtocolViolation(f"{self.role}: unexpected entanglement in {self.phase}")
            self.phase = "ready"
            return []
        if isinstance(event, LocalMeasurement):
            if self.phase != "ready":
                raise ProtocolViolation(f"{self.role}: cannot measure in phase {self.phase}")
            (sum_label, diff_label), first, second = self.port_plan
            bench.apply(balanced_combiner_map(), (self.resource_mode, self.input_mode))
            bench.relabel({self.resource_mode: sum_label, self.input_mode: diff_label})
            x = bench.homodyne(*first)
            p = bench.homodyne(*second)
            msg = ClassicalMessage(seq=self._seq, sender=self.role, x=x, p=p)
            self._seq += 1
            self.phase = "sent"
            return [msg]
        raise ProtocolViolation(f"{self.role}: cannot handle {type(event).__name__}")


class OutputStation:
    """Buffers both input-station messages, then displaces its mode."""

    def __init__(self, role, mode, out_label, gains, flip):
        self.role = role
        self.mode = mode
        self.out_label = out_label
        self.gains = gains
        self.flip = flip  # idler output is read through a π rotation
        self.phase = "await_entanglement"
        self.received = {}
        self._last_seq = {}

    def reset(self):
        self.phase = "await_entanglement"
        self.received = {}

    def step(self, event, bench):
        if isinstance(event, EntanglementArrival):
            if self.phase != "await_entanglement":
                raise ProtocolViolation(f"{self.role}: unexpected entanglement in {self.phase}")
            self.phase = "await_messages"
            return []
        if isinstance(event, MessageDelivery):
            if self.phase != "await_messages":
                raise ProtocolViolation(f"{self.role}: unexpected message in phase {self.phase}")
            msg = event.message
            last = self._last_seq.get(msg.sender)
            if last is not None and msg.seq <= last:
                raise ProtocolViolation(
                    f"{self.role}: non-increasing seq {msg.seq} from {msg.sender}"
                )
            if msg.sender in self.received:
                raise ProtocolViolation(f"{self.role}: duplicate message from {msg.sender}")
            self.received[msg.sender] = msg
            if set(self.received) == set(SENDER_ROLES):
                self._displace(bench)
                for sender, m in self.received.items():
                    self._last_seq[sender] = m.seq
                self.phase = "done"
            return []
        raise ProtocolViolation(f"{self.role}: cannot handle {type(event).__name__}")

    def _displace(self, bench):
        ms, mi = self.received["input_s"], self.received["input_i"]
        sig = displacement_signal(MeasurementRecord(ms.x, ms.p, mi.x, mi.p), self.gains)
        dx, dp = (sig.x_a3, sig.p_a3) if self.mode == "a3" else (sig.x_a4, sig.p_a4)
        bench.displace(self.mode, dx, dp)
        if self.flip:
            bench.apply(phase_flip_map(), (self.mode,))
        bench.relabel({self.mode: self.out_label})


def step_station(station, event, bench):
    """Advance one station; returns outbound classical messages."""
    return station.step(event, bench)


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------


def _fifo_ok(deliveries):
    seen = {}
    for sender, recipient, data in deliveries:
        key = (sender, recipient)
        order = seen.setdefault(key, [])
        order.append(data)
    return all(v == sorted(v, key=lambda d: json.loads(d)["seq"]) for v in seen.values())


def run_network(config, transport=None, interleave=None):
    """Run `shots` protocol rounds through the five stations.

    interleave, if given, reorders each round's drained deliveries (it must
    preserve per-sender FIFO); the final state is insensitive to the order.
    Returns (RunResult, transcript) where the transcript lists the canonical
    bytes of every delivery in delivery order.
    """
    if transport is None:
        transport = InProcessTransport()
    gains = config.effective_gains()

    station_s = InputStation(
        "input_s", "a1", "in_s", (("sum_s", "diff_s"), ("sum_s", "X"), ("diff_s", "P"))
    )
    station_i = InputStation(
        "input_i", "a2", "in_i", (("sum_i", "diff_i"), ("diff_i", "X"), ("sum_i", "P"))
    )
    out_s = OutputStation("output_s", "a3", SIGNAL_OUT, gains, flip=False)
    out_i = OutputStation("output_i", "a4", IDLER_OUT, gains, flip=True)
    stations = (station_s, station_i, out_s, out_i)

    rng = Generator(PCG64(config.seed))
    transcript = []
    outcomes = np.empty((config.shots, 4))
    shot_means = np.empty((config.shots, 4))
    cond_cov = None

    for shot in range(config.shots):
        for st in stations:
            st.reset()
        state, _ = _wire_with_inputs(config)
        bench = QuantumBench(state, rng)
        for st in stations:
            step_station(st, EntanglementArrival(), bench)
        for sender in (station_s, station_i):
            for msg in step_station(sender, LocalMeasurement(), bench):
                transport.broadcast(msg.sender, ("output_s", "output_i"), encode_message(msg))
        deliveries = transport.drain()
        if interleave is not None:
            deliveries = interleave(deliveries)
            if not _fifo_ok(deliveries):
                raise ProtocolViolation("interleaving violated per-sender FIFO")
        recipients = {"output_s": out_s, "output_i": out_i}
        for sender, recipient, data in deliveries:
            transcript.append(data)
            step_station(recipients[recipient], MessageDelivery(decode_message(data)), bench)
        if not all(st.phase in ("sent", "done") for st in stations):
            raise ProtocolViolation("round finished with stations still waiting")

        final = reorder(bench.state, (SIGNAL_OUT, IDLER_OUT))
        ms, mi = out_s.received["input_s"], out_s.received["input_i"]
        outcomes[shot] = (ms.x, ms.p, mi.x, mi.p)
        shot_means[shot] = final.mean
        cond_cov = final.cov

    led = _ledger_pipeline(config)
    mean, cov = ledger_to_covariance(led, (SIGNAL_OUT, IDLER_OUT))
    ff = gains.as_matrix()
    sampled_mean = shot_means.mean(axis=0)
    scatter = np.cov(shot_means.T, ddof=1) if config.shots > 1 else np.zeros((4, 4))
    result = RunResult(
        config=config, gains=gains, output_modes=(SIGNAL_OUT, IDLER_OUT),
        mean=mean, cov=cov, conditional_cov=cond_cov, outcomes=outcomes,
        signals=outcomes @ ff.T, shot_means=shot_means, sampled_mean=sampled_mean,
        sampled_cov=cond_cov + scatter, ledger=led,
    )
    return result, transcript
