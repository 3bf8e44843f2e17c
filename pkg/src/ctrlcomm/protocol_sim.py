"""Round-by-round execution of protocols through the simulated B-H plant.

A round lasts one unit of time. In a single round protocol the agents just
play their open-loop controls. In the two-phase protocol they first resolve
which partition block they are in by signalling bits through the plant
itself (each bit is a tiny closed loop whose orientation the receiver reads
off the shared output z), then play the cheapest controls for that block's
value.

Choice indices (i, j) are 0-based.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional

import numpy as np

from .bh_system import DEFAULT_STEPS, Trajectory, simulate_bh
from .controls import ControlSignal
from .errors import DecodeError, InvalidInputError, PreconditionError
from .partition import Leaf, MatrixPartition, ProtocolTree, is_monochromatic, validate_partition
from .synthesis import ProtocolSolution, target_array

Observation = Literal["full-state", "z-sign", "z-quantized"]
Speaker = Literal["alice", "bob"]

SIGNAL_T1 = 0.5


@dataclass(frozen=True)
class RoundConfig:
    steps_per_round: int = DEFAULT_STEPS
    observation: Observation = "z-sign"
    levels: int = 2  # quantizer levels, used with "z-quantized"
    z_range: float = 1.0  # quantizer full scale: codes cover [-z_range, z_range]
    tolerance: float = 1e-6

    def __post_init__(self):
        if self.steps_per_round < 100:
            raise PreconditionError(f"steps_per_round must be >= 100, got {self.steps_per_round}")
        if self.observation not in ("full-state", "z-sign", "z-quantized"):
            raise InvalidInputError(f"unknown observation mode {self.observation!r}")
        if self.observation == "z-quantized" and self.levels < 2:
            raise PreconditionError(f"quantizer needs at least 2 levels, got {self.levels}")
        if self.z_range <= 0 or self.tolerance <= 0:
            raise PreconditionError("z_range and tolerance must be positive")


@dataclass(frozen=True)
class RunOutcome:
    choice: tuple[int, int]
    final_output: float
    target: float
    bits_exchanged: int
    control_energy: float
    rounds_used: int
    realized: bool
    transcript: tuple[dict, ...] = ()
    trajectory: Optional[Trajectory] = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "choice": list(self.choice),
            "final_output": self.final_output,
            "target": self.target,
            "bits_exchanged": self.bits_exchanged,
            "control_energy": self.control_energy,
            "rounds_used": self.rounds_used,
            "realized": self.realized,
        }


def transcript_jsonl(outcome: RunOutcome) -> str:
    """One JSON object per round."""
    return "".join(json.dumps(r) + "\n" for r in outcome.transcript)


def control_energy(u: Callable, v: Callable, times: np.ndarray) -> float:
    """Trapezoid quadrature of u^2 + v^2 on the simulation grid."""
    w = np.asarray(u(times), dtype=float) ** 2 + np.asarray(v(times), dtype=float) ** 2
    return float(np.trapezoid(w, times))


def _concat(parts: list[Trajectory]) -> Trajectory:
    """Join consecutive pieces, shifting each onto the end time of the previous one."""
    times, states = [parts[0].times], [parts[0].states]
    for p in parts[1:]:
        times.append(p.times[1:] - p.times[0] + times[-1][-1])
        states.append(p.states[1:])
    return Trajectory(times=np.concatenate(times), states=np.concatenate(states))


# ---------------------------------------------------------------------------
# single round


def run_single_round(
    sol: ProtocolSolution, i: int, j: int, cfg: RoundConfig = RoundConfig(), target: Optional[float] = None
) -> RunOutcome:
    """Play (u_i, v_j) for one unit round from the origin."""
    m, n = sol.shape
    if not (0 <= i < m and 0 <= j < n):
        raise InvalidInputError(f"choice ({i}, {j}) out of range for a {m}x{n} protocol")
    if target is None:
        tgt = sol.meta.get("target")
        if tgt is None:
            raise PreconditionError("solution carries no target; pass target explicitly")
        target = float(np.asarray(tgt)[i, j])
    u = ControlSignal("alice", sol.alice[i])
    v = ControlSignal("bob", sol.bob[j])
    traj = simulate_bh(u, v, cfg.steps_per_round)
    energy = control_energy(u, v, traj.times)
    z = traj.final_z
    record = {"round": 0, "phase": 2, "speaker": None, "bit": None, "z_end": z, "cumulative_energy": energy}
    return RunOutcome(
        choice=(i, j),
        final_output=z,
        target=float(target),
        bits_exchanged=0,
        control_energy=energy,
        rounds_used=1,
        realized=abs(z - target) <= cfg.tolerance,
        transcript=(record,),
        trajectory=traj,
    )


# ---------------------------------------------------------------------------
# epsilon signalling


def _lobe(r: float, s_u: float, s_v: float):
    return (
        lambda t: s_u * r * np.cos(4.0 * np.pi * np.asarray(t)),
        lambda t: s_v * r * np.sin(4.0 * np.pi * np.asarray(t)),
    )


@dataclass(frozen=True, eq=False)
class EpsilonSignal:
    """A one-bit message sent through the plant at energy cost below ``epsilon``.

    Over [0, t1] the pair (u, v) traces a small closed loop whose orientation
    is the bit; over [t1, t2] it traces a loop of the opposite orientation,
    so the state comes back to where it started. The speaker modulates its
    own control and the listener plays a fixed carrier.
    """

    epsilon: float
    bit: int
    speaker: Speaker
    amplitude: float
    first_half: tuple = field(repr=False)  # (u, v) on [0, t1]
    second_half: tuple = field(repr=False)  # (u, v) on [t1, t2]
    t1: float = SIGNAL_T1
    t2: float = 1.0

    def alice_signal(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t < self.t1, self.first_half[0](t), self.second_half[0](t))

    def bob_signal(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t < self.t1, self.first_half[1](t), self.second_half[1](t))

    @property
    def energy(self) -> float:
        # u^2 + v^2 = r^2 at every instant
        return self.amplitude**2 * self.t2

    @property
    def expected_z_t1(self) -> float:
        """z(t1) for this bit starting from rest: +r^2/(8 pi) for bit 0, minus for bit 1."""
        sign = 1.0 if self.bit == 0 else -1.0
        return sign * self.amplitude**2 / (8.0 * math.pi)


def make_epsilon_signal(epsilon: float, bit: int, speaker: Speaker = "alice") -> EpsilonSignal:
    """Two-lobe signal with total energy epsilon / 2.

    First half: u = s r cos(4 pi t), v = r sin(4 pi t), which loops once and
    raises z by s r^2 / (8 pi). The second half flips the speaker's sign and
    undoes it. Bit 0 means s = +1. When Bob speaks the sign sits on v instead.
    """
    if not (epsilon > 0 and math.isfinite(epsilon)):
        raise PreconditionError(f"epsilon must be positive and finite, got {epsilon}")
    if bit not in (0, 1):
        raise InvalidInputError(f"bit must be 0 or 1, got {bit}")
    if speaker not in ("alice", "bob"):
        raise InvalidInputError(f"speaker must be 'alice' or 'bob', got {speaker!r}")
    r = math.sqrt(epsilon / 2.0)
    s = 1.0 if bit == 0 else -1.0
    if speaker == "alice":
        first, second = _lobe(r, s, 1.0), _lobe(r, -s, 1.0)
    else:
        first, second = _lobe(r, 1.0, s), _lobe(r, 1.0, -s)
    return EpsilonSignal(epsilon=epsilon, bit=bit, speaker=speaker, amplitude=r, first_half=first, second_half=second)


@dataclass(frozen=True)
class SignalRun:
    state_t1: np.ndarray
    state_end: np.ndarray
    energy: float
    trajectory: Trajectory


def run_epsilon_signal(sig: EpsilonSignal, steps: int = DEFAULT_STEPS, x0=(0.0, 0.0, 0.0)) -> SignalRun:
    """Simulate the two halves separately so the switch at t1 lands on a grid node."""
    half = max(100, steps // 2)
    first = simulate_bh(*sig.first_half, half, x0, (0.0, sig.t1))
    second = simulate_bh(*sig.second_half, half, tuple(first.final), (sig.t1, sig.t2))
    energy = control_energy(*sig.first_half, first.times) + control_energy(*sig.second_half, second.times)
    return SignalRun(first.final.copy(), second.final.copy(), energy, _concat([first, second]))


def decode_bit(state_t1: np.ndarray, sig_amplitude: float, cfg: RoundConfig, z_before: float = 0.0) -> int:
    """Receiver's estimate of the bit from its observation at t1.

    ``z_before`` is the output level at the start of the round, which the
    receiver already knows.
    """
    dz = float(state_t1[2]) - z_before
    if cfg.observation == "full-state":
        # nearest of the two reference states the receiver can precompute
        ref = sig_amplitude**2 / (8.0 * math.pi)
        d0 = abs(dz - ref) + abs(state_t1[0]) + abs(state_t1[1])
        d1 = abs(dz + ref) + abs(state_t1[0]) + abs(state_t1[1])
        if d0 == d1:
            raise DecodeError("full-state observation is equidistant from both bit states")
        return 0 if d0 < d1 else 1
    if cfg.observation == "z-sign":
        if dz == 0.0:
            raise DecodeError("z did not move: sign observation cannot separate the bits")
        return 0 if dz > 0 else 1
    # uniform mid-rise/mid-tread quantizer over [-z_range, z_range]
    width = 2.0 * cfg.z_range / cfg.levels
    code = int(np.clip(math.floor((dz + cfg.z_range) / width), 0, cfg.levels - 1))
    center = -cfg.z_range + (code + 0.5) * width
    if abs(center) < 1e-15 * cfg.z_range:
        raise DecodeError(
            f"quantizer with {cfg.levels} levels over +/-{cfg.z_range:g} maps z change {dz:.3e} to its zero level"
        )
    return 0 if center > 0 else 1


# ---------------------------------------------------------------------------
# two-phase protocol


def _block_controls(value: float) -> tuple[ControlSignal, ControlSignal]:
    """Cheapest single-target pair: u = sgn(h) c cos, v = c sin, c = sqrt(2 pi |h|)."""
    c = math.sqrt(2.0 * math.pi * abs(value)) / math.sqrt(2.0)
    return ControlSignal("alice", [0.0, math.copysign(c, value)]), ControlSignal("bob", [0.0, c])


def run_two_phase(
    tree: ProtocolTree,
    p: MatrixPartition,
    h,
    i: int,
    j: int,
    epsilon: float,
    cfg: RoundConfig = RoundConfig(),
    keep_trajectory: bool = False,
) -> RunOutcome:
    """Resolve the block by epsilon-signalling down ``tree``, then realize its value."""
    a = target_array(h)
    m, n = a.shape
    if not (0 <= i < m and 0 <= j < n):
        raise InvalidInputError(f"choice ({i}, {j}) out of range for a {m}x{n} target")
    if not (epsilon > 0 and math.isfinite(epsilon)):
        raise PreconditionError(f"epsilon must be positive and finite, got {epsilon}")
    if not validate_partition(a, p):
        raise PreconditionError("partition does not cover the target exactly once")
    for k, b in enumerate(p.blocks):
        if not is_monochromatic(a, b):
            raise PreconditionError(f"block {k} is not monochromatic")

    state = np.zeros(3)
    energy = 0.0
    transcript = []
    parts = []
    node = tree.root
    rnd = 0
    while not isinstance(node, Leaf):
        choice = i if node.speaker == "alice" else j
        bit = 0 if choice in node.zero_set else 1
        sig = make_epsilon_signal(epsilon, bit, node.speaker)
        run = run_epsilon_signal(sig, cfg.steps_per_round, tuple(state))
        decoded = decode_bit(run.state_t1, sig.amplitude, cfg, z_before=float(state[2]))
        if decoded != bit:
            raise DecodeError(f"round {rnd}: {node.speaker} sent {bit} but the listener decoded {decoded}")
        energy += run.energy
        transcript.append(
            {
                "round": rnd,
                "phase": 1,
                "speaker": node.speaker,
                "bit": bit,
                "decoded": decoded,
                "z_t1": float(run.state_t1[2]),
                "z_end": float(run.state_end[2]),
                "state_end": [float(x) for x in run.state_end],
                "energy": run.energy,
                "cumulative_energy": energy,
            }
        )
        parts.append(run.trajectory)
        state = run.state_end
        node = node.zero if bit == 0 else node.one
        rnd += 1

    block = p.blocks[node.block]
    if not (i in block.rows and j in block.cols):
        raise DecodeError(f"bit exchange ended at block {node.block}, which does not contain ({i}, {j})")
    value = float(block.submatrix(a)[0, 0])
    u, v = _block_controls(value)
    traj = simulate_bh(u, v, cfg.steps_per_round, tuple(state))
    e2 = control_energy(u, v, traj.times)
    energy += e2
    parts.append(traj)
    z = traj.final_z
    transcript.append(
        {"round": rnd, "phase": 2, "speaker": None, "bit": None, "block": node.block, "value": value,
         "z_end": z, "energy": e2, "cumulative_energy": energy}
    )
    target = float(a[i, j])
    return RunOutcome(
        choice=(i, j),
        final_output=z,
        target=target,
        bits_exchanged=2 * rnd,
        control_energy=energy,
        rounds_used=rnd + 1,
        # signalling leaves residues of order epsilon times integrator error; allow epsilon slack
        realized=abs(z - target) <= cfg.tolerance + epsilon,
        transcript=tuple(transcript),
        trajectory=_concat(parts) if keep_trajectory else None,
    )


def run_all_pairs(tree, p, h, epsilon: float, cfg: RoundConfig = RoundConfig()) -> list[RunOutcome]:
    """Two-phase runs for every choice pair in (i, j) lexicographic order."""
    m, n = target_array(h).shape
    return [run_two_phase(tree, p, h, i, j, epsilon, cfg) for i in range(m) for j in range(n)]


def average_two_phase_cost(tree, p, h, epsilon: float, cfg: RoundConfig = RoundConfig()) -> float:
    """Mean simulated control energy over all choice pairs."""
    runs = run_all_pairs(tree, p, h, epsilon, cfg)
    return float(np.mean([r.control_energy for r in runs]))
