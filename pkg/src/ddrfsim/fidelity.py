"""Gate fidelities: exact unitary comparison, bath channels and composition."""

from __future__ import annotations

import enum
import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import spinalg as sa
from .evolution import ConditionalEvolution, corrected_evolution
from .system import DdrfSequence, NodeConfig, NuclearSpinParams, Role, derive_omega1

MAX_ENUMERATED_BATHS = 12

P0 = np.diag([1, 0]).astype(complex)
P1 = np.diag([0, 1]).astype(complex)


class FidelityModel(str, enum.Enum):
    EXACT_GATE = "exactGate"
    KRAUS_BATH = "krausBath"
    SINC_APPROX = "sincApprox"
    COMPOSED = "composed"


def _digest(inputs) -> str:
    blob = json.dumps(inputs, sort_keys=True, default=repr).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class FidelityReport:
    fidelity: float
    infidelity: float
    model: FidelityModel
    digest: str = ""
    details: dict = field(default_factory=dict, compare=False)

    @classmethod
    def of(cls, fidelity: float, model: FidelityModel, inputs=None, **details) -> "FidelityReport":
        f = float(fidelity)
        return cls(f, 1.0 - f, FidelityModel(model), _digest(inputs), details)


@dataclass(frozen=True)
class MultiSpinGate:
    """Electron-block-diagonal unitary over electron x (ordered nuclei)."""

    matrix: np.ndarray
    labels: tuple[str, ...]

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_spins(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class BathSpinOverlaps:
    """Amplitudes ``a_j = <up|Psi_j>`` and ``b_j = <down|Psi_j>``."""

    a0: complex
    b0: complex
    a1: complex
    b1: complex

    def __post_init__(self):
        for j, (a, b) in enumerate(((self.a0, self.b0), (self.a1, self.b1))):
            if abs(abs(a) ** 2 + abs(b) ** 2 - 1.0) > 1e-10:
                raise ValueError(f"bath state for electron branch {j} is not normalised")

    @classmethod
    def from_states(cls, psi0, psi1) -> "BathSpinOverlaps":
        return cls(complex(psi0[0]), complex(psi0[1]), complex(psi1[0]), complex(psi1[1]))

    def amplitudes(self, j: int) -> tuple[complex, complex]:
        return (self.a0, self.b0) if j == 0 else (self.a1, self.b1)

    @property
    def overlap(self) -> complex:
        """``<Psi_1|Psi_0>``."""
        return np.conj(self.a1) * self.a0 + np.conj(self.b1) * self.b0


def gate_fidelity(v_ideal: np.ndarray, v_actual: np.ndarray) -> FidelityReport:
    """Average gate fidelity ``(d + |Tr V_ideal^dag V_actual|^2) / (d (d+1))``."""
    v_ideal = np.asarray(v_ideal, dtype=complex)
    v_actual = np.asarray(v_actual, dtype=complex)
    if v_ideal.shape != v_actual.shape or v_ideal.shape[0] != v_ideal.shape[1]:
        raise ValueError(f"dimension mismatch: {v_ideal.shape} vs {v_actual.shape}")
    for name, m in (("v_ideal", v_ideal), ("v_actual", v_actual)):
        if sa.unitarity_defect(m) > 1e-8:
            raise ValueError(f"{name} is not unitary")
    d = v_ideal.shape[0]
    tr = abs(np.trace(sa.dagger(v_ideal) @ v_actual))
    f = (d + tr ** 2) / (d * (d + 1))
    return FidelityReport.of(min(f, 1.0), FidelityModel.EXACT_GATE, {"d": d, "trace": tr})


def ideal_crot(spectators: int = 0) -> np.ndarray:
    """Controlled ``Rx(+-pi/2)`` on the first nucleus, identity on the rest."""
    if spectators < 0:
        raise ValueError("spectators must be >= 0")
    rest = np.eye(2 ** spectators, dtype=complex)
    return (sa.kron(P0, sa.rx(math.pi / 2), rest)
            + sa.kron(P1, sa.rx(-math.pi / 2), rest))


def block_gate(blocks0, blocks1) -> np.ndarray:
    """``|0><0| x (x) blocks0 + |1><1| x (x) blocks1``."""
    return sa.kron(P0, *blocks0) + sa.kron(P1, *blocks1)


def assemble_gate(evs: list[ConditionalEvolution]) -> MultiSpinGate:
    if not evs:
        raise ValueError("need at least one conditional evolution")
    if len({ev.phase_corrected for ev in evs}) > 1:
        raise ValueError("cannot mix phase-corrected and uncorrected evolutions")
    if any(ev.sequence != evs[0].sequence for ev in evs):
        raise ValueError("all evolutions must come from the same sequence")
    m = block_gate([ev.v0 for ev in evs], [ev.v1 for ev in evs])
    return MultiSpinGate(m, tuple(ev.label for ev in evs))


def elementary_fidelity(register: list[NuclearSpinParams], seq: DdrfSequence) -> FidelityReport:
    """CROT fidelity of ``seq`` on ``register[0]`` with the rest as spectators."""
    evs = [corrected_evolution(s, seq) for s in register]
    gate = assemble_gate(evs)
    rep = gate_fidelity(ideal_crot(len(register) - 1), gate.matrix)
    return FidelityReport.of(rep.fidelity, FidelityModel.EXACT_GATE,
                             {"spins": [repr(s) for s in register], "seq": repr(seq)})


# --- bath channel -----------------------------------------------------------

def _bath_coefficients(baths: list[BathSpinOverlaps]) -> np.ndarray:
    """``c_j p_j`` for every environment basis state; shape ``(2**n, 2)``.

    Bit 0 of a spin assigns it to up (``a_j``), bit 1 to down (``b_j``).
    """
    n = len(baths)
    coeff = np.ones((2 ** n, 2), dtype=complex)
    for i, bits in enumerate(itertools.product((0, 1), repeat=n)):
        for j in (0, 1):
            for bit, bath in zip(bits, baths):
                coeff[i, j] *= bath.amplitudes(j)[bit]
    return coeff


def bath_fidelity(k: int, baths: list[BathSpinOverlaps]) -> FidelityReport:
    """Target-subspace fidelity with ``k`` register spins and the given baths.

    Sums over all ``2**len(baths)`` environment basis states; beyond
    ``MAX_ENUMERATED_BATHS`` the equivalent product form is used.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    inputs = {"k": k, "baths": [repr(b) for b in baths]}
    if len(baths) > MAX_ENUMERATED_BATHS:
        f = min(bath_fidelity_product(k, baths), 1.0)
        return FidelityReport.of(f, FidelityModel.KRAUS_BATH, inputs, method="product")
    coeff = _bath_coefficients(baths)
    total = float(np.sum(np.abs(coeff.sum(axis=1)) ** 2))
    # clip rounding overshoot from propagated (not exactly normalised) states
    f = min((1 + 2 ** (k - 1) * total) / (2 ** (k + 1) + 1), 1.0)
    return FidelityReport.of(f, FidelityModel.KRAUS_BATH, inputs, method="enumeration")


def bath_fidelity_product(k: int, baths: list[BathSpinOverlaps]) -> float:
    overlap = np.prod([b.overlap for b in baths]) if baths else 1.0
    return (1 + 2 ** (k - 1) * (2 + 2 * np.real(overlap))) / (2 ** (k + 1) + 1)


def kraus_operators(target_blocks, baths: list[BathSpinOverlaps]) -> list[np.ndarray]:
    """Kraus operators of the partial trace over the bath spins.

    ``target_blocks[j]`` lists the register-spin rotations for electron
    branch ``j``.
    """
    coeff = _bath_coefficients(baths)
    g0 = sa.kron(P0, *target_blocks[0])
    g1 = sa.kron(P1, *target_blocks[1])
    return [c0 * g0 + c1 * g1 for c0, c1 in coeff]


def channel_fidelity(u0: np.ndarray, kraus: list[np.ndarray]) -> float:
    """Operator-sum gate fidelity of a channel against the unitary ``u0``."""
    d = u0.shape[0]
    total = 0.0
    for e in kraus:
        m = sa.dagger(u0) @ e
        total += np.trace(sa.dagger(m) @ m).real + abs(np.trace(m)) ** 2
    return total / (d * (d + 1))


def bath_overlaps_from_sequence(
    bath_spin: NuclearSpinParams,
    seq: DdrfSequence,
    target_omega1: float | None = None,
) -> BathSpinOverlaps:
    """Final bath states ``V_j |up>`` under a sequence tuned to another spin."""
    if bath_spin.role is not Role.BATH:
        raise ValueError(f"spin {bath_spin.label!r} has role {bath_spin.role.value!r}, expected 'bath'")
    ev = corrected_evolution(bath_spin, seq, target_omega1)
    return BathSpinOverlaps.from_states(*ev.final_states())


def sinc_infidelity(a_par_bar, a_par_res, seq: DdrfSequence):
    """``sinc^2(N (A - A_res) tau / 2)`` with unnormalised sinc."""
    x = seq.n_pulses * (np.asarray(a_par_bar) - a_par_res) * seq.tau / 2
    return np.sinc(x / np.pi) ** 2


def unaddressed_error(ev: ConditionalEvolution) -> tuple[float, float]:
    """``(1 - |<Psi0|Psi1>|^2, 5 (1 - F_bath))`` for an initial up state."""
    if not ev.phase_corrected:
        raise ValueError("unaddressed_error expects a phase-corrected evolution")
    ov = BathSpinOverlaps.from_states(*ev.final_states())
    f = bath_fidelity(1, [ov]).fidelity
    return 1.0 - abs(ov.overlap) ** 2, 5.0 * (1.0 - f)


# --- composition ------------------------------------------------------------

def compose_total(f_ee: float, f_enn_a, f_enn_b, p: int) -> FidelityReport:
    """Uncorrelated-error product ``F_ee^p * prod(F_a) * prod(F_b)``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    f_enn_a, f_enn_b = list(f_enn_a), list(f_enn_b)
    if len(f_enn_a) != p or len(f_enn_b) != p:
        raise ValueError("need one elementary fidelity per pair and node")
    for x in [f_ee, *f_enn_a, *f_enn_b]:
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"fidelity factor {x!r} outside [0, 1]")
    f = f_ee ** p * math.prod(f_enn_a) * math.prod(f_enn_b)
    return FidelityReport.of(f, FidelityModel.COMPOSED,
                             {"f_ee": f_ee, "a": f_enn_a, "b": f_enn_b, "p": p})


@dataclass(frozen=True)
class FactorizationCheck:
    f_composed: float
    f_product: float
    gap: float
    f_elementary: tuple[float, float]
    assumptions: tuple[str, ...] = (
        "electron ideally reset between rounds: each round is controlled by a fresh electron qubit",
    )


def sequential_factorization_check(
    node: NodeConfig,
    seqs: tuple[DdrfSequence, DdrfSequence] | None = None,
) -> FactorizationCheck:
    """Compare two sequential elementary processes against their product.

    Round ``r`` drives register spin ``r`` with the other spin as spectator.
    The ideal reset between rounds is modelled by giving each round its own
    control qubit, so the composed operator acts on
    ``e_1 x e_2 x n_1 x n_2`` (d=16).
    """
    spins = [s for s in node.spins if s.role is not Role.BATH]
    if len(spins) != 2:
        raise ValueError(f"need exactly two register spins, got {len(spins)}")
    if seqs is None:
        from .calibration import calibrated_sequence
        seqs = tuple(calibrated_sequence(s, node.sequence) for s in spins)
    omega_l = node.sequence.omega_l
    for s, seq in zip(spins, seqs):
        if abs(seq.drive_freq - derive_omega1(s, omega_l)) > 1e-9 * seq.drive_freq:
            raise ValueError(f"sequence is not tuned to spin {s.label!r}")

    rounds = []
    for seq in seqs:
        evs = [corrected_evolution(s, seq) for s in spins]
        rounds.append(([evs[0].v0, evs[1].v0], [evs[0].v1, evs[1].v1]))
    return factorization_from_blocks(rounds)


def factorization_from_blocks(rounds) -> FactorizationCheck:
    """Factorization check from per-round conditional blocks.

    ``rounds[r] = (blocks0, blocks1)`` holds the ``(n_1, n_2)`` rotations of
    round ``r`` for electron branch 0 and 1; round ``r`` targets spin ``r``.
    """
    if len(rounds) != 2:
        raise ValueError("need exactly two rounds")
    eye = sa.ID2
    plus, minus = sa.rx(math.pi / 2), sa.rx(-math.pi / 2)
    actual = np.eye(16, dtype=complex)
    ideal = np.eye(16, dtype=complex)
    elementary = []
    for r, blocks in enumerate(rounds):
        ctrl = [(P0, eye), (P1, eye)] if r == 0 else [(eye, P0), (eye, P1)]
        ideal_blocks = [[eye, eye], [eye, eye]]
        ideal_blocks[0][r], ideal_blocks[1][r] = plus, minus
        actual = sum(sa.kron(*ctrl[j], *blocks[j]) for j in (0, 1)) @ actual
        ideal = sum(sa.kron(*ctrl[j], *ideal_blocks[j]) for j in (0, 1)) @ ideal
        # the elementary gate lists the round's target first
        order = (r, 1 - r)
        gate = block_gate([blocks[0][i] for i in order], [blocks[1][i] for i in order])
        elementary.append(gate_fidelity(ideal_crot(1), gate).fidelity)

    f_comp = gate_fidelity(ideal, actual).fidelity
    f_prod = elementary[0] * elementary[1]
    return FactorizationCheck(f_comp, f_prod, abs(f_comp - f_prod), tuple(elementary))
