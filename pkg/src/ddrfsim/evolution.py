"""Piecewise DDRF propagators in alternating rotating frames.

Electron pi pulses are instantaneous: they only swap which branch
Hamiltonian drives the nuclear spin and which rotating frame is active.
Each segment between pulses is a single 2x2 exponential of a
time-independent RWA Hamiltonian.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace

import numpy as np

from . import spinalg as sa
from .system import TWO_PI, DdrfSequence, NuclearSpinParams, derive_omega1, rf_phase

DEFAULT_SAMPLES_PER_SEGMENT = 32


@dataclass(frozen=True)
class ConditionalEvolution:
    """Nuclear propagators conditioned on the initial electron state."""

    v0: np.ndarray
    v1: np.ndarray
    spin: NuclearSpinParams
    sequence: DdrfSequence
    phase_corrected: bool = False

    @property
    def label(self) -> str:
        return self.spin.label

    def branch(self, j: int) -> np.ndarray:
        return (self.v0, self.v1)[j]

    def final_states(self, psi0=sa.UP) -> tuple[np.ndarray, np.ndarray]:
        return self.v0 @ psi0, self.v1 @ psi0


@dataclass(frozen=True)
class BlochSample:
    t: float
    x: float
    y: float
    z: float
    frame: str


@dataclass(frozen=True)
class BlochTrajectory:
    samples: tuple[BlochSample, ...]
    branch: int
    initial_state: tuple[complex, complex]
    # Bloch vector after back-transformation and phase correction
    final: tuple[float, float, float]

    def array(self) -> np.ndarray:
        return np.array([[s.t, s.x, s.y, s.z] for s in self.samples])


def tilted_ops(beta: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Spin operators of the frame tilted by ``beta`` about y."""
    r = sa.ry(beta)
    return r @ sa.IX @ sa.dagger(r), r @ sa.IY @ sa.dagger(r), r @ sa.IZ @ sa.dagger(r)


def rwa_hamiltonians(spin: NuclearSpinParams, seq: DdrfSequence, phi) -> tuple[np.ndarray, np.ndarray]:
    """Rotating-frame RWA Hamiltonians ``(H0', H1')`` for RF phase ``phi``.

    ``phi`` may be an array; the result then stacks along the leading axis.
    """
    phi = np.asarray(phi, dtype=float)
    c = np.cos(phi)[..., None, None]
    s = np.sin(phi)[..., None, None]
    w, om = seq.drive_freq, seq.rabi
    w1 = derive_omega1(spin, seq.omega_l)
    tx, ty, tz = tilted_ops(spin.beta)
    h0 = (seq.omega_l - w) * sa.IZ + om * (c * sa.IX + s * sa.IY)
    h1 = (w1 - w) * tz + om * math.cos(spin.beta) * (c * tx + s * ty)
    return h0, h1


def _frame_generators(spin: NuclearSpinParams) -> tuple[np.ndarray, np.ndarray]:
    return sa.IZ, tilted_ops(spin.beta)[2]


def _frame(gen: np.ndarray, omega: float, t) -> np.ndarray:
    """``R(t) = exp(i omega t G)``."""
    return sa.expm_herm2(-omega * gen, t)


def segment_layout(seq: DdrfSequence) -> tuple[np.ndarray, np.ndarray]:
    """Start and end times of the N+1 RF segments."""
    n, tau = seq.n_pulses, seq.tau
    k = np.arange(1, n + 2)
    start = np.where(k == 1, 0.0, (2 * k - 3) * tau)
    end = np.where(k == n + 1, 2 * n * tau, (2 * k - 1) * tau)
    return start, end


def segment_branches(seq: DdrfSequence, sigma: int) -> np.ndarray:
    """Electron state during each segment when the electron starts in ``sigma``."""
    k = np.arange(1, seq.n_pulses + 2)
    return np.where(k % 2 == 1, sigma, 1 - sigma)


def rf_phases(seq: DdrfSequence, target_omega1: float) -> np.ndarray:
    return np.array([rf_phase(k, seq, target_omega1) for k in range(1, seq.n_pulses + 2)])


def _segment_operators(spin, seq, target_omega1, split: int = 1):
    """Lab-frame segment propagators for both electron states.

    Returns an array of shape ``(2, N+1, 2, 2)``: entry ``[s, k]`` is
    ``R_s(t_end)^dag U_s(dt, phi_k) R_s(t_start)``. With ``split > 1`` each
    segment's rotating-frame exponential is taken as ``split`` equal pieces.
    """
    start, end = segment_layout(seq)
    dt = end - start
    h = rwa_hamiltonians(spin, seq, rf_phases(seq, target_omega1))
    gens = _frame_generators(spin)
    out = np.empty((2, seq.n_pulses + 1, 2, 2), dtype=complex)
    for s in (0, 1):
        u = sa.expm_herm2(h[s], dt / split)
        if split > 1:
            u = np.linalg.matrix_power(u, split)
        r_in = _frame(gens[s], seq.drive_freq, start)
        r_out = _frame(gens[s], seq.drive_freq, end)
        out[s] = sa.dagger(r_out) @ u @ r_in
    return out


def ddrf_evolution(
    spin: NuclearSpinParams,
    seq: DdrfSequence,
    target_omega1: float | None = None,
    *,
    split: int = 1,
) -> ConditionalEvolution:
    """Conditional propagators ``(V0, V1)`` of ``spin`` under ``seq``.

    ``target_omega1`` sets the RF phase ramp; it defaults to the drive
    frequency, i.e. the spin the sequence is tuned to. The result includes
    the final back-transformation out of the rotating frame.
    """
    if seq.n_pulses % 2:
        raise ValueError("DDRF sequence needs an even number of pi pulses")
    if target_omega1 is None:
        target_omega1 = seq.drive_freq
    ops = _segment_operators(spin, seq, target_omega1, split)
    idx = np.arange(seq.n_pulses + 1)
    v = [sa.chain(ops[segment_branches(seq, sigma), idx]) for sigma in (0, 1)]
    return ConditionalEvolution(v0=v[0], v1=v[1], spin=spin, sequence=seq)


def correction_angle(omega1: float, seq: DdrfSequence) -> float:
    return math.fmod(seq.n_pulses * omega1 * seq.tau, TWO_PI)


def phase_correction(omega1: float, seq: DdrfSequence) -> np.ndarray:
    """z rotation undoing the azimuthal precession ``N omega1 tau``."""
    return sa.rz(-correction_angle(omega1, seq))


def apply_phase_correction(
    ev: ConditionalEvolution,
    omega1: float | None = None,
    seq: DdrfSequence | None = None,
) -> ConditionalEvolution:
    """Left-multiply both branches by the spin's own z correction."""
    if ev.phase_corrected:
        raise ValueError(f"evolution of spin {ev.label!r} is already phase corrected")
    seq = ev.sequence if seq is None else seq
    if omega1 is None:
        omega1 = derive_omega1(ev.spin, seq.omega_l)
    c = phase_correction(omega1, seq)
    return replace(ev, v0=c @ ev.v0, v1=c @ ev.v1, phase_corrected=True)


def corrected_evolution(spin, seq, target_omega1=None) -> ConditionalEvolution:
    return apply_phase_correction(ddrf_evolution(spin, seq, target_omega1))


def bloch_trajectory(
    spin: NuclearSpinParams,
    seq: DdrfSequence,
    initial_state,
    electron_branch: int,
    samples_per_segment: int = DEFAULT_SAMPLES_PER_SEGMENT,
    target_omega1: float | None = None,
) -> BlochTrajectory:
    """Sample the nuclear Bloch vector in the frame active in each segment."""
    psi = np.asarray(initial_state, dtype=complex)
    if psi.shape != (2,) or abs(np.vdot(psi, psi).real - 1.0) > 1e-9:
        raise ValueError("initial state must be a normalised 2-vector")
    if electron_branch not in (0, 1):
        raise ValueError("electron_branch must be 0 or 1")
    if samples_per_segment < 1:
        raise ValueError("samples_per_segment must be >= 1")
    if target_omega1 is None:
        target_omega1 = seq.drive_freq

    start, end = segment_layout(seq)
    h = rwa_hamiltonians(spin, seq, rf_phases(seq, target_omega1))
    gens = _frame_generators(spin)
    states = segment_branches(seq, electron_branch)
    frac = np.arange(samples_per_segment) / samples_per_segment

    samples = []
    lab = psi
    for k, s in enumerate(states):
        t0, t1 = start[k], end[k]
        rot_psi = _frame(gens[s], seq.drive_freq, t0) @ lab
        offsets = frac * (t1 - t0)
        path = sa.expm_herm2(h[s][k], offsets) @ rot_psi
        for t, b in zip(t0 + offsets, sa.bloch_vector(path)):
            samples.append(BlochSample(float(t), *map(float, b), f"R{s}"))
        in_frame_end = sa.expm_herm2(h[s][k], t1 - t0) @ rot_psi
        lab = sa.dagger(_frame(gens[s], seq.drive_freq, t1)) @ in_frame_end
        if k == len(states) - 1:
            b = sa.bloch_vector(in_frame_end)
            samples.append(BlochSample(float(t1), *map(float, b), f"R{s}"))

    final = phase_correction(derive_omega1(spin, seq.omega_l), seq) @ lab
    return BlochTrajectory(
        samples=tuple(samples),
        branch=electron_branch,
        initial_state=(complex(psi[0]), complex(psi[1])),
        final=tuple(float(x) for x in sa.bloch_vector(final)),
    )


TRAJECTORY_HEADER = ("t_s", "x", "y", "z", "frame", "branch")


def _fmt(x: float) -> str:
    return format(x, ".17g")


def trajectory_csv(traj: BlochTrajectory) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_HEADER)
    for s in traj.samples:
        w.writerow([_fmt(s.t), _fmt(s.x), _fmt(s.y), _fmt(s.z), s.frame, traj.branch])
    return buf.getvalue()
