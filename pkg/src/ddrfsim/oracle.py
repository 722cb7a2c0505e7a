"""Brute-force reference propagator without the rotating-wave approximation.

Integrates the secular lab-frame Hamiltonian with the full
``2 Omega cos(omega t + phi_k) I_x`` drive using a fixed-step fourth-order
Magnus scheme (two Gauss-Legendre nodes per step). Every step is an exact
2x2 exponential, so the result is unitary to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import spinalg as sa
from .evolution import (
    ConditionalEvolution,
    apply_phase_correction,
    ddrf_evolution,
    phase_correction,
    segment_branches,
    segment_layout,
    rf_phases,
)
from .system import DdrfSequence, NuclearSpinParams, derive_omega1

_GL_OFFSET = math.sqrt(3) / 6


@dataclass(frozen=True)
class IntegratorSpec:
    steps_per_drive_period: int = 256
    method: str = "magnus4-gauss2"
    unitarity_tol: float = 1e-8

    def __post_init__(self):
        if self.steps_per_drive_period < 64:
            raise ValueError("steps_per_drive_period must be >= 64")
        if self.method != "magnus4-gauss2":
            raise ValueError(f"unsupported integrator {self.method!r}")


def branch_hamiltonian(spin: NuclearSpinParams, seq: DdrfSequence, state: int, t, phi):
    """Lab-frame ``H_state(t)`` including the counter-rotating drive part."""
    t = np.asarray(t, dtype=float)
    drive = 2 * seq.rabi * np.cos(seq.drive_freq * t + phi)[..., None, None] * sa.IX
    if state == 0:
        static = seq.omega_l * sa.IZ
    else:
        w1 = derive_omega1(spin, seq.omega_l)
        static = w1 * (math.cos(spin.beta) * sa.IZ + math.sin(spin.beta) * sa.IX)
    return static + drive


def _segment_steps(spin, seq, state, t0, t1, phi, spec):
    period = 2 * math.pi / seq.drive_freq
    n = max(1, math.ceil((t1 - t0) / period * spec.steps_per_drive_period - 1e-9))
    h = (t1 - t0) / n
    left = t0 + h * (np.arange(n) + 0.5 - _GL_OFFSET)
    right = t0 + h * (np.arange(n) + 0.5 + _GL_OFFSET)
    ha = branch_hamiltonian(spin, seq, state, left, phi)
    hb = branch_hamiltonian(spin, seq, state, right, phi)
    heff = (ha + hb) / 2 - 1j * (math.sqrt(3) / 12) * h * sa.commutator(hb, ha)
    return sa.expm_herm2(heff, h)


def integrate_branch(
    spin: NuclearSpinParams,
    seq: DdrfSequence,
    electron_branch: int,
    spec: IntegratorSpec = IntegratorSpec(),
    target_omega1: float | None = None,
    corrected: bool = True,
) -> np.ndarray:
    """Lab-frame propagator of one electron branch over the whole sequence.

    With ``corrected`` the spin's own azimuthal phase correction is applied,
    matching :func:`evolution.corrected_evolution`.
    """
    if electron_branch not in (0, 1):
        raise ValueError("electron_branch must be 0 or 1")
    if target_omega1 is None:
        target_omega1 = seq.drive_freq
    start, end = segment_layout(seq)
    phases = rf_phases(seq, target_omega1)
    states = segment_branches(seq, electron_branch)
    steps = [
        _segment_steps(spin, seq, s, t0, t1, phi, spec)
        for s, t0, t1, phi in zip(states, start, end, phases)
    ]
    u = sa.chain(np.concatenate(steps))
    defect = sa.unitarity_defect(u)
    if defect > spec.unitarity_tol:
        raise ArithmeticError(f"oracle propagator lost unitarity ({defect:.3g})")
    if corrected:
        u = phase_correction(derive_omega1(spin, seq.omega_l), seq) @ u
    return u


def integrate(spin, seq, spec: IntegratorSpec = IntegratorSpec(), target_omega1=None) -> ConditionalEvolution:
    v0, v1 = (integrate_branch(spin, seq, j, spec, target_omega1) for j in (0, 1))
    return ConditionalEvolution(v0=v0, v1=v1, spin=spin, sequence=seq, phase_corrected=True)


def operator_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Spectral-norm distance ``||a - b||_2``."""
    return float(np.linalg.norm(a - b, ord=2))


def rwa_distance(
    spin: NuclearSpinParams,
    seq: DdrfSequence,
    spec: IntegratorSpec = IntegratorSpec(),
    target_omega1: float | None = None,
) -> tuple[float, float]:
    """Per-branch distance between the RWA propagator and the oracle."""
    rwa = apply_phase_correction(ddrf_evolution(spin, seq, target_omega1))
    return tuple(
        operator_distance(rwa.branch(j), integrate_branch(spin, seq, j, spec, target_omega1))
        for j in (0, 1)
    )
