"""Rabi-factor calibration by a seeded golden-section search."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fidelity import elementary_fidelity
from .system import DdrfSequence, NuclearSpinParams, Role, derive_omega1

INV_PHI = (math.sqrt(5) - 1) / 2

FACTOR_BOUNDS = (0.8, 1.0)
COARSE_POINTS = 21
BRACKET_TOL = 1e-7


@dataclass(frozen=True)
class CalibrationResult:
    rabi_factor: float
    achieved_fidelity: float
    iterations: int
    converged: bool


def golden_section_max(f, lo: float, hi: float, tol: float = BRACKET_TOL, max_iter: int = 200):
    """Maximise ``f`` on ``[lo, hi]``; returns ``(x, f(x), iterations)``."""
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a >= tol and it < max_iter:
        it += 1
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return (c, fc, it) if fc >= fd else (d, fd, it)


def target_fidelity(spin: NuclearSpinParams, seq: DdrfSequence, factor: float) -> float:
    """Target-only (d=4) CROT fidelity at a given Rabi factor."""
    return elementary_fidelity([spin], seq.with_rabi_factor(factor)).fidelity


def calibrate_rabi(
    spin: NuclearSpinParams,
    seq: DdrfSequence,
    bounds: tuple[float, float] = FACTOR_BOUNDS,
    coarse_points: int = COARSE_POINTS,
    tol: float = BRACKET_TOL,
) -> CalibrationResult:
    """Pick the Rabi factor maximising the target-only CROT fidelity.

    A coarse grid guards against a multimodal objective; the best grid
    point's neighbourhood is then refined by golden-section search.
    """
    if spin.role is not Role.TARGET:
        raise ValueError(f"spin {spin.label!r} is not a target spin")
    w1 = derive_omega1(spin, seq.omega_l)
    if abs(seq.drive_freq - w1) > 1e-9 * w1:
        raise ValueError("sequence drive frequency is not tuned to the target spin")

    lo, hi = bounds

    def objective(x):
        return target_fidelity(spin, seq, x)

    grid = np.linspace(lo, hi, coarse_points)
    values = [objective(x) for x in grid]
    i = int(np.argmax(values))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, coarse_points - 1)]
    x, fx, iters = golden_section_max(objective, a, b, tol)

    candidates = [(fx, x), (values[i], grid[i]), (values[-1], hi)]
    fx, x = max(candidates)
    # an optimum pinned to the search boundary is not an interior maximum
    converged = bool(lo + tol < x < hi - tol and b > a)
    if not converged:
        edge = lo if abs(x - lo) < abs(x - hi) else hi
        f_edge = objective(edge)
        if f_edge >= fx:
            x, fx = edge, f_edge
    return CalibrationResult(float(x), float(fx), iters, converged)


def calibrated_sequence(spin: NuclearSpinParams, template: DdrfSequence) -> DdrfSequence:
    """Sequence with ``template``'s timing, tuned and calibrated for ``spin``."""
    if spin.role is not Role.TARGET:
        spin = NuclearSpinParams(spin.a_par, spin.beta, Role.TARGET, spin.label)
    seq = DdrfSequence.for_target(
        spin,
        n_pulses=template.n_pulses,
        tau_over_tau_l=template.tau / template.tau_l,
        omega_l=template.omega_l,
        varphi=template.varphi,
    )
    return seq.with_rabi_factor(calibrate_rabi(spin, seq).rabi_factor)
