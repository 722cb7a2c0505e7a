"""Dense 2x2 / small-register complex matrix kernel.

Spin-1/2 operators, rotations, closed-form exponentials of 2x2 Hermitian
generators and a few unitary hygiene checks. Everything here is a pure
function on numpy arrays; frequencies are rad/s and times are seconds.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

IX = np.array([[0, 1], [1, 0]], dtype=complex) / 2
IY = np.array([[0, -1j], [1j, 0]], dtype=complex) / 2
IZ = np.array([[1, 0], [0, -1]], dtype=complex) / 2
ID2 = np.eye(2, dtype=complex)

UP = np.array([1, 0], dtype=complex)
DOWN = np.array([0, 1], dtype=complex)

_PAULI = np.stack([2 * IX, 2 * IY, 2 * IZ])


@dataclass(frozen=True)
class AxisAngle:
    """Rotation ``exp(-i angle axis.I) * exp(i global_phase)``."""

    axis: tuple[float, float, float]
    angle: float
    global_phase: float

    def matrix(self) -> np.ndarray:
        return rot(self.axis, self.angle) * np.exp(1j * self.global_phase)


def spin_half_ops() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return copies of the spin-1/2 operators ``(Ix, Iy, Iz)``."""
    return IX.copy(), IY.copy(), IZ.copy()


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def _unit_axis(axis) -> np.ndarray:
    n = np.asarray(axis, dtype=float)
    if n.shape != (3,):
        raise ValueError(f"axis must be a 3-vector, got shape {n.shape}")
    if abs(np.linalg.norm(n) - 1.0) > 1e-9:
        raise ValueError(f"axis must have unit norm, |axis| = {np.linalg.norm(n)!r}")
    return n


def rot(axis, theta: float) -> np.ndarray:
    """Spin-1/2 rotation ``exp(-i theta axis.I)``."""
    n = _unit_axis(axis)
    gen = np.tensordot(n, _PAULI, axes=1)
    return np.cos(theta / 2) * ID2 - 1j * np.sin(theta / 2) * gen


def rx(theta: float) -> np.ndarray:
    return rot((1.0, 0.0, 0.0), theta)


def ry(theta: float) -> np.ndarray:
    return rot((0.0, 1.0, 0.0), theta)


def rz(theta: float) -> np.ndarray:
    return rot((0.0, 0.0, 1.0), theta)


def hermitian_defect(h: np.ndarray) -> float:
    h = np.asarray(h)
    return float(np.max(np.abs(h - dagger(h)), initial=0.0))


def unitarity_defect(u: np.ndarray) -> float:
    """Largest entry of ``|U^dag U - 1|`` (max over a stack, if given)."""
    u = np.asarray(u)
    eye = np.eye(u.shape[-1])
    return float(np.max(np.abs(dagger(u) @ u - eye)))


def is_unitary(u: np.ndarray, atol: float = 1e-10) -> bool:
    return unitarity_defect(u) <= atol


def pauli_coefficients(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a 2x2 (stack of) matrix into ``a0 * 1 + a . sigma``.

    Returns ``(a0, a)`` with ``a`` of shape ``(..., 3)``. Coefficients are
    real for Hermitian input.
    """
    h = np.asarray(h, dtype=complex)
    a0 = (h[..., 0, 0] + h[..., 1, 1]) / 2
    ax = (h[..., 0, 1] + h[..., 1, 0]) / 2
    ay = (h[..., 1, 0] - h[..., 0, 1]) / 2j
    az = (h[..., 0, 0] - h[..., 1, 1]) / 2
    return a0, np.stack([ax, ay, az], axis=-1)


def expm_herm2(h: np.ndarray, t) -> np.ndarray:
    """Closed-form ``exp(-i H t)`` for 2x2 Hermitian ``H``.

    ``h`` may be a stack of shape ``(..., 2, 2)``; ``t`` broadcasts against
    the leading dimensions.
    """
    h = np.asarray(h, dtype=complex)
    if h.shape[-2:] != (2, 2):
        raise ValueError(f"expected 2x2 generator(s), got shape {h.shape}")
    scale = max(1.0, float(np.max(np.abs(h), initial=0.0)))
    if hermitian_defect(h) > 1e-10 * scale:
        raise ValueError("generator is not Hermitian")
    a0, a = pauli_coefficients(h)
    a0 = a0.real
    a = a.real
    t = np.asarray(t, dtype=float)
    norm = np.linalg.norm(a, axis=-1)
    phi = norm * t
    # sin(phi)/|a| written via sinc to stay finite at |a| = 0
    s = t * np.sinc(phi / np.pi)
    gen = np.einsum("...k,kij->...ij", a, _PAULI)
    out = np.cos(phi)[..., None, None] * ID2 - 1j * s[..., None, None] * gen
    return np.exp(-1j * a0 * t)[..., None, None] * out


def kron(*mats: np.ndarray) -> np.ndarray:
    if not mats:
        raise ValueError("kron needs at least one operand")
    for m in mats:
        if np.ndim(m) != 2:
            raise ValueError("kron operands must be 2-D matrices")
    return reduce(np.kron, (np.asarray(m, dtype=complex) for m in mats))


def chain(mats: np.ndarray) -> np.ndarray:
    """Time-ordered product ``M[n-1] @ ... @ M[1] @ M[0]`` of a stack.

    Done as a pairwise tree so long stacks (oracle steps) stay vectorised.
    """
    m = np.asarray(mats, dtype=complex)
    if m.ndim != 3 or m.shape[0] == 0:
        raise ValueError("chain expects a non-empty (n, d, d) stack")
    while m.shape[0] > 1:
        if m.shape[0] % 2:
            m = np.concatenate([m, np.eye(m.shape[-1], dtype=complex)[None]])
        m = m[1::2] @ m[0::2]
    return m[0]


def _wrap(angle: float) -> float:
    """Map into (-pi, pi]."""
    a = float(np.mod(angle + np.pi, 2 * np.pi) - np.pi)
    return np.pi if a <= -np.pi else a


def axis_angle_of(u: np.ndarray) -> AxisAngle:
    """Decompose a 2x2 unitary as ``exp(i phase) rot(axis, angle)``.

    The angle lands in [0, pi]; a zero rotation reports the z axis and a
    rotation by exactly pi has its first nonzero axis component positive.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {u.shape}")
    if unitarity_defect(u) > 1e-10:
        raise ValueError("input is not unitary")
    gamma = np.angle(np.linalg.det(u)) / 2
    v = u * np.exp(-1j * gamma)
    c = (v[0, 0] + v[1, 1]).real / 2
    # v = c*1 - i*s*(n.sigma)  =>  s*n_k = Re(i tr(v sigma_k) / 2)
    sn = np.array([(1j * np.trace(v @ p) / 2).real for p in _PAULI])
    if c < 0:
        c, sn, gamma = -c, -sn, gamma + np.pi
    s = float(np.linalg.norm(sn))
    if s < 1e-15:
        return AxisAngle((0.0, 0.0, 1.0), 0.0, _wrap(gamma))
    angle = 2 * np.arctan2(s, c)
    axis = sn / s
    if abs(angle - np.pi) < 1e-12:
        first = axis[np.flatnonzero(np.abs(axis) > 1e-12)[0]]
        if first < 0:
            axis, gamma = -axis, gamma + np.pi
        angle = np.pi
    return AxisAngle(tuple(float(x) for x in axis), float(angle), _wrap(gamma))


def bloch_vector(psi: np.ndarray) -> np.ndarray:
    """``(2<Ix>, 2<Iy>, 2<Iz>)`` for a normalised 2-vector (or stack)."""
    psi = np.asarray(psi, dtype=complex)
    a, b = psi[..., 0], psi[..., 1]
    cross = np.conj(a) * b
    return np.stack([2 * cross.real, 2 * cross.imag, np.abs(a) ** 2 - np.abs(b) ** 2], axis=-1)
