import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddrfsim import spinalg as sa
from conftest import random_unitary

finite = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False)


def taylor_expm(a, terms=40, squarings=0):
    """Series reference for exp(a), optionally with scaling and squaring."""
    a = np.asarray(a, dtype=complex) / 2 ** squarings
    out = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ a / k
        out = out + term
    for _ in range(squarings):
        out = out @ out
    return out


def random_hermitian(rng, scale=1.0):
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    return scale * (z + z.conj().T) / 2


def test_spin_operators_commutation():
    ix, iy, iz = sa.spin_half_ops()
    assert np.allclose(sa.commutator(ix, iy), 1j * iz)
    assert np.allclose(sa.commutator(iy, iz), 1j * ix)
    assert np.allclose(sa.commutator(iz, ix), 1j * iy)


def test_spin_half_ops_returns_copies():
    ix, _, _ = sa.spin_half_ops()
    ix[0, 0] = 5
    assert sa.IX[0, 0] == 0


def test_rx_pi_flips_up_to_down():
    out = sa.rx(math.pi) @ sa.UP
    assert np.allclose(out, -1j * sa.DOWN)


def test_rz_is_diagonal_phase():
    th = 0.7
    assert np.allclose(sa.rz(th), np.diag([np.exp(-0.5j * th), np.exp(0.5j * th)]))


def test_rot_rejects_non_unit_axis():
    with pytest.raises(ValueError):
        sa.rot((1.0, 1.0, 0.0), 0.3)
    with pytest.raises(ValueError):
        sa.rot((1.0, 0.0), 0.3)


def test_rot_accepts_axis_within_tolerance():
    sa.rot((1.0 + 1e-12, 0.0, 0.0), 0.3)


def test_expm_matches_series_at_unit_time():
    h = np.array([[0.3, 0.2 - 0.1j], [0.2 + 0.1j, -0.5]])
    ref = taylor_expm(-1j * h, terms=40)
    assert np.max(np.abs(sa.expm_herm2(h, 1.0) - ref)) < 1e-14


def test_expm_series_oracle_random(rng):
    # ||H t|| up to ~10: plain Taylor needs ~80 terms, scaling keeps it tight
    worst = 0.0
    for _ in range(1000):
        h = random_hermitian(rng, scale=rng.uniform(0.0, 4.0))
        t = rng.uniform(-2.5, 2.5)
        ref = taylor_expm(-1j * h * t, terms=30, squarings=6)
        worst = max(worst, np.max(np.abs(sa.expm_herm2(h, t) - ref)))
    assert worst < 1e-10


def test_expm_zero_generator_is_identity():
    assert np.allclose(sa.expm_herm2(np.zeros((2, 2)), 3.0), np.eye(2))


def test_expm_scalar_generator_is_global_phase():
    u = sa.expm_herm2(0.4 * np.eye(2), 2.0)
    assert np.allclose(u, np.exp(-0.8j) * np.eye(2))


def test_expm_batched_over_time():
    h = 0.9 * sa.IX + 0.2 * sa.IZ
    ts = np.linspace(0, 3, 7)
    batch = sa.expm_herm2(h, ts)
    assert batch.shape == (7, 2, 2)
    for t, u in zip(ts, batch):
        assert np.allclose(u, sa.expm_herm2(h, t))


def test_expm_rejects_non_hermitian():
    with pytest.raises(ValueError):
        sa.expm_herm2(np.array([[0, 1], [0, 0]]), 1.0)
    with pytest.raises(ValueError):
        sa.expm_herm2(np.eye(3), 1.0)


@settings(max_examples=200, deadline=None)
@given(finite, finite, finite, finite, st.floats(min_value=-10, max_value=10))
def test_expm_unitary_and_group_law(a0, ax, ay, az, t):
    h = a0 * sa.ID2 + ax * sa.IX + ay * sa.IY + az * sa.IZ
    u = sa.expm_herm2(h, t)
    assert sa.unitarity_defect(u) <= 1e-10
    assert np.allclose(sa.expm_herm2(h, t / 2) @ sa.expm_herm2(h, t / 2), u, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(finite, finite, finite, finite)
def test_pauli_coefficients_roundtrip(a0, ax, ay, az):
    h = a0 * sa.ID2 + ax * sa._PAULI[0] + ay * sa._PAULI[1] + az * sa._PAULI[2]
    c0, c = sa.pauli_coefficients(h)
    assert np.allclose([c0.real, *c.real], [a0, ax, ay, az])
    assert np.allclose(c.imag, 0)


def test_kron_dimensions_and_order():
    m = sa.kron(sa.UP[:, None] @ sa.UP[None, :], sa.IX)
    assert m.shape == (4, 4)
    assert np.allclose(m[:2, :2], sa.IX)
    with pytest.raises(ValueError):
        sa.kron()
    with pytest.raises(ValueError):
        sa.kron(sa.UP)


def test_chain_is_time_ordered(rng):
    mats = np.stack([random_unitary(rng) for _ in range(11)])
    ref = np.eye(2, dtype=complex)
    for m in mats:
        ref = m @ ref
    assert np.allclose(sa.chain(mats), ref)
    with pytest.raises(ValueError):
        sa.chain(np.zeros((0, 2, 2)))


def test_unitarity_checks():
    assert sa.is_unitary(sa.rx(0.3))
    assert not sa.is_unitary(2 * sa.ID2)
    assert sa.hermitian_defect(sa.IY) == 0.0


def test_axis_angle_roundtrip_random(rng):
    for _ in range(1000):
        u = random_unitary(rng)
        aa = sa.axis_angle_of(u)
        assert 0.0 <= aa.angle <= math.pi
        assert -math.pi < aa.global_phase <= math.pi
        assert np.allclose(aa.matrix(), u, atol=1e-10)


def test_axis_angle_conventions():
    zero = sa.axis_angle_of(np.exp(0.3j) * sa.ID2)
    assert zero.axis == (0.0, 0.0, 1.0) and zero.angle == 0.0
    assert zero.global_phase == pytest.approx(0.3)
    half = sa.axis_angle_of(sa.rot((-1.0, 0.0, 0.0), math.pi))
    assert half.axis[0] == pytest.approx(1.0)
    assert half.angle == pytest.approx(math.pi)
    assert np.allclose(half.matrix(), sa.rot((-1.0, 0.0, 0.0), math.pi))


def test_axis_angle_rejects_non_unitary():
    with pytest.raises(ValueError):
        sa.axis_angle_of(2 * sa.ID2)


def test_bloch_vector_of_basis_states():
    assert np.allclose(sa.bloch_vector(sa.UP), [0, 0, 1])
    assert np.allclose(sa.bloch_vector(sa.DOWN), [0, 0, -1])
    plus = (sa.UP + sa.DOWN) / math.sqrt(2)
    assert np.allclose(sa.bloch_vector(plus), [1, 0, 0])
    plus_i = (sa.UP + 1j * sa.DOWN) / math.sqrt(2)
    assert np.allclose(sa.bloch_vector(plus_i), [0, 1, 0])
