import numpy as np
import pytest
from hypothesis import given, strategies as st

from kanemele.geometry import SQRT3, dirac_points, lattice_vectors
from kanemele.model import (
    SZ,
    ModelParams,
    alpha_R,
    alpha_SO,
    bloch_gradient,
    bloch_hamiltonian,
    commutator,
    omega,
    omega_R,
    spin_commuting_part,
    spin_noncommuting_part,
    spin_split,
    spin_torque_fiber,
    time_reversal_check,
    triple_norm,
)

params = st.builds(
    ModelParams,
    t=st.floats(0.2, 2.0),
    lambdaSO=st.floats(-1.0, 1.0).filter(lambda x: abs(x) > 0.05),
    w=st.floats(-1.0, 1.0),
    lambdaR=st.floats(-1.0, 1.0),
    r=st.floats(-1.0, 1.0),
)
momentum = st.tuples(st.floats(-6, 6), st.floats(-6, 6)).map(np.array)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])
SZ2 = np.diag([1.0, -1.0]).astype(complex)


def transform_of_operators(p, k):
    """Bloch-Floquet transform of the hopping operators, A(k) = sum e^{-ik.delta} A_delta0."""
    lat = lattice_vectors()
    d, a = lat.d, lat.a
    wedge = lambda v: v[0] * SY - v[1] * SX
    sgn = (1, -1)
    terms = []
    for j in range(3):
        terms += [
            (d[j], np.eye(2), lambda s: p.t),
            (-d[j], np.eye(2), lambda s: p.t),
            (a[j], SZ2, lambda s: -1j * p.lambdaSO * sgn[s] / (3 * SQRT3)),
            (-a[j], SZ2, lambda s: 1j * p.lambdaSO * sgn[s] / (3 * SQRT3)),
            (d[j], wedge(d[j]), lambda s: 1j * p.lambdaR / 3),
            (-d[j], wedge(d[j]), lambda s: -1j * p.lambdaR / 3),
            (a[j], wedge(a[j]), lambda s: 1j * p.lambdaR * p.r / 3),
            (-a[j], wedge(a[j]), lambda s: -1j * p.lambdaR * p.r / 3),
        ]
    off = [np.zeros(2), d[2]]
    basis = np.array([a[0], a[1]]).T
    H = np.zeros((4, 4), dtype=complex)
    for v, M, c in terms:
        for sy in range(2):
            for sx in range(2):
                delta = off[sy] + v - off[sx]
                n = np.linalg.solve(basis, delta)
                if np.allclose(n, np.round(n), atol=1e-9):
                    ph = np.exp(-1j * k @ delta)
                    for s1 in range(2):
                        for s2 in range(2):
                            H[2 * s1 + sx, 2 * s2 + sy] += c(sx) * M[s1, s2] * ph
    for s in range(2):
        H[2 * s, 2 * s] += p.w
        H[2 * s + 1, 2 * s + 1] -= p.w
    return H


@given(params, momentum)
def test_fiber_matches_transform_of_operators(p, k):
    assert np.max(np.abs(bloch_hamiltonian(p, k) - transform_of_operators(p, k))) < 1e-12


@given(params, momentum)
def test_hermitian(p, k):
    h = bloch_hamiltonian(p, k)
    assert np.max(np.abs(h - h.conj().T)) < 1e-14


@given(params, momentum, st.integers(-2, 2), st.integers(-2, 2))
def test_periodic_on_torus(p, k, n1, n2):
    lat = lattice_vectors()
    shifted = k + n1 * lat.b1 + n2 * lat.b2
    assert np.max(np.abs(bloch_hamiltonian(p, shifted) - bloch_hamiltonian(p, k))) < 1e-11


@given(params, momentum)
def test_gradient_matches_finite_difference(p, k):
    g = bloch_gradient(p, k)
    h = 1e-5
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd = (bloch_hamiltonian(p, k + e) - bloch_hamiltonian(p, k - e)) / (2 * h)
        assert np.max(np.abs(fd - g[i])) < 1e-7


@given(params, momentum)
def test_time_reversal(p, k):
    spec, conj = time_reversal_check(p, k)
    assert spec < 1e-12 and conj < 1e-13


def test_values_at_dirac_point():
    p = ModelParams(t=1.3, lambdaSO=0.7, lambdaR=0.4, r=0.6)
    kp = dirac_points()[0]
    assert abs(omega(p, kp)) < 1e-14
    assert abs(alpha_SO(p, kp) - p.lambdaSO) < 1e-14
    assert abs(omega_R(p, kp) - p.lambdaR) < 1e-14
    assert abs(alpha_R(p, kp)) < 1e-14
    d1, d2 = bloch_gradient(p, kp)
    assert abs(d1[0, 1] - (-1.5j * p.t)) < 1e-14
    assert abs(d2[0, 1] - 1.5 * p.t) < 1e-14


@given(params, momentum)
def test_spin_split(p, k):
    h = bloch_hamiltonian(p, k)
    hsc = spin_commuting_part(h)
    assert np.max(np.abs(commutator(hsc, SZ))) < 1e-13
    assert np.max(np.abs(hsc + spin_noncommuting_part(h) - h)) < 1e-13
    p_sc, snc = spin_split(p)
    assert np.max(np.abs(bloch_hamiltonian(p_sc, k) - hsc)) < 1e-13
    assert np.max(np.abs(snc(k) - spin_noncommuting_part(h))) < 1e-13


def test_triple_norm_quadratic_in_rashba():
    # the torque fiber is linear in lambdaR
    base = ModelParams(lambdaSO=1.0, r=1.0)
    n1 = triple_norm(*spin_torque_fiber(base.replace(lambdaR=0.1)), 24)
    n2 = triple_norm(*spin_torque_fiber(base.replace(lambdaR=0.2)), 24)
    assert n1 > 0
    assert abs(n2 / n1 - 2) < 1e-12
    assert triple_norm(*spin_torque_fiber(base), 24) == 0


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(t=0.0)
    with pytest.raises(ValueError):
        ModelParams(lambdaSO=0.0)
    assert ModelParams().replace(w=0.2).w == 0.2


def test_batched_shapes(rng):
    k = rng.normal(size=(3, 5, 2))
    p = ModelParams(lambdaR=0.1)
    assert bloch_hamiltonian(p, k).shape == (3, 5, 4, 4)
    assert bloch_gradient(p, k)[0].shape == (3, 5, 4, 4)
