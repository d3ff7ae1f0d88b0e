"""Extended Kane-Mele Bloch fiber in the basis (A up, B up, A down, B down).

Dimerisation: A sites at the Bravais points, B sites shifted by d3.  The
fiber is periodic on the Brillouin torus because every phase is of the form
exp(i k.v) with v a Bravais vector.

Momentum arguments may be a single 2-vector or an array of shape (..., 2);
matrices come back with shape (..., 4, 4).
"""
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import KaneMeleError
from .geometry import SQRT3, lattice_vectors
from .numerics import eigh

SZ = np.diag([0.5, 0.5, -0.5, -0.5]).astype(complex)
SUBLATTICE_B = np.diag([0.0, 1.0, 0.0, 1.0]).astype(complex)
# time reversal acts as J K with J the symplectic block matrix
J_TR = np.block([[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]]).astype(complex)

# e^{i 2 pi (3-j)/3}, j = 1, 2, 3
_RASHBA_PHASE = np.exp(1j * 2 * np.pi * np.array([2, 1, 0]) / 3)


@dataclass(frozen=True)
class ModelParams:
    t: float = 1.0
    lambdaSO: float = 0.3
    w: float = 0.0
    lambdaR: float = 0.0
    r: float = 0.0
    mu: float = 0.0

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("t must be positive")
        if self.lambdaSO == 0:
            raise ValueError("lambdaSO must be nonzero")

    def replace(self, **kw):
        return replace(self, **kw)

    def to_dict(self):
        return {k: float(v) for k, v in asdict(self).items()}


def _phases(k, sign=1.0):
    lat = lattice_vectors()
    k = np.asarray(k, dtype=float)
    rel = lat.d - lat.d[2]  # d_j - d3, Bravais vectors
    e = np.exp(1j * sign * (k @ rel.T))
    return e, rel


def omega(p, k):
    e, _ = _phases(k)
    return p.t * e.sum(-1)


def omega_R(p, k):
    e, _ = _phases(k)
    return p.lambdaR / 3 * (e * _RASHBA_PHASE).sum(-1)


def alpha_SO(p, k):
    a = lattice_vectors().a
    return -2 * p.lambdaSO / (3 * SQRT3) * np.sin(np.asarray(k, float) @ a.T).sum(-1)


def alpha_R(p, k):
    a = lattice_vectors().a
    s = np.sin(np.asarray(k, float) @ a.T)
    return 2 * p.lambdaR * p.r / SQRT3 * (s * _RASHBA_PHASE).sum(-1)


def _grad_omega(p, k):
    e, rel = _phases(k)
    return p.t * (1j * e) @ rel


def _grad_omega_R(p, k):
    e, rel = _phases(k)
    return p.lambdaR / 3 * (1j * e * _RASHBA_PHASE) @ rel


def _grad_alpha_SO(p, k):
    a = lattice_vectors().a
    return -2 * p.lambdaSO / (3 * SQRT3) * np.cos(np.asarray(k, float) @ a.T) @ a


def _grad_alpha_R(p, k):
    a = lattice_vectors().a
    c = np.cos(np.asarray(k, float) @ a.T)
    return 2 * p.lambdaR * p.r / SQRT3 * (c * _RASHBA_PHASE) @ a


def _assemble(w, aso, om, ar, omr, omr_minus):
    shape = np.shape(om)
    h = np.zeros(shape + (4, 4), dtype=complex)
    h[..., 0, 0] = w + aso
    h[..., 0, 1] = om
    h[..., 0, 2] = ar
    h[..., 0, 3] = omr
    h[..., 1, 0] = np.conj(om)
    h[..., 1, 1] = -w - aso
    h[..., 1, 2] = -omr_minus
    h[..., 1, 3] = ar
    h[..., 2, 0] = np.conj(ar)
    h[..., 2, 1] = -np.conj(omr_minus)
    h[..., 2, 2] = w - aso
    h[..., 2, 3] = om
    h[..., 3, 0] = np.conj(omr)
    h[..., 3, 1] = np.conj(ar)
    h[..., 3, 2] = np.conj(om)
    h[..., 3, 3] = -w + aso
    return h


def bloch_hamiltonian(p, k):
    k = np.asarray(k, dtype=float)
    return _assemble(
        p.w,
        alpha_SO(p, k),
        omega(p, k),
        alpha_R(p, k),
        omega_R(p, k),
        omega_R(p, -k),
    )


def bloch_gradient(p, k):
    """Analytic (dH/dk1, dH/dk2)."""
    k = np.asarray(k, dtype=float)
    daso = _grad_alpha_SO(p, k)
    dom = _grad_omega(p, k)
    dar = _grad_alpha_R(p, k)
    domr = _grad_omega_R(p, k)
    # chain rule for k -> -k
    domr_minus = -_grad_omega_R(p, -k)
    return tuple(
        _assemble(0.0, daso[..., i], dom[..., i], dar[..., i], domr[..., i], domr_minus[..., i])
        for i in range(2)
    )


def commutator(a, b):
    return a @ b - b @ a


def dagger(a):
    return np.conj(np.swapaxes(a, -1, -2))


def spin_split(p):
    """Split into the spin-commuting parameters and the non-commuting fiber.

    For this model the non-commuting part is exactly the Rashba part.
    """
    p_sc = p.replace(lambdaR=0.0)

    def snc_fiber(k):
        h = bloch_hamiltonian(p, k)
        hsc = bloch_hamiltonian(p_sc, k)
        snc = h - hsc
        scale = max(1.0, float(np.max(np.abs(h))))
        res1 = np.max(np.abs(commutator(hsc, SZ)))
        res2 = np.max(np.abs(2 * commutator(h, SZ) @ SZ - snc))
        if res1 > 1e-10 * scale or res2 > 1e-10 * scale:
            raise KaneMeleError(f"spin split inconsistent: {res1:.2e}, {res2:.2e}")
        return snc

    return p_sc, snc_fiber


def spin_commuting_part(h):
    return h + 2 * commutator(SZ, h) @ SZ


def spin_noncommuting_part(h):
    return 2 * commutator(h, SZ) @ SZ


def triple_norm(A, grad, grid):
    """Sup of ||A(k)|| plus the sups of the two gradient norms over a uniform grid."""
    from .geometry import fractional_grid

    k = fractional_grid(grid)
    norm = lambda m: np.linalg.norm(m, ord=2, axis=(-2, -1))
    g1, g2 = grad(k)
    return float(norm(A(k)).max() + norm(g1).max() + norm(g2).max())


def spin_torque_fiber(p):
    """[H(k), S_z] and its gradient, as callables for triple_norm."""
    def A(k):
        return commutator(bloch_hamiltonian(p, k), SZ)

    def grad(k):
        return tuple(commutator(g, SZ) for g in bloch_gradient(p, k))

    return A, grad


def time_reversal_check(p, k):
    k = np.asarray(k, dtype=float)
    h = bloch_hamiltonian(p, k)
    hm = bloch_hamiltonian(p, -k)
    spec = np.max(np.abs(eigh(h).eigenvalues - eigh(hm).eigenvalues), axis=-1)
    conj = np.max(np.abs(h - J_TR @ np.conj(hm) @ np.linalg.inv(J_TR)), axis=(-2, -1))
    return spec, conj
