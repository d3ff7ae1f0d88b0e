"""Imaginary-frequency route to the spin conductivity.

sigma_ij = -(2 pi)^-3 * integral over R x BZ of Tr(A^s_i A_0 A_j), with
G = (H(k) - (mu - i k0))^-1, A_nu = d_nu(H - mu + i k0) G and
A^s_nu the spin-symmetrised vertex.  The integrand is evaluated in the
eigenbasis of H(k), so one eigen-decomposition serves every k0 node.

ORIENTATION multiplies the literal formula.  Taken literally, the formula
gives the negative of the Kubo value at lambdaR = 0 (where both are exactly
+-1/2pi), i.e. it corresponds to the opposite orientation of the k0 axis.
The constant is fixed once from that case; literal=True switches it off.
"""
import numpy as np

from .errors import NonConvergence, SingularFiber
from .kubo import ConductivityResult
from .model import SZ, bloch_gradient, bloch_hamiltonian, dagger
from .numerics import QuadratureSpec, bz_rule, eigh, tangent_rule

ORIENTATION = -1.0


class GreenFiber:
    def __init__(self, G, k0, k, mu):
        self.G = G
        self.k0 = k0
        self.k = k
        self.mu = mu


def _resolvent_shift(p, k0):
    return -(p.mu - 1j * np.asarray(k0))


def green_fiber(p, k0, k):
    h = bloch_hamiltonian(p, k)
    e = eigh(h).eigenvalues
    if abs(k0) + np.min(np.abs(e - p.mu)) <= 1e-12:
        raise SingularFiber(f"Green function singular at k0={k0}, k={k}", k=k)
    m = h + _resolvent_shift(p, k0) * np.eye(4)
    return GreenFiber(np.linalg.inv(m), k0, np.asarray(k), p.mu)


def vertex_fibers(p, k0, k):
    """(A0, A1, A2, As1, As2) at one point (k0, k)."""
    G = green_fiber(p, k0, k).G
    dH = bloch_gradient(p, k)
    a0 = 1j * G
    a = [d @ G for d in dH]
    As = [0.5 * (d @ SZ + SZ @ d) @ G for d in dH]
    return a0, a[0], a[1], As[0], As[1]


def _k0_integrals(e, c, mu, order, tol, max_order=4096):
    """k0 integrals of i sum_nm C_nm g_m^2 g_n, g = 1/(E - mu + i k0), per momentum.

    c has shape (B, X, 4, 4) with C_nm = (M^s)_nm M_mn for X component pairs.
    The tangent map uses the per-momentum scale min |E - mu|.
    """
    a = e - mu
    scale = np.clip(np.min(np.abs(a), axis=-1), 1e-6, None)

    def estimate(n):
        x, w = tangent_rule(n)
        k0 = scale[:, None] * x[None, :]                      # (B, Q)
        g = 1.0 / (a[:, None, :] + 1j * k0[:, :, None])        # (B, Q, 4)
        ww = w[None, :] * scale[:, None]
        gn = np.einsum("bqn,bq->bqn", g, ww)
        return 1j * np.einsum("bxnm,bqm,bqn->bx", c, g * g, gn)

    n = order
    prev = estimate(n)
    while True:
        n *= 2
        cur = estimate(n)
        err = np.max(np.abs(cur - prev), initial=0.0)
        if err <= tol:
            return cur
        if n >= max_order:
            raise NonConvergence("k0 quadrature did not converge", estimate=cur, error=err)
        prev = cur


def matsubara_densities(p, k, spec):
    """k0-integrated traces per momentum, shape (B, 2, 2), literal sign."""
    h = bloch_hamiltonian(p, k)
    ed = eigh(h)
    e, v = ed.eigenvalues, ed.eigenvectors
    if np.min(np.abs(e - p.mu)) <= 1e-12:
        raise SingularFiber("Green function singular on the k0 = 0 axis")
    dH = bloch_gradient(p, k)
    m = [dagger(v) @ d @ v for d in dH]
    s = dagger(v) @ SZ @ v
    ms = [0.5 * (x @ s + s @ x) for x in m]
    c = np.stack(
        [ms[i] * np.swapaxes(m[j], -1, -2) for i in range(2) for j in range(2)], axis=1
    )
    vals = _k0_integrals(e, c, p.mu, spec.k0_order, spec.k0_tol)
    return -(2 * np.pi) ** -3 * vals.reshape(-1, 2, 2)


def spin_conductivity_matsubara(p, spec=QuadratureSpec(), literal=False, chunk=2048):
    rule = bz_rule(spec)
    tot = np.zeros((2, 2), dtype=complex)
    coarse = np.zeros((2, 2), dtype=complex)
    for s in range(0, len(rule.k), chunk):
        vals = matsubara_densities(p, rule.k[s:s + chunk], spec)
        tot += np.einsum("b,bij->ij", rule.weights[s:s + chunk], vals)
        coarse += np.einsum("b,bij->ij", rule.coarse[s:s + chunk], vals)
    sign = 1.0 if literal else ORIENTATION
    sigma = sign * tot.real
    # k0 error is bounded by the per-point tolerance times the zone measure
    k0_err = spec.k0_tol * np.sum(np.abs(rule.weights)) * (2 * np.pi) ** -3
    estimate = float(np.max(np.abs(tot - coarse))) + k0_err + 1e-13
    return ConductivityResult(
        sigma=sigma,
        route="matsubara",
        gridSpec=spec,
        errorEstimate=estimate,
        params=p,
        extras={"imag": sign * tot.imag, "literal": literal},
    )
