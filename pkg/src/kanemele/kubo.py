"""Momentum-space spin conductivity from the Fermi projector.

Commutators with the position operator become derivatives on the fiber,
[X_i, A] -> i dA/dk_i, and the trace per unit volume becomes
(2 pi)^-2 times the zone integral of the 4x4 trace.  With
exact_position=True the intracell offset of the B site is kept, which adds
d3_i [B, A] to every such commutator.

All fiber work happens in the eigenbasis of H(k); traces do not depend on it.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import GapTooSmall, NonConvergence
from .geometry import lattice_vectors
from .model import SUBLATTICE_B, SZ, bloch_gradient, bloch_hamiltonian, commutator, dagger
from .numerics import HermitianEigenResult, QuadratureSpec, bz_rule, eigh

GAP_EPS = 1e-9


@dataclass
class ProjectorFiber:
    P: np.ndarray
    occupiedCount: np.ndarray
    eigendata: HermitianEigenResult
    mu: float

    @property
    def occupied(self):
        return self.eigendata.eigenvalues <= self.mu


@dataclass
class ConductivityResult:
    sigma: np.ndarray
    route: str
    gridSpec: QuadratureSpec
    errorEstimate: float
    params: object
    extras: dict = field(default_factory=dict)

    def antisymmetry_ok(self):
        s, e = self.sigma, self.errorEstimate
        return abs(s[0, 0]) <= e and abs(s[1, 1]) <= e and abs(s[0, 1] + s[1, 0]) <= 2 * e

    def to_dict(self):
        out = {
            "sigma": self.sigma.tolist(),
            "route": self.route,
            "gridSpec": self.gridSpec.to_dict() if self.gridSpec is not None else None,
            "errorEstimate": float(self.errorEstimate),
            "params": self.params.to_dict(),
        }
        for k, v in self.extras.items():
            out[k] = np.asarray(v).tolist() if isinstance(v, np.ndarray) else v
        return out


def _check_gap(e, mu, k):
    dist = np.abs(e - mu)
    if np.min(dist) < GAP_EPS:
        b = np.unravel_index(np.argmin(dist), dist.shape)
        kk = np.asarray(k).reshape(-1, 2)[b[0]] if np.ndim(k) > 1 else np.asarray(k)
        raise GapTooSmall(
            f"eigenvalue {e[b]:.3e} within {GAP_EPS} of mu={mu} at k={kk}",
            k=kk,
            energy=float(e[b]),
        )


def fermi_projector(p, k):
    h = bloch_hamiltonian(p, k)
    ed = eigh(h)
    _check_gap(ed.eigenvalues, p.mu, k)
    occ = ed.eigenvalues <= p.mu
    v = ed.eigenvectors
    P = np.einsum("...in,...n,...jn->...ij", v, occ.astype(float), v.conj())
    return ProjectorFiber(P, occ.sum(-1), ed, p.mu)


def _denominators(e, occ):
    diff = e[..., :, None] - e[..., None, :]
    cross = occ[..., :, None] != occ[..., None, :]
    if np.any(np.abs(np.where(cross, diff, 1.0)) < GAP_EPS):
        raise GapTooSmall("degenerate denominator across the gap")
    inv = np.where(cross, 1.0 / np.where(cross, diff, 1.0), 0.0)
    o = occ.astype(float)
    sign = o[..., :, None] - o[..., None, :]
    return inv, sign * inv


def _to_eig(v, a):
    return dagger(v) @ a @ v


def _from_eig(v, a):
    return v @ a @ dagger(v)


def projector_gradient(pf, dH):
    """(dP/dk1, dP/dk2) from the off-diagonal spectral formula."""
    v = pf.eigendata.eigenvectors
    _, f = _denominators(pf.eigendata.eigenvalues, pf.occupied)
    return tuple(_from_eig(v, _to_eig(v, d) * f) for d in dH)


def linear_response_fiber(pf, dH, j):
    """P1 = Liouvillian inverse of A = i dP/dk_j."""
    v = pf.eigendata.eigenvectors
    inv, f = _denominators(pf.eigendata.eigenvalues, pf.occupied)
    a = 1j * _to_eig(v, dH[j]) * f
    return _from_eig(v, a * inv)


def effective_gradient(p, k, h=None, exact_position=False):
    """Fiber of -i[X_i, H] -> dH/dk_i, optionally with the intracell term."""
    dH = bloch_gradient(p, k)
    if not exact_position:
        return dH
    if h is None:
        h = bloch_hamiltonian(p, k)
    d3 = lattice_vectors().d3
    cb = commutator(SUBLATTICE_B, h)
    return tuple(dH[i] - 1j * d3[i] * cb for i in range(2))


def _trace(a):
    return np.trace(a, axis1=-2, axis2=-1)


def kubo_densities(p, k, exact_position=False, rephase=None):
    """Per-momentum traces (B, 2, 2) of the sc, snc and direct integrands."""
    h = bloch_hamiltonian(p, k)
    ed = eigh(h)
    e, v = ed.eigenvalues, ed.eigenvectors
    if rephase is not None:
        v = v * rephase[..., None, :]
    _check_gap(e, p.mu, k)
    occ = e <= p.mu
    inv, f = _denominators(e, occ)
    dH = effective_gradient(p, k, h, exact_position)
    m = [_to_eig(v, d) for d in dH]
    s = _to_eig(v, np.broadcast_to(SZ, h.shape))
    P = np.zeros_like(h)
    idx = np.arange(4)
    P[..., idx, idx] = occ
    hd = np.zeros_like(h)
    hd[..., idx, idx] = e
    dP = [mi * f for mi in m]
    p1 = [1j * d * inv for d in dP]
    sp_p = commutator(commutator(s, P), P)
    s_h = commutator(s, hd)
    shape = h.shape[:-2] + (2, 2)
    sc = np.zeros(shape)
    snc = np.zeros(shape)
    direct = np.zeros(shape)
    for i in range(2):
        for j in range(2):
            sc[..., i, j] = _trace(-1j * s @ P @ commutator(dP[i], dP[j])).real
            t1 = m[i] @ sp_p @ p1[j]
            t2 = -commutator(dP[i], P) @ s_h @ p1[j]
            t3 = 1j * P @ dP[i] @ commutator(dP[j], s)
            snc[..., i, j] = _trace(t1 + t2 + t3).real
            direct[..., i, j] = _trace(0.5 * (m[i] @ s + s @ m[i]) @ p1[j]).real
    return sc, snc, direct


def _integrate_parts(p, spec, exact_position=False, chunk=4096):
    rule = bz_rule(spec)
    norm = (2 * np.pi) ** -2
    tot = np.zeros((3, 2, 2))
    coarse = np.zeros((3, 2, 2))
    for s in range(0, len(rule.k), chunk):
        vals = np.stack(kubo_densities(p, rule.k[s:s + chunk], exact_position), axis=1)
        tot += np.einsum("b,bxij->xij", rule.weights[s:s + chunk], vals)
        coarse += np.einsum("b,bxij->xij", rule.coarse[s:s + chunk], vals)
    return norm * tot, norm * np.abs(tot - coarse)


def sigma_sc(p, spec=QuadratureSpec(), i=0, j=1):
    return float(_integrate_parts(p, spec)[0][0, i, j])


def sigma_snc(p, spec=QuadratureSpec(), i=0, j=1):
    return float(_integrate_parts(p, spec)[0][1, i, j])


def spin_conductivity_kubo(p, spec=QuadratureSpec(), exact_position=False, tol=None, max_grid=768):
    """Sigma^sc + Sigma^snc for all four components.

    With tol set, the grid doubles until the error estimate drops below it.
    """
    while True:
        parts, err = _integrate_parts(p, spec, exact_position)
        sigma = parts[0] + parts[1]
        estimate = float(np.max(err[0] + err[1])) + 1e-13
        if tol is None or estimate <= tol:
            break
        if 2 * spec.bz_grid > max_grid:
            raise NonConvergence("kubo grid doubling exhausted", estimate=sigma, error=estimate)
        spec = replace(spec, bz_grid=2 * spec.bz_grid)
    res = ConductivityResult(
        sigma=sigma,
        route="kubo",
        gridSpec=spec,
        errorEstimate=estimate,
        params=p,
        extras={
            "sigma_sc": parts[0],
            "sigma_snc": parts[1],
            "sigma_direct": parts[2],
            "exact_position": exact_position,
        },
    )
    return res
