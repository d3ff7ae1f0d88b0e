"""Chern and spin Chern numbers, and the deviation from quantisation.

Chern(P)_12 = (i/2pi) * integral of Tr(P [d2 P, d1 P]).  The lattice version
multiplies link overlaps of occupied frames around each plaquette of the
uniform (alpha1, alpha2) grid; the orientation factor converts from the
fractional coordinates to (k1, k2).
"""
from dataclasses import dataclass

import numpy as np

from .errors import PhaseError, RefineGrid
from .geometry import fractional_grid, lattice_vectors
from .kubo import spin_conductivity_kubo
from .model import bloch_hamiltonian, spin_torque_fiber, triple_norm
from .numerics import eigh
from .spectrum import classify_phase

MAX_PLAQUETTE_PHASE = 0.75 * np.pi


@dataclass
class ChernResult:
    value: int
    curvatureL1Residual: float
    grid: int


def _frames(projectors):
    # orthonormal frame of the range of each projector
    ed = eigh(projectors)
    rank = int(round(np.real(np.trace(projectors[0]))))
    n = projectors.shape[-1]
    return ed.eigenvectors[..., n - rank:], rank


def chern_from_frames(frames, grid):
    """Link-variable Chern number from frames on a grid x grid mesh (row-major)."""
    n = grid
    lat = lattice_vectors()
    orient = np.sign(np.linalg.det(lat.b))
    u = frames.reshape(n, n, frames.shape[-2], frames.shape[-1])
    if u.shape[-1] == 0 or u.shape[-1] == u.shape[-2]:
        return ChernResult(0, 0.0, grid)

    def link(a, b):
        return np.linalg.det(np.einsum("...in,...im->...nm", a.conj(), b))

    u1 = np.roll(u, -1, axis=0)
    u2 = np.roll(u, -1, axis=1)
    u12 = np.roll(u1, -1, axis=1)
    loop = link(u, u1) * link(u1, u12) * link(u12, u2) * link(u2, u)
    phase = np.angle(loop)
    if np.max(np.abs(phase)) > MAX_PLAQUETTE_PHASE:
        raise RefineGrid(f"plaquette phase {np.max(np.abs(phase)):.3f} too close to pi; refine grid {grid}")
    # Chern_12 = (i/2pi) int Tr(P[d2P, d1P]) = (1/2pi) * sum of plaquette phases
    raw = orient * phase.sum() / (2 * np.pi)
    value = int(np.rint(raw))
    return ChernResult(value, float(abs(raw - value)), grid)


def chern_number(proj_fiber, grid):
    """proj_fiber maps momenta (B, 2) to projectors (B, n, n)."""
    k = fractional_grid(grid)
    P = np.asarray(proj_fiber(k))
    frames, _ = _frames(P)
    return chern_from_frames(frames, grid)


def _block_projectors(p, spin):
    """Occupied projector of one spin block of the spin-conserving fiber."""
    sl = slice(0, 2) if spin == "up" else slice(2, 4)
    p_sc = p.replace(lambdaR=0.0)

    def fiber(k):
        h = bloch_hamiltonian(p_sc, k)[..., sl, sl]
        ed = eigh(h)
        occ = (ed.eigenvalues <= p.mu).astype(float)
        v = ed.eigenvectors
        return np.einsum("...in,...n,...jn->...ij", v, occ, v.conj())

    return fiber


def spin_block_cherns(p, grid):
    up = chern_number(_block_projectors(p, "up"), grid)
    down = chern_number(_block_projectors(p, "down"), grid)
    return up, down


def spin_chern(p, grid=48):
    """Half-difference of the block Chern numbers of P^sc (lambdaR switched off)."""
    up, down = spin_block_cherns(p, grid)
    diff = up.value - down.value
    if diff % 2:
        raise RefineGrid("odd Chern difference between spin blocks")
    return diff // 2


def deviation_scaling(p0, lambdaR_values, spec, m=None, chern_grid=48, norm_grid=48):
    """Fit log|sigma_12 - spin_chern/2pi| against log lambdaR at fixed mass.

    p0 supplies t, lambdaSO, r and (if m is None) the mass w - w_c^+.
    Each point is placed at mu = mu_c(lambdaR).
    """
    from .spectrum import critical_curve, critical_energy, mass

    if m is None:
        m = mass(p0)
    if m == 0:
        raise ValueError("mass must be nonzero")
    if len(lambdaR_values) < 2:
        raise ValueError("need at least two lambdaR values for a slope")
    points = []
    bad = []
    for lr in lambdaR_values:
        wc = critical_curve(p0.lambdaSO, lr)[0]
        p = p0.replace(lambdaR=lr, w=wc + m, mu=critical_energy(p0.lambdaSO, lr))
        if not classify_phase(p, grid=min(spec.bz_grid, 96)).is_insulator:
            bad.append(lr)
            continue
        res = spin_conductivity_kubo(p, spec)
        c = spin_chern(p, chern_grid)
        dev = abs(res.sigma[0, 1] - c / (2 * np.pi))
        A, grad = spin_torque_fiber(p)
        points.append(
            {
                "lambdaR": float(lr),
                "dev": float(dev),
                "sigma12": float(res.sigma[0, 1]),
                "spinChern": int(c),
                "tripleNorm": triple_norm(A, grad, norm_grid),
                "errorEstimate": float(res.errorEstimate),
            }
        )
    if bad:
        raise PhaseError(f"not insulating at lambdaR = {bad}")
    x = np.log([pt["lambdaR"] for pt in points])
    y = np.log([pt["dev"] for pt in points])
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept), points
