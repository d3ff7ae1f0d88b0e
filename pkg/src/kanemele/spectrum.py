"""Band structure, local gap and the phase picture around the Dirac points."""
from dataclasses import dataclass, field

import numpy as np

from .geometry import dirac_points, torus_distance
from .model import bloch_hamiltonian
from .numerics import QuadratureSpec, bz_rule, eigh


def bands(p, k):
    """Ascending eigenvalues E1 <= ... <= E4 of the Bloch fiber at k."""
    return eigh(bloch_hamiltonian(p, k)).eigenvalues


def local_gap(p, k):
    e = bands(p, k)
    return e[..., 2] - e[..., 1]


def dirac_eigenvalues(lambdaSO, w, lambdaR):
    """Closed-form spectrum of H(k_F^+), sorted."""
    root = np.hypot(w, lambdaR)
    return np.sort([lambdaSO - root, lambdaSO + root, -lambdaSO - abs(w), -lambdaSO + abs(w)])


def gap_closed_form(lambdaSO, w, lambdaR):
    """Two-branch closed form of the local gap at the Dirac points."""
    if abs(lambdaR) <= 2 * np.sqrt(lambdaSO**2 + abs(w * lambdaSO)):
        return abs(2 * abs(lambdaSO) - abs(w) - np.hypot(w, lambdaR))
    return 2 * abs(w)


def critical_curve(lambdaSO, lambdaR):
    if lambdaSO == 0:
        raise ValueError("lambdaSO must be nonzero")
    wc = max(abs(lambdaSO) - lambdaR**2 / (4 * abs(lambdaSO)), 0.0)
    return wc, -wc


def critical_energy(lambdaSO, lambdaR):
    if lambdaSO == 0:
        raise ValueError("lambdaSO must be nonzero")
    if abs(lambdaR) <= 2 * abs(lambdaSO):
        return -lambdaR**2 / (4 * lambdaSO)
    return -lambdaSO


def mass(p):
    """m = w - w_c^+."""
    return p.w - critical_curve(p.lambdaSO, p.lambdaR)[0]


@dataclass
class PhasePoint:
    params: object
    classification: str  # "Insulator", "SemiMetal" or "Metal"
    gap: float
    minGapLocation: np.ndarray
    closingMomenta: list = field(default_factory=list)

    @property
    def is_insulator(self):
        return self.classification == "Insulator"


def classify_phase(p, grid=96, gap_tol=None, radius=1.0):
    """Classify (H, mu) from the mu-centred gap g(k) = min(E3 - mu, mu - E2).

    The scan uses the uniform grid plus polar patches and the Dirac points
    themselves.
    """
    if gap_tol is None:
        gap_tol = 1e-6 * max(1.0, p.t)
    spec = QuadratureSpec(bz_grid=grid, radius=radius)
    kd = np.array(dirac_points())
    k = np.concatenate([kd, bz_rule(spec).k])
    e = bands(p, k)
    g = np.minimum(e[:, 2] - p.mu, p.mu - e[:, 1])
    i = int(np.argmin(g))
    gmin = float(g[i])
    loc = k[i]
    if gmin > gap_tol:
        return PhasePoint(p, "Insulator", gmin, loc)
    if gmin < -gap_tol:
        # mu cuts through a band somewhere: Fermi surface
        return PhasePoint(p, "Metal", gmin, loc)
    closing = [kd[j] for j in range(2) if abs(g[j]) <= gap_tol]
    near = min(torus_distance(loc, c) for c in kd) <= radius
    if closing and near:
        return PhasePoint(p, "SemiMetal", gmin, loc, closing)
    return PhasePoint(p, "Metal", gmin, loc)
