"""Finite open-boundary honeycomb flake.

A flake of side L holds the cells alpha1 a1 + alpha2 a2 with 0 <= alpha_i < L,
an A site at each Bravais point and a B site shifted by d3.  Hopping terms
are written as coefficient * T_v (x) M with T_v moving a site by v; hops that
leave the flake are dropped.

Positions entering X are measured from the centroid of the flake, so the
X torque term of the proper current is not inflated by an arbitrary origin
far from where the trace is taken.  When L is even and ceil(L/2) is odd the
central region cannot sit symmetrically and is offset by half a cell.
"""
from dataclasses import dataclass, field
from math import ceil

import numpy as np

from .errors import NoGap
from .geometry import SQRT3, lattice_vectors
from .kubo import ConductivityResult

SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SUBLATTICE_SIGN = (1.0, -1.0)
GAP_MIN = 1e-8


def wedge_sigma(v):
    """(v ^ sigma)_z = v_x sigma_y - v_y sigma_x."""
    return v[0] * SIGMA_Y - v[1] * SIGMA_X


@dataclass
class Flake:
    L: int
    cells: np.ndarray           # (L^2, 2) integer coordinates
    sites: np.ndarray           # (2L^2, 2) positions, A then B per cell
    sublattice: np.ndarray      # (2L^2,) 0 for A, 1 for B
    siteIndex: dict = field(repr=False)
    origin: np.ndarray = None

    @property
    def dim(self):
        return 4 * self.L**2

    def index(self, site, spin):
        return 2 * site + spin

    def positions(self):
        """(dim, 2) positions of each matrix index relative to the origin."""
        return np.repeat(self.sites - self.origin, 2, axis=0)

    def spin(self):
        return np.tile([0.5, -0.5], len(self.sites))

    def center_cells(self, size=None):
        """Indices of the size x size innermost cells (default ceil(L/2))."""
        if size is None:
            size = ceil(self.L / 2)
        lo = (self.L - size) // 2
        keep = np.all((self.cells >= lo) & (self.cells < lo + size), axis=1)
        return np.nonzero(keep)[0]

    def cell_mask(self, cell_ids):
        """Diagonal indicator over matrix indices for the listed cells."""
        mask = np.zeros(self.dim)
        for c in cell_ids:
            for sub in range(2):
                s = 2 * c + sub
                mask[self.index(s, 0)] = mask[self.index(s, 1)] = 1.0
        return mask


def _hopping_terms(p):
    lat = lattice_vectors()
    eye = np.eye(2, dtype=complex)
    so = p.lambdaSO / (3 * SQRT3)
    terms = []
    for j in range(3):
        d, a = lat.d[j], lat.a[j]
        terms += [
            (d, eye, lambda s: p.t),
            (-d, eye, lambda s: p.t),
            (a, SIGMA_Z, lambda s: -1j * so * SUBLATTICE_SIGN[s]),
            (-a, SIGMA_Z, lambda s: 1j * so * SUBLATTICE_SIGN[s]),
            (d, wedge_sigma(d), lambda s: 1j * p.lambdaR / 3),
            (-d, wedge_sigma(d), lambda s: -1j * p.lambdaR / 3),
            (a, wedge_sigma(a), lambda s: 1j * p.lambdaR * p.r / 3),
            (-a, wedge_sigma(a), lambda s: -1j * p.lambdaR * p.r / 3),
        ]
    return terms


def _key(x):
    return tuple(np.round(x, 6))


def build_flake(p, L):
    if not 4 <= L <= 32:
        raise ValueError("L must lie in [4, 32]")
    lat = lattice_vectors()
    cells = np.array([(i, j) for i in range(L) for j in range(L)])
    bravais = cells @ lat.a[:2]
    sites = np.empty((2 * len(cells), 2))
    sites[0::2] = bravais
    sites[1::2] = bravais + lat.d3
    sub = np.tile([0, 1], len(cells))
    lookup = {_key(x): n for n, x in enumerate(sites)}
    flake = Flake(L, cells, sites, sub, lookup, origin=sites.mean(axis=0))

    H = np.zeros((flake.dim, flake.dim), dtype=complex)
    for v, M, coef in _hopping_terms(p):
        for y, pos in enumerate(sites):
            x = lookup.get(_key(pos + v))
            if x is None:
                continue
            H[2 * x:2 * x + 2, 2 * y:2 * y + 2] += coef(sub[x]) * M
    staggered = np.repeat(np.where(sub == 0, p.w, -p.w), 2)
    H[np.diag_indices(flake.dim)] += staggered
    return flake, H


class FlakeSpectrum:
    """Eigen-decomposition of a flake Hamiltonian at a fixed mu."""

    def __init__(self, H, mu):
        e, v = np.linalg.eigh(H)
        if np.min(np.abs(e - mu)) <= GAP_MIN:
            raise NoGap(f"mu = {mu} within {GAP_MIN} of the flake spectrum", energy=mu)
        self.e, self.v, self.mu = e, v, mu
        self.occ = (e <= mu).astype(float)

    def to_eig(self, a):
        return self.v.conj().T @ a @ self.v

    def from_eig(self, a):
        return self.v @ a @ self.v.conj().T

    def projector(self):
        return (self.v * self.occ) @ self.v.conj().T


def _spectrum(H, mu, spec):
    return spec if spec is not None else FlakeSpectrum(H, mu)


def flake_response(flake, H, mu, j, eta=0.0, spectrum=None):
    """Liouvillian inverse of [X_j, P], regularised by eta.

    Element (n, m) is [X_j, P]_nm / (E_n - E_m - i eta) on cross-gap pairs.
    """
    sp = _spectrum(H, mu, spectrum)
    x = flake.positions()[:, j]
    xt = sp.v.conj().T @ (x[:, None] * sp.v)
    comm = xt * (sp.occ[None, :] - sp.occ[:, None])
    diff = sp.e[:, None] - sp.e[None, :]
    cross = sp.occ[:, None] != sp.occ[None, :]
    den = np.where(cross, diff - 1j * eta, 1.0)
    return sp.from_eig(np.where(cross, comm / den, 0.0))


def spin_operator(flake):
    return np.diag(flake.spin()).astype(complex)


def spin_torque(flake, H):
    s = flake.spin()
    return 1j * (H * s[None, :] - s[:, None] * H)


def spin_torque_expectation(flake, H, mu, j, cell=None, spectrum=None):
    """Tr(T_z L_j chi_cell) / |C| for one cell, by default the centre cell."""
    sp = _spectrum(H, mu, spectrum)
    if cell is None:
        cell = central_cells(flake)[0]
    lj = flake_response(flake, H, mu, j, spectrum=sp)
    mask = flake.cell_mask([cell])
    tz = spin_torque(flake, H)
    val = np.einsum("ab,ba,a->", tz, lj, mask)
    return float(val.real) / lattice_vectors().cellArea


def central_cells(flake):
    """The four centremost cells, nearest first."""
    lat = lattice_vectors()
    centres = flake.cells @ lat.a[:2] + 0.5 * lat.d3 - flake.origin
    order = np.argsort(np.hypot(*centres.T), kind="stable")
    return [int(c) for c in order[:4]]


def _currents(flake, H):
    x = flake.positions()
    s = flake.spin()
    tz = spin_torque(flake, H)
    conv, prop = [], []
    for i in range(2):
        hx = H * x[None, :, i] - x[:, None, i] * H     # [H, X_i]
        conv.append(0.5j * (hx * s[None, :] + s[:, None] * hx))
        prop.append(1j * hx * s[None, :] + x[:, None, i] * tz)  # i[H, X_i S_z]
    return conv, prop


def _central_trace(a, b, mask):
    # Tr(chi a b chi) without forming the product
    return np.einsum("ab,ba,a->", a, b, mask).real


def flake_spin_conductivity(flake, H, mu, p=None, sizes=None):
    """sigma_ij = Re Tr(chi J_i L_j chi) / |centre area| for both currents."""
    sp = FlakeSpectrum(H, mu)
    conv, prop = _currents(flake, H)
    lj = [flake_response(flake, H, mu, j, spectrum=sp) for j in range(2)]
    half = ceil(flake.L / 2)
    if sizes is None:
        sizes = sorted({max(2, half - 2), half, min(flake.L, half + 2)})
    area = lattice_vectors().cellArea
    out = {}
    for size in sizes:
        mask = flake.cell_mask(flake.center_cells(size))
        norm = area * size**2
        sc = np.array([[_central_trace(conv[i], lj[j], mask) for j in range(2)] for i in range(2)]) / norm
        spp = np.array([[_central_trace(prop[i], lj[j], mask) for j in range(2)] for i in range(2)]) / norm
        out[size] = (sc, spp)
    sig, sig_prop = out[half]
    return ConductivityResult(
        sigma=sig,
        route="flake",
        gridSpec=None,
        errorEstimate=float(np.std([out[s][0][0, 1] for s in out])),
        params=p,
        extras={
            "L": flake.L,
            "centerSize": half,
            "sigma_proper": sig_prop,
            "proper_minus_conventional": sig_prop - sig,
            "by_center_size": {int(s): out[s][0].tolist() for s in out},
        },
    )


def spin_block_conductivity(flake, H, mu):
    """At lambdaR = 0: the spin-up and spin-down charge conductivities.

    Returns (sigma_up, sigma_down); the spin conductivity is (up - down)/2.
    """
    x = flake.positions()
    s = flake.spin()
    mask = flake.cell_mask(flake.center_cells())
    area = lattice_vectors().cellArea * ceil(flake.L / 2) ** 2
    res = []
    for spin in (0.5, -0.5):
        keep = np.nonzero(s == spin)[0]
        h = H[np.ix_(keep, keep)]
        sp = FlakeSpectrum(h, mu)
        xs = x[keep]
        m = mask[keep]
        sig = np.zeros((2, 2))
        for j in range(2):
            xt = sp.v.conj().T @ (xs[:, j, None] * sp.v)
            comm = xt * (sp.occ[None, :] - sp.occ[:, None])
            diff = sp.e[:, None] - sp.e[None, :]
            cross = sp.occ[:, None] != sp.occ[None, :]
            lj = sp.from_eig(np.where(cross, comm / np.where(cross, diff, 1.0), 0.0))
            for i in range(2):
                cur = 1j * (h * xs[None, :, i] - xs[:, None, i] * h)
                sig[i, j] = _central_trace(cur, lj, m) / area
        res.append(sig)
    return res[0], res[1]
