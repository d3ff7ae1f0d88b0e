"""Honeycomb lattice constants and Brillouin-torus helpers.

All lengths are in units of the nearest-neighbour distance.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class LatticeData:
    d: np.ndarray  # rows d1, d2, d3
    a: np.ndarray  # rows a1, a2, a3
    b: np.ndarray  # rows b1, b2
    cellArea: float

    @property
    def d1(self):
        return self.d[0]

    @property
    def d2(self):
        return self.d[1]

    @property
    def d3(self):
        return self.d[2]

    @property
    def a1(self):
        return self.a[0]

    @property
    def a2(self):
        return self.a[1]

    @property
    def a3(self):
        return self.a[2]

    @property
    def b1(self):
        return self.b[0]

    @property
    def b2(self):
        return self.b[1]

    @property
    def bzArea(self):
        return float(abs(np.linalg.det(self.b)))


@lru_cache(maxsize=1)
def lattice_vectors():
    d = np.array([[0.5, -SQRT3 / 2], [0.5, SQRT3 / 2], [-1.0, 0.0]])
    a = np.array([d[1] - d[2], d[2] - d[0], d[0] - d[1]])
    # b_i . a_j = 2 pi delta_ij
    b = 2 * np.pi * np.linalg.solve(a[:2], np.eye(2)).T
    area = float(abs(np.linalg.det(a[:2])))
    for arr in (d, a, b):
        arr.setflags(write=False)
    return LatticeData(d=d, a=a, b=b, cellArea=area)


def to_fractional(k):
    """Coefficients (alpha1, alpha2) of k in the reciprocal basis."""
    lat = lattice_vectors()
    # alpha_i = k . a_i / 2 pi
    return np.asarray(k, dtype=float) @ lat.a[:2].T / (2 * np.pi)


def from_fractional(alpha):
    return np.asarray(alpha, dtype=float) @ lattice_vectors().b


def bz_wrap(k):
    """Representative of k modulo the reciprocal lattice in the fundamental cell."""
    alpha = to_fractional(k)
    alpha = alpha - np.floor(alpha)
    # floor can return exactly 1.0 after rounding of tiny negatives
    alpha = np.where(alpha >= 1.0, 0.0, alpha)
    alpha = np.where(np.abs(alpha) < 1e-14, 0.0, alpha)
    return from_fractional(alpha)


def dirac_points():
    """k_F^+ and k_F^-, as corners of the hexagonal first zone."""
    kp = (2 * np.pi / 3) * np.array([1.0, 1.0 / SQRT3])
    km = (2 * np.pi / 3) * np.array([1.0, -1.0 / SQRT3])
    return kp, km


def torus_distance(k, center):
    """Distance from k to the nearest periodic image of center."""
    lat = lattice_vectors()
    alpha = to_fractional(np.asarray(k) - np.asarray(center))
    alpha = alpha - np.round(alpha)
    best = None
    for n1 in (-1, 0, 1):
        for n2 in (-1, 0, 1):
            v = (alpha + np.array([n1, n2])) @ lat.b
            dist = np.linalg.norm(v, axis=-1)
            best = dist if best is None else np.minimum(best, dist)
    return best


def fractional_grid(n):
    """Uniform n x n grid of momenta, row-major in (alpha1, alpha2)."""
    al = np.arange(n) / n
    a1, a2 = np.meshgrid(al, al, indexing="ij")
    alpha = np.stack([a1.ravel(), a2.ravel()], axis=-1)
    return from_fractional(alpha)
