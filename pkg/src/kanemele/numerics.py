"""Eigensolver and quadrature engines.

The small-matrix eigensolver is a batched cyclic Jacobi method that acts on
arrays of shape (..., n, n).  Brillouin-zone integrals use a uniform periodic
trapezoidal grid, optionally combined with polar patches around chosen
centres (the Dirac points).  The patches enter through a smooth partition of
unity, so the coarse grid only ever sees a smooth periodic integrand.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import NonConvergence
from .geometry import fractional_grid, lattice_vectors, torus_distance

JACOBI_MAX_DIM = 8


@dataclass
class HermitianEigenResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def projectors(self):
        v = self.eigenvectors
        return np.einsum("...in,...jn->...nij", v, v.conj())


def _jacobi(a, max_sweeps=30):
    a = np.array(a, dtype=complex, copy=True)
    n = a.shape[-1]
    v = np.broadcast_to(np.eye(n, dtype=complex), a.shape).copy()
    norm2 = np.sum(np.abs(a) ** 2, axis=(-2, -1))
    tiny = np.finfo(float).tiny
    eps2 = (4 * np.finfo(float).eps) ** 2
    offmask = ~np.eye(n, dtype=bool)
    converged = False
    for _ in range(max_sweeps):
        off = np.sum(np.abs(a[..., offmask]) ** 2, axis=-1)
        if np.all(off <= eps2 * norm2 + tiny):
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[..., p, q]
                mag = np.abs(apq)
                nz = mag > 1e-300
                safe = np.where(nz, mag, 1.0)
                phase = np.where(nz, apq / safe, 1.0)
                theta = (a[..., q, q].real - a[..., p, p].real) / (2 * safe)
                sgn = np.where(theta >= 0, 1.0, -1.0)
                t = np.where(nz, sgn / (np.abs(theta) + np.hypot(theta, 1.0)), 0.0)
                c = 1 / np.sqrt(t * t + 1)
                s = t * c
                upp, upq = c, s
                uqp, uqq = -s * phase.conjugate(), c * phase.conjugate()
                for m in (a, v):
                    cp = m[..., :, p].copy()
                    cq = m[..., :, q]
                    m[..., :, p] = cp * upp[..., None] + cq * uqp[..., None]
                    m[..., :, q] = cp * upq[..., None] + cq * uqq[..., None]
                rp = a[..., p, :].copy()
                rq = a[..., q, :]
                a[..., p, :] = rp * upp[..., None] + rq * np.conj(uqp)[..., None]
                a[..., q, :] = rp * upq[..., None] + rq * np.conj(uqq)[..., None]
                a[..., p, q] = 0.0
                a[..., q, p] = 0.0
    if not converged:
        raise NonConvergence(
            f"Jacobi did not converge: dim={n}, max norm={np.sqrt(norm2.max()):.3e}"
        )
    w = np.real(np.diagonal(a, axis1=-2, axis2=-1))
    order = np.argsort(w, axis=-1, kind="stable")
    w = np.take_along_axis(w, order, axis=-1)
    v = np.take_along_axis(v, order[..., None, :], axis=-1)
    return w, v


def eigh(m, backend="auto"):
    """Eigen-decomposition of (a batch of) Hermitian matrices.

    backend: "jacobi" (batched cyclic Jacobi), "lapack" (numpy), or "auto",
    which picks Jacobi up to dimension 8.
    """
    m = np.asarray(m, dtype=complex)
    n = m.shape[-1]
    herm = m - np.conj(np.swapaxes(m, -1, -2))
    scale = np.max(np.abs(m)) if m.size else 0.0
    if np.max(np.abs(herm), initial=0.0) > 1e-10 * max(scale, 1e-300):
        raise ValueError("matrix is not Hermitian")
    m = 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))
    if backend == "auto":
        backend = "jacobi" if n <= JACOBI_MAX_DIM else "lapack"
    if backend == "jacobi":
        w, v = _jacobi(m)
    elif backend == "lapack":
        w, v = np.linalg.eigh(m)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return HermitianEigenResult(w, v)


# ---------------------------------------------------------------- k0 quadrature


@lru_cache(maxsize=32)
def tangent_rule(order):
    """Gauss-Legendre nodes mapped by k0 = tan(pi x / 2); unit scale.

    Returns (nodes, weights) such that sum(w f(s*x)) * s approximates the
    integral of f over the real line.
    """
    x, w = np.polynomial.legendre.leggauss(order)
    th = 0.5 * np.pi * x
    nodes = np.tan(th)
    weights = 0.5 * np.pi * w / np.cos(th) ** 2
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def integrate_real_line(f, tol=1e-10, scale=1.0, order=64, max_order=8192):
    """Integral of f over the real line by tangent-mapped Gauss-Legendre.

    The order doubles until two successive estimates agree within tol.
    f must accept an array of abscissae.
    """
    def estimate(n):
        x, w = tangent_rule(n)
        return np.sum(w * np.asarray(f(scale * x))) * scale

    prev = estimate(order)
    n = order
    while n < max_order:
        n *= 2
        cur = estimate(n)
        err = abs(cur - prev)
        if err <= tol:
            return cur
        prev = cur
    raise NonConvergence("real-line quadrature did not converge", estimate=prev, error=err)


# ---------------------------------------------------------------- BZ quadrature


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature settings shared by the integrators.

    bz_grid: points per axis of the uniform (alpha1, alpha2) grid.
    k0_order / k0_tol: starting order and tolerance of the k0 rule.
    radius: radius of the polar patches (0 disables them).
    centers: patch centres, default the two Dirac points.
    subgrid: density factor of the patch rule.
    inner: smallest radial panel of the patch, default radius/16.
    """

    bz_grid: int = 96
    k0_order: int = 64
    k0_tol: float = 1e-9
    radius: float = 0.0
    centers: tuple = field(default=None)
    subgrid: int = 8
    inner: float = None

    def __post_init__(self):
        if self.bz_grid < 4 or self.bz_grid % 2:
            raise ValueError("bz_grid must be even and >= 4")
        if self.k0_tol <= 0 or self.k0_order < 2:
            raise ValueError("k0 settings must be positive")
        if self.radius < 0 or self.subgrid < 2 or self.subgrid % 2:
            raise ValueError("radius >= 0 and even subgrid >= 2 required")
        if self.inner is not None and not 0 < self.inner:
            raise ValueError("inner must be positive")

    def patch_centers(self):
        if self.centers is None:
            from .geometry import dirac_points
            return tuple(tuple(c) for c in dirac_points())
        return tuple(tuple(c) for c in self.centers)

    def to_dict(self):
        return {
            "bz_grid": self.bz_grid,
            "k0_order": self.k0_order,
            "k0_tol": self.k0_tol,
            "radius": self.radius,
            "centers": [list(map(float, c)) for c in self.patch_centers()] if self.radius > 0 else [],
            "subgrid": self.subgrid,
            "inner": self.inner,
        }


def _smooth_step(x):
    # 0 for x <= 0, 1 for x >= 1, C-infinity in between
    x = np.clip(x, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        g0 = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        g1 = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1 - x, 1.0)), 0.0)
    return g0 / (g0 + g1)


def bump(rho, radius):
    """Partition-of-unity weight: 1 at the centre, 0 beyond radius.

    The transition spans the whole radius; a narrower one needs a much finer
    coarse grid before the complement 1 - bump is resolved.
    """
    return _smooth_step((radius - np.asarray(rho)) / radius)


@dataclass
class BZRule:
    k: np.ndarray        # (B, 2) nodes
    weights: np.ndarray  # (B,) full rule
    coarse: np.ndarray   # (B,) weights of the lower-resolution companion rule


def _patch_rule(center, radius, subgrid, inner):
    inner = radius / 16 if inner is None else min(inner, radius)
    edges = [0.0]
    h = inner
    while h < radius * (1 - 1e-12):
        edges.append(h)
        # geometric near the centre, at most radius/8 wide further out
        h = min(2 * h, h + radius / 8)
    edges.append(radius)
    nr = 2 * subgrid
    x, w = np.polynomial.legendre.leggauss(nr)
    rho, wr = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        rho.append(lo + (hi - lo) * (x + 1) / 2)
        wr.append(w * (hi - lo) / 2)
    rho = np.concatenate(rho)
    wr = np.concatenate(wr) * rho * bump(rho, radius)
    nth = 6 * subgrid
    th = 2 * np.pi * np.arange(nth) / nth
    R, T = np.meshgrid(rho, th, indexing="ij")
    W = np.broadcast_to(wr[:, None] * (2 * np.pi / nth), R.shape)
    Wc = np.where(np.arange(nth)[None, :] % 2 == 0, 2 * W, 0.0)
    k = np.stack([center[0] + R * np.cos(T), center[1] + R * np.sin(T)], axis=-1)
    return k.reshape(-1, 2), W.ravel(), Wc.ravel()


def bz_rule(spec):
    """Nodes and weights for the Brillouin-zone integral described by spec.

    The weights integrate over the zone with measure dk, so sum(weights)
    equals the zone area.  The coarse companion rule halves the grid and the
    angular resolution; its difference from the full rule is the error
    estimate.
    """
    lat = lattice_vectors()
    n = spec.bz_grid
    k = fractional_grid(n)
    w = np.full(len(k), lat.bzArea / n**2)
    idx = np.arange(n)
    even = (idx[:, None] % 2 == 0) & (idx[None, :] % 2 == 0)
    wc = np.where(even.ravel(), 4 * lat.bzArea / n**2, 0.0)
    if spec.radius <= 0:
        return BZRule(k, w, wc)
    radius = spec.radius
    centers = spec.patch_centers()
    outside = np.ones(len(k))
    for c in centers:
        outside -= bump(torus_distance(k, c), radius)
    ks, ws, wcs = [k], [w * outside], [wc * outside]
    for c in centers:
        pk, pw, pwc = _patch_rule(c, radius, spec.subgrid, spec.inner)
        ks.append(pk)
        ws.append(pw)
        wcs.append(pwc)
    return BZRule(np.concatenate(ks), np.concatenate(ws), np.concatenate(wcs))


def integrate_bz(f, spec, return_error=False, chunk=8192):
    """Integral over the Brillouin torus of f(k), f vectorised over k of shape (B, 2).

    f may return extra trailing axes; the integral is taken along the first.
    """
    rule = bz_rule(spec)
    total = None
    coarse = None
    for s in range(0, len(rule.k), chunk):
        vals = np.asarray(f(rule.k[s:s + chunk]))
        ext = (slice(None),) + (None,) * (vals.ndim - 1)
        part = np.sum(rule.weights[s:s + chunk][ext] * vals, axis=0)
        cpart = np.sum(rule.coarse[s:s + chunk][ext] * vals, axis=0)
        total = part if total is None else total + part
        coarse = cpart if coarse is None else coarse + cpart
    if return_error:
        return total, np.abs(total - coarse)
    return total
