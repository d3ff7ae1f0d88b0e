"""Invariant suite behind `kanemele check`.

Each check returns a CheckResult; none of them raise on failure so the whole
suite always reports.
"""
from dataclasses import dataclass

import numpy as np

from .kubo import (
    fermi_projector,
    kubo_densities,
    linear_response_fiber,
    projector_gradient,
    spin_conductivity_kubo,
)
from .model import ModelParams, bloch_gradient, bloch_hamiltonian, commutator, time_reversal_check
from .numerics import QuadratureSpec

GENERIC = ModelParams(t=1.0, lambdaSO=0.3, w=0.1, lambdaR=0.2, r=0.5, mu=0.0)


@dataclass
class CheckResult:
    name: str
    value: float
    tol: float

    @property
    def passed(self):
        return bool(self.value < self.tol)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.value:.3e} (tol {self.tol:.0e})"


def _momenta(n, seed):
    return np.random.default_rng(seed).uniform(-np.pi, np.pi, size=(n, 2))


def projector_idempotency(p=GENERIC, n=500, seed=1):
    P = fermi_projector(p, _momenta(n, seed)).P
    res = np.max(np.abs(P @ P - P)) + np.max(np.abs(P - np.conj(np.swapaxes(P, -1, -2))))
    return CheckResult("projector idempotency and hermiticity", float(res), 1e-12)


def gauge_invariance(p=GENERIC, n=500, seed=2):
    k = _momenta(n, seed)
    phases = np.exp(1j * np.random.default_rng(seed + 1).uniform(0, 2 * np.pi, size=(n, 4)))
    base = kubo_densities(p, k)
    moved = kubo_densities(p, k, rephase=phases)
    res = max(np.max(np.abs(a - b)) for a, b in zip(base, moved))
    return CheckResult("eigenvector gauge invariance of the Kubo traces", float(res), 1e-12)


def liouvillian_identity(p=GENERIC, n=500, seed=3):
    k = _momenta(n, seed)
    pf = fermi_projector(p, k)
    dH = bloch_gradient(p, k)
    h = bloch_hamiltonian(p, k)
    res = 0.0
    for j in range(2):
        target = 1j * projector_gradient(pf, dH)[j]
        p1 = linear_response_fiber(pf, dH, j)
        res = max(res, float(np.max(np.abs(commutator(h, p1) - target))))
    return CheckResult("Liouvillian identity [H, P1] = i dP", res, 1e-10)


def time_reversal(p=GENERIC, n=500, seed=4):
    spec, conj = time_reversal_check(p, _momenta(n, seed))
    return CheckResult("time-reversal spectrum symmetry", float(max(spec.max(), conj.max())), 1e-12)


def gradient_fd(p=GENERIC, n=200, seed=5, h=1e-5):
    k = _momenta(n, seed)
    dH = bloch_gradient(p, k)
    res = 0.0
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd = (bloch_hamiltonian(p, k + e) - bloch_hamiltonian(p, k - e)) / (2 * h)
        res = max(res, float(np.max(np.abs(fd - dH[i]))))
    return CheckResult("analytic vs finite-difference gradient", res, 1e-7)


def determinism(p=GENERIC):
    spec = QuadratureSpec(bz_grid=24)
    a = spin_conductivity_kubo(p, spec).sigma
    b = spin_conductivity_kubo(p, spec).sigma
    return CheckResult("bitwise determinism of a Kubo run", 0.0 if a.tobytes() == b.tobytes() else 1.0, 0.5)


ALL_CHECKS = (
    projector_idempotency,
    gauge_invariance,
    liouvillian_identity,
    time_reversal,
    gradient_fd,
    determinism,
)


def run_all(p=GENERIC):
    return [chk(p) for chk in ALL_CHECKS]
