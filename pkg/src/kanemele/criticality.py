"""Singular structure at the upper critical curve and the conductivity jump.

Near k_F^+ at mu = mu_c the Green function splits as G = S(m, q) + O(1) with
q = (q0, q1, q2) and m = w - w_c^+.  For lambdaSO > 0 only A up, A down and
B down enter S; the B up slot stays far from mu_c.  For lambdaSO < 0 a
different pair of bands closes and S does not describe G, although the
trace identities below remain algebraic facts about S.

The matrix printed with the closed form has two slips that make G - S
unbounded: the (4,4) coefficient has the wrong sign and the two v2 entries
are interchanged.  singular_green(..., printed=True) returns the printed
array for comparison; the default is the asymptotic form of G, which is
what the tests check against the full Green function.
"""
from dataclasses import dataclass

import numpy as np

from .errors import NonConvergence, PhaseError, SingularInput, SingularParameters
from .geometry import dirac_points
from .matsubara import spin_conductivity_matsubara
from .model import SZ, ModelParams, bloch_gradient
from .numerics import QuadratureSpec
from .spectrum import classify_phase, critical_curve, critical_energy


@dataclass(frozen=True)
class SingularCoefficients:
    t: float
    lambdaSO: float
    lambdaR: float
    r: float
    alphaPlus: float
    alphaMinus: float
    alphaTilde: float
    z1: float
    z2: float
    z3: float
    z4: float
    z5: float
    v1: float
    v2: float


def singular_coefficients(t, lambdaSO, lambdaR, r):
    l2 = lambdaSO**2
    ap = 4 * l2 + lambdaR**2
    am = 4 * l2 - lambdaR**2
    at = 3 * t * lambdaSO - 1.5 * lambdaR**2 * r
    return SingularCoefficients(
        t=t,
        lambdaSO=lambdaSO,
        lambdaR=lambdaR,
        r=r,
        alphaPlus=ap,
        alphaMinus=am,
        alphaTilde=at,
        z1=-lambdaR**2 * am / (4 * l2),
        z2=lambdaR * am / (2 * lambdaSO),
        z3=-ap * am / (4 * l2),
        z4=am**2 / (4 * l2),
        z5=am,
        v1=-lambdaR * at * am / (4 * l2),
        v2=at * am / (2 * lambdaSO),
    )


def chi(c, m, q):
    q0, q1, q2 = q
    return (c.alphaMinus / (4 * c.lambdaSO**2)) * (
        m**2 * c.alphaMinus
        - 2j * q0 * m * c.lambdaR**2
        + q0**2 * c.alphaPlus
        + (q1**2 + q2**2) * c.alphaTilde**2
    )


def singular_green(c, m, q, printed=False):
    q0, q1, q2 = q
    x = chi(c, m, q)
    if x == 0:
        raise SingularInput("chi vanishes at (m, q) = 0")
    qp = 1j * q1 + q2
    qm = -1j * q1 + q2
    s = np.zeros((4, 4), dtype=complex)
    s[0, 0] = c.z1 * (1j * q0 + m)
    s[0, 2] = c.v1 * qp
    s[0, 3] = c.z2 * (m + 1j * q0)
    s[2, 0] = c.v1 * qm
    s[2, 2] = 1j * c.z3 * q0 + c.z4 * m
    s[3, 0] = c.z2 * (m + 1j * q0)
    if printed:
        s[2, 3] = c.v2 * qp
        s[3, 2] = c.v2 * qm
        s[3, 3] = c.z5 * (1j * q0 + m)
    else:
        s[2, 3] = c.v2 * qm
        s[3, 2] = c.v2 * qp
        s[3, 3] = -c.z5 * (1j * q0 + m)
    return s / x


def singular_vertices(c, m, q, printed=False):
    """(A~s_1, A~0, A~2) built from dH(k_F^+) and S."""
    s = singular_green(c, m, q, printed)
    p = ModelParams(t=c.t, lambdaSO=c.lambdaSO, w=0.0, lambdaR=c.lambdaR, r=c.r)
    d1, d2 = bloch_gradient(p, dirac_points()[0])
    as1 = 0.5 * (d1 @ SZ + SZ @ d1) @ s
    return as1, 1j * s, d2 @ s


def even_part(c, m, q):
    x = chi(c, m, q)
    return -3 * m * c.t * c.alphaTilde * c.alphaMinus**2 / (4 * c.lambdaSO * x**2)


def odd_part(c, m, q, printed=False):
    """q1 q2 part of the trace.

    The printed prefactor is four times the value obtained from the matrix
    products; printed=True returns it unchanged.
    """
    q0, q1, q2 = q
    x = chi(c, m, q)
    pref = 3 * c.t * c.alphaTilde**3 * c.alphaMinus**3 / (4 * c.lambdaSO**5 * x**3)
    if not printed:
        pref = pref / 4
    return -pref * (c.alphaPlus * q0 - 1j * m * c.lambdaR**2) * q1 * q2


def singular_trace(c, m, q, printed=False):
    """(evenPart, oddPart, matrixProduct) for Tr(A~s_1 A~0 A~2)."""
    if chi(c, m, q) == 0:
        raise SingularInput("chi vanishes")
    as1, a0, a2 = singular_vertices(c, m, q, printed)
    prod = np.trace(as1 @ a0 @ a2)
    return even_part(c, m, q), odd_part(c, m, q, printed), prod


def jump_closed_form(t, lambdaSO, lambdaR, r):
    den = 2 * t * lambdaSO - lambdaR**2 * r
    if den == 0:
        raise SingularParameters("2 t lambdaSO = lambdaR^2 r")
    return -(1 + lambdaR**2 * r / den) / (2 * np.pi)


# integral identities used in the closed-form evaluation


def line_integral_closed_form(a, b, c):
    """Integral over R of (a z^2 + i b z + c)^-2 for 4ac + b^2 > 0, a > 0."""
    return 4 * np.pi * a * (4 * a * c + b * b) ** -1.5


def line_integral_printed(a, b, c):
    return -4 * np.pi * a * (4 * a * c + b * b) ** -1.5


def plane_integral_closed_form(a, b):
    """Integral over R^2 of (a |x|^2 + b)^-3/2 for a, b > 0."""
    return 2 * np.pi / (a * np.sqrt(b))


def critical_point(p_base, m):
    wc = critical_curve(p_base.lambdaSO, p_base.lambdaR)[0]
    return p_base.replace(w=wc + m, mu=critical_energy(p_base.lambdaSO, p_base.lambdaR))


def near_critical_spec(spec, m, t):
    """Patch refinement whose innermost panel tracks the mass scale."""
    inner = abs(m) / (3 * t)
    radius = spec.radius if spec.radius > 0 else 1.0
    return QuadratureSpec(
        bz_grid=spec.bz_grid,
        k0_order=spec.k0_order,
        k0_tol=spec.k0_tol,
        radius=radius,
        centers=spec.centers,
        subgrid=spec.subgrid,
        inner=inner,
    )


def richardson(ms, vals):
    """Linear extrapolation to m = 0 through the two smallest masses."""
    (m1, f1), (m2, f2) = sorted(zip(ms, vals))[:2]
    return (m2 * f1 - m1 * f2) / (m2 - m1)


def jump_numeric(p_base, m_ladder=None, spec=QuadratureSpec(), route="matsubara", check_phase=True):
    """perM = sigma12(w_c^+ + m) - sigma12(w_c^+ - m) and its m -> 0 extrapolation."""
    if m_ladder is None:
        m_ladder = [f * abs(p_base.lambdaSO) for f in (0.08, 0.04, 0.02, 0.01)]
    m_ladder = sorted(m_ladder, reverse=True)
    if any(m <= 0 for m in m_ladder):
        raise ValueError("masses must be positive")
    if route == "matsubara":
        solver = spin_conductivity_matsubara
    else:
        from .kubo import spin_conductivity_kubo as solver
    per_m = []
    details = []
    for m in m_ladder:
        s = near_critical_spec(spec, m, p_base.t)
        vals = []
        for sign in (1, -1):
            p = critical_point(p_base, sign * m)
            if check_phase and not classify_phase(p, grid=min(spec.bz_grid, 64)).is_insulator:
                raise PhaseError(f"not insulating at m = {sign * m}")
            vals.append(solver(p, s))
        per_m.append(vals[0].sigma[0, 1] - vals[1].sigma[0, 1])
        details.append(
            {
                "m": m,
                "sigma_plus": float(vals[0].sigma[0, 1]),
                "sigma_minus": float(vals[1].sigma[0, 1]),
                "perM": float(per_m[-1]),
                "errorEstimate": float(vals[0].errorEstimate + vals[1].errorEstimate),
            }
        )
    steps = np.abs(np.diff(per_m))
    if len(steps) > 1 and np.any(steps[1:] > 1.5 * steps[:-1] + 1e-9):
        raise NonConvergence("perM is not stabilising along the mass ladder", estimate=per_m)
    delta = richardson(m_ladder, per_m) if len(m_ladder) > 1 else per_m[0]
    return float(delta), details
