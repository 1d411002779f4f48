"""Scalar functionals of a radial profile and the identities they satisfy.

All functionals are evaluated with one fixed discretization so that their
homogeneities and the Nehari scaling hold to rounding error:

    kinetic  = omega * (u^T L u)               L: finite-volume stiffness
    mass     = omega * sum W_i u_i^2           W: full quadrature weights
    D(u)     = omega * a^T K a,   a_i = W^alpha_i |u_i|^p

where W^alpha are the weights of s^{N-1-alpha} ds (see
:func:`choquard.kernel.weighted_measure`).
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_banded

from .errors import GridMismatch, ModeError, ZeroFunctionError
from .exponents import EXISTS, ProblemParams, existence_verdict, pohozaev_coefficients
from .grid import RadialFunction, dirichlet_norm_sq, mass_norm_sq
from .kernel import KernelMatrix, potential_values, weighted_measure

EPS = 1e-300
EDGE_SKIP = 3


@dataclass
class EnergyReport:
    kinetic: float
    mass: float
    nonlocal_D: float
    energy_I: float
    nehari_residual: float
    pohozaev_residual: float
    quotient: Optional[float] = None

    def to_dict(self):
        return {k: _num(v) for k, v in asdict(self).items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)


def _num(x):
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return None
    return float(x)


def _check(u: RadialFunction, params: ProblemParams, K: KernelMatrix):
    if u.grid != K.grid:
        raise GridMismatch("profile grid does not match kernel grid")
    if params.N != K.N or float(params.mu) != K.mu:
        raise GridMismatch("kernel (N, mu) does not match the problem parameters")


def _exponent(params, p):
    return params.exponent if p is None else float(p)


def double_integral_D(u: RadialFunction, p: float, params: ProblemParams, K: KernelMatrix) -> float:
    """D(u) = int int |u(x)|^p |u(y)|^p / (|x|^a |x-y|^mu |y|^a) dx dy."""
    _check(u, params, K)
    g = K.grid
    a = weighted_measure(g, float(params.alpha)) * np.abs(u.values) ** p
    return g.omega * float(a @ K.apply(a))


def _parts(u: RadialFunction, params: ProblemParams, K: KernelMatrix, p: float):
    kin = dirichlet_norm_sq(u)
    mass = mass_norm_sq(u)
    D = double_integral_D(u, p, params, K)
    return kin, mass, D


def _rel(num, den):
    return num / max(abs(den), EPS)


def pohozaev_defect(kin, mass, D, params: ProblemParams, p: float, with_mass=True) -> float:
    N = params.N
    c = (2.0 * N - 2.0 * params.alpha - params.mu) / (2.0 * p)
    lhs = (N - 2) / 2.0 * kin + (N / 2.0 * mass if with_mass else 0.0)
    return _rel(lhs - c * D, lhs)


def energy_subcritical(u: RadialFunction, params: ProblemParams, K: KernelMatrix) -> EnergyReport:
    """Energy report for I(u) = |u|_{H^1}^2 / 2 - D(u) / (2p)."""
    if params.p is None:
        raise ModeError("energy_subcritical needs an explicit p")
    _check(u, params, K)
    p = float(params.p)
    kin, mass, D = _parts(u, params, K, p)
    return EnergyReport(
        kinetic=kin,
        mass=mass,
        nonlocal_D=D,
        energy_I=0.5 * kin + 0.5 * mass - D / (2.0 * p),
        nehari_residual=_rel(kin + mass - D, kin + mass),
        pohozaev_residual=pohozaev_defect(kin, mass, D, params, p),
    )


def energy_critical(u: RadialFunction, params: ProblemParams, K: KernelMatrix) -> EnergyReport:
    """Report for the critical problem.

    The Nehari and Pohozaev defects are evaluated on the multiple of ``u``
    that carries a unit Lagrange multiplier; ``energy_I`` is the functional
    |grad u|^2 / 2 - D(u) / (2 p*) without the mass term.
    """
    _check(u, params, K)
    p = params.exponent
    kin, mass, D = _parts(u, params, K, p)
    if kin == 0.0:
        return EnergyReport(0.0, mass, D, 0.0, 0.0, 0.0, None)
    Q = kin / D ** (1.0 / p)
    lam2 = (kin / D) ** (1.0 / (p - 1.0))  # lambda^2 with lambda^{2p-2} = kin / D
    kin_l, D_l = lam2 * kin, lam2 ** p * D
    return EnergyReport(
        kinetic=kin,
        mass=mass,
        nonlocal_D=D,
        energy_I=0.5 * kin - D / (2.0 * p),
        nehari_residual=_rel(kin_l - D_l, kin_l),
        pohozaev_residual=pohozaev_defect(kin_l, 0.0, D_l, params, p, with_mass=False),
        quotient=Q,
    )


def energy_report(u, params, K) -> EnergyReport:
    if params.critical:
        return energy_critical(u, params, K)
    return energy_subcritical(u, params, K)


def nonlocal_force(u: np.ndarray, params: ProblemParams, K: KernelMatrix, p: float) -> np.ndarray:
    """W^alpha_i V_i |u_i|^{p-2} u_i with V = K a: the nodal form of the nonlinearity."""
    wa = weighted_measure(K.grid, float(params.alpha))
    V = potential_values(u, p, params.alpha, K)
    return wa * V * np.sign(u) * np.abs(u) ** (p - 1.0)


def energy_gradient(u: RadialFunction, params: ProblemParams, K: KernelMatrix) -> np.ndarray:
    """Nodal gradient dI/du_i of the discrete subcritical energy."""
    _check(u, params, K)
    g = K.grid
    p = _exponent(params, None)
    v = u.values
    lin = g.stiffness_apply(v)
    if not params.critical:
        lin = lin + g.full_weights * v
    return g.omega * (lin - nonlocal_force(v, params, K, p))


def nehari_project(u: RadialFunction, params: ProblemParams, K: KernelMatrix):
    """Scale u onto the Nehari manifold; returns (t, t u)."""
    _check(u, params, K)
    if not np.any(u.values):
        raise ZeroFunctionError("cannot project the zero function onto the Nehari manifold")
    p = _exponent(params, None)
    kin, mass, D = _parts(u, params, K, p)
    if params.critical:
        mass = 0.0
    if not D > 0:
        raise ZeroFunctionError("D(u) = 0: the nonlocal term vanishes")
    t = ((kin + mass) / D) ** (1.0 / (2.0 * p - 2.0))
    return t, RadialFunction(u.grid, t * u.values)


def critical_quotient(u: RadialFunction, params: ProblemParams, K: KernelMatrix) -> float:
    """Q(u) = |grad u|_2^2 / D_{2*}(u)^{1/2*}."""
    _check(u, params, K)
    if not np.any(u.values):
        raise ZeroFunctionError("quotient undefined for the zero function")
    p = upper_exponent(params)
    D = double_integral_D(u, p, params, K)
    return dirichlet_norm_sq(u) / D ** (1.0 / p)


def upper_exponent(params: ProblemParams) -> float:
    return ProblemParams(params.N, params.alpha, params.mu).exponent


def _interior_mask(n):
    m = np.ones(n, dtype=bool)
    m[:EDGE_SKIP] = False
    m[-EDGE_SKIP:] = False
    return m


def _dual_norm(grid, Rw: np.ndarray, shift: bool) -> float:
    """sqrt(omega * Rw^T A^{-1} Rw), A = L (+ W): the H^{-1} (or D^{-1,2}) norm."""
    ab = np.array(grid.stiffness_banded)
    if shift:
        ab[1] += grid.full_weights
    z = solve_banded((1, 1), ab, Rw)
    return math.sqrt(max(grid.omega * float(Rw @ z), 0.0))


def residual_subcritical(u: RadialFunction, params: ProblemParams, K: KernelMatrix):
    """Pointwise residual of -Delta u + u = |x|^{-alpha} w u^{p-1} and its relative H^{-1} norm.

    -Delta is the operator of the discrete energy (W^{-1} L), so an exact
    discrete critical point has zero residual.  The weak norm drops
    three nodes at each end and is divided by |u|_{H^1}.
    """
    _check(u, params, K)
    if params.p is None:
        raise ModeError("residual_subcritical needs an explicit p")
    g = K.grid
    v = u.values
    if not np.any(v):
        return RadialFunction(g, np.zeros(g.n)), 0.0
    Rw = g.stiffness_apply(v) + g.full_weights * v - nonlocal_force(v, params, K, float(params.p))
    R = Rw / g.full_weights
    Rw = np.where(_interior_mask(g.n), Rw, 0.0)
    norm_u = math.sqrt(dirichlet_norm_sq(u) + mass_norm_sq(u))
    return RadialFunction(g, R), _dual_norm(g, Rw, True) / norm_u


def critical_multiplier(u: RadialFunction, params: ProblemParams, K: KernelMatrix) -> float:
    """lambda with lambda^{2p-2} = |grad u|^2 / D(u): lambda u solves the unit-coefficient equation."""
    p = upper_exponent(params)
    kin = dirichlet_norm_sq(u)
    D = double_integral_D(u, p, params, K)
    return (kin / D) ** (1.0 / (2.0 * p - 2.0))


def residual_critical(u: RadialFunction, params: ProblemParams, K: KernelMatrix):
    """Residual of -Delta u = |x|^{-alpha} w u^{2*-1} after the Lagrange rescaling."""
    _check(u, params, K)
    g = K.grid
    if not np.any(u.values):
        return RadialFunction(g, np.zeros(g.n)), 0.0
    p = upper_exponent(params)
    v = critical_multiplier(u, params, K) * u.values
    Rw = g.stiffness_apply(v) - nonlocal_force(v, params, K, p)
    R = Rw / g.full_weights
    Rw = np.where(_interior_mask(g.n), Rw, 0.0)
    norm_v = math.sqrt(g.omega * float(v @ g.stiffness_apply(v)))
    return RadialFunction(g, R), _dual_norm(g, Rw, False) / norm_v


def pohozaev_residual(u: RadialFunction, params: ProblemParams, K: KernelMatrix) -> float:
    """Relative defect of (N-2)/2 |grad u|^2 + N/2 |u|^2 = (2N-2a-mu)/(2p) D(u)."""
    if params.p is None:
        raise ModeError("pohozaev_residual is defined for the subcritical problem")
    _check(u, params, K)
    p = float(params.p)
    kin, mass, D = _parts(u, params, K, p)
    return pohozaev_defect(kin, mass, D, params, p)


def ground_state_ratio(params: ProblemParams) -> float:
    """kinetic / mass implied jointly by the Nehari and Pohozaev identities."""
    a, b = pohozaev_coefficients(params)
    return -b / a


def nonexistence_demo(params: ProblemParams, K: Optional[KernelMatrix] = None) -> dict:
    """Algebraic Pohozaev-minus-Nehari argument for p outside the existence range.

    Subtracting c times the Nehari identity from the Pohozaev identity leaves
    A |grad u|^2 + B |u|^2 = 0; with A and B of one sign only u = 0 fits.
    """
    if params.p is None:
        raise ModeError("nonexistence_demo needs an explicit p")
    if existence_verdict(params) == EXISTS:
        raise ModeError("p = %g lies in the existence range" % params.p)
    A, B = pohozaev_coefficients(params)
    same_sign = (A >= 0 and B >= 0) or (A <= 0 and B <= 0)
    forced = []
    if A != 0:
        forced.append("kinetic")
    if B != 0:
        forced.append("mass")
    return {
        "params": params.to_dict(),
        "kinetic_coefficient": A,
        "mass_coefficient": B,
        "same_sign": same_sign,
        "forces_zero": forced,
        "only_trivial_solution": same_sign and bool(forced),
    }
