"""Exponent bookkeeping for the weighted Choquard problem.

Everything here is closed-form arithmetic on the tuple (N, alpha, mu, p):
critical exponents, the existence window, the integrability classes of
positive critical solutions, the Stein-Weiss exponent balance, the
L^s bootstrap recursion for subcritical solutions and the far-field
constant for normalized minimizers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .errors import InvalidParameters, UncoveredRange

INF = math.inf

EXISTS = "Exists"
NONEXISTENCE = "NonexistenceByPohozaev"


@dataclass(frozen=True)
class ProblemParams:
    """Dimension, weight exponent, kernel exponent and (optionally) p.

    ``p=None`` selects the critical problem, where the nonlinearity sits at
    the upper critical exponent.
    """

    N: int
    alpha: float
    mu: float
    p: Optional[float] = None

    @property
    def critical(self) -> bool:
        return self.p is None

    @property
    def exponent(self) -> float:
        """The exponent actually used in the nonlinearity."""
        if self.p is None:
            return upper_critical(self.N, self.alpha, self.mu)
        return float(self.p)

    @property
    def weight_sum(self) -> float:
        return 2.0 * self.alpha + self.mu

    def to_dict(self):
        return {"N": self.N, "alpha": self.alpha, "mu": self.mu, "p": self.p}


def _base_violations(N, alpha, mu) -> List[str]:
    out = []
    if int(N) != N or N < 3:
        out.append("N >= 3 (integer)")
    if not alpha >= 0:
        out.append("alpha >= 0")
    if not (0 < mu < N):
        out.append("0 < mu < N")
    if not 2 * alpha + mu <= N:
        out.append("2*alpha + mu <= N")
    return out


def _check(N, alpha, mu):
    v = _base_violations(N, alpha, mu)
    if v:
        raise InvalidParameters(v)


def upper_critical(N: int, alpha: float, mu: float) -> float:
    """(2N - 2 alpha - mu) / (N - 2)."""
    _check(N, alpha, mu)
    return (2.0 * N - 2.0 * alpha - mu) / (N - 2.0)


def lower_critical(N: int, alpha: float, mu: float) -> float:
    """2 - (2 alpha + mu) / N."""
    _check(N, alpha, mu)
    return 2.0 - (2.0 * alpha + mu) / N


def validate_params(params: ProblemParams) -> List[str]:
    """Return every violated constraint; an empty list means the point is admissible."""
    N, alpha, mu, p = params.N, params.alpha, params.mu, params.p
    out = _base_violations(N, alpha, mu)
    if p is not None and not out:
        lo = 2.0 - (2.0 * alpha + mu) / N
        hi = (2.0 * N - 2.0 * alpha - mu) / (N - 2.0)
        if not p > lo:
            out.append("p > 2_{*alpha,mu} = %.17g" % lo)
        if not p < hi:
            out.append("p < 2*_{alpha,mu} = %.17g" % hi)
    return out


def existence_verdict(params: ProblemParams) -> str:
    if params.p is None:
        raise InvalidParameters("existence_verdict needs an explicit p")
    _check(params.N, params.alpha, params.mu)
    N, a, mu, p = params.N, params.alpha, params.mu, float(params.p)
    top = 2.0 * N - 2.0 * a - mu
    # closed conditions: the endpoints themselves are nonexistence cases
    if p >= top / (N - 2.0) or p <= top / N:
        return NONEXISTENCE
    return EXISTS


@dataclass(frozen=True)
class RegularityVerdict:
    case_label: str
    p_interval: Tuple[float, float]
    q_interval: Tuple[float, float]

    def to_dict(self):
        return {
            "case": self.case_label,
            "p_interval": [_json_float(x) for x in self.p_interval],
            "q_interval": [_json_float(x) for x in self.q_interval],
        }


def _json_float(x):
    return "inf" if x == INF else x


def _ratio(num, den):
    # a non-positive denominator means the bound is vacuous
    return num / den if den > 0 else INF


def regularity_class(N: int, alpha: float, mu: float) -> RegularityVerdict:
    """Integrability class (C1)-(C4) of positive critical solutions.

    Overlapping hypotheses are resolved by first match in C1, C2, C3, C4.
    """
    _check(N, alpha, mu)
    s = 2.0 * alpha + mu
    small = N in (3, 4, 5, 6)
    if small and N - 2 <= s <= min(N, 4):
        return RegularityVerdict(
            "C1",
            (N / (N - 2.0), INF),
            (2.0 * N / (N - 2.0 + s), _ratio(2.0 * N, 2.0 + s - N)),
        )
    if (N in (5, 6) and 4 < s <= N) or (N >= 7 and N - 2 <= s <= N):
        return RegularityVerdict(
            "C2",
            (N / (N - 2.0), _ratio(2.0 * N, s - 4.0)),
            (2.0 * N / (N + s - 2.0), _ratio(2.0 * N, 2.0 * s - N - 2.0)),
        )
    if (small and 0 < s < N - 2) or (
        N >= 7 and (0 <= s <= 4 or (N + 2) / 2.0 <= s < N - 2)
    ):
        return RegularityVerdict(
            "C3",
            (2.0 * N / (N - 2.0 + s), _ratio(2.0 * N, N - 2.0 - s)),
            (N / s, INF),
        )
    if N >= 7 and 4 < s < (N + 2) / 2.0:
        # the printed upper q endpoint 2N/(2s-N-2) is negative here, hence vacuous
        return RegularityVerdict(
            "C4",
            (2.0 * N / (N - 2.0 + s), _ratio(2.0 * N, s - 4.0)),
            (N / s, _ratio(2.0 * N, 2.0 * s - N - 2.0)),
        )
    raise UncoveredRange("no integrability class covers N=%s, 2*alpha+mu=%g" % (N, s))


def hls_exponent_check(r, s, alpha, beta, mu, N, tol=1e-12) -> bool:
    """Whether (r, s, alpha, beta, mu, N) satisfy the Stein-Weiss hypotheses."""
    if not (1 < r < INF and 1 < s < INF):
        return False
    if not (0 < mu < N):
        return False
    if not (alpha + beta >= 0 and alpha + beta + mu <= N):
        return False
    total = 1.0 / r + 1.0 / s + (alpha + beta + mu) / N
    if abs(total - 2.0) > tol * 2.0:
        return False
    return 1.0 - 1.0 / r - mu / N < alpha / N < 1.0 - 1.0 / r


def bootstrap_iteration(N: int, alpha: float, mu: float, p: float, max_steps=1000):
    """Run 1/r_{n+1} = (p-1)(1/r_n - 2/N) from the H^1 starting exponent.

    Returns ``(r_values, steps)``; iteration stops once r_n >= N/2.  A zero or
    negative reciprocal is reported as ``inf``.
    """
    params = ProblemParams(N, alpha, mu, p)
    bad = validate_params(params)
    if bad:
        raise InvalidParameters(bad)
    x = (N - mu - 2.0 * alpha) / N * (1.0 - 1.0 / p)
    inv = [x]
    while x > 2.0 / N:
        if len(inv) > max_steps:
            raise RuntimeError("bootstrap did not terminate in %d steps" % max_steps)
        x = (p - 1.0) * (x - 2.0 / N)
        inv.append(x)
    r = [1.0 / v if v > 0 else INF for v in inv]
    return r, len(r) - 1


def bootstrap_reciprocals(N, alpha, mu, p):
    """Same recursion as :func:`bootstrap_iteration` but on 1/r_n."""
    r, _ = bootstrap_iteration(N, alpha, mu, p)
    return [0.0 if v == INF else 1.0 / v for v in r]


DECAY_VARIANTS = ("proof", "statement", "corrected")


def decay_constant(N: int, alpha: float, mu: float, variant: str = "proof") -> float:
    """Coefficient C in u(|x|) <= C |x|^{-(N-2)/2} for normalized minimizers.

    ``variant``:
      * ``"proof"``     -- [(N-alpha) 2^{2 mu} / w^2]^{1/(2 p*)} (default)
      * ``"statement"`` -- [(N-alpha)^2 2^mu / w^2]^{1/(2 - 2 alpha - mu)}
      * ``"corrected"`` -- [(N-alpha)^2 2^mu / w^2]^{1/(2 p*)}, which is what
        the squared ball integral actually yields

    where w is the unit-sphere area in R^N and p* the upper critical exponent.
    """
    _check(N, alpha, mu)
    s = mu + 2.0 * alpha
    if not (0 < s <= min(4, N)):
        raise InvalidParameters("0 < mu + 2*alpha <= min(4, N)")
    from .grid import sphere_area

    w2 = sphere_area(N) ** 2
    pstar = upper_critical(N, alpha, mu)
    if variant == "proof":
        return ((N - alpha) * 2.0 ** (2 * mu) / w2) ** (1.0 / (2 * pstar))
    if variant == "statement":
        if 2 - s == 0:
            raise InvalidParameters("statement variant undefined for 2*alpha + mu = 2")
        return ((N - alpha) ** 2 * 2.0 ** mu / w2) ** (1.0 / (2 - s))
    if variant == "corrected":
        return ((N - alpha) ** 2 * 2.0 ** mu / w2) ** (1.0 / (2 * pstar))
    raise ValueError("unknown variant %r" % variant)


def decay_exponent(N: int) -> float:
    return -(N - 2) / 2.0


def pohozaev_coefficients(params: ProblemParams) -> Tuple[float, float]:
    """Coefficients of the kinetic and mass terms once Nehari is subtracted off."""
    N = params.N
    c = (2.0 * N - 2.0 * params.alpha - params.mu) / (2.0 * params.exponent)
    return (N - 2) / 2.0 - c, N / 2.0 - c
