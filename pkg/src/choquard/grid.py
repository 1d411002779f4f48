"""Log-uniform radial grids and the discrete calculus used on them.

Nodes are r_i = r_min * rho**i.  In the log variable x = ln r the grid is
uniform with spacing h = ln rho, so a dilation by rho**k is an exact index
shift.  Radial integrals

    int_{R^N} f dx = |S^{N-1}| int_0^inf f(r) r^{N-1} dr

use the trapezoid rule in x (Jacobian r^N) with order-8 Gregory end
corrections, plus an origin cell [0, r_min] on which f is extrapolated
as a power law with a caller-supplied exponent.
"""
from __future__ import annotations

import csv
import functools
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded
from scipy.special import bernoulli, factorial

from .errors import GridMismatch

GREGORY_ORDER = 8


def sphere_area(N: int) -> float:
    """Area of the unit sphere S^{N-1} in R^N."""
    if N < 1:
        raise ValueError("sphere_area needs N >= 1")
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)


@functools.lru_cache(maxsize=None)
def gregory_end_weights(k: int) -> np.ndarray:
    """End weights of the trapezoid rule with k Gregory correction nodes.

    The returned array replaces the weights (1/2, 1, 1, ...) of the first k
    nodes; the rule is then exact for polynomials of degree < k.
    """
    B = bernoulli(k + 2)
    x = np.arange(k, dtype=float)
    V = np.vander(x, k, increasing=True).T
    t = np.zeros(k)
    for d in range(1, k, 2):
        j = (d + 1) // 2
        t[d] = B[2 * j] / factorial(2 * j) * factorial(d)
    w = np.linalg.solve(V, t)
    w[0] += 0.5
    w[1:] += 1.0
    return w


def trapezoid_factors(n: int) -> np.ndarray:
    """Per-node multipliers of h for the corrected trapezoid rule on n nodes."""
    g = np.ones(n)
    k = min(GREGORY_ORDER, n // 2)
    if k < 2:
        g[0] = g[-1] = 0.5
        return g
    e = gregory_end_weights(k)
    g[:k] = e
    g[n - k:] = e[::-1]
    return g


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Log-uniform radial nodes for radially symmetric functions on R^N."""

    N: int
    r_min: float
    r_max: float
    n: int
    nodes: np.ndarray = field(init=False, repr=False)
    h: float = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("grid dimension must be >= 2")
        if not (0 < self.r_min < self.r_max):
            raise ValueError("need 0 < r_min < r_max")
        if self.n < 3:
            raise ValueError("need at least 3 nodes")
        h = math.log(self.r_max / self.r_min) / (self.n - 1)
        x = math.log(self.r_min) + h * np.arange(self.n)
        nodes = np.exp(x)
        nodes[0], nodes[-1] = self.r_min, self.r_max
        w = h * trapezoid_factors(self.n) * nodes ** self.N
        for name, val in (("nodes", nodes), ("h", h), ("weights", w)):
            if isinstance(val, np.ndarray):
                val.setflags(write=False)
            object.__setattr__(self, name, val)

    @classmethod
    def default(cls, N: int, n: int = 1024, r_max: float = 100.0, r_min: float | None = None):
        return cls(N, r_max * 1e-4 if r_min is None else r_min, r_max, n)

    def key(self):
        return (self.N, self.r_min, self.r_max, self.n)

    def __eq__(self, other):
        return isinstance(other, RadialGrid) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    @property
    def rho(self) -> float:
        return math.exp(self.h)

    @property
    def omega(self) -> float:
        return sphere_area(self.N)

    def origin_weight(self, power: float = 0.0) -> float:
        """int_0^{r_min} (r/r_min)^power r^{N-1} dr."""
        return self.r_min ** self.N / (self.N + power)

    @functools.cached_property
    def full_weights(self) -> np.ndarray:
        """Quadrature weights including the origin cell (constant extrapolation)."""
        w = self.weights.copy()
        w[0] += self.origin_weight()
        w.setflags(write=False)
        return w

    # -- stiffness -------------------------------------------------------
    @functools.cached_property
    def edge_coefficients(self) -> np.ndarray:
        """c_e = |cell e| / (dr_e)^2 for the cells [r_i, r_{i+1}]."""
        r = self.nodes
        m = (r[1:] ** self.N - r[:-1] ** self.N) / self.N
        dr = np.diff(r)
        c = m / dr ** 2
        c.setflags(write=False)
        return c

    @property
    def robin_coefficient(self) -> float:
        """Exterior energy of the harmonic extension u(R) (R/r)^{N-2}, per u(R)^2."""
        return (self.N - 2.0) * self.r_max ** (self.N - 2)

    @functools.cached_property
    def stiffness_banded(self) -> np.ndarray:
        """Tridiagonal stiffness matrix L in LAPACK banded layout (3, n)."""
        c = self.edge_coefficients
        ab = np.zeros((3, self.n))
        diag = np.zeros(self.n)
        diag[:-1] += c
        diag[1:] += c
        diag[-1] += self.robin_coefficient
        ab[0, 1:] = -c
        ab[1] = diag
        ab[2, :-1] = -c
        ab.setflags(write=False)
        return ab

    def stiffness_apply(self, u: np.ndarray) -> np.ndarray:
        c = self.edge_coefficients
        du = np.diff(u)
        flux = c * du
        out = np.zeros_like(u, dtype=float)
        out[:-1] -= flux
        out[1:] += flux
        out[-1] += self.robin_coefficient * u[-1]
        return out

    def solve_stiffness(self, rhs: np.ndarray, shift_weights: bool) -> np.ndarray:
        """Solve (L + W) u = rhs if ``shift_weights`` else L u = rhs."""
        ab = np.array(self.stiffness_banded)
        if shift_weights:
            ab[1] += self.full_weights
        return solve_banded((1, 1), ab, rhs)

    def check(self, other: "RadialGrid"):
        if other != self:
            raise GridMismatch("grid mismatch: %s vs %s" % (self.key(), other.key()))


class RadialFunction:
    """Values of a radial profile on the nodes of a :class:`RadialGrid`."""

    __slots__ = ("grid", "values", "nonnegative")

    def __init__(self, grid: RadialGrid, values, nonnegative: bool = False):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.n,):
            raise GridMismatch("expected %d values, got %s" % (grid.n, values.shape))
        if not np.all(np.isfinite(values)):
            raise ValueError("radial function has non-finite values")
        if nonnegative and np.any(values < 0):
            raise ValueError("profile flagged nonnegative has negative values")
        self.grid = grid
        self.values = values
        self.nonnegative = nonnegative

    @classmethod
    def from_callable(cls, grid: RadialGrid, f, **kw):
        return cls(grid, f(grid.nodes), **kw)

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    def with_values(self, values) -> "RadialFunction":
        return RadialFunction(self.grid, values)

    def __mul__(self, c):
        return RadialFunction(self.grid, self.values * c)

    __rmul__ = __mul__

    def __add__(self, other):
        self.grid.check(other.grid)
        return RadialFunction(self.grid, self.values + other.values)

    def __sub__(self, other):
        self.grid.check(other.grid)
        return RadialFunction(self.grid, self.values - other.values)

    def __len__(self):
        return self.grid.n

    def __repr__(self):
        return "RadialFunction(N=%d, n=%d)" % (self.grid.N, self.grid.n)


def _values(f):
    return f.values if isinstance(f, RadialFunction) else np.asarray(f, dtype=float)


def origin_exponent(f: RadialFunction) -> float:
    """Exponent a of the local law f ~ r^a fitted through the first two nodes.

    Falls back to 0 when the two values differ in sign or vanish; clipped so
    the origin-cell integral stays finite.
    """
    v0, v1 = float(f.values[0]), float(f.values[1])
    if v0 == 0.0 or v0 * v1 <= 0.0:
        return 0.0
    a = math.log(v1 / v0) / f.grid.h
    return min(max(a, 0.5 - f.grid.N), 4.0)


def integrate(f: RadialFunction, origin_power: float = 0.0) -> float:
    """Integral over R^N of a radial function.

    ``origin_power`` is the exponent a of the local law f ~ f(r_min) (r/r_min)^a
    used on the origin cell; pass ``-alpha`` for integrands carrying |x|^{-alpha}.
    """
    g = f.grid
    v = f.values
    return g.omega * (float(g.weights @ v) + g.origin_weight(origin_power) * v[0])


def radial_derivative(f: RadialFunction) -> RadialFunction:
    """Second order three-point derivative on the uneven node spacing."""
    r = f.grid.nodes
    y = f.values
    d = np.empty_like(y)
    h1 = r[1:-1] - r[:-2]
    h2 = r[2:] - r[1:-1]
    d[1:-1] = (
        -h2 / (h1 * (h1 + h2)) * y[:-2]
        + (h2 - h1) / (h1 * h2) * y[1:-1]
        + h1 / (h2 * (h1 + h2)) * y[2:]
    )
    a, b = r[1] - r[0], r[2] - r[1]
    d[0] = -(2 * a + b) / (a * (a + b)) * y[0] + (a + b) / (a * b) * y[1] - a / (b * (a + b)) * y[2]
    a, b = r[-1] - r[-2], r[-2] - r[-3]
    d[-1] = (2 * a + b) / (a * (a + b)) * y[-1] - (a + b) / (a * b) * y[-2] + a / (b * (a + b)) * y[-3]
    return RadialFunction(f.grid, d)


def fornberg_weights(z: float, x: np.ndarray, m: int) -> np.ndarray:
    """Finite difference weights for derivatives 0..m at z from nodes x."""
    n = len(x)
    c = np.zeros((n, m + 1))
    c1, c4 = 1.0, x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


_CENTRAL_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_CENTRAL_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


def _log_derivatives(y: np.ndarray, h: float):
    """Fourth order first and second derivatives in the log variable."""
    n = len(y)
    fx = np.empty(n)
    fxx = np.empty(n)
    win = np.stack([y[k:n - 4 + k] for k in range(5)])
    fx[2:-2] = _CENTRAL_D1 @ win
    fxx[2:-2] = _CENTRAL_D2 @ win
    x = np.arange(6.0)
    for i in (0, 1):
        c = fornberg_weights(float(i), x, 2)
        fx[i], fxx[i] = c[:, 1] @ y[:6], c[:, 2] @ y[:6]
        c = fornberg_weights(5.0 - i, x, 2)
        fx[n - 1 - i], fxx[n - 1 - i] = c[:, 1] @ y[-6:], c[:, 2] @ y[-6:]
    return fx / h, fxx / h ** 2


def radial_laplacian(f: RadialFunction) -> RadialFunction:
    """f'' + (N-1) f'/r, fourth order in the log variable (one-sided at the ends).

    With x = ln r the radial Laplacian is r^{-2} (f_xx + (N-2) f_x).
    """
    g = f.grid
    if g.n < 6:
        raise ValueError("radial_laplacian needs at least 6 nodes")
    fx, fxx = _log_derivatives(f.values, g.h)
    return RadialFunction(g, (fxx + (g.N - 2) * fx) / g.nodes ** 2)


def dirichlet_norm_sq(f: RadialFunction) -> float:
    """int |grad f|^2 over R^N.

    Cellwise difference quotients weighted by the exact shell measure of each
    cell, plus the energy of the harmonic continuation beyond r_max.
    """
    g = f.grid
    v = _values(f)
    return g.omega * (float(g.edge_coefficients @ np.diff(v) ** 2) + g.robin_coefficient * v[-1] ** 2)


def mass_norm_sq(f: RadialFunction) -> float:
    g = f.grid
    v = _values(f)
    return g.omega * float(g.full_weights @ (v * v))


def h1_norm_sq(f: RadialFunction) -> float:
    return dirichlet_norm_sq(f) + mass_norm_sq(f)


def dilate(f: RadialFunction, k: int, weight: float | None = None) -> RadialFunction:
    """Return tau^{w} f(tau r) with tau = rho**k (an index shift by k).

    ``weight`` defaults to (N-2)/2, the D^{1,2}-invariant scaling.  Nodes shifted
    past the outer end are filled with the harmonic tail, nodes shifted below
    r_min with the value at r_min.
    """
    g = f.grid
    if weight is None:
        weight = (g.N - 2) / 2.0
    v = f.values
    n = g.n
    idx = np.arange(n) + k
    out = np.empty(n)
    inside = (idx >= 0) & (idx < n)
    out[inside] = v[idx[inside]]
    out[idx < 0] = v[0]
    far = idx >= n
    if np.any(far):
        out[far] = v[-1] * np.exp(-(g.N - 2) * g.h * (idx[far] - (n - 1)))
    return RadialFunction(g, math.exp(weight * g.h * k) * out)


# -- serialization -----------------------------------------------------------

def profile_to_csv(f: RadialFunction) -> str:
    buf = io.StringIO()
    buf.write("r,u\n")
    for r, u in zip(f.grid.nodes, f.values):
        buf.write("%s,%s\n" % (repr(float(r)), repr(float(u))))
    return buf.getvalue()


def write_profile(path, f: RadialFunction):
    with open(path, "w", newline="") as fh:
        fh.write(profile_to_csv(f))


def read_profile(path, grid: RadialGrid, rtol: float = 1e-12) -> RadialFunction:
    """Parse a ``r,u`` CSV onto ``grid``; raises ValueError on malformed input."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["r", "u"]:
        raise ValueError("profile CSV must start with header 'r,u'")
    body = [row for row in rows[1:] if row]
    if len(body) != grid.n:
        raise ValueError("profile has %d rows, grid has %d nodes" % (len(body), grid.n))
    try:
        data = np.array([[float(a), float(b)] for a, b in body])
    except (ValueError, TypeError) as exc:
        raise ValueError("malformed profile row: %s" % exc) from None
    if not np.allclose(data[:, 0], grid.nodes, rtol=rtol, atol=0):
        raise ValueError("profile radii do not match the configured grid")
    return RadialFunction(grid, data[:, 1])
