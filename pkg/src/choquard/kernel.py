"""Nonlocal kernels on radial grids.

The spherical average of |x - y|^{-mu} over |y| = s, for |x| = r, is

    k(r, s) = |S^{N-2}| int_0^pi sin^{N-2}(t) (r^2 + s^2 - 2 r s cos t)^{-mu/2} dt.

With v = (1 - cos t)/2 and c = (r - s)^2 / (4 r s) this becomes

    k(r, s) = |S^{N-2}| 2^{N-2} (4 r s)^{-mu/2} int_0^1 (v(1-v))^b (c + v)^{-mu/2} dv,

b = (N - 3)/2.  The near-singularity at v = -c is removed by the map
v = c((1 + 1/c)^xi - 1), after which Gauss-Jacobi quadrature in xi with
weight (xi(1-xi))^b converges geometrically for every c > 0.

On a log-uniform grid k(r_i, r_j) = r_i^{-mu} k(1, rho^{j-i}), so a kernel
matrix needs only 2n - 1 angular evaluations.  Diagonal entries carry the
local singularity correction of the trapezoid rule in the log variable.
"""
from __future__ import annotations

import functools
import math

import numpy as np
from scipy import integrate as spi
from scipy.special import beta as beta_fn, roots_jacobi

from .errors import DivergentIntegral, GridMismatch, QuadratureError
from .grid import RadialFunction, RadialGrid, gregory_end_weights, origin_exponent, sphere_area

ANGULAR_NODES = 64
ANGULAR_RTOL = 1e-10
ANGULAR_MAX_NODES = 4096
CORRECTION_HALF_WIDTH = 16


@functools.lru_cache(maxsize=64)
def _jacobi_rule(n: int, b: float):
    x, w = roots_jacobi(n, b, b)
    # map [-1, 1] -> [0, 1]: weight (1-x)^b (1+x)^b = 4^b (xi (1 - xi))^b
    return (x + 1.0) / 2.0, w / 2.0 ** (2 * b + 1)


def _angular_integral(c: np.ndarray, N: int, mu: float, n: int) -> np.ndarray:
    """int_0^1 (v(1-v))^b (c+v)^{-mu/2} dv for c > 0, on n Gauss-Jacobi nodes."""
    b = (N - 3) / 2.0
    xi, w = _jacobi_rule(n, b)
    c = c[:, None]
    L = np.log1p(1.0 / c)
    Lx = L * xi
    # c + v = c e^{L xi};  v = c expm1(L xi);  1 - v = (1 + c)(1 - e^{-L(1-xi)})
    log_cv = np.log(c) + Lx
    f = L * np.exp((1.0 - mu / 2.0) * log_cv)
    if b != 0.0:
        with np.errstate(invalid="ignore", divide="ignore"):
            v_over = c * np.expm1(Lx) / xi
            one_minus = (1.0 + c) * -np.expm1(-L * (1.0 - xi)) / (1.0 - xi)
        f = f * (v_over * one_minus) ** b
    return f @ w


def angular_kernel(N: int, mu: float, r, s):
    """Average of |x - y|^{-mu} over the sphere |y| = s (times its area), |x| = r.

    Vectorized over ``r`` and ``s``.  Returns ``inf`` on the diagonal when
    mu >= N - 1, where the pointwise value diverges.
    """
    if not (0 < mu < N):
        raise ValueError("angular kernel needs 0 < mu < N")
    r_arr, s_arr = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(s, dtype=float))
    if np.any(r_arr <= 0) or np.any(s_arr <= 0):
        raise ValueError("angular kernel needs r, s > 0")
    shape = r_arr.shape
    r_f, s_f = r_arr.ravel(), s_arr.ravel()
    out = _kernel_core(N, mu, 4.0 * r_f * s_f, (r_f - s_f) ** 2 / (4.0 * r_f * s_f))
    if shape == ():
        return float(out[0])
    return out.reshape(shape)


def kernel_log_ratio(N: int, mu: float, x):
    """k(1, e^x), with c = sinh(x/2)^2 computed without cancellation."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return _kernel_core(N, mu, 4.0 * np.exp(x), np.sinh(x / 2.0) ** 2)


def _kernel_core(N, mu, rs4, c):
    b = (N - 3) / 2.0
    J = np.empty_like(c)
    diag = c == 0
    if np.any(diag):
        J[diag] = beta_fn(b + 1.0 - mu / 2.0, b + 1.0) if mu < N - 1 else np.inf
    off = ~diag
    if np.any(off):
        idx = np.flatnonzero(off)
        n = ANGULAR_NODES
        prev = _angular_integral(c[idx], N, mu, n)
        while idx.size:
            n *= 2
            cur = _angular_integral(c[idx], N, mu, n)
            done = np.abs(cur - prev) <= ANGULAR_RTOL * np.abs(cur)
            J[idx[done]] = cur[done]
            idx, prev = idx[~done], cur[~done]
            if idx.size and n >= ANGULAR_MAX_NODES:
                raise QuadratureError("angular quadrature failed to converge")
    pref = sphere_area(N - 1) * 2.0 ** (N - 2)
    return pref * rs4 ** (-mu / 2.0) * J


def angular_kernel_n3(mu: float, r, s):
    """Closed form of the N = 3 spherical average (used as an oracle)."""
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    d = np.abs(r - s)
    if mu == 2:
        return 2 * np.pi * np.log((r + s) / d) / (r * s)
    return 2 * np.pi * (d ** (2 - mu) - (r + s) ** (2 - mu)) / (r * s * (mu - 2))


@functools.lru_cache(maxsize=64)
def _window_integral(N, mu, a, b):
    """int_a^b k(1, e^x) e^{Nx} dx for a < 0 < b, singular point at x = 0."""
    # x = +-W t^q flattens the |x|^{N-1-mu} (or log) behaviour at x = 0
    q = max(2.0, 4.0 / (N - mu))

    def f(t, W):
        x = W * t ** q
        if x == 0.0:
            return 0.0  # limit of the transformed integrand
        return float(kernel_log_ratio(N, mu, x)[0]) * math.exp(N * x) * abs(W) * q * t ** (q - 1.0)

    total = 0.0
    for W in (a, b):
        val, err = spi.quad(f, 0.0, 1.0, args=(W,), epsabs=0.0, epsrel=1e-13, limit=400)
        if not err <= 1e-9 * abs(val):
            raise QuadratureError("singular window integral did not converge (err=%g)" % err)
        total += val
    return total


@functools.lru_cache(maxsize=64)
def diagonal_correction(N: int, mu: float, h: float, M: int = CORRECTION_HALF_WIDTH) -> float:
    """Diagonal entry of k(1, .) for the log-trapezoid rule with spacing h.

    Chosen so that the rule integrates k(1, e^x) e^{Nx} exactly over the window
    |x| <= M h; it depends only on (N, mu, h), which keeps the assembled
    matrix exactly covariant under grid dilations.  On very coarse grids the
    window is narrowed to |x| <= 3, and if the corrected entry is not
    positive the plain cell average over |x| <= h/2 is used instead.
    """
    M = max(1, min(M, int(3.0 / h)))
    total = _window_integral(N, mu, -M * h, M * h)
    m = np.arange(-M, M + 1)
    g = np.ones(2 * M + 1)
    e = gregory_end_weights(min(8, M))
    g[: len(e)] = e
    g[len(g) - len(e):] = e[::-1]
    km = kernel_log_ratio(N, mu, h * m[m != 0])
    smooth = float(np.sum(g[m != 0] * km * np.exp(N * h * m[m != 0])))
    k0 = total / h - smooth
    if not (math.isfinite(k0) and k0 > 0):
        k0 = _window_integral(N, mu, -h / 2, h / 2) / h
    return k0


class KernelMatrix:
    """Dense matrix k[i, j] ~ k(r_i, r_j) for the Riesz kernel |x-y|^{-mu}."""

    def __init__(self, N: int, mu: float, grid: RadialGrid, k: np.ndarray):
        self.N = N
        self.mu = float(mu)
        self.grid = grid
        k.setflags(write=False)
        self.k = k

    def apply(self, a: np.ndarray) -> np.ndarray:
        return self.k @ a

    def offdiag_mask(self):
        return ~np.eye(self.grid.n, dtype=bool)

    def dump_csv(self, fh):
        r = self.grid.nodes
        fh.write("i,j,r_i,s_j,k\n")
        for i in range(self.grid.n):
            row = self.k[i]
            for j in range(self.grid.n):
                fh.write("%d,%d,%r,%r,%r\n" % (i, j, float(r[i]), float(r[j]), float(row[j])))


def assemble_kernel(N: int, mu: float, grid: RadialGrid) -> KernelMatrix:
    """Assemble the kernel matrix of |x - y|^{-mu} on ``grid``."""
    if grid.N != N:
        raise GridMismatch("grid dimension %d != kernel dimension %d" % (grid.N, N))
    return _assemble_cached(N, float(mu), grid)


@functools.lru_cache(maxsize=16)
def _assemble_cached(N, mu, grid):
    n = grid.n
    h = grid.h
    m = np.arange(1, n)
    # kappa_m = k(1, rho^m) for m >= 1; by homogeneity k(r_i, r_j) = r_i^{-mu} kappa_{j-i}
    kappa = kernel_log_ratio(N, mu, h * m)
    k0 = diagonal_correction(N, mu, h)
    r = grid.nodes
    j_minus_i = np.subtract.outer(np.arange(n), np.arange(n))  # i - j
    k = np.empty((n, n))
    upper = j_minus_i < 0
    d = -j_minus_i[upper]
    ri = np.broadcast_to(r[:, None], (n, n))[upper]
    k[upper] = ri ** (-mu) * kappa[d - 1]
    k.T[upper] = k[upper]
    np.fill_diagonal(k, r ** (-mu) * k0)
    return KernelMatrix(N, mu, grid, k)


@functools.lru_cache(maxsize=32)
def weighted_measure(grid: RadialGrid, alpha: float) -> np.ndarray:
    """Quadrature weights for int f(s) s^{N-1-alpha} ds.

    The origin cell uses the law s^{-alpha} so that no weight is ever
    evaluated at s = 0.
    """
    w = grid.weights * grid.nodes ** (-alpha)
    w[0] += grid.origin_weight(-alpha) * grid.r_min ** (-alpha)
    w.setflags(write=False)
    return w


def _check_kernel(u: RadialFunction, K: KernelMatrix):
    if u.grid != K.grid:
        raise GridMismatch("profile grid does not match kernel grid")


def weighted_potential(u: RadialFunction, p: float, params, K: KernelMatrix) -> RadialFunction:
    """w(r) = int k(r, s) |u(s)|^p s^{N-1-alpha} ds.

    The outer |x|^{-alpha} is left to the caller.
    """
    _check_kernel(u, K)
    if params.N != K.N or float(params.mu) != K.mu:
        raise GridMismatch("kernel (N, mu) does not match the problem parameters")
    g = K.grid
    return RadialFunction(g, potential_values(u.values, p, params.alpha, K))


def potential_values(u: np.ndarray, p: float, alpha: float, K: KernelMatrix) -> np.ndarray:
    """Array version of :func:`weighted_potential` for the solvers' inner loops."""
    return K.apply(weighted_measure(K.grid, float(alpha)) * np.abs(u) ** p)


@functools.lru_cache(maxsize=16)
def _green_kernel(grid: RadialGrid):
    return assemble_kernel(grid.N, grid.N - 2.0, grid)


def riesz_green_apply(f: RadialFunction, bare: bool = False, tail_rtol: float = 1e-3) -> RadialFunction:
    """Apply the Newtonian potential c_N int f(y) |x - y|^{2-N} dy.

    c_N = 1 / ((N - 2) |S^{N-1}|) makes this the inverse of -Delta; with
    ``bare=True`` the constant is dropped.  Raises :class:`DivergentIntegral`
    when the tail of int |f| r dr has not died out by r_max.
    """
    g = f.grid
    if g.N < 3:
        raise ValueError("Newtonian potential needs N >= 3")
    v = f.values
    moment = np.abs(v) * g.nodes ** 2 * g.h  # per-node contribution to int |f| r dr
    total = float(moment.sum())
    if total > 0 and moment[-1] > tail_rtol * total:
        raise DivergentIntegral("int |f| r dr does not converge on the grid")
    K = _green_kernel(g)
    a = g.weights * v
    a[0] += g.origin_weight(origin_exponent(f)) * v[0]
    out = K.apply(a)
    if not bare:
        out = out / ((g.N - 2.0) * g.omega)
    return RadialFunction(g, out)


def bessel_kernel(N: int, tau: float, r: float, rtol: float = 1e-12) -> float:
    """Bessel kernel g_tau(r), the kernel of (I - Delta)^{-tau/2} on R^N.

    g_tau(r) = (4 pi)^{-tau/2} / Gamma(tau/2)
               * int_0^inf exp(-pi r^2 / t - t / (4 pi)) t^{(tau - N)/2 - 1} dt,

    evaluated in the variable s = ln t.
    """
    if not (tau > 0 and r > 0):
        raise ValueError("bessel_kernel needs tau > 0 and r > 0")
    a = (tau - N) / 2.0
    A = math.pi * r * r
    B = 1.0 / (4.0 * math.pi)

    def expo(s):
        return -A * math.exp(-s) - B * math.exp(s) + a * s

    # stationary point of the exponent, by bisection on its derivative
    lo, hi = math.log(A) - 60.0, math.log(1.0 / B) + 60.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if A * math.exp(-mid) - B * math.exp(mid) + a > 0:
            lo = mid
        else:
            hi = mid
    s0 = 0.5 * (lo + hi)
    peak = expo(s0)
    cut = 745.0
    left, right = s0 - 1.0, s0 + 1.0
    while expo(left) - peak > -cut:
        left -= 1.0
    while expo(right) - peak > -cut:
        right += 1.0
    pts = np.linspace(left, right, 9)
    total, err = 0.0, 0.0
    for x0, x1 in zip(pts[:-1], pts[1:]):
        val, e = spi.quad(lambda s: math.exp(expo(s) - peak), x0, x1, epsabs=0.0, epsrel=rtol, limit=200)
        total += val
        err += e
    if not err <= 1e-9 * total:
        raise QuadratureError("Bessel kernel quadrature error %g exceeds tolerance" % err)
    logpref = -(tau / 2.0) * math.log(4.0 * math.pi) - math.lgamma(tau / 2.0)
    return math.exp(logpref + peak) * total


def helmholtz_solve(f: RadialFunction) -> RadialFunction:
    """Solve (I - Delta) u = f with the grid's finite-volume Laplacian.

    Regularity at the origin is the zero-flux condition through r_min; at
    r_max the harmonic-extension flux is used.
    """
    g = f.grid
    rhs = g.weights * f.values
    rhs[0] += g.origin_weight(origin_exponent(f)) * f.values[0]
    u = g.solve_stiffness(rhs, shift_weights=True)
    if not np.all(np.isfinite(u)):
        raise np.linalg.LinAlgError("singular Helmholtz system")
    return RadialFunction(g, u)
