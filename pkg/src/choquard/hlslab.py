"""Monte Carlo oracle for weighted double integrals and Stein-Weiss experiments.

The estimator samples x from an isotropic density proportional to
|x|^{-alpha} (1 + |x|^2/s^2)^{-b} and the offset z = y - x from one
proportional to |z|^{-mu} (...)^{-b}, so the singular factors |x|^{-alpha}
and |x - y|^{-mu} cancel exactly in the importance weight.  Radii are drawn
through T = (R/s)^2, which is Beta-prime distributed.

Sampling is split into fixed-size blocks, each with its own Philox stream
keyed by (seed, block index).  Block sums are reduced in block order, so the
estimate depends on (seed, samples) only and not on the number of workers.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidParameters, NonfiniteSample, OverlapError
from .exponents import ProblemParams, hls_exponent_check, upper_critical
from .grid import RadialFunction, RadialGrid, sphere_area

BLOCK = 1 << 16


def talenti_bubble(N: int, t: float, r):
    """[N(N-2)]^{(N-2)/4} (t / (t^2 + r^2))^{(N-2)/2}, centred at the origin."""
    if not t > 0:
        raise ValueError("t must be positive")
    r = np.asarray(r, dtype=float)
    out = (N * (N - 2.0)) ** ((N - 2) / 4.0) * (t / (t * t + r * r)) ** ((N - 2) / 2.0)
    return float(out) if out.ndim == 0 else out


@dataclass
class McEstimate:
    value: float
    stderr: float
    samples: int
    seed: int

    def to_dict(self):
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.value - target) <= k * self.stderr


def worker_count(workers: Optional[int] = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("CHOQUARD_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


class RadialSampler:
    """Isotropic density c |x|^{-a} (1 + |x|^2/s^2)^{-b} on R^N, b = (N - a)/2 + 1.

    T = (|x|/s)^2 is then Beta-prime(k, 1) with k = (N - a)/2, whose
    quantile function is explicit: T = v / (1 - v) with v = U^{1/k}.  The
    density decays like |x|^{-(N+2)}.
    """

    def __init__(self, N: int, a: float, scale: float = 1.0):
        if not a < N:
            raise ValueError("sampler singularity must be integrable")
        self.N, self.a, self.scale = N, float(a), float(scale)
        self.k = (N - self.a) / 2.0
        self.log_const = math.log(self.k) + math.log(2.0) - 2.0 * math.log(self.scale) \
            - math.log(sphere_area(N))

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        v = rng.random(m) ** (1.0 / self.k)
        R = self.scale * np.sqrt(v / (1.0 - v))
        d = rng.standard_normal((m, self.N))
        d /= np.linalg.norm(d, axis=1)[:, None]
        return d * R[:, None]

    def log_reduced_density(self, x: np.ndarray) -> np.ndarray:
        """log q(x) + a log|x|: the density with its singular factor removed."""
        R = np.linalg.norm(x, axis=1)
        T = (R / self.scale) ** 2
        # q(x) = p_T(T) (2R/s^2) / (omega R^{N-1}),  p_T(T) = k T^{k-1} (1+T)^{-k-1}
        log_pT_rest = (self.k - 1.0) * np.log(T) - (self.k + 1.0) * np.log1p(T)
        return self.log_const + log_pT_rest + (2.0 - self.N + self.a) * np.log(R)


def _block_rng(seed: int, block: int) -> np.random.Generator:
    key = np.array([seed % (1 << 64), block], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _run_blocks(fn, samples: int, seed: int, workers: Optional[int]):
    """Evaluate fn(rng, m) -> weights on every block; returns (sum, sum of squares)."""
    sizes = [BLOCK] * (samples // BLOCK)
    if samples % BLOCK:
        sizes.append(samples % BLOCK)

    def job(b):
        w = fn(_block_rng(seed, b), sizes[b])
        if not np.all(np.isfinite(w)):
            raise NonfiniteSample("non-finite integrand value in block %d" % b)
        return math.fsum(w), math.fsum(w * w)

    nw = worker_count(workers)
    if nw == 1 or len(sizes) == 1:
        parts = [job(b) for b in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=nw) as ex:
            parts = list(ex.map(job, range(len(sizes))))
    return math.fsum(s for s, _ in parts), math.fsum(q for _, q in parts)


def _estimate(total, total_sq, samples, seed) -> McEstimate:
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    return McEstimate(float(mean), float(math.sqrt(var / samples)), int(samples), int(seed))


def mc_double_integral(f: Callable, g: Callable, alpha: float, beta: float, mu: float, N: int,
                       samples: int, seed: int, scale: float = 1.0,
                       center_g: Optional[np.ndarray] = None, workers: Optional[int] = None) -> McEstimate:
    """Estimate int int f(x) g(y) / (|x|^alpha |x - y|^mu |y|^beta) dx dy.

    ``f`` and ``g`` take an (m, N) array of points.  By default y = x + z with
    z drawn from a |z|^{-mu}-singular density.  When ``center_g`` is given,
    y is drawn independently around that point instead, which suits pairs
    with separated supports (no singularity of |x - y|^{-mu} is met).
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    sx = RadialSampler(N, alpha, scale)
    if center_g is None:
        sz = RadialSampler(N, mu, scale)

        def fn(rng, m):
            x = sx.sample(rng, m)
            z = sz.sample(rng, m)
            y = x + z
            fx = f(x)
            gy = g(y)
            with np.errstate(divide="ignore", invalid="ignore"):
                w = fx * gy * np.linalg.norm(y, axis=1) ** (-beta) * np.exp(
                    -sx.log_reduced_density(x) - sz.log_reduced_density(z))
            return np.where((fx == 0) | (gy == 0), 0.0, w)
    else:
        c = np.asarray(center_g, dtype=float)
        sy = RadialSampler(N, 0.0, scale)

        def fn(rng, m):
            x = sx.sample(rng, m)
            yl = sy.sample(rng, m)
            y = yl + c
            fx = f(x)
            gy = g(y)
            with np.errstate(divide="ignore", invalid="ignore"):
                w = fx * gy * np.linalg.norm(x - y, axis=1) ** (-mu) * np.linalg.norm(y, axis=1) ** (-beta) \
                    * np.exp(-sx.log_reduced_density(x) - sy.log_reduced_density(yl))
            return np.where((fx == 0) | (gy == 0), 0.0, w)

    total, sq = _run_blocks(fn, samples, seed, workers)
    return _estimate(total, sq, samples, seed)


def mc_integral(f: Callable, N: int, samples: int, seed: int, scale: float = 1.0,
                workers: Optional[int] = None) -> McEstimate:
    """Estimate int f(x) dx with the heavy-tailed radial sampler."""
    s = RadialSampler(N, 0.0, scale)

    def fn(rng, m):
        x = s.sample(rng, m)
        fx = f(x)
        return np.where(fx == 0, 0.0, fx * np.exp(-s.log_reduced_density(x)))

    total, sq = _run_blocks(fn, samples, seed, workers)
    return _estimate(total, sq, samples, seed)


def lp_norm(f: Callable, q: float, N: int, samples: int, seed: int, scale: float = 1.0,
            workers: Optional[int] = None) -> float:
    est = mc_integral(lambda x: np.abs(f(x)) ** q, N, samples, seed, scale, workers)
    return est.value ** (1.0 / q)


def hls_ratio(f: Callable, g: Callable, r: float, s: float, alpha: float, beta: float, mu: float, N: int,
              samples: int, seed: int, scale: float = 1.0, workers: Optional[int] = None) -> float:
    """Double integral over |f|_r |g|_s, all three by Monte Carlo.

    The norms reuse the double integral's seed on separate stream offsets, so
    scaling f by a constant changes numerator and denominator identically.
    """
    if not hls_exponent_check(r, s, alpha, beta, mu, N):
        raise InvalidParameters("(r, s, alpha, beta, mu, N) violate the Stein-Weiss exponent relation")
    num = mc_double_integral(f, g, alpha, beta, mu, N, samples, seed, scale, workers=workers).value
    nf = lp_norm(f, r, N, samples, seed + 1, scale, workers)
    ng = lp_norm(g, s, N, samples, seed + 2, scale, workers)
    return num / (nf * ng)


# -- test functions -------------------------------------------------------------

def gaussian(a: float = 1.0, center=None):
    def f(x):
        y = x if center is None else x - center
        return np.exp(-a * np.einsum("ij,ij->i", y, y))
    return f


def bump(radius: float = 1.0, center=None):
    """exp(1 - 1/(1 - |x|^2/radius^2)) inside the ball, 0 outside; bump(0) = 1."""
    def f(x):
        y = x if center is None else x - center
        t = np.einsum("ij,ij->i", y, y) / radius ** 2
        out = np.zeros(len(t))
        m = t < 1
        out[m] = np.exp(1.0 - 1.0 / (1.0 - t[m]))
        return out
    return f


def radial(profile: Callable):
    """Lift a radial profile u(r) to a function on points."""
    return lambda x: profile(np.linalg.norm(x, axis=1))


def gaussian_coulomb_exact(a: float = 1.0, b: float = 1.0) -> float:
    """int int e^{-a|x|^2} e^{-b|y|^2} / |x - y| dx dy in R^3."""
    return 2.0 * math.pi ** 2.5 / (a * b * math.sqrt(a + b))


# -- Brezis-Lieb splitting --------------------------------------------------------

def brezis_lieb_split(u: Callable, v: Optional[Callable], shift: float, params: ProblemParams,
                      samples: int, seed: int, support: float = 1.0, workers: Optional[int] = None) -> dict:
    """Splitting defect |D(u + v_R) - D(v_R) - D(u)| / D(u) at p = 2*, v_R = v(. - R e_1).

    ``u`` and ``v`` are supported in the ball of radius ``support``.  With
    disjoint supports |u + v_R|^p = |u|^p + |v_R|^p, so the defect is
    2 C(u, v_R) / D(u) with C the cross term, which is what is sampled.
    """
    N, alpha, mu = params.N, params.alpha, params.mu
    p = upper_critical(N, alpha, mu)
    if v is None:
        return {"defect": 0.0, "stderr": 0.0, "shift": float(shift), "p": p}
    if shift <= 2.0 * support:
        raise OverlapError("supports of u and v(. - R e1) intersect for R = %g" % shift)
    e1 = np.zeros(N)
    e1[0] = shift
    fu = lambda x: np.abs(u(x)) ** p
    fv = lambda x: np.abs(v(x - e1)) ** p
    scale = support / 2.0
    D_u = mc_double_integral(fu, fu, alpha, alpha, mu, N, samples, seed, scale, workers=workers)
    C = mc_double_integral(fu, fv, alpha, alpha, mu, N, samples, seed + 1, scale, center_g=e1, workers=workers)
    defect = 2.0 * C.value / D_u.value
    rel_err = math.hypot(C.stderr / C.value if C.value else 0.0, D_u.stderr / D_u.value)
    return {
        "defect": defect,
        "stderr": abs(defect) * rel_err,
        "shift": float(shift),
        "p": p,
        "D_u": D_u.to_dict(),
        "cross": C.to_dict(),
    }


# -- radial reduction vs Monte Carlo --------------------------------------------------

def consistency_suite():
    """Twenty (N, alpha, mu, p, profile) cases for the radial-vs-Monte-Carlo check."""
    shapes = [
        ("gauss1", lambda r: np.exp(-r * r)),
        ("gauss2", lambda r: np.exp(-0.5 * r * r)),
        ("poly", lambda r: (1.0 + r * r) ** -3.0),
        ("sech", lambda r: 2.0 * np.exp(-r) / (1.0 + np.exp(-2.0 * r))),
    ]
    pars = [
        (3, 0.0, 1.0, 2.0),
        (3, 0.25, 1.0, 2.0),
        (3, 0.5, 1.5, 1.5),
        (4, 0.0, 2.0, 2.0),
        (5, 0.5, 2.0, 1.8),
    ]
    return [(N, a, mu, p, name, prof) for (N, a, mu, p) in pars for (name, prof) in shapes]


def radial_consistency(samples: int = 200_000, seed: int = 7, n: int = 1024, workers: Optional[int] = None):
    """Compare the kernel-matrix D(u) with Monte Carlo over the suite.

    Returns a list of dicts with both values, the standard error and the
    z-score |mc - kernel| / stderr.
    """
    from .energy import double_integral_D
    from .kernel import assemble_kernel

    out = []
    for i, (N, a, mu, p, name, prof) in enumerate(consistency_suite()):
        grid = RadialGrid.default(N, n=n)
        K = assemble_kernel(N, mu, grid)
        u = RadialFunction(grid, prof(grid.nodes))
        params = ProblemParams(N, a, mu, p)
        Dk = double_integral_D(u, p, params, K)
        f = radial(lambda r, prof=prof: np.abs(prof(r)) ** p)
        est = mc_double_integral(f, f, a, a, mu, N, samples, seed + i, workers=workers)
        z = abs(est.value - Dk) / est.stderr if est.stderr > 0 else math.inf
        out.append({
            "case": "%s N=%d alpha=%g mu=%g p=%g" % (name, N, a, mu, p),
            "kernel": Dk,
            "mc": est.value,
            "stderr": est.stderr,
            "z": z,
            "pass": bool(z <= 3.0),
        })
    return out


def bubble_residual(N: int, grid: Optional[RadialGrid] = None, window=(0.1, 10.0)) -> float:
    """max |-Delta U + U^{(N+2)/(N-2)}| / U^{(N+2)/(N-2)} over ``window``."""
    from .grid import radial_laplacian

    grid = grid or RadialGrid.default(N)
    U = RadialFunction(grid, talenti_bubble(N, 1.0, grid.nodes))
    rhs = U.values ** ((N + 2.0) / (N - 2.0))
    lap = radial_laplacian(U).values
    m = (grid.nodes >= window[0]) & (grid.nodes <= window[1])
    return float(np.max(np.abs(-lap[m] - rhs[m]) / rhs[m]))
