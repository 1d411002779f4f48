import math

import numpy as np
import pytest
from scipy.integrate import quad

from choquard.errors import GridMismatch
from choquard.grid import (
    RadialFunction,
    RadialGrid,
    dilate,
    dirichlet_norm_sq,
    gregory_end_weights,
    h1_norm_sq,
    integrate,
    mass_norm_sq,
    origin_exponent,
    radial_derivative,
    radial_laplacian,
    read_profile,
    sphere_area,
    write_profile,
)

from conftest import compact_profile


def test_grid_construction():
    g = RadialGrid.default(3, n=101, r_max=10.0)
    assert g.r_min == pytest.approx(1e-3)
    assert g.nodes[0] == g.r_min and g.nodes[-1] == g.r_max
    assert np.allclose(np.diff(np.log(g.nodes)), g.h)
    assert g.rho == pytest.approx(math.exp(g.h))
    with pytest.raises(ValueError):
        RadialGrid(3, 1.0, 0.5, 10)
    with pytest.raises(ValueError):
        RadialGrid(3, 0.1, 1.0, 2)


def test_grid_is_immutable_value():
    g = RadialGrid.default(3, n=64)
    assert g == RadialGrid.default(3, n=64)
    assert g != RadialGrid.default(3, n=65)
    with pytest.raises(ValueError):
        g.nodes[0] = 1.0


def test_sphere_area():
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    assert sphere_area(4) == pytest.approx(2 * math.pi ** 2)


def test_gregory_weights_integrate_polynomials():
    # end corrections make the log-trapezoid rule exact for low-degree polynomials
    for k in (2, 4, 8):
        e = gregory_end_weights(k)
        n = 40
        w = np.ones(n)
        w[:k] = e
        w[n - k:] = e[::-1]
        x = np.arange(n, dtype=float)
        for deg in range(min(k, 4)):
            assert w @ x ** deg == pytest.approx((n - 1) ** (deg + 1) / (deg + 1), rel=1e-12)


@pytest.mark.parametrize("N", [3, 4, 5])
def test_integrate_gaussian(N):
    g = RadialGrid.default(N)
    f = RadialFunction(g, np.exp(-g.nodes ** 2))
    assert integrate(f) == pytest.approx(math.pi ** (N / 2), rel=1e-10)


def test_integrate_singular_weight():
    g = RadialGrid.default(3)
    a = 0.5
    f = RadialFunction(g, g.nodes ** -a * np.exp(-g.nodes ** 2))
    want = 4 * math.pi * 0.5 * math.gamma((3 - a) / 2)
    assert integrate(f, origin_power=-a) == pytest.approx(want, rel=1e-9)


def test_origin_exponent():
    g = RadialGrid.default(3, n=256)
    assert origin_exponent(RadialFunction(g, g.nodes ** -0.7)) == pytest.approx(-0.7)
    assert origin_exponent(RadialFunction(g, np.ones(g.n))) == pytest.approx(0.0)
    v = np.ones(g.n)
    v[1] = -1.0
    assert origin_exponent(RadialFunction(g, v)) == 0.0
    # clipped so the origin cell integral stays finite
    assert origin_exponent(RadialFunction(g, g.nodes ** -9.0)) == pytest.approx(0.5 - 3)


def test_norms_of_gaussian():
    g = RadialGrid.default(3)
    f = RadialFunction(g, np.exp(-g.nodes ** 2))
    kin = 4 * math.pi * quad(lambda r: 4 * r ** 4 * math.exp(-2 * r * r), 0, np.inf)[0]
    mass = (math.pi / 2) ** 1.5
    assert dirichlet_norm_sq(f) == pytest.approx(kin, rel=1e-5)
    assert mass_norm_sq(f) == pytest.approx(mass, rel=1e-9)
    assert h1_norm_sq(f) == pytest.approx(kin + mass, rel=1e-5)


def test_dirichlet_norm_of_bubble_includes_tail():
    # |grad U|^2 for U = (1 + r^2)^{-1/2} in R^3 is 3 pi^2 / 4 ... checked by quadrature
    g = RadialGrid.default(3)
    f = RadialFunction(g, (1 + g.nodes ** 2) ** -0.5)
    want = 4 * math.pi * quad(lambda r: r ** 4 * (1 + r * r) ** -3, 0, np.inf)[0]
    assert dirichlet_norm_sq(f) == pytest.approx(want, rel=1e-4)


def test_radial_derivative_second_order():
    errs = []
    for n in (256, 512):
        g = RadialGrid(3, 0.01, 10.0, n)
        f = RadialFunction(g, np.exp(-g.nodes ** 2))
        d = radial_derivative(f).values
        errs.append(np.max(np.abs(d + 2 * g.nodes * np.exp(-g.nodes ** 2))))
    assert errs[1] < errs[0] / 3.5


def test_bubble_derivative_at_one():
    g = RadialGrid.default(3)
    u = RadialFunction(g, 3 ** 0.25 * (1 + g.nodes ** 2) ** -0.5)
    d = radial_derivative(u).values
    assert np.interp(1.0, g.nodes, d) == pytest.approx(-(3 ** 0.25) / 2 ** 1.5, abs=1e-4)


def test_radial_laplacian_of_gaussian():
    g = RadialGrid.default(3)
    r = g.nodes
    f = RadialFunction(g, np.exp(-r ** 2))
    want = (4 * r ** 2 - 6) * np.exp(-r ** 2)
    m = r < 5
    assert np.max(np.abs(radial_laplacian(f).values[m] - want[m])) < 1e-6


def test_integration_by_parts_compact():
    # int f' g r^{N-1} = -int f (g' + (N-1) g / r) r^{N-1}
    errs = []
    for n in (512, 1024):
        g = RadialGrid.default(3, n=n)
        f = RadialFunction(g, compact_profile(g, 1.0, 1.0))
        h = RadialFunction(g, np.exp(-g.nodes))
        lhs = integrate(RadialFunction(g, radial_derivative(f).values * h.values))
        dh = -np.exp(-g.nodes)
        rhs = -integrate(RadialFunction(g, f.values * (dh + 2 * h.values / g.nodes)))
        errs.append(abs(lhs - rhs) / abs(rhs))
    assert errs[1] < 1e-4
    assert errs[1] < errs[0]


def test_dilate_is_index_shift():
    g = RadialGrid.default(3, n=256)
    f = RadialFunction(g, compact_profile(g))
    k = 7
    d = dilate(f, k)
    tau = g.rho ** k
    assert np.allclose(d.values[:-k], tau ** 0.5 * f.values[k:], rtol=1e-14, atol=0)
    assert dirichlet_norm_sq(d) == pytest.approx(dirichlet_norm_sq(f), rel=1e-12)
    back = dilate(d, -k)
    assert np.allclose(back.values, f.values, atol=1e-300)


def test_profile_roundtrip(tmp_path):
    g = RadialGrid.default(3, n=64)
    f = RadialFunction(g, np.exp(-g.nodes) / 3.0)
    path = tmp_path / "u.csv"
    write_profile(path, f)
    text = path.read_text().splitlines()
    assert text[0] == "r,u" and len(text) == 65
    again = read_profile(path, g)
    assert np.array_equal(again.values, f.values)


def test_profile_errors(tmp_path):
    g = RadialGrid.default(3, n=64)
    path = tmp_path / "bad.csv"
    path.write_text("x,y\n1,2\n")
    with pytest.raises(ValueError, match="header"):
        read_profile(path, g)
    path.write_text("r,u\n1,2\n")
    with pytest.raises(ValueError, match="rows"):
        read_profile(path, g)
    write_profile(path, RadialFunction(RadialGrid.default(3, n=64, r_max=50.0), np.ones(64)))
    with pytest.raises(ValueError, match="radii"):
        read_profile(path, g)


def test_function_validation():
    g = RadialGrid.default(3, n=16)
    with pytest.raises(GridMismatch):
        RadialFunction(g, np.ones(15))
    with pytest.raises(ValueError):
        RadialFunction(g, np.full(16, np.nan))
    with pytest.raises(ValueError):
        RadialFunction(g, -np.ones(16), nonnegative=True)
    with pytest.raises(GridMismatch):
        RadialFunction(g, np.ones(16)) + RadialFunction(RadialGrid.default(3, n=17), np.ones(17))
