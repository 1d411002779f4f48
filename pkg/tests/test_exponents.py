import math
from fractions import Fraction

import pytest

from choquard import exponents as ex
from choquard.errors import InvalidParameters
from choquard.grid import sphere_area


def test_critical_exponents_closed_forms():
    assert ex.upper_critical(3, 0, 1) == pytest.approx(5.0)
    assert ex.lower_critical(3, 0, 1) == pytest.approx(5.0 / 3.0)
    assert ex.upper_critical(3, 0.25, 1) == pytest.approx(4.5)
    # alpha = mu = 0 limit of the upper exponent is the Sobolev exponent 2N/(N-2)
    assert ex.upper_critical(5, 0, 1e-12) == pytest.approx(10.0 / 3.0)


@pytest.mark.parametrize("N,alpha,mu", [(2, 0, 1), (3, -0.1, 1), (3, 0, 0), (3, 0, 3), (3, 1, 2)])
def test_invalid_base_parameters(N, alpha, mu):
    with pytest.raises(InvalidParameters) as info:
        ex.upper_critical(N, alpha, mu)
    assert info.value.violations


def test_validate_lists_every_violation():
    bad = ex.validate_params(ex.ProblemParams(3, 0, 1, 6.0))
    assert len(bad) == 1 and bad[0].startswith("p < 2*")
    bad = ex.validate_params(ex.ProblemParams(3, 2.0, 4.0))
    assert "0 < mu < N" in bad and "2*alpha + mu <= N" in bad
    assert ex.validate_params(ex.ProblemParams(3, 0, 1, 2.0)) == []


@pytest.mark.parametrize("p,verdict", [
    (2.0, ex.EXISTS),
    (5.0, ex.NONEXISTENCE),
    (5.0 / 3.0, ex.NONEXISTENCE),
    (1.2, ex.NONEXISTENCE),
    (7.0, ex.NONEXISTENCE),
])
def test_existence_verdict(p, verdict):
    assert ex.existence_verdict(ex.ProblemParams(3, 0, 1, p)) == verdict


def test_existence_needs_p():
    with pytest.raises(InvalidParameters):
        ex.existence_verdict(ex.ProblemParams(3, 0, 1))


def test_regularity_examples():
    v = ex.regularity_class(3, 0.5, 1)
    assert v.case_label == "C1"
    assert v.p_interval == (3.0, math.inf)
    assert v.q_interval == pytest.approx((2.0, 6.0))
    v = ex.regularity_class(5, 0, 4.5)
    assert v.case_label == "C2"
    assert v.p_interval == pytest.approx((5.0 / 3.0, 20.0))
    assert v.q_interval == pytest.approx((4.0 / 3.0, 5.0))
    v = ex.regularity_class(7, 0, 3)
    assert v.case_label == "C3"
    assert v.p_interval == pytest.approx((7.0 / 4.0, 7.0))
    assert v.q_interval == (pytest.approx(7.0 / 3.0), math.inf)
    v = ex.regularity_class(8, 0, 4.5)
    assert v.case_label == "C4"
    assert v.p_interval == pytest.approx((32.0 / 21.0, 32.0))
    # 2(2 alpha + mu) - N - 2 < 0: the upper q endpoint is vacuous
    assert v.q_interval == (pytest.approx(16.0 / 9.0), math.inf)


def test_regularity_serialises_infinity():
    d = ex.regularity_class(3, 0.5, 1).to_dict()
    assert d["p_interval"][1] == "inf"


def test_hls_examples():
    r = 6.0 / 5.0
    assert ex.hls_exponent_check(r, r, 0, 0, 1, 3)
    assert not ex.hls_exponent_check(2, 2, 0, 0, 3, 3)
    assert not ex.hls_exponent_check(1.0, 1.5, 0, 0, 1, 3)
    # balance holds but alpha/N exceeds 1 - 1/r
    assert not ex.hls_exponent_check(2, 2, 1.6, -1.6, 1, 3)


def test_bootstrap_examples():
    r, steps = ex.bootstrap_iteration(3, 0, 1, 2)
    assert r == pytest.approx([3.0]) and steps == 0
    r, steps = ex.bootstrap_iteration(10, 0, 1, 2.3)
    assert steps == 3
    assert r == pytest.approx([1.966, 2.492, 3.821, 12.47], rel=1e-3)
    # exact rational recursion as the oracle
    p = Fraction(23, 10)
    x = Fraction(9, 10) * (1 - 1 / p)
    want = []
    while True:
        want.append(1 / x)
        if x <= Fraction(1, 5):
            break
        x = (p - 1) * (x - Fraction(1, 5))
    assert r == pytest.approx([float(w) for w in want], rel=1e-12)


def test_bootstrap_reciprocals_match():
    r, _ = ex.bootstrap_iteration(10, 0, 1, 2.3)
    assert ex.bootstrap_reciprocals(10, 0, 1, 2.3) == pytest.approx([1 / v for v in r])


def test_bootstrap_rejects_invalid():
    with pytest.raises(InvalidParameters):
        ex.bootstrap_iteration(3, 0, 1, 9.0)


def test_decay_constant_examples():
    assert ex.decay_constant(3, 0, 1) == pytest.approx((12 / (16 * math.pi ** 2)) ** 0.1, rel=1e-12)
    assert ex.decay_constant(3, 0, 1) == pytest.approx(0.7728, abs=1e-4)
    # omega_3 = 2 pi^2 and 2* = 3, so the root is the sixth
    assert ex.decay_constant(4, 0, 2) == pytest.approx((64 / (4 * math.pi ** 4)) ** (1 / 6), rel=1e-12)


def test_upper_minus_lower():
    for N, a, mu in ((3, 0, 1), (5, 0.5, 2), (10, 1, 3)):
        diff = ex.upper_critical(N, a, mu) - ex.lower_critical(N, a, mu)
        assert diff == pytest.approx((2 * N - 2 * a - mu) * 2 / (N * (N - 2)))


def test_decay_constant_variants():
    N, a, mu = 3, 0.25, 1.0
    w2 = (4 * math.pi) ** 2
    ps = (2 * N - 2 * a - mu) / (N - 2)
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    assert ex.decay_constant(N, a, mu) == pytest.approx(((N - a) * 4 ** mu / w2) ** (1 / (2 * ps)))
    assert ex.decay_constant(N, a, mu, "corrected") == pytest.approx(((N - a) ** 2 * 2 ** mu / w2) ** (1 / (2 * ps)))
    assert ex.decay_constant(N, a, mu, "statement") == pytest.approx(((N - a) ** 2 * 2 ** mu / w2) ** (1 / 0.5))
    with pytest.raises(InvalidParameters):
        ex.decay_constant(3, 0.5, 1, "statement")
    with pytest.raises(InvalidParameters):
        ex.decay_constant(7, 0, 5)
    with pytest.raises(ValueError):
        ex.decay_constant(3, 0, 1, "other")
    assert ex.decay_exponent(5) == -1.5


def test_pohozaev_coefficients_sign_matches_verdict():
    for p in (1.7, 2.0, 3.0, 4.9):
        pp = ex.ProblemParams(3, 0, 1, p)
        A, B = ex.pohozaev_coefficients(pp)
        assert A < 0 < B
    for p in (1.5, 5.5):
        A, B = ex.pohozaev_coefficients(ex.ProblemParams(3, 0, 1, p))
        assert A * B >= 0
