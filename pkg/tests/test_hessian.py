import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from pme_lab.hessian import (
    Jet4, LocalPolynomial, PMEParams, breaking_lhs, case1_polynomial,
    case2_polynomial, eval_w11_rate, jet_from_polynomial, select_breaking_parameter,
)

X1, X2 = sp.symbols("x1 x2", real=True)


def _sym_poly(p: LocalPolynomial):
    return sum(sp.Float(c) * X1**i * X2**j for (i, j), c in p.coeffs.items())


def rate_from_pressure_equation(wexpr, alpha, m, point=(0, 0)):
    """d/dt w_11 obtained by pushing w through v_t = (m-1) v Lap v + |grad v|^2."""
    alpha = sp.nsimplify(alpha)
    m = sp.nsimplify(m)
    if alpha == 0:
        v = sp.exp(wexpr)
    else:
        v = wexpr ** (1 / alpha)
    vt = (m - 1) * v * (sp.diff(v, X1, 2) + sp.diff(v, X2, 2)) + sp.diff(v, X1)**2 + sp.diff(v, X2)**2
    wt = vt / v if alpha == 0 else alpha * v**(alpha - 1) * vt
    return float(sp.diff(wt, X1, 2).subs({X1: point[0], X2: point[1]}).evalf(30))


def test_case1_jet_matches_printed_table():
    j = jet_from_polynomial(case1_polynomial(1.0), (0, 0))
    assert (j.w, j.w1, j.w22, j.w122, j.w1111, j.w1122) == (1, 1, -2, 2, -24, -8)
    assert j.w111 == j.w112 == j.w11 == j.w12 == j.w2 == 0


def test_zero_polynomial_gives_zero_jet():
    j = jet_from_polynomial(LocalPolynomial({}), (0.3, -0.7))
    assert all(v == 0 for v in j.as_dict().values())


def test_case2_jet_b2_alpha_three_quarters():
    j = jet_from_polynomial(case2_polynomial(2.0, 0.75), (0, 0))
    assert j.w == 1
    assert j.w22 == -8
    assert j.w122 == pytest.approx(4 * math.sqrt(0.75), abs=1e-14)
    assert j.w1 == pytest.approx(0.75 * math.sqrt(0.75) / 0.5, abs=1e-14)
    assert j.w1111 == pytest.approx(-0.5)
    assert j.w1122 == -4


def test_jet_off_origin_matches_sympy():
    p = case1_polynomial(2.5)
    e = _sym_poly(p)
    pt = (0.13, -0.21)
    j = jet_from_polynomial(p, pt)
    for name, (i, k) in [("w", (0, 0)), ("w1", (1, 0)), ("w12", (1, 1)), ("w122", (1, 2)),
                         ("w1111", (4, 0)), ("w1122", (2, 2)), ("w222", (0, 3))]:
        d = e
        if i:
            d = sp.diff(d, X1, i)
        if k:
            d = sp.diff(d, X2, k)
        assert getattr(j, name) == pytest.approx(float(d.subs({X1: pt[0], X2: pt[1]})), abs=1e-12)


@pytest.mark.parametrize("alpha,m,a,expected", [
    (1.0, 2.0, 9.0, 4.0),
    (0.25, 2.0, 1.0, 2.0),
    (0.0, 2.0, 3.0, 124 * math.e),
])
def test_w11_rate_case1_values(alpha, m, a, expected):
    j = jet_from_polynomial(case1_polynomial(a))
    got = eval_w11_rate(j, PMEParams(m=m, alpha=alpha))
    # independent route: push the polynomial through the pressure equation
    oracle = rate_from_pressure_equation(_sym_poly(case1_polynomial(a)), alpha, m)
    assert oracle == pytest.approx(expected, rel=1e-12)
    assert got == pytest.approx(expected, rel=1e-12)


def test_w11_rate_trivial_jet():
    for al in (0.0, 0.3, 1.0):
        assert eval_w11_rate(Jet4(w=1.0), PMEParams(m=3.0, alpha=al)) == 0.0


def test_w11_rate_rejects_nonpositive_w():
    with pytest.raises(ValueError):
        eval_w11_rate(Jet4(w=0.0, w1=1.0), PMEParams(m=2.0, alpha=0.5))


@pytest.mark.parametrize("alpha", [0.0, 0.2, 0.5, 0.75, 1.0])
@pytest.mark.parametrize("m", [1.5, 3.0])
def test_w11_rate_matches_pressure_equation_generic_point(alpha, m):
    # a positive quartic with all jet components switched on, evaluated off-origin
    p = LocalPolynomial({(0, 0): 2.0, (1, 0): 0.3, (0, 1): -0.2, (2, 0): -0.4, (1, 1): 0.1,
                         (0, 2): -0.5, (3, 0): 0.05, (2, 1): -0.07, (1, 2): 0.11, (0, 3): 0.02,
                         (4, 0): -0.3, (2, 2): -0.2, (1, 3): 0.04, (0, 4): -0.1, (3, 1): 0.06})
    pt = (0.1, -0.15)
    got = eval_w11_rate(jet_from_polynomial(p, pt), PMEParams(m=m, alpha=alpha))
    oracle = rate_from_pressure_equation(_sym_poly(p), alpha, m, pt)
    assert got == pytest.approx(oracle, rel=1e-10, abs=1e-12)


def _single_term_jets():
    names = ["w1", "w2", "w11", "w12", "w22", "w111", "w112", "w122", "w1111", "w1122"]
    for nm in names:
        yield nm


@pytest.mark.parametrize("name", list(_single_term_jets()))
@pytest.mark.parametrize("alpha", [0.0, 0.3, 1.0])
def test_each_term_agrees_with_pressure_equation(name, alpha):
    # one nonzero derivative component isolates one group of terms
    from pme_lab.hessian import _JET_INDEX
    i, j = _JET_INDEX[name]
    coef = 0.7 / (math.factorial(i) * math.factorial(j))
    p = LocalPolynomial({(0, 0): 1.3, (i, j): coef})
    got = eval_w11_rate(jet_from_polynomial(p), PMEParams(m=2.5, alpha=alpha))
    oracle = rate_from_pressure_equation(_sym_poly(p), alpha, 2.5)
    assert got == pytest.approx(oracle, rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("alpha,m,param,expected", [
    (0.25, 2.0, 1.0, 2.0),
    (0.75, 2.0, 2.0, 0.4453125),
    (1.0, 5.0, 8.0, 0.0),
    (0.0, 2.0, 2.0, 0.0),
    (0.0, 2.0, 3.0, 124.0),
])
def test_breaking_lhs_values(alpha, m, param, expected):
    assert breaking_lhs(PMEParams(m=m, alpha=alpha), param) == pytest.approx(expected, abs=1e-12)


def test_breaking_lhs_rejects_root_concavity():
    with pytest.raises(ValueError):
        breaking_lhs(PMEParams(m=2.0, alpha=0.5), 1.0)
    with pytest.raises(ValueError):
        select_breaking_parameter(PMEParams(m=2.0, alpha=0.5))


@pytest.mark.parametrize("alpha,m,expected", [(1.0, 2.0, 9), (0.0, 2.0, 3), (0.25, 2.0, 1),
                                              (0.75, 2.0, 2)])
def test_select_breaking_parameter(alpha, m, expected):
    params = PMEParams(m=m, alpha=alpha)
    k = select_breaking_parameter(params)
    assert k == expected
    assert breaking_lhs(params, k) > 0
    assert k == 1 or breaking_lhs(params, k - 1) <= 0


@settings(max_examples=60, deadline=None)
@given(alpha=st.sampled_from([0.0, 0.1, 0.25, 0.4, 0.6, 0.75, 0.9, 1.0]),
       m=st.floats(1.05, 6.0), param=st.floats(0.2, 20.0))
def test_closed_form_agrees_with_jet_formula(alpha, m, param):
    params = PMEParams(m=m, alpha=alpha)
    poly = case2_polynomial(param, alpha) if 0.5 < alpha < 1 else case1_polynomial(param)
    rate = eval_w11_rate(jet_from_polynomial(poly), params)
    lhs = breaking_lhs(params, param)
    if alpha == 0.0:
        assert rate == pytest.approx(math.e * lhs, rel=1e-9, abs=1e-9)
    else:
        assert rate == pytest.approx(lhs, rel=1e-9, abs=1e-9 * max(1.0, param**4))


@settings(max_examples=30, deadline=None)
@given(m=st.floats(1.01, 10.0), a=st.floats(0.0, 30.0))
def test_alpha_one_is_affine_with_root_eight(m, a):
    params = PMEParams(m=m, alpha=1.0)
    assert breaking_lhs(params, 8.0) == 0.0
    assert breaking_lhs(params, a) == pytest.approx((m - 1) * (4 * a - 32), abs=1e-9)


@pytest.mark.parametrize("alpha", [0.0, 0.3, 0.75])
def test_time_difference_of_w11_is_second_order(alpha):
    """w = b**alpha (or log b) for an exact Barenblatt pressure b; the centred
    time difference of w_11 at an off-axis point must converge to the formula
    at second order in the step."""
    m, n, A = 2.0, 2, 1.0
    beta = n / (n * (m - 1) + 2)
    t = sp.Symbol("t", positive=True)
    b = t**(-beta * (m - 1)) * (A - beta / (2 * n) * t**(-2 * beta / n) * (X1**2 + X2**2))
    w = sp.log(b) if alpha == 0 else b**sp.nsimplify(alpha)
    pt = {X1: 0.31, X2: -0.22}
    t0 = 1.0
    jet = {}
    from pme_lab.hessian import _JET_INDEX
    for name, (i, k) in _JET_INDEX.items():
        d = w
        if i:
            d = sp.diff(d, X1, i)
        if k:
            d = sp.diff(d, X2, k)
        jet[name] = float(d.subs(pt).subs(t, t0))
    rate = eval_w11_rate(Jet4(**jet), PMEParams(m=m, alpha=alpha))
    w11 = sp.lambdify(t, sp.diff(w, X1, 2).subs(pt), "mpmath")
    errs = []
    for dt in (1e-2, 5e-3, 2.5e-3):
        fd = float((w11(t0 + dt) - w11(t0 - dt)) / (2 * dt))
        errs.append(abs(fd - rate))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)
