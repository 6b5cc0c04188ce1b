import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pme_lab.hessian import PMEParams, jet_from_polynomial
from pme_lab.initial_data import (
    ConcavityReport, ConstructionError, InitialDatum, RadialProfile, SmoothMin,
    build_boundary_datum, build_control_datum, build_interior_datum, build_local_w,
    sym_lambda1, verify_alpha_concavity, _boundary_shape,
)


@pytest.fixture(scope="module")
def interior():
    cache = {}

    def get(alpha):
        if alpha not in cache:
            cache[alpha] = build_interior_datum(PMEParams(m=2.0, alpha=alpha))
        return cache[alpha]
    return get


@pytest.fixture(scope="module")
def boundary():
    return {al: build_boundary_datum(al) for al in (0.0, 0.25, 0.4)}


class _Field:
    """Minimal datum protocol on a box, from closed-form derivatives."""

    def __init__(self, derivs, alpha, box=(-1.0, 1.0, -1.0, 1.0)):
        self._d, self.params, self.box = derivs, PMEParams(m=2.0, alpha=alpha), box

    def derivatives(self, x, y):
        return self._d(np.asarray(x, float), np.asarray(y, float))


# ------------------------------------------------------------ radial cap

def test_cap_constants():
    assert RadialProfile(1.0, 0.25).cap == pytest.approx(1.0625 * 0.5**0.25, rel=1e-15)
    assert RadialProfile(1.0, 0.25).cap == pytest.approx(0.893452, abs=1e-6)
    assert RadialProfile(1.0, 1.0).cap == 0.875
    assert RadialProfile(1.0, 1.0)(np.array([0.5]))[0] == pytest.approx(0.75)
    assert RadialProfile(0.6, 0.0).cap == pytest.approx(math.log(0.3) + 0.25)
    with pytest.raises(ValueError):
        RadialProfile(0.0, 0.5)
    with pytest.raises(ValueError):
        RadialProfile(1.0, 1.5)


@pytest.mark.parametrize("alpha", [0.0, 0.1, 0.25, 0.75, 1.0])
@pytest.mark.parametrize("rho", [0.05, 0.4, 1.0])
def test_cap_profile_shape(alpha, rho):
    prof = RadialProfile(rho, alpha)
    assert prof.certify(n=20001) > 0
    r = np.linspace(rho / 2, rho * 0.999, 50)
    exact = {1.0: rho**2 - r**2, 0.0: np.log(rho - r)}.get(alpha, (rho - r) ** alpha)
    assert np.allclose(prof(r), exact, rtol=1e-14, atol=0)
    assert np.all(prof(np.linspace(0, rho / 4, 20)) == prof.cap)
    # value and first two derivatives are continuous at the junctions
    for r0 in (rho / 4, rho / 2):
        lo = prof.derivatives(np.array([r0 * (1 - 1e-12)]))
        hi = prof.derivatives(np.array([r0 * (1 + 1e-12)]))
        for a, b in zip(lo, hi):
            assert a[0] == pytest.approx(b[0], rel=1e-6, abs=1e-6 * max(1, abs(prof.cap)))


# ------------------------------------------------------------ smooth min

@settings(max_examples=200, deadline=None)
@given(p=st.floats(-5, 5), q=st.floats(-5, 5), eps=st.floats(0.01, 2))
def test_smooth_min_bounds(p, q, eps):
    sm = SmoothMin(eps)
    val = sm(p, q)
    assert val <= min(p, q) + 1e-12
    assert val >= min(p, q) - eps
    if abs(p - q) >= 2 * eps:
        assert val == pytest.approx(min(p, q), abs=1e-12)


def test_smooth_min_kernel_derivatives():
    sm = SmoothMin(0.3)
    z = np.linspace(-0.5, 0.5, 401)
    s, s1, s2 = sm.s(z)
    assert np.all(np.abs(s1) <= 1 + 1e-12) and np.all(s2 >= -1e-12)
    dz = 1e-6
    num1 = (sm.s(z + dz)[0] - sm.s(z - dz)[0]) / (2 * dz)
    num2 = (sm.s(z + dz)[1] - sm.s(z - dz)[1]) / (2 * dz)
    assert np.allclose(num1, s1, atol=1e-8) and np.allclose(num2, s2, atol=1e-5)
    with pytest.raises(ValueError):
        SmoothMin(0.0)


# ------------------------------------------------------------ local polynomial

@pytest.mark.parametrize("alpha, expected", [(1.0, 9.0), (0.25, 1.0), (0.75, 2.0), (0.0, 3.0)])
def test_build_local_w_parameter_and_conditions(alpha, expected):
    poly, param, rho = build_local_w(PMEParams(m=2.0, alpha=alpha))
    assert param == expected and 0 < rho <= 0.5
    jet = jet_from_polynomial(poly)
    assert jet.w == 1 and jet.w11 == 0 and jet.w12 == 0 and jet.w22 < 0
    x, y = np.meshgrid(np.linspace(-rho, rho, 81), np.linspace(-rho, rho, 81))
    ball = (np.hypot(x, y) <= rho) & (np.hypot(x, y) > 0)
    h11, h12, h22 = poly.hessian(x[ball], y[ball])
    assert np.all(h11 < 0) and np.all(h11 * h22 - h12**2 > 0) and np.all(poly(x[ball], y[ball]) > 0)


def test_alpha_one_hessian_at_origin():
    poly, _, _ = build_local_w(PMEParams(m=2.0, alpha=1.0))
    assert poly.hessian(0.0, 0.0) == (0.0, 0.0, -2.0)


@pytest.mark.parametrize("alpha, c1, c2", [(0.25, 24.0, 4.0), (0.75, 2.0, 4.0)])
def test_determinant_leading_part(alpha, c1, c2):
    poly, _, _ = build_local_w(PMEParams(m=2.0, alpha=alpha))
    for th in np.linspace(0, np.pi, 7):
        r = 1e-5
        x, y = r * np.cos(th), r * np.sin(th)
        h11, h12, h22 = poly.hessian(x, y)
        assert h11 * h22 - h12**2 == pytest.approx(c1 * x**2 + c2 * y**2, rel=1e-3)


def test_build_local_w_rejects_root_concavity():
    with pytest.raises(ValueError):
        build_local_w(PMEParams(m=2.0, alpha=0.5))
    with pytest.raises(ValueError):
        build_interior_datum(PMEParams(m=2.0, alpha=0.5))


# ------------------------------------------------------------ interior datum

@pytest.mark.parametrize("alpha", [0.0, 0.25, 0.75, 1.0])
def test_interior_jet_is_polynomial_jet(interior, alpha):
    d = interior(alpha)
    ev = d.evaluator
    rho = d.meta["rho"]
    x, y = np.meshgrid(np.linspace(-rho / 4, rho / 4, 41), np.linspace(-rho / 4, rho / 4, 41))
    core = np.hypot(x, y) < rho / 4
    w = ev.w_derivatives(x[core], y[core])
    P = ev.poly(x[core], y[core])
    shift = ev.profile.cap if alpha == 0 else 0.0
    assert np.allclose(w[0], P + shift, rtol=0, atol=1e-14)
    for got, want in zip(w[1:3], ev.poly.grad(x[core], y[core])):
        assert np.allclose(got, want, atol=1e-13)
    for got, want in zip(w[3:], ev.poly.hessian(x[core], y[core])):
        assert np.allclose(got, want, atol=1e-12)


@pytest.mark.parametrize("alpha", [0.25, 0.75])
def test_interior_linear_near_boundary(interior, alpha):
    d = interior(alpha)
    rho, A, r0 = d.meta["rho"], d.meta["A"], d.meta["r_exact"]
    assert r0 < rho
    r = np.linspace(r0, rho * (1 - 1e-9), 9)
    for th in (0.3, 2.0, 4.5):
        x, y = r * np.cos(th), r * np.sin(th)
        v, vx, vy = d.derivatives(x, y)[:3]
        assert np.allclose(v, A ** (1 / alpha) * (rho - r), rtol=1e-11)
        assert np.allclose(np.hypot(vx, vy), A ** (1 / alpha), rtol=1e-11)


@pytest.mark.parametrize("alpha", [0.0, 0.25, 0.75, 1.0])
def test_interior_datum_concave_and_supported_on_ball(interior, alpha):
    d = interior(alpha)
    rho = d.meta["rho"]
    assert d.meta["lambda_margin_off_origin"] > 0
    rep = verify_alpha_concavity(d, n=301)
    assert rep.concave and rep.n_samples > 0
    assert d.value(np.array([rho * 1.001, 0.0]), np.array([0.0, -rho * 1.01])).max() == 0
    assert d.value(0.0, 0.0) > 0
    x0, x1, y0, y1 = d.box
    assert x0 < -rho and x1 > rho and y0 < -rho and y1 > rho
    # boundary gradient does not vanish
    th = np.linspace(0, 2 * np.pi, 64)
    r = rho * (1 - 1e-7)
    v, vx, vy = d.derivatives(r * np.cos(th), r * np.sin(th))[:3]
    assert np.hypot(vx, vy).min() > 0


def test_interior_concavity_max_at_origin(interior):
    d = interior(0.25)
    rep = verify_alpha_concavity(d, points=[[0.0, 0.0], [0.1, 0.05], [-0.2, 0.1]])
    assert rep.location == (0.0, 0.0)
    assert abs(rep.max_lambda1) <= 1e-12


def test_control_datum_rate_sign():
    d = build_control_datum(2.0)
    assert d.kind == "control" and d.params.alpha == 0.5
    assert verify_alpha_concavity(d, n=201).concave


# ------------------------------------------------------------ concavity check

def test_concavity_of_concave_quadratic():
    def derivs(x, y):
        v = np.maximum(1 - x**2 - y**2, 0)
        inside = v > 0
        z = np.zeros_like(v)
        c = np.where(inside, 1.0, 0.0)
        return v, -2 * x * c, -2 * y * c, -2 * c, z, -2 * c
    rep = verify_alpha_concavity(_Field(derivs, 1.0), n=201)
    assert rep.concave and -0.1 < rep.max_lambda1 < 0


def test_concavity_of_gaussian_log():
    def derivs(x, y):
        v = np.exp(-x**2 - y**2)
        return v, -2 * x * v, -2 * y * v, (4 * x**2 - 2) * v, 4 * x * y * v, (4 * y**2 - 2) * v
    rep = verify_alpha_concavity(_Field(derivs, 0.0), n=101)
    assert rep.max_lambda1 == pytest.approx(-2.0, rel=1e-12)


def test_concavity_detects_convex_field():
    def derivs(x, y):
        v = 1 + x**2 + y**2
        o = np.ones_like(x)
        return v, 2 * x, 2 * y, 2 * o, 0 * o, 2 * o
    assert not verify_alpha_concavity(_Field(derivs, 1.0), n=21).concave


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5), st.integers(1, 100), st.floats(-5, 5)),
                min_size=1, max_size=6))
def test_report_max_never_decreases_on_merge(parts):
    reps = [ConcavityReport(lam, (0.0, 0.0), n, ex) for lam, n, ex in parts]
    acc = reps[0]
    for r in reps[1:]:
        merged = acc.merge(r)
        assert merged.max_lambda1 >= max(acc.max_lambda1, r.max_lambda1)
        assert merged.max_excess >= max(acc.max_excess, r.max_excess)
        assert merged.n_samples == acc.n_samples + r.n_samples
        acc = merged


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_sym_lambda1_matches_eigvalsh(a, b, c):
    want = np.linalg.eigvalsh(np.array([[a, b], [b, c]]))[1]
    assert float(sym_lambda1(a, b, c)) == pytest.approx(want, rel=1e-10, abs=1e-10 * (abs(a) + abs(b) + abs(c)))


# ------------------------------------------------------------ boundary datum

@pytest.mark.parametrize("alpha", [0.0, 0.25, 0.4])
def test_boundary_datum_contract(boundary, alpha):
    d = boundary[alpha]
    S = d.meta["slopes"]
    assert S["S_0"] < 0.5 * (S["S_minus"] + S["S_plus"])
    assert d.meta["midpoint_margin"] > 0
    assert d.meta["slope_convexity_margin"] > 0.1 and d.meta["min_boundary_gradient"] > 0
    assert d.meta["concavity"]["max_excess"] <= 0
    xs = np.linspace(-1, 1, 41)
    assert np.all(d.value(xs, np.full_like(xs, 1e-9)) > 0)
    assert np.all(d.value(xs, np.full_like(xs, -1e-9)) == 0)
    # dv0/dy(x, 0) is the recorded slope
    for x, key in ((-0.5, "S_minus"), (0.0, "S_0"), (0.5, "S_plus")):
        assert d.derivatives(x, 1e-10)[2] == pytest.approx(S[key], rel=1e-6)


@pytest.mark.parametrize("alpha", [0.0, 0.25, 0.4])
def test_boundary_datum_concave_on_independent_points(boundary, alpha):
    d = boundary[alpha]
    rng = np.random.default_rng(7)
    x0, x1, y0, y1 = d.box
    pts = np.column_stack([rng.uniform(x0, x1, 20000), rng.uniform(0, y1, 20000)])
    rep = verify_alpha_concavity(d, points=pts)
    assert rep.concave and rep.n_samples > 1000


def test_boundary_support_is_convex(boundary):
    d = boundary[0.25]
    rng = np.random.default_rng(3)
    x0, x1, y0, y1 = d.box
    pts = np.column_stack([rng.uniform(x0, x1, 4000), rng.uniform(y0, y1, 4000)])
    inside = pts[d.positive(pts[:, 0], pts[:, 1])]
    i, j = rng.integers(0, len(inside), (2, 2000))
    mid = 0.5 * (inside[i] + inside[j])
    assert np.all(d.positive(mid[:, 0], mid[:, 1]))


def test_boundary_shape_respects_concavity_limit():
    for al in (0.1, 0.25, 0.4, 0.45):
        assert _boundary_shape(al)["q"] <= (1 - al) / al
    with pytest.raises(ValueError):
        build_boundary_datum(0.5)


def test_boundary_construction_failure_is_reported():
    shape = _boundary_shape(0.25)
    shape["X"] = 0.9
    with pytest.raises(ConstructionError, match="flat boundary"):
        build_boundary_datum(0.25, _shape=shape)
    shape = _boundary_shape(0.25)
    shape["q"] = 3.5
    with pytest.raises(ConstructionError, match="alpha-concave"):
        build_boundary_datum(0.25, _shape=shape)


# ------------------------------------------------------------ serialization

@pytest.mark.parametrize("which", ["interior", "boundary"])
def test_json_round_trip(interior, boundary, which):
    d = interior(0.25) if which == "interior" else boundary[0.25]
    doc = json.loads(d.dumps(samples=33))
    back = InitialDatum.from_json(doc)
    assert back.kind == d.kind and back.params == d.params and back.box == d.box
    doc["samples"]["v"][5][5] += 1.0
    with pytest.raises(ValueError):
        InitialDatum.from_json(doc)
    with pytest.raises(ValueError):
        InitialDatum.from_json({"format": "other"})
