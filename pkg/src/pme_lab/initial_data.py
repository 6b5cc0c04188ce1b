"""Initial pressure data: alpha-concave on their support, built so that
concavity breaks at t = 0+ either at an interior point or at the boundary.

Interior data.  The local polynomial w (Case 1 or Case 2) sits at the origin
and is glued to a radial cap F = f(|x|) that ends in (rho - r)^alpha,
rho^2 - r^2 or log(rho - r).  For alpha > 0 the glue is a smooth minimum
of w and A F, which keeps w~ = w exactly near the origin (value included),
so the origin jet of v0^alpha is the jet of the polynomial.  For alpha = 0
the sum F + w is used; a constant shift of log v only rescales the rate.

Boundary data.  v0 = (a^-s + b^-s)^(-1/s) with a = y g(x), g = (x + d)^q
and b a concave quadratic.  y g(x) is alpha-concave iff
(1 - alpha) g g'' <= (1 - 2 alpha) g'^2, i.e. q <= (1 - alpha)/alpha, and
the power mean of two alpha-concave functions is alpha-concave.  Along the
flat part of the boundary dv0/dy(x, 0) = g(x), which is strictly convex.
"""
from __future__ import annotations

import json
import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BPoly

from .hessian import (
    LocalPolynomial, PMEParams, breaking_case, case1_polynomial, case2_polynomial,
    select_breaking_parameter,
)

__all__ = [
    "RadialProfile",
    "SmoothMin",
    "InitialDatum",
    "ConcavityReport",
    "ConstructionError",
    "build_local_w",
    "build_interior_datum",
    "build_control_datum",
    "build_boundary_datum",
    "verify_alpha_concavity",
    "concavity_matrix",
    "sym_lambda1",
]

CONCAVITY_RTOL = 1e-8
_RHO_SHRINK = 0.8


class ConstructionError(RuntimeError):
    pass


def sym_lambda1(a11, a12, a22):
    """Largest eigenvalue of [[a11, a12], [a12, a22]], without cancellation."""
    a11, a12, a22 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a11, a12, a22)))
    # work on the unit-size matrix so that products neither underflow nor overflow
    k = np.maximum(np.maximum(np.abs(a11), np.abs(a12)), np.abs(a22))
    k = np.where(k > 0, k, 1.0)
    a11, a12, a22 = a11 / k, a12 / k, a22 / k
    half_tr = 0.5 * (a11 + a22)
    rad = np.hypot(0.5 * (a11 - a22), a12)
    lam1 = half_tr + rad
    # when half_tr < 0 the sum cancels; use det = lam1 * lam2 instead
    lam2 = half_tr - rad
    det = a11 * a22 - a12 * a12
    with np.errstate(divide="ignore", invalid="ignore"):
        alt = np.where(lam2 != 0, det / lam2, 0.0)
    # the det route can undershoot lam2 by an ulp for a double eigenvalue
    return k * np.where(half_tr < 0, np.maximum(alt, lam2), lam1)


# ------------------------------------------------------------------ radial cap

@dataclass(frozen=True)
class RadialProfile:
    """f on [0, rho]: constant cap on [0, rho/4], quintic Hermite bridge on
    [rho/4, rho/2], closed form on [rho/2, rho]."""

    rho: float
    alpha: float
    regime: str = field(init=False)

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("cap radius must be positive")
        if self.alpha == 1.0:
            regime = "quadratic"
        elif self.alpha == 0.0:
            regime = "log"
        elif 0 < self.alpha < 1:
            regime = "power"
        else:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        object.__setattr__(self, "regime", regime)
        lo, hi = self.rho / 4, self.rho / 2
        bridge = BPoly.from_derivatives([lo, hi], [[self.cap, 0.0, 0.0], list(self._outer(hi))])
        object.__setattr__(self, "_bridge", bridge)

    @property
    def cap(self) -> float:
        rho, al = self.rho, self.alpha
        if self.regime == "quadratic":
            return 7 * rho**2 / 8
        if self.regime == "log":
            return math.log(rho / 2) + 0.25
        return (1 + al / 4) * (rho / 2) ** al

    def _outer(self, r):
        rho, al = self.rho, self.alpha
        if self.regime == "quadratic":
            return rho**2 - r**2, -2 * r, -2.0 + 0 * r
        d = rho - r
        if self.regime == "log":
            return np.log(d), -1 / d, -1 / d**2
        return d**al, -al * d ** (al - 1), al * (al - 1) * d ** (al - 2)

    def derivatives(self, r):
        """(f, f', f'') at radii r in [0, rho)."""
        r = np.asarray(r, dtype=float)
        f, f1, f2 = (np.zeros_like(r) for _ in range(3))
        inner = r <= self.rho / 4
        mid = (r > self.rho / 4) & (r < self.rho / 2)
        outer = r >= self.rho / 2
        f[inner] = self.cap
        if np.any(mid):
            f[mid] = self._bridge(r[mid])
            f1[mid] = self._bridge(r[mid], 1)
            f2[mid] = self._bridge(r[mid], 2)
        if np.any(outer):
            with np.errstate(divide="ignore", invalid="ignore"):
                o = self._outer(r[outer])
            f[outer], f1[outer], f2[outer] = o
        return f, f1, f2

    def __call__(self, r):
        return self.derivatives(r)[0]

    def certify(self, n: int = 200_001, edge: float = 1e-3) -> float:
        """Check monotonicity/concavity on a dense sample; return C with
        f', f'' <= -1/C on [rho/2, rho(1 - edge)]."""
        r = np.linspace(0.0, self.rho * (1 - edge), n)
        f, f1, f2 = self.derivatives(r)
        tol = 1e-12 * max(1.0, abs(self.cap))
        if np.any(np.diff(f) > tol) or np.any(f1 > tol) or np.any(f2 > tol):
            raise ConstructionError(f"radial cap is not decreasing and concave for {self}")
        # second differences as an independent check on the sampled values
        if np.any(np.diff(f, 2) > 1e3 * tol * (r[1] - r[0])):
            raise ConstructionError("radial cap fails the second-difference test")
        out = r >= self.rho / 2
        worst = max(np.max(f1[out]), np.max(f2[out]))
        return float(-1.0 / worst)


# --------------------------------------------------------------- smooth min

class SmoothMin:
    """m(p, q) = (p + q)/2 - s((p - q)/2) with s convex, |s'| <= 1, s(z) = |z|
    for |z| >= eps.  s is |z| convolved with the kernel (1 - y^2)^4, so it
    is C^5 and m(p, q) = min(p, q) exactly once |p - q| >= 2 eps."""

    _K = np.polynomial.Polynomial([1, 0, -1]) ** 4

    def __init__(self, eps: float):
        if not eps > 0:
            raise ValueError("smoothing width must be positive")
        self.eps = float(eps)
        K = self._K / self._K.integ(lbnd=-1)(1.0)
        K1 = K.integ(lbnd=-1)
        Ky1 = (np.polynomial.Polynomial([0, 1]) * K).integ(lbnd=-1)
        u = np.polynomial.Polynomial([0, 1])
        self._S = 2 * u * K1 - 2 * Ky1 - u
        self._S1 = self._S.deriv()
        self._S2 = self._S1.deriv()

    def s(self, z):
        """(s, s', s'') at z."""
        z = np.asarray(z, dtype=float)
        shape = z.shape
        z = z.reshape(-1)
        u = z / self.eps
        inside = np.abs(u) < 1
        s = np.abs(z).astype(float)
        s1 = np.sign(z).astype(float)
        s2 = np.zeros_like(s)
        s[inside] = self.eps * self._S(u[inside])
        s1[inside] = self._S1(u[inside])
        s2[inside] = self._S2(u[inside]) / self.eps
        return s.reshape(shape), s1.reshape(shape), s2.reshape(shape)

    def __call__(self, p, q):
        return 0.5 * (p + q) - self.s(0.5 * (p - q))[0]


# ------------------------------------------------------------ local polynomial

def _polar_sample(rho, n_r, n_t, r_min_frac=1e-3):
    r = np.linspace(rho * r_min_frac, rho, n_r)
    t = np.linspace(0, 2 * np.pi, n_t, endpoint=False)
    R, T = np.meshgrid(r, t, indexing="ij")
    return R * np.cos(T), R * np.sin(T)


def _local_conditions_hold(poly: LocalPolynomial, rho: float, n_r=1000, n_t=1000) -> bool:
    x, y = _polar_sample(rho, n_r, n_t)
    w11, w12, w22 = poly.hessian(x, y)
    det = w11 * w22 - w12 * w12
    return bool(np.all(det > 0) and np.all(w11 < 0) and np.all(poly(x, y) > 0))


def _poly_for(params: PMEParams, param: float) -> LocalPolynomial:
    if breaking_case(params.alpha) == 2:
        return case2_polynomial(param, params.alpha)
    return case1_polynomial(param)


def build_local_w(params: PMEParams, param: float | None = None, n_sample: int = 1000):
    """(polynomial, parameter, rho) with D^2 w < 0 and w > 0 on the
    punctured closed ball of radius rho, certified on n_sample^2 points."""
    return _build_local_w(params, param, n_sample)


@functools.lru_cache(maxsize=32)
def _build_local_w(params, param, n_sample):
    if param is None:
        param = float(select_breaking_parameter(params))
        poly = _poly_for(params, param)
    elif params.alpha == 0.5:
        poly = case1_polynomial(param)     # control: Case-1 shape, no breaking
    else:
        poly = _poly_for(params, param)
    # exact conditions at the origin: w11 = w12 = 0, w22 < 0, w > 0
    h0 = [float(v) for v in poly.hessian(0.0, 0.0)]
    if not (h0[0] == 0 and h0[1] == 0 and h0[2] < 0 and float(poly(0.0, 0.0)) > 0):
        raise ConstructionError(f"origin conditions fail for {poly}")
    hi = 0.5
    if _local_conditions_hold(poly, hi, n_sample, n_sample):
        return poly, param, hi
    lo = 0.0
    for _ in range(25):
        mid = 0.5 * (lo + hi)
        if _local_conditions_hold(poly, mid, n_sample, n_sample):
            lo = mid
        else:
            hi = mid
    if lo <= 0:
        raise ConstructionError("no radius certifies the local conditions")
    return poly, param, lo


# ------------------------------------------------------------- data types

class _Evaluator:
    """Base: subclasses give derivatives(x, y) -> (v, vx, vy, vxx, vxy, vyy)."""

    def value(self, x, y):
        return self.derivatives(x, y)[0]


class _InteriorEvaluator(_Evaluator):
    def __init__(self, poly, profile: RadialProfile, A, smin: SmoothMin | None, alpha):
        self.poly, self.profile, self.A, self.smin, self.alpha = poly, profile, A, smin, alpha
        self.rho = profile.rho

    def w_derivatives(self, x, y):
        """(w~, w~_x, w~_y, w~_xx, w~_xy, w~_yy) inside the ball."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        P = self.poly(x, y)
        Px, Py = self.poly.grad(x, y)
        Pxx, Pxy, Pyy = self.poly.hessian(x, y)
        r = np.hypot(x, y)
        f, f1, f2 = self.profile.derivatives(np.minimum(r, self.rho))
        with np.errstate(invalid="ignore", divide="ignore"):
            ex = np.where(r > 0, x / r, 0.0)
            ey = np.where(r > 0, y / r, 0.0)
            f1r = np.where(r > 0, f1 / r, f2)
        Hx, Hy = f1 * ex, f1 * ey
        Hxx = f2 * ex * ex + f1r * (1 - ex * ex)
        Hxy = (f2 - f1r) * ex * ey
        Hyy = f2 * ey * ey + f1r * (1 - ey * ey)
        H = f
        if self.smin is None:
            return P + H, Px + Hx, Py + Hy, Pxx + Hxx, Pxy + Hxy, Pyy + Hyy
        A = self.A
        H, Hx, Hy, Hxx, Hxy, Hyy = A * H, A * Hx, A * Hy, A * Hxx, A * Hxy, A * Hyy
        s, s1, s2 = self.smin.s(0.5 * (P - H))
        ma, mb = 0.5 * (1 - s1), 0.5 * (1 + s1)
        dx, dy = Px - Hx, Py - Hy
        q = 0.25 * s2
        w = 0.5 * (P + H) - s
        return (w, ma * Px + mb * Hx, ma * Py + mb * Hy,
                ma * Pxx + mb * Hxx - q * dx * dx,
                ma * Pxy + mb * Hxy - q * dx * dy,
                ma * Pyy + mb * Hyy - q * dy * dy)

    def derivatives(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        inside = np.hypot(x, y) < self.rho
        out = [np.zeros(x.shape) for _ in range(6)]
        if not np.any(inside):
            return tuple(out)
        w, wx, wy, wxx, wxy, wyy = self.w_derivatives(x[inside], y[inside])
        if self.alpha == 0:
            v = np.exp(w)
            vals = (v, v * wx, v * wy, v * (wxx + wx * wx), v * (wxy + wx * wy), v * (wyy + wy * wy))
        else:
            p = 1.0 / self.alpha
            w = np.maximum(w, 0.0)
            a1 = p * w ** (p - 1)
            with np.errstate(divide="ignore", invalid="ignore"):
                a2 = np.where(w > 0, p * (p - 1) * w ** (p - 2), 0.0)
            v = w**p
            vals = (v, a1 * wx, a1 * wy, a1 * wxx + a2 * wx * wx, a1 * wxy + a2 * wx * wy,
                    a1 * wyy + a2 * wy * wy)
        for o, val in zip(out, vals):
            o[inside] = val
        return tuple(out)


class _BoundaryEvaluator(_Evaluator):
    def __init__(self, q, d, X, Y, B, s, C=0.0):
        self.q, self.d, self.X, self.Y, self.B, self.s, self.C = q, d, X, Y, B, s, C
        self.g0 = d**q

    def g(self, x, order=0):
        q, d = self.q, self.d
        z = np.asarray(x, dtype=float) + d
        coef = [1.0, q, q * (q - 1)][order]
        return coef * z ** (q - order) / self.g0

    def derivatives(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        X, Y, B, s = self.X, self.Y, self.B, self.s
        xc = x - self.C
        b = B * (1 - (xc / X) ** 2 - (y / Y) ** 2)
        inside = (y > 0) & (b > 0) & (np.abs(xc) < X)
        out = [np.zeros(x.shape) for _ in range(6)]
        if not np.any(inside):
            return tuple(out)
        xi, yi, bi = x[inside], y[inside], b[inside]
        ci = xc[inside]
        g, g1, g2 = self.g(xi), self.g(xi, 1), self.g(xi, 2)
        a = yi * g
        ax, ay = yi * g1, g
        axx, axy, ayy = yi * g2, g1, 0.0
        bx, by = -2 * B * ci / X**2, -2 * B * yi / Y**2
        bxx, bxy, byy = -2 * B / X**2, 0.0, -2 * B / Y**2
        v = (a ** (-s) + bi ** (-s)) ** (-1 / s)
        ra, rb = v / a, v / bi
        Ma, Mb = ra ** (s + 1), rb ** (s + 1)
        Maa = (s + 1) * ra**s * (Ma / a - v / a**2)
        Mbb = (s + 1) * rb**s * (Mb / bi - v / bi**2)
        Mab = (s + 1) * ra**s * Mb / a
        vals = (
            v,
            Ma * ax + Mb * bx,
            Ma * ay + Mb * by,
            Ma * axx + Mb * bxx + Maa * ax * ax + 2 * Mab * ax * bx + Mbb * bx * bx,
            Ma * axy + Mb * bxy + Maa * ax * ay + Mab * (ax * by + ay * bx) + Mbb * bx * by,
            Ma * ayy + Mb * byy + Maa * ay * ay + 2 * Mab * ay * by + Mbb * by * by,
        )
        for o, val in zip(out, vals):
            o[inside] = val
        return tuple(out)

    def slope_on_axis(self, x):
        """dv0/dy at (x, 0) for |x| < X."""
        return self.g(x)


@dataclass
class InitialDatum:
    params: PMEParams
    kind: str                      # "interior", "control", "boundary"
    box: tuple                     # (xmin, xmax, ymin, ymax)
    evaluator: _Evaluator
    meta: dict

    def value(self, x, y):
        return self.evaluator.value(x, y)

    def derivatives(self, x, y):
        return self.evaluator.derivatives(x, y)

    def __call__(self, x, y):
        return self.value(x, y)

    def positive(self, x, y):
        return self.value(x, y) > 0

    def to_json(self, samples: int = 0) -> dict:
        doc = {
            "format": "pme_lab.initial_datum", "version": 1, "kind": self.kind,
            "params": {"m": self.params.m, "n": self.params.n, "alpha": self.params.alpha},
            "box": list(self.box), "meta": self.meta,
        }
        if samples:
            xs = np.linspace(self.box[0], self.box[1], samples)
            ys = np.linspace(self.box[2], self.box[3], samples)
            X, Y = np.meshgrid(xs, ys, indexing="ij")
            doc["samples"] = {"n": samples, "v": self.value(X, Y).tolist()}
        return doc

    def dumps(self, samples: int = 0) -> str:
        return json.dumps(self.to_json(samples), sort_keys=True)

    @classmethod
    def from_json(cls, doc: dict) -> "InitialDatum":
        if doc.get("format") != "pme_lab.initial_datum" or doc.get("version") != 1:
            raise ValueError("not a version-1 initial datum document")
        params = PMEParams(**doc["params"])
        meta = doc["meta"]
        if doc["kind"] == "boundary":
            datum = build_boundary_datum(params.alpha, m=params.m, _shape=meta["shape"],
                                         certify=False)
        elif doc["kind"] == "control":
            datum = build_control_datum(params.m, a=meta["param"], certify=False, _meta=meta)
        else:
            datum = build_interior_datum(params, certify=False, _meta=meta)
        if "samples" in doc:
            n = doc["samples"]["n"]
            xs = np.linspace(datum.box[0], datum.box[1], n)
            ys = np.linspace(datum.box[2], datum.box[3], n)
            X, Y = np.meshgrid(xs, ys, indexing="ij")
            if not np.array_equal(datum.value(X, Y), np.asarray(doc["samples"]["v"])):
                raise ValueError("stored samples disagree with the rebuilt datum")
        return datum


# ------------------------------------------------------------ concavity check

def concavity_matrix(derivs, alpha):
    """Entries of v D^2 v - (1 - alpha) grad v grad v^T, or of D^2 log v when
    alpha = 0, with the local scale used by the tolerance."""
    v, vx, vy, vxx, vxy, vyy = derivs
    if alpha == 0:
        with np.errstate(divide="ignore", invalid="ignore"):
            m11 = vxx / v - (vx / v) ** 2
            m12 = vxy / v - vx * vy / v**2
            m22 = vyy / v - (vy / v) ** 2
            scale = np.hypot(np.hypot(vxx, vyy), vxy) / v + (vx * vx + vy * vy) / v**2
        return m11, m12, m22, scale
    k = 1 - alpha
    m11 = v * vxx - k * vx * vx
    m12 = v * vxy - k * vx * vy
    m22 = v * vyy - k * vy * vy
    scale = v * np.hypot(np.hypot(vxx, vyy), vxy) + vx * vx + vy * vy
    return m11, m12, m22, scale


@dataclass(frozen=True)
class ConcavityReport:
    max_lambda1: float
    location: tuple
    n_samples: int
    max_excess: float          # max of lambda1 - tol * scale; <= 0 means concave within tolerance

    @property
    def concave(self) -> bool:
        return self.max_excess <= 0

    def merge(self, other: "ConcavityReport") -> "ConcavityReport":
        best = self if self.max_lambda1 >= other.max_lambda1 else other
        return ConcavityReport(best.max_lambda1, best.location, self.n_samples + other.n_samples,
                               max(self.max_excess, other.max_excess))


def verify_alpha_concavity(datum, n: int = 401, points=None, alpha=None,
                           rtol: float = CONCAVITY_RTOL) -> ConcavityReport:
    """Largest eigenvalue of the alpha-concavity matrix over the positive
    part of an n x n grid on datum.box (or over the given points)."""
    alpha = datum.params.alpha if alpha is None else alpha
    if points is None:
        x0, x1, y0, y1 = datum.box
        X, Y = np.meshgrid(np.linspace(x0, x1, n), np.linspace(y0, y1, n), indexing="ij")
        xs, ys = X.ravel(), Y.ravel()
    else:
        pts = np.asarray(points, dtype=float)
        xs, ys = pts[:, 0], pts[:, 1]
    d = datum.derivatives(xs, ys)
    pos = d[0] > 0
    if not np.any(pos):
        return ConcavityReport(-math.inf, (math.nan, math.nan), 0, -math.inf)
    d = tuple(np.asarray(c)[pos] for c in d)
    m11, m12, m22, scale = concavity_matrix(d, alpha)
    lam = sym_lambda1(m11, m12, m22)
    i = int(np.argmax(lam))
    excess = lam - rtol * scale
    return ConcavityReport(float(lam[i]), (float(xs[pos][i]), float(ys[pos][i])), int(pos.sum()),
                           float(np.max(excess)))


# ----------------------------------------------------------- interior datum

def build_interior_datum(params: PMEParams, certify: bool = True, n_cert: int = 601,
                         _meta: dict | None = None) -> InitialDatum:
    """alpha-concave v0 on B_rho(0) whose w~ = v0^alpha (log v0 for alpha = 0)
    equals the breaking polynomial near the origin."""
    al = params.alpha
    if al == 0.5:
        raise ValueError("alpha = 1/2 has no breaking datum; use build_control_datum")
    if _meta is None:
        poly, param, rho_local = build_local_w(params)
        meta = _interior_meta(params, poly, param, rho_local)
    else:
        meta = _meta
    return _assemble_interior(params, meta, "interior", certify, n_cert)


def build_control_datum(m: float, a: float = 1.0, certify: bool = True, n_cert: int = 601,
                        _meta: dict | None = None) -> InitialDatum:
    """Same assembly at alpha = 1/2 with the Case-1 polynomial; here the
    origin rate (m-1)(-32 + 8a - 4a^2) is negative for every a."""
    params = PMEParams(m=m, alpha=0.5)
    if _meta is None:
        poly, param, rho_local = build_local_w(params, param=a)
        meta = _interior_meta(params, poly, param, rho_local)
    else:
        meta = _meta
    return _assemble_interior(params, meta, "control", certify, n_cert)


def _interior_meta(params, poly, param, rho_local):
    al = params.alpha
    meta = {"param": param, "rho_local": rho_local, "poly": poly.to_json(),
            "cap": "quintic Hermite bridge on [rho/4, rho/2]"}
    if al == 0:
        meta.update(rho=rho_local, A=1.0, eps=None, glue="sum")
        return meta
    # stay inside the certified ball so that w stays bounded away from zero
    rho = _RHO_SHRINK * rho_local
    xa, ya = _polar_sample(rho, 400, 400, r_min_frac=0.0)
    xc, yc = _polar_sample(rho / 4, 200, 400, r_min_frac=0.0)
    w_min = float(np.min(poly(xa, ya)))
    w_core = float(np.max(poly(xc, yc)))
    if not w_min > 0:
        raise ConstructionError("local polynomial is not positive on the cap ball")
    # A F >= w + 2 eps on B_{rho/4}, so w~ = w there; the glue lives outside
    eps = 0.25 * w_min
    prof = RadialProfile(rho, al)
    A = (w_core + 2 * eps) / prof.cap
    meta.update(rho=rho, A=A, eps=eps, glue="smooth-min", w_min=w_min, w_core=w_core,
                r_exact=_exact_band(poly, prof, A, eps))
    return meta


def _exact_band(poly, prof, A, eps, n=400):
    """Smallest radius r0 with A F <= w - 2 eps on r0 <= |x| < rho (sampled),
    so that w~ = A F exactly on that band."""
    rho = prof.rho
    th = np.linspace(0, 2 * np.pi, 720, endpoint=False)

    def ok(r):
        x, y = r * np.cos(th), r * np.sin(th)
        return np.all(A * prof(np.full_like(th, min(r, rho * (1 - 1e-12)))) <= poly(x, y) - 2 * eps)

    radii = np.linspace(rho, rho / 4, n)
    r0, r_bad = rho, None
    for r in radii:
        if not ok(r):
            r_bad = float(r)
            break
        r0 = float(r)
    if r_bad is not None:
        # the band can be much thinner than the coarse step (steep (rho - r)^alpha)
        for _ in range(40):
            mid = 0.5 * (r0 + r_bad)
            if ok(mid):
                r0 = mid
            else:
                r_bad = mid
    return r0


def _assemble_interior(params, meta, kind, certify, n_cert):
    al = params.alpha
    poly = LocalPolynomial.from_json(meta["poly"])
    rho = meta["rho"]
    prof = RadialProfile(rho, al)
    smin = SmoothMin(meta["eps"]) if meta["glue"] == "smooth-min" else None
    ev = _InteriorEvaluator(poly, prof, meta["A"], smin, al)
    pad = 0.25 * rho
    datum = InitialDatum(params, kind, (-rho - pad, rho + pad, -rho - pad, rho + pad), ev, meta)
    if certify:
        C = prof.certify()
        meta["cap_C"] = C
        _certify_interior(datum, n_cert)
    return datum


def _certify_interior(datum: InitialDatum, n: int):
    ev = datum.evaluator
    rho = ev.rho
    x, y = _polar_sample(rho * (1 - 1e-6), n, n, r_min_frac=0.0)
    w, wx, wy, wxx, wxy, wyy = ev.w_derivatives(x, y)
    lam = sym_lambda1(wxx, wxy, wyy)
    scale = np.abs(wxx) + np.abs(wyy) + np.abs(wxy)
    r = np.hypot(x, y)
    if np.any(lam > CONCAVITY_RTOL * scale):
        i = np.argmax(lam - CONCAVITY_RTOL * scale)
        raise ConstructionError(f"D^2 w~ not negative semidefinite at {(x.flat[i], y.flat[i])}")
    away = r >= 0.05 * rho
    if not np.all(lam[away] < 0):
        raise ConstructionError("D^2 w~ not negative definite away from the origin")
    if datum.params.alpha > 0 and np.any(w[r < rho * (1 - 1e-6)] <= 0):
        raise ConstructionError("w~ is not positive inside the ball")
    datum.meta["lambda_margin_off_origin"] = float(-np.max(lam[away]))


# ----------------------------------------------------------- boundary datum

def _boundary_shape(alpha):
    """Shape parameters for g = ((x + d)/d)^q: q within the alpha-concavity
    limit, d chosen by a coarse search for the largest midpoint margin.
    When q is small the margin is small too, and the lens is shifted right
    (centre C) so the x = 1/2 front stays clear of the corner for longer."""
    q_max = 3.0 if alpha == 0 else min(3.0, 0.97 * (1 - alpha) / alpha)
    if q_max <= 1:
        raise ConstructionError(f"no strictly convex boundary slope is alpha-concave for alpha={alpha}")
    C, X = (0.0, None) if q_max >= 2 else (0.5, 1.53)
    d_low = 1.1 if X is None else X - C + 0.01
    best = None
    for d in np.linspace(d_low, 2.0, 10):
        g = lambda x: ((x + d) / d) ** q_max
        margin = 0.5 * (g(-0.5) + g(0.5)) - g(0.0)
        if best is None or margin > best[0]:
            best = (margin, d)
    d = float(best[1])
    if X is None:
        X = 1.0 + 0.5 * (d - 1.0)
    return {"q": q_max, "d": d, "X": X, "Y": 1.0, "B": 5.0, "s": 2.0, "C": C}


def build_boundary_datum(alpha: float, m: float = 2.0, certify: bool = True, n_cert: int = 801,
                         _shape: dict | None = None) -> InitialDatum:
    if not 0 <= alpha < 0.5:
        raise ValueError("boundary breaking data exist for alpha in [0, 1/2)")
    params = PMEParams(m=m, alpha=alpha)
    shape = _boundary_shape(alpha) if _shape is None else dict(_shape)
    ev = _BoundaryEvaluator(**shape)
    X, Y, C = shape["X"], shape["Y"], shape.get("C", 0.0)
    box = (C - 1.25 * X, C + 1.25 * X, -0.5 * Y, 1.25 * Y)
    S = [float(ev.slope_on_axis(x)) for x in (-0.5, 0.0, 0.5)]
    meta = {"shape": shape, "slopes": {"S_minus": S[0], "S_0": S[1], "S_plus": S[2]},
            "midpoint_margin": 0.5 * (S[0] + S[2]) - S[1]}
    datum = InitialDatum(params, "boundary", box, ev, meta)
    if certify:
        _certify_boundary(datum, n_cert)
    return datum


def _certify_boundary(datum: InitialDatum, n: int):
    ev = datum.evaluator
    meta = datum.meta
    # (a) the segment [-1, 1] x {0} lies on the boundary, Omega is convex
    if not (ev.C - ev.X < -1 and ev.C + ev.X > 1 and ev.d > ev.X - ev.C):
        raise ConstructionError("flat boundary piece does not contain [-1, 1]")
    # (b) alpha-concavity on a dense grid
    rep = verify_alpha_concavity(datum, n=n)
    meta["concavity"] = {"max_lambda1": rep.max_lambda1, "max_excess": rep.max_excess,
                         "n_samples": rep.n_samples}
    if not rep.concave:
        raise ConstructionError(f"boundary datum is not alpha-concave at {rep.location}")
    # (c) dv0/dy(., 0) positive and strongly convex on [-1, 1]; checked on the
    # evaluated field by one-sided differences, not on g itself
    xs = np.linspace(-1, 1, 201)
    hy = 1e-7
    slope = datum.value(xs, np.full_like(xs, hy)) / hy
    if np.any(slope <= 0):
        raise ConstructionError("boundary slope is not positive")
    dx = xs[1] - xs[0]
    second = np.diff(slope, 2) / dx**2
    meta["slope_convexity_margin"] = float(second.min())
    if not second.min() > 0.1:
        raise ConstructionError("boundary slope is not strongly convex")
    if not meta["midpoint_margin"] > 0:
        raise ConstructionError("midpoint slope inequality fails")
    # (d) gradient nonvanishing on the boundary (away from the two corners)
    t = np.linspace(0.02, np.pi - 0.02, 400)
    inward = 1 - 1e-6
    bx, by = ev.C + inward * ev.X * np.cos(t), inward * ev.Y * np.sin(t)
    d = datum.derivatives(bx, by)
    gmin = float(np.min(np.hypot(d[1], d[2])))
    meta["min_boundary_gradient"] = min(gmin, float(slope.min()))
    if not gmin > 0:
        raise ConstructionError("gradient vanishes on the curved boundary")
