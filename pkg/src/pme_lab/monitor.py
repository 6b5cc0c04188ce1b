"""Post-processing of trajectories: Hessians of v^alpha at a point, free
boundary positions along grid lines, convexity defects and ball checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull

from .initial_data import sym_lambda1

__all__ = [
    "Sym2",
    "StencilError",
    "AmbiguityError",
    "HypothesisError",
    "power_hessian",
    "power_hessian_exact",
    "Lambda1Series",
    "lambda1_series",
    "FrontSeries",
    "front_series",
    "fit_slope",
    "DefectSeries",
    "convexity_defect",
    "hull_defect_area",
    "VelocityReport",
    "velocity_bound_check",
]


class StencilError(ValueError):
    pass


class AmbiguityError(ValueError):
    pass


class HypothesisError(ValueError):
    pass


@dataclass(frozen=True)
class Sym2:
    a11: float
    a12: float
    a22: float

    @property
    def lam1(self) -> float:
        return float(sym_lambda1(self.a11, self.a12, self.a22))

    @property
    def lam2(self) -> float:
        k = self.scale or 1.0
        a11, a12, a22 = self.a11 / k, self.a12 / k, self.a22 / k
        half_tr = 0.5 * (a11 + a22)
        rad = math.hypot(0.5 * (a11 - a22), a12)
        if half_tr > 0:
            lam1 = half_tr + rad
            return k * min((a11 * a22 - a12**2) / lam1, lam1)
        return k * (half_tr - rad)

    @property
    def scale(self) -> float:
        return max(abs(self.a11), abs(self.a12), abs(self.a22))

    def as_array(self):
        return np.array([[self.a11, self.a12], [self.a12, self.a22]])


# 4th-order centred weights for first and second derivatives
_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


def _transform(v, alpha):
    return np.log(v) if alpha == 0 else v**alpha


def power_hessian(field_, h, alpha, index, stride: int = 1, eps_pos: float = 0.0,
                  order: int = 4) -> Sym2:
    """D^2(v^alpha) (D^2 log v for alpha = 0) at grid node `index` by centred
    differences with node stride `stride` (spacing stride*h)."""
    i, j = index
    s = int(stride)
    half = 2 if order == 4 else 1
    lo_i, hi_i, lo_j, hi_j = i - half * s, i + half * s, j - half * s, j + half * s
    if lo_i < 0 or lo_j < 0 or hi_i >= field_.shape[0] or hi_j >= field_.shape[1]:
        raise StencilError("stencil leaves the grid")
    patch = field_[lo_i:hi_i + 1:s, lo_j:hi_j + 1:s]
    if not np.all(patch > eps_pos):
        raise StencilError("stencil touches the zero set")
    w = _transform(patch, alpha)
    H = s * h
    c = half
    if order == 4:
        d1, d2 = _D1, _D2
    elif order == 2:
        d1, d2 = np.array([-0.5, 0.0, 0.5]), np.array([1.0, -2.0, 1.0])
    else:
        raise ValueError("stencil order must be 2 or 4")
    a11 = float(d2 @ w[:, c]) / H**2
    a22 = float(d2 @ w[c, :]) / H**2
    a12 = float(d1 @ w @ d1) / H**2
    return Sym2(a11, a12, a22)


def power_hessian_exact(derivs, alpha) -> Sym2:
    """D^2(v^alpha) from analytic (v, v1, v2, v11, v12, v22) at one point."""
    v, v1, v2, v11, v12, v22 = (float(np.asarray(d)) for d in derivs)
    if not v > 0:
        raise StencilError("point is outside the positivity set")
    if alpha == 0:
        return Sym2(v11 / v - v1 * v1 / v**2, v12 / v - v1 * v2 / v**2, v22 / v - v2 * v2 / v**2)
    a = alpha * v ** (alpha - 1)
    b = alpha * (alpha - 1) * v ** (alpha - 2)
    return Sym2(a * v11 + b * v1 * v1, a * v12 + b * v1 * v2, a * v22 + b * v2 * v2)


# ---------------------------------------------------------------- lambda_1

@dataclass
class Lambda1Series:
    times: np.ndarray
    lam1: np.ndarray
    lam2: np.ndarray
    scale: float                 # |lambda_2| at t = 0
    rate: float                  # fitted d lambda_1 / dt at t = 0
    rate_halfwidth: float
    t_fit: float
    delta_num: float             # end of the monotone window
    separated: bool              # eigenvalue separation >= 1e-3 scale at t = 0

    def positive_on_window(self) -> bool:
        sel = (self.times > 0) & (self.times <= self.delta_num)
        return bool(sel.any() and np.all(self.lam1[sel] > 0))


def lambda1_series(traj, alpha, point=(0.0, 0.0), stride: int = 1,
                   t_max: float | None = None, min_fit: int = 4) -> Lambda1Series:
    """lambda_1 of D^2(v^alpha) at the grid node nearest `point` per snapshot,
    with a least-squares initial rate over the first quarter of the monotone
    window."""
    idx = traj.grid.index_of(*point)
    ts, l1, l2 = [], [], []
    for t, f in zip(traj.times, traj.fields):
        if t_max is not None and t > t_max:
            break
        H = power_hessian(f, traj.grid.h, alpha, idx, stride=stride, eps_pos=traj.eps_pos)
        ts.append(t)
        l1.append(H.lam1)
        l2.append(H.lam2)
    ts, l1, l2 = np.array(ts), np.array(l1), np.array(l2)
    scale = abs(l2[0])
    separated = bool(l1[0] - l2[0] >= 1e-3 * max(scale, 1e-300))
    # monotone window: longest initial run in the direction of the first step
    n = len(ts)
    end = n - 1
    if n > 2:
        d = np.diff(l1)
        sgn = np.sign(d[0]) if d[0] != 0 else 1.0
        bad = np.nonzero(sgn * d < 0)[0]
        if bad.size:
            end = int(bad[0])
    delta = float(ts[end])
    sel = (ts > 0) & (ts <= delta / 4)
    if sel.sum() < min_fit:
        sel = np.zeros(n, bool)
        sel[1:min(n, 1 + min_fit)] = True
    rate, hw = fit_slope(ts[sel], l1[sel])
    return Lambda1Series(ts, l1, l2, scale, rate, hw, float(ts[sel].max()), delta, separated)


def fit_slope(t, y):
    """Least-squares slope with free intercept and a two-sigma half width."""
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    if t.size < 2:
        raise ValueError("need at least two samples to fit a slope")
    A = np.stack([np.ones_like(t), t], 1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    if t.size > 2:
        resid = y - A @ coef
        s2 = resid @ resid / (t.size - 2)
        cov = s2 * np.linalg.inv(A.T @ A)
        hw = 2 * math.sqrt(max(cov[1, 1], 0.0))
    else:
        hw = math.inf
    return float(coef[1]), hw


# ------------------------------------------------------------------ fronts

@dataclass
class FrontSeries:
    line: float                  # coordinate of the grid line
    axis: int                    # 1: vertical line x = line, scan in y; 0: horizontal
    direction: int               # -1: scan towards smaller coordinate from ref
    ref: float
    times: np.ndarray
    positions: np.ndarray
    slope: float = math.nan
    slope_halfwidth: float = math.nan
    t_fit: float = math.nan

    def fitted(self, t_fit: float, t_min: float = 0.0) -> "FrontSeries":
        sel = (self.times > t_min) & (self.times <= t_fit)
        s, hw = fit_slope(self.times[sel], self.positions[sel])
        return FrontSeries(self.line, self.axis, self.direction, self.ref, self.times,
                           self.positions, s, hw, float(t_fit))


def _crossing(values, coords, start, direction, eps, span, bulk=0.25):
    """Free-boundary position scanning from index `start` in `direction`.

    The eps-crossing detects the boundary (and raises if positivity
    reappears within `span`).  The explicit scheme leaves a precursor layer
    of a few cells where 0 < v << h |grad v|, so the eps level runs ahead of
    the front.  The position is therefore the zero of the linear
    extrapolation through the last two bulk nodes, a node counting as bulk
    when v >= bulk * (drop from its inner neighbour).  With bulk=None the
    plain eps-level interpolation is returned."""
    n = values.size
    k = start
    if not values[k] > eps:
        raise HypothesisError("reference point is outside the positivity set")
    while 0 <= k + direction < n and values[k + direction] > eps:
        k += direction
    if not 0 <= k + direction < n:
        raise AmbiguityError("no zero crossing before the grid edge")
    kz = k + direction
    stop = kz + direction * span
    rng = range(kz, min(stop, n - 1) + 1) if direction > 0 else range(kz, max(stop, 0) - 1, -1)
    if any(values[q] > eps for q in rng):
        raise AmbiguityError("several boundary crossings within the search window")
    frac = (values[k] - eps) / (values[k] - values[kz])
    level = coords[k] + frac * (coords[kz] - coords[k])
    if bulk is None:
        return level
    kb = k
    for _ in range(_MAX_PRECURSOR):
        inner = kb - direction
        if inner == start or not 0 <= inner < n:
            break
        drop = values[inner] - values[kb]
        if drop <= 0:
            return level
        if values[kb] >= bulk * drop:
            return coords[kb] + values[kb] / drop * (coords[kb] - coords[inner])
        kb = inner
    return level


_MAX_PRECURSOR = 4


def front_series(traj, line: float, ref: float, direction: int = -1, axis: int = 1,
                 span: int = 4, t_max: float | None = None) -> FrontSeries:
    """Free-boundary position on the grid line nearest `line`, found by
    scanning from `ref` in `direction` to the eps_pos level of pressure.

    With axis=1 and direction=-1 this is y(t) = max{y <= ref : v(x, y, t) = 0}."""
    g = traj.grid
    if axis == 1:
        li, ri = g.index_of(line, ref)
        coords = g.y
        line_at = float(g.x[li])
    else:
        ri, li = g.index_of(ref, line)
        coords = g.x
        line_at = float(g.y[li])
    ts, ps = [], []
    for t, f in zip(traj.times, traj.fields):
        if t_max is not None and t > t_max:
            break
        vals = f[li, :] if axis == 1 else f[:, li]
        ps.append(_crossing(vals, coords, ri, direction, traj.eps_pos, span))
        ts.append(t)
    return FrontSeries(line_at, axis, direction, ref, np.array(ts), np.array(ps))


# ---------------------------------------------------------------- convexity

@dataclass
class DefectSeries:
    times: np.ndarray
    defect: np.ndarray
    fronts: tuple
    hull_area: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def window(self, threshold: float):
        """Maximal run of consecutive samples with defect >= threshold, as
        (t_a, t_b), or None."""
        ok = self.defect >= threshold
        best, cur = None, None
        for k, flag in enumerate(ok):
            if flag:
                cur = (cur[0], k) if cur else (k, k)
                if best is None or cur[1] - cur[0] > best[1] - best[0]:
                    best = cur
            else:
                cur = None
        if best is None:
            return None
        return float(self.times[best[0]]), float(self.times[best[1]])


def hull_defect_area(field_, grid, eps_pos) -> float:
    """Area of grid cells whose nodes lie in the convex hull of the positive
    nodes but are not positive; zero up to boundary effects for convex sets."""
    X, Y = grid.mesh()
    pos = field_ > eps_pos
    pts = np.stack([X[pos], Y[pos]], 1)
    if len(pts) < 3:
        return 0.0
    hull = ConvexHull(pts)
    cand = np.stack([X[~pos], Y[~pos]], 1)
    # half-plane form of the hull: normal . p + offset <= 0 inside
    normals, offsets = hull.equations[:, :2], hull.equations[:, 2]
    inside = np.all(cand @ normals.T + offsets <= -1e-12, axis=1)
    return float(inside.sum() * grid.h**2)


def convexity_defect(traj, lines=(-0.5, 0.0, 0.5), ref: float = 0.5, direction: int = -1,
                     t_max: float | None = None, hull: bool = False) -> DefectSeries:
    """defect(t) = y(x_0, t) - (y(x_-, t) + y(x_+, t))/2 from three vertical
    lines; positive values mean the midpoint lies outside the support."""
    fr = tuple(front_series(traj, x, ref, direction, axis=1, t_max=t_max) for x in lines)
    d = fr[1].positions - 0.5 * (fr[0].positions + fr[2].positions)
    if direction > 0:
        d = -d
    areas = np.zeros(0)
    if hull:
        areas = np.array([hull_defect_area(f, traj.grid, traj.eps_pos)
                          for t, f in zip(traj.times, traj.fields) if t_max is None or t <= t_max])
    return DefectSeries(fr[0].times, d, fr, areas)


# ------------------------------------------------------------- ball checks

@dataclass
class VelocityReport:
    passed: bool
    inclusion_ok: bool
    exclusion_ok: bool
    worst_inclusion: float       # min over t of (v - eps) on the growing inner ball
    worst_exclusion: float       # max over t of (v - eps) on the shrinking outer ball
    times_checked: int
    tol: float


def velocity_bound_check(traj, p_r, r, q_R, R, s_low, s_high, t_max: float,
                         tol: float | None = None) -> VelocityReport:
    """B_{r + s_low t}(p_r) inside and B_{R - s_high t}(q_R) outside the
    positivity set for sampled t in (0, t_max], both radii reduced by `tol`
    (default 3h) to absorb the discrete interface layer."""
    g = traj.grid
    tol = 3 * g.h if tol is None else tol
    X, Y = g.mesh()
    d_in = np.hypot(X - p_r[0], Y - p_r[1])
    d_out = np.hypot(X - q_R[0], Y - q_R[1])
    v0, eps = traj.fields[0], traj.eps_pos
    if np.any(v0[d_in < r - tol] <= eps):
        raise HypothesisError("interior ball condition fails at t = 0")
    if np.any(v0[d_out < R - tol] > eps):
        raise HypothesisError("exterior ball condition fails at t = 0")
    worst_in, worst_out, n = math.inf, -math.inf, 0
    for t, f in zip(traj.times, traj.fields):
        if not 0 < t <= t_max:
            continue
        n += 1
        mi = d_in < r + s_low * t - tol
        mo = d_out < R - s_high * t - tol
        if mi.any():
            worst_in = min(worst_in, float((f[mi] - eps).min()))
        if mo.any():
            worst_out = max(worst_out, float((f[mo] - eps).max()))
    inc = worst_in > 0
    exc = worst_out <= 0
    return VelocityReport(bool(inc and exc and n > 0), bool(inc), bool(exc), worst_in, worst_out,
                          n, tol)
