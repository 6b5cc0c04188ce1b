"""Exact and semi-exact solutions of the pressure equation

    v_t = (m-1) v Lap(v) + |grad v|^2,

used as oracles: Barenblatt (expanding quadratic caps), planar travelling
waves, and Graveleau focusing solutions computed by shooting.

Graveleau profiles.  Substituting v = r^2 F(eta) / (-t), eta = t r^(-alpha)
into the radial equation gives

    F - eta F' = (m-1) F [alpha^2 eta^2 F'' + (alpha^2 - 3 alpha) eta F' + 2F]
                 + (m-1)(n-1) F (2F - alpha eta F') + (2F - alpha eta F')^2.

With theta = log(-eta) and P = eta F' = dF/dtheta the equation is autonomous,
and rescaling time by (m-1) alpha^2 F removes the singularity:

    F' = (m-1) alpha^2 F P,
    P' = F - P - (m-1) F (2F - 3 alpha P) - (m-1)(n-1) F (2F - alpha P)
         - (2F - alpha P)^2.

The profile is the orbit leaving (0, 0) along its centre manifold P ~ F
(phi(0) = 0, phi'(0) = -1) and entering the saddle (0, -1/alpha^2), which is
where phi vanishes with the finite slope -1/(alpha^2 gamma).  The anomalous
exponent is the alpha for which that connection exists.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import BPoly

__all__ = [
    "BarenblattParams",
    "barenblatt_eval",
    "barenblatt_match",
    "barenblatt_derivatives",
    "traveling_wave_eval",
    "TravelingWave",
    "GraveleauProfile",
    "graveleau_profile",
    "graveleau_eval",
    "graveleau_match",
    "Graveleau",
    "pme_residual",
    "similarity_ode_residual",
    "ShootingError",
]


class ShootingError(RuntimeError):
    pass


# ---------------------------------------------------------------- Barenblatt

@dataclass(frozen=True)
class BarenblattParams:
    A: float
    m: float
    n: int
    beta: float = field(init=False)

    def __post_init__(self):
        if not self.A > 0:
            raise ValueError("Barenblatt amplitude must be positive")
        if not self.m > 1:
            raise ValueError("m must exceed 1")
        beta = self.n / (self.n * (self.m - 1) + 2)
        object.__setattr__(self, "beta", beta)
        if abs(beta * (self.m - 1) + 2 * beta / self.n - 1) > 8 * np.finfo(float).eps:
            raise ArithmeticError("similarity exponent identity failed")

    def support_radius(self, t):
        return np.sqrt(2 * self.n * self.A / self.beta) * np.asarray(t, dtype=float) ** (self.beta / self.n)

    def boundary_slope(self, t):
        """Limit of |grad b| at the edge of the support."""
        return self.beta / self.n / t * self.support_radius(t)

    def __call__(self, x, t):
        return barenblatt_eval(x, t, self)

    def derivatives(self, x, t):
        return barenblatt_derivatives(x, t, self)


def _radius(x):
    x = np.asarray(x, dtype=float)
    return np.sqrt(np.sum(x * x, axis=-1))


def barenblatt_eval(x, t, bp: BarenblattParams, beta: float | None = None):
    """Pressure t^(-beta(m-1)) (A - beta/(2n) t^(-2 beta/n) |x|^2)_+.

    `beta` may be overridden to build deliberately wrong oracles."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("Barenblatt pressure is defined for t > 0 only")
    beta = bp.beta if beta is None else beta
    n, m = bp.n, bp.m
    r2 = np.sum(np.asarray(x, dtype=float) ** 2, axis=-1)
    inner = bp.A - beta / (2 * n) * t ** (-2 * beta / n) * r2
    return t ** (-beta * (m - 1)) * np.maximum(inner, 0.0)


def barenblatt_derivatives(x, t, bp: BarenblattParams):
    """(v, v_t, grad v, Lap v) inside the support, closed form."""
    x = np.asarray(x, dtype=float)
    b, n, m = bp.beta, bp.n, bp.m
    r2 = np.sum(x * x, axis=-1)
    p, q = -b * (m - 1), -2 * b / n
    k = b / (2 * n)
    v = t**p * (bp.A - k * t**q * r2)
    vt = p * t**(p - 1) * bp.A - k * (p + q) * t**(p + q - 1) * r2
    coef = -2 * k * t**(p + q)
    grad = coef * x
    lap = coef * n
    return v, vt, grad, lap


def barenblatt_match(S: float, R: float, m: float, n: int):
    """Barenblatt parameters and time t0 with support radius R and edge slope S."""
    if not (S > 0 and R > 0):
        raise ValueError("slope and radius must be positive")
    beta = n / (n * (m - 1) + 2)
    t0 = beta * R / (S * n)
    A = beta / (2 * n) * t0 ** (-2 * beta / n) * R**2
    return BarenblattParams(A=A, m=m, n=n), t0


# ---------------------------------------------------------- travelling wave

def traveling_wave_eval(x, t, c: float):
    """Planar wave c (c t - x_1)_+ moving in +x_1 with speed c."""
    x = np.asarray(x, dtype=float)
    return c * np.maximum(c * np.asarray(t, dtype=float) - x[..., 0], 0.0)


@dataclass(frozen=True)
class TravelingWave:
    c: float
    m: float = 2.0

    def __call__(self, x, t):
        return traveling_wave_eval(x, t, self.c)

    def derivatives(self, x, t):
        x = np.asarray(x, dtype=float)
        v = self.c * (self.c * t - x[..., 0])
        grad = np.zeros_like(x)
        grad[..., 0] = -self.c
        return v, np.full_like(v, self.c**2), grad, np.zeros_like(v)


# ---------------------------------------------------------------- Graveleau

def _numerator(F, P, al, m, n):
    return (F - P - (m - 1) * F * (2 * F - 3 * al * P)
            - (m - 1) * (n - 1) * F * (2 * F - al * P) - (2 * F - al * P) ** 2)


def _theta_rhs(theta, y, al, m, n):
    F, P = y
    return [P, _numerator(F, P, al, m, n) / ((m - 1) * al * al * F)]


def _centre_manifold_series(al, m, n, order=6):
    """Coefficients c_k of P = sum c_k F^k on the centre manifold of (0, 0).

    The series is only asymptotic (c_k grows factorially); each c_k follows
    explicitly from the lower ones."""
    K = (m - 1) * al * al
    c = np.zeros(order + 1)
    c[1] = 1.0
    for k in range(2, order + 1):
        d = -al * c
        d[1] += 2.0
        lhs = K * sum((k - i) * c[i] * c[k - i] for i in range(1, k))
        quad = sum(d[i] * d[k - i] for i in range(1, k))
        two = 2.0 if k == 2 else 0.0
        c[k] = (-(m - 1) * (two - 3 * al * c[k - 1])
                - (m - 1) * (n - 1) * (two - al * c[k - 1]) - quad - lhs)
    return c


def _start_point(al, m, n):
    """(theta0, F0, P0) on the centre manifold with F ~ -eta as eta -> 0."""
    c = _centre_manifold_series(al, m, n)
    ratio = np.polynomial.Polynomial(c[1:])          # P / F
    # theta = log F + int_0^F (1/P - 1/F) dF
    nodes, wts = np.polynomial.legendre.leggauss(20)
    f = 0.5 * _F_START * (nodes + 1)
    corr = 0.5 * _F_START * np.sum(wts * (1.0 / ratio(f) - 1.0) / f)
    return math.log(_F_START) + corr, _F_START, _F_START * ratio(_F_START)


def similarity_ode_residual(eta, F, dF, d2F, al, m, n):
    """Residual of the similarity ODE in the eta variable."""
    eF = eta * dF
    return (F - eF
            - (m - 1) * F * (al * al * eta * eta * d2F + (al * al - 3 * al) * eF + 2 * F)
            - (m - 1) * (n - 1) * F * (2 * F - al * eF)
            - (2 * F - al * eF) ** 2)


_F_START = 1e-3
_F_END = 1e-2
_KNOT_STEP = 2e-3


def _stable_manifold_series(al, m, n, order=30):
    """Coefficients k_q of P = sum k_q F^q on the stable manifold of the
    saddle (0, -1/al^2); k_1 = -(1 - ((m-1)(n+2)+4)/al) / m."""
    K = (m - 1) * al * al
    k = np.zeros(order + 1)
    k[0] = -1.0 / al**2
    for q in range(1, order + 1):
        d = -al * k
        d[1] += 2.0
        s = sum((q - i) * k[i] * k[q - i] for i in range(1, q + 1))
        mid = sum(d[i] * d[q - i] for i in range(1, q))
        two = 2.0 if q == 2 else 0.0
        lin = (m - 1) * (two - 3 * al * k[q - 1]) + (m - 1) * (n - 1) * (two - al * k[q - 1])
        rhs = (1 - 4 / al if q == 1 else 0.0) - lin - mid - K * s
        k[q] = rhs / (-(m - 1) * q - 1)
    return np.polynomial.Polynomial(k)


def _shoot(al, m, n, max_step=np.inf):
    """Integrate from the centre manifold; classify the fate of the orbit.

    Returns (kind, sol) with kind in {"over", "under"}: "over" means the orbit
    passes below the saddle's stable manifold or escapes, "under" means it
    passes above it or turns back before reaching small F.
    """
    th0, F0, P0 = _start_point(al, m, n)

    def hit_end(th, y, *a):
        return y[0] - _F_END
    hit_end.terminal = True
    hit_end.direction = -1

    def turn(th, y, *a):
        return y[1]
    turn.terminal = True
    turn.direction = 1

    def escape(th, y, *a):
        return abs(y[1]) + y[0] - 1e3
    escape.terminal = True

    # the approach to the centre manifold is stiff while F is small
    sol = solve_ivp(_theta_rhs, [th0, 40.0], [F0, P0], args=(al, m, n),
                    method="LSODA", rtol=1e-12, atol=1e-15, max_step=max_step,
                    events=[hit_end, turn, escape])
    if sol.t_events[2].size:
        return "over", sol
    if sol.t_events[0].size:
        # judge at the last accepted step; the event state is only interpolated
        F, P = sol.y[:, -2]
        return ("over" if P < _stable_manifold_series(al, m, n)(F) else "under"), sol
    return "under", sol


@dataclass
class GraveleauProfile:
    alpha_star: float
    gamma: float
    dphi_at_gamma: float
    m: float
    n: int
    eta: np.ndarray          # knots, increasing from gamma to eta_near_zero
    phi: np.ndarray
    dphi: np.ndarray
    d2phi: np.ndarray
    residual_bound: float = float("nan")
    series: tuple = ()       # centre-manifold coefficients of P/F, used near eta = 0
    version: int = 1

    def __post_init__(self):
        self.eta = np.asarray(self.eta, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        self.dphi = np.asarray(self.dphi, dtype=float)
        self.d2phi = np.asarray(self.d2phi, dtype=float)
        stacked = np.stack([self.phi, self.dphi, self.d2phi], axis=1)
        self._poly = BPoly.from_derivatives(self.eta, stacked)
        self._dpoly = self._poly.derivative()
        self._d2poly = self._poly.derivative(2)

    def _near_zero(self, s):
        """phi, phi', phi'' for eta0 <= s <= 0 from the centre-manifold series.

        Along the manifold -eta = F exp(G(F)), G(F) = int_0^F (P/F)^-1 - 1 df/f,
        which is solved for F by Newton."""
        ratio = np.polynomial.Polynomial(self.series)
        dratio = ratio.deriv()
        nodes, wts = np.polynomial.legendre.leggauss(12)
        u = 0.5 * (nodes + 1)
        w = 0.5 * wts

        def G(F):
            fu = F[..., None] * u
            with np.errstate(invalid="ignore", divide="ignore"):
                g = np.where(fu > 0, (1.0 / ratio(fu) - 1.0) / fu, -self.series[1])
            return F * np.sum(w * g, axis=-1)

        target = -s
        F = target.copy()
        for _ in range(60):
            S = ratio(F)
            step = (F * np.exp(G(F)) - target) / (np.exp(G(F)) / S)   # d/dF(F e^G) = e^G / S
            F = F - step
            if np.all(np.abs(step) <= 1e-16 * np.maximum(target, 1e-300)):
                break
        S, dS = ratio(F), dratio(F)
        pos = s < 0
        safe = np.where(pos, s, -1.0)
        d1 = np.where(pos, F * S / safe, -1.0)
        d2 = np.where(pos, F * S * (S + F * dS - 1.0) / safe**2, 2 * self.series[1])
        return F, d1, d2

    def _eval(self, s, which):
        s = np.asarray(s, dtype=float)
        if np.any(s > 0):
            raise ValueError("profile is defined for eta <= 0 only")
        out = np.zeros_like(s)
        inside = (s >= self.gamma) & (s < self.eta[-1])
        near0 = (s >= self.eta[-1]) & (s <= 0)
        poly = (self._poly, self._dpoly, self._d2poly)[which]
        out[inside] = poly(s[inside])
        if np.any(near0):
            out[near0] = self._near_zero(s[near0])[which]
        return out

    def __call__(self, s):
        """phi(s), extended by zero below gamma."""
        return self._eval(s, 0)

    def derivative(self, s, order=1):
        return self._eval(s, order)

    def ode_residual(self, s):
        s = np.asarray(s, dtype=float)
        return similarity_ode_residual(s, self(s), self.derivative(s, 1), self.derivative(s, 2),
                                       self.alpha_star, self.m, self.n)

    def to_json(self) -> dict:
        return {
            "format": "pme_lab.graveleau_profile", "version": self.version,
            "alpha_star": self.alpha_star, "gamma": self.gamma,
            "dphi_at_gamma": self.dphi_at_gamma, "m": self.m, "n": self.n,
            "residual_bound": self.residual_bound, "series": list(self.series),
            "eta": self.eta.tolist(), "phi": self.phi.tolist(),
            "dphi": self.dphi.tolist(), "d2phi": self.d2phi.tolist(),
        }

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def from_json(cls, data: dict) -> "GraveleauProfile":
        if data.get("format") != "pme_lab.graveleau_profile":
            raise ValueError("not a Graveleau profile document")
        if data.get("version") != 1:
            raise ValueError(f"unsupported profile version {data.get('version')}")
        keys = ["alpha_star", "gamma", "dphi_at_gamma", "m", "n", "eta", "phi", "dphi",
                "d2phi", "residual_bound", "series"]
        kw = {k: data[k] for k in keys}
        kw["series"] = tuple(kw["series"])
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "GraveleauProfile":
        return cls.from_json(json.loads(Path(path).read_text()))


def graveleau_profile(m: float, n: int, tol: float = 1e-8, max_bisect: int = 200) -> GraveleauProfile:
    """Compute the focusing profile phi on [gamma, 0] and its exponent."""
    if not m > 1:
        raise ValueError("m must exceed 1")
    if n < 2:
        raise ValueError("Graveleau profiles need n >= 2")

    grid = np.linspace(1.0 + 1e-3, 2.0 - 1e-3, 25)
    kinds = [_shoot(a, m, n)[0] for a in grid]
    lo = hi = None
    for a0, a1, k0, k1 in zip(grid[:-1], grid[1:], kinds[:-1], kinds[1:]):
        if k0 == "under" and k1 == "over":
            lo, hi = a0, a1
            break
    if lo is None:
        raise ShootingError(f"no undershoot/overshoot bracket in (1, 2) for m={m}, n={n}")
    for _ in range(max_bisect):
        if hi - lo <= 1e-13:
            break
        mid = 0.5 * (lo + hi)
        if _shoot(mid, m, n, max_step=_KNOT_STEP)[0] == "over":
            hi = mid
        else:
            lo = mid
    if hi - lo > 1e-10:
        raise ShootingError("bisection on the exponent did not converge")
    al = 0.5 * (lo + hi)

    # same step cap as the bisection, so the accepted orbit is the classified one
    kind, sol = _shoot(al, m, n, max_step=_KNOT_STEP)
    if not sol.t_events[0].size:
        raise ShootingError("orbit at the bisected exponent never approached the interface")

    # knots from accepted steps, thinned so that no interval is tiny
    ths, Fs, Ps = sol.t[:-1], sol.y[0, :-1], sol.y[1, :-1]
    pick = [0]
    for i in range(1, len(ths)):
        if ths[i] - ths[pick[-1]] >= 5e-4:
            pick.append(i)
    if pick[-1] != len(ths) - 1:
        pick[-1] = len(ths) - 1
    ths, F, P = ths[pick], Fs[pick], Ps[pick]
    Ftt = _numerator(F, P, al, m, n) / ((m - 1) * al * al * F)

    # tail: slide along the stable manifold of the saddle down to F = 0
    Ps_tail = _stable_manifold_series(al, m, n)
    dPs_tail = Ps_tail.deriv()

    def at_zero(th, y):
        return y[0]
    at_zero.terminal = True
    tail = solve_ivp(lambda th, y: [Ps_tail(y[0])], [ths[-1], ths[-1] + 1.0], [F[-1]],
                     method="DOP853", rtol=1e-13, atol=1e-16, events=at_zero,
                     dense_output=True)
    if not tail.t_events[0].size:
        raise ShootingError("tail along the stable manifold did not reach the interface")
    th_inf = tail.t_events[0][0]
    tt = np.linspace(ths[-1], th_inf, 41)[1:]
    Ft = tail.sol(tt)[0]
    Ft[-1] = 0.0
    Pt = Ps_tail(Ft)
    Ftt_t = dPs_tail(Ft) * Pt

    th_all = np.concatenate([ths, tt])
    F_all = np.concatenate([F, Ft])
    P_all = np.concatenate([P, Pt])
    Ftt_all = np.concatenate([Ftt, Ftt_t])
    eta = -np.exp(th_all)
    dphi = P_all / eta
    d2phi = (Ftt_all - P_all) / eta**2
    order = np.argsort(eta)
    gamma = float(eta[order][0])
    prof = GraveleauProfile(
        alpha_star=float(al), gamma=gamma, dphi_at_gamma=float(-1.0 / (al * al * gamma)),
        m=float(m), n=int(n), eta=eta[order], phi=F_all[order], dphi=dphi[order],
        d2phi=d2phi[order], series=tuple(_centre_manifold_series(al, m, n)[1:]),
    )
    # certify on midpoints between knots
    mids = np.concatenate([0.5 * (prof.eta[1:] + prof.eta[:-1]),
                           np.linspace(prof.eta[-1], 0.0, 50)])
    res = float(np.max(np.abs(prof.ode_residual(mids))))
    prof.residual_bound = res
    if not res <= tol:
        raise ShootingError(f"profile ODE residual {res:.3e} exceeds tolerance {tol:.1e}")
    return prof


def graveleau_eval(x, t, profile: GraveleauProfile, c: float):
    """Pressure r^2 phi(c t r^-alpha*) / (-t) for t < 0."""
    t = float(t)
    if t >= 0:
        raise ValueError("Graveleau pressure is defined for t < 0")
    r = _radius(x)
    with np.errstate(divide="ignore"):
        s = np.where(r > 0, c * t * r ** (-profile.alpha_star), -np.inf)
    vals = profile(np.where(np.isfinite(s), s, profile.gamma - 1.0))
    return r * r * vals / (-t)


def graveleau_match(S: float, R: float, profile: GraveleauProfile):
    """(c, t0) such that the vacuum ball at t0 has radius R and edge slope S."""
    if not (S > 0 and R > 0):
        raise ValueError("slope and radius must be positive")
    a, g = profile.alpha_star, profile.gamma
    t0 = a * g * R / S * profile.dphi_at_gamma
    c = g * R**a / t0
    return c, t0


@dataclass
class Graveleau:
    """Evaluable Graveleau solution with closed-form derivatives."""
    profile: GraveleauProfile
    c: float

    def interface_radius(self, t):
        return (self.c * t / self.profile.gamma) ** (1.0 / self.profile.alpha_star)

    def __call__(self, x, t):
        return graveleau_eval(x, t, self.profile, self.c)

    def derivatives(self, x, t):
        x = np.asarray(x, dtype=float)
        pr, a, c, n = self.profile, self.profile.alpha_star, self.c, self.profile.n
        r = _radius(x)
        s = c * t * r ** (-a)
        f, f1, f2 = pr(s), pr.derivative(s, 1), pr.derivative(s, 2)
        # s_r = -a s / r, s_t = s / t
        v = r * r * f / (-t)
        vt = r * r * (f1 * s / t) / (-t) + r * r * f / t**2
        vr = (2 * r * f + r * r * f1 * (-a * s / r)) / (-t)
        # d/dr of (2 r f - a r s f1)
        sr = -a * s / r
        vrr = (2 * f + 2 * r * f1 * sr - a * (s * f1 + r * sr * f1 + r * s * f2 * sr)) / (-t)
        lap = vrr + (n - 1) * vr / r
        grad = (vr / r)[..., None] * x
        return v, vt, grad, lap


# ------------------------------------------------------------------ residual

def pme_residual(solution, x, t, m: float, h: float = 1e-3, analytic: bool = True,
                 ht: float | None = None):
    """v_t - (m-1) v Lap v - |grad v|^2 at points x (shape (..., n)).

    Uses solution.derivatives(x, t) when available and `analytic` is set,
    otherwise fourth-order centred differences with step h in x and ht
    (default h) in t.
    """
    x = np.asarray(x, dtype=float)
    if analytic and hasattr(solution, "derivatives"):
        v, vt, grad, lap = solution.derivatives(x, t)
        return vt - (m - 1) * v * lap - np.sum(grad * grad, axis=-1)

    n = x.shape[-1]
    w = np.array([1.0, -8.0, 8.0, -1.0]) / (12 * h)         # offsets -2,-1,1,2
    w2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12 * h * h)  # offsets -2..2
    v = solution(x, t)
    ht = h if ht is None else ht
    vals_t = [solution(x, t + k * ht) for k in (-2, -1, 1, 2)]
    stencil = [v] + vals_t
    vt = sum(wk * f for wk, f in zip(w * h / ht, vals_t))
    lap = np.zeros_like(v)
    g2 = np.zeros_like(v)
    for d in range(n):
        e = np.zeros(n)
        e[d] = h
        side = {k: solution(x + k * e, t) for k in (-2, -1, 1, 2)}
        stencil += list(side.values())
        g2 = g2 + (w[0] * side[-2] + w[1] * side[-1] + w[2] * side[1] + w[3] * side[2]) ** 2
        lap = lap + w2[0] * side[-2] + w2[1] * side[-1] + w2[2] * v + w2[3] * side[1] + w2[4] * side[2]
    pos = np.stack([np.asarray(f) > 0 for f in stencil])
    if np.any(pos.any(axis=0) & ~pos.all(axis=0)):
        raise ValueError("residual stencil straddles the free boundary")
    return vt - (m - 1) * v * lap - g2
