"""Explicit conservative finite differences for u_t = Lap(u^m).

The density form is stepped (5-point Laplacian of u^m, forward Euler) and
pressure v = m/(m-1) u^(m-1) is reported.  With
dt <= h^2 / (4 m max u^(m-1)) each step is a monotone map of the nodal
values, so ordering, nonnegativity and the discrete mass are preserved.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, asdict
from typing import Callable, Sequence

import numba
import numpy as np

__all__ = [
    "Grid2D",
    "SolverConfig",
    "Trajectory",
    "RadialGrid",
    "RadialTrajectory",
    "ComparisonReport",
    "InstabilityError",
    "pressure_to_density",
    "density_to_pressure",
    "evolve",
    "evolve_radial",
    "comparison_check",
    "stable_dt",
]


class InstabilityError(RuntimeError):
    pass


def pressure_to_density(v, m):
    return ((m - 1) * np.maximum(v, 0.0) / m) ** (1.0 / (m - 1))


def density_to_pressure(u, m):
    return m / (m - 1) * np.maximum(u, 0.0) ** (m - 1)


@dataclass(frozen=True)
class Grid2D:
    """Nodes x0 + i h (i = 0..nx), y0 + j h (j = 0..ny); the outer ring of
    nodes carries the boundary values."""

    x0: float
    y0: float
    h: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 16 or self.ny < 16:
            raise ValueError("grid needs at least 16 cells per direction")
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")

    @classmethod
    def from_box(cls, box, n: int) -> "Grid2D":
        """n cells across the longer side; the box is grown to fit whole cells."""
        xmin, xmax, ymin, ymax = box
        h = max(xmax - xmin, ymax - ymin) / n
        nx = max(16, int(math.ceil((xmax - xmin) / h - 1e-9)))
        ny = max(16, int(math.ceil((ymax - ymin) / h - 1e-9)))
        cx, cy = 0.5 * (xmin + xmax), 0.5 * (ymin + ymax)
        return cls(cx - nx * h / 2, cy - ny * h / 2, h, nx, ny)

    @classmethod
    def centered(cls, half_width: float, n: int, center=(0.0, 0.0)) -> "Grid2D":
        """Square grid of n cells (n even) with a node at `center`."""
        if n % 2:
            raise ValueError("use an even cell count so the centre is a node")
        h = 2 * half_width / n
        return cls(center[0] - half_width, center[1] - half_width, h, n, n)

    @property
    def box(self):
        return (self.x0, self.x0 + self.nx * self.h, self.y0, self.y0 + self.ny * self.h)

    @property
    def x(self):
        return self.x0 + self.h * np.arange(self.nx + 1)

    @property
    def y(self):
        return self.y0 + self.h * np.arange(self.ny + 1)

    def mesh(self):
        return np.meshgrid(self.x, self.y, indexing="ij")

    def index_of(self, x, y):
        """Nearest node indices to (x, y)."""
        return int(round((x - self.x0) / self.h)), int(round((y - self.y0) / self.h))

    def sample(self, func):
        X, Y = self.mesh()
        return np.asarray(func(X, Y), dtype=float)


@dataclass(frozen=True)
class SolverConfig:
    sigma: float = 0.5
    eps_pos: float | None = None        # default 1e-8 max v0
    output_times: tuple | None = None   # snapshot times; default: only t = T
    output_every: int | None = None     # or every k steps
    boundary: str = "dirichlet0"        # or "prescribed"
    boundary_values: Callable | None = field(default=None, compare=False)  # (X, Y, t) -> pressure

    def __post_init__(self):
        if not 0 < self.sigma <= 0.9:
            raise ValueError("CFL safety factor must lie in (0, 0.9]")
        if self.eps_pos is not None and self.eps_pos < 0:
            raise ValueError("positivity threshold must be nonnegative")
        if self.boundary not in ("dirichlet0", "prescribed"):
            raise ValueError(f"unknown boundary condition {self.boundary!r}")
        if self.boundary == "prescribed" and self.boundary_values is None:
            raise ValueError("prescribed boundary needs boundary_values")

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("boundary_values")
        d["scheme"] = "explicit Euler, 5-point Laplacian of u^m"
        d["dt_policy"] = "sigma h^2 / (4 m max u^(m-1))"
        return d


@dataclass
class Trajectory:
    grid: Grid2D
    m: float
    times: list
    fields: list                 # pressure snapshots
    config: dict
    mass: np.ndarray             # discrete mass sum(u) h^2 after every step
    step_times: np.ndarray
    eps_pos: float

    def density(self, k):
        return pressure_to_density(self.fields[k], self.m)

    def positive_set(self, k):
        return self.fields[k] > self.eps_pos

    def to_csv(self, path, k: int = -1):
        X, Y = self.grid.mesh()
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["x", "y", "v"])
            for row in zip(X.ravel(), Y.ravel(), self.fields[k].ravel()):
                wr.writerow([repr(float(c)) for c in row])

    def save_npz(self, path):
        g = self.grid
        np.savez_compressed(path, times=np.asarray(self.times), fields=np.stack(self.fields),
                            grid=np.array([g.x0, g.y0, g.h, g.nx, g.ny]), m=self.m,
                            mass=self.mass, step_times=self.step_times, eps_pos=self.eps_pos)

    @classmethod
    def load_npz(cls, path) -> "Trajectory":
        z = np.load(path)
        x0, y0, h, nx, ny = z["grid"]
        grid = Grid2D(float(x0), float(y0), float(h), int(nx), int(ny))
        return cls(grid, float(z["m"]), list(z["times"]), list(z["fields"]), {},
                   z["mass"], z["step_times"], float(z["eps_pos"]))


def stable_dt(u_max, m, h, sigma):
    if u_max <= 0:
        return math.inf
    return sigma * h * h / (4 * m * u_max ** (m - 1))


@numba.njit(cache=True)
def _power(u, m, p):
    nx, ny = u.shape
    if m == 2.0:
        for i in range(nx):
            for j in range(ny):
                p[i, j] = u[i, j] * u[i, j]
    elif m == 3.0:
        for i in range(nx):
            for j in range(ny):
                p[i, j] = u[i, j] * u[i, j] * u[i, j]
    else:
        for i in range(nx):
            for j in range(ny):
                p[i, j] = u[i, j] ** m if u[i, j] > 0.0 else 0.0
    return p


@numba.njit(cache=True)
def _laplacian_step(u, m, lam, out):
    """out = u + lam * Lap5(u^m) on interior nodes; boundary ring copied."""
    nx, ny = u.shape
    p = _power(u, m, np.empty_like(u))
    out[0, :] = u[0, :]
    out[nx - 1, :] = u[nx - 1, :]
    out[:, 0] = u[:, 0]
    out[:, ny - 1] = u[:, ny - 1]
    for i in range(1, nx - 1):
        for j in range(1, ny - 1):
            out[i, j] = u[i, j] + lam * (p[i + 1, j] + p[i - 1, j] + p[i, j + 1]
                                         + p[i, j - 1] - 4.0 * p[i, j])
    return out


@numba.njit(cache=True)
def _advance_dirichlet(u, m, h, sigma, t, target, mass, tbuf, stop_every):
    """Step with zero boundary values until `target` or until the mass
    buffer is full.  Returns (u, t, steps, min value seen)."""
    h2 = h * h
    out = np.empty_like(u)
    k = 0
    umin = 0.0
    while t < target and k < mass.size:
        umax = u.max()
        if umax <= 0.0:
            t = target
            mass[k] = 0.0
            tbuf[k] = t
            k += 1
            break
        dt = sigma * h2 / (4.0 * m * umax ** (m - 1.0))
        if t + dt >= target * (1.0 - 1e-14):
            dt = target - t
            tn = target
        else:
            tn = t + dt
        _laplacian_step(u, m, dt / h2, out)
        u, out = out, u
        t = tn
        mn = u.min()
        if mn < umin:
            umin = mn
        s = u.sum()
        mass[k] = s * h2
        tbuf[k] = t
        k += 1
        if not (mn >= -1e-14) or not np.isfinite(s):
            break
        if stop_every > 0 and k % stop_every == 0:
            break
    return u, t, k, umin


def _initial_field(datum, grid):
    if callable(getattr(datum, "value", None)):
        return grid.sample(datum.value)
    if callable(datum):
        return grid.sample(datum)
    v = np.asarray(datum, dtype=float)
    if v.shape != (grid.nx + 1, grid.ny + 1):
        raise ValueError("initial field does not match the grid")
    return v.copy()


def _set_boundary(u, grid, cfg, m, t, XY):
    if cfg.boundary == "dirichlet0":
        u[0, :] = u[-1, :] = 0.0
        u[:, 0] = u[:, -1] = 0.0
    else:
        X, Y = XY
        vb = cfg.boundary_values
        for sl in ((0, slice(None)), (-1, slice(None)), (slice(None), 0), (slice(None), -1)):
            u[sl] = pressure_to_density(vb(X[sl], Y[sl], t), m)


def _schedule(T, cfg):
    if cfg.output_times is not None:
        outs = sorted(float(t) for t in cfg.output_times if 0 < t <= T)
        if not outs or outs[-1] < T:
            outs.append(float(T))
        return outs
    return [float(T)]


def evolve(datum, m: float, T: float, cfg: SolverConfig, grid: Grid2D,
           max_steps: int = 50_000_000) -> Trajectory:
    """Evolve pressure datum (InitialDatum, callable (X, Y) -> v, or array)."""
    if not m > 1:
        raise ValueError("m must exceed 1")
    if not T >= 0:
        raise ValueError("final time must be nonnegative")
    v0 = _initial_field(datum, grid)
    if np.any(v0 < 0) or not np.all(np.isfinite(v0)):
        raise ValueError("initial pressure must be finite and nonnegative")
    XY = grid.mesh() if cfg.boundary == "prescribed" else None
    u = pressure_to_density(v0, m)
    _set_boundary(u, grid, cfg, m, 0.0, XY)
    eps_pos = cfg.eps_pos if cfg.eps_pos is not None else 1e-8 * float(v0.max())
    h2 = grid.h**2
    times, fields = [0.0], [density_to_pressure(u, m)]
    mass, step_t = [np.array([u.sum() * h2])], [np.zeros(1)]
    t, k = 0.0, 0
    every = int(cfg.output_every or 0)
    chunk = 1 if cfg.boundary == "prescribed" else 65536
    mbuf, tbuf = np.empty(chunk), np.empty(chunk)
    for target in _schedule(T, cfg):
        while t < target:
            if cfg.boundary == "prescribed":
                u, t, nk, umin = _advance_prescribed(u, m, grid, cfg, t, target, XY, mbuf, tbuf)
            else:
                u, t, nk, umin = _advance_dirichlet(u, float(m), grid.h, cfg.sigma, t, target,
                                                    mbuf, tbuf, every - k % every if every else 0)
            mass.append(mbuf[:nk].copy())
            step_t.append(tbuf[:nk].copy())
            k += nk
            if umin < -1e-14 or not np.all(np.isfinite(mbuf[:nk])):
                raise InstabilityError(f"negative or non-finite density {umin:.3e} at t={t:.6g}")
            if k > max_steps:
                raise RuntimeError("step budget exhausted")
            if every and k % every == 0 and t < target:
                times.append(t)
                fields.append(density_to_pressure(u, m))
        if target > times[-1]:
            times.append(target)
            fields.append(density_to_pressure(u, m))
    return Trajectory(grid, m, times, fields, cfg.echo(), np.concatenate(mass),
                      np.concatenate(step_t), eps_pos)


def _advance_prescribed(u, m, grid, cfg, t, target, XY, mbuf, tbuf):
    h2 = grid.h**2
    dt = stable_dt(float(u.max()), m, grid.h, cfg.sigma)
    tn = target if t + dt >= target * (1 - 1e-14) else t + dt
    out = np.empty_like(u)
    _laplacian_step(u, float(m), (tn - t) / h2, out)
    _set_boundary(out, grid, cfg, m, tn, XY)
    mbuf[0], tbuf[0] = out.sum() * h2, tn
    return out, tn, 1, min(0.0, float(out.min()))


# ---------------------------------------------------------------- radial

@dataclass(frozen=True)
class RadialGrid:
    """Cells [i dr, (i+1) dr], i = 0..ncells-1, values at cell centres."""

    r_max: float
    ncells: int
    n: int = 2

    @property
    def dr(self):
        return self.r_max / self.ncells

    @property
    def r(self):
        return (np.arange(self.ncells) + 0.5) * self.dr

    @property
    def faces(self):
        return np.arange(self.ncells + 1) * self.dr

    @property
    def volumes(self):
        f = self.faces
        return (f[1:] ** self.n - f[:-1] ** self.n) / self.n


@dataclass
class RadialTrajectory:
    grid: RadialGrid
    m: float
    times: list
    fields: list
    mass: np.ndarray


@numba.njit(cache=True)
def _advance_radial(u, m, cin, cout, vol, rate_max, sigma, t, target, mass):
    n = u.size
    ivol = 1.0 / vol
    k = 0
    umin = 0.0
    p = np.empty(n)
    while t < target and k < mass.size:
        umax = u.max()
        if umax <= 0.0:
            t = target
            mass[k] = 0.0
            k += 1
            break
        dt = sigma / (rate_max * m * umax ** (m - 1.0))
        if t + dt >= target * (1.0 - 1e-14):
            dt = target - t
            tn = target
        else:
            tn = t + dt
        if m == 2.0:
            for i in range(n):
                p[i] = u[i] * u[i]
        else:
            for i in range(n):
                p[i] = u[i] ** m if u[i] > 0.0 else 0.0
        flux_lo = 0.0
        s = 0.0
        for i in range(n - 1):
            flux_hi = cin[i] * (p[i + 1] - p[i])
            u[i] += dt * (flux_hi - flux_lo) * ivol[i]
            flux_lo = flux_hi
            s += u[i] * vol[i]
            umin = min(umin, u[i])
        u[n - 1] += dt * (-cout * p[n - 1] - flux_lo) * ivol[n - 1]
        s += u[n - 1] * vol[n - 1]
        umin = min(umin, u[n - 1])
        t = tn
        mass[k] = s
        k += 1
        if not (umin >= -1e-14) or not np.isfinite(s):
            break
    return t, k, umin


def evolve_radial(profile, m: float, n: int, T: float, cfg: SolverConfig,
                  grid: RadialGrid) -> RadialTrajectory:
    """Finite volumes for u_t = r^(1-n) (r^(n-1) (u^m)_r)_r with zero value
    beyond r_max; `profile` maps radii to pressure."""
    if grid.n != n:
        raise ValueError("grid dimension does not match n")
    if not m > 1:
        raise ValueError("m must exceed 1")
    v0 = np.asarray(profile(grid.r), dtype=float)
    if np.any(v0 < 0) or not np.all(np.isfinite(v0)):
        raise ValueError("initial pressure must be finite and nonnegative")
    u = pressure_to_density(v0, m).copy()
    dr = grid.dr
    area = grid.faces ** (n - 1)
    vol = grid.volumes
    # flux coefficients between neighbours and to the zero ghost beyond r_max
    cin = np.append(area[1:-1] / dr, 0.0)
    cout = area[-1] / (0.5 * dr)
    diag = np.zeros_like(u)
    diag[:-1] += cin[:-1]
    diag[1:] += cin[:-1]
    diag[-1] += cout
    rate_max = float((diag / vol).max())
    times, fields = [0.0], [density_to_pressure(u, m)]
    mass = [np.array([np.sum(u * vol)])]
    buf = np.empty(1 << 20)
    t = 0.0
    for target in _schedule(T, cfg):
        while t < target:
            t, nk, umin = _advance_radial(u, float(m), cin, cout, vol, rate_max, cfg.sigma,
                                          t, target, buf)
            mass.append(buf[:nk].copy())
            if umin < -1e-14 or not np.all(np.isfinite(buf[:nk])):
                raise InstabilityError(f"negative or non-finite density at t={t:.6g}")
        times.append(target)
        fields.append(density_to_pressure(u, m))
    return RadialTrajectory(grid, m, times, fields, np.concatenate(mass))


# ------------------------------------------------------------ comparison

@dataclass(frozen=True)
class ComparisonReport:
    min_gap: float          # min over steps and nodes of (u_B - u_A)
    steps: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.min_gap >= -self.tol


def comparison_check(datum_a, datum_b, m: float, T: float, cfg: SolverConfig, grid: Grid2D,
                     tol: float = 1e-10) -> ComparisonReport:
    """Evolve both data with a common time step and sweep u_B - u_A."""
    va, vb = _initial_field(datum_a, grid), _initial_field(datum_b, grid)
    ua, ub = pressure_to_density(va, m), pressure_to_density(vb, m)
    XY = grid.mesh() if cfg.boundary == "prescribed" else None
    for u in (ua, ub):
        _set_boundary(u, grid, cfg, m, 0.0, XY)
    gap = float((ub - ua).min())
    h2 = grid.h**2
    t, k = 0.0, 0
    na, nb = ua.copy(), ub.copy()
    while t < T:
        dt = min(stable_dt(float(ua.max()), m, grid.h, cfg.sigma),
                 stable_dt(float(ub.max()), m, grid.h, cfg.sigma), T - t)
        if not math.isfinite(dt):
            break
        _laplacian_step(ua, float(m), dt / h2, na)
        _laplacian_step(ub, float(m), dt / h2, nb)
        ua, na = na, ua
        ub, nb = nb, ub
        t = T if T - t <= dt else t + dt
        for u in (ua, ub):
            _set_boundary(u, grid, cfg, m, t, XY)
        gap = min(gap, float((ub - ua).min()))
        k += 1
    return ComparisonReport(gap, k, tol)
