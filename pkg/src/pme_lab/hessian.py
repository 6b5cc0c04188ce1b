"""Pointwise evolution of second derivatives of w = v**alpha (or log v).

Everything here is exact arithmetic on derivative jets at a point; no grids.
The evolution formulas hold for smooth positive solutions of the pressure
equation v_t = (m-1) v Lap(v) + |grad v|^2 in two space dimensions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Mapping

import numpy as np

__all__ = [
    "PMEParams",
    "Jet4",
    "LocalPolynomial",
    "jet_from_polynomial",
    "eval_w11_rate",
    "breaking_lhs",
    "select_breaking_parameter",
    "case1_polynomial",
    "case2_polynomial",
    "breaking_case",
]


@dataclass(frozen=True)
class PMEParams:
    m: float
    n: int = 2
    alpha: float = 1.0

    def __post_init__(self):
        if not self.m > 1:
            raise ValueError(f"porous medium exponent must exceed 1, got m={self.m}")
        if self.n < 1:
            raise ValueError(f"dimension must be >= 1, got n={self.n}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"concavity index must lie in [0, 1], got alpha={self.alpha}")


@dataclass(frozen=True)
class Jet4:
    """Derivatives of a scalar at a point, up to the fourth-order terms that
    enter the w_11 evolution.  Mixed partials are stored once:
    w112 = w_{211}, w122 = w_{221}, w1122 = w_{2211}."""

    w: float = 0.0
    w1: float = 0.0
    w2: float = 0.0
    w11: float = 0.0
    w12: float = 0.0
    w22: float = 0.0
    w111: float = 0.0
    w112: float = 0.0
    w122: float = 0.0
    w222: float = 0.0
    w1111: float = 0.0
    w1122: float = 0.0

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


# multi-index (order in x1, order in x2) for each jet component
_JET_INDEX = {
    "w": (0, 0), "w1": (1, 0), "w2": (0, 1),
    "w11": (2, 0), "w12": (1, 1), "w22": (0, 2),
    "w111": (3, 0), "w112": (2, 1), "w122": (1, 2), "w222": (0, 3),
    "w1111": (4, 0), "w1122": (2, 2),
}


class LocalPolynomial:
    """Bivariate polynomial of total degree <= 4, stored as {(i, j): coef}
    for the monomial x1**i * x2**j."""

    def __init__(self, coeffs: Mapping[tuple[int, int], float]):
        clean = {}
        for (i, j), c in coeffs.items():
            if i < 0 or j < 0 or i + j > 4:
                raise ValueError(f"monomial x1^{i} x2^{j} outside degree <= 4")
            if c != 0:
                clean[(int(i), int(j))] = float(c)
        self.coeffs = clean

    def __repr__(self):
        return f"LocalPolynomial({self.coeffs!r})"

    def derivative(self, di: int, dj: int) -> "LocalPolynomial":
        out = {}
        for (i, j), c in self.coeffs.items():
            if i < di or j < dj:
                continue
            fac = math.perm(i, di) * math.perm(j, dj)
            out[(i - di, j - dj)] = out.get((i - di, j - dj), 0.0) + c * fac
        return LocalPolynomial(out)

    def __call__(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        out = np.zeros(np.broadcast(x1, x2).shape)
        for (i, j), c in self.coeffs.items():
            out = out + c * x1**i * x2**j
        return out

    def grad(self, x1, x2):
        return self.derivative(1, 0)(x1, x2), self.derivative(0, 1)(x1, x2)

    def hessian(self, x1, x2):
        return (self.derivative(2, 0)(x1, x2), self.derivative(1, 1)(x1, x2),
                self.derivative(0, 2)(x1, x2))

    def to_json(self) -> list:
        return [[i, j, c] for (i, j), c in sorted(self.coeffs.items())]

    @classmethod
    def from_json(cls, data) -> "LocalPolynomial":
        return cls({(int(i), int(j)): c for i, j, c in data})


def jet_from_polynomial(p: LocalPolynomial, point=(0.0, 0.0)) -> Jet4:
    x1, x2 = float(point[0]), float(point[1])
    vals = {name: float(p.derivative(*idx)(x1, x2)) for name, idx in _JET_INDEX.items()}
    return Jet4(**vals)


def case1_polynomial(a: float) -> LocalPolynomial:
    """w = 1 + a x1 - x2^2 + x1 x2^2 - x1^4 - 2 x1^2 x2^2."""
    return LocalPolynomial({(0, 0): 1.0, (1, 0): a, (0, 2): -1.0, (1, 2): 1.0,
                            (4, 0): -1.0, (2, 2): -2.0})


def case2_polynomial(b: float, alpha: float) -> LocalPolynomial:
    s = math.sqrt(1.5 - alpha)
    return LocalPolynomial({
        (0, 0): 1.0,
        (1, 0): alpha * s / (b * (1.0 - alpha)),
        (0, 2): -b * b,
        (1, 2): b * s,
        (4, 0): -1.0 / (12.0 * b * b),
        (2, 2): -1.0,
    })


def breaking_case(alpha: float) -> int:
    """1 for alpha in [0, 1/2) or alpha == 1, 2 for alpha in (1/2, 1)."""
    if alpha == 0.5:
        raise ValueError("alpha = 1/2 admits no breaking polynomial (root concavity is preserved)")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return 2 if 0.5 < alpha < 1.0 else 1


def eval_w11_rate(jet: Jet4, params: PMEParams) -> float:
    """Time derivative of w_11 at the point, for w = v**alpha (alpha > 0) or
    w = log v (alpha = 0), summing the repeated index k over {1, 2}."""
    m, al = params.m, params.alpha
    j = jet
    wkk = j.w11 + j.w22
    wkk1 = j.w111 + j.w122
    wkk11 = j.w1111 + j.w1122
    wk2 = j.w1**2 + j.w2**2
    wk_wk1 = j.w1 * j.w11 + j.w2 * j.w12
    w1k2 = j.w11**2 + j.w12**2
    wk_wk11 = j.w1 * j.w111 + j.w2 * j.w112

    if al == 0.0:
        e = math.exp(j.w)
        return e * ((m - 1) * wkk11 + 2 * (m - 1) * j.w1 * wkk1 + (m - 1) * j.w1**2 * wkk
                    + (m - 1) * j.w11 * wkk + m * j.w1**2 * wk2 + m * j.w11 * wk2
                    + 4 * m * j.w1 * wk_wk1 + 2 * m * w1k2 + 2 * m * wk_wk11)

    if not j.w > 0:
        raise ValueError(f"w must be positive for alpha > 0, got w={j.w}")
    p = 1.0 / al
    w = j.w
    K = (1.0 + (m - 1) * (1 - al)) / al
    return ((m - 1) * w**p * wkk11
            + 2 * (m - 1) / al * w**(p - 1) * j.w1 * wkk1
            + (m - 1) / al * (p - 1) * w**(p - 2) * j.w1**2 * wkk
            + (m - 1) / al * w**(p - 1) * j.w11 * wkk
            + K * ((p - 2) * (p - 1) * w**(p - 3) * j.w1**2 * wk2
                   + (p - 1) * w**(p - 2) * j.w11 * wk2
                   + 4 * (p - 1) * w**(p - 2) * j.w1 * wk_wk1
                   + 2 * w**(p - 1) * w1k2
                   + 2 * w**(p - 1) * wk_wk11))


def breaking_lhs(params: PMEParams, param: float) -> float:
    """Closed-form left side of the breaking inequality for the Case-1
    (parameter a) or Case-2 (parameter b) polynomial at the origin.

    For alpha = 0 this is the bracket without the common factor e^w.
    """
    m, al = params.m, params.alpha
    case = breaking_case(al)
    if case == 2:
        b = param
        return (-(m - 1) * (2 / b**2 + 4)
                + 2 * (m - 1) * (1.5 - al) / (1 - al)
                + (1 - 2 * al) * (1 + (m - 1) * (1 - al)) * al * (1.5 - al)**2
                / (b**4 * (1 - al)**3))
    a = param
    if al == 0.0:
        return -32 * (m - 1) + 4 * (m - 1) * a - 2 * a**2 * (m - 1) + m * a**4
    p = 1.0 / al
    return (-32 * (m - 1) + 4 * (m - 1) / al * a - 2 * (m - 1) / al * (p - 1) * a**2
            + p * (p - 2) * (p - 1) * (1 + (m - 1) * (1 - al)) * a**4)


def select_breaking_parameter(params: PMEParams, max_param: int = 10**6) -> int:
    """Smallest positive integer a (or b) making breaking_lhs positive."""
    breaking_case(params.alpha)
    for k in range(1, max_param + 1):
        if breaking_lhs(params, float(k)) > 0:
            return k
    raise RuntimeError(f"no breaking parameter below {max_param} for {params}")
