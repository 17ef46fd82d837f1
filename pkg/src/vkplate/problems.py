"""Manufactured von Karman problems with closed-form derivatives.

Loads are built so that (u, v) solves

    Delta^2 u - [u, v] = f,    Delta^2 v + 1/2 [u, u] = g,

with the bracket [a, b] = a_xx b_yy + a_yy b_xx - 2 a_xy b_xy and clamped
boundary conditions u = du/dn = v = dv/dn = 0.
"""
import math
from dataclasses import dataclass

import numpy as np


class SeparableField:
    """phi(x, y) = X(x) Y(y), given 1D derivative callables d(k, t), k = 0..4."""

    def __init__(self, dx, dy):
        self.dx = dx
        self.dy = dy

    def d(self, kx, ky, x, y):
        return self.dx(kx, x) * self.dy(ky, y)

    def __call__(self, x, y):
        return self.d(0, 0, x, y)

    def grad(self, x, y):
        return self.d(1, 0, x, y), self.d(0, 1, x, y)

    def hessian(self, x, y):
        return self.d(2, 0, x, y), self.d(1, 1, x, y), self.d(0, 2, x, y)

    def laplacian(self, x, y):
        return self.d(2, 0, x, y) + self.d(0, 2, x, y)

    def grad_laplacian(self, x, y):
        return (self.d(3, 0, x, y) + self.d(1, 2, x, y),
                self.d(2, 1, x, y) + self.d(0, 3, x, y))

    def bilaplacian(self, x, y):
        return self.d(4, 0, x, y) + 2 * self.d(2, 2, x, y) + self.d(0, 4, x, y)


def _quartic_bump(k, t):
    """Derivatives of t^2 (1 - t)^2."""
    t = np.asarray(t, dtype=float)
    if k == 0:
        return t ** 2 * (1 - t) ** 2
    if k == 1:
        return 2 * t - 6 * t ** 2 + 4 * t ** 3
    if k == 2:
        return 2 - 12 * t + 12 * t ** 2
    if k == 3:
        return -12 + 24 * t
    if k == 4:
        return np.full_like(t, 24.0)
    return np.zeros_like(t)


def _sin_squared(k, t):
    """Derivatives of sin^2(pi t) = (1 - cos(2 pi t)) / 2."""
    t = np.asarray(t, dtype=float)
    w = 2 * math.pi * t
    if k == 0:
        return np.sin(math.pi * t) ** 2
    # d^k/dt^k of -cos(w)/2 = -(2 pi)^k cos(w + k pi/2) / 2
    return -0.5 * (2 * math.pi) ** k * np.cos(w + k * math.pi / 2)


def _clamp_bump(k, t):
    """Derivatives of (t^2 - 1)^2."""
    t = np.asarray(t, dtype=float)
    if k == 0:
        return (t ** 2 - 1) ** 2
    if k == 1:
        return 4 * t ** 3 - 4 * t
    if k == 2:
        return 12 * t ** 2 - 4
    if k == 3:
        return 24 * t
    if k == 4:
        return np.full_like(t, 24.0)
    return np.zeros_like(t)


# ------------------------------------------------------------ singular part

@dataclass(frozen=True)
class SingularExponent:
    omega: float
    alpha: float

    @property
    def residual(self):
        return alpha_residual(self.alpha, self.omega)


def alpha_residual(alpha, omega):
    return math.sin(alpha * omega) ** 2 - alpha ** 2 * math.sin(omega) ** 2


def _alpha_slope(alpha, omega):
    return omega * math.sin(2 * alpha * omega) - 2 * alpha * math.sin(omega) ** 2


def find_alpha(omega, step=1e-3):
    """Smallest root in (1/2, 1) of sin^2(alpha omega) = alpha^2 sin^2(omega).

    alpha = 1 is always a (characteristic) root; the scan stops short of it.
    """
    if not math.pi < omega < 2 * math.pi:
        raise ValueError("omega must lie in (pi, 2 pi)")
    lo = 0.5
    flo = alpha_residual(lo, omega)
    hi = None
    a = lo
    while a + step < 1.0 - 1e-6:
        b = a + step
        fb = alpha_residual(b, omega)
        if flo == 0.0:
            hi = lo
            break
        if flo * fb < 0:
            lo, hi = a, b
            break
        a, flo = b, fb
    if hi is None:
        raise ValueError(f"no sign change of the exponent equation for omega={omega}")
    flo = alpha_residual(lo, omega)
    while hi - lo > 1e-15 * max(1.0, abs(lo)):
        mid = 0.5 * (lo + hi)
        fm = alpha_residual(mid, omega)
        if fm == 0.0:
            lo = hi = mid
            break
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    alpha = 0.5 * (lo + hi)
    for _ in range(3):
        slope = _alpha_slope(alpha, omega)
        if slope == 0.0:
            break
        nxt = alpha - alpha_residual(alpha, omega) / slope
        if abs(alpha_residual(nxt, omega)) >= abs(alpha_residual(alpha, omega)):
            break
        alpha = nxt
    return SingularExponent(omega, alpha)


class CornerSingularity:
    """s = r^(1+alpha) g_{alpha,omega}(theta), biharmonic, clamped on theta = 0, omega.

    Written as s = Re(conj(z) P(z) + Q(z)) with P, Q multiples of z^alpha and
    z^(alpha+1); theta is taken in [0, 2 pi) so the branch cut lies in the
    excluded quadrant.
    """

    def __init__(self, alpha, omega):
        a, w = alpha, omega
        self.alpha, self.omega = a, w
        c1 = math.sin((a - 1) * w) / (a - 1) - math.sin((a + 1) * w) / (a + 1)
        c2 = math.cos((a - 1) * w) - math.cos((a + 1) * w)
        # g = c1 [cos((a-1)t) - cos((a+1)t)] - c2 [sin((a-1)t)/(a-1) - sin((a+1)t)/(a+1)]
        self.p = c1 + 1j * c2 / (a - 1)          # P = p z^a
        self.q = -c1 - 1j * c2 / (a + 1)         # Q = q z^(a+1)
        self.c1, self.c2 = c1, c2

    def g(self, theta):
        a, c1, c2 = self.alpha, self.c1, self.c2
        return (c1 * (np.cos((a - 1) * theta) - np.cos((a + 1) * theta))
                - c2 * (np.sin((a - 1) * theta) / (a - 1) - np.sin((a + 1) * theta) / (a + 1)))

    def _polar(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r = np.hypot(x, y)
        th = np.arctan2(y, x)
        th = np.where(th < 0, th + 2 * math.pi, th)
        return r, th

    def _zpow(self, r, th, beta):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = r ** beta * np.exp(1j * beta * th)
        return np.where(r > 0, out, 0.0)

    def derivatives(self, x, y):
        """Dict of s, s_x, s_y, s_xx, s_xy, s_yy, lap, lap_x, lap_y (not defined at r = 0)."""
        a = self.alpha
        r, th = self._polar(x, y)
        zbar = np.asarray(x, dtype=float) - 1j * np.asarray(y, dtype=float)
        za, za1, zam1, zam2 = (self._zpow(r, th, a + k) for k in (0, 1, -1, -2))
        P, P1, P2 = self.p * za, self.p * a * zam1, self.p * a * (a - 1) * zam2
        Q, Q1, Q2 = self.q * za1, self.q * (a + 1) * za, self.q * (a + 1) * a * zam1
        phi = zbar * P + Q
        return {
            "s": phi.real,
            "x": (zbar * P1 + P + Q1).real,
            "y": (1j * (zbar * P1 - P + Q1)).real,
            "xx": (zbar * P2 + 2 * P1 + Q2).real,
            "xy": (1j * (zbar * P2 + Q2)).real,
            "yy": (-zbar * P2 + 2 * P1 - Q2).real,
            "lap": (4 * P1).real,
            "lap_x": (4 * P2).real,
            "lap_y": (4j * P2).real,
        }

    def __call__(self, x, y):
        return self.derivatives(x, y)["s"]


class BubbleSingularField:
    """phi = bubble * s with bubble = (x^2 - 1)^2 (y^2 - 1)^2."""

    def __init__(self, singular):
        self.s = singular
        self.bubble = SeparableField(_clamp_bump, _clamp_bump)

    def __call__(self, x, y):
        return self.bubble(x, y) * self.s(x, y)

    def grad(self, x, y):
        a = self.bubble
        ds = self.s.derivatives(x, y)
        ax, ay = a.grad(x, y)
        av = a(x, y)
        return ax * ds["s"] + av * ds["x"], ay * ds["s"] + av * ds["y"]

    def hessian(self, x, y):
        a = self.bubble
        ds = self.s.derivatives(x, y)
        av = a(x, y)
        ax, ay = a.grad(x, y)
        axx, axy, ayy = a.hessian(x, y)
        s = ds["s"]
        return (axx * s + 2 * ax * ds["x"] + av * ds["xx"],
                axy * s + ax * ds["y"] + ay * ds["x"] + av * ds["xy"],
                ayy * s + 2 * ay * ds["y"] + av * ds["yy"])

    def bilaplacian(self, x, y):
        # Leibniz rule for the bilaplacian of a product; bilap(s) = 0
        a = self.bubble
        ds = self.s.derivatives(x, y)
        ax, ay = a.grad(x, y)
        axx, axy, ayy = a.hessian(x, y)
        lap_a = a.laplacian(x, y)
        lax, lay = a.grad_laplacian(x, y)
        return (ds["s"] * a.bilaplacian(x, y)
                + 2 * lap_a * ds["lap"]
                + 4 * (ax * ds["lap_x"] + ay * ds["lap_y"])
                + 4 * (ds["x"] * lax + ds["y"] * lay)
                + 4 * (axx * ds["xx"] + 2 * axy * ds["xy"] + ayy * ds["yy"]))


# ------------------------------------------------------------------ problems

def bracket(eta, chi, x, y):
    exx, exy, eyy = eta.hessian(x, y)
    cxx, cxy, cyy = chi.hessian(x, y)
    return exx * cyy + eyy * cxx - 2 * exy * cxy


@dataclass(frozen=True)
class ManufacturedProblem:
    name: str
    domain: str
    u: object
    v: object
    alpha: float

    def f(self, x, y):
        return self.u.bilaplacian(x, y) - bracket(self.u, self.v, x, y)

    def g(self, x, y):
        return self.v.bilaplacian(x, y) + 0.5 * bracket(self.u, self.u, x, y)


def square_problem():
    """u = x^2 y^2 (1-x)^2 (1-y)^2 and v = sin^2(pi x) sin^2(pi y) on (0,1)^2."""
    return ManufacturedProblem(
        "square", "unit_square",
        SeparableField(_quartic_bump, _quartic_bump),
        SeparableField(_sin_squared, _sin_squared),
        1.0)


LSHAPE_OMEGA = 1.5 * math.pi


def lshape_problem():
    """u = v = bubble * r^(1+alpha) g(theta) on (-1,1)^2 minus [0,1)x(-1,0]."""
    exponent = find_alpha(LSHAPE_OMEGA)
    field = BubbleSingularField(CornerSingularity(exponent.alpha, LSHAPE_OMEGA))
    return ManufacturedProblem("lshape", "l_shape", field, field, exponent.alpha)


PROBLEMS = {"square": square_problem, "lshape": lshape_problem}


def get_problem(name):
    key = name.replace("-", "").replace("_", "").lower()
    if key not in PROBLEMS:
        raise ValueError(f"unknown problem {name!r}; expected one of {sorted(PROBLEMS)}")
    return PROBLEMS[key]()
