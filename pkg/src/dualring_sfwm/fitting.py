"""Least-squares peak and power-law fits.

Peak models are fitted with MINPACK's Levenberg-Marquardt (through
``scipy.optimize.least_squares``) on internally centred and scaled
abscissae, started from deterministic moment-free guesses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .exceptions import InsufficientDataError

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))
MAX_ITERATIONS = 200
STEP_TOL = 1e-10


@dataclass(frozen=True)
class Curve:
    x: np.ndarray
    y: np.ndarray
    sigma_y: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError("x and y must be 1-D arrays of equal length")
        order = np.argsort(x, kind="stable")
        object.__setattr__(self, "x", x[order])
        object.__setattr__(self, "y", y[order])
        if self.sigma_y is not None:
            s = np.asarray(self.sigma_y, dtype=float)
            if s.shape != x.shape or np.any(s <= 0):
                raise ValueError("sigma_y must be positive and match x")
            object.__setattr__(self, "sigma_y", s[order])


@dataclass(frozen=True)
class FitResult:
    model: str
    params: dict
    fwhm: float | None
    residual_norm: float
    converged: bool
    iterations: int
    n_used: int = 0
    extra: dict = field(default_factory=dict)

    def __call__(self, x):
        return MODELS[self.model](np.asarray(x, dtype=float), **self.params)


def lorentzian(x, amplitude, center, fwhm, offset):
    half = fwhm / 2.0
    return amplitude * half ** 2 / ((x - center) ** 2 + half ** 2) + offset


def gaussian(x, amplitude, center, sigma, offset):
    return amplitude * np.exp(-0.5 * ((x - center) / sigma) ** 2) + offset


def power_law(x, k, p):
    return k * np.power(x, p)


MODELS = {"lorentzian": lorentzian, "gaussian": gaussian, "power_law": power_law}


def _as_curve(curve_or_x, y=None, sigma_y=None):
    if isinstance(curve_or_x, Curve):
        return curve_or_x
    return Curve(curve_or_x, y, sigma_y)


def _peak_guess(x, y):
    i = int(np.argmax(y))  # first maximum on ties
    lo, hi = float(y.min()), float(y.max())
    half = lo + 0.5 * (hi - lo)
    above = np.flatnonzero(y >= half)
    width = x[above[-1]] - x[above[0]] if above.size > 1 else 0.0
    if width <= 0:
        width = (x[-1] - x[0]) / max(x.size - 1, 1)
    return hi - lo, float(x[i]), float(width), lo


def _fit_peak(model, curve, width_to_param):
    if curve.x.size < 5:
        raise InsufficientDataError("peak fits need at least 5 points")
    x, y = curve.x, curve.y
    x_mid = 0.5 * (x[0] + x[-1])
    x_scale = (x[-1] - x[0]) / 2.0 or 1.0
    y_scale = float(np.max(np.abs(y))) or 1.0
    xs, ys = (x - x_mid) / x_scale, y / y_scale
    w = 1.0 / (curve.sigma_y / y_scale) if curve.sigma_y is not None else np.ones_like(y)

    amp, cen, width, off = _peak_guess(xs, ys)
    p0 = np.array([amp, cen, width_to_param(width), off])
    func = MODELS[model]

    def resid(p):
        return (func(xs, *p) - ys) * w

    sol = least_squares(resid, p0, method="lm", xtol=STEP_TOL, ftol=1e-15, gtol=1e-15,
                        max_nfev=MAX_ITERATIONS * (p0.size + 1))
    a, c, s, o = sol.x
    s = abs(s)
    params = {"amplitude": a * y_scale, "center": c * x_scale + x_mid,
              "offset": o * y_scale}
    return sol, params, s * x_scale


def _rms(curve, fitted):
    r = fitted - curve.y
    if curve.sigma_y is not None:
        r = r / curve.sigma_y
    return float(np.sqrt(np.mean(r * r)))


def fit_lorentzian(curve, y=None, sigma_y=None):
    """y = A (G/2)^2 / ((x - x0)^2 + (G/2)^2) + B; ``fwhm`` is G."""
    curve = _as_curve(curve, y, sigma_y)
    sol, params, gamma = _fit_peak("lorentzian", curve, lambda width: width)
    params["fwhm"] = gamma
    fitted = lorentzian(curve.x, **params)
    return FitResult("lorentzian", params, gamma, _rms(curve, fitted),
                     bool(sol.success), int(sol.nfev), curve.x.size)


def fit_gaussian(curve, y=None, sigma_y=None):
    """y = A exp(-(x - x0)^2 / 2 s^2) + B; ``fwhm`` is 2 sqrt(2 ln 2) s."""
    curve = _as_curve(curve, y, sigma_y)
    sol, params, sigma = _fit_peak("gaussian", curve, lambda width: width / FWHM_PER_SIGMA)
    params["sigma"] = sigma
    fitted = gaussian(curve.x, **params)
    return FitResult("gaussian", params, FWHM_PER_SIGMA * sigma, _rms(curve, fitted),
                     bool(sol.success), int(sol.nfev), curve.x.size)


def fit_power_law(curve, y=None, sigma_y=None):
    """y = k x^p by linear regression of log y on log x.

    Points with y <= 0 cannot enter the log fit and are dropped;
    ``extra["excluded"]`` reports how many.
    """
    curve = _as_curve(curve, y, sigma_y)
    if np.any(curve.x <= 0) or np.any(curve.y < 0):
        raise ValueError("power-law fit needs x > 0 and y >= 0")
    use = curve.y > 0
    if use.sum() < 3:
        raise InsufficientDataError("power-law fit needs at least 3 points with y > 0")
    lx, ly = np.log(curve.x[use]), np.log(curve.y[use])
    p, logk = np.polyfit(lx, ly, 1)
    params = {"k": float(np.exp(logk)), "p": float(p)}
    resid = ly - (logk + p * lx)
    return FitResult("power_law", params, None, float(np.sqrt(np.mean(resid ** 2))),
                     True, 1, int(use.sum()), {"excluded": int((~use).sum())})
