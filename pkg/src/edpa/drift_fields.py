"""Drift fields of the elliptic noncolliding system and their degenerations.

The elliptic drift is the rescaled logarithmic derivative of theta_1,

    A(s, x) = (1/alpha) * theta_1'(x/alpha; tau) / theta_1(x/alpha; tau),
    tau = 2*pi*i*N*s / alpha**2,

with ``s = t* - t`` the time remaining. Three routes are provided:
``theta_logderiv`` (theta lattice sums), ``zeta_centered`` (Weierstrass zeta
minus its linear part, with zeta expanded on the swapped period basis) and
``fourier`` (cot plus Lambert-weighted sine series, the default).
"""
from dataclasses import dataclass
import math

import numpy as np

from .errors import DomainError, PoleError
from .special_functions import (
    HalfPeriods,
    ModularNome,
    eta1,
    theta_mu,
    theta1_logderiv_real,
    weierstrass_zeta,
)

METHODS = ("fourier", "theta_logderiv", "zeta_centered")


@dataclass(frozen=True)
class DriftParams:
    N: int
    alpha: float
    s_remaining: float

    def __post_init__(self):
        if self.N < 1 or not self.alpha > 0 or not self.s_remaining > 0:
            raise DomainError("drift needs N >= 1, alpha > 0 and s_remaining > 0")

    @property
    def tau_im(self):
        return 2.0 * math.pi * self.N * self.s_remaining / self.alpha**2

    @property
    def periods(self):
        return HalfPeriods(self.alpha / 2.0, 1j * math.pi * self.N * self.s_remaining / self.alpha)


def _check_poles(x, period, guard=1e-12):
    x = np.asarray(x)
    nearest = np.round(x.real / period) * period
    if np.any(np.abs(x - nearest) < guard * period):
        bad = nearest[np.abs(x - nearest) < guard * period]
        raise PoleError(f"drift pole at x = {bad.flat[0]!r}", location=bad.flat[0])


def drift_A(params, x, method="fourier"):
    """Elliptic drift ``A_N^alpha(s, x)``; real for real ``x``."""
    if method not in METHODS:
        raise DomainError(f"method must be one of {METHODS}")
    alpha = params.alpha
    x = np.asarray(x, dtype=complex if np.iscomplexobj(x) else float)
    _check_poles(x, alpha)
    if method == "theta_logderiv":
        if np.iscomplexobj(x):
            nome = ModularNome(tau_im=params.tau_im)
            v = x / alpha
            return theta_mu(1, v, nome, 1) / theta_mu(1, v, nome) / alpha
        return theta1_logderiv_real(x / alpha, params.tau_im) / alpha
    if method == "zeta_centered":
        # zeta on the swapped basis (omega3, -omega1) converges for |x| < alpha
        periods = params.periods
        red = x - np.round(x.real / alpha) * alpha
        swapped = HalfPeriods(periods.omega3, -periods.omega1)
        val = weierstrass_zeta(red, swapped) - eta1(periods) * red / periods.omega1
        return np.real_if_close(val)[()] if not np.iscomplexobj(x) else val
    return _drift_fourier(x, alpha, params.tau_im)


def _drift_fourier(x, alpha, tau_im):
    decay = 2.0 * math.pi * tau_im
    growth = 2.0 * math.pi * float(np.max(np.abs(x.imag))) / alpha if np.iscomplexobj(x) else 0.0
    nterms = min(int(math.ceil(45.0 / (decay - growth))) + 8, 2_000_000)
    n = np.arange(1, nterms + 1)
    qn = np.exp(-decay * n)
    coef = qn / (1.0 - qn)
    arg = 2.0 * np.pi * np.multiply.outer(x, n) / alpha
    series = np.sum(coef * np.sin(arg), axis=-1)
    return (np.pi / alpha) / np.tan(np.pi * x / alpha) + (4.0 * np.pi / alpha) * series


def drift_trig(r, x):
    """``(1/2r) cot(x/2r)``, the long-horizon limit of the elliptic drift."""
    _check_poles(x, 2.0 * math.pi * r)
    return 0.5 / r / np.tan(np.asarray(x) / (2.0 * r))


def drift_hyper(N, a, x):
    """``(1/2Na) coth(x/2Na)``, the hyperbolic scaling limit."""
    x = np.asarray(x, dtype=float)
    if np.any(x == 0):
        raise PoleError("drift_hyper pole at 0", location=0.0)
    c = 2.0 * N * a
    return 1.0 / (c * np.tanh(x / c))


def drift_rational(x):
    """``1/x``, the Dyson-model pair drift."""
    x = np.asarray(x, dtype=float)
    if np.any(x == 0):
        raise PoleError("drift_rational pole at 0", location=0.0)
    return 1.0 / x
