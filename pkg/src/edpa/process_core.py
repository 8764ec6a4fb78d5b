"""Circle geometry, wrapped heat kernels and the N-particle transition density.

Positions live on [0, 2*pi*r). The elliptic nome attached to a time span
``s`` for an N-particle system is ``tau = i*N*s/(2*pi*r**2)``.
"""
from dataclasses import dataclass
import math

import numpy as np

from .errors import DomainError, UnsupportedError
from .special_functions import ModularNome, dedekind_eta_tau, theta_mu

SQRT_2PI = math.sqrt(2.0 * math.pi)
_GAUSS_CUT = 40.0  # exp(-40) ~ 4e-18


@dataclass(frozen=True)
class ProcessParams:
    N: int
    r: float
    t_star: float

    def __post_init__(self):
        if self.N < 1 or not self.r > 0 or not self.t_star > 0:
            raise DomainError("need N >= 1, r > 0 and t_star > 0")

    @property
    def L(self):
        return 2.0 * math.pi * self.r

    def tau_im(self, s):
        """Im tau of the nome for time span ``s``."""
        return self.N * s / (2.0 * math.pi * self.r**2)


@dataclass(frozen=True)
class Configuration:
    """Ordered positions on the circle plus the center shift ``delta``."""

    points: tuple
    delta: float = 0.0

    @property
    def x(self):
        return np.asarray(self.points, dtype=float)

    @property
    def center(self):
        return self.delta + float(np.sum(self.x))

    def in_alcove(self, r):
        x = self.x
        L = 2.0 * math.pi * r
        return bool(np.all(np.diff(x) > 0) and x[0] >= 0 and x[-1] < L and 0.0 < self.center < L)


def equidistant(N, r):
    """``v_j = 2 pi r (j-1)/N`` with ``delta = -pi r (N-2)``, center ``pi r``."""
    points = tuple(2.0 * math.pi * r * np.arange(N) / N)
    return Configuration(points, -math.pi * r * (N - 2))


def center_delta(points, r):
    """The delta in pi*r*Z placing ``delta + sum(points)`` in [0, pi*r)."""
    return -math.pi * r * math.floor(float(np.sum(points)) / (math.pi * r))


def as_configuration(x, r, delta=None):
    if isinstance(x, Configuration):
        return x
    x = tuple(float(v) for v in np.atleast_1d(x))
    return Configuration(x, center_delta(x, r) if delta is None else delta)


def sigma(M, m):
    """Mode label: ``m`` for ``M`` odd, ``m - 1/2`` for ``M`` even."""
    if M < 1:
        raise DomainError("sigma needs M >= 1")
    m = np.asarray(m)
    return m if M % 2 else m - 0.5


def sigma_modes(M, bound, strict=False):
    """All mode labels with ``|sigma_M(m)| <= bound`` (``<`` if strict)."""
    lim = int(math.floor(abs(bound))) + 2
    s = sigma(M, np.arange(-lim, lim + 2)).astype(float)
    keep = np.abs(s) < bound if strict else np.abs(s) <= bound + 1e-12
    return s[keep]


def p_bm(t, y, x):
    t = np.asarray(t, dtype=float)
    d = np.asarray(y) - np.asarray(x)
    return np.exp(-d * d / (2.0 * t)) / (SQRT_2PI * np.sqrt(t))


def wrapped_kernel(params, t, x, y, method="auto"):
    """Wrapped heat kernel on the circle of radius ``params.r``.

    The windings carry sign ``(-1)**l`` when ``params.N`` is odd. ``method``
    is ``image_sum``, ``theta_form``, ``spectral`` or ``auto`` (images for
    ``t <= r**2``, modes otherwise).
    """
    t = float(t)
    if not t > 0:
        raise DomainError("wrapped kernel needs t > 0")
    r, L = params.r, params.L
    odd = params.N % 2 == 1
    d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    if method == "auto":
        method = "image_sum" if t <= r * r else "spectral"
    if method == "image_sum":
        m = np.round(d / L)
        d0 = d - m * L
        span = int(math.ceil(math.sqrt(2.0 * t * _GAUSS_CUT) / L)) + 1
        ell = np.arange(-span, span + 1)
        sign = (-1.0) ** ell if odd else np.ones(ell.shape)
        total = np.sum(sign * p_bm(t, np.expand_dims(d0, -1) + L * ell, 0.0), axis=-1)
        if odd:
            total = total * (1.0 - 2.0 * np.mod(m, 2.0))
        return total[()]
    if method == "theta_form":
        nome = ModularNome(tau_im=t / (2.0 * math.pi * r * r))
        return np.real(theta_mu(2 if odd else 3, d / L, nome)) / L
    if method == "spectral":
        bound = math.sqrt(2.0 * _GAUSS_CUT * r * r / t) + 1.0
        modes = sigma_modes(params.N - 1, bound)
        terms = np.exp(-(modes**2) * t / (2.0 * r * r)) * np.cos(np.multiply.outer(d, modes) / r)
        return (np.sum(terms, axis=-1) / L)[()]
    raise DomainError(f"unknown wrapped-kernel method {method!r}")


def absorbing_kernel(r, t, x, y):
    """Brownian kernel on [0, 2 pi r] killed at both ends (images or sine modes)."""
    t = float(t)
    if not t > 0:
        raise DomainError("absorbing kernel needs t > 0")
    L = 2.0 * math.pi * r
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if t <= L * L / 4.0:
        span = int(math.ceil(math.sqrt(2.0 * t * _GAUSS_CUT) / (2.0 * L))) + 1
        ell = 2.0 * L * np.arange(-span, span + 1)
        yy = np.expand_dims(y, -1)
        xx = np.expand_dims(x, -1)
        return np.sum(p_bm(t, yy + ell, xx) - p_bm(t, -yy + ell, xx), axis=-1)[()]
    n = np.arange(1, int(math.ceil(math.sqrt(2.0 * _GAUSS_CUT * L * L / (math.pi**2 * t)))) + 2)
    k = np.pi * n / L
    terms = np.sin(np.multiply.outer(x, k)) * np.sin(np.multiply.outer(y, k)) * np.exp(-k * k * t / 2.0)
    return (2.0 / L * np.sum(terms, axis=-1))[()]


def _theta1_products(params, s, x_config):
    """theta_1 of the center times theta_1 of all ordered gaps, nome tau(s)."""
    nome = ModularNome(tau_im=params.tau_im(s))
    x = x_config.x
    L = params.L
    out = float(np.real(theta_mu(1, x_config.center / L, nome)))
    gaps = (x[None, :] - x[:, None])[np.triu_indices(len(x), 1)] / L
    out *= float(np.prod(np.real(theta_mu(1, gaps, nome))))
    return out


def km_closed_form(params, t, y_config):
    """Closed-form Karlin-McGregor determinant from the equidistant start."""
    N, r = params.N, params.r
    log_pref, prod = dedekind_eta_tau(params.tau_im(t))
    expo = -(N - 1) * (N - 2) / 2
    pref = (math.sqrt(N) / params.L) ** N * math.exp(expo * log_pref) * prod**expo
    return pref * _theta1_products(params, t, y_config)


def km_determinant(params, t, y, form="determinant", x=None, with_flags=False):
    """Karlin-McGregor determinant ``det[p_wrapped(t, y_j | x_k)]``.

    ``x`` defaults to the equidistant start. ``form='closed'`` is only valid
    for that start.
    """
    N, r = params.N, params.r
    init = equidistant(N, r)
    start = init if x is None else as_configuration(x, r)
    y_config = as_configuration(y, r, delta=start.delta)
    flags = []
    if not y_config.in_alcove(r):
        flags.append("out-of-alcove")
    equi = np.allclose(start.x, init.x, rtol=0, atol=1e-14)
    if not equi:
        flags.append("unproven-representation")
    if form == "closed":
        if not equi:
            raise UnsupportedError("closed form needs the equidistant start")
        value = km_closed_form(params, t, y_config)
    elif form == "determinant":
        mat = wrapped_kernel(params, t, start.x[None, :], y_config.x[:, None])
        value = float(np.linalg.det(mat))
    else:
        raise DomainError(f"unknown form {form!r}")
    return (value, flags) if with_flags else value


def h_A(params, s_remaining, x):
    """Space-time harmonic function of the h-transform at remaining time ``s``."""
    N, r, t_star = params.N, params.r, params.t_star
    if not s_remaining > 0:
        raise DomainError("h_A needs s_remaining > 0")
    x_config = as_configuration(x, r)
    log_pref, prod = dedekind_eta_tau(params.tau_im(s_remaining))
    expo = -(N - 1) * (N - 2) / 2
    head = math.exp(-N * (N - 1) * (N - 2) * t_star / (48.0 * r * r) + expo * log_pref) * prod**expo
    return head * _theta1_products(params, s_remaining, x_config)


def transition_density(params, s, x, t, y):
    """N-particle transition density ``p(t, y | s, x)``."""
    if not (0 <= s < t < params.t_star):
        raise DomainError("need 0 <= s < t < t_star")
    x_config = as_configuration(x, params.r)
    y_config = as_configuration(y, params.r, delta=x_config.delta)
    q = km_determinant(params, t - s, y_config, x=x_config)
    return h_A(params, params.t_star - t, y_config) / h_A(params, params.t_star - s, x_config) * q


def single_particle_density(r, t_star, s, x, t, y):
    """Transition density of the one-particle elliptic BES(3) on (0, 2 pi r)."""
    L = 2.0 * math.pi * r
    if not (0 <= s < t < t_star):
        raise DomainError("need 0 <= s < t < t_star")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any((x <= 0) | (x >= L)) or np.any((y <= 0) | (y >= L)):
        raise DomainError("positions must lie in (0, 2 pi r)")
    num = np.real(theta_mu(1, y / L, ModularNome(tau_im=(t_star - t) / (2 * math.pi * r * r))))
    den = np.real(theta_mu(1, x / L, ModularNome(tau_im=(t_star - s) / (2 * math.pi * r * r))))
    return absorbing_kernel(r, t - s, x, y) * num / den
