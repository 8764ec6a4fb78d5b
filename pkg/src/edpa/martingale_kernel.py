"""Martingale functions, the determinantal martingale and correlation kernels.

Atom indices ``k`` are zero-based throughout. Kernels are functions of
``(s, x; t, y)`` and need ``s > 0``: at ``s = 0`` the propagator from the
initial atoms is a point mass and the kernel is a distribution in ``x``.
"""
from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy import integrate, special

from .errors import AccuracyError, DomainError, UnsupportedError
from .process_core import (
    Configuration,
    ProcessParams,
    center_delta,
    equidistant,
    h_A,
    p_bm,
    sigma_modes,
    wrapped_kernel,
)
from .special_functions import ModularNome, theta1_prime0, theta_mu

AGREE_TOL = 1e-9  # successive Gauss-Hermite results
SERIES_TOL = 1e-18  # relative size of the last kept term
IMAG_TOL = 1e-8
MAX_POINTS = 6
_LOG_CUT = math.log(SERIES_TOL)
_HALF_WIDTH = math.sqrt(-2.0 * _LOG_CUT) + 1.0


@dataclass(frozen=True)
class SeriesBudget:
    n_max: int = 400
    l_max: int = 20000
    k_max: int = 400
    gh_nodes: int = 64
    gh_max: int = 1024
    floor_tol: float = 1e-10  # worst acceptable floor of an asymptotic series

    def __post_init__(self):
        if min(self.n_max, self.l_max, self.k_max, self.gh_nodes) < 1:
            raise DomainError("series budgets must be >= 1")


DEFAULT_BUDGET = SeriesBudget()


def initial_measure(atoms, r, delta=None):
    """Validated initial configuration: distinct atoms in [0, 2 pi r), centered."""
    atoms = tuple(float(a) for a in np.atleast_1d(atoms))
    L = 2.0 * math.pi * r
    if any(a < 0 or a >= L for a in atoms):
        raise DomainError("atoms must lie in [0, 2 pi r)")
    if len(set(atoms)) != len(atoms):
        raise DomainError("atoms must be pairwise distinct")
    if delta is None:
        delta = center_delta(atoms, r)
    elif abs(delta / (math.pi * r) - round(delta / (math.pi * r))) > 1e-12:
        raise DomainError("delta must be an integer multiple of pi r")
    config = Configuration(atoms, delta)
    if not 0.0 < config.center < L:
        raise DomainError("center delta + sum(atoms) must lie in (0, 2 pi r)")
    return config


def _is_equidistant(xi, params):
    ref = equidistant(params.N, params.r)
    return (
        len(xi.points) == params.N
        and np.allclose(xi.x, ref.x, rtol=0, atol=1e-14)
        and abs(xi.delta - ref.delta) < 1e-12
    )


def _check_time(t, params):
    if not 0.0 <= t <= params.t_star * (1.0 - 1e-6):
        raise DomainError("need 0 <= t < t_star (the series blow up at t_star)")


# ---------------------------------------------------------------------------
# phi and the martingale functions


def phi(xi, k, z, params, form="generic"):
    """Entire function that equals 1 at atom ``k`` and 0 at the other atoms.

    ``form='closed'`` uses the single-quotient expression valid for the
    equidistant start; near its removable zeros it falls back to the product.
    """
    N = len(xi.points)
    if not 0 <= k < N:
        raise DomainError(f"atom index {k} out of range")
    z = np.asarray(z, dtype=complex)
    if form == "generic":
        return _phi_generic(xi, k, z, params)
    if form != "closed":
        raise DomainError(f"unknown phi form {form!r}")
    if not _is_equidistant(xi, params):
        raise UnsupportedError("closed-form phi needs the equidistant start")
    return _phi_closed(k, z, params)


def _phi_generic(xi, k, z, params):
    nome = ModularNome(tau_im=params.tau_im(params.t_star))
    L = params.L
    u = xi.x
    num = np.asarray(theta_mu(1, (xi.center + z - u[k]) / L, nome), dtype=complex)
    den = complex(theta_mu(1, xi.center / L, nome))
    for ell in range(len(u)):
        if ell == k:
            continue
        num = num * theta_mu(1, (z - u[ell]) / L, nome)
        den *= complex(theta_mu(1, (u[k] - u[ell]) / L, nome))
    return (num / den)[()]


def _phi_closed(k, z, params):
    N = params.N
    T = params.tau_im(params.t_star)
    nome, big = ModularNome(tau_im=T), ModularNome(tau_im=N * T)
    w = z / params.L - k / N
    near = np.abs(w - np.round(w)) < 1e-6
    ws = np.where(near, 0.25, w)
    num = theta_mu(1, N * ws, big) * theta_mu(1, ws + 0.5, nome) * theta1_prime0(nome)
    den = N * theta1_prime0(big) * theta_mu(1, ws, nome) * theta_mu(1, 0.5, nome)
    out = np.asarray(num / den, dtype=complex)
    if np.any(near):
        xi = equidistant(N, params.r)
        out = np.where(near, _phi_generic(xi, k, z, params), out)
    return out[()]


@lru_cache(maxsize=16)
def _hermite(n):
    return special.roots_hermite(n)


def _gaussian_average(func, t, t_star, budget):
    """E[func(W)] for W ~ N(0, t) when func grows like exp(W**2 / 2 t_star).

    Nodes are laid out for variance t t_star/(t_star - t) so the weighted
    integrand stays bounded.
    """
    var = t * t_star / (t_star - t)
    n, prev, err = budget.gh_nodes, None, math.inf
    while n <= budget.gh_max:
        nodes, weights = _hermite(n)
        w = math.sqrt(2.0 * var) * nodes
        # func overflows near exp(w**2/2 t_star) ~ 1e280; such nodes must carry no weight
        live = (weights > 0) & (w * w / (2.0 * t_star) < 640.0)
        if np.any(weights[~live] > 1e-30):
            raise AccuracyError("Gaussian average too close to t_star", bound=float(np.max(weights[~live])))
        w = w[live]
        wts = weights[live] / math.sqrt(math.pi) * math.sqrt(var / t) * np.exp(-w * w / (2.0 * t_star))
        val = np.sum(wts * func(w), axis=-1)
        if prev is not None:
            err = np.max(np.abs(val - prev))
            if err <= AGREE_TOL * max(1.0, float(np.max(np.abs(val)))):
                return val
        prev, n = val, 2 * n
    raise AccuracyError("Gauss-Hermite did not settle within the node budget", bound=float(err))


def mart_M(xi, k, t, x, params, method="quadrature", budget=DEFAULT_BUDGET):
    """Gaussian average of ``phi(x + i w)`` over ``w ~ N(0, t)``.

    ``method='series'`` sums the explicit Fourier expansion (equidistant
    start only). The returned value is real for real ``x``.
    """
    _check_time(t, params)
    x = np.asarray(x, dtype=float)
    if method == "series":
        if not _is_equidistant(xi, params):
            raise UnsupportedError("series martingale needs the equidistant start")
        return _mart_series(k, t, x, params, budget)
    if method != "quadrature":
        raise DomainError(f"unknown method {method!r}")
    if t == 0:
        val = phi(xi, k, x, params)
    else:
        xx = np.expand_dims(x, -1)
        val = _gaussian_average(lambda w: phi(xi, k, xx + 1j * w, params), t, params.t_star, budget)
    return _real_part(val)


def _real_part(val):
    val = np.asarray(val)
    if np.iscomplexobj(val):
        scale = max(1.0, float(np.max(np.abs(val))))
        if np.max(np.abs(val.imag)) > 1e-10 * scale:
            raise AccuracyError("expected a real value", bound=float(np.max(np.abs(val.imag))))
        val = val.real
    return val[()]


def _prefactor_nome(tau_im):
    """Nome of the 1/theta_1'(0) prefactor; refuses horizons where it overflows."""
    if math.pi * tau_im / 4.0 > 600.0:
        raise DomainError("horizon too long for the series; use the horizon-free kernel")
    return ModularNome(tau_im=tau_im)


def _lambert_log_env(x, offset, lin, scale, t, ts):
    """Log of the largest Lambert-type term at frequency shift ``x``.

    The competing index runs over the lattice ``a = offset (2n - 1)``; the
    result is relative to the leading ``a = offset`` term of the main sum.
    """
    a0 = x * t / (ts - t)
    n0 = math.floor(a0 / (2.0 * offset) + 0.5)
    best = -math.inf
    for n in (n0, n0 + 1):
        a = offset * (2 * n - 1)
        best = max(best, -a * a * (ts - t) + 2.0 * a * x * t)
    return scale * (best + x * x * t - lin * x + offset * offset * (ts - t))


def _lambert_stop(offset, lin, scale, t, ts, step, limit, budget):
    """Where to stop the sum (or integral) over the Lambert index.

    It is asymptotic once ``t > 0``: terms shrink until the turning point
    ``lin (ts - t)/(2 t ts)`` and grow afterwards. The cut is at
    ``SERIES_TOL`` or at the turning point, whichever comes first.
    """
    turn = math.inf if t == 0 else lin * (ts - t) / (2.0 * t * ts)
    x = step
    while x <= limit:
        env = _lambert_log_env(x, offset, lin, scale, t, ts)
        if env < _LOG_CUT:
            return x
        if x + step > turn:
            if math.exp(env) > budget.floor_tol:
                raise AccuracyError("Lambert-type sum cannot reach the tolerance", bound=math.exp(env))
            return x
        x += step
    raise AccuracyError("Lambert-type sum exceeds the budget", bound=float(limit))


def _ell_range(N, r, t, t_star, budget):
    """Last index kept in the sums over ell."""
    stop = _lambert_stop(N / 2.0, 2.0 * N * t_star, 1.0 / (2.0 * r * r), t, t_star, 1, budget.l_max, budget)
    return int(stop)


def _n_window(center, scale, N, budget):
    """Integers n with a = (n - 1/2) N inside center +- half-width."""
    half = _HALF_WIDTH / math.sqrt(scale)
    lo = math.floor((center - half) / N + 0.5) - 1
    hi = math.ceil((center + half) / N + 0.5) + 1
    if hi - lo > budget.n_max:
        raise AccuracyError("n-window exceeds the budget", bound=float(hi - lo))
    return np.arange(lo, hi + 1)


def _mart_series(k, t, x, params, budget):
    N, r, ts = params.N, params.r, params.t_star
    rr = 2.0 * r * r
    phase = np.expand_dims(x / (2.0 * r) - k * math.pi / N, -1)
    pref = 2.0 * math.pi / (N * theta1_prime0(_prefactor_nome(N * N * ts / (2.0 * math.pi * r * r))))

    n = np.arange(1, budget.n_max + 1)
    a = (n - 0.5) * N
    sign = np.where(n % 2 == 1, 1.0, -1.0)
    keep = (a * a - a[0] * a[0]) * (ts - t) / rr <= -_LOG_CUT
    n, a, sign = n[keep], a[keep], sign[keep]

    first = np.sum(sign * np.exp(-a * a * (ts - t) / rr) * np.cos(2.0 * a * phase), axis=-1)

    # finite sums over |sigma| <= a - 1, nested in n
    modes = sigma_modes(N - 1, a[-1] - 1.0)
    coef = np.array([np.sum(sign * np.exp(-a * a * ts / rr) * (a - 1.0 >= abs(m) - 1e-12)) for m in modes])
    second = np.sum(coef * np.exp(modes**2 * t / rr) * np.exp(2j * modes * phase), axis=-1)

    ell_max = _ell_range(N, r, t, ts, budget)
    ell = np.arange(1, ell_max + 1, dtype=float)[:, None]
    nn = _n_window(ell_max * t / (ts - t), (ts - t) / rr, N, budget)[None, :]
    aa = (nn - 0.5) * N
    log_q = -ell * N * ts / (r * r)
    expo = (-aa * aa * (ts - t) + ell * ell * t + 2.0 * aa * ell * t) / rr + log_q - np.log1p(np.exp(log_q))
    weight = np.where(nn % 2 == 1, 2.0, -2.0) * np.exp(expo)
    freq = 2.0 * (aa + ell)
    third = np.sum(weight * np.cos(freq * np.expand_dims(phase, -1)), axis=(-2, -1))

    return _real_part(pref * (first + second + third))


def det_martingale(xi, t, w, params, budget=DEFAULT_BUDGET):
    """det over (j, k) of ``mart_M(xi, k, t, w_j)``."""
    w = np.asarray(w, dtype=float)
    N = len(xi.points)
    if w.shape != (N,):
        raise DomainError(f"need {N} positions")
    mat = np.column_stack([mart_M(xi, k, t, w, params, budget=budget) for k in range(N)])
    return float(np.linalg.det(mat))


def det_martingale_h_ratio(xi, t, w, params):
    """h(t_star - t, w)/h(t_star, u), the closed value of the determinantal martingale."""
    num = h_A(params, params.t_star - t, Configuration(tuple(w), xi.delta))
    return num / h_A(params, params.t_star, xi)


# ---------------------------------------------------------------------------
# finite-N kernels


def _check_kernel_times(s, t, params):
    if not s > 0:
        raise DomainError("kernel needs s > 0")
    _check_time(s, params)
    _check_time(t, params)


def _propagator_term(params, s, x, t, y):
    if s > t:
        return wrapped_kernel(params, s - t, y, x)
    return 0.0


def kernel_K(params, s, x, t, y, form="martingale_sum", budget=DEFAULT_BUDGET, m_method="quadrature"):
    """Correlation kernel for the equidistant start, complex-valued."""
    _check_kernel_times(s, t, params)
    if form == "martingale_sum":
        xi = equidistant(params.N, params.r)
        g = sum(
            wrapped_kernel(params, s, xi.x[k], x) * mart_M(xi, k, t, y, params, method=m_method, budget=budget)
            for k in range(params.N)
        )
        return complex(g - _propagator_term(params, s, x, t, y))
    if form == "series":
        return complex(_g_series(params, s, x, t, y, budget) - _propagator_term(params, s, x, t, y))
    raise DomainError(f"unknown kernel form {form!r}")


def alternating_cosine(w, tau_im, budget=DEFAULT_BUDGET):
    """``2 sum_{n>=1} (-1)**(n-1) q**((n-1/2)**2) cos((2n-1) pi w)`` with ``q = exp(-pi tau_im)``.

    Same moduli as theta_2 but with alternating signs; it agrees with theta_2
    up to ``O(q**(9/4))``.
    """
    n_top = int(math.ceil(math.sqrt(-_LOG_CUT / (math.pi * tau_im)) + 1.5))
    if n_top > budget.n_max:
        raise AccuracyError("alternating cosine series exceeds the budget", bound=float(n_top))
    n = np.arange(1, n_top + 1)
    terms = np.where(n % 2 == 1, 2.0, -2.0) * np.exp(-math.pi * tau_im * (n - 0.5) ** 2)
    return np.sum(terms * np.cos(np.multiply.outer(w, (2 * n - 1) * math.pi)), axis=-1)[()]


def g_first_term_theta2(params, s, x, t, y, budget=DEFAULT_BUDGET):
    """First term of the kernel series with theta_2 in both variables (k-shift form).

    Kept to show the gap against the alternating cosine version.
    """
    N, r, ts = params.N, params.r, params.t_star
    rr = 2.0 * r * r
    tpi = 2.0 * math.pi * r * r
    kk = int(math.ceil(math.sqrt(-2.0 * _LOG_CUT * rr * (ts - t + s) / (N * N * s * (ts - t))))) + 1
    if kk > budget.k_max:
        raise AccuracyError("k-sum exceeds the budget", bound=float(kk))
    k = np.arange(-kk, kk + 1)
    nome2 = ModularNome(tau_im=N * N * (ts - t + s) / tpi)
    th2 = theta_mu(2, N * (y - x) / (2.0 * math.pi * r) - 1j * k * N * N * s / tpi, nome2)
    pref = 1.0 / (r * theta1_prime0(_prefactor_nome(N * N * ts / tpi)))
    return complex(pref * 0.5 * np.sum(np.exp(-k * k * N * N * s / rr + 1j * k * N * x / r) * th2))


def _g_series(params, s, x, t, y, budget):
    N, r, ts = params.N, params.r, params.t_star
    rr = 2.0 * r * r
    tpi = 2.0 * math.pi * r * r
    u = y - x
    pref = 1.0 / (r * theta1_prime0(_prefactor_nome(N * N * ts / tpi)))

    # theta_2 in x times the alternating cosine series in y
    th2 = theta_mu(2, N * x / (2.0 * math.pi * r), ModularNome(tau_im=N * N * s / tpi))
    first = 0.5 * th2 * alternating_cosine(N * y / (2.0 * math.pi * r), N * N * (ts - t) / tpi, budget)

    # finite mode sums weighted by theta_3
    n = np.arange(1, budget.n_max + 1)
    a = (n - 0.5) * N
    keep = (a * a - a[0] * a[0]) * (ts - t) / rr <= -_LOG_CUT
    a, sign = a[keep], np.where(n[keep] % 2 == 1, 1.0, -1.0)
    modes = sigma_modes(N - 1, a[-1] - 1.0)
    coef = np.array([np.sum(sign * np.exp(-a * a * ts / rr) * (a - 1.0 >= abs(m) - 1e-12)) for m in modes])
    th3 = theta_mu(3, N * x / (2.0 * math.pi * r) - 1j * N * modes * s / tpi, ModularNome(tau_im=N * N * s / tpi))
    second = np.sum(coef * np.exp(modes**2 * (t - s) / rr + 1j * modes * u / r) * th3)

    # Lambert-type triple sum over (k, ell, n)
    ell_max = _ell_range(N, r, t, ts, budget)
    ell = np.arange(1, ell_max + 1, dtype=float)[:, None, None]
    nn = _n_window(ell_max * t / (ts - t), (ts - t) / rr, N, budget)[None, :, None]
    aa = (nn - 0.5) * N
    b = aa + ell
    b_hi = float(np.max(np.abs(b)))
    kw = int(math.ceil(b_hi / N + _HALF_WIDTH * r / (N * math.sqrt(s)))) + 1
    if 2 * kw + 1 > budget.k_max:
        raise AccuracyError("k-window exceeds the budget", bound=float(2 * kw + 1))
    k = np.arange(-kw, kw + 1, dtype=float)[None, None, :]
    log_q = -ell * N * ts / (r * r)
    base = -k * k * N * N * s / rr - aa * aa * ts / rr + b * b * (t - s) / rr + log_q - np.log1p(np.exp(log_q))
    shift = b * k * N * s / (r * r)
    sign3 = np.where(nn % 2 == 1, 1.0, -1.0)
    phase = k * N * x / r
    both = np.exp(base + shift + 1j * (phase + b * u / r)) + np.exp(base - shift + 1j * (phase - b * u / r))
    third = np.sum(sign3 * both)

    return pref * (first + second + third)


def _a_modes(N):
    return sigma_modes(N - 1, (N - 2) / 2.0)


def kernel_K_homogeneous(N, r, s, x, t, y):
    """Kernel of the horizon-free limit, started from the equidistant configuration."""
    if not (s > 0 and t >= 0):
        raise DomainError("need s > 0 and t >= 0")
    rr = 2.0 * r * r
    L = 2.0 * math.pi * r
    u = y - x
    kk = int(math.ceil(_HALF_WIDTH * r / (N * math.sqrt(s)))) + 2
    k = np.arange(-kk, kk + 1, dtype=float)
    base = -k * k * N * N * s / rr + N * N * (t - s) / (4.0 * rr)
    shift = k * N * N * s / rr
    cosine = 0.5 * (np.exp(base + shift + 1j * (k * N * x / r + N * u / (2.0 * r))) + np.exp(base - shift + 1j * (k * N * x / r - N * u / (2.0 * r))))
    first = np.sum(cosine) / L
    modes = _a_modes(N)
    tpi = 2.0 * math.pi * r * r
    th3 = theta_mu(3, N * x / L - 1j * N * modes * s / tpi, ModularNome(tau_im=N * N * s / tpi)) if len(modes) else 0.0
    second = np.sum(np.exp(modes**2 * (t - s) / rr + 1j * modes * u / r) * th3) / L
    prop = wrapped_kernel(ProcessParams(N, r, 1.0), s - t, y, x) if s > t else 0.0
    return complex(first + second - prop)


def cosine_term(u, N, r):
    return math.cos(N * u / (2.0 * r)) / (2.0 * math.pi * r)


def _eq_branch(dt, dx, N, r, branch):
    rr = 2.0 * r * r
    L = 2.0 * math.pi * r
    extra = math.exp(N * N * dt / (4.0 * rr)) * cosine_term(dx, N, r)
    if branch == "before":
        modes = _a_modes(N)
        return float(np.sum(np.exp(modes**2 * dt / rr) * np.cos(modes * dx / r))) / L + extra
    if branch == "equal":
        half = dx / (2.0 * r)
        if abs(math.sin(half)) < 1e-8:
            ratio = (N - 1) * math.cos((N - 1) * half) / math.cos(half)
        else:
            ratio = math.sin((N - 1) * half) / math.sin(half)
        return ratio / L + extra
    # after: the modes outside the finite block, Gaussian in |sigma|
    bound = (N - 2) / 2.0 + math.sqrt(-2.0 * _LOG_CUT * rr / -dt) + 2.0
    modes = sigma_modes(N - 1, bound)
    modes = modes[np.abs(modes) > (N - 2) / 2.0 + 1e-12]
    return -float(np.sum(np.exp(modes**2 * dt / rr) * np.cos(modes * dx / r))) / L + extra


def kernel_K_equilibrium(dt, dx, N, r):
    """Equilibrium kernel as a function of ``dt = t - s`` and ``dx = y - x``."""
    if dt > 0:
        return _eq_branch(dt, dx, N, r, "before")
    if dt == 0:
        return _eq_branch(dt, dx, N, r, "equal")
    return _eq_branch(dt, dx, N, r, "after")


def long_time_limit(dt, x, y, N, r):
    """Long-time limit of the homogeneous kernel, including the term in x + y."""
    rr = 2.0 * r * r
    return kernel_K_equilibrium(dt, y - x, N, r) + math.exp(N * N * dt / (4.0 * rr)) * cosine_term(x + y, N, r)


RELAX_TIMES = ((0.5, 0.5), (0.5, 1.0), (1.0, 0.5))
RELAX_POINTS = ((0.3, 1.1), (1.7, 0.4), (2.5, 4.2))


def relaxation_distance(T, N, r, reference="equilibrium"):
    """Max over a fixed 3x3 grid of |K_hom(s+T, x; t+T, y) - K_eq|.

    ``reference='equilibrium'`` compares against the translation-invariant
    equilibrium kernel; ``'standing_wave'`` adds the standing x + y term.
    """
    worst = 0.0
    for s, t in RELAX_TIMES:
        for px, py in RELAX_POINTS:
            x, y = px * r, py * r
            lhs = kernel_K_homogeneous(N, r, s + T, x, t + T, y)
            if reference == "equilibrium":
                rhs = kernel_K_equilibrium(t - s, y - x, N, r)
            elif reference == "standing_wave":
                rhs = long_time_limit(t - s, x, y, N, r)
            else:
                raise DomainError(f"unknown reference {reference!r}")
            worst = max(worst, abs(lhs - rhs))
    return worst


# ---------------------------------------------------------------------------
# infinite-particle kernels


def extended_sine(dt, dx, rho):
    """Extended sine kernel with density ``rho``; ``dt = t - s``, ``dx = y - x``."""
    if not rho > 0:
        raise DomainError("density must be positive")
    if dt == 0:
        return rho if dx == 0 else math.sin(math.pi * rho * dx) / (math.pi * dx)

    def f(v):
        return math.exp(math.pi**2 * v * v * dt / 2.0) * math.cos(math.pi * v * dx)

    if dt > 0:
        return integrate.quad(f, 0.0, rho, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    return -integrate.quad(f, rho, math.inf, epsabs=1e-14, epsrel=1e-13, limit=400)[0]


def _quad_complex(func, a, b, points=None):
    val, err = integrate.quad_vec(
        lambda v: _split(func(v)), a, b, epsabs=1e-13, epsrel=1e-12, points=points, limit=400
    )
    return complex(val[0], val[1]), float(np.max(err))


def _split(z):
    return np.array([np.real(z), np.imag(z)], dtype=float)


def _theta3_band(rho, x, s, u, t, vmax):
    """Integral over |v| <= vmax of the theta_3 weighted Gaussian modes."""
    nome = ModularNome(tau_im=2.0 * math.pi * rho * rho * s)

    def f(v):
        th = complex(theta_mu(3, rho * x - 1j * math.pi * v * rho * s, nome))
        return np.exp(math.pi**2 * v * v * (t - s) / 2.0 + 1j * math.pi * v * u) * th

    # theta_3 develops a boundary layer of width ~ 1/(2 pi^2 rho s) at |v| = vmax
    layer = 1.0 / (2.0 * math.pi**2 * rho * s)
    pts = [p for p in (-vmax + layer, -vmax + 10 * layer, vmax - 10 * layer, vmax - layer) if -vmax < p < vmax]
    return _quad_complex(f, -vmax, vmax, points=sorted(pts) or None)[0]


def kernel_K_infinite(rho, s, x, t, y, t_star=None, budget=DEFAULT_BUDGET):
    """Infinite-particle kernel at density ``rho``; ``t_star=None`` drops the horizon."""
    if not rho > 0:
        raise DomainError("density must be positive")
    if not (s > 0 and t >= 0):
        raise DomainError("need s > 0 and t >= 0")
    u = y - x
    prop = p_bm(s - t, y, x) if s > t else 0.0
    if t_star is None:
        return complex(0.5 * _theta3_band(rho, x, s, u, t, rho) - prop)
    if not (s < t_star and t < t_star * (1.0 - 1e-6)):
        raise DomainError("times must lie in [0, t_star)")
    return complex(_g_infinite(rho, s, x, t, y, t_star, budget) - prop)


def _g_infinite(rho, s, x, t, y, ts, budget):
    u = y - x
    pi2 = math.pi**2
    pref = 2.0 * math.pi / theta1_prime0(_prefactor_nome(2.0 * math.pi * rho * rho * ts))

    # finite bands |v| <= (2n - 1) rho
    first = 0.0
    for n in range(1, budget.n_max + 1):
        a = (2 * n - 1) * rho
        if 2.0 * pi2 * ((n - 0.5) ** 2 - 0.25) * rho * rho * (ts - t) > -_LOG_CUT:
            break
        weight = (-1) ** (n - 1) * math.exp(-2.0 * pi2 * (n - 0.5) ** 2 * rho * rho * ts)
        first += weight * 0.5 * _theta3_band(rho, x, s, u, t, a)

    # Lambert-type integral over v >= 0; asymptotic for t > 0
    dv = 0.01 * rho
    v_end = _lambert_stop(rho, 4.0 * rho * ts, 0.5 * pi2, t, ts, dv, budget.l_max * dv, budget)

    half = _HALF_WIDTH / (math.pi * rho * math.sqrt(ts - t))
    a_hi = v_end * t / (ts - t) + half
    n = np.arange(math.floor(-half / (2 * rho) + 0.5) - 1, math.ceil(a_hi / (2 * rho) + 0.5) + 2)
    if len(n) > budget.n_max:
        raise AccuracyError("n-window exceeds the budget", bound=float(len(n)))
    a = (2 * n - 1) * rho
    sign = np.where(n % 2 == 1, 1.0, -1.0)
    kw = int(math.ceil((abs(a_hi) + v_end) / (2.0 * rho) + _HALF_WIDTH / (2.0 * math.pi * rho * math.sqrt(s)))) + 1
    if 2 * kw + 1 > budget.k_max:
        raise AccuracyError("k-window exceeds the budget", bound=float(2 * kw + 1))
    k = np.arange(-kw, kw + 1, dtype=float)[:, None]

    def f(v):
        b = a + v
        log_q = -2.0 * pi2 * v * rho * ts
        base = (
            -2.0 * pi2 * k * k * rho * rho * s
            - 2.0 * pi2 * (n - 0.5) ** 2 * rho * rho * ts
            + pi2 * b * b * (t - s) / 2.0
            + log_q
            - math.log1p(math.exp(log_q))
        )
        shift = 2.0 * pi2 * b * k * rho * s
        phase = 2.0 * math.pi * k * rho * x
        both = np.exp(base + shift + 1j * (phase + math.pi * b * u)) + np.exp(base - shift + 1j * (phase - math.pi * b * u))
        return 0.5 * np.sum(sign * both)

    third = _quad_complex(f, 0.0, v_end)[0]
    return pref * (first + third)


# ---------------------------------------------------------------------------
# correlation functions


def kernel_function(choice, **kw):
    """Callable ``K(s, x, t, y)`` for one of the kernel families."""
    if choice == "finite":
        params, budget = kw["params"], kw.get("budget", DEFAULT_BUDGET)
        form = kw.get("form", "series")
        return lambda s, x, t, y: kernel_K(params, s, x, t, y, form=form, budget=budget)
    if choice == "homogeneous":
        N, r = kw["N"], kw["r"]
        return lambda s, x, t, y: kernel_K_homogeneous(N, r, s, x, t, y)
    if choice == "equilibrium":
        N, r = kw["N"], kw["r"]
        return lambda s, x, t, y: kernel_K_equilibrium(t - s, y - x, N, r)
    if choice == "infinite":
        rho, t_star = kw["rho"], kw.get("t_star")
        return lambda s, x, t, y: kernel_K_infinite(rho, s, x, t, y, t_star=t_star)
    raise DomainError(f"unknown kernel choice {choice!r}")


def correlation_rho(points, kernel):
    """Spatio-temporal correlation function: det of the kernel matrix.

    ``points`` is a sequence of ``(time, position)`` pairs.
    """
    points = [(float(a), float(b)) for a, b in points]
    if not points:
        return 1.0
    if len(points) > MAX_POINTS:
        raise DomainError(f"at most {MAX_POINTS} points")
    mat = np.array([[complex(kernel(s, x, t, y)) for (t, y) in points] for (s, x) in points])
    val = complex(np.linalg.det(mat))
    if abs(val.imag) > IMAG_TOL * max(1.0, abs(val.real)):
        raise AccuracyError("correlation determinant is not real", bound=abs(val.imag))
    return val.real
