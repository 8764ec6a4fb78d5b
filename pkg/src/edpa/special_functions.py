"""Jacobi theta functions and related elliptic special functions.

Conventions: ``z = exp(i*pi*v)`` and nome ``q = exp(i*pi*tau)`` with ``tau``
purely imaginary, ``tau = i*T`` and ``T = ln(1/q)/pi > 0``.

All four thetas share one lattice-sum form

    theta(v) = c * sum_{k in Z + a} exp(-pi*T*k**2 + 2*pi*i*k*(v + b))

with ``(a, b, c)`` equal to ``(1/2, 1/2, -1)`` for theta_1, ``(1/2, 0, 1)``
for theta_2, ``(0, 0, 1)`` for theta_3 and ``(0, 1/2, 1)`` for theta_0.
For ``q > exp(-pi)`` the Poisson-dual form

    theta(v) = c * T**-0.5 * sum_m exp(2*pi*i*m*a) * exp(-pi*(v + b - m)**2 / T)

is used instead, so the working nome never exceeds ``exp(-pi)``.
"""
from dataclasses import dataclass
import math

import numpy as np

from ._accel import njit, use_numba
from .errors import AccuracyError, DomainError, PoleError

TOL = 1e-15
MAX_TERMS = 64
Q_SWITCH = math.exp(-math.pi)
REAL_TOL = 1e-13

_CHARACTERISTICS = {
    1: (0.5, 0.5, -1.0),
    2: (0.5, 0.0, 1.0),
    3: (0.0, 0.0, 1.0),
    0: (0.0, 0.5, 1.0),
}


@dataclass(frozen=True)
class ModularNome:
    """Real nome ``q`` in (0, 1) together with the truncation policy.

    Passing ``tau_im`` instead of ``q`` keeps full precision when ``q`` would
    underflow (very large ``Im tau``).
    """

    q: float = None
    tol: float = TOL
    max_terms: int = MAX_TERMS
    tau_im: float = None

    def __post_init__(self):
        if self.tau_im is None:
            if self.q is None or not (0.0 < self.q < 1.0):
                raise DomainError(f"nome must satisfy 0 < q < 1, got {self.q!r}")
            object.__setattr__(self, "tau_im", math.log(1.0 / self.q) / math.pi)
        else:
            if not (math.isfinite(self.tau_im) and self.tau_im > 0.0):
                raise DomainError(f"Im tau must be positive, got {self.tau_im!r}")
            object.__setattr__(self, "q", math.exp(-math.pi * self.tau_im))
        if not self.tol > 0.0 or self.max_terms < 8:
            raise DomainError("need tol > 0 and max_terms >= 8")

    @classmethod
    def from_tau(cls, tau_im, **kwargs):
        return cls(tau_im=float(tau_im), **kwargs)

    @property
    def tau(self):
        return 1j * self.tau_im

    def scaled(self, n):
        """Nome of ``n * tau``."""
        return ModularNome(tau_im=n * self.tau_im, tol=self.tol, max_terms=self.max_terms)


def as_nome(nome):
    if isinstance(nome, ModularNome):
        return nome
    return ModularNome(q=float(nome))


@dataclass(frozen=True)
class HalfPeriods:
    """Half periods ``omega1``, ``omega3`` with ``Im(omega3/omega1) > 0``."""

    omega1: complex
    omega3: complex

    def __post_init__(self):
        if self.omega1 == 0 or (self.omega3 / self.omega1).imag <= 0:
            raise DomainError("half periods need omega1 != 0 and Im(omega3/omega1) > 0")

    @property
    def tau(self):
        return self.omega3 / self.omega1

    @property
    def nome(self):
        return np.exp(1j * np.pi * self.tau)


def _realify(value, scalar):
    value = np.asarray(value)
    if np.iscomplexobj(value):
        mag = np.abs(value)
        if np.all(np.abs(value.imag) <= REAL_TOL * mag):
            value = value.real
    if scalar:
        return value[()]
    return value


def _check_finite(v):
    if not np.all(np.isfinite(v)):
        raise DomainError("non-finite theta argument")


def _gauss_deriv_coeffs(order, c):
    """Coefficients (ascending in u) of P with d^n/du^n exp(c u^2) = P(u) exp(c u^2)."""
    coeffs = np.array([1.0 + 0j])
    for _ in range(order):
        deriv = coeffs[1:] * np.arange(1, len(coeffs))
        nxt = np.zeros(len(coeffs) + 1, dtype=complex)
        nxt[1:] += 2.0 * c * coeffs
        nxt[: len(deriv)] += deriv
        coeffs = nxt
    return coeffs


def _lattice_sum(term, start, tol, max_terms):
    """Sum ``term(k)`` over ``k = start, start +- 1, ...`` elementwise.

    Stops once every newly added term is below ``tol`` times the running
    maximum term magnitude.
    """
    total = term(start)
    runmax = np.abs(total)
    for j in range(1, max_terms + 1):
        hi = term(start + j)
        lo = term(start - j)
        total = total + hi + lo
        newest = np.maximum(np.abs(hi), np.abs(lo))
        done = newest <= tol * np.maximum(runmax, np.abs(total))
        runmax = np.maximum(runmax, newest)
        if j >= 2 and np.all(done):
            return total
    bound = float(np.max(newest / np.maximum(runmax, 1e-300)))
    raise AccuracyError(f"theta series not converged in {max_terms} terms", bound=bound)


def _theta_core(mu, v, nome, deriv=0):
    a, b, c = _CHARACTERISTICS[mu]
    w = np.asarray(v, dtype=complex) + b
    T = nome.tau_im
    if T >= 1.0:
        # direct series, centred on the dominant term
        start = np.round(-w.imag / T - a) + a

        def term(k):
            out = np.exp(-np.pi * T * k * k + 2j * np.pi * k * w)
            if deriv:
                out = out * (2j * np.pi * k) ** deriv
            return out

        total = _lattice_sum(term, start, nome.tol, nome.max_terms)
        return c * total
    # imaginary transformation: Gaussian sum with nome exp(-pi/T)
    cg = -np.pi / T
    poly = _gauss_deriv_coeffs(deriv, cg) if deriv else None
    start = np.round(w.real)

    def term(m):
        u = w - m
        out = np.exp(cg * u * u + 2j * np.pi * m * a)
        if poly is not None:
            out = out * np.polynomial.polynomial.polyval(u, poly)
        return out

    total = _lattice_sum(term, start, nome.tol, nome.max_terms)
    return c * total / math.sqrt(T)


def theta_mu(mu, v, nome, deriv=0):
    """Jacobi theta function ``theta_mu(v; tau)`` for ``mu`` in {0, 1, 2, 3}.

    Parameters
    ----------
    mu : int
        Characteristic index.
    v : complex or array_like
        Argument in the ``z = exp(i*pi*v)`` convention.
    nome : ModularNome or float
        Nome ``q`` in (0, 1).
    deriv : int, optional
        Order of the derivative in ``v``.

    Returns
    -------
    complex or ndarray
        Real-typed when the imaginary part is negligible.
    """
    if mu not in _CHARACTERISTICS:
        raise DomainError(f"theta index must be in (0, 1, 2, 3), got {mu!r}")
    nome = as_nome(nome)
    scalar = np.ndim(v) == 0
    _check_finite(v)
    val = _theta_core(mu, v, nome, deriv)
    if not np.iscomplexobj(v):
        # real v and real nome: every theta_mu is real, including at its zeros
        val = np.real(val)
    return _realify(val, scalar)


def theta1(v, nome, deriv=0):
    """``theta_1(v; tau) = 2 sum_{n>=1} (-1)^(n-1) q^((n-1/2)^2) sin((2n-1) pi v)``."""
    return theta_mu(1, v, nome, deriv)


def theta1_dv(v, nome):
    """Derivative of ``theta_1`` in ``v``."""
    return theta_mu(1, v, nome, deriv=1)


def theta1_prime0(nome):
    """``theta_1'(0; tau)``."""
    return float(np.real(theta_mu(1, 0.0, nome, deriv=1)))


def euler_product(nome):
    """``q_0 = prod_{n>=1} (1 - q^(2n))``, modular-transformed for ``q`` near 1."""
    T = as_nome(nome).tau_im
    if T < 1.0:
        return (
            math.exp(math.pi * T / 12.0 - math.pi / (12.0 * T))
            / math.sqrt(T)
            * _euler_direct(1.0 / T)
        )
    return _euler_direct(T)


def _euler_direct(T):
    out = 1.0
    n = 1
    while True:
        x = math.exp(-2.0 * math.pi * T * n)
        out *= 1.0 - x
        if x < 1e-18:
            return out
        n += 1


def dedekind_eta(x):
    """Dedekind eta ``x^(1/24) prod_{n>=1} (1 - x^n)`` for real ``0 < x < 1``."""
    x = float(x)
    if not 0.0 < x < 1.0:
        raise DomainError(f"dedekind_eta needs 0 < x < 1, got {x!r}")
    T = -math.log(x) / (2.0 * math.pi)
    return x ** (1.0 / 24.0) * euler_product(ModularNome(tau_im=T))


def dedekind_eta_tau(tau_im):
    """Dedekind eta at ``x = exp(-2*pi*tau_im)``, safe when ``x`` underflows.

    Returns ``(log_prefactor, product)`` with eta = exp(log_prefactor) * product.
    """
    return -math.pi * tau_im / 12.0, euler_product(ModularNome(tau_im=tau_im))


def theta1_product(v, nome):
    """``theta_1`` from its infinite product (independent of the series route)."""
    q = as_nome(nome).q
    v = np.asarray(v, dtype=complex)
    c2 = np.cos(2.0 * np.pi * v)
    out = 2.0 * q**0.25 * np.sin(np.pi * v)
    j = 1
    while True:
        x = q ** (2 * j)
        out = out * (1.0 - x) * (1.0 - 2.0 * x * c2 + x * x)
        if x < 1e-18:
            break
        j += 1
    return _realify(out, out.ndim == 0)


def log_qpochhammer(a, q, terms=None):
    """Logarithm of ``(a; q)_inf`` (principal branch per factor)."""
    if not 0.0 < q < 1.0:
        raise DomainError(f"qpochhammer needs 0 < q < 1, got {q!r}")
    a = np.asarray(a, dtype=complex)
    if terms is None:
        amax = max(float(np.max(np.abs(a))), 1e-300)
        terms = int(math.ceil(math.log(1e-18 / amax) / math.log(q))) + 1
        terms = min(max(terms, 1), 2_000_000)
    flat = a.reshape(-1, 1)
    out = np.zeros(flat.shape[0], dtype=complex)
    chunk = 4096
    with np.errstate(divide="ignore"):
        for lo in range(0, terms, chunk):
            k = np.arange(lo, min(lo + chunk, terms))
            out += np.sum(np.log(1.0 - flat * q**k), axis=1)
    return out.reshape(a.shape)


def qpochhammer(a, q, terms=None):
    """Infinite q-Pochhammer symbol ``(a; q)_inf`` (vectorized in ``a``)."""
    a = np.asarray(a, dtype=complex)
    return _realify(np.exp(log_qpochhammer(a, q, terms)), a.ndim == 0)


def theta_E(s, p):
    """Multiplicative theta ``E(s; p) = (s; p)_inf (p/s; p)_inf``."""
    s = np.asarray(s, dtype=complex)
    if np.any(s == 0):
        raise DomainError("theta_E needs s != 0")
    return qpochhammer(s, p) * qpochhammer(p / s, p)


def _lambert_terms(qq, growth=0.0):
    """Number of terms for sums weighted by ``qq^n`` (``|qq| < 1``)."""
    decay = -math.log(max(abs(qq), 1e-300)) - growth
    if decay <= 0:
        raise AccuracyError("q-series diverges at this argument")
    return min(int(math.ceil(45.0 / decay)) + 8, 2_000_000)


def _lambert_trig(q2, phase, growth, kind, power):
    """``sum_n n^power q2^n/(1-q2^n) trig(n*phase)`` evaluated in log form.

    Combining the exponents keeps terms finite when ``q2^n`` underflows while
    ``trig`` of a complex phase overflows.
    """
    phase = np.asarray(phase, dtype=complex)
    n = np.arange(1, _lambert_terms(q2, growth) + 1)
    lq = n * np.log(complex(q2)) if q2 != 0 else np.full(n.shape, -np.inf + 0j)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        logc = lq - np.log1p(-np.exp(lq)) + power * np.log(n)
        ph = 1j * np.multiply.outer(phase, n)
        plus = np.exp(logc + ph)
        minus = np.exp(logc - ph)
    plus = np.where(np.isfinite(plus), plus, 0.0)
    minus = np.where(np.isfinite(minus), minus, 0.0)
    if kind == "sin":
        return np.sum(plus - minus, axis=-1) / 2j
    return np.sum(plus + minus, axis=-1) / 2.0


def eta1(periods):
    """Quasi-period ``eta_1 = zeta(omega_1)``."""
    w1 = periods.omega1
    q2 = periods.nome**2
    n = np.arange(1, _lambert_terms(q2) + 1)
    qn = q2**n
    val = (np.pi**2 / w1) * (1.0 / 12.0 - 2.0 * np.sum(n * qn / (1.0 - qn)))
    return _realify(val, True)


def _pole_guard(x, periods):
    frac = np.asarray(x / (2.0 * periods.omega1))
    dist = np.abs(frac - np.round(frac.real))
    if np.any(dist < 1e-12):
        raise PoleError("argument on the period lattice", location=np.round(frac.real) * 2 * periods.omega1)


def weierstrass_zeta_centered(x, periods):
    """``zeta(x) - eta_1 x / omega_1`` via its cot-plus-sine series."""
    _pole_guard(x, periods)
    w1 = periods.omega1
    x = np.asarray(x)
    scalar = x.ndim == 0
    q2 = periods.nome**2
    growth = np.pi * float(np.max(np.abs((x / w1).imag)))
    series = _lambert_trig(q2, np.pi * x / w1, growth, "sin", power=0)
    val = (np.pi / (2 * w1)) / np.tan(np.pi * x / (2 * w1)) + (2 * np.pi / w1) * series
    return _realify(val, scalar)


def weierstrass_zeta(x, periods):
    return weierstrass_zeta_centered(x, periods) + eta1(periods) * np.asarray(x) / periods.omega1


def weierstrass_p(x, periods):
    """Weierstrass ``p(x) = -d/dx [zeta-centered] - eta_1/omega_1``."""
    _pole_guard(x, periods)
    w1 = periods.omega1
    x = np.asarray(x)
    scalar = x.ndim == 0
    q2 = periods.nome**2
    growth = np.pi * float(np.max(np.abs((x / w1).imag)))
    series = _lambert_trig(q2, np.pi * x / w1, growth, "cos", power=1)
    dzeta = -((np.pi / (2 * w1)) ** 2) / np.sin(np.pi * x / (2 * w1)) ** 2 + (
        2 * np.pi**2 / w1**2
    ) * series
    return _realify(-dzeta - eta1(periods) / w1, scalar)


def q_sine(z, q):
    """Gosper's q-sine ``sin_q(pi z)`` from its product definition."""
    z = np.asarray(z, dtype=complex)
    lq = math.log(q)
    log_val = (
        (z - 0.5) ** 2 * lq
        + log_qpochhammer(np.exp(2 * z * lq), q * q)
        + log_qpochhammer(np.exp((2 - 2 * z) * lq), q * q)
        - 2.0 * log_qpochhammer(q, q * q)
    )
    return _realify(np.exp(log_val), z.ndim == 0)


def q_gamma(z, q):
    """q-gamma ``(1-q)^(1-z) (q; q)_inf / (q^z; q)_inf``."""
    z = np.asarray(z, dtype=complex)
    lq = math.log(q)
    log_den = log_qpochhammer(np.exp(z * lq), q)
    if np.any(~np.isfinite(log_den)):
        raise PoleError("q_gamma pole", location=z)
    log_val = (1 - z) * math.log1p(-q) + log_qpochhammer(q, q) - log_den
    return _realify(np.exp(log_val), z.ndim == 0)


# ---------------------------------------------------------------------------
# real fast path: theta_1 and its log-derivative for real v and tau = i*T


@njit(cache=True)
def _theta1_pair_nb(v, T):
    """(theta_1, theta_1') scaled by a common positive factor, plus log of it."""
    if T >= 1.0:
        th = 0.0
        dth = 0.0
        for n in range(1, MAX_TERMS + 1):
            k = n - 0.5
            w = math.exp(-math.pi * T * k * k)
            sgn = 1.0 if n % 2 == 1 else -1.0
            th += 2.0 * sgn * w * math.sin(2.0 * math.pi * k * v)
            dth += 4.0 * math.pi * k * sgn * w * math.cos(2.0 * math.pi * k * v)
            if w < 1e-18:
                break
        return th, dth, 0.0
    # dual form: -T^-1/2 sum_m (-1)^m exp(-pi (v + 1/2 - m)^2 / T)
    w0 = v + 0.5
    m0 = math.floor(w0 + 0.5)
    u0 = w0 - m0
    shift = -math.pi * u0 * u0 / T
    th = 0.0
    dth = 0.0
    for j in range(MAX_TERMS + 1):
        for side in range(2):
            if j == 0 and side == 1:
                continue
            m = m0 + j if side == 0 else m0 - j
            u = w0 - m
            e = math.exp(-math.pi * u * u / T - shift)
            sgn = 1.0 if int(m) % 2 == 0 else -1.0
            th -= sgn * e
            dth += sgn * e * 2.0 * math.pi * u / T
        if j >= 1 and math.exp(-math.pi * ((j - 0.5) ** 2) / T) < 1e-18:
            break
    return th, dth, shift


@njit(cache=True)
def _theta1_logderiv_nb(v, T):
    out = np.empty(v.shape[0])
    for i in range(v.shape[0]):
        th, dth, _ = _theta1_pair_nb(v[i], T)
        out[i] = dth / th
    return out


def _theta1_logderiv_np(v, T):
    v = np.asarray(v, dtype=float)
    if T >= 1.0:
        n = np.arange(1, 20)
        k = n - 0.5
        w = (-1.0) ** (n - 1) * np.exp(-np.pi * T * k * k)
        ang = 2.0 * np.pi * np.multiply.outer(v, k)
        th = 2.0 * np.sum(w * np.sin(ang), axis=-1)
        dth = 4.0 * np.pi * np.sum(k * w * np.cos(ang), axis=-1)
        return dth / th
    w0 = v + 0.5
    m0 = np.floor(w0 + 0.5)
    span = int(math.ceil(math.sqrt(45.0 * T / math.pi))) + 2
    offs = np.arange(-span, span + 1)
    m = np.add.outer(m0, offs)
    u = np.expand_dims(w0, -1) - m
    u0 = np.expand_dims(w0 - m0, -1)
    e = np.exp(-np.pi * (u * u - u0 * u0) / T)
    sgn = 1.0 - 2.0 * np.mod(m, 2.0)
    th = -np.sum(sgn * e, axis=-1)
    dth = np.sum(sgn * e * 2.0 * np.pi * u / T, axis=-1)
    return dth / th


def theta1_logderiv_real(v, tau_im):
    """``theta_1'(v)/theta_1(v)`` for real ``v`` and ``tau = i*tau_im``.

    Uses a compiled kernel when numba is active; both paths scale out the
    dominant Gaussian so the ratio stays finite for tiny ``tau_im``.
    """
    v = np.asarray(v, dtype=float)
    if use_numba():
        flat = np.ascontiguousarray(v.reshape(-1))
        return _theta1_logderiv_nb(flat, float(tau_im)).reshape(v.shape)[()]
    return _theta1_logderiv_np(v, float(tau_im))[()]
