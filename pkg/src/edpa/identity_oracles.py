"""Both sides of the elliptic determinant evaluations, as residual checks.

Each ``check_*`` function evaluates a determinant by LU (``numpy.linalg.det``)
and its closed-form product independently and returns a ``CheckResult``.
The residual is ``|lhs - rhs| / max(1, |lhs|, |rhs|)``.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DomainError, PoleError
from .special_functions import (
    HalfPeriods,
    ModularNome,
    dedekind_eta,
    euler_product,
    qpochhammer,
    theta_E,
    theta_mu,
    weierstrass_p,
    weierstrass_zeta,
)

COND_LIMIT = 1e10


@dataclass
class CheckResult:
    lemma: str
    N: int
    residual: float
    lhs: complex
    rhs: complex
    condition: float = float("nan")
    notes: list = field(default_factory=list)

    @property
    def condition_flag(self):
        return bool(self.condition > COND_LIMIT)

    def record(self, seed=None):
        return {
            "lemma": self.lemma,
            "N": self.N,
            "seed": seed,
            "residual": float(self.residual),
            "condition_flag": self.condition_flag,
        }


def residual(lhs, rhs):
    return float(abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs)))


def _det(matrix):
    matrix = np.asarray(matrix)
    with np.errstate(all="ignore"):
        cond = float(np.linalg.cond(matrix)) if matrix.size else 1.0
    return complex(np.linalg.det(matrix)), cond


def _result(lemma, N, lhs, rhs, cond=float("nan")):
    return CheckResult(lemma, N, residual(lhs, rhs), complex(lhs), complex(rhs), cond)


@dataclass(frozen=True)
class EllipticDetInput:
    r_vec: tuple
    s_vec: tuple
    kappa: complex
    p: float

    def __post_init__(self):
        r = np.asarray(self.r_vec, dtype=complex)
        s = np.asarray(self.s_vec, dtype=complex)
        if r.shape != s.shape or r.ndim != 1 or r.size < 1:
            raise DomainError("r_vec and s_vec must be equal-length vectors")
        if np.any(r == 0) or np.any(s == 0):
            raise DomainError("parameters must be nonzero")
        if not 0.0 < self.p < 1.0:
            raise DomainError("nome p must lie in (0, 1)")

    @property
    def N(self):
        return len(self.r_vec)

    def near_lattice(self, eps=1e-10):
        """True when r_j/r_k or kappa*prod(r) is within ``eps`` of p^Z (log space)."""
        r = np.asarray(self.r_vec, dtype=complex)
        lp = math.log(self.p)
        vals = [self.kappa * np.prod(r)]
        vals += [r[j] / r[k] for j in range(len(r)) for k in range(len(r)) if j != k]
        for val in vals:
            lv = np.log(complex(val))
            m = round(lv.real / lp)
            if abs(lv - m * lp) < eps or abs(lv - m * lp - 2j * np.pi) < eps or abs(lv - m * lp + 2j * np.pi) < eps:
                return True
        return False


def _separated_angles(N, rng, min_sep):
    """N uniform angles (in turns) with pairwise circular distance >= min_sep."""
    while True:
        a = rng.uniform(size=N)
        d = np.abs(np.subtract.outer(a, a))
        d = np.minimum(d, 1.0 - d) + np.eye(N)
        if np.min(d) >= min_sep:
            return a


def random_elliptic_input(N, rng, p_range=(0.05, 0.5), min_sep=0.05):
    """Random instance with r, s, kappa on the unit circle.

    Angles within each of r and s are kept ``min_sep`` turns apart, and
    ``kappa * prod(r)`` is kept ``min_sep`` turns away from 1.
    """
    r = np.exp(2j * np.pi * _separated_angles(N, rng, min_sep))
    s = np.exp(2j * np.pi * _separated_angles(N, rng, min_sep))
    while True:
        kappa = np.exp(2j * np.pi * rng.uniform())
        turn = np.angle(kappa * np.prod(r)) / (2 * np.pi)
        if min(abs(turn), 1 - abs(turn)) >= min_sep:
            break
    p = rng.uniform(*p_range)
    return EllipticDetInput(tuple(r), tuple(s), complex(kappa), float(p))


def macdonald_denominator(s_vec, p):
    """``W(s; p) = prod_{j<k} s_k E(s_j/s_k; p)``."""
    s = np.asarray(s_vec, dtype=complex)
    if np.any(s == 0):
        raise DomainError("Macdonald denominator needs nonzero entries")
    out = 1.0 + 0j
    for k in range(len(s)):
        for j in range(k):
            out *= s[k] * complex(theta_E(s[j] / s[k], p))
    return out


def check_elliptic_cauchy(inp):
    """Tarasov-Varchenko type Cauchy determinant in multiplicative theta form."""
    r = np.asarray(inp.r_vec, dtype=complex)
    s = np.asarray(inp.s_vec, dtype=complex)
    p, kappa, N = inp.p, inp.kappa, inp.N
    prod_r = np.prod(r)
    e_kr = complex(theta_E(kappa * prod_r, p))
    mat = np.empty((N, N), dtype=complex)
    for k in range(N):
        others = np.delete(r, k)
        head = theta_E(kappa * s * prod_r / r[k], p) / e_kr
        tail = np.ones(N, dtype=complex)
        for rl in others:
            tail *= theta_E(s / rl, p) / complex(theta_E(r[k] / rl, p))
        mat[:, k] = head * tail
    lhs, cond = _det(mat)
    rhs = (
        complex(theta_E(kappa * np.prod(s), p))
        * macdonald_denominator(s, p)
        / (e_kr * macdonald_denominator(r, p))
    )
    res = _result("elliptic_cauchy", N, lhs, rhs, cond)
    if inp.near_lattice():
        res.notes.append("ill-conditioned: parameters near p^Z")
    return res


def check_denominator_expansion(s_vec, kappa, p):
    """Product ``E(kappa prod s) W(s)`` against its determinant expansion."""
    s = np.asarray(s_vec, dtype=complex)
    N = len(s)
    lhs = complex(theta_E(kappa * np.prod(s), p)) * macdonald_denominator(s, p)
    pref = (complex(qpochhammer(p**N, p**N)) / complex(qpochhammer(p, p))) ** N
    mat = np.empty((N, N), dtype=complex)
    sign = (-1.0) ** (N - 1)
    for k in range(N):
        mat[:, k] = s**k * theta_E(sign * p**k * kappa * s**N, p**N)
    det, cond = _det(mat)
    return _result("denominator_expansion", N, lhs, pref * det, cond)


def _center_shift(u, r):
    """The delta in pi*r*Z putting delta + sum(u) into [0, pi*r)."""
    return -math.pi * r * math.floor(float(np.sum(u)) / (math.pi * r))


def _alcove_check(u, r, delta):
    u = np.asarray(u, dtype=float)
    if np.any(np.diff(u) <= 0) or u[0] < 0 or u[-1] >= 2 * math.pi * r:
        raise DomainError("configuration is not in the alcove [0, 2 pi r)")
    center = delta + float(np.sum(u))
    if not 0.0 < center < 2 * math.pi * r:
        raise DomainError("center delta + sum(u) must lie in (0, 2 pi r)")
    return center


def check_theta_cauchy(N, u_vec, x_vec, delta, r, tau_im):
    """Cauchy determinant in additive theta_1 form with the alcove constraint."""
    u = np.asarray(u_vec, dtype=float)
    x = np.asarray(x_vec, dtype=float)
    if len(u) != N or len(x) != N:
        raise DomainError("u_vec and x_vec must have length N")
    ubar = _alcove_check(u, r, delta)
    nome = ModularNome(tau_im=tau_im)
    L = 2 * math.pi * r

    def th(v):
        return theta_mu(1, np.asarray(v) / L, nome)

    mat = np.empty((N, N), dtype=complex)
    for k in range(N):
        col = th(ubar + x - u[k]) / th(ubar)
        for ell in range(N):
            if ell != k:
                col = col * th(x - u[ell]) / th(u[k] - u[ell])
        mat[:, k] = col
    lhs, cond = _det(mat)
    xbar = delta + float(np.sum(x))
    rhs = th(xbar) / th(ubar)
    for k in range(N):
        for j in range(k):
            rhs = rhs * th(x[j] - x[k]) / th(u[j] - u[k])
    return _result("theta_cauchy", N, lhs, complex(rhs), cond)


def rs_constant(N, tau_im, r, delta, form="exp"):
    """Prefactor of the theta_1 determinant expansion.

    ``form='power'`` uses ``i**a * q**b * exp(i (N-1) delta / 2r)`` and
    ``form='exp'`` the single exponential; they coincide on the principal branch.
    """
    nome = ModularNome(tau_im=tau_im)
    q0 = euler_product(nome)
    tau = 1j * tau_im
    base = q0 ** ((N - 1) * (N - 2) / 2)
    if form == "power":
        return (
            base
            * np.exp(1j * np.pi / 2 * (N - 1) * (3 * N - 2) / 2)
            * np.exp(1j * np.pi * tau * (N - 1) * (3 * N - 2) / 8)
            * np.exp(1j * (N - 1) * delta / (2 * r))
        )
    expo = (N - 1) * ((3 * N - 2) / 8 * tau + delta / (2 * math.pi * r) + (3 * N - 2) / 4)
    return base * np.exp(1j * np.pi * expo)


def check_rs_determinant(N, x_vec, delta, r, tau_im):
    """theta_1 product against its Rosengren-Schlosser determinant expansion."""
    x = np.asarray(x_vec, dtype=float)
    L = 2 * math.pi * r
    nome = ModularNome(tau_im=tau_im)
    big = nome.scaled(N)
    xbar = delta + float(np.sum(x))
    lhs = complex(theta_mu(1, xbar / L, nome))
    for k in range(N):
        for j in range(k):
            lhs *= complex(theta_mu(1, (x[j] - x[k]) / L, nome))
    mat = np.empty((N, N), dtype=complex)
    tau = 1j * tau_im
    for k in range(N):
        v = (N - 1) / 2 + k * tau + (delta + N * x) / L
        mat[:, k] = np.exp(1j * k * x / r) * theta_mu(1, v, big)
    det, cond = _det(mat)
    rhs = rs_constant(N, tau_im, r, delta) * det
    return _result("rs_determinant", N, lhs, rhs, cond)


def check_forrester(N, x_vec, alpha, tau_im, form="n_tau"):
    """theta_3 (N odd) or theta_1 (N even) determinant closed form.

    ``form='n_tau'`` evaluates the prefactor theta at ``(sum(x + alpha); N tau)``.
    ``form='shifted_2n_tau'`` uses ``(sum(x + alpha) + N tau / 2; 2 N tau)`` and does
    not hold; it is kept so the discrepancy stays reproducible.
    """
    if N < 2:
        raise DomainError("check_forrester needs N >= 2")
    x = np.asarray(x_vec, dtype=float)
    nome = ModularNome(tau_im=tau_im)
    tau = 1j * tau_im
    mu_det, mu_pref = (3, 3) if N % 2 else (1, 0)
    mat = np.empty((N, N), dtype=complex)
    for k in range(1, N + 1):
        mat[:, k - 1] = theta_mu(mu_det, x + alpha - k / N, nome)
    lhs, cond = _det(mat)
    eta = dedekind_eta(math.exp(-2 * N * math.pi * tau_im))
    rhs = N ** (N / 2) * eta ** (-(N - 1) * (N - 2) / 2)
    total = np.sum(x + alpha)
    if form == "shifted_2n_tau":
        rhs = rhs * complex(theta_mu(mu_pref, total + N * tau / 2, nome.scaled(2 * N)))
    else:
        rhs = rhs * complex(theta_mu(mu_pref, total, nome.scaled(N)))
    big = nome.scaled(N)
    for k in range(N):
        for j in range(k):
            rhs = rhs * complex(theta_mu(1, x[k] - x[j], big))
    return _result("forrester", N, lhs, rhs, cond)


def check_zeta_addition(a, b, c, periods):
    """Three-point zeta product identity with the Weierstrass p correction."""
    for d in (a - b, b - c, a - c):
        frac = d / (2 * periods.omega1)
        if abs(frac - round(frac.real)) < 1e-12:
            raise PoleError("coincident points in zeta addition", location=d)

    def z(v):
        return complex(weierstrass_zeta(v, periods))

    def wp(v):
        return complex(weierstrass_p(v, periods))

    lhs = z(a - b) * z(a - c) + z(b - a) * z(b - c) + z(c - a) * z(c - b)
    rhs = 0.5 * (z(a - b) ** 2 + z(b - c) ** 2 + z(a - c) ** 2) - 0.5 * (
        wp(a - b) + wp(b - c) + wp(a - c)
    )
    return _result("zeta_addition", 3, lhs, rhs)


# --- seeded instance generators used by the verify suite -------------------


def _tau_from_p(p):
    # p = q^2 and q = exp(-pi T)
    return -math.log(p) / (2 * math.pi)


def _alcove_sample(N, r, rng, min_gap=0.05):
    """Alcove configuration with gaps and center margin >= min_gap * 2 pi r."""
    L = 2 * math.pi * r
    while True:
        u = np.sort(rng.uniform(0, L, size=N))
        gaps = np.diff(np.concatenate([u, [u[0] + L]]))
        center = float(np.sum(u)) + _center_shift(u, r)
        if np.min(gaps) > min_gap * L and min_gap * L < center < (0.5 - min_gap) * L:
            return u


def seeded_check(lemma, N, seed):
    """Run one named check on the instance derived from ``seed``."""
    rng = np.random.default_rng([seed, N, sum(map(ord, lemma))])
    if lemma == "elliptic_cauchy":
        return check_elliptic_cauchy(random_elliptic_input(N, rng))
    if lemma == "denominator_expansion":
        inp = random_elliptic_input(N, rng)
        return check_denominator_expansion(inp.s_vec, inp.kappa, inp.p)
    r = rng.uniform(0.5, 2.0)
    tau_im = _tau_from_p(rng.uniform(0.05, 0.5))
    if lemma == "theta_cauchy":
        u = _alcove_sample(N, r, rng)
        x = 2 * math.pi * r * _separated_angles(N, rng, 0.05)
        return check_theta_cauchy(N, u, x, _center_shift(u, r), r, tau_im)
    if lemma == "rs_determinant":
        x = rng.uniform(0, 2 * math.pi * r, size=N)
        delta = math.pi * r * int(rng.integers(-N, N + 1))
        return check_rs_determinant(N, x, delta, r, tau_im)
    if lemma == "forrester":
        x = rng.uniform(0, 1, size=N)
        alpha = complex(rng.uniform(-0.5, 0.5), rng.uniform(-0.2, 0.2) * tau_im)
        return check_forrester(N, x, alpha, tau_im)
    if lemma == "zeta_addition":
        periods = HalfPeriods(0.5, 0.5j * rng.uniform(0.3, 1.5))
        while True:
            a, b, c = rng.uniform(0, 1, size=3)
            d = np.abs(np.array([a - b, b - c, a - c]))
            if np.min(np.minimum(d, 1 - d)) > 0.05:
                return check_zeta_addition(a, b, c, periods)
    raise DomainError(f"unknown lemma {lemma!r}")


LEMMA_SIZES = {
    "elliptic_cauchy": (2, 3, 4),
    "denominator_expansion": (2, 3, 4),
    "theta_cauchy": (2, 3, 4),
    "rs_determinant": (2, 3),
    "forrester": (2, 3, 4),
    "zeta_addition": (3,),
}
