import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edpa.errors import DomainError, UnsupportedError
from edpa.process_core import (
    Configuration,
    ProcessParams,
    absorbing_kernel,
    as_configuration,
    equidistant,
    h_A,
    km_determinant,
    sigma,
    sigma_modes,
    single_particle_density,
    transition_density,
    wrapped_kernel,
)
from edpa.special_functions import ModularNome, theta_mu


def trapezoid_periodic(f, L, n=512):
    # spectrally accurate for smooth periodic integrands
    y = np.arange(n) * L / n
    return float(np.sum(f(y)) * L / n)


def simpson(f, a, b, n=4000):
    y = np.linspace(a, b, n + 1)
    v = f(y)
    h = (b - a) / n
    return float(h / 3 * (v[0] + v[-1] + 4 * v[1:-1:2].sum() + 2 * v[2:-1:2].sum()))


def gauss_triangle(L, n):
    """Nodes and weights for 0 <= y1 < y2 < L."""
    g, w = np.polynomial.legendre.leggauss(n)
    u, wu = (g + 1) / 2, w / 2
    y1 = np.repeat(L * u, n)
    y2 = y1 + (L - y1) * np.tile(u, n)
    weights = np.outer(wu, wu).ravel() * L * (L - y1)
    return np.column_stack([y1, y2]), weights


# ---------------------------------------------------------------------------
# mode labels


def test_sigma_values():
    assert sigma(3, 2) == 2
    assert sigma(2, 1) == 0.5
    with pytest.raises(DomainError):
        sigma(0, 1)


def test_sigma_dirichlet_sum():
    M, x = 4, 0.7
    modes = sigma_modes(M, (M - 1) / 2)
    assert len(modes) == M
    lhs = np.sum(np.exp(2j * modes * x))
    assert abs(lhs - math.sin(M * x) / math.sin(x)) < 1e-12


# ---------------------------------------------------------------------------
# geometry


def test_equidistant_center():
    for N in (2, 3, 5):
        init = equidistant(N, 1.3)
        assert init.center == pytest.approx(math.pi * 1.3, rel=1e-14)
        assert init.in_alcove(1.3)


def test_params_validation():
    with pytest.raises(DomainError):
        ProcessParams(0, 1.0, 1.0)
    with pytest.raises(DomainError):
        ProcessParams(2, -1.0, 1.0)
    with pytest.raises(DomainError):
        ProcessParams(2, 1.0, 0.0)


def test_as_configuration_places_center():
    c = as_configuration([0.5, 2.0, 5.0], 1.0)
    assert 0 <= c.center < math.pi
    assert c.delta / math.pi == round(c.delta / math.pi)


# ---------------------------------------------------------------------------
# wrapped heat kernel


@pytest.mark.parametrize("N", [2, 3])
@pytest.mark.parametrize("t", [0.05, 0.5, 3.0])
def test_wrapped_kernel_methods_agree(N, t):
    p = ProcessParams(N, 1.2, 10.0)
    rng = np.random.default_rng(N)
    x, y = rng.uniform(0, p.L, 20), rng.uniform(0, p.L, 20)
    ref = wrapped_kernel(p, t, x, y, "image_sum")
    for method in ("theta_form", "spectral"):
        assert np.max(np.abs(wrapped_kernel(p, t, x, y, method) - ref)) < 1e-10


def test_wrapped_kernel_even_normalized():
    p = ProcessParams(2, 1.0, 10.0)
    for x in (0.0, 1.3):
        mass = trapezoid_periodic(lambda y: wrapped_kernel(p, 0.5, x, y, "image_sum"), p.L)
        assert mass == pytest.approx(1.0, abs=1e-12)


def test_wrapped_kernel_odd_mass_over_double_period():
    # for odd N the kernel is antiperiodic, so a full period is [0, 4 pi r)
    p = ProcessParams(3, 1.0, 10.0)
    for x in (0.0, 1.0, 4.4):
        mass = trapezoid_periodic(lambda y: wrapped_kernel(p, 0.5, x, y, "image_sum"), 2 * p.L)
        assert abs(mass) < 1e-10


def test_wrapped_kernel_odd_mass_single_period():
    p, t = ProcessParams(3, 1.0, 10.0), 0.5
    # antiperiodic on [0, 2 pi r) for odd N, so Simpson rather than the periodic trapezoid
    mass0 = simpson(lambda y: wrapped_kernel(p, t, 0.0, y, "image_sum"), 0, p.L)
    assert abs(mass0) < 1e-10
    x = 1.0
    # integral of the half-integer cosine modes over one circumference
    s = np.arange(0.5, 60.0)
    exact = 2 * np.sum(np.exp(-s * s * t / 2) * np.sin(s * x) / (math.pi * s))
    mass = simpson(lambda y: wrapped_kernel(p, t, x, y, "image_sum"), 0, p.L)
    assert mass == pytest.approx(exact, abs=1e-9)
    assert abs(exact) > 0.5


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 6.2), st.floats(0, 6.2), st.floats(0.01, 4.0), st.sampled_from([2, 3, 4]))
def test_wrapped_kernel_symmetric(x, y, t, N):
    p = ProcessParams(N, 1.0, 10.0)
    a, b = wrapped_kernel(p, t, x, y), wrapped_kernel(p, t, y, x)
    assert abs(a - b) <= 1e-13 * max(1.0, abs(a))


def test_wrapped_kernel_concentrates():
    r = 1.0
    p = ProcessParams(2, r, 10.0)
    t = 1e-6 * r * r
    y = np.linspace(0.01 * r, p.L - 0.01 * r, 20001)
    outside = np.max(np.abs(wrapped_kernel(p, t, 0.0, y))) * p.L
    assert outside < 1e-8


def test_wrapped_kernel_rejects_bad_time():
    with pytest.raises(DomainError):
        wrapped_kernel(ProcessParams(2, 1.0, 1.0), 0.0, 0.1, 0.2)


# ---------------------------------------------------------------------------
# Karlin-McGregor determinant


def test_km_forms_agree_example():
    p = ProcessParams(3, 1.0, 5.0)
    y = (0.3, 2.0, 4.2)
    det = km_determinant(p, 0.1, y)
    closed = km_determinant(p, 0.1, y, form="closed")
    assert abs(det - closed) < 1e-8 * abs(closed)
    assert det > 0


@pytest.mark.parametrize("N", [2, 3, 4])
def test_km_forms_agree_random(N):
    p = ProcessParams(N, 0.9, 5.0)
    rng = np.random.default_rng(10 + N)
    for t in (0.05, 0.4, 2.0):
        y = np.sort(rng.uniform(0, p.L, N))
        det = km_determinant(p, t, y)
        closed = km_determinant(p, t, y, form="closed")
        assert abs(det - closed) <= 1e-8 * max(abs(closed), 1e-300)


def test_km_vanishes_at_coincidence():
    p = ProcessParams(3, 1.0, 5.0)
    assert abs(km_determinant(p, 0.2, (0.5, 0.5, 3.0))) < 1e-10
    assert abs(km_determinant(p, 0.2, (0.5, 0.5, 3.0), form="closed")) < 1e-10


def test_km_vanishes_at_center_boundary():
    r = 1.0
    p = ProcessParams(3, r, 5.0)
    # equidistant delta is -pi r, so these two put the center at 0 and at 2 pi r
    low = (0.3, 1.0, math.pi * r - 1.3)
    high = (2.0, 3.0, 3 * math.pi * r - 5.0)
    for y in (low, high):
        val, flags = km_determinant(p, 0.3, y, with_flags=True)
        assert abs(val) < 1e-10
        assert abs(km_determinant(p, 0.3, y, form="closed")) < 1e-10


def test_km_flags():
    p = ProcessParams(2, 1.0, 5.0)
    _, flags = km_determinant(p, 0.2, (3.0, 1.0), with_flags=True)
    assert "out-of-alcove" in flags
    _, flags = km_determinant(p, 0.2, (1.0, 3.0), x=(0.2, 2.0), with_flags=True)
    assert "unproven-representation" in flags
    with pytest.raises(UnsupportedError):
        km_determinant(p, 0.2, (1.0, 3.0), form="closed", x=(0.2, 2.0))


def test_km_concentrates_at_start():
    p = ProcessParams(2, 1.0, 5.0)
    v = equidistant(2, 1.0).x
    g, w = np.polynomial.legendre.leggauss(40)
    half = 0.1  # ten standard deviations at t = 1e-4
    mass = 0.0
    for a, wa in zip(g, w):
        for b, wb in zip(g, w):
            # unwrapped coordinates: for even N the determinant is periodic in each y_j
            y = (v[0] + half * a, v[1] + half * b)
            mass += wa * wb * half * half * km_determinant(p, 1e-4, y)
    assert mass == pytest.approx(1.0, abs=1e-6)


# ---------------------------------------------------------------------------
# h-function and transition density


def test_h_positive_in_interior():
    p = ProcessParams(3, 1.0, 4.0)
    rng = np.random.default_rng(0)
    count = 0
    while count < 100:
        x = np.sort(rng.uniform(0, p.L, 3))
        c = as_configuration(x, p.r)
        if not c.in_alcove(p.r):
            continue
        assert h_A(p, 2.5, c) > 0
        count += 1


def test_h_vanishes_at_boundaries():
    p = ProcessParams(3, 1.0, 4.0)
    assert abs(h_A(p, 1.0, Configuration((0.4, 0.4, 3.0), 0.0))) < 1e-12
    edge = Configuration((0.3, 1.0, math.pi - 1.3), -math.pi)
    assert abs(h_A(p, 1.0, edge)) < 1e-12
    near = Configuration((0.3, 1.0, math.pi - 1.3 + 1e-9), -math.pi)
    assert 0 < h_A(p, 1.0, near) < 1e-7


def test_transition_density_normalized():
    p = ProcessParams(2, 1.0, 2.0)
    x = equidistant(2, 1.0)
    pts, w = gauss_triangle(p.L, 30)
    vals = [transition_density(p, 0, x, 0.2 * p.t_star, Configuration(tuple(y), x.delta)) for y in pts]
    assert np.dot(w, vals) == pytest.approx(1.0, abs=1e-6)
    assert min(vals) > -1e-12


def test_chapman_kolmogorov():
    p = ProcessParams(2, 1.0, 2.0)
    x = equidistant(2, 1.0)
    s, t, u = 0.0, 0.4, 0.9
    z = Configuration((1.0, 4.0), x.delta)
    pts, w = gauss_triangle(p.L, 30)
    total = 0.0
    for y, wy in zip(pts, w):
        mid = Configuration(tuple(y), x.delta)
        total += wy * transition_density(p, s, x, t, mid) * transition_density(p, t, mid, u, z)
    assert total == pytest.approx(transition_density(p, s, x, u, z), abs=1e-4)


def test_h_factors_telescope():
    p = ProcessParams(3, 1.0, 3.0)
    v = equidistant(3, 1.0)
    x = Configuration((0.5, 2.4, 4.0), v.delta)
    y = Configuration((1.1, 2.0, 5.0), v.delta)
    s, t = 0.3, 0.8
    lhs = transition_density(p, s, x, t, y) * transition_density(p, 0, v, s, x)
    q1 = km_determinant(p, t - s, y, x=x)
    q2 = km_determinant(p, s, x)
    rhs = h_A(p, p.t_star - t, y) / h_A(p, p.t_star, v) * q1 * q2
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_transition_density_time_order():
    p = ProcessParams(2, 1.0, 2.0)
    x = equidistant(2, 1.0)
    with pytest.raises(DomainError):
        transition_density(p, 0.5, x, 0.4, (1.0, 3.0))
    with pytest.raises(DomainError):
        transition_density(p, 0.0, x, 2.0, (1.0, 3.0))


# ---------------------------------------------------------------------------
# single particle


def test_single_particle_positive():
    rng = np.random.default_rng(2)
    L = 2 * math.pi
    x, y = rng.uniform(0.01, L - 0.01, (2, 50))
    assert np.all(single_particle_density(1.0, 3.0, 0.0, x, 1.0, y) > 0)


def test_single_particle_vanishes_at_walls():
    L = 2 * math.pi
    for y in (1e-9, L - 1e-9):
        assert single_particle_density(1.0, 3.0, 0.0, 2.0, 1.0, y) < 1e-8


def test_single_particle_normalized():
    L = 2 * math.pi
    y = np.linspace(0, L, 2001)[1:-1]
    vals = single_particle_density(1.0, 3.0, 0.2, 1.7, 1.5, y)
    h = y[1] - y[0]
    assert np.sum(vals) * h == pytest.approx(1.0, abs=1e-6)


def test_absorbing_kernel_branches_agree():
    x, y = 1.1, np.linspace(0.2, 6.0, 9)
    L = 2 * math.pi
    t = L * L / 4  # crossover
    a = absorbing_kernel(1.0, t * (1 - 1e-12), x, y)
    b = absorbing_kernel(1.0, t * (1 + 1e-12), x, y)
    assert np.max(np.abs(a - b)) < 1e-12


def doob_limit(r, s, x, t, y):
    return absorbing_kernel(r, t - s, x, y) * math.exp((t - s) / (8 * r * r)) * math.sin(y / (2 * r)) / math.sin(x / (2 * r))


def test_single_particle_long_horizon():
    r, s, x, t, y = 1.0, 0.0, 1.1, 0.7, 2.5
    got = single_particle_density(r, 200.0, s, x, t, y)
    assert got == pytest.approx(doob_limit(r, s, x, t, y), rel=1e-6)


def test_single_particle_long_horizon_needs_exponential_factor():
    r, s, x, t, y = 1.0, 0.0, 1.1, 0.7, 2.5
    got = single_particle_density(r, 200.0, s, x, t, y)
    bare = absorbing_kernel(r, t - s, x, y) * math.sin(y / (2 * r)) / math.sin(x / (2 * r))
    assert got / bare == pytest.approx(math.exp(t / 8), rel=1e-9)


def test_single_particle_theta_ratio():
    r, ts, s, x, t, y = 0.8, 2.0, 0.1, 1.4, 0.9, 3.3
    L = 2 * math.pi * r
    ratio = theta_mu(1, y / L, ModularNome(tau_im=(ts - t) / (2 * math.pi * r * r))) / theta_mu(
        1, x / L, ModularNome(tau_im=(ts - s) / (2 * math.pi * r * r))
    )
    expected = absorbing_kernel(r, t - s, x, y) * ratio
    assert single_particle_density(r, ts, s, x, t, y) == pytest.approx(expected, rel=1e-14)


def test_single_particle_domain():
    with pytest.raises(DomainError):
        single_particle_density(1.0, 3.0, 0.0, 0.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        single_particle_density(1.0, 3.0, 1.0, 1.0, 0.5, 1.0)
