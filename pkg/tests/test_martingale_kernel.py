import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from edpa.errors import AccuracyError, DomainError, UnsupportedError
from edpa.martingale_kernel import (
    MAX_POINTS,
    RELAX_POINTS,
    RELAX_TIMES,
    SeriesBudget,
    alternating_cosine,
    correlation_rho,
    cosine_term,
    det_martingale,
    det_martingale_h_ratio,
    long_time_limit,
    extended_sine,
    g_first_term_theta2,
    initial_measure,
    kernel_function,
    kernel_K,
    kernel_K_equilibrium,
    kernel_K_homogeneous,
    kernel_K_infinite,
    mart_M,
    phi,
    relaxation_distance,
)
from edpa.process_core import Configuration, ProcessParams, equidistant, p_bm, wrapped_kernel
from edpa.special_functions import ModularNome, theta1_prime0, theta_mu

PARAMS = ProcessParams(3, 1.0, 4.0)
ETA = equidistant(3, 1.0)


def periodic_mean(f, L, n=128):
    x = np.arange(n) * L / n
    return np.array([f(v) for v in x]).sum() * L / n


# ---------------------------------------------------------------------------
# phi and the martingale functions


@pytest.mark.parametrize("N", [2, 3, 4, 5, 6])
def test_cardinal_property(N):
    p = ProcessParams(N, 1.0, 4.0)
    xi = equidistant(N, 1.0)
    vals = np.array([[complex(phi(xi, k, v, p)) for k in range(N)] for v in xi.x])
    assert np.max(np.abs(vals - np.eye(N))) < 1e-10


def test_cardinal_property_generic_atoms():
    p = ProcessParams(3, 0.8, 2.0)
    xi = initial_measure([0.2, 1.5, 3.9], 0.8)
    vals = np.array([[complex(phi(xi, k, v, p)) for k in range(3)] for v in xi.x])
    assert np.max(np.abs(vals - np.eye(3))) < 1e-10


@pytest.mark.parametrize("N", [2, 3, 4])
def test_phi_quasi_periodicity(N):
    p = ProcessParams(N, 1.0, 4.0)
    xi = equidistant(N, 1.0)
    z = 0.7 + 0.3j
    ratio = complex(phi(xi, 1, z + p.L, p)) / complex(phi(xi, 1, z, p))
    assert abs(ratio - (-1.0) ** N) < 1e-12


def test_phi_closed_form_matches_generic():
    z = np.array([0.7 + 0.3j, 2.2 - 0.1j, ETA.x[1] + 1e-9])
    for k in range(3):
        a = phi(ETA, k, z, PARAMS, form="generic")
        b = phi(ETA, k, z, PARAMS, form="closed")
        assert np.max(np.abs(a - b)) < 1e-10


def test_phi_closed_needs_equidistant_start():
    xi = initial_measure([0.2, 1.5, 3.9], 1.0)
    with pytest.raises(UnsupportedError):
        phi(xi, 0, 0.3, PARAMS, form="closed")
    with pytest.raises(DomainError):
        phi(ETA, 3, 0.3, PARAMS)


def test_initial_measure_validation():
    with pytest.raises(DomainError):
        initial_measure([0.2, 0.2], 1.0)
    with pytest.raises(DomainError):
        initial_measure([0.2, 7.0], 1.0)
    with pytest.raises(DomainError):
        initial_measure([0.2, 1.0], 1.0, delta=0.5)


def test_martingale_at_time_zero_is_phi():
    x = np.array([0.3, 2.0, 5.1])
    for k in range(3):
        assert np.allclose(mart_M(ETA, k, 0.0, x, PARAMS), np.real(phi(ETA, k, x, PARAMS)), atol=1e-14)


def test_martingale_transport():
    s, t, x = 0.1, 0.3, 1.1
    n = 256
    w = np.arange(n) * PARAMS.L / n
    for k in range(3):
        # odd N: kernel and martingale are both antiperiodic, the product is periodic
        lhs = np.sum(wrapped_kernel(PARAMS, t - s, x, w) * mart_M(ETA, k, t, w, PARAMS)) * PARAMS.L / n
        assert abs(lhs - mart_M(ETA, k, s, x, PARAMS)) < 1e-6


def test_martingale_quadrature_vs_series():
    t = 0.2 * PARAMS.t_star
    for k in range(3):
        a = mart_M(ETA, k, t, 1.1, PARAMS, method="quadrature")
        b = mart_M(ETA, k, t, 1.1, PARAMS, method="series")
        assert abs(a - b) <= 1e-7 * max(1e-3, abs(a))


def test_series_route_refuses_past_its_floor():
    # the Lambert sum is asymptotic; late times have an error floor above tolerance
    with pytest.raises(AccuracyError):
        mart_M(ETA, 0, 0.9 * PARAMS.t_star, 1.1, PARAMS, method="series")


def test_series_needs_equidistant_start():
    xi = initial_measure([0.2, 1.5, 3.9], 1.0)
    with pytest.raises(UnsupportedError):
        mart_M(xi, 0, 0.3, 1.0, PARAMS, method="series")


def test_martingale_time_domain():
    with pytest.raises(DomainError):
        mart_M(ETA, 0, PARAMS.t_star, 1.0, PARAMS)
    with pytest.raises(DomainError):
        SeriesBudget(n_max=0)


def test_det_martingale_identity_at_start():
    assert det_martingale(ETA, 0.0, ETA.x, PARAMS) == pytest.approx(1.0, abs=1e-12)


def test_det_martingale_matches_h_ratio():
    rng = np.random.default_rng(8)
    t = 0.4 * PARAMS.t_star
    done = 0
    while done < 5:
        w = np.sort(rng.uniform(0, PARAMS.L, 3))
        if not Configuration(tuple(w), ETA.delta).in_alcove(PARAMS.r):
            continue
        a = det_martingale(ETA, t, w, PARAMS)
        b = det_martingale_h_ratio(ETA, t, w, PARAMS)
        assert a == pytest.approx(b, rel=1e-7)
        done += 1


def test_det_martingale_antisymmetric():
    w = np.array([0.4, 2.5, 4.4])
    swapped = w[[1, 0, 2]]
    a = det_martingale(ETA, 0.5, w, PARAMS)
    assert det_martingale(ETA, 0.5, swapped, PARAMS) == pytest.approx(-a, rel=1e-13)
    with pytest.raises(DomainError):
        det_martingale(ETA, 0.5, w[:2], PARAMS)


# ---------------------------------------------------------------------------
# finite-N kernel


GRID_TIMES = (0.1, 0.4, 0.7, 1.0)
GRID_X = (0.5, 1.7, 3.1, 5.0)
GRID_Y = (2.0, 0.2, 4.4, 5.9)


@pytest.mark.parametrize("N", [2, 3])
def test_kernel_forms_agree_on_grid(N):
    p = ProcessParams(N, 1.0, 4.0)
    worst = 0.0
    for s, x in zip(GRID_TIMES, GRID_X):
        for t, y in zip(GRID_TIMES, GRID_Y):
            a = kernel_K(p, s, x, t, y, form="martingale_sum")
            b = kernel_K(p, s, x, t, y, form="series")
            worst = max(worst, abs(a - b))
    assert worst < 1e-6


def test_kernel_forms_agree_example():
    a = kernel_K(PARAMS, 0.1, 0.5, 0.3, 2.0, form="martingale_sum")
    b = kernel_K(PARAMS, 0.1, 0.5, 0.3, 2.0, form="series")
    assert abs(a - b) < 1e-6


def test_equal_time_density_integrates_to_N():
    total = periodic_mean(lambda x: kernel_K(PARAMS, 0.5, x, 0.5, x).real, PARAMS.L, 64)
    assert total == pytest.approx(3.0, abs=1e-5)


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi), st.floats(0.1, 1.5))
def test_two_point_determinant_nonnegative(x, y, t):
    K = kernel_function("finite", params=PARAMS, form="martingale_sum")
    assert correlation_rho([(t, x), (t, y)], K) >= -1e-8


def test_kernel_needs_positive_start_time():
    with pytest.raises(DomainError):
        kernel_K(PARAMS, 0.0, 0.5, 0.3, 2.0)
    with pytest.raises(DomainError):
        kernel_K(PARAMS, 0.1, 0.5, 4.0, 2.0)


def test_theta2_first_term_is_a_product():
    p = ProcessParams(2, 1.0, 4.0)
    s, x, t, y = 0.3, 0.9, 1.0, 2.4
    N, r, ts = p.N, p.r, p.t_star
    tpi = 2 * math.pi * r * r
    pref = 1 / (r * theta1_prime0(ModularNome(tau_im=N * N * ts / tpi)))
    th_x = theta_mu(2, N * x / (2 * math.pi * r), ModularNome(tau_im=N * N * s / tpi))
    th_y = theta_mu(2, N * y / (2 * math.pi * r), ModularNome(tau_im=N * N * (ts - t) / tpi))
    first = g_first_term_theta2(p, s, x, t, y)
    assert abs(first - pref * 0.5 * th_x * th_y) < 1e-12 * abs(first)


def test_theta2_first_term_misses_alternating_signs():
    # theta_2 and the alternating cosine differ from the q^(9/4) term on
    p = ProcessParams(2, 1.0, 4.0)
    w, tau_im = 2 * 2.4 / (2 * math.pi), 4 * 3.0 / (2 * math.pi)
    th2 = theta_mu(2, w, ModularNome(tau_im=tau_im))
    alt = alternating_cosine(w, tau_im)
    q = math.exp(-math.pi * tau_im)
    gap = abs(th2 - alt)
    assert gap == pytest.approx(4 * q**2.25 * abs(math.cos(3 * math.pi * w)), rel=1e-3)
    assert gap > 1e-6
    # and only the alternating version reproduces the martingale sum
    s, x, t, y = 0.3, 0.9, 1.0, 2.4
    K = kernel_K(p, s, x, t, y, form="martingale_sum")
    assert abs(kernel_K(p, s, x, t, y, form="series") - K) < 1e-9


# ---------------------------------------------------------------------------
# homogeneous and equilibrium kernels


def test_long_horizon_limit_is_homogeneous():
    # q = exp(-N t*/2r^2) = exp(-60) at t* = 40
    p = ProcessParams(3, 1.0, 40.0)
    for s, x, t, y in ((0.5, 0.3, 0.9, 2.0), (1.0, 1.7, 0.5, 0.4), (0.7, 4.0, 0.7, 5.5)):
        assert abs(kernel_K(p, s, x, t, y) - kernel_K_homogeneous(3, 1.0, s, x, t, y)) < 1e-4


def test_equal_time_shift_matches_equilibrium_kernel():
    N, r = 3, 1.0
    T = 20 * r * r / N
    gap = max(
        abs(kernel_K_homogeneous(N, r, T, x, T, y) - kernel_K_equilibrium(0.0, y - x, N, r))
        for x, y in RELAX_POINTS
    )
    assert gap < 1e-8


def test_equal_time_shift_matches_standing_wave_limit():
    N, r = 3, 1.0
    T = 20 * r * r / N
    gap = max(
        abs(kernel_K_homogeneous(N, r, T, x, T, y) - long_time_limit(0.0, x, y, N, r))
        for x, y in RELAX_POINTS
    )
    assert gap < 1e-8


def test_cosine_term_at_coincidence():
    assert cosine_term(0.0, 4, 1.3) == pytest.approx(1 / (2 * math.pi * 1.3), rel=1e-15)


@pytest.mark.parametrize("N", [2, 3, 4, 7])
def test_equilibrium_diagonal(N):
    assert kernel_K_equilibrium(0.0, 0.0, N, 1.0) == pytest.approx(N / (2 * math.pi), rel=1e-14)


def test_equilibrium_off_diagonal():
    u, N, r = 0.9, 4, 1.0
    expected = math.sin((N - 1) * u / (2 * r)) / math.sin(u / (2 * r)) / (2 * math.pi * r)
    expected += math.cos(N * u / (2 * r)) / (2 * math.pi * r)
    assert kernel_K_equilibrium(0.0, u, N, r) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("N", [2, 3, 4])
def test_equilibrium_branches_differ_by_propagator(N):
    r, dt, dx = 1.0, -0.3, 0.8
    rr = 2 * r * r
    modes = (np.arange(N - 1) - (N - 2) / 2)  # |sigma| <= (N-2)/2
    before = np.sum(np.exp(modes**2 * dt / rr) * np.cos(modes * dx / r)) / (2 * math.pi * r)
    before += math.exp(N * N * dt / (4 * rr)) * cosine_term(dx, N, r)
    after = kernel_K_equilibrium(dt, dx, N, r)
    prop = wrapped_kernel(ProcessParams(N, r, 1.0), -dt, 0.0, dx, method="image_sum")
    assert abs((before - after) - prop) < 1e-10


def test_equilibrium_is_hermitian():
    for dx in (0.3, 1.7, 4.0):
        for N in (2, 3, 5):
            a = complex(kernel_K_equilibrium(0.0, dx, N, 1.0))
            b = complex(kernel_K_equilibrium(0.0, -dx, N, 1.0))
            assert abs(a - b.conjugate()) < 1e-10


def test_relaxation_to_equilibrium_kernel():
    d = [relaxation_distance(T, 3, 1.0) for T in (1.0, 5.0, 20.0)]
    assert d[0] > d[1] > d[2]
    assert d[2] < 1e-6


def test_relaxation_to_standing_wave_limit():
    d = [relaxation_distance(T, 3, 1.0, reference="standing_wave") for T in (1.0, 5.0, 20.0)]
    assert d[0] > d[1] > d[2]
    assert d[2] < 1e-6


def test_homogeneous_long_time_density_profile():
    N, r, T = 3, 1.0, 20.0
    for x in (0.0, 0.5, 1.3, 2.9):
        rho = kernel_K_homogeneous(N, r, T, x, T, x).real
        assert rho == pytest.approx((N + math.cos(N * x / r)) / (2 * math.pi * r), abs=1e-10)


# ---------------------------------------------------------------------------
# infinite-particle kernels


def test_extended_sine_values():
    assert abs(extended_sine(0.0, 1.0, 1.0)) < 1e-16
    assert extended_sine(0.0, 0.5, 1.0) == pytest.approx(2 / math.pi, rel=1e-15)
    assert extended_sine(0.0, 0.0, 1.7) == 1.7
    assert extended_sine(0.0, 1e-9, 1.0) == pytest.approx(1.0, rel=1e-12)


def test_extended_sine_branches_differ_by_heat_kernel():
    rho, dt, dx = 1.0, -0.3, 0.7
    f = lambda v: math.exp(math.pi**2 * v * v * dt / 2) * math.cos(math.pi * v * dx)
    before = integrate.quad(f, 0, rho, epsabs=1e-14)[0]
    assert abs((before - extended_sine(dt, dx, rho)) - p_bm(-dt, dx, 0.0)) < 1e-8


def test_infinite_kernel_long_time_extended_sine():
    T = 30.0
    val = kernel_K_infinite(1.0, T, 0.0, T + 0.2, 0.5)
    assert abs(val - extended_sine(0.2, 0.5, 1.0)) <= 1e-5


def test_infinite_kernel_long_time_rate():
    # leading gap at a lattice site: pi u exp(pi^2 dt/2) / (2 pi^2 T)^2
    dt, u = 0.2, 0.5
    for T in (30.0, 60.0):
        gap = abs(kernel_K_infinite(1.0, T, 0.0, T + dt, u) - extended_sine(dt, u, 1.0))
        predicted = math.pi * u * math.exp(math.pi**2 * dt / 2) / (2 * math.pi**2 * T) ** 2
        assert gap == pytest.approx(predicted, rel=0.05)


def finite_vs_infinite_gap(N):
    r = N / (2 * math.pi)
    return max(
        abs(kernel_K_homogeneous(N, r, s, x, t, y) - kernel_K_infinite(1.0, s, x, t, y))
        for s, t in RELAX_TIMES
        for x, y in RELAX_POINTS
    )


def test_finite_N_64_close_to_infinite():
    assert finite_vs_infinite_gap(64) <= 1e-3


def test_finite_N_converges_at_inverse_square_rate():
    g32, g64, g128 = (finite_vs_infinite_gap(N) for N in (32, 64, 128))
    assert 3.8 < g32 / g64 < 4.2
    assert 3.8 < g64 / g128 < 4.2


def test_infinite_kernel_with_horizon_matches_large_N():
    p = ProcessParams(64, 32 / math.pi, 1.0)
    for s, x, t, y in ((0.1, 0.3, 0.2, 1.1), (0.2, 0.0, 0.1, 0.5)):
        a = kernel_K_infinite(1.0, s, x, t, y, t_star=1.0)
        b = kernel_K(p, s, x, t, y, form="series")
        assert abs(a - b) < 1e-10


def test_infinite_kernel_domain():
    with pytest.raises(DomainError):
        kernel_K_infinite(0.0, 1.0, 0.0, 1.0, 0.5)
    with pytest.raises(DomainError):
        kernel_K_infinite(1.0, 0.0, 0.0, 1.0, 0.5)
    with pytest.raises(DomainError):
        extended_sine(0.0, 0.5, -1.0)


# ---------------------------------------------------------------------------
# correlation functions


def test_rho_single_point():
    K = kernel_function("equilibrium", N=3, r=1.0)
    assert correlation_rho([(0.0, 1.2)], K) == pytest.approx(3 / (2 * math.pi), rel=1e-14)


def test_rho_coincident_points_vanish():
    K = kernel_function("finite", params=PARAMS)
    assert abs(correlation_rho([(0.5, 1.2), (0.5, 1.2)], K)) < 1e-8


def test_rho_equilibrium_two_point_by_hand():
    N, r = 3, 1.0
    u = math.pi * r
    k0 = kernel_K_equilibrium(0.0, 0.0, N, r)
    k1 = kernel_K_equilibrium(0.0, u, N, r)
    k2 = kernel_K_equilibrium(0.0, -u, N, r)
    K = kernel_function("equilibrium", N=N, r=r)
    assert correlation_rho([(0.0, 0.4), (0.0, 0.4 + u)], K) == pytest.approx(k0 * k0 - k1 * k2, abs=1e-15)


def test_rho_permutation_invariant():
    K = kernel_function("homogeneous", N=3, r=1.0)
    pts = [(0.5, 0.3), (0.5, 2.0), (0.5, 4.1)]
    a = correlation_rho(pts, K)
    b = correlation_rho(pts[::-1], K)
    assert abs(a - b) <= 1e-14 * max(1e-300, abs(a))


def test_rho_point_budget():
    K = kernel_function("equilibrium", N=3, r=1.0)
    with pytest.raises(DomainError):
        correlation_rho([(0.0, 0.1 * j) for j in range(MAX_POINTS + 1)], K)
    with pytest.raises(DomainError):
        kernel_function("bogus")
