"""Euler-Maruyama integration of the interacting particle systems on the circle.

Four models share one integrator:

* ``elliptic``: pair drift ``A_N(t_star - t, x)`` with ``alpha = 2 pi r`` plus the
  same function of the center ``delta + sum(x)``;
* ``trig``: the ``(1/2r) cot(x/2r)`` limit, with its center term;
* ``hyper``: ``(1/2Na) coth(x/2Na)`` on the line, with its center term;
* ``dyson``: ``1/x`` pair drift, no center term.

Positions are kept unwrapped. A proposal is rejected when it leaves the
alcove, moves the center out of range, or shrinks a gap below ``guard_frac``
times ``min(old gap, mean spacing)``; the Brownian increment is then split
with a bridge draw and both halves are retried, up to ``max_halvings`` deep.

Ensembles run in fixed blocks of ``BLOCK_PATHS`` paths, each with its own
``SeedSequence`` child keyed by the block index, so statistics do not depend on
how many workers process the blocks.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math
import warnings

import numpy as np

from ._accel import njit, use_numba, worker_count
from .errors import AccuracyError, DomainError, StepFailure, UnsupportedError
from .martingale_kernel import DEFAULT_BUDGET, mart_M
from .process_core import Configuration, ProcessParams, equidistant
from .special_functions import _theta1_pair_nb, theta1_logderiv_real

MODELS = ("elliptic", "trig", "hyper", "dyson")
SINGLE_MODELS = ("ebes", "cot", "bes3")
OBSERVABLES = ("one", "bump", "pattern")
BLOCK_PATHS = 2048
HORIZON_FRAC = 0.9
FAIL_FRACTION = 1e-3


@dataclass(frozen=True)
class SimConfig:
    dt: float
    guard_frac: float = 0.05
    max_halvings: int = 20
    seed: int = 0
    paths: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise DomainError("dt must be positive")
        if not 0 < self.guard_frac < 0.5:
            raise DomainError("guard_frac must lie in (0, 0.5)")
        if self.paths < 1 or self.max_halvings < 0:
            raise DomainError("need paths >= 1 and max_halvings >= 0")


@dataclass(frozen=True)
class ModelParams:
    """Parameters for any of the four models; unused fields are ignored."""

    N: int
    r: float = 1.0
    t_star: float = math.inf
    a: float = 1.0

    def __post_init__(self):
        if self.N < 1 or not self.r > 0 or not self.t_star > 0 or not self.a > 0:
            raise DomainError("need N >= 1 and positive r, t_star, a")


def as_model_params(params):
    if isinstance(params, ModelParams):
        return params
    return ModelParams(params.N, getattr(params, "r", 1.0), getattr(params, "t_star", math.inf), getattr(params, "a", 1.0))


@dataclass
class PathState:
    x: np.ndarray  # unwrapped, ordered
    delta: float = 0.0
    t: float = 0.0
    r: float = 1.0

    @property
    def wrapped(self):
        return np.mod(self.x, 2.0 * math.pi * self.r)

    @property
    def center(self):
        return self.delta + float(np.sum(self.x))

    @classmethod
    def from_configuration(cls, config, r, t=0.0):
        return cls(np.array(config.points, dtype=float), float(config.delta), t, r)


@dataclass
class EnsembleStats:
    edges: np.ndarray
    counts: np.ndarray
    sq_counts: np.ndarray
    paths: int
    failures: list = field(default_factory=list)
    halvings: int = 0
    center_events: int = 0
    outside: int = 0
    obs_sum: float = 0.0
    obs_sq_sum: float = 0.0

    @property
    def widths(self):
        return np.diff(self.edges)

    @property
    def density(self):
        return self.counts / (self.paths * self.widths)

    @property
    def stderr(self):
        """Standard error of ``density`` from the per-path bin counts."""
        n = self.paths
        mean = self.counts / n
        var = np.maximum(self.sq_counts / n - mean * mean, 0.0) * n / max(n - 1, 1)
        return np.sqrt(var / n) / self.widths

    def observable(self):
        """(mean, standard error) of the observable passed to the run."""
        n = self.paths
        mean = self.obs_sum / n
        var = max(self.obs_sq_sum / n - mean * mean, 0.0) * n / max(n - 1, 1)
        return mean, math.sqrt(var / n)


# ---------------------------------------------------------------------------
# drift fields on arrays of shape (paths, N)


@njit(cache=True)
def _elliptic_pairs_nb(X, alpha, T):
    P, N = X.shape
    out = np.zeros((P, N))
    for p in range(P):
        for j in range(N):
            for k in range(j + 1, N):
                th, dth, _ = _theta1_pair_nb((X[p, j] - X[p, k]) / alpha, T)
                a = dth / th / alpha
                out[p, j] += a
                out[p, k] -= a
    return out


_KINDS = {"trig": 0, "hyper": 1, "dyson": 2}


@njit(cache=True)
def _closed_pairs_nb(X, kind, c):
    P, N = X.shape
    out = np.zeros((P, N))
    for p in range(P):
        for j in range(N):
            for k in range(j + 1, N):
                d = X[p, j] - X[p, k]
                if kind == 0:
                    a = 1.0 / (c * math.tan(d / c))
                elif kind == 1:
                    a = 1.0 / (c * math.tanh(d / c))
                else:
                    a = 1.0 / d
                out[p, j] += a
                out[p, k] -= a
    return out


def _pair_matrix(X, func, placeholder):
    d = X[:, :, None] - X[:, None, :]
    idx = np.arange(X.shape[1])
    d[:, idx, idx] = placeholder
    m = func(d)
    m[:, idx, idx] = 0.0
    return m.sum(axis=2)


def _elliptic_A(x, N, r, s_remaining):
    alpha = 2.0 * math.pi * r
    return theta1_logderiv_real(np.asarray(x) / alpha, N * s_remaining / (2.0 * math.pi * r * r)) / alpha


def _check_model(model):
    if model not in MODELS:
        raise DomainError(f"model must be one of {MODELS}")


def _check_elliptic_time(t, params):
    if not t < params.t_star:
        raise DomainError("elliptic model is defined only for t < t_star")


def pair_drift(model, X, t, params):
    """Pairwise interaction part of the drift, shape ``(paths, N)``."""
    _check_model(model)
    params = as_model_params(params)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    r, N = params.r, X.shape[1]
    if model == "elliptic":
        _check_elliptic_time(t, params)
        s = params.t_star - t
        if use_numba():
            return _elliptic_pairs_nb(np.ascontiguousarray(X), 2.0 * math.pi * r, N * s / (2.0 * math.pi * r * r))
        # placeholder pi r is a half period, where A vanishes
        return _pair_matrix(X, lambda d: _elliptic_A(d, N, r, s), math.pi * r)
    c = 2.0 * r if model == "trig" else 2.0 * N * params.a
    if use_numba():
        return _closed_pairs_nb(np.ascontiguousarray(X), _KINDS[model], c)
    if model == "trig":
        return _pair_matrix(X, lambda d: 0.5 / r / np.tan(d / (2.0 * r)), math.pi * r)
    if model == "hyper":
        return _pair_matrix(X, lambda d: 1.0 / (c * np.tanh(d / c)), math.inf)
    return _pair_matrix(X, lambda d: 1.0 / d, math.inf)


def center_term(model, center, t, params):
    """Per-particle drift contributed by the center ``delta + sum(x)``."""
    _check_model(model)
    params = as_model_params(params)
    center = np.asarray(center, dtype=float)
    N, r = params.N, params.r
    if model == "elliptic":
        _check_elliptic_time(t, params)
        return _elliptic_A(center, N, r, params.t_star - t)
    if model == "trig":
        return 0.5 / r / np.tan(center / (2.0 * r))
    if model == "hyper":
        c = 2.0 * N * params.a
        return 1.0 / (c * np.tanh(center / c))
    return np.zeros_like(center)


def drift(model, X, delta, t, params):
    """Full drift vector at time ``t``; rows are paths."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    center = delta + X.sum(axis=1)
    return pair_drift(model, X, t, params) + np.expand_dims(center_term(model, center, t, params), -1)


def center_drift(model, center, t, params):
    """Drift of the center process: ``N`` times the per-particle center term."""
    return as_model_params(params).N * center_term(model, center, t, params)


# ---------------------------------------------------------------------------
# alcove geometry


class _System:
    """Drift, gaps and guard thresholds for one model on arrays (paths, N)."""

    def __init__(self, model, params, delta):
        self.model = model
        self.params = params
        self.delta = delta
        self.L = 2.0 * math.pi * params.r
        self.circle = model in ("elliptic", "trig", "ebes", "cot")
        self.has_center = model in ("elliptic", "trig", "hyper")

    def drift(self, X, t):
        m, p = self.model, self.params
        if m == "ebes":
            _check_elliptic_time(t, p)
            return _elliptic_A(X, 1, p.r, p.t_star - t)
        if m == "cot":
            return 0.5 / p.r / np.tan(X / (2.0 * p.r))
        if m == "bes3":
            return 1.0 / X
        return drift(m, X, self.delta, t, p)

    def gaps(self, X):
        """Alcove gaps followed by the center distances (when present)."""
        if self.model in SINGLE_MODELS:
            return np.concatenate([X, self.L - X], axis=1) if self.circle else X
        parts = [np.diff(X, axis=1)]
        if self.circle:
            parts.append((X[:, :1] + self.L) - X[:, -1:])
        if self.has_center:
            c = self.delta + X.sum(axis=1, keepdims=True)
            parts.append(c)
            if self.circle:
                parts.append(self.L - c)
        return np.concatenate(parts, axis=1)

    @property
    def n_center(self):
        if not self.has_center or self.model in SINGLE_MODELS:
            return 0
        return 2 if self.circle else 1

    def thresholds(self, gaps, guard_frac):
        if self.circle:
            n = max(self.params.N, 1) if self.model not in SINGLE_MODELS else 1
            spacing = self.L / n
            return guard_frac * np.minimum(gaps, spacing)
        return guard_frac * gaps

    def check_state(self, X):
        g = self.gaps(X)
        if np.any(g <= 0):
            raise DomainError("state violates the alcove or center range")


def _propose(system, X, t, h, dW):
    return X + system.drift(X, t) * h + dW


def _accepts(system, X_old, X_new, guard_frac):
    g_old = system.gaps(X_old)
    g_new = system.gaps(X_new)
    ok = g_new > system.thresholds(g_old, guard_frac)
    ok &= np.isfinite(g_new)
    return np.all(ok, axis=1), ok


class _Counters:
    def __init__(self):
        self.halvings = 0
        self.center_events = 0


def _refine(system, x, t, h, dW, cfg, rng, counters, depth=0):
    """Advance one path (row vector) by ``h`` with bridge splitting on rejection."""
    X = x[None, :]
    new = _propose(system, X, t, h, dW[None, :])
    good, mask = _accepts(system, X, new, cfg.guard_frac)
    if good[0]:
        return new[0]
    nc = system.n_center
    if nc and not np.all(mask[0, mask.shape[1] - nc:]):
        counters.center_events += 1
    if depth >= cfg.max_halvings:
        raise StepFailure(f"step halving exhausted at t={t:.6g}", time=t, gap=float(np.min(system.gaps(X))))
    counters.halvings += 1
    first = 0.5 * dW + 0.5 * math.sqrt(h) * rng.standard_normal(dW.shape)
    mid = _refine(system, x, t, 0.5 * h, first, cfg, rng, counters, depth + 1)
    return _refine(system, mid, t + 0.5 * h, 0.5 * h, dW - first, cfg, rng, counters, depth + 1)


def _advance_block(system, X, t, h, dW, cfg, rng, counters, alive, failures, index0):
    """One step for every live row; rejected rows go through ``_refine``."""
    if alive.all():
        rows = np.arange(X.shape[0])
        new = _propose(system, X, t, h, dW)
        good, _ = _accepts(system, X, new, cfg.guard_frac)
        X = np.where(good[:, None], new, X)
    else:
        rows = np.flatnonzero(alive)
        if rows.size == 0:
            return X
        new = _propose(system, X[rows], t, h, dW[rows])
        good, _ = _accepts(system, X[rows], new, cfg.guard_frac)
        X[rows[good]] = new[good]
    for i in rows[~good]:
        try:
            X[i] = _refine(system, X[i], t, h, dW[i], cfg, rng, counters)
        except StepFailure as exc:
            alive[i] = False
            failures.append((index0 + int(i), exc.time, exc.gap))
    return X


def _time_grid(t0, t_end, dt):
    n = max(1, int(math.ceil((t_end - t0) / dt - 1e-9)))
    times = t0 + dt * np.arange(n + 1)
    times[-1] = t_end
    return times


def step(model, state, cfg, params, rng, dW=None):
    """One Euler-Maruyama step of size ``cfg.dt``; returns a new ``PathState``.

    ``dW`` overrides the Brownian increment (used to check the drift alone).
    """
    _check_model(model)
    params = as_model_params(params)
    if model == "elliptic":
        _check_elliptic_time(state.t, params)
        if not state.t + cfg.dt < params.t_star:
            raise DomainError("elliptic step would reach t_star")
    system = _System(model, params, state.delta)
    x = np.asarray(state.x, dtype=float)
    system.check_state(x[None, :])
    if dW is None:
        dW = math.sqrt(cfg.dt) * rng.standard_normal(x.shape)
    new = _refine(system, x, state.t, cfg.dt, np.asarray(dW, dtype=float), cfg, rng, _Counters())
    return PathState(new, state.delta, state.t + cfg.dt, state.r)


# ---------------------------------------------------------------------------
# ensembles


def _block_rng(seed, block):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))


def _blocks(paths):
    return [(b, b * BLOCK_PATHS, min(paths, (b + 1) * BLOCK_PATHS)) for b in range(-(-paths // BLOCK_PATHS))]


def _map_blocks(func, blocks, workers):
    if workers <= 1 or len(blocks) <= 1:
        return [func(b) for b in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, blocks))


def _simulate_block(system, x0, times, cfg, block, record_every=None):
    b, lo, hi = block
    rng = _block_rng(cfg.seed, b)
    P = hi - lo
    X = np.tile(np.asarray(x0, dtype=float), (P, 1))
    alive = np.ones(P, dtype=bool)
    failures, counters = [], _Counters()
    trace = [X.copy()] if record_every else None
    for i in range(len(times) - 1):
        h = times[i + 1] - times[i]
        dW = math.sqrt(h) * rng.standard_normal(X.shape)
        X = _advance_block(system, X, times[i], h, dW, cfg, rng, counters, alive, failures, lo)
        if record_every and ((i + 1) % record_every == 0 or i + 2 == len(times)):
            trace.append(X.copy())
    return X, alive, failures, counters, trace


def default_range(model, x0, t_end, params):
    """Histogram range: the circle for circular models, a padded window otherwise."""
    if model in ("elliptic", "trig"):
        return 0.0, 2.0 * math.pi * params.r
    x0 = np.asarray(x0, dtype=float)
    pad = 4.0 * math.sqrt(len(x0) * t_end) + 1.0
    return float(x0.min() - pad), float(x0.max() + pad)


def _initial_state(model, init, params):
    if isinstance(init, Configuration):
        return np.array(init.points, dtype=float), float(init.delta)
    x = np.sort(np.atleast_1d(np.asarray(init, dtype=float)))
    return x, 0.0


def _abort_if_failing(failures, paths):
    if len(failures) > FAIL_FRACTION * paths:
        t, gap = failures[0][1], failures[0][2]
        raise StepFailure(f"{len(failures)} of {paths} paths failed; first at t={t:.6g}", time=t, gap=gap)


def run_ensemble(model, init, cfg, params, t_end, bins=32, hist_range=None, observable=None,
                 workers=None, horizon_frac=HORIZON_FRAC):
    """Simulate ``cfg.paths`` paths to ``t_end`` and histogram the positions.

    Circular models are histogrammed mod ``2 pi r``. ``observable`` maps an
    array of final (wrapped) positions, shape ``(paths, N)``, to per-path values.
    """
    _check_model(model)
    params = as_model_params(params)
    if model == "elliptic" and not t_end <= horizon_frac * params.t_star:
        raise DomainError(f"elliptic runs stop at {horizon_frac} t_star")
    if not t_end > 0:
        raise DomainError("t_end must be positive")
    x0, delta = _initial_state(model, init, params)
    if len(x0) != params.N:
        raise DomainError(f"need {params.N} initial positions")
    system = _System(model, params, delta)
    system.check_state(x0[None, :])
    times = _time_grid(0.0, t_end, cfg.dt)
    lo, hi = hist_range or default_range(model, x0, t_end, params)
    edges = np.linspace(lo, hi, bins + 1)

    def work(block):
        X, alive, failures, counters, _ = _simulate_block(system, x0, times, cfg, block)
        return _block_summary(system, X[alive], edges, observable), failures, counters

    results = _map_blocks(work, _blocks(cfg.paths), workers or worker_count())
    stats = _merge(edges, results)
    _abort_if_failing(stats.failures, cfg.paths)
    return stats


def _block_summary(system, X, edges, observable=None):
    lo, hi, bins = edges[0], edges[-1], len(edges) - 1
    pos = np.mod(X, system.L) if system.circle else X
    idx = np.floor((pos - lo) / (hi - lo) * bins).astype(int)
    inside = (idx >= 0) & (idx < bins)
    per_path = np.zeros((X.shape[0], bins))
    rows = np.broadcast_to(np.arange(X.shape[0])[:, None], idx.shape)
    np.add.at(per_path, (rows[inside], idx[inside]), 1.0)
    obs = np.asarray(observable(pos), dtype=float) if observable is not None else np.zeros(0)
    return (per_path.sum(0), (per_path**2).sum(0), X.shape[0],
            int(np.sum(~inside)), float(obs.sum()), float((obs**2).sum()))


def _merge(edges, results):
    bins = len(edges) - 1
    stats = EnsembleStats(edges, np.zeros(bins), np.zeros(bins), 0)
    for (c, c2, n, out, o1, o2), fails, counters in results:
        stats.counts += c
        stats.sq_counts += c2
        stats.paths += n
        stats.failures.extend(fails)
        stats.halvings += counters.halvings
        stats.center_events += counters.center_events
        stats.outside += out
        stats.obs_sum += o1
        stats.obs_sq_sum += o2
    return stats


def coupled_refinement(model, init, cfg, params, t_end, factor=10, bins=32, hist_range=None, workers=None):
    """Histograms at step ``cfg.dt`` and ``cfg.dt/factor`` driven by one Brownian path.

    The coarse increments are sums of the fine ones, so the difference of the
    two histograms isolates the discretization effect from sampling noise.
    """
    _check_model(model)
    params = as_model_params(params)
    if model == "elliptic" and not t_end <= HORIZON_FRAC * params.t_star:
        raise DomainError(f"elliptic runs stop at {HORIZON_FRAC} t_star")
    x0, delta = _initial_state(model, init, params)
    system = _System(model, params, delta)
    system.check_state(x0[None, :])
    n = max(1, int(round(t_end / cfg.dt)))
    if not math.isclose(n * cfg.dt, t_end, rel_tol=1e-9):
        raise DomainError("t_end must be a multiple of dt")
    h = cfg.dt / factor
    lo, hi = hist_range or default_range(model, x0, t_end, params)
    edges = np.linspace(lo, hi, bins + 1)

    def work(block):
        b, first, last = block
        rng = _block_rng(cfg.seed, b)
        P = last - first
        coarse = np.tile(x0, (P, 1))
        fine = coarse.copy()
        alive_c, alive_f = np.ones(P, dtype=bool), np.ones(P, dtype=bool)
        fails_c, fails_f, cnt_c, cnt_f = [], [], _Counters(), _Counters()
        for i in range(n):
            t = i * cfg.dt
            dW = math.sqrt(h) * rng.standard_normal((factor,) + coarse.shape)
            for j in range(factor):
                fine = _advance_block(system, fine, t + j * h, h, dW[j], cfg, rng, cnt_f, alive_f, fails_f, first)
            coarse = _advance_block(system, coarse, t, cfg.dt, dW.sum(axis=0), cfg, rng, cnt_c, alive_c, fails_c, first)
        return ((_block_summary(system, coarse[alive_c], edges), fails_c, cnt_c),
                (_block_summary(system, fine[alive_f], edges), fails_f, cnt_f))

    results = _map_blocks(work, _blocks(cfg.paths), workers or worker_count())
    out = tuple(_merge(edges, [r[i] for r in results]) for i in range(2))
    for stats in out:
        _abort_if_failing(stats.failures, cfg.paths)
    return out


# ---------------------------------------------------------------------------
# single-particle reductions


@dataclass
class SinglePaths:
    times: np.ndarray
    values: np.ndarray  # (paths, len(times))
    failures: list = field(default_factory=list)

    @property
    def final(self):
        return self.values[:, -1]


def simulate_single(model, r, t_star, x0, cfg, t_end, record_every=1, workers=None):
    """One-particle paths for ``ebes`` (elliptic BES(3)), ``cot`` or ``bes3``.

    Failed paths are dropped from ``values`` and listed in ``failures``.
    """
    if model not in SINGLE_MODELS:
        raise DomainError(f"model must be one of {SINGLE_MODELS}")
    params = ModelParams(1, r if r is not None else 1.0, t_star if t_star is not None else math.inf)
    if model == "ebes":
        if t_star is None or not t_end < params.t_star:
            raise DomainError("ebes needs t_end < t_star")
    system = _System(model, params, 0.0)
    x0 = np.array([float(x0)])
    if model != "bes3" and r is None:
        raise DomainError(f"{model} needs a radius")
    system.check_state(x0[None, :])
    times = _time_grid(0.0, t_end, cfg.dt)

    def work(block):
        X, alive, failures, _, trace = _simulate_block(system, x0, times, cfg, block, record_every)
        return np.stack([tr[:, 0] for tr in trace], axis=1)[alive], failures

    results = _map_blocks(work, _blocks(cfg.paths), workers or worker_count())
    keep = np.arange(0, len(times), record_every)
    if keep[-1] != len(times) - 1:
        keep = np.append(keep, len(times) - 1)
    failures = [f for _, fs in results for f in fs]
    _abort_if_failing(failures, cfg.paths)
    return SinglePaths(times[keep], np.concatenate([v for v, _ in results], axis=0), failures)


# ---------------------------------------------------------------------------
# determinantal martingale estimator


def bump(x, r, center=None, kappa=2.0):
    """Smooth periodic bump ``exp(kappa (cos((x - c)/r) - 1))``."""
    c = math.pi * r / 2.0 if center is None else center
    return np.exp(kappa * (np.cos((np.asarray(x) - c) / r) - 1.0))


def sector_pattern(x, r):
    """1 when each of the N equal sectors holds exactly one particle."""
    x = np.atleast_2d(x)
    N = x.shape[1]
    sector = np.floor(np.mod(x, 2.0 * math.pi * r) / (2.0 * math.pi * r) * N).astype(int)
    sector = np.minimum(sector, N - 1)
    return np.all(np.sort(sector, axis=1) == np.arange(N), axis=1).astype(float)


def observable_function(name, r):
    """Per-path observable on wrapped positions ``(paths, N)``."""
    if name == "one":
        return lambda x: np.ones(np.atleast_2d(x).shape[0])
    if name == "bump":
        return lambda x: bump(x, r).sum(axis=1)
    if name == "pattern":
        return lambda x: sector_pattern(x, r)
    if callable(name):
        return name
    raise DomainError(f"observable must be one of {OBSERVABLES} or callable")


def martingale_matrix(xi, T, W, params, method="auto", budget=DEFAULT_BUDGET):
    """``M_k(T, W_j)`` for each row of ``W``; shape ``(paths, N, N)``."""
    W = np.atleast_2d(W)
    flat = W.reshape(-1)
    cols = []
    for k in range(len(xi.points)):
        if method == "auto":
            try:
                col = mart_M(xi, k, T, flat, params, method="series", budget=budget)
            except (AccuracyError, UnsupportedError):
                col = mart_M(xi, k, T, flat, params, method="quadrature", budget=budget)
        else:
            col = mart_M(xi, k, T, flat, params, method=method, budget=budget)
        cols.append(np.asarray(col).reshape(W.shape))
    return np.stack(cols, axis=-1)


def dmr_samples(T, cfg, params, init=None, observable="one", m_method="auto", workers=None):
    """Per-path observable values and martingale weights.

    Each atom runs as an independent Brownian motion; positions are wrapped
    onto the circle and, for odd N, every wrap flips the path sign.
    """
    if not isinstance(params, ProcessParams):
        params = ProcessParams(params.N, params.r, params.t_star)
    if not 0 < T < params.t_star:
        raise DomainError("need 0 < T < t_star")
    xi = init if init is not None else equidistant(params.N, params.r)
    F = observable_function(observable, params.r)
    v = np.array(xi.points, dtype=float)
    L = params.L
    times = _time_grid(0.0, T, cfg.dt)
    odd = params.N % 2 == 1

    def work(block):
        b, lo, hi = block
        rng = _block_rng(cfg.seed, b)
        X = np.tile(v, (hi - lo, 1))
        winding = np.zeros(X.shape, dtype=np.int64)
        for i in range(len(times) - 1):
            h = times[i + 1] - times[i]
            old = np.floor(X / L)
            X = X + math.sqrt(h) * rng.standard_normal(X.shape)
            winding += (np.floor(X / L) - old).astype(np.int64)
        W = np.mod(X, L)
        sign = np.where(np.sum(winding, axis=1) % 2 == 0, 1.0, -1.0) if odd else np.ones(X.shape[0])
        weights = sign * np.linalg.det(martingale_matrix(xi, T, W, params, m_method))
        return np.asarray(F(W), dtype=float), weights

    results = _map_blocks(work, _blocks(cfg.paths), workers or worker_count())
    return np.concatenate([f for f, _ in results]), np.concatenate([w for _, w in results])


def dmr_estimate(observable, T, cfg, params, init=None, m_method="auto", workers=None):
    """(estimate, standard error) of ``E[F]`` through the martingale weights."""
    f, w = dmr_samples(T, cfg, params, init, observable, m_method, workers)
    vals = f * w
    est = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else math.inf
    if se > abs(est):
        warnings.warn(f"martingale weights blow up the variance: estimate {est:.3g}, stderr {se:.3g}",
                      RuntimeWarning, stacklevel=2)
    return est, se
