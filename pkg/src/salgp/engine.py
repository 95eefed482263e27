"""The safe-active-learning loop: initial design, then iterate
select -> measure -> append -> retrain, with a jump-back protocol for
lagged-input systems.

One run is single-threaded and stateful; runs with different seeds are
independent and reproducible: the record list is a pure function of
(config, system, seed).  Per-step observation noise is drawn from a
stream indexed by (seed, step), so runs that share a seed see identical
noise at identical step counts regardless of the acquisition used, so
paired-seed comparisons stay paired.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import qmc

from .acquisition import Entropy, TimspeNx, TimspeTimeInput, build_workspace
from .errors import DimensionMismatchError
from .gp import GpModel, HyperPriors
from .geometry import Box
from .measures import DiracPoint, indicator_box, product_time_space
from .safeopt import EllipseStep, SafetyConfig, select_next
from .testbeds import RailSurrogate, random_safe_trajectory

ACQUISITIONS = ("entropy", "imspe", "timspe")


@dataclass
class SalConfig:
    """Parameters of one safe-active-learning run."""

    budget: int
    n_initial: int = 8
    retrain_steps: int = 30
    initial_train_steps: int = 200
    acquisition: str = "timspe"
    time_window: float = 10.0
    alpha: float = 0.977
    seed: int = 0
    eval_every: int = 0  # 0: ten evenly spaced checkpoints
    grid_resolution: int = 41
    shared_safety_gp: bool = True
    step_radius: float = 0.1  # lagged-input runs, scaled coordinates
    test_trajectory_length: int = 256
    domain: Optional[Box] = None
    initial_safe_region: Optional[Box] = None

    def __post_init__(self):
        if self.budget < 0:
            raise ValueError("budget must be non-negative")
        if self.n_initial < 1:
            raise ValueError("n_initial must be at least 1")
        if self.acquisition not in ACQUISITIONS:
            raise ValueError(f"acquisition must be one of {ACQUISITIONS}")

    def resolved_domain(self, system):
        return self.domain if self.domain is not None else system.domain

    def resolved_region(self, system):
        region = (
            self.initial_safe_region
            if self.initial_safe_region is not None
            else system.initial_safe_region
        )
        if not self.resolved_domain(system).contains_box(region):
            raise ValueError("initial safe region must lie inside the domain")
        return region

    def checkpoint_interval(self):
        if self.eval_every > 0:
            return self.eval_every
        return max(1, self.budget // 10)


@dataclass
class ExperimentRecord:
    """One measurement of a run, in raw system coordinates."""

    step: int
    time: float
    phase: str  # initial | acquisition | infeasible_fallback | jump_back
    inputs: tuple
    target: float
    safety_value: float  # ground-truth indicator, >= 0 means safe
    was_safe: bool
    acquisition_value: Optional[float] = None
    rmse_safe_area: Optional[float] = None


def initial_design(cfg, system=None):
    """First ``n_initial`` points of an (unscrambled) Sobol sequence,
    scaled into the initially safe region; deterministic."""
    region = cfg.resolved_region(system) if system is not None else cfg.initial_safe_region
    if region is None:
        raise ValueError("no initial safe region available")
    sampler = qmc.Sobol(d=region.dim, scramble=False)
    unit = sampler.random(cfg.n_initial)
    return region.lower + region.widths * unit


def jump_back(current, region, step_radius):
    """Next input block while steering back into the initially safe region.

    Moves one step radius along the straight line toward the region
    center (both in scaled coordinates); a point already inside the
    region stays put.
    """
    current = np.asarray(current, dtype=float)
    slack = 1e-9 * region.widths
    if region.contains(current, slack=slack):
        return current.copy()
    direction = region.center - current
    dist = float(np.linalg.norm(direction))
    if dist <= step_radius:
        return region.center.copy()
    return current + direction * (step_radius / dist)


def _noise(seed, step, noise_std):
    if noise_std == 0.0:
        return 0.0
    return float(
        np.random.default_rng([seed, 2, step]).normal(loc=0.0, scale=noise_std)
    )


def _step_seed(seed, step):
    return seed * 1000003 + step


def run(cfg, system):
    """Execute one safe-active-learning run and return its records."""
    if isinstance(system, RailSurrogate) or hasattr(system, "lag"):
        return _run_lagged(cfg, system)
    return _run_time_varying(cfg, system)


# -- systems with a time input ----------------------------------------------


def _acquisition_spec(cfg, domain, t):
    space = indicator_box(domain.lower, domain.upper)
    if cfg.acquisition == "entropy":
        return Entropy(current_time=float(t))
    if cfg.acquisition == "imspe":
        time_measure = DiracPoint([float(t)])
    else:
        time_measure = indicator_box([float(t)], [float(t) + cfg.time_window])
    return TimspeTimeInput(product_time_space(time_measure, space), float(t))


def _rmse_on_grid(model, system, t, resolution):
    from .testbeds import safe_area_test_grid

    pts, targets = safe_area_test_grid(system, t, resolution)
    if pts.shape[0] == 0:
        return None
    queries = np.hstack([np.full((pts.shape[0], 1), float(t)), pts])
    means, _ = model.posterior_batch(queries)
    return float(np.sqrt(np.mean((means - targets) ** 2)))


def _run_time_varying(cfg, system):
    domain = cfg.resolved_domain(system)
    region = cfg.resolved_region(system)
    d_space = domain.dim
    priors = HyperPriors.time_space(d_space)
    records = []

    design = initial_design(cfg, system)
    X = np.hstack([np.arange(cfg.n_initial, dtype=float)[:, None], design])
    y = np.empty(cfg.n_initial)
    for i in range(cfg.n_initial):
        t, x = float(X[i, 0]), design[i]
        clean = system.evaluate(t, x)
        y[i] = clean + _noise(cfg.seed, i, system.noise_std)
        indicator = system.safety_indicator(t, x)
        records.append(
            ExperimentRecord(
                step=i,
                time=t,
                phase="initial",
                inputs=tuple(x.tolist()),
                target=float(y[i]),
                safety_value=float(indicator),
                was_safe=bool(indicator >= 0.0),
            )
        )

    model = GpModel(priors.initial_kernel(), priors.mean_mean, X, y)
    model.fit_cholesky()
    model.train_map(priors, cfg.initial_train_steps, initial=True)

    interval = cfg.checkpoint_interval()
    prev_x = design[-1]
    for k in range(1, cfg.budget + 1):
        t = float(cfg.n_initial - 1 + k)
        step = cfg.n_initial - 1 + k
        spec = _acquisition_spec(cfg, domain, t)
        ws = build_workspace(model, spec)
        scfg = SafetyConfig(model, system.threshold, cfg.alpha)
        x = select_next(ws, scfg, None, domain, _step_seed(cfg.seed, k), previous=prev_x)
        if x is None:
            phase = "infeasible_fallback"
            x = np.asarray(prev_x, dtype=float)
            acq_value = None
        else:
            phase = "acquisition"
            acq_value = _acquisition_value(ws, x)
        clean = system.evaluate(t, x)
        target = clean + _noise(cfg.seed, step, system.noise_std)
        indicator = system.safety_indicator(t, x)
        model.add_observation(np.concatenate([[t], x]), target)
        model.fit_cholesky()
        model.train_map(priors, cfg.retrain_steps, initial=False)
        rmse = None
        if k % interval == 0 or k == cfg.budget:
            rmse = _rmse_on_grid(model, system, t, cfg.grid_resolution)
        records.append(
            ExperimentRecord(
                step=step,
                time=t,
                phase=phase,
                inputs=tuple(np.asarray(x).tolist()),
                target=float(target),
                safety_value=float(indicator),
                was_safe=bool(indicator >= 0.0),
                acquisition_value=acq_value,
                rmse_safe_area=rmse,
            )
        )
        prev_x = x
    return records


def _acquisition_value(ws, x):
    try:
        if ws.is_entropy:
            return float(ws.evaluate_entropy(x))
        return float(ws.evaluate(x))
    except Exception:
        return None


# -- lagged-input systems -----------------------------------------------------


def _run_lagged(cfg, system):
    lag = system.lag
    d_base = system.domain.dim
    scale = np.asarray(system.step_semi_axes, dtype=float) / cfg.step_radius
    domain_s = system.domain.scaled(scale)
    region_s = cfg.resolved_region(system).scaled(scale)
    if cfg.domain is not None:
        domain_s = cfg.domain.scaled(scale)
    dim = lag * d_base

    steady = np.tile(system.initial_safe_region.center, (lag, 1))
    priors = HyperPriors.lagged_inputs(dim, mean_level=system.evaluate(steady))

    design_s = initial_design(cfg, system) / scale

    records = []
    blocks = [design_s[0].copy() for _ in range(lag)]  # steady start
    contexts = []
    targets = []
    for i in range(cfg.n_initial):
        blocks = [design_s[i].copy()] + blocks[:-1]
        ctx_s = np.vstack(blocks)
        raw = ctx_s * scale
        clean = system.evaluate(raw)
        yv = clean + _noise(cfg.seed, i, system.noise_std)
        indicator = system.safety_indicator(raw)
        contexts.append(ctx_s.ravel())
        targets.append(yv)
        records.append(
            ExperimentRecord(
                step=i,
                time=float(i),
                phase="initial",
                inputs=tuple(raw[0].tolist()),
                target=float(yv),
                safety_value=float(indicator),
                was_safe=bool(indicator >= 0.0),
            )
        )

    model = GpModel(
        priors.initial_kernel(), priors.mean_mean, np.array(contexts), np.array(targets)
    )
    model.fit_cholesky()
    model.train_map(priors, cfg.initial_train_steps, initial=True)

    test_contexts, test_values = random_safe_trajectory(
        system, cfg.test_trajectory_length, np.random.default_rng([cfg.seed, 3])
    )
    test_inputs = (test_contexts / scale).reshape(cfg.test_trajectory_length, dim)

    interval = cfg.checkpoint_interval()
    jump_back_mode = False
    space_measure = indicator_box(domain_s.lower, domain_s.upper)
    for k in range(1, cfg.budget + 1):
        step = cfg.n_initial - 1 + k
        history = np.vstack(blocks[: lag - 1]) if lag > 1 else np.zeros((0, d_base))
        current = blocks[0]
        acq_value = None
        if jump_back_mode:
            x = jump_back(current, region_s, cfg.step_radius)
            phase = "jump_back"
        else:
            if cfg.acquisition == "entropy":
                spec = Entropy(history=history)
            else:
                # imspe and timspe coincide for lagged-input models
                spec = TimspeNx(space_measure, lag, history)
            ws = build_workspace(model, spec)
            scfg = SafetyConfig(model, system.threshold, cfg.alpha)
            constraint = EllipseStep(np.full(d_base, cfg.step_radius), current)
            x = select_next(
                ws, scfg, constraint, domain_s, _step_seed(cfg.seed, k), previous=current
            )
            if x is None:
                phase = "infeasible_fallback"
                x = current.copy()
            else:
                phase = "acquisition"
                acq_value = _acquisition_value(ws, x)
        blocks = [np.asarray(x, dtype=float)] + blocks[:-1]
        ctx_s = np.vstack(blocks)
        raw = ctx_s * scale
        clean = system.evaluate(raw)
        target = clean + _noise(cfg.seed, step, system.noise_std)
        indicator = system.safety_indicator(raw)
        was_safe = bool(indicator >= 0.0)
        if jump_back_mode and region_s.contains(blocks[0], slack=1e-9 * region_s.widths):
            jump_back_mode = False
        if not was_safe:
            jump_back_mode = True
        model.add_observation(ctx_s.ravel(), target)
        model.fit_cholesky()
        model.train_map(priors, cfg.retrain_steps, initial=False)
        rmse = None
        if k % interval == 0 or k == cfg.budget:
            means, _ = model.posterior_batch(test_inputs)
            rmse = float(np.sqrt(np.mean((means - test_values) ** 2)))
        records.append(
            ExperimentRecord(
                step=step,
                time=float(step),
                phase=phase,
                inputs=tuple(raw[0].tolist()),
                target=float(target),
                safety_value=float(indicator),
                was_safe=was_safe,
                acquisition_value=acq_value,
                rmse_safe_area=rmse,
            )
        )
    return records
