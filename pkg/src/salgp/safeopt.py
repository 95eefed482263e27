"""Safety probability and safety-constrained acquisition optimization.

A candidate is safe when the safety GP predicts the hazardous quantity two
standard deviations below the threshold: ``mean + 2 * std < c``.  For a
Gaussian posterior this is exactly the probabilistic condition
``P(value < c) > Phi(2) ~= 0.97725``.

``select_next`` maximizes (entropy) or minimizes (integrated-variance
criteria) the acquisition over ``domain`` intersected with an optional
step constraint, by multistart projected gradient descent with an exact
penalty on the safety constraint.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError
from .gp import GpModel

_FEAS_SLACK = 1e-8
_MAX_ITER = 200
_TOL = 1e-4


def _phi(z):
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


@dataclass
class SafetyConfig:
    """Safety GP plus threshold for the hazardous quantity."""

    safety_model: GpModel
    threshold: float
    alpha: float = 0.977
    constraint_form: str = "mean_plus_two_sigma"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.constraint_form != "mean_plus_two_sigma":
            raise ValueError(f"unknown constraint form {self.constraint_form!r}")


def safety_probability(cfg, candidate):
    """Probability that the hazardous quantity stays below the threshold.

    ``Phi((c - mean) / std)`` of the safety GP posterior; degenerate
    (near-zero-variance) posteriors resolve to 0 or 1 by the sign of
    ``c - mean`` without dividing.
    """
    mean, var = cfg.safety_model.posterior(candidate)
    margin = cfg.threshold - mean
    if var < 1e-18:
        return 1.0 if margin > 0 else 0.0
    return _phi(margin / math.sqrt(var))


class BoxStep:
    """Restrict the next input to a fixed box."""

    def __init__(self, lower, upper):
        self.lower = np.atleast_1d(np.asarray(lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if np.any(self.lower >= self.upper):
            raise ValueError("BoxStep requires lower < upper")

    def project(self, x):
        return np.clip(x, self.lower, self.upper)

    def contains(self, x, slack):
        w = self.upper - self.lower
        return bool(
            np.all(x >= self.lower - slack * w) and np.all(x <= self.upper + slack * w)
        )

    def sample(self, rng):
        return self.lower + (self.upper - self.lower) * rng.random(self.lower.size)


class EllipseStep:
    """Restrict the next input to an axis-parallel ellipse around the
    previous input."""

    def __init__(self, semi_axes, previous):
        self.semi_axes = np.atleast_1d(np.asarray(semi_axes, dtype=float))
        self.previous = np.atleast_1d(np.asarray(previous, dtype=float))
        if np.any(self.semi_axes <= 0):
            raise ValueError("semi-axes must be positive")
        if self.semi_axes.shape != self.previous.shape:
            raise DimensionMismatchError("semi_axes and previous must match")

    def _normalized(self, x):
        return (x - self.previous) / self.semi_axes

    def project(self, x):
        # Radial retraction in normalized coordinates; inexpensive and
        # deterministic (not the metric projection, which the projected
        # gradient heuristic does not need).
        u = self._normalized(x)
        r = np.linalg.norm(u)
        if r <= 1.0:
            return np.asarray(x, dtype=float)
        return self.previous + self.semi_axes * (u / r)

    def contains(self, x, slack):
        return bool(np.linalg.norm(self._normalized(x)) <= 1.0 + slack)

    def sample(self, rng):
        d = self.previous.size
        u = rng.normal(size=d)
        u /= np.linalg.norm(u)
        u *= rng.random() ** (1.0 / d)
        return self.previous + self.semi_axes * u


def _project_region(x, domain, step, rounds=32):
    """Map a point into domain-and-step by alternating projections."""
    x = domain.clip(x)
    if step is None:
        return x
    for _ in range(rounds):
        x2 = domain.clip(step.project(x))
        if np.allclose(x2, x, rtol=0.0, atol=1e-14):
            return x2
        x = x2
    return x


def _region_contains(x, domain, step):
    ok = domain.contains(x, slack=_FEAS_SLACK * domain.widths)
    if ok and step is not None:
        ok = step.contains(x, slack=_FEAS_SLACK)
    return ok


def _region_sample(rng, domain, step, tries=1000):
    for _ in range(tries):
        x = step.sample(rng) if step is not None else domain.sample(rng)
        if domain.contains(x):
            return x
    return None


def select_next(ws, cfg, step, domain, rng_seed, previous=None):
    """Safety-constrained multistart optimization of the acquisition.

    Runs three projected-gradient starts (two more if some fail) and
    returns the best feasible local optimum, ties broken by the lowest run
    index; returns None when no feasible point was found.  Deterministic
    given ``rng_seed``.
    """
    if domain.dim != ws.candidate_dim:
        raise DimensionMismatchError("domain does not match the candidate space")
    if previous is None and step is not None and hasattr(step, "previous"):
        previous = step.previous

    def safety_gap(x):
        full = ws.embed(x)
        mean, var, dmean, dvar = cfg.safety_model.posterior_with_gradient(full)
        std = math.sqrt(max(var, 1e-18))
        g = mean + 2.0 * std - cfg.threshold
        dg = ws._grad_slice(dmean + dvar / std)
        return g, dg

    results = []
    runs_done = 0
    budget = 3
    while runs_done < budget:
        rng = np.random.default_rng([int(rng_seed), runs_done])
        x0 = _initializer(rng, domain, step, safety_gap, previous)
        res = _penalty_descent(ws, safety_gap, domain, step, x0)
        if res is None:
            # a failed start earns an extra restart, capped at five total
            if budget < 5:
                budget += 1
        else:
            results.append((res[1], runs_done, res[0]))
        runs_done += 1
    if not results:
        return None
    results.sort(key=lambda r: (r[0], r[1]))
    return results[0][2]


def _initializer(rng, domain, step, safety_gap, previous):
    best = None
    for _ in range(1000):
        x = _region_sample(rng, domain, step)
        if x is None:
            break
        g, _ = safety_gap(x)
        if g < 0.0:
            return x
        if best is None or g < best[0]:
            best = (g, x)
    if previous is not None:
        return _project_region(np.asarray(previous, dtype=float), domain, step)
    if best is not None:
        return best[1]
    return _project_region(domain.center, domain, step)


def _penalty_descent(ws, safety_gap, domain, step, x0):
    """Projected gradient descent on acquisition + exact safety penalty.

    Returns ``(x, value)`` for the best feasible iterate, or None if no
    iterate was feasible.
    """
    scale = float(np.min(domain.widths))
    x = _project_region(np.asarray(x0, dtype=float), domain, step)

    def f_and_grad(z):
        return ws.objective(z), ws.objective_gradient(z)

    fx, gfx = f_and_grad(x)
    g0, dg0 = safety_gap(x)
    rho = 100.0 * max(1.0, abs(fx) if np.isfinite(fx) else 1.0)

    def merit(fv, gv):
        return fv + rho * max(0.0, gv)

    best = None
    if np.isfinite(fx) and g0 <= _FEAS_SLACK and _region_contains(x, domain, step):
        best = (x.copy(), fx)

    Fx = merit(fx, g0)
    t = 0.25
    for _ in range(_MAX_ITER):
        grad = gfx + (rho * dg0 if g0 > 0.0 else 0.0)
        gnorm = np.linalg.norm(grad)
        if not np.isfinite(gnorm) or gnorm < 1e-14:
            break
        direction = -grad / gnorm
        moved = False
        while t > 1e-12:
            cand = _project_region(x + t * scale * direction, domain, step)
            fc, gc = f_and_grad(cand)
            gsafe, dgsafe = safety_gap(cand)
            Fc = merit(fc, gsafe)
            if np.isfinite(Fc) and Fc < Fx - 1e-10:
                if gsafe <= _FEAS_SLACK and _region_contains(cand, domain, step):
                    if best is None or fc < best[1]:
                        best = (cand.copy(), fc)
                step_len = np.linalg.norm(cand - x)
                x, fx, Fx, g0, dg0, gfx = cand, fc, Fc, gsafe, dgsafe, gc
                moved = True
                t = min(t * 2.0, 1.0)
                if step_len < _TOL * scale * 1e-2:
                    t = -1.0  # converged
                break
            t *= 0.5
        if not moved or t < 0:
            break
    return None if best is None else best
