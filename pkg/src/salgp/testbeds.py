"""Ground-truth systems driven by the active-learning loop.

Two time-varying synthetic systems (a rotating seasonal landscape and a
growing drift landscape) on the spatial domain [-4, 4]^2, both safe where
the response is negative, plus a lagged-input surrogate with the geometry
of an engine rail-pressure experiment.  The surrogate is a synthetic
response built from saturating nonlinearities; it is NOT a physical
rail-pressure model, only calibrated so that the initially-known safe
region is safe (including its internal dynamics) while aggressive
excursions toward the domain corner exceed the threshold.
"""
from __future__ import annotations

import math

import numpy as np

from .geometry import Box


def mccormick(u, v):
    """sin(u+v) + (u-v)^2 - 1.5u + 2.5v + 1."""
    return np.sin(u + v) + (u - v) ** 2 - 1.5 * u + 2.5 * v + 1.0


def _half_rotation(angle, x1, x2):
    """Apply half a rotation matrix: 0.5 * R(angle) @ (x1, x2)."""
    c, s = np.cos(angle), np.sin(angle)
    return 0.5 * (c * x1 - s * x2), 0.5 * (s * x1 + c * x2)


def eval_seasonal(a, t, x1, x2):
    """Seasonal landscape: McCormick under a slowly oscillating rotation.

    ``a`` sets the strength (speed) of the seasonal change; ``a = 0`` is
    time invariant.
    """
    angle = 0.5 * np.sin(a * t / 10.0)
    u, v = _half_rotation(angle, x1, x2)
    return -1.0 + 0.1 * mccormick(u, v)


def modified_rosenbrock(x1, x2):
    """8*|x1^2 - x2| + (1 - x1)^2."""
    return 8.0 * np.abs(x1**2 - x2) + (1.0 - x1) ** 2


def eval_drift(t, x1, x2):
    """Drift landscape: a valley whose depth and extent shrink with time."""
    prefactor = ((2.0 + np.sin(t / 2.0)) * t + 1.0) / 1000.0
    return prefactor * (modified_rosenbrock(x1, x2) - 25.0 + t / 10.0)


class TimeVaryingSystem:
    """Scalar response over (time, x1, x2); safe where the response is
    below ``threshold``."""

    domain = Box([-4.0, -4.0], [4.0, 4.0])
    initial_safe_region = Box([-0.5, -1.0], [0.5, 1.0])
    threshold = 0.0

    def __init__(self, noise_std=0.01):
        self.noise_std = float(noise_std)

    def evaluate(self, t, x):
        raise NotImplementedError

    def safety_indicator(self, t, x):
        """Non-negative exactly when the configuration is safe."""
        return self.threshold - self.evaluate(t, x)

    def is_safe(self, t, x):
        return self.safety_indicator(t, x) >= 0.0


class SeasonalSystem(TimeVaryingSystem):
    def __init__(self, strength=5.0, noise_std=0.01):
        super().__init__(noise_std)
        self.strength = float(strength)

    def evaluate(self, t, x):
        return float(eval_seasonal(self.strength, t, x[0], x[1]))


class DriftSystem(TimeVaryingSystem):
    def evaluate(self, t, x):
        return float(eval_drift(t, x[0], x[1]))


def safe_area_test_grid(system, t, resolution=41):
    """Regular spatial grid filtered to ground-truth-safe points at ``t``.

    Returns ``(points, targets)`` with noiseless targets; both empty when
    nothing on the grid is safe at that time.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2 per dimension")
    axes = [
        np.linspace(lo, hi, resolution)
        for lo, hi in zip(system.domain.lower, system.domain.upper)
    ]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    targets = np.array([system.evaluate(t, p) for p in pts])
    safe = targets < system.threshold
    return pts[safe], targets[safe]


# -- lagged-input surrogate -------------------------------------------------


class RailSurrogate:
    """Synthetic lagged-input response with rail-pressure experiment
    geometry.

    The response depends on the current and three previous input blocks
    (speed, actuation); the second actuation lag is intentionally unused.
    Saturating level terms plus two excursion terms keep every trajectory
    inside the initial safe region below the threshold while steady
    operation at the far domain corner exceeds it.
    """

    lag = 4
    domain = Box([1000.0, 0.0], [4000.0, 60.0])
    initial_safe_region = Box([2093.0, 14.36], [2414.0, 23.0])
    threshold = 18.0
    step_semi_axes = np.array([80.3, 2.17])

    # response coefficients (offset, speed lags, actuation lags, cross,
    # speed/actuation excursion)
    coeffs = {
        "c0": 16.0,
        "a": (1.4, 0.8, 0.6, 0.4),
        "b": (1.1, 0.6, 0.0, 0.4),
        "cross": 1.5,
        "e_n": 1.0,
        "e_v": 1.5,
    }

    def __init__(self, noise_std=0.05):
        self.noise_std = float(noise_std)

    @staticmethod
    def _sat_speed(n):
        return math.tanh((n - 2500.0) / 900.0)

    @staticmethod
    def _sat_act(v):
        return math.tanh((v - 20.0) / 25.0)

    def evaluate(self, history):
        """Response for ``history`` of shape (lag, 2), newest block first."""
        history = np.asarray(history, dtype=float)
        if history.shape != (self.lag, 2):
            raise ValueError(f"history must have shape ({self.lag}, 2)")
        c = self.coeffs
        sn = [self._sat_speed(n) for n in history[:, 0]]
        sv = [self._sat_act(v) for v in history[:, 1]]
        out = c["c0"]
        out += sum(ai * sni for ai, sni in zip(c["a"], sn))
        out += sum(bi * svi for bi, svi in zip(c["b"], sv))
        out += c["cross"] * sn[0] * sv[0]
        out += c["e_n"] * math.tanh((history[0, 0] - history[1, 0]) / 600.0) ** 2
        out += c["e_v"] * math.tanh((history[0, 1] - history[1, 1]) / 12.0) ** 2
        return float(out)

    def safety_indicator(self, history):
        return self.threshold - self.evaluate(history)

    def is_safe(self, history):
        return self.safety_indicator(history) >= 0.0


def random_safe_trajectory(system, length, rng, max_tries=200):
    """Rejection-sampled safe trajectory for test data.

    Starts steady at the center of the initially safe region; each step
    proposes a random point inside the step ellipse (clipped to the
    domain) until the resulting response is safe, falling back to a step
    toward the region center.  Returns ``(contexts, values)`` where
    ``contexts`` has shape (length, lag, 2), newest block first.
    """
    center = system.initial_safe_region.center
    blocks = [center.copy() for _ in range(system.lag)]
    contexts = np.empty((length, system.lag, 2))
    values = np.empty(length)
    semi = system.step_semi_axes
    for i in range(length):
        current = blocks[0]
        accepted = None
        for _ in range(max_tries):
            u = rng.normal(size=2)
            u /= np.linalg.norm(u)
            u *= rng.random() ** 0.5
            cand = system.domain.clip(current + semi * u)
            hist = np.vstack([cand, *blocks[:-1]])
            if system.evaluate(hist) < system.threshold:
                accepted = (cand, hist)
                break
        if accepted is None:
            direction = center - current
            norm = np.linalg.norm(direction / semi)
            if norm > 1.0:
                direction = direction / norm
            cand = system.domain.clip(current + direction)
            hist = np.vstack([cand, *blocks[:-1]])
            accepted = (cand, hist)
        cand, hist = accepted
        blocks = [cand] + blocks[:-1]
        contexts[i] = hist
        values[i] = system.evaluate(hist)
    return contexts, values
