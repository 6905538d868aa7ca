"""Coarse-grained observables: lattice distribution, mean cell, current.

The same first-difference current contract serves the quantum run
(``current``) and the classical Monte Carlo (``classical.classical_current``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from multibaker.errors import InvalidParameterError, InvariantViolation
from multibaker.hilbert import MapParams
from multibaker.qlattice import LatticeWavefunction, MixedState, evolve, initial_state

PROB_TOL = 1e-10


@dataclass(frozen=True)
class LatticeDistribution:
    """Coarse-grained probability ``P(m, t)`` over the cells ``m_min, m_min+1, ...``."""

    m_min: int
    probs: np.ndarray
    time: int = 0

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise InvalidParameterError("probs must be a non-empty 1-d array")
        if np.any(probs < 0):
            raise InvalidParameterError("negative probability")
        if abs(probs.sum() - 1.0) > PROB_TOL:
            raise InvalidParameterError(f"probabilities sum to {probs.sum()!r}, expected 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "m_min", int(self.m_min))

    @property
    def window(self) -> tuple[int, int]:
        return self.m_min, self.m_min + self.probs.size - 1

    @property
    def cells(self) -> np.ndarray:
        return np.arange(self.m_min, self.m_min + self.probs.size)

    def at(self, m: int) -> float:
        i = m - self.m_min
        return float(self.probs[i]) if 0 <= i < self.probs.size else 0.0

    def reflected(self) -> LatticeDistribution:
        """Distribution of ``-m``."""
        return LatticeDistribution(-self.window[1], self.probs[::-1], self.time)


@dataclass(frozen=True)
class CurrentSeries:
    """Current samples ``J(t)`` for ``t = start, start+1, ...`` (cells per step).

    ``smoothing_window`` is set on trailing-averaged series; ``average_window``
    records the ``(t_start, t_end)`` used for any stored average.
    """

    values: np.ndarray
    start: int = 1
    smoothing_window: int | None = None
    average_window: tuple[int, int] | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.start, self.start + self.values.size)

    @property
    def end(self) -> int:
        return self.start + self.values.size - 1

    def at(self, t: int) -> float:
        if not self.start <= t <= self.end:
            raise IndexError(f"t={t} outside [{self.start}, {self.end}]")
        return float(self.values[t - self.start])


def _cell_probs(state: MixedState | LatticeWavefunction) -> tuple[int, np.ndarray]:
    if isinstance(state, LatticeWavefunction):
        return state.m_min, state.cell_probabilities()
    lo = min(psi.m_min for psi in state.states)
    hi = max(psi.m_max for psi in state.states)
    probs = np.zeros(hi - lo + 1)
    for w, psi in state.components:
        i = psi.m_min - lo
        probs[i : i + psi.amps.shape[0]] += w * psi.cell_probabilities()
    return lo, probs


def coarse_probability(state: MixedState | LatticeWavefunction) -> LatticeDistribution:
    """Trace out the internal space: ``P(m) = sum_k w_k ||psi_k(m)||^2``.

    Raises
    ------
    InvariantViolation
        If the result is not normalized to ``1e-10``.
    """
    m_min, probs = _cell_probs(state)
    total = probs.sum()
    if abs(total - 1.0) > PROB_TOL:
        raise InvariantViolation(f"lattice distribution sums to {total!r}")
    return LatticeDistribution(m_min, probs, state.step_count)


def mean_position(dist: LatticeDistribution) -> float:
    return float(np.dot(dist.cells, dist.probs))


def current(means: Sequence[float], start: int = 1) -> CurrentSeries:
    """First difference ``J(t) = <x(t)> - <x(t-1)>`` of a mean-position series.

    ``means[0]`` is taken at ``t = start - 1``.
    """
    means = np.asarray(means, dtype=float)
    if means.ndim != 1 or means.size < 2:
        raise InvalidParameterError("need at least two mean positions to form a current")
    return CurrentSeries(np.diff(means), start=start)


def smooth(series: CurrentSeries, window: int) -> CurrentSeries:
    """Trailing moving average over exactly ``window`` samples.

    The output starts at ``series.start + window - 1``; each value averages
    that time and the ``window - 1`` preceding ones.
    """
    if isinstance(window, bool) or not isinstance(window, (int, np.integer)):
        raise InvalidParameterError(f"window must be an integer, got {window!r}")
    if not 1 <= window <= len(series):
        raise InvalidParameterError(f"window {window} outside [1, {len(series)}]")
    if window == 1:
        values = series.values.copy()
    else:
        values = np.convolve(series.values, np.ones(window), mode="valid") / window
    return CurrentSeries(
        values,
        start=series.start + window - 1,
        smoothing_window=int(window),
        average_window=series.average_window,
    )


def _window_slice(series: CurrentSeries, t_start: int, t_end: int) -> np.ndarray:
    if not series.start <= t_start <= t_end <= series.end:
        raise InvalidParameterError(
            f"averaging range [{t_start}, {t_end}] not inside [{series.start}, {series.end}]"
        )
    return series.values[t_start - series.start : t_end - series.start + 1]


def average_current(series: CurrentSeries, t_start: int = 100, t_end: int = 450) -> float:
    """Mean of ``J(t)`` over ``t_start <= t <= t_end`` (inclusive)."""
    return float(np.mean(_window_slice(series, t_start, t_end)))


class Stationarity(NamedTuple):
    first_mean: float
    second_mean: float
    stderr: float
    stationary: bool


def stationarity(
    series: CurrentSeries, t_start: int = 100, t_end: int = 450, n_sigma: float = 3.0
) -> Stationarity:
    """Compare the means of the two halves of ``[t_start, t_end]``.

    The halves agree when their difference is within ``n_sigma`` standard
    errors, ``sqrt(var_1/n_1 + var_2/n_2)`` of the fluctuations.
    """
    vals = _window_slice(series, t_start, t_end)
    if vals.size < 4:
        raise InvalidParameterError("need at least 4 samples to split into halves")
    a, b = np.array_split(vals, 2)
    se = float(np.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size))
    ma, mb = float(a.mean()), float(b.mean())
    return Stationarity(ma, mb, se, abs(ma - mb) <= n_sigma * se)


@dataclass
class QuantumTrajectory:
    """Coarse-grained record of one quantum run from the initial mixed state.

    ``probs[t]`` holds ``P(m, t)`` on the fixed window ``cells``.
    """

    params: MapParams
    steps: int
    cells: np.ndarray
    means: np.ndarray
    probs: np.ndarray | None = field(default=None, repr=False)

    @property
    def current(self) -> CurrentSeries:
        return current(self.means)

    def distribution(self, t: int) -> LatticeDistribution:
        if self.probs is None:
            raise ValueError("distributions were not kept for this run")
        if not 0 <= t <= self.steps:
            raise IndexError(f"t={t} outside [0, {self.steps}]")
        return LatticeDistribution(int(self.cells[0]), self.probs[t], t)


def run_quantum(
    params: MapParams,
    steps: int,
    state: MixedState | None = None,
    keep_distributions: bool = True,
) -> QuantumTrajectory:
    """Evolve the central-momentum initial state and record ``P(m, t)`` and ``<x(t)>``.

    Normalization and the light cone ``P(m, t) = 0 for |m| > t`` are
    checked at every step; a failure raises :class:`InvariantViolation`.
    A custom ``state`` must start localized at ``m = 0`` for the light-cone
    check to apply.
    """
    steps = int(steps)
    if steps < 0:
        raise InvalidParameterError(f"steps must be non-negative, got {steps}")
    if state is None:
        state = initial_state(params, capacity=steps)
    elif state.params != params:
        raise InvalidParameterError("state parameters do not match")

    cells = None
    means = np.empty(steps + 1)
    kept = [] if keep_distributions else None
    for t, snap in enumerate(evolve(state, steps)):
        dist = coarse_probability(snap)
        probs = dist.probs
        if cells is None:
            cells = dist.cells
        elif dist.m_min != cells[0] or probs.size != cells.size:
            # the window grew; re-express everything on the new window
            lo = min(int(cells[0]), dist.m_min)
            hi = max(int(cells[-1]), dist.window[1])
            if kept is not None:
                kept = [_rewindow(p, int(cells[0]), lo, hi) for p in kept]
            cells = np.arange(lo, hi + 1)
            probs = _rewindow(probs, dist.m_min, lo, hi)
        outside = np.abs(cells) > t
        if np.any(probs[outside] != 0):
            raise InvariantViolation(f"probability outside the light cone at t={t}")
        means[t] = float(np.dot(cells, probs))
        if kept is not None:
            kept.append(probs)
    return QuantumTrajectory(
        params, steps, cells, means, np.array(kept) if kept is not None else None
    )


def _rewindow(probs: np.ndarray, m_min: int, lo: int, hi: int) -> np.ndarray:
    out = np.zeros(hi - lo + 1)
    out[m_min - lo : m_min - lo + probs.size] = probs
    return out


def check_s1_antisymmetry(params: MapParams, steps: int) -> float:
    """``max_{m,t} |P_s(m, t) - P_{1-s}(-m, t)|`` for the central-momentum initial state."""
    if steps < 1:
        raise InvalidParameterError(f"steps must be >= 1, got {steps}")
    left = run_quantum(params, steps)
    right = run_quantum(params.mirrored(), steps)
    # both windows are symmetric about m = 0, so reversing the cell axis maps m -> -m
    if not np.array_equal(left.cells, -right.cells[::-1]):
        raise InvariantViolation("antisymmetry check needs windows symmetric about 0")
    return float(np.max(np.abs(left.probs - right.probs[:, ::-1])))
