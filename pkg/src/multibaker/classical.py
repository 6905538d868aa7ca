"""Classical asymmetric multibaker: point map, ensembles, Monte Carlo current.

Intervals are half-open: the baker branches are ``[0, s)`` and ``[s, 1)``,
and ``q < 1/2`` moves right (``m + 1``) while ``q >= 1/2`` moves left.

Ensembles are split into fixed chunks of :data:`CHUNK_SIZE` particles.
Chunk ``i`` draws from ``SeedSequence(seed, spawn_key=(i,))``, so for a
given seed the result does not depend on how many workers run the chunks.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numba
import numpy as np

from multibaker.errors import InvalidParameterError
from multibaker.observables import CurrentSeries, LatticeDistribution, current

CHUNK_SIZE = 1 << 18
# amplitude of the fresh low-order bits injected into q after each baker step
LOW_BIT_REFRESH = 2.0**-52
_BELOW_ONE = np.nextafter(1.0, 0.0)


def _check_s(s: float) -> float:
    s = float(s)
    if not 0.0 < s < 1.0:
        raise InvalidParameterError(f"s must lie in (0, 1), got {s}")
    return s


def baker_step(s: float, q, p):
    """Asymmetric baker map on the unit square.

    ``(q/s, s p)`` for ``q < s`` and ``((q-s)/(1-s), (1-s) p + s)`` otherwise.
    Works elementwise on scalars or arrays; outputs are clamped below 1 to
    absorb rounding at the upper edge.
    """
    s = _check_s(s)
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    left = q < s
    q_new = np.where(left, q / s, (q - s) / (1.0 - s))
    p_new = np.where(left, s * p, (1.0 - s) * p + s)
    q_new = np.minimum(q_new, _BELOW_ONE)
    p_new = np.minimum(p_new, _BELOW_ONE)
    if q_new.ndim == 0:
        return float(q_new), float(p_new)
    return q_new, p_new


class Particle(NamedTuple):
    """Lattice cell ``m`` and in-cell coordinates ``(q, p)``; fields may be arrays."""

    m: int
    q: float
    p: float


def transport_step(particle: Particle) -> Particle:
    m, q, p = particle
    shift = np.where(np.asarray(q) < 0.5, 1, -1)
    if shift.ndim == 0:
        return Particle(int(m) + int(shift), q, p)
    return Particle(np.asarray(m) + shift, q, p)


def multibaker_step(s: float, particle: Particle) -> Particle:
    """Transport between cells, then the baker map inside the destination cell."""
    m, q, p = transport_step(particle)
    q, p = baker_step(s, q, p)
    return Particle(m, q, p)


@dataclass(frozen=True)
class Region:
    """Axis-aligned box ``[q_lo, q_hi) x [p_lo, p_hi)`` inside the unit cell."""

    q_lo: float = 0.0
    q_hi: float = 1.0
    p_lo: float = 0.0
    p_hi: float = 1.0

    def __post_init__(self):
        for lo, hi, name in ((self.q_lo, self.q_hi, "q"), (self.p_lo, self.p_hi, "p")):
            if not 0.0 <= lo <= hi <= 1.0:
                raise InvalidParameterError(f"{name} range [{lo}, {hi}) not inside [0, 1]")
            if hi == lo:
                raise InvalidParameterError(f"empty {name} range at {lo}")

    @classmethod
    def full(cls) -> Region:
        return cls()

    @classmethod
    def square(cls, q_center: float, p_center: float, side: float) -> Region:
        h = side / 2
        return cls(q_center - h, q_center + h, p_center - h, p_center + h)

    @classmethod
    def strip(cls, dim: int) -> Region:
        """Footprint of the two central momentum states: ``p in [(D/2-1)/D, (D/2+1)/D)``."""
        if dim < 2 or dim % 2:
            raise InvalidParameterError(f"strip needs a positive even dimension, got {dim}")
        return cls(0.0, 1.0, (dim / 2 - 1) / dim, (dim / 2 + 1) / dim)

    @classmethod
    def parse(cls, text: str, dim: int | None = None) -> Region:
        """Parse ``full``, ``strip``, ``square:QC,PC,SIDE`` or ``box:Q0,Q1,P0,P1``."""
        kind, _, rest = text.strip().partition(":")
        kind = kind.lower()
        try:
            nums = [float(x) for x in rest.split(",")] if rest else []
        except ValueError:
            raise InvalidParameterError(f"bad region numbers in {text!r}") from None
        if kind == "full" and not nums:
            return cls.full()
        if kind == "strip" and not nums:
            if dim is None:
                raise InvalidParameterError("strip region needs a dimension")
            return cls.strip(dim)
        if kind == "square" and len(nums) == 3:
            return cls.square(*nums)
        if kind == "box" and len(nums) == 4:
            return cls(*nums)
        raise InvalidParameterError(f"unrecognised region {text!r}")

    def describe(self) -> str:
        return f"box:{self.q_lo!r},{self.q_hi!r},{self.p_lo!r},{self.p_hi!r}"


@dataclass
class ClassicalEnsemble:
    m: np.ndarray
    q: np.ndarray
    p: np.ndarray
    seed: int

    @property
    def count(self) -> int:
        return int(self.m.size)

    @property
    def particles(self) -> Particle:
        return Particle(self.m, self.q, self.p)


def _check_count_seed(count: int, seed: int) -> None:
    if int(count) < 1:
        raise InvalidParameterError(f"count must be >= 1, got {count}")
    if not 0 <= int(seed) < 2**64:
        raise InvalidParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")


def _chunk_sizes(count: int) -> list[int]:
    full, rest = divmod(count, CHUNK_SIZE)
    return [CHUNK_SIZE] * full + ([rest] if rest else [])


def _chunk_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(index,)))


def _draw(rng: np.random.Generator, region: Region, n: int) -> tuple[np.ndarray, np.ndarray]:
    q = region.q_lo + (region.q_hi - region.q_lo) * rng.random(n)
    p = region.p_lo + (region.p_hi - region.p_lo) * rng.random(n)
    # rounding can land exactly on the open upper edge
    q = np.minimum(q, np.nextafter(region.q_hi, region.q_lo))
    p = np.minimum(p, np.nextafter(region.p_hi, region.p_lo))
    return q, p


def sample_ensemble(region: Region, count: int, seed: int) -> ClassicalEnsemble:
    """Uniform sample of ``count`` points in ``region``, all at cell ``m = 0``."""
    _check_count_seed(count, seed)
    qs, ps = [], []
    for i, n in enumerate(_chunk_sizes(int(count))):
        q, p = _draw(_chunk_rng(seed, i), region, n)
        qs.append(q)
        ps.append(p)
    q = np.concatenate(qs)
    p = np.concatenate(ps)
    return ClassicalEnsemble(np.zeros(q.size, dtype=np.int64), q, p, int(seed))


def classical_current(means: Sequence[float]) -> CurrentSeries:
    """``J(t) = <m(t)> - <m(t-1)>`` from the ensemble mean-cell trajectory."""
    return current(means)


@dataclass
class ClassicalRun:
    """Integer accumulators of a Monte Carlo run, merged across chunks by summation."""

    s: float
    region: Region
    count: int
    seed: int
    steps: int
    m_sum: np.ndarray
    m_sq: np.ndarray
    histograms: dict[int, np.ndarray] = field(default_factory=dict)
    window: tuple[int, int] | None = None
    disp_sum: int = 0
    disp_sq: int = 0

    @property
    def mean_m(self) -> np.ndarray:
        return self.m_sum / self.count

    @property
    def current(self) -> CurrentSeries:
        return classical_current(self.mean_m)

    @property
    def current_stderr(self) -> np.ndarray:
        """Standard error of ``J(t)``; each particle step is exactly +-1."""
        j = self.current.values
        return np.sqrt(np.clip(1.0 - j * j, 0.0, None) / self.count)

    def position_stderr(self, t: int) -> float:
        mean = self.m_sum[t] / self.count
        var = max(self.m_sq[t] / self.count - mean * mean, 0.0)
        return math.sqrt(var / self.count)

    def window_current(self) -> tuple[float, float]:
        """Mean current over the recorded window and its standard error."""
        if self.window is None:
            raise ValueError("no averaging window was recorded")
        t0, t1 = self.window
        n_steps = t1 - t0 + 1
        mean_d = self.disp_sum / self.count
        var_d = max(self.disp_sq / self.count - mean_d * mean_d, 0.0)
        return mean_d / n_steps, math.sqrt(var_d / self.count) / n_steps

    def distribution(self, t: int) -> LatticeDistribution:
        if t not in self.histograms:
            raise KeyError(f"no snapshot recorded at t={t}")
        counts = self.histograms[t]
        return LatticeDistribution(-self.steps, counts / self.count, t)


@numba.njit(cache=True, nogil=True)
def _advance(m, q, p, noise, s):
    """One multibaker step in place; returns the new ``sum(m)`` and ``sum(m**2)``.

    Same arithmetic as :func:`transport_step` followed by :func:`baker_step`,
    then ``noise`` is added to ``q`` (wrapped into ``[0, 1)``).
    """
    below_one = np.nextafter(1.0, 0.0)
    total = 0
    total_sq = 0
    for i in range(m.size):
        qi = q[i]
        pi = p[i]
        if qi < 0.5:
            m[i] += 1
        else:
            m[i] -= 1
        if qi < s:
            qi = qi / s
            pi = s * pi
        else:
            qi = (qi - s) / (1.0 - s)
            pi = (1.0 - s) * pi + s
        qi = min(qi, below_one) + noise[i]
        if qi >= 1.0:
            qi -= 1.0
        q[i] = qi
        p[i] = min(pi, below_one)
        total += m[i]
        total_sq += m[i] * m[i]
    return total, total_sq


class _ChunkTask(NamedTuple):
    s: float
    region: Region
    seed: int
    index: int
    size: int
    steps: int
    snapshot_times: tuple[int, ...]
    window: tuple[int, int] | None


def _run_chunk(task: _ChunkTask):
    s, steps = task.s, task.steps
    rng = _chunk_rng(task.seed, task.index)
    q, p = _draw(rng, task.region, task.size)
    m = np.zeros(task.size, dtype=np.int64)
    m_sum = np.zeros(steps + 1, dtype=np.int64)
    m_sq = np.zeros(steps + 1, dtype=np.int64)
    hist = {}
    anchor = None
    disp_sum = disp_sq = 0

    noise = np.empty(task.size)

    for t in range(steps + 1):
        if t > 0:
            # the float keeps ~52 bits of q and the map consumes some every step;
            # refill the bottom bits so that e.g. s = 1/2 does not collapse onto q = 0
            rng.random(out=noise)
            noise *= LOW_BIT_REFRESH
            m_sum[t], m_sq[t] = _advance(m, q, p, noise, s)
        if t in task.snapshot_times:
            hist[t] = np.bincount(m + steps, minlength=2 * steps + 1).astype(np.int64)
        if task.window is not None:
            if t == task.window[0] - 1:
                anchor = m.copy()
            if t == task.window[1]:
                d = m - anchor
                disp_sum, disp_sq = int(d.sum()), int(np.dot(d, d))
    return m_sum, m_sq, hist, disp_sum, disp_sq


def simulate_ensemble(
    s: float,
    region: Region,
    count: int,
    seed: int,
    steps: int,
    workers: int = 1,
    snapshot_times: Sequence[int] = (),
    window: tuple[int, int] | None = None,
) -> ClassicalRun:
    """Run ``count`` particles from ``region`` at ``m = 0`` for ``steps`` steps.

    Parameters
    ----------
    snapshot_times : sequence of int
        Times at which the full cell histogram is kept.
    window : (t_start, t_end), optional
        Record per-particle displacement over this inclusive current window,
        giving the window-averaged current and its standard error.
    workers : int
        Processes used for the chunks; results are identical for any value.
    """
    s = _check_s(s)
    _check_count_seed(count, seed)
    steps = int(steps)
    if steps < 1:
        raise InvalidParameterError(f"steps must be >= 1, got {steps}")
    snaps = tuple(sorted({int(t) for t in snapshot_times}))
    if any(not 0 <= t <= steps for t in snaps):
        raise InvalidParameterError(f"snapshot times must lie in [0, {steps}]")
    if window is not None:
        window = (int(window[0]), int(window[1]))
        if not 1 <= window[0] <= window[1] <= steps:
            raise InvalidParameterError(f"window {window} not inside [1, {steps}]")

    tasks = [
        _ChunkTask(s, region, int(seed), i, n, steps, snaps, window)
        for i, n in enumerate(_chunk_sizes(int(count)))
    ]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            results = list(pool.map(_run_chunk, tasks))
    else:
        results = [_run_chunk(t) for t in tasks]

    run = ClassicalRun(
        s=s,
        region=region,
        count=int(count),
        seed=int(seed),
        steps=steps,
        m_sum=np.zeros(steps + 1, dtype=np.int64),
        m_sq=np.zeros(steps + 1, dtype=np.int64),
        histograms={t: np.zeros(2 * steps + 1, dtype=np.int64) for t in snaps},
        window=window,
    )
    for m_sum, m_sq, hist, d_sum, d_sq in results:
        run.m_sum += m_sum
        run.m_sq += m_sq
        for t, h in hist.items():
            run.histograms[t] += h
        run.disp_sum += d_sum
        run.disp_sq += d_sq
    return run
