"""Quantum multibaker on an unbounded lattice.

One step applies the projector-conditioned shift (position indices
``[0, D/2)`` move to ``m + 1``, ``[D/2, D)`` to ``m - 1``) and then the
quantum baker inside every cell.  The infinite lattice is a finite window
of cells that is grown ahead of the support, never wrapped.

Mixed states are kept as weighted pure components; the paper's initial
state has rank two, so this is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from multibaker.errors import InvalidParameterError, InvariantViolation
from multibaker.hilbert import MapParams, build_aft, build_baker

NORM_DRIFT_TOL = 1e-9
WEIGHT_TOL = 1e-12


@dataclass
class LatticeWavefunction:
    """Pure state on lattice x internal space.

    ``amps[i]`` is the internal vector of cell ``m_min + i``.  ``step_count``
    counts applied multibaker steps.
    """

    params: MapParams
    m_min: int
    amps: np.ndarray
    step_count: int = 0

    def __post_init__(self):
        self.amps = np.asarray(self.amps, dtype=np.complex128)
        if self.amps.ndim != 2 or self.amps.shape[1] != self.params.dim:
            raise InvalidParameterError(
                f"amplitudes must have shape (cells, {self.params.dim}), got {self.amps.shape}"
            )
        self.m_min = int(self.m_min)

    @property
    def m_max(self) -> int:
        return self.m_min + self.amps.shape[0] - 1

    @property
    def window(self) -> tuple[int, int]:
        return self.m_min, self.m_max

    @property
    def cells(self) -> np.ndarray:
        return np.arange(self.m_min, self.m_max + 1)

    def cell_probabilities(self) -> np.ndarray:
        return np.sum(self.amps.real**2 + self.amps.imag**2, axis=1)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.cell_probabilities())))

    def cell(self, m: int) -> np.ndarray:
        if not self.m_min <= m <= self.m_max:
            return np.zeros(self.params.dim, dtype=np.complex128)
        return self.amps[m - self.m_min]

    def padded(self, m_lo: int, m_hi: int) -> LatticeWavefunction:
        """Copy with the window widened to cover ``[m_lo, m_hi]``."""
        lo = min(m_lo, self.m_min)
        hi = max(m_hi, self.m_max)
        amps = np.zeros((hi - lo + 1, self.params.dim), dtype=np.complex128)
        amps[self.m_min - lo : self.m_min - lo + self.amps.shape[0]] = self.amps
        return LatticeWavefunction(self.params, lo, amps, self.step_count)

    @classmethod
    def localized(cls, params: MapParams, internal: np.ndarray, m: int = 0, capacity: int = 0):
        """``|m> (x) internal`` in a window of half-width ``capacity + 1`` around ``m``."""
        internal = np.asarray(internal, dtype=np.complex128)
        if internal.shape != (params.dim,):
            raise InvalidParameterError(f"internal vector must have length {params.dim}")
        half = max(int(capacity), 0) + 1
        amps = np.zeros((2 * half + 1, params.dim), dtype=np.complex128)
        amps[half] = internal
        return cls(params, m - half, amps)


@dataclass
class MixedState:
    """Incoherent mixture ``sum_k w_k |psi_k><psi_k|``."""

    components: list[tuple[float, LatticeWavefunction]] = field(default_factory=list)

    def __post_init__(self):
        if not self.components:
            raise InvalidParameterError("a mixed state needs at least one component")
        total = 0.0
        for w, _ in self.components:
            if not 0.0 < w <= 1.0:
                raise InvalidParameterError(f"component weight {w} outside (0, 1]")
            total += w
        if abs(total - 1.0) > WEIGHT_TOL:
            raise InvalidParameterError(f"weights sum to {total}, expected 1")

    @property
    def params(self) -> MapParams:
        return self.components[0][1].params

    @property
    def weights(self) -> list[float]:
        return [w for w, _ in self.components]

    @property
    def states(self) -> list[LatticeWavefunction]:
        return [psi for _, psi in self.components]

    @property
    def step_count(self) -> int:
        return self.components[0][1].step_count


def central_momentum_states(dim: int) -> np.ndarray:
    """The two central momentum eigenstates, columns ``D/2 - 1`` and ``D/2`` of G_D.

    Returns a ``(2, dim)`` array, one internal vector per row.
    """
    g = build_aft(dim)
    return np.array([g[:, dim // 2 - 1], g[:, dim // 2]])


def initial_state(params: MapParams, capacity: int = 0) -> MixedState:
    """Lattice site 0 times the equal mixture of the two central momentum states.

    ``capacity`` pre-sizes the window for that many steps so that no
    regrowth happens during evolution.
    """
    return MixedState(
        [
            (0.5, LatticeWavefunction.localized(params, vec, 0, capacity))
            for vec in central_momentum_states(params.dim)
        ]
    )


def _support(amps: np.ndarray) -> tuple[int, int] | None:
    nz = np.flatnonzero(np.any(amps != 0, axis=1))
    if nz.size == 0:
        return None
    return int(nz[0]), int(nz[-1])


def quantum_step(state: LatticeWavefunction) -> LatticeWavefunction:
    """One application of the quantum multibaker; returns a new state."""
    params = state.params
    half = params.dim // 2
    support = _support(state.amps)
    if support is None:
        raise InvariantViolation("cannot step the zero vector")
    lo, hi = support
    # the shifted support must stay strictly inside the window so the edge cells stay zero
    if lo < 2 or hi > state.amps.shape[0] - 3:
        grow = max(state.amps.shape[0] // 2, 4)
        state = state.padded(state.m_min - grow, state.m_max + grow)
        lo, hi = lo + grow, hi + grow

    src = state.amps
    out = np.zeros_like(src)
    # right-movers: position indices [0, D/2) go to m + 1
    out[lo + 1 : hi + 2, :half] = src[lo : hi + 1, :half]
    out[lo - 1 : hi, half:] = src[lo : hi + 1, half:]
    baker_t = build_baker(params).T
    out[lo - 1 : hi + 2] = out[lo - 1 : hi + 2] @ baker_t
    return LatticeWavefunction(params, state.m_min, out, state.step_count + 1)


def evolve(state: MixedState, steps: int, check_norm: bool = True) -> Iterator[MixedState]:
    """Yield the mixed state at ``t = 0, 1, ..., steps``.

    Components are propagated independently and weights never change.
    Snapshots are not retained here; keep what you need from each one.
    With ``check_norm`` every step is checked against norm drift, raising
    :class:`InvariantViolation` on failure.
    """
    steps = int(steps)
    if steps < 0:
        raise InvalidParameterError(f"steps must be non-negative, got {steps}")
    yield state
    current = state
    start_norms = [psi.norm() for psi in state.states]
    for _ in range(steps):
        components = []
        for (w, psi), norm0 in zip(current.components, start_norms):
            nxt = quantum_step(psi)
            if check_norm:
                drift = abs(nxt.norm() - norm0)
                if drift > NORM_DRIFT_TOL:
                    raise InvariantViolation(
                        f"norm drift {drift:.3e} after {nxt.step_count} steps"
                    )
            components.append((w, nxt))
        current = MixedState(components)
        yield current


def final_state(state: MixedState, steps: int) -> MixedState:
    out = state
    for out in evolve(state, steps):
        pass
    return out
