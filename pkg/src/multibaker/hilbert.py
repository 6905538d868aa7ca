"""Dense linear algebra on the internal D-dimensional cell space.

Position basis index ``j`` sits at ``q_j = (j + 1/2) / D``; momentum states
are the columns of the antiperiodic Fourier matrix.  Operators and vectors
are plain ``complex128`` numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from multibaker.errors import InvalidDimensionError, InvalidParameterError

UNITARY_TOL = 1e-12


@dataclass(frozen=True)
class MapParams:
    """Internal dimension ``dim`` (hbar = 1/dim) and left-block size ``d1``.

    The asymmetry is ``s = d1 / dim``.  ``dim`` must be even so that the
    transport split at q = 1/2 falls between position states.
    """

    dim: int
    d1: int

    def __post_init__(self):
        if not isinstance(self.dim, (int, np.integer)) or isinstance(self.dim, bool):
            raise InvalidParameterError(f"dim must be an integer, got {self.dim!r}")
        if not isinstance(self.d1, (int, np.integer)) or isinstance(self.d1, bool):
            raise InvalidParameterError(f"d1 must be an integer, got {self.d1!r}")
        if self.dim < 2 or self.dim % 2:
            raise InvalidDimensionError(f"dim must be a positive even integer, got {self.dim}")
        if not 1 <= self.d1 <= self.dim - 1:
            raise InvalidParameterError(f"d1 must lie in [1, {self.dim - 1}], got {self.d1}")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "d1", int(self.d1))

    @property
    def d2(self) -> int:
        return self.dim - self.d1

    @property
    def s(self) -> float:
        return self.d1 / self.dim

    @property
    def s_exact(self) -> Fraction:
        return Fraction(self.d1, self.dim)

    def mirrored(self) -> MapParams:
        """Parameters of the S_I partner map, s -> 1 - s."""
        return MapParams(self.dim, self.d2)


def build_aft(dim: int) -> np.ndarray:
    """Antiperiodic discrete Fourier matrix.

    ``G[k, l] = dim**-0.5 * exp(-2j*pi*(k + 1/2)*(l + 1/2)/dim)``, each entry
    evaluated directly from its phase.  The matrix is symmetric and unitary.

    Parameters
    ----------
    dim : int
        Matrix size, ``dim >= 1``.

    Returns
    -------
    (dim, dim) complex ndarray
    """
    if isinstance(dim, bool) or not isinstance(dim, (int, np.integer)) or dim < 1:
        raise InvalidDimensionError(f"dimension must be a positive integer, got {dim!r}")
    odd = 2 * np.arange(dim, dtype=np.int64) + 1
    # (k+1/2)(l+1/2)/dim == (2k+1)(2l+1)/(4 dim); reduce exactly mod 4 dim
    num = np.mod(np.outer(odd, odd), 4 * dim)
    return np.exp(-2j * np.pi * num / (4 * dim)) / np.sqrt(dim)


@lru_cache(maxsize=64)
def _baker_cached(dim: int, d1: int) -> np.ndarray:
    blocks = np.zeros((dim, dim), dtype=np.complex128)
    blocks[:d1, :d1] = build_aft(d1)
    blocks[d1:, d1:] = build_aft(dim - d1)
    out = build_aft(dim).conj().T @ blocks
    out.setflags(write=False)
    return out


def build_baker(params: MapParams) -> np.ndarray:
    """Asymmetric quantum baker ``G_D^dagger @ blockdiag(G_D1, G_D2)``.

    The ``d1 x d1`` block occupies indices ``0..d1-1``.  The returned array
    is cached and read-only.
    """
    if not isinstance(params, MapParams):
        raise InvalidParameterError(f"expected MapParams, got {type(params).__name__}")
    return _baker_cached(params.dim, params.d1)


def apply_operator(op: np.ndarray, v: np.ndarray) -> np.ndarray:
    op = np.asarray(op)
    v = np.asarray(v)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise InvalidDimensionError(f"operator must be square, got shape {op.shape}")
    if v.shape != (op.shape[1],):
        raise InvalidDimensionError(
            f"vector of shape {v.shape} does not match operator dimension {op.shape[1]}"
        )
    return op @ v


def unitarity_error(op: np.ndarray) -> float:
    """``max |op^dagger op - I|`` entrywise."""
    op = np.asarray(op)
    return float(np.max(np.abs(op.conj().T @ op - np.eye(op.shape[0]))))


def is_unitary(op: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    return unitarity_error(op) <= tol


def reflect_position(v: np.ndarray) -> np.ndarray:
    """Position reflection ``j -> D - 1 - j`` (q -> 1 - q) along the last axis."""
    return np.asarray(v)[..., ::-1]
