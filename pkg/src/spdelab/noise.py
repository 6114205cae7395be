"""Reproducible discrete space-time white noise.

Cell increments DeltaW_{j,i} ~ Normal(0, dt*dx) are produced by a
counter-based generator (Philox) keyed by (seed, path_index), so any cell is
addressable without generating its predecessors and any path is independent
of scheduling. Normals come from the inverse CDF of the 53-bit uniform built
from one 64-bit word per cell, which fixes the values bit-exactly across
platforms.

Noise is NOT coupled across grid refinements: the stream at Nx=64 and Nx=128
are independent (no multilevel structure).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

# one Philox block is 4 64-bit words; cell m lives in block m // 4
_WORDS_PER_BLOCK = 4
_U53 = 2.0**-53
_HALF_ULP = 2.0**-54


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on [0, T] x [0, 1]: Nx spatial cells, Nt time steps."""

    Nx: int
    Nt: int
    T: float

    def __post_init__(self):
        if self.Nx < 2:
            raise ValueError("Nx must be >= 2")
        if self.Nt < 1:
            raise ValueError("Nt must be >= 1")
        if not (self.T > 0):
            raise ValueError("T must be positive")

    @property
    def dx(self):
        return 1.0 / self.Nx

    @property
    def dt(self):
        return self.T / self.Nt

    @property
    def cell_std(self):
        return np.sqrt(self.dt * self.dx)

    def cell_centers(self):
        """Spatial cell centers (i + 1/2) dx, shape (Nx,)."""
        return (np.arange(self.Nx) + 0.5) / self.Nx

    def nodes(self):
        """Spatial nodes i dx, shape (Nx+1,)."""
        return np.arange(self.Nx + 1) / self.Nx

    def times(self):
        """Time levels j dt, shape (Nt+1,)."""
        return np.arange(self.Nt + 1) * self.dt

    def label(self):
        return "Nx%d_Nt%d_T%g" % (self.Nx, self.Nt, self.T)


@dataclass(frozen=True)
class NoiseGrid:
    """The Nt x Nx array of white-noise cell increments for one path."""

    seed: int
    path_index: int
    grid: GridSpec
    increments: np.ndarray

    def fingerprint(self):
        return "noise_s%d_p%d_%s" % (self.seed, self.path_index, self.grid.label())


def _key(seed, path_index):
    if path_index < 0:
        raise ValueError("path_index must be nonnegative")
    return np.array([seed, path_index], dtype=np.uint64)


def _uniforms_from_words(words):
    return (words >> np.uint64(11)) * _U53 + _HALF_ULP


def sample(seed, path_index, grid):
    """Generate the full increment array for (seed, path_index, grid)."""
    bitgen = np.random.Philox(key=_key(seed, path_index))
    words = bitgen.random_raw(grid.Nt * grid.Nx)
    z = ndtri(_uniforms_from_words(words))
    inc = (z * grid.cell_std).reshape(grid.Nt, grid.Nx)
    return NoiseGrid(seed=int(seed), path_index=int(path_index), grid=grid,
                     increments=inc)


def cell(seed, path_index, grid, j, i):
    """Single increment DeltaW_{j,i} without generating predecessors.

    The flat cell index m = j*Nx + i sits at word m % 4 of block m // 4;
    Philox.advance moves the counter in whole blocks.
    """
    if not (0 <= j < grid.Nt and 0 <= i < grid.Nx):
        raise IndexError("cell (%d, %d) outside grid %s" % (j, i, grid.label()))
    m = j * grid.Nx + i
    bitgen = np.random.Philox(key=_key(seed, path_index))
    bitgen.advance(m // _WORDS_PER_BLOCK)
    word = bitgen.random_raw(m % _WORDS_PER_BLOCK + 1)[-1]
    return float(ndtri(_uniforms_from_words(word)) * grid.cell_std)


def scaled_white(noise):
    """Density-units view DeltaW / (dt*dx), the discrete Walsh integrand."""
    g = noise.grid
    return noise.increments / (g.dt * g.dx)
