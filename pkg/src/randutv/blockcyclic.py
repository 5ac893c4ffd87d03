"""Index maths of the 2-D block-cyclic layout on a P x Q process grid.

Processes are numbered row-major over the grid: process (pr, pc) has id
pr*Q + pc.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class GridSpec:
    mb: int
    nb: int
    P: int
    Q: int

    def __post_init__(self):
        for name in ("mb", "nb", "P", "Q"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")

    @property
    def nprocs(self) -> int:
        return self.P * self.Q


def _check(i, j):
    if i < 0 or j < 0:
        raise IndexError(f"block index ({i},{j}) is negative")


def owner(spec: GridSpec, block_row: int, block_col: int) -> int:
    _check(block_row, block_col)
    return (block_row % spec.P) * spec.Q + (block_col % spec.Q)


def local_index(spec: GridSpec, block_row: int, block_col: int) -> tuple[int, int]:
    _check(block_row, block_col)
    return block_row // spec.P, block_col // spec.Q


def owner_map(spec: GridSpec, m: int, n: int) -> np.ndarray:
    """Owner id of every block of an m x n matrix (ragged edge blocks included)."""
    M, N = -(-m // spec.mb), -(-n // spec.nb)
    r = np.arange(M)[:, None] % spec.P
    c = np.arange(N)[None, :] % spec.Q
    return r * spec.Q + c


def distribution_report(spec: GridSpec, m: int, n: int) -> list[int]:
    """Number of matrix elements held by each process."""
    if m < 0 or n < 0:
        raise ConfigError(f"negative matrix size {m}x{n}")
    counts = [0] * spec.nprocs
    if m == 0 or n == 0:
        return counts
    heights = np.diff(np.minimum(np.arange(0, m + spec.mb, spec.mb), m))
    widths = np.diff(np.minimum(np.arange(0, n + spec.nb, spec.nb), n))
    heights, widths = heights[heights > 0], widths[widths > 0]
    owners = owner_map(spec, m, n)
    sizes = np.outer(heights, widths)
    for p, s in zip(owners.ravel(), sizes.ravel()):
        counts[int(p)] += int(s)
    return counts


def render_map(spec: GridSpec, m: int, n: int) -> str:
    """ASCII picture: one cell per block labelled with its owner, tiles of
    P x Q blocks separated by rules."""
    owners = owner_map(spec, m, n)
    M, N = owners.shape
    width = len(f"P{spec.nprocs - 1}")
    lines = []

    def rule():
        parts = []
        for j in range(N):
            if j % spec.Q == 0:
                parts.append("+")
            parts.append("-" * (width + 2))
        return "".join(parts) + "+"

    for i in range(M):
        if i % spec.P == 0:
            lines.append(rule())
        cells = []
        for j in range(N):
            cells.append(("|" if j % spec.Q == 0 else "") + f" {'P' + str(owners[i, j]):<{width}} ")
        lines.append("".join(cells) + "|")
    lines.append(rule())
    lines.append(f"{m}x{n} matrix, {spec.mb}x{spec.nb} blocks, {spec.P}x{spec.Q} process grid")
    for p, cnt in enumerate(distribution_report(spec, m, n)):
        lines.append(f"  P{p}: {cnt} elements")
    return "\n".join(lines)
