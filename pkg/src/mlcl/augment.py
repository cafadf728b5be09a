"""Rule-preserving raster transformations.

A :class:`TransformSpec` is applied with identical parameters to all 16
panels of an instance, so the underlying rules and the correct answer index
are untouched; only pixels move.  Transforms compose in a fixed canonical
order -- horizontal flip, vertical flip, transpose, rotate, grid shuffle,
roll -- which makes a spec a deterministic function of its fields.

Rotation uses nearest-neighbour resampling with background fill, keeping the
8-bit value set closed.  Grid shuffle splits the largest top-left region
divisible into n x n equal tiles and permutes those tiles; for panel sizes
not divisible by n the remaining right/bottom strip stays in place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .generator import RpmInstance

BACKGROUND = 255

TRANSFORM_KINDS = ("hflip", "vflip", "transpose", "rotate", "grid_shuffle", "roll")


@dataclass(frozen=True)
class TransformSpec:
    """Parameters of one sampled augmentation, applied in canonical order."""

    hflip: bool = False
    vflip: bool = False
    transpose: bool = False
    rotate_deg: float | None = None
    grid: tuple | None = None   # (n, permutation of n*n tiles)
    roll: tuple | None = None   # (rows, cols), each in [0, panel size)

    def __post_init__(self):
        if self.grid is not None:
            n, perm = self.grid
            if sorted(perm) != list(range(n * n)):
                raise ValueError(f"grid permutation must permute {n * n} tiles")

    def is_identity(self) -> bool:
        return (
            not self.hflip and not self.vflip and not self.transpose
            and self.rotate_deg is None and self.grid is None and self.roll is None
        )

    def kinds(self) -> tuple:
        present = []
        if self.hflip:
            present.append("hflip")
        if self.vflip:
            present.append("vflip")
        if self.transpose:
            present.append("transpose")
        if self.rotate_deg is not None:
            present.append("rotate")
        if self.grid is not None:
            present.append("grid_shuffle")
        if self.roll is not None:
            present.append("roll")
        return tuple(present)

    def to_dict(self) -> dict:
        """JSON-ready form for run logs."""
        return {
            "hflip": self.hflip,
            "vflip": self.vflip,
            "transpose": self.transpose,
            "rotate_deg": self.rotate_deg,
            "grid": None if self.grid is None else [self.grid[0], list(self.grid[1])],
            "roll": None if self.roll is None else list(self.roll),
        }


def sample_transform(rng: np.random.Generator, panel_size: int = 28,
                     right_angles_only: bool = False) -> TransformSpec:
    """Draw a random nonempty subset of transforms with random parameters."""
    while True:
        include = rng.random(len(TRANSFORM_KINDS)) < 0.5
        if include.any():
            break
    rotate = None
    if include[3]:
        if right_angles_only:
            rotate = float(rng.integers(0, 4) * 90.0)
        else:
            rotate = float(rng.uniform(0.0, 360.0))
    grid = None
    if include[4]:
        n = int(rng.integers(2, 4))
        grid = (n, tuple(int(i) for i in rng.permutation(n * n)))
    roll = None
    if include[5]:
        axis = int(rng.integers(3))  # 0 rows, 1 cols, 2 both
        dr = int(rng.integers(1, panel_size)) if axis in (0, 2) else 0
        dc = int(rng.integers(1, panel_size)) if axis in (1, 2) else 0
        roll = (dr, dc)
    return TransformSpec(
        hflip=bool(include[0]),
        vflip=bool(include[1]),
        transpose=bool(include[2]),
        rotate_deg=rotate,
        grid=grid,
        roll=roll,
    )


def _rotate_nn(raster: np.ndarray, degrees: float) -> np.ndarray:
    size = raster.shape[0]
    theta = math.radians(degrees)
    cos, sin = math.cos(theta), math.sin(theta)
    center = (size - 1) / 2.0
    yy, xx = np.mgrid[0:size, 0:size]
    xr = xx - center
    yr = yy - center
    # inverse map: source coordinates that land on each output pixel
    xs = np.rint(cos * xr + sin * yr + center).astype(np.int64)
    ys = np.rint(-sin * xr + cos * yr + center).astype(np.int64)
    valid = (xs >= 0) & (xs < size) & (ys >= 0) & (ys < size)
    out = np.full_like(raster, BACKGROUND)
    out[valid] = raster[ys[valid], xs[valid]]
    return out


def _grid_shuffle(raster: np.ndarray, n: int, perm: tuple) -> np.ndarray:
    size = raster.shape[0]
    tile = size // n
    out = raster.copy()
    tiles = [
        raster[r * tile : (r + 1) * tile, c * tile : (c + 1) * tile].copy()
        for r in range(n)
        for c in range(n)
    ]
    for dest, src in enumerate(perm):
        r, c = divmod(dest, n)
        out[r * tile : (r + 1) * tile, c * tile : (c + 1) * tile] = tiles[src]
    return out


def apply_raster(raster: np.ndarray, spec: TransformSpec) -> np.ndarray:
    out = raster
    if spec.hflip:
        out = out[:, ::-1]
    if spec.vflip:
        out = out[::-1, :]
    if spec.transpose:
        out = out.T
    if spec.rotate_deg is not None:
        out = _rotate_nn(np.ascontiguousarray(out), spec.rotate_deg)
    if spec.grid is not None:
        out = _grid_shuffle(np.ascontiguousarray(out), *spec.grid)
    if spec.roll is not None:
        out = np.roll(out, shift=spec.roll, axis=(0, 1))
    return np.ascontiguousarray(out)


def apply(instance: RpmInstance, spec: TransformSpec) -> RpmInstance:
    """Transform all 16 rasters identically; symbolic content is unchanged."""
    ctx = tuple(apply_raster(r, spec) for r in instance.context_rasters)
    cho = tuple(apply_raster(r, spec) for r in instance.choice_rasters)
    return instance.with_rasters(ctx, cho)


def make_views(instance: RpmInstance, rng: np.random.Generator,
               right_angles_only: bool = False):
    """Two independently transformed views carrying the original labels."""
    spec_a = sample_transform(rng, instance.panel_size, right_angles_only)
    spec_b = sample_transform(rng, instance.panel_size, right_angles_only)
    return apply(instance, spec_a), apply(instance, spec_b)
