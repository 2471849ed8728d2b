"""Droplet primitives on the torus and their rasterisation to cell averages."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lens_geometry import SQRT3, chord_length, lens_perimeter
from .torus_green import DensityGrid, cell_centers, wrap

SUPERSAMPLE = 16


@dataclass(frozen=True)
class Disc:
    center: tuple
    radius: float

    @property
    def area(self) -> float:
        return math.pi * self.radius**2

    @property
    def perimeter(self) -> float:
        return 2 * math.pi * self.radius

    @property
    def circumradius(self) -> float:
        return self.radius

    @property
    def diameter(self) -> float:
        return 2 * self.radius

    def width_along(self, direction) -> float:
        return 2 * self.radius

    def contains(self, p) -> np.ndarray:
        d = wrap(np.asarray(p, dtype=float) - np.asarray(self.center))
        return np.sum(d * d, axis=-1) < self.radius**2


@dataclass(frozen=True)
class LensShape:
    """Optimal lens with chord ``chord`` along ``orientation`` through ``center``.

    The region is the intersection of two discs of radius chord/sqrt3 whose
    centres sit chord/(2 sqrt3) on either side of the chord.
    """

    center: tuple
    chord: float
    orientation: tuple = (1.0, 0.0)

    @classmethod
    def of_mass(cls, mass: float, center, orientation=(1.0, 0.0)) -> "LensShape":
        return cls(tuple(center), chord_length(mass), tuple(orientation))

    @property
    def area(self) -> float:
        return (2 * math.pi / 3 - SQRT3 / 2) * self.chord**2 / 3

    @property
    def perimeter(self) -> float:
        return lens_perimeter(self.area)

    @property
    def circumradius(self) -> float:
        return self.chord / 2

    @property
    def diameter(self) -> float:
        return self.chord

    @property
    def thickness(self) -> float:
        return self.chord / SQRT3

    def width_along(self, direction) -> float:
        return self.chord

    def contains(self, p) -> np.ndarray:
        u = np.asarray(self.orientation, dtype=float)
        u = u / np.linalg.norm(u)
        nrm = np.array([-u[1], u[0]])
        rho = self.chord / SQRT3
        off = self.chord / (2 * SQRT3)
        d = wrap(np.asarray(p, dtype=float) - np.asarray(self.center))
        a = d - off * nrm
        b = d + off * nrm
        return (np.sum(a * a, axis=-1) < rho**2) & (np.sum(b * b, axis=-1) < rho**2)


def _cell_block(shape, n):
    """Integer cell indices (with wrap) covering the shape's bounding disc."""
    r = shape.circumradius
    c = np.asarray(shape.center, dtype=float)
    lo = np.floor((c - r + 0.5) * n).astype(int) - 1
    hi = np.floor((c + r + 0.5) * n).astype(int) + 1
    ix = np.arange(lo[0], hi[0] + 1)
    iy = np.arange(lo[1], hi[1] + 1)
    return ix, iy


def coverage(shape, n: int, ss: int = SUPERSAMPLE) -> tuple:
    """Sub-sampled area fractions of ``shape`` on the cells of its bounding box.

    Returns (ix, iy, frac) where ix, iy are wrapped cell indices and frac has
    shape (len(ix), len(iy)).
    """
    ix, iy = _cell_block(shape, n)
    off = (np.arange(ss) + 0.5) / (ss * n)
    xs = (-0.5 + ix[:, None] / n + off[None, :]).ravel()
    ys = (-0.5 + iy[:, None] / n + off[None, :]).ravel()
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    inside = shape.contains(np.stack([X, Y], axis=-1)).astype(float)
    frac = inside.reshape(len(ix), ss, len(iy), ss).mean(axis=(1, 3))
    return ix % n, iy % n, frac


def rasterize(shapes, n: int, ss: int = SUPERSAMPLE) -> DensityGrid:
    """Indicator of a union of disjoint shapes as cell-average fractions."""
    out = np.zeros((n, n))
    for s in shapes:
        ix, iy, frac = coverage(s, n, ss)
        out[np.ix_(ix, iy)] += frac
    return DensityGrid(np.clip(out, 0.0, 1.0))


def band_fraction(n: int, lo: float, hi: float) -> np.ndarray:
    """Per-row fraction of each cell's y-extent inside the band lo <= y < hi (mod 1)."""
    edges = -0.5 + np.arange(n + 1) / n
    frac = np.zeros(n)
    width = hi - lo
    if width >= 1.0:
        return np.ones(n)
    base = lo - np.floor(lo + 0.5)  # wrap lo into [-1/2, 1/2)
    for shift in (-1.0, 0.0, 1.0):
        a, b = base + shift, base + shift + width
        frac += np.clip(np.minimum(edges[1:], b) - np.maximum(edges[:-1], a), 0.0, None)
    return np.clip(frac * n, 0.0, 1.0)


def sample_points(n: int):
    X, Y = cell_centers(n)
    return np.stack([X, Y], axis=-1)
