"""Sharp-interface ternary energy on explicit torus configurations.

Phases are indexed 0 (minority droplets), 1 and 2 (majority bands).  The
background is a lamella: phase 1 fills the horizontal band of width
``width`` centred at y = ``center``, phase 2 the complement.  Perimeters are
computed exactly from the primitives; Green interactions from supersampled
rasters.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .geometry import SUPERSAMPLE, Disc, LensShape, _cell_block, band_fraction
from .limit_energy import (IN_BULK, ON_INTERFACE, PLACEMENTS, ConfigurationError, DropletConfig,
                           check_negative_coefficients_first, check_negative_coefficients_zeroth)
from .torus_green import DensityGrid, TorusGreen, interaction_matrix, sup_regular_part, wrap

MIN_CELLS = 8
LEVEL_TOL = 1e-9
PGM_LEVELS = (0, 128, 255)  # phase 0, 1, 2


class OverlapError(ConfigurationError):
    pass


class ResolutionError(ConfigurationError):
    pass


@dataclass(frozen=True)
class Lamella:
    center: float = 0.0
    width: float = 0.5

    def __post_init__(self):
        if not 0 < self.width < 1:
            raise ConfigurationError(f"band width must lie in (0, 1), got {self.width}")

    @property
    def levels(self) -> tuple:
        return (self.center - self.width / 2, self.center + self.width / 2)

    def in_band1(self, y) -> np.ndarray:
        lo = self.levels[0]
        return np.mod(np.asarray(y, dtype=float) - lo, 1.0) < self.width

    def level_distance(self, y) -> float:
        return min(abs(float(wrap(y - lv))) for lv in self.levels)

    def interface_length(self) -> float:
        return 2.0


@dataclass(frozen=True)
class SharpDroplet:
    shape: str
    mass: float
    position: tuple
    placement: str = ON_INTERFACE

    def __post_init__(self):
        if self.shape not in ("disc", "lens"):
            raise ConfigurationError(f"shape must be 'disc' or 'lens', got {self.shape!r}")
        if self.placement not in PLACEMENTS:
            raise ConfigurationError(f"unknown placement {self.placement!r}")
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise ConfigurationError(f"droplet mass must be positive, got {self.mass}")
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))

    def primitive(self, eta: float):
        if self.shape == "disc":
            return Disc(self.position, eta * math.sqrt(self.mass / math.pi))
        return LensShape.of_mass(eta**2 * self.mass, self.position)


@dataclass(frozen=True)
class SharpConfig:
    eta: float
    lamella: Lamella = Lamella()
    droplets: tuple = ()
    raster_n: int = 256
    d0: float = 0.0

    def __post_init__(self):
        if not 0 < self.eta < 1:
            raise ConfigurationError(f"eta must lie in (0, 1), got {self.eta}")
        n = self.raster_n
        if n < 16 or n & (n - 1):
            raise ConfigurationError(f"raster_n must be a power of two >= 16, got {n}")
        object.__setattr__(self, "droplets", tuple(self.droplets))

    def primitives(self) -> list:
        return [d.primitive(self.eta) for d in self.droplets]

    def validate(self) -> None:
        prims = self.primitives()
        for i, (d, s) in enumerate(zip(self.droplets, prims)):
            y = d.position[1]
            dist = self.lamella.level_distance(y)
            if d.placement == ON_INTERFACE:
                if dist > LEVEL_TOL:
                    raise ConfigurationError(f"droplet {i} is not on an interface line (off by {dist:.3g})")
                if s.diameter >= 1.0:
                    raise ConfigurationError(f"droplet {i} chord exceeds the interface segment")
            else:
                if d.shape == "lens":
                    raise ConfigurationError(f"droplet {i}: lenses only sit on interfaces")
                if dist <= s.circumradius:
                    raise ConfigurationError(f"droplet {i} in bulk crosses an interface")
            if s.diameter * self.raster_n < MIN_CELLS:
                raise ResolutionError(f"droplet {i} diameter spans {s.diameter * self.raster_n:.1f} "
                                      f"cells < {MIN_CELLS}; raise raster_n")
        for i in range(len(prims)):
            for j in range(i + 1, len(prims)):
                dv = wrap(np.subtract(prims[i].center, prims[j].center))
                gap = float(np.hypot(*dv)) - prims[i].circumradius - prims[j].circumradius
                if gap <= self.d0:
                    raise OverlapError(f"droplets {i} and {j} closer than d0 = {self.d0} (gap {gap:.3g})")

    # -- masses -------------------------------------------------------------

    def phase_areas(self) -> tuple:
        """Exact (|Omega0|, |Omega1|, |Omega2|) from primitive arithmetic."""
        a0 = a1 = a2 = 0.0
        for d, s in zip(self.droplets, self.primitives()):
            a0 += s.area
            if d.placement == ON_INTERFACE:
                a1 += s.area / 2
                a2 += s.area / 2
            elif self.lamella.in_band1(d.position[1]):
                a1 += s.area
            else:
                a2 += s.area
        w = self.lamella.width
        return a0, w - a1, 1.0 - w - a2

    # -- rasters ------------------------------------------------------------

    def rasters(self, with_droplets: bool = True) -> tuple:
        """Cell-average indicators (chi0, chi1, chi2)."""
        n = self.raster_n
        lo, hi = self.lamella.levels
        b = np.broadcast_to(band_fraction(n, lo, hi)[None, :], (n, n)).copy()
        chi0 = np.zeros((n, n))
        chi1, chi2 = b, 1.0 - b
        if with_droplets and self.droplets:
            prims = self.primitives()
            ss = SUPERSAMPLE
            off = (np.arange(ss) + 0.5) / (ss * n)
            for s in prims:
                ix, iy = _cell_block(s, n)
                xs = (-0.5 + ix[:, None] / n + off[None, :]).ravel()
                ys = (-0.5 + iy[:, None] / n + off[None, :]).ravel()
                X, Y = np.meshgrid(xs, ys, indexing="ij")
                pts = np.stack([X, Y], axis=-1)
                inside = np.zeros(X.shape, dtype=bool)
                for t in prims:
                    inside |= t.contains(pts)
                band = self.lamella.in_band1(Y)
                shp = (len(ix), ss, len(iy), ss)
                f0 = inside.reshape(shp).mean(axis=(1, 3))
                f1 = (~inside & band).reshape(shp).mean(axis=(1, 3))
                cells = np.ix_(ix % n, iy % n)
                chi0[cells] = f0
                chi1[cells] = f1
                chi2[cells] = 1.0 - f0 - f1
        return DensityGrid(chi0), DensityGrid(chi1), DensityGrid(chi2)

    def labels(self) -> np.ndarray:
        chis = np.stack([c.values for c in self.rasters()])
        return np.argmax(chis, axis=0)

    def to_pgm(self, path) -> None:
        write_pgm(path, self.labels())

    # -- transforms / io ----------------------------------------------------

    def translated(self, v) -> "SharpConfig":
        vx, vy = float(v[0]), float(v[1])
        lam = replace(self.lamella, center=self.lamella.center + vy)
        ds = tuple(replace(d, position=(d.position[0] + vx, d.position[1] + vy)) for d in self.droplets)
        return replace(self, lamella=lam, droplets=ds)

    def with_eta(self, eta: float) -> "SharpConfig":
        return replace(self, eta=eta)

    def to_dict(self) -> dict:
        return {
            "eta": self.eta, "raster_n": self.raster_n, "d0": self.d0,
            "lamella": {"center": self.lamella.center, "width": self.lamella.width},
            "droplets": [{"shape": d.shape, "mass": d.mass, "position": list(d.position),
                          "placement": d.placement} for d in self.droplets],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SharpConfig":
        allowed = {"eta", "raster_n", "d0", "lamella", "droplets"}
        extra = set(d) - allowed
        if extra:
            raise ConfigurationError(f"unknown configuration keys: {sorted(extra)}")
        lam = Lamella(**d.get("lamella", {}))
        drops = []
        for item in d.get("droplets", []):
            extra = set(item) - {"shape", "mass", "position", "placement"}
            if extra:
                raise ConfigurationError(f"unknown droplet keys: {sorted(extra)}")
            drops.append(SharpDroplet(item.get("shape", "lens"), float(item["mass"]),
                                      tuple(item["position"]), item.get("placement", ON_INTERFACE)))
        return cls(eta=float(d["eta"]), lamella=lam, droplets=tuple(drops),
                   raster_n=int(d.get("raster_n", 256)), d0=float(d.get("d0", 0.0)))

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def from_json(cls, path) -> "SharpConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def write_pgm(path, labels: np.ndarray) -> None:
    """8-bit binary PGM; rows are y (top = largest y), columns x."""
    img = np.asarray(PGM_LEVELS, dtype=np.uint8)[np.asarray(labels)]
    img = np.flipud(img.T)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w)


@dataclass(frozen=True)
class ModelParams:
    gamma: tuple = ((0.0, 0.0), (0.0, 0.0))
    Gamma10: float = 0.0
    Gamma20: float = 0.0
    Gamma00: float = 0.0
    M: float = 1.0

    def __post_init__(self):
        gm = np.asarray(self.gamma, dtype=float)
        if gm.shape != (2, 2) or not np.all(np.isfinite(gm)):
            raise ConfigurationError("gamma must be a finite 2x2 matrix")
        if gm[0, 1] != gm[1, 0]:
            raise ConfigurationError("gamma must be symmetric")
        for v in (self.Gamma10, self.Gamma20, self.Gamma00, self.M):
            if not math.isfinite(v):
                raise ConfigurationError("model parameters must be finite")
        if not self.M > 0:
            raise ConfigurationError(f"M must be positive, got {self.M}")
        object.__setattr__(self, "gamma", tuple(tuple(float(v) for v in row) for row in gm))

    def full_gamma(self, eta: float) -> np.ndarray:
        """3x3 coefficients in phase order (0, 1, 2) with the droplet scalings."""
        out = np.zeros((3, 3))
        out[1:, 1:] = self.gamma
        out[0, 1] = out[1, 0] = self.Gamma10 / eta
        out[0, 2] = out[2, 0] = self.Gamma20 / eta
        out[0, 0] = self.Gamma00 / (eta**3 * abs(math.log(eta)))
        return out

    def has_negative(self) -> bool:
        return bool(np.any(np.asarray(self.gamma) < 0) or min(self.Gamma10, self.Gamma20, self.Gamma00) < 0)

    def to_dict(self) -> dict:
        return {"gamma": [list(r) for r in self.gamma], "Gamma10": self.Gamma10,
                "Gamma20": self.Gamma20, "Gamma00": self.Gamma00, "M": self.M}


def _admissibility_warning(p: ModelParams, g: TorusGreen) -> None:
    if not p.has_negative():
        return
    z = check_negative_coefficients_zeroth(p.gamma, g)
    # "for some s < 1" is the strict inequality lhs < c_isoper sqrt(M)
    f = check_negative_coefficients_first((p.Gamma10, p.Gamma20, p.Gamma00), p.M, 1 - 1e-12, g)
    if not (z.ok and f.ok):
        warnings.warn(f"negative coefficients fail the smallness conditions "
                      f"(zeroth margin {z.margin:.3g}, first margin {f.margin:.3g})",
                      RuntimeWarning, stacklevel=3)


# -- energies -------------------------------------------------------------------

def pairwise_perimeters(c: SharpConfig) -> tuple:
    """Exact (|d1 & d2|, |d1 & d0|, |d2 & d0|)."""
    c.validate()
    p12 = c.lamella.interface_length()
    p10 = p20 = 0.0
    for d, s in zip(c.droplets, c.primitives()):
        if d.placement == ON_INTERFACE:
            p12 -= s.width_along((1.0, 0.0))
            p10 += s.perimeter / 2
            p20 += s.perimeter / 2
        elif c.lamella.in_band1(d.position[1]):
            p10 += s.perimeter
        else:
            p20 += s.perimeter
    return p12, p10, p20


def interaction_table(c: SharpConfig, g: TorusGreen, with_droplets: bool = True) -> np.ndarray:
    return interaction_matrix(g, list(c.rasters(with_droplets)))


def sharp_E(c: SharpConfig, p: ModelParams, g: TorusGreen) -> float:
    _admissibility_warning(p, g)
    per = sum(pairwise_perimeters(c))
    I = interaction_table(c, g)
    return float(per + np.sum(p.full_gamma(c.eta) * I))


def E_L(c: SharpConfig, p: ModelParams, g: TorusGreen) -> float:
    """Two-phase background energy of the bands, droplets ignored."""
    c.validate()
    I = interaction_table(c, g, with_droplets=False)
    gm = np.asarray(p.gamma)
    return float(c.lamella.interface_length() + np.sum(gm * I[1:, 1:]))


def first_order_energy(c: SharpConfig, p: ModelParams, g: TorusGreen) -> float:
    return (sharp_E(c, p, g) - E_L(c, p, g)) / c.eta


# -- recovery constructions -------------------------------------------------------

def recovery_zeroth(lamella: Lamella, eta: float, M: float, raster_n: int = 256) -> SharpConfig:
    """Zeroth-order competitor: two type-0 discs of mass eta^2 M/2 at band centres.

    The density points are the band mid-lines; for straight bands every ball
    around them small enough to fit is contained in its band, so the annular
    core-shell swap that restores the band masses is the identity and the
    discs alone already give |Omega_i| = (1 - eta^2 M)/2.
    """
    if abs(lamella.width - 0.5) > 1e-12:
        raise ConfigurationError("the lamella must split the torus evenly (width 1/2)")
    r = eta * math.sqrt(M / (2 * math.pi))
    half = min(lamella.width, 1 - lamella.width) / 2
    if r >= half:
        raise ConfigurationError(f"bands too thin: disc radius {r:.3g} >= half width {half:.3g}")
    x1 = (0.0, lamella.center)
    x2 = (0.0, lamella.center + 0.5)
    drops = (SharpDroplet("disc", M / 2, x1, IN_BULK), SharpDroplet("disc", M / 2, x2, IN_BULK))
    return SharpConfig(eta=eta, lamella=lamella, droplets=drops, raster_n=raster_n)


def recovery_first(limit: DropletConfig, lamella: Lamella, eta: float, raster_n: int = 512,
                   d0: float = 0.0) -> SharpConfig:
    """First-order recovery configuration for a limit droplet measure.

    Bulk masses become discs of area eta^2 m, interface masses optimal lenses
    with their chord on the interface.  The bands are widened/narrowed
    symmetrically so that both majority phases keep equal area.
    """
    if abs(lamella.width - 0.5) > 1e-12:
        raise ConfigurationError("the lamella must split the torus evenly (width 1/2)")
    bad = limit.violations()
    if bad:
        raise ConfigurationError("; ".join(bad))
    lo, hi = lamella.levels
    a1 = a2 = 0.0
    for d in limit.droplets:
        if d.placement == IN_BULK:
            if lamella.level_distance(d.position[1]) <= LEVEL_TOL:
                raise ConfigurationError(f"bulk droplet at {d.position} lies on an interface")
            if lamella.in_band1(d.position[1]):
                a1 += eta**2 * d.mass
            else:
                a2 += eta**2 * d.mass
    delta = (a1 - a2) / 2
    new = Lamella(lamella.center, lamella.width + delta)
    drops = []
    for d in limit.droplets:
        x, y = d.position
        if d.placement == ON_INTERFACE:
            dlo, dhi = abs(float(wrap(y - lo))), abs(float(wrap(y - hi)))
            if min(dlo, dhi) > LEVEL_TOL:
                raise ConfigurationError(f"interface droplet at {d.position} is off the interface")
            y = new.levels[0] if dlo <= dhi else new.levels[1]
            drops.append(SharpDroplet("lens", d.mass, (x, y), ON_INTERFACE))
        else:
            drops.append(SharpDroplet("disc", d.mass, (x, y), IN_BULK))
    cfg = SharpConfig(eta=eta, lamella=new, droplets=tuple(drops), raster_n=raster_n, d0=d0)
    cfg.validate()
    return cfg


def band_potential_sup(lamella: Lamella, samples: int = 4096) -> float:
    """sup |v| for -v'' = chi_band - width on the unit circle (spectral solve)."""
    y = -0.5 + (np.arange(samples) + 0.5) / samples
    chi = lamella.in_band1(y).astype(float)
    k = np.fft.fftfreq(samples, d=1.0 / samples)
    sym = np.zeros(samples)
    sym[1:] = 1.0 / (4 * math.pi**2 * k[1:] ** 2)
    v = np.fft.ifft(np.fft.fft(chi - chi.mean()) * sym).real
    return float(np.max(np.abs(v)))


def ball_energy_bound(m_k: float, p: ModelParams, eta: float, g: TorusGreen,
                      lamella: Lamella = Lamella()) -> float:
    """Upper bound on the energy carried by one in-bulk disc of mass eta^2 m_k.

    perimeter + cross interaction with the bands + Gamma00 self interaction,
    the last bounded with the log + sup|R| estimate for a pair of discs.
    """
    if not 0 < m_k <= p.M:
        raise ValueError(f"need 0 < m_k <= M, got {m_k}")
    area = eta**2 * m_k
    per = 2 * eta * math.sqrt(math.pi * m_k)
    supR = sup_regular_part(g)
    self_bound = (1 - math.log(area) + math.log(math.pi)) / (4 * math.pi) + supR
    # potential of a carved band <= band potential + potential of the disc itself
    vmax = max(band_potential_sup(lamella), band_potential_sup(Lamella(lamella.center + 0.5, 1 - lamella.width)))
    vmax += area * self_bound
    cross = 2 * (abs(p.Gamma10) + abs(p.Gamma20)) / eta * area * vmax
    self_term = abs(p.Gamma00) / (eta**3 * abs(math.log(eta))) * area**2 * self_bound
    return per + cross + self_term
