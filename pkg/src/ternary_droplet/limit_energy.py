"""First-order limit energy of the droplet regime and its mass-splitting problem.

A droplet of (rescaled) mass m costs

    e0(m) = c1 sqrt(m) + c2 m^2 + c3 m

on the majority interface (c1 from the optimal lens) and the same with
c1 -> 2 sqrt(pi) in the bulk.  Splitting a total mass M into N equal parts
gives E(N) = N f(M/N), f(m) = c1 sqrt(m) + c2 m^2.

The self-interaction of a droplet eta*sqrt(m)*S of unit-mass shape S is

    eta^4 m^2 [ |log eta|/(2 pi) - log(m)/(4 pi) + kappa_S ],

so after dividing by eta^4 |log eta| the shape dependence sits in
kappa_S / |log eta|, which vanishes as eta -> 0.  ``compute_constants``
evaluates c2 at a reference scale ``eta_ref`` (where lens and disc differ)
and stores kappa_S so the limit and other scales are available.
"""
from __future__ import annotations

import dataclasses
import functools
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import optimize

from .geometry import Disc, LensShape, rasterize
from .lens_geometry import c1_constant
from .torus_green import TorusGreen, integrate_green, interaction_integral, sup_regular_part

ON_INTERFACE = "on_interface"
IN_BULK = "in_bulk"
PLACEMENTS = (ON_INTERFACE, IN_BULK)

BALL_C1 = 2 * math.sqrt(math.pi)
C_ISOPER = 2 * math.sqrt(2.0)
C3R_LOG_PART = (1 + math.log(3) + math.log(math.pi)) / (4 * math.pi)
DEFAULT_ETA_REF = 1.0 / 8.0
MIN_CELLS = 8


class ConfigurationError(ValueError):
    pass


class ThresholdUndefinedError(ValueError):
    pass


class SearchBudgetError(RuntimeError):
    pass


@dataclass(frozen=True)
class LimitConstants:
    c1: float
    c2_ball: float
    c2_lens: float
    c3: float
    gamma00: float
    gamma10: float = 0.0
    gamma20: float = 0.0
    kappa_ball: float = math.nan
    kappa_lens: float = math.nan
    eta_ref: float | None = None

    @classmethod
    def from_coefficients(cls, c1: float, c2: float, c3: float = 0.0) -> "LimitConstants":
        """Bare (c1, c2, c3) triple, same c2 for both placements."""
        return cls(c1=c1, c2_ball=c2, c2_lens=c2, c3=c3, gamma00=1.0)

    def limit(self) -> "LimitConstants":
        """eta -> 0 values: the shape term drops out and c2 = Gamma00/(2 pi)."""
        c2 = self.gamma00 / (2 * math.pi)
        return dataclasses.replace(self, c2_ball=c2, c2_lens=c2, eta_ref=None)

    def at_scale(self, eta: float) -> "LimitConstants":
        if not 0 < eta < 1:
            raise ValueError(f"eta must lie in (0, 1), got {eta}")
        if math.isnan(self.kappa_ball) or math.isnan(self.kappa_lens):
            raise ValueError("shape finite parts unknown; build with compute_constants")
        lg = abs(math.log(eta))
        base = 1 / (2 * math.pi)
        return dataclasses.replace(
            self,
            c2_ball=self.gamma00 * (base + self.kappa_ball / lg),
            c2_lens=self.gamma00 * (base + self.kappa_lens / lg),
            eta_ref=eta,
        )

    def with_c3(self, c3: float) -> "LimitConstants":
        return dataclasses.replace(self, c3=float(c3))

    def c2(self, placement: str = ON_INTERFACE) -> float:
        _check_placement(placement)
        return self.c2_lens if placement == ON_INTERFACE else self.c2_ball

    def c1_for(self, placement: str = ON_INTERFACE) -> float:
        _check_placement(placement)
        return self.c1 if placement == ON_INTERFACE else BALL_C1

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in d.items()}


def _check_placement(placement):
    if placement not in PLACEMENTS:
        raise ValueError(f"placement must be one of {PLACEMENTS}, got {placement!r}")


def _min_width_cells(shape, n):
    return shape.diameter * n


def self_interaction(g: TorusGreen, shape, n: int | None = None) -> float:
    """Raster estimate of the double integral of G over shape x shape."""
    n = n or g.grid_n
    a = rasterize([shape], n)
    return interaction_integral(g, a, a)


def compute_constants(g: TorusGreen, gammas, eta_ref: float = DEFAULT_ETA_REF,
                      grid: int | None = None, c3: float | None = None,
                      x0=(0.0, 0.0)) -> LimitConstants:
    """Limit constants for (Gamma10, Gamma20, Gamma00).

    c2 is the Gamma00-scaled self interaction of the unit-mass disc and lens
    at droplet scale ``eta_ref``; ``c3`` overrides the computed (zero)
    background constant.
    """
    g10, g20, g00 = (float(v) for v in gammas)
    if not all(math.isfinite(v) for v in (g10, g20, g00)):
        raise ConfigurationError("Gamma coefficients must be finite")
    if g10 != g20:
        raise ConfigurationError(f"Gamma10 and Gamma20 must agree, got {g10} and {g20}")
    if not 0 < eta_ref < 0.5:
        raise ConfigurationError(f"eta_ref must lie in (0, 1/2), got {eta_ref}")
    n = grid or g.grid_n
    disc = Disc((0.0, 0.0), eta_ref / math.sqrt(math.pi))
    lens = LensShape.of_mass(eta_ref**2, (0.0, 0.0))
    for s in (disc, lens):
        if _min_width_cells(s, n) < MIN_CELLS:
            raise ConfigurationError(
                f"grid {n} too coarse: unit-mass {type(s).__name__} at eta_ref={eta_ref} "
                f"spans {_min_width_cells(s, n):.1f} < {MIN_CELLS} cells")
    eta4 = eta_ref**4
    lg = abs(math.log(eta_ref))
    i_ball = self_interaction(g, disc, n)
    i_lens = self_interaction(g, lens, n)
    k_ball = i_ball / eta4 - lg / (2 * math.pi)
    k_lens = i_lens / eta4 - lg / (2 * math.pi)
    c3_val = g10 * integrate_green(g, np.asarray(x0, dtype=float)) if c3 is None else float(c3)
    return LimitConstants(
        c1=c1_constant(),
        c2_ball=g00 * i_ball / (eta4 * lg),
        c2_lens=g00 * i_lens / (eta4 * lg),
        c3=c3_val,
        gamma00=g00, gamma10=g10, gamma20=g20,
        kappa_ball=k_ball, kappa_lens=k_lens, eta_ref=eta_ref,
    )


def disc_self_interaction_exact(g: TorusGreen, area: float) -> float:
    """Disc self interaction through second order in the radius.

    The log part integrates in closed form, R(x, y) = R(0) + |x-y|^2/4 + O(r^4)
    gives the rest; the mean of |x-y|^2 over a disc pair is r^2.
    """
    from .torus_green import robin_constant

    r2 = area / math.pi
    return area**2 * ((0.5 - math.log(area) + math.log(math.pi)) / (4 * math.pi)
                      + robin_constant(g) + r2 / 4)


# -- single droplet energies --------------------------------------------------

def e0(m: float, consts: LimitConstants, placement: str = ON_INTERFACE) -> float:
    if not m > 0:
        raise ValueError(f"droplet mass must be positive, got {m}")
    c1 = consts.c1_for(placement)
    return c1 * math.sqrt(m) + consts.c2(placement) * m * m + consts.c3 * m


def _concavity_threshold(c1, c2):
    return (c1 / (8 * c2)) ** (2.0 / 3.0)


def ebar0(m: float, consts: LimitConstants, placement: str = ON_INTERFACE):
    """Optimal finite splitting of mass m: (value, masses).

    Candidates are N equal masses, optionally plus one mass below the
    concavity threshold; the best of all candidates is returned.
    """
    if not m > 0:
        raise ValueError(f"mass must be positive, got {m}")
    c1, c2 = consts.c1_for(placement), consts.c2(placement)
    if c2 <= 0:
        return e0(m, consts, placement), (m,)
    thr = _concavity_threshold(c1, c2)
    n_max = int(math.ceil(1 + m / thr)) + 1
    best = (e0(m, consts, placement), (m,))
    for n in range(1, n_max + 1):
        v = n * e0(m / n, consts, placement)
        if v < best[0]:
            best = (v, (m / n,) * n)
        hi = min(thr, m)

        def with_small(b, n=n):
            return n * e0((m - b) / n, consts, placement) + e0(b, consts, placement)

        if hi > 1e-12 * m and hi < m:
            r = optimize.minimize_scalar(with_small, bounds=(1e-12 * m, hi), method="bounded",
                                         options=dict(xatol=1e-12 * m))
            if r.fun < best[0] - 1e-15 * abs(best[0]):
                best = (float(r.fun), ((m - r.x) / n,) * n + (float(r.x),))
    return best


# -- limit configurations ---------------------------------------------------

@dataclass(frozen=True)
class Droplet:
    mass: float
    position: tuple
    placement: str = ON_INTERFACE


@dataclass(frozen=True)
class Inadmissible:
    """Marker for E0 = +infinity."""
    reason: str


@dataclass(frozen=True)
class DropletConfig:
    droplets: tuple = ()
    M: float | None = None

    @classmethod
    def from_list(cls, items, M=None) -> "DropletConfig":
        ds = []
        for it in items:
            if isinstance(it, Droplet):
                ds.append(it)
            elif isinstance(it, dict):
                ds.append(Droplet(float(it["mass"]), tuple(it["position"]),
                                  it.get("placement", ON_INTERFACE)))
            else:
                m, p, pl = it
                ds.append(Droplet(float(m), tuple(p), pl))
        return cls(tuple(ds), M)

    @property
    def total_mass(self) -> float:
        return float(sum(d.mass for d in self.droplets))

    def violations(self) -> list:
        out = []
        for i, d in enumerate(self.droplets):
            if not (d.mass > 0 and math.isfinite(d.mass)):
                out.append(f"droplet {i}: mass {d.mass} not positive")
            if d.placement not in PLACEMENTS:
                out.append(f"droplet {i}: unknown placement {d.placement!r}")
        pos = [np.asarray(d.position, dtype=float) for d in self.droplets]
        for i in range(len(pos)):
            for j in range(i + 1, len(pos)):
                dd = pos[i] - pos[j]
                dd = dd - np.floor(dd + 0.5)
                if np.all(dd == 0):
                    out.append(f"droplets {i} and {j} share a position")
        if self.M is not None and abs(self.total_mass - self.M) > 1e-12:
            out.append(f"masses sum to {self.total_mass}, expected {self.M}")
        return out

    def to_dict(self) -> dict:
        return {"M": self.M, "droplets": [
            {"mass": d.mass, "position": list(d.position), "placement": d.placement}
            for d in self.droplets]}


def E0(config: DropletConfig, consts: LimitConstants):
    """Limit energy: ebar0 over interface droplets, e0 (bulk) over bulk droplets."""
    if consts.gamma10 != consts.gamma20:
        raise ConfigurationError("E0 requires Gamma10 == Gamma20")
    bad = config.violations()
    if bad:
        return Inadmissible("; ".join(bad))
    total = 0.0
    for d in config.droplets:
        if d.placement == ON_INTERFACE:
            total += ebar0(d.mass, consts, ON_INTERFACE)[0]
        else:
            total += e0(d.mass, consts, IN_BULK)
    return total


# -- splitting ----------------------------------------------------------------

@dataclass(frozen=True)
class SplitResult:
    count: int
    masses: tuple
    energy: float
    candidate_counts: tuple

    def to_dict(self) -> dict:
        return {"N_star": self.count, "masses": list(self.masses), "energy": self.energy,
                "candidate_counts": list(self.candidate_counts)}


def split_energy(N: int, M: float, c1: float, c2: float, c3: float = 0.0) -> float:
    m = M / N
    return N * (c1 * math.sqrt(m) + c2 * m * m) + c3 * M


def continuous_count(M: float, c1: float, c2: float) -> float:
    return M * (c1 / (2 * c2)) ** (-2.0 / 3.0)


def optimal_split(M: float, consts: LimitConstants) -> SplitResult:
    """Best number of equal interface droplets among {1, floor N, ceil N}."""
    if not M > 0:
        raise ValueError(f"total mass must be positive, got {M}")
    c1, c2, c3 = consts.c1, consts.c2_lens, consts.c3
    if c2 <= 0:
        return SplitResult(1, (M,), split_energy(1, M, c1, c2, c3), (1, 1))
    nc = continuous_count(M, c1, c2)
    lo, hi = max(1, math.floor(nc)), max(1, math.ceil(nc))
    cands = sorted({1, lo, hi})
    vals = [split_energy(n, M, c1, c2, c3) for n in cands]
    k = int(np.argmin(vals))
    n = cands[k]
    return SplitResult(n, (M / n,) * n, vals[k], (math.floor(nc), math.ceil(nc)))


@dataclass(frozen=True)
class BruteForceResult:
    value: float
    splitting: tuple
    grid_value: float
    grid_splitting: tuple


def split_bruteforce(M: float, consts: LimitConstants, mass_grid: float,
                     placement: str = ON_INTERFACE, refine: bool = False,
                     budget: int = 10**6) -> BruteForceResult:
    """Exhaustive minimisation of sum e0(m_i) over partitions into grid multiples.

    Unbounded-knapsack dynamic programming over the total mass gives the grid
    optimum.  With ``refine`` a second table, indexed by the number of parts,
    supplies the best grid partition for each admissible count; each is
    polished by a continuous constrained minimisation (no equal-mass
    assumption) and the best polished value is reported.  The raw grid
    optimum is always kept alongside.
    """
    if not (M > 0 and mass_grid > 0):
        raise ValueError("M and mass_grid must be positive")
    K = int(round(M / mass_grid))
    if K < 1 or abs(K * mass_grid - M) > 1e-9 * M:
        raise ValueError(f"mass_grid {mass_grid} does not divide M = {M}")
    if K * K > budget:
        raise SearchBudgetError(f"{K} grid units need {K * K} DP states > budget {budget}")
    h = M / K
    e = np.array([np.inf] + [e0(j * h, consts, placement) for j in range(1, K + 1)])

    best = np.full(K + 1, np.inf)
    choice = np.zeros(K + 1, dtype=int)
    best[0] = 0.0
    for t in range(1, K + 1):
        cand = best[t - 1::-1][:t] + e[1:t + 1]  # best[t - j] + e[j], j = 1..t
        j = int(np.argmin(cand))
        best[t], choice[t] = cand[j], j + 1
    grid_split, t = [], K
    while t > 0:
        grid_split.append(float(choice[t] * h))
        t -= choice[t]
    grid_split = tuple(sorted(grid_split, reverse=True))
    grid_val = float(best[K])
    if not refine:
        return BruteForceResult(grid_val, grid_split, grid_val, grid_split)

    # at most one part lies below the concavity threshold, so p <= 1 + M/thr
    c1, c2 = consts.c1_for(placement), consts.c2(placement)
    p_max = K if c2 <= 0 else min(K, int(math.ceil(1 + M / _concavity_threshold(c1, c2))) + 1)
    if p_max * K * K > 50 * budget:
        raise SearchBudgetError(f"refinement over {p_max} part counts exceeds the budget")
    # by_count[p, t]: min energy of exactly p parts totalling t units
    by_count = np.full((p_max + 1, K + 1), np.inf)
    arg = np.zeros((p_max + 1, K + 1), dtype=int)
    by_count[0, 0] = 0.0
    idx = np.arange(K + 1)
    diff = idx[:, None] - idx[None, :]
    valid = (idx[None, :] >= 1) & (diff >= 0)
    dsafe = np.where(valid, diff, 0)
    for p in range(1, p_max + 1):
        cand = np.where(valid, by_count[p - 1][dsafe] + e[None, :], np.inf)
        arg[p] = np.argmin(cand, axis=1)
        by_count[p] = cand[idx, arg[p]]

    def parts(p):
        out, t = [], K
        for q in range(p, 0, -1):
            j = arg[q, t]
            out.append(float(j * h))
            t -= j
        return np.array(out)

    def total(x):
        return sum(e0(v, consts, placement) for v in x)

    val, split = grid_val, grid_split
    for p in range(2, p_max + 1):
        if not np.isfinite(by_count[p, K]):
            continue
        with warnings.catch_warnings():
            # SLSQP clips trial points to the bounds and says so; harmless here
            warnings.simplefilter("ignore", RuntimeWarning)
            res = optimize.minimize(total, parts(p), method="SLSQP",
                                    bounds=[(1e-12 * M, M)] * p,
                                    constraints=[{"type": "eq", "fun": lambda x: np.sum(x) - M}],
                                    options=dict(ftol=1e-15, maxiter=500))
        x = res.x * (M / np.sum(res.x))
        v = total(x)
        if v < val:
            val, split = v, tuple(sorted((float(t) for t in x), reverse=True))
    if e[K] < val:
        val, split = float(e[K]), (M,)
    return BruteForceResult(float(val), split, grid_val, grid_split)


class Thresholds(NamedTuple):
    concavity: float
    continuous_count_base: float
    two_mass: float


def thresholds(consts: LimitConstants, placement: str = ON_INTERFACE) -> Thresholds:
    c1, c2 = consts.c1_for(placement), consts.c2(placement)
    if not c1 > 0:
        raise ThresholdUndefinedError(f"c1 must be positive, got {c1}")
    if not c2 > 0:
        raise ThresholdUndefinedError(f"thresholds need c2 > 0, got {c2}")
    return Thresholds(
        concavity=_concavity_threshold(c1, c2),
        continuous_count_base=(c1 / (2 * c2)) ** (2.0 / 3.0),
        two_mass=(2 * (math.sqrt(2) - 1) * c1 / c2) ** (2.0 / 3.0),
    )


# -- negative-coefficient admissibility ---------------------------------------

def torus_isoperimetric_ratio(a):
    """Per_min(a)/sqrt(a) on the unit torus for area fractions a <= 1/2."""
    a = np.asarray(a, dtype=float)
    return np.minimum(2 * np.sqrt(np.pi * a), 2.0) / np.sqrt(a)


def isoperimetric_constant_oracle(samples: int = 100001) -> float:
    """Numerical minimum of Per_min(a)/sqrt(a) over a in (0, 1/2]."""
    a = np.linspace(0.5 / samples, 0.5, samples)
    r = torus_isoperimetric_ratio(a)
    i = int(np.argmin(r))
    lo, hi = a[max(i - 1, 0)], a[min(i + 1, samples - 1)]
    res = optimize.minimize_scalar(lambda t: float(torus_isoperimetric_ratio(t)),
                                   bounds=(lo, hi), method="bounded", options=dict(xatol=1e-14))
    return float(min(res.fun, r[i]))


@functools.lru_cache(maxsize=16)
def c3R(g: TorusGreen) -> float:
    return C3R_LOG_PART + sup_regular_part(g)


class CheckResult(NamedTuple):
    ok: bool
    margin: float
    lhs: float
    rhs: float


def check_negative_coefficients_zeroth(gamma, g: TorusGreen, c_isoper: float = C_ISOPER) -> CheckResult:
    """max_i sum_j |gamma_ij| < sqrt2 c_isoper / c3R  (strict)."""
    gm = np.asarray(gamma, dtype=float)
    if gm.shape != (2, 2):
        raise ValueError(f"gamma must be 2x2, got shape {gm.shape}")
    if gm[0, 1] != gm[1, 0]:
        raise ValueError("gamma must be symmetric")
    lhs = float(np.max(np.abs(gm).sum(axis=1)))
    rhs = math.sqrt(2) * c_isoper / c3R(g)
    return CheckResult(lhs < rhs, rhs - lhs, lhs, rhs)


def check_negative_coefficients_first(Gammas, M: float, s: float, g: TorusGreen,
                                      c_isoper: float = C_ISOPER) -> CheckResult:
    """(c3R/2) M (|G10|+|G20|) + 2 M^2 |G00| < s c_isoper sqrt(M)  (strict)."""
    if not 0 < s < 1:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    if not M > 0:
        raise ValueError(f"M must be positive, got {M}")
    g10, g20, g00 = (float(v) for v in Gammas)
    lhs = 0.5 * c3R(g) * M * (abs(g10) + abs(g20)) + 2 * M * M * abs(g00)
    rhs = s * c_isoper * math.sqrt(M)
    return CheckResult(lhs < rhs, rhs - lhs, lhs, rhs)
