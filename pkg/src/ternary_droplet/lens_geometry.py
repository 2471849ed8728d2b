"""Optimal lens: the minority-phase shape sitting on a straight interface.

The lens minimises (perimeter - covered chord) at fixed area.  Its boundary
is two circular arcs of radius L/sqrt(3), each subtending 2pi/3, meeting the
chord at 120 degree triple junctions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

SQRT3 = math.sqrt(3.0)
# area of the unit-chord lens: (1/3)(2pi/3 - sqrt3/2)
UNIT_CHORD_AREA = (2 * math.pi / 3 - SQRT3 / 2) / 3.0


class ConvergenceError(RuntimeError):
    """Shape optimisation did not converge; carries the best iterate."""

    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


def _check_mass(m):
    if not (m > 0 and math.isfinite(m)):
        raise ValueError(f"mass must be positive and finite, got {m}")


def chord_length(m: float) -> float:
    _check_mass(m)
    return math.sqrt(m / UNIT_CHORD_AREA)


def arc_radius(L: float) -> float:
    return L / SQRT3


def lens_profile(x, L: float):
    """Upper boundary f(x) over the chord [0, L]; the lower one is -f."""
    x = np.asarray(x, dtype=float)
    if L <= 0:
        raise ValueError(f"chord length must be positive, got {L}")
    if np.any(x < 0) or np.any(x > L):
        raise ValueError("x outside [0, L]")
    s = 1.0 - 2.0 * x / L
    out = (L / SQRT3) * (np.sqrt(1.0 - 0.75 * s**2) - 0.5)
    return float(out) if out.ndim == 0 else out


def lens_slope(x, L: float):
    s = 1.0 - 2.0 * np.asarray(x, dtype=float) / L
    return (SQRT3 / 2) * s / np.sqrt(1.0 - 0.75 * s**2)


def lens_perimeter(m: float) -> float:
    L = chord_length(m)
    return 2 * arc_radius(L) * (2 * math.pi / 3)


def lens_area(L: float) -> float:
    return UNIT_CHORD_AREA * L * L


def contact_angle_deg(L: float) -> float:
    """Interior angle between the two arcs at a chord endpoint, in degrees.

    Each arc leaves the chord at angle atan f'(0) = 60 degrees, so the lens
    angle is 120 degrees; the remaining two angles at the junction are
    180 - 60 = 120 degrees each.
    """
    return 2 * math.degrees(math.atan(float(lens_slope(0.0, L))))


def c1_constant() -> float:
    """Perimeter minus chord of the unit-mass lens."""
    return lens_perimeter(1.0) - chord_length(1.0)


# -- quadrature cross-checks -------------------------------------------------

def chord_length_by_quadrature(m: float) -> float:
    """Root-solve 2 * integral of f over [0, L] = m with f from lens_profile."""
    _check_mass(m)

    def area(L):
        val, _ = integrate.quad(lambda x: lens_profile(x, L), 0.0, L, epsabs=1e-14, epsrel=1e-13)
        return 2 * val - m

    hi = 1.0
    while area(hi) < 0:
        hi *= 2
    return optimize.brentq(area, 1e-12, hi, xtol=1e-15, rtol=1e-15)


def perimeter_by_quadrature(m: float) -> float:
    L = chord_length(m)
    # the slope blows up nowhere (|f'| <= sqrt3) so plain adaptive quadrature is fine
    val, _ = integrate.quad(lambda x: math.sqrt(1 + lens_slope(x, L) ** 2), 0.0, L,
                            epsabs=1e-13, epsrel=1e-13)
    return 2 * val


@dataclass(frozen=True)
class Lens:
    mass: float
    center: tuple = (0.0, 0.0)
    orientation: tuple = (1.0, 0.0)

    def __post_init__(self):
        _check_mass(self.mass)
        o = np.asarray(self.orientation, dtype=float)
        o = o / np.linalg.norm(o)
        object.__setattr__(self, "orientation", (float(o[0]), float(o[1])))

    @property
    def chord(self) -> float:
        return chord_length(self.mass)

    @property
    def perimeter(self) -> float:
        return lens_perimeter(self.mass)

    @property
    def area(self) -> float:
        return lens_area(self.chord)

    def profile_samples(self, k: int = 201):
        L = self.chord
        x = np.linspace(0.0, L, k)
        return x, lens_profile(x, L)

    def to_csv(self, path, k: int = 201) -> None:
        x, f = self.profile_samples(k)
        np.savetxt(path, np.column_stack([x, f]), delimiter=",", header="x,f", comments="")


# -- discrete shape optimisation oracle ---------------------------------------

@dataclass
class ShapeOracleResult:
    x: np.ndarray
    profile: np.ndarray
    chord: float
    objective: float
    iterations: int

    @property
    def endpoint_slope(self) -> float:
        return float(self.profile[1] / (self.x[1] - self.x[0]))


def shape_oracle(m: float, k: int = 256, maxiter: int = 20000, gtol: float = 1e-11) -> ShapeOracleResult:
    """Minimise perimeter minus chord over symmetric piecewise-linear profiles.

    Unknowns are the chord L and k - 1 interior heights g_i.  The area
    constraint is enforced by projection: heights are rescaled so that the
    symmetric polygon always has area m, which turns the problem into an
    unconstrained one solved by L-BFGS with analytic gradients.
    """
    _check_mass(m)
    if k < 32:
        raise ValueError(f"need k >= 32 nodes, got {k}")

    def unpack(z):
        logL = z[0]
        g = z[1:]
        return math.exp(logL), g

    def project(L, g):
        # trapezoid area of the symmetric shape: 2 * h * sum(g)
        h = L / k
        a = 2 * h * np.sum(g)
        return g * (m / a), a

    def objective(z):
        L, g = unpack(z)
        h = L / k
        f, a = project(L, g)
        fp = np.concatenate([[0.0], f, [0.0]])
        df = np.diff(fp)
        seg = np.sqrt(h * h + df * df)
        J = 2 * seg.sum() - L
        # gradient wrt f
        t = df / seg
        dJdf = 2 * (t[:-1] - t[1:])
        # chain rule through projection f = g * m / a, a = 2 h sum(g)
        s = m / a
        dJdg = s * dJdf - s * np.dot(dJdf, g) / np.sum(g) * np.ones_like(g)
        # wrt L at fixed g: h changes, f scales as 1/L
        dJdh = 2 * np.sum(h / seg)
        dfdL = -f / L
        dJdL = dJdh / k + np.dot(dJdf, dfdL) - 1.0
        return J, np.concatenate([[dJdL * L], dJdg])

    L0 = math.sqrt(m) * 1.2
    xs = np.linspace(0, L0, k + 1)[1:-1]
    g0 = np.sin(math.pi * xs / L0)
    z0 = np.concatenate([[math.log(L0)], g0])
    res = optimize.minimize(objective, z0, jac=True, method="L-BFGS-B",
                            options=dict(maxiter=maxiter, gtol=gtol, ftol=1e-15, maxcor=30))
    L, g = unpack(res.x)
    f, _ = project(L, g)
    x = np.linspace(0.0, L, k + 1)
    prof = np.concatenate([[0.0], f, [0.0]])
    out = ShapeOracleResult(x=x, profile=prof, chord=L, objective=float(res.fun), iterations=res.nit)
    if not res.success and res.nit >= maxiter:
        raise ConvergenceError(f"shape oracle hit the iteration budget ({maxiter})", best=out)
    return out
