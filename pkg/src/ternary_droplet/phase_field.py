"""Diffuse-interface ternary energy and its conserved (H^-1) gradient flow.

The state is (u1, u2) on an n x n periodic grid, with u0 = 1 - u1 - u2.
Phase indices follow the sharp model: 0 is the minority phase, 1 and 2 the
majority phases, and ``gamma[i][j]`` multiplies the Green interaction of
u_i with u_j.

Time stepping is linearly stabilised semi-implicit: gradient, Green and a
stabilising S*u term implicit per Fourier mode, the triple-well force
explicit.  Empirically the scheme dissipates energy for
dt <= STABILITY_C * eps * h^2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .torus_green import TorusGreen, cell_centers, inverse_laplacian_symbol, wavenumber_sq

STABILITY_C = 100.0  # energy stayed monotone up to C ~ 500 in tests
BLOWUP = 10.0
# reduced variables: (u0, u1, u2) = P (u1, u2) + (1, 0, 0)
_P = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


class ResolutionError(ValueError):
    pass


class FlowDivergence(RuntimeError):
    def __init__(self, msg, last_state=None, step=None):
        super().__init__(msg)
        self.last_state = last_state
        self.step = step


def triple_well(u1, u2, u0):
    """W = sum_{i<j} u_i^2 u_j^2."""
    a, b, c = u1 * u1, u2 * u2, u0 * u0
    return a * b + a * c + b * c


def triple_well_grad(u1, u2, u0):
    """(dW/du1, dW/du2, dW/du0) treating the three entries as independent."""
    a, b, c = u1 * u1, u2 * u2, u0 * u0
    return 2 * u1 * (b + c), 2 * u2 * (a + c), 2 * u0 * (a + b)


@dataclass(frozen=True)
class PhaseState:
    u1: np.ndarray
    u2: np.ndarray

    def __post_init__(self):
        u1 = np.asarray(self.u1, dtype=float)
        u2 = np.asarray(self.u2, dtype=float)
        if u1.shape != u2.shape or u1.ndim != 2 or u1.shape[0] != u1.shape[1]:
            raise ValueError("u1 and u2 must be equal square grids")
        object.__setattr__(self, "u1", u1)
        object.__setattr__(self, "u2", u2)

    @property
    def n(self) -> int:
        return self.u1.shape[0]

    @property
    def u0(self) -> np.ndarray:
        return 1.0 - self.u1 - self.u2

    def fields(self) -> tuple:
        """(u0, u1, u2) in phase order."""
        return self.u0, self.u1, self.u2

    def masses(self) -> tuple:
        return tuple(float(f.mean()) for f in self.fields())

    def labels(self) -> np.ndarray:
        return np.argmax(np.stack(self.fields()), axis=0)


@dataclass(frozen=True)
class FlowParams:
    eps: float = 1.0 / 32
    mobilities: tuple = (1.0, 1.0, 1.0)  # (M1, M2, M0)
    gamma: tuple = ((0.0,) * 3,) * 3
    dt: float = 1e-5
    steps: int = 1000
    stabilization: float | None = None
    record_every: int = 50
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if len(self.mobilities) != 3 or min(self.mobilities) <= 0:
            raise ValueError("mobilities must be three positive numbers")
        gm = np.asarray(self.gamma, dtype=float)
        if gm.shape != (3, 3) or not np.allclose(gm, gm.T, rtol=0, atol=0) or not np.all(np.isfinite(gm)):
            raise ValueError("gamma must be a finite symmetric 3x3 matrix")
        if self.steps < 0 or self.record_every < 1:
            raise ValueError("steps must be >= 0 and record_every >= 1")
        object.__setattr__(self, "gamma", tuple(tuple(float(v) for v in r) for r in gm))
        object.__setattr__(self, "mobilities", tuple(float(v) for v in self.mobilities))

    @property
    def S(self) -> float:
        return 2.0 / self.eps if self.stabilization is None else float(self.stabilization)

    def dt_max(self, n: int) -> float:
        return STABILITY_C * self.eps / n**2

    @classmethod
    def droplet_regime(cls, eta: float = 0.2, M: float = 1.0, Gammas=(0.0, 0.0, 1.0),
                       gamma_major=((0.0, 0.0), (0.0, 0.0)), **kw) -> "FlowParams":
        """gamma with the droplet scalings Gamma_i0/eta and Gamma00/(eta^3 |log eta|)."""
        g10, g20, g00 = Gammas
        gm = np.zeros((3, 3))
        gm[1:, 1:] = gamma_major
        gm[0, 1] = gm[1, 0] = g10 / eta
        gm[0, 2] = gm[2, 0] = g20 / eta
        gm[0, 0] = g00 / (eta**3 * abs(math.log(eta)))
        meta = {"eta": eta, "M": M, "Gammas": list(Gammas),
                "gamma_major": [list(r) for r in gamma_major]}
        return cls(gamma=tuple(map(tuple, gm)), meta=meta, **kw)

    def to_dict(self) -> dict:
        return {"eps": self.eps, "mobilities": list(self.mobilities),
                "gamma": [list(r) for r in self.gamma], "dt": self.dt, "steps": self.steps,
                "stabilization": self.S, "record_every": self.record_every, **self.meta}


def _check_resolution(n, eps):
    if eps * n < 4:
        raise ResolutionError(f"interface unresolved: eps*n = {eps * n:.3g} < 4")


def diffuse_energy(s: PhaseState, p: FlowParams, g: TorusGreen | None = None) -> float:
    """Gradient + (1/eps) W + Green interaction, all integrals over the unit torus."""
    n = s.n
    _check_resolution(n, p.eps)
    q2 = 4 * math.pi**2 * wavenumber_sq(n)
    fields = s.fields()
    mob = (p.mobilities[2], p.mobilities[0], p.mobilities[1])  # phase order 0, 1, 2
    spec = [np.fft.fft2(f) for f in fields]
    grad = sum(p.eps / m * np.sum(q2 * np.abs(F) ** 2) for m, F in zip(mob, spec)) / n**4
    well = float(np.mean(triple_well(s.u1, s.u2, s.u0))) / p.eps
    sym = inverse_laplacian_symbol(n)
    gm = np.asarray(p.gamma)
    inter = 0.0
    for i in range(3):
        for j in range(3):
            if gm[i, j] != 0.0:
                inter += gm[i, j] * float(np.sum(np.real(np.conj(spec[i]) * spec[j]) * sym))
    return float(grad + well + inter / n**4)


class _Stepper:
    """Per-mode 2x2 implicit operator for a fixed (n, params)."""

    def __init__(self, n: int, p: FlowParams):
        _check_resolution(n, p.eps)
        self.n, self.p = n, p
        q2 = 4 * math.pi**2 * wavenumber_sq(n)
        ginv = np.where(q2 > 0, 1.0 / np.where(q2 > 0, q2, 1.0), 0.0)
        m1, m2, m0 = p.mobilities
        D = np.array([[1 / m1 + 1 / m0, 1 / m0], [1 / m0, 1 / m2 + 1 / m0]])
        Gt = _P.T @ np.asarray(p.gamma) @ _P
        S = p.S
        A = (2 * p.eps * q2[..., None, None] * D + 2 * ginv[..., None, None] * Gt
             + S * np.eye(2))
        mat = np.eye(2) + p.dt * q2[..., None, None] * A
        self.inv = np.linalg.inv(mat)
        self.q2, self.S = q2, S

    def __call__(self, s: PhaseState) -> PhaseState:
        p, dt, q2, S = self.p, self.p.dt, self.q2, self.S
        u1, u2 = s.u1, s.u2
        d1, d2, d0 = triple_well_grad(u1, u2, s.u0)
        U1, U2 = np.fft.fft2(u1), np.fft.fft2(u2)
        R1 = U1 - dt * q2 * (np.fft.fft2((d1 - d0) / p.eps) - S * U1)
        R2 = U2 - dt * q2 * (np.fft.fft2((d2 - d0) / p.eps) - S * U2)
        inv = self.inv
        V1 = inv[..., 0, 0] * R1 + inv[..., 0, 1] * R2
        V2 = inv[..., 1, 0] * R1 + inv[..., 1, 1] * R2
        # the zero mode is untouched (q2 = 0), so means are conserved exactly
        V1[0, 0], V2[0, 0] = U1[0, 0], U2[0, 0]
        return PhaseState(np.real(np.fft.ifft2(V1)), np.real(np.fft.ifft2(V2)))


def flow_step(s: PhaseState, p: FlowParams, g: TorusGreen | None = None) -> PhaseState:
    out = _Stepper(s.n, p)(s)
    _check_divergence(out, s, 1)
    return out


def _check_divergence(new: PhaseState, old: PhaseState, step: int) -> None:
    big = max(np.max(np.abs(new.u1)), np.max(np.abs(new.u2)))
    if not np.isfinite(big) or big > BLOWUP:
        raise FlowDivergence(f"field blow-up at step {step} (max |u| = {big:.3g})",
                             last_state=old, step=step)


class TraceRow(NamedTuple):
    step: int
    energy: float
    mass0: float
    mass1: float
    mass2: float
    simplex_error: float


def _row(step, s, p, g):
    m0, m1, m2 = s.masses()
    serr = float(np.max(np.abs(s.u0 + s.u1 + s.u2 - 1.0)))
    return TraceRow(step, diffuse_energy(s, p, g), m0, m1, m2, serr)


def simulate(init: PhaseState, p: FlowParams, g: TorusGreen | None = None,
             frames_every: int | None = None):
    """Run p.steps steps; returns (final, trace, frames).

    The trace records energy and masses every ``p.record_every`` steps
    (and at steps 0 and p.steps); frames are (step, state) snapshots.
    """
    step_fn = _Stepper(init.n, p)
    s = init
    trace = [_row(0, s, p, g)]
    frames = [(0, s)] if frames_every else []
    for k in range(1, p.steps + 1):
        new = step_fn(s)
        _check_divergence(new, s, k)
        s = new
        if k % p.record_every == 0 or k == p.steps:
            trace.append(_row(k, s, p, g))
        if frames_every and (k % frames_every == 0 or k == p.steps):
            frames.append((k, s))
    return s, trace, frames


# -- initial data and diagnostics ------------------------------------------------

def lamellar_init(n: int, m0: float, noise: float = 1e-2, seed: int = 0,
                  center: float = 0.0, width: float = 0.5) -> PhaseState:
    """Bands of u1 / u2 with a uniform noisy minority field of mean m0.

    Means are (m0, (1 - m0)/2, (1 - m0)/2) up to rounding.
    """
    if not 0 <= m0 < 1:
        raise ValueError(f"minority mass fraction must lie in [0, 1), got {m0}")
    rng = np.random.default_rng(seed)
    _, Y = cell_centers(n)
    band = (np.mod(Y - (center - width / 2), 1.0) < width).astype(float)
    u0 = m0 + noise * rng.standard_normal((n, n))
    u0 += m0 - u0.mean()
    u1 = band * (1.0 - u0)
    u1 += (1.0 - m0) / 2 - u1.mean()
    return PhaseState(u1, 1.0 - u0 - u1)


def interface_distance(s: PhaseState) -> np.ndarray:
    """Distance (torus units) from each cell to the u1 = u2 level set."""
    from scipy import ndimage

    n = s.n
    phi = s.u1 - s.u2
    pos = phi > 0
    mask = np.zeros_like(pos)
    for ax in (0, 1):
        nb = np.roll(pos, -1, axis=ax)
        flip = pos != nb
        mask |= flip
        mask |= np.roll(flip, 1, axis=ax)
    if not mask.any():
        return np.full((n, n), np.inf)
    tiled = np.tile(~mask, (3, 3))
    d = ndimage.distance_transform_edt(tiled)[n:2 * n, n:2 * n]
    return d / n


def localization(s: PhaseState, eps: float, radius: float = 4.0) -> float:
    """Fraction of (positive) minority mass within radius*eps of the u1/u2 interface."""
    u0 = np.clip(s.u0, 0.0, None)
    total = u0.sum()
    if total == 0:
        return 0.0
    d = interface_distance(s)
    return float(u0[d <= radius * eps].sum() / total)


def write_trace_csv(path, trace) -> None:
    with open(path, "w") as fh:
        fh.write("step,energy,mass0,mass1,mass2,simplex_error\n")
        for r in trace:
            fh.write(f"{r.step},{r.energy:.17g},{r.mass0:.17g},{r.mass1:.17g},{r.mass2:.17g},"
                     f"{r.simplex_error:.3e}\n")
