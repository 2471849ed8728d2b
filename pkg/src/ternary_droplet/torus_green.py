"""Mean-zero Laplace Green's function on the flat unit torus.

The torus is [-1/2, 1/2]^2 with periodic identification and unit area.  The
Green's function solves -Delta G(., y) = delta_y - 1 with zero mean and splits
as

    G(x, y) = -(1/2pi) log|x - y| + R(x - y),

where |x - y| is the minimum-image distance.  Point values use an Ewald-type
heat-kernel splitting: a short-range sum of exponential integrals over nearby
lattice images plus a Gaussian-damped reciprocal sum.  Densities on a uniform
raster are handled spectrally.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.special import exp1

TAIL_TOL = 1e-12
EULER_GAMMA = float(np.euler_gamma)


class SingularityError(ValueError):
    """Raised when G is evaluated at coincident points."""


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def ein(z):
    """Entire exponential integral Ein(z) = E1(z) + gamma + log z."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = z < 1.0
    zs = z[small]
    # alternating series; 40 terms are exact to machine precision for z < 1
    acc = np.zeros_like(zs)
    term = np.ones_like(zs)
    for k in range(1, 40):
        term = term * zs / k
        acc += (-1) ** (k + 1) * term / k
    out[small] = acc
    zl = z[~small]
    out[~small] = exp1(zl) + EULER_GAMMA + np.log(zl)
    return out


def wrap(d):
    """Map displacements to the fundamental cell [-1/2, 1/2)."""
    d = np.asarray(d, dtype=float)
    return d - np.floor(d + 0.5)


@dataclass(frozen=True)
class TorusGreen:
    """Configuration of the torus Green's function evaluator.

    ``ewald_split`` is the heat-kernel splitting time tau: the real-space part
    carries the heat kernel up to time tau, the reciprocal part the rest.
    """

    fourier_cutoff: int = 8
    ewald_split: float = 1.0 / (4.0 * math.pi)
    grid_n: int = 256
    _kvecs: np.ndarray = field(init=False, repr=False, compare=False)
    _kweights: np.ndarray = field(init=False, repr=False, compare=False)
    _images: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        K = int(self.fourier_cutoff)
        tau = float(self.ewald_split)
        if K < 8:
            raise ValueError(f"fourier_cutoff must be >= 8, got {K}")
        if not (tau > 0 and math.isfinite(tau)):
            raise ValueError(f"ewald_split must be a positive real, got {tau}")
        if self.grid_n < 16 or not _is_power_of_two(self.grid_n):
            raise ValueError(f"grid_n must be a power of two >= 16, got {self.grid_n}")
        tail = math.exp(-4 * math.pi**2 * K**2 * tau) / (4 * math.pi**2 * K**2)
        if tail * 2 * math.pi * K > TAIL_TOL:
            raise ValueError(
                f"reciprocal tail {tail:.1e} too large for ewald_split={tau}; "
                "increase fourier_cutoff or ewald_split"
            )
        # half lattice of wave vectors, each standing for +/-k
        ks = [(i, j) for i in range(-K, K + 1) for j in range(-K, K + 1)
              if (i > 0 or (i == 0 and j > 0)) and i * i + j * j <= K * K]
        kv = np.array(ks, dtype=float)
        k2 = np.sum(kv**2, axis=1)
        w = 2.0 * np.exp(-4 * math.pi**2 * k2 * tau) / (4 * math.pi**2 * k2)
        # real-space images: E1(d^2/(4 tau)) < 1e-17 once d^2 > 4 tau * 37
        reach = math.sqrt(4 * tau * 37.0) + 1.0
        N = int(math.ceil(reach))
        imgs = [(a, b) for a in range(-N, N + 1) for b in range(-N, N + 1)
                if (a, b) != (0, 0) and max(abs(a), abs(b)) - 1 <= reach]
        object.__setattr__(self, "_kvecs", kv)
        object.__setattr__(self, "_kweights", w)
        object.__setattr__(self, "_images", np.array(imgs, dtype=float))

    def with_params(self, **changes) -> "TorusGreen":
        params = dict(fourier_cutoff=self.fourier_cutoff,
                      ewald_split=self.ewald_split, grid_n=self.grid_n)
        params.update(changes)
        return TorusGreen(**params)

    # -- point evaluations -------------------------------------------------

    def _smooth_part(self, d):
        """Everything except the n = 0 real-space image, at displacement d."""
        tau = self.ewald_split
        flat = d.reshape(-1, 2)
        phase = 2 * math.pi * flat @ self._kvecs.T
        recip = np.cos(phase) @ self._kweights
        real = np.zeros(len(flat))
        for img in self._images:
            r2 = np.sum((flat - img) ** 2, axis=1)
            real += exp1(r2 / (4 * tau))
        return (recip + real / (4 * math.pi) - tau).reshape(d.shape[:-1])

    def regular(self, d):
        """R at displacement(s) d, shape (..., 2); finite on the diagonal."""
        d = wrap(_as_points(d))
        tau = self.ewald_split
        r2 = np.sum(d**2, axis=-1)
        near = (math.log(4 * tau) - EULER_GAMMA + ein(r2 / (4 * tau))) / (4 * math.pi)
        return near + self._smooth_part(d)

    def green(self, d):
        d = wrap(_as_points(d))
        r2 = np.sum(d**2, axis=-1)
        if np.any(r2 == 0.0):
            raise SingularityError("G is singular at coincident points")
        return self.regular(d) - np.log(r2) / (4 * math.pi)

    def certificate(self, n_samples: int = 16, seed: int = 0) -> float:
        """Max |G_K - G_2K| over random displacements (convergence check)."""
        rng = np.random.default_rng(seed)
        d = rng.uniform(-0.5, 0.5, size=(n_samples, 2))
        finer = self.with_params(fourier_cutoff=2 * self.fourier_cutoff)
        return float(np.max(np.abs(self.regular(d) - finer.regular(d))))


def _as_points(p):
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != 2:
        raise ValueError(f"points must have trailing dimension 2, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("non-finite coordinates")
    return p


def green_eval(g: TorusGreen, x, y):
    """G(x, y) for points (or arrays of points) x, y."""
    return _scalar(g.green(_as_points(x) - _as_points(y)))


def regular_part(g: TorusGreen, x, y):
    """R(x, y) = G(x, y) + log|x - y| / 2pi, with the Robin limit on the diagonal."""
    return _scalar(g.regular(_as_points(x) - _as_points(y)))


def _scalar(v):
    v = np.asarray(v)
    return float(v) if v.ndim == 0 else v


def sup_regular_part(g: TorusGreen, grid: int = 64, refine: int = 4) -> float:
    """Estimate sup |R| by grid search over displacements plus local refinement.

    R depends only on x - y, so the search runs over the fundamental cell.
    The returned value is never below the grid maximum.
    """
    s = (np.arange(grid) / grid) - 0.5
    X, Y = np.meshgrid(s, s, indexing="ij")
    vals = np.abs(g.regular(np.stack([X, Y], axis=-1)))
    best = float(vals.max())
    order = np.argsort(vals, axis=None)[::-1][:refine]
    for idx in order:
        i, j = np.unravel_index(idx, vals.shape)
        x0 = np.array([X[i, j], Y[i, j]])
        res = optimize.minimize(lambda p: -abs(float(g.regular(p))), x0,
                                method="Nelder-Mead",
                                options=dict(xatol=1e-10, fatol=1e-14, maxiter=400))
        best = max(best, -float(res.fun))
    return best


def robin_constant(g: TorusGreen) -> float:
    """R(0): the diagonal value of the regular part."""
    return float(g.regular(np.zeros(2)))


def integrate_green(g: TorusGreen, y0, order: int = 48) -> float:
    """Quadrature of G(., y0) over the torus.

    The cell centred at y0 is split into eight triangles with a corner at the
    singularity; a Duffy map u = t^2 removes the log singularity so that
    tensor Gauss-Legendre converges rapidly.
    """
    y0 = _as_points(y0)
    t, wt = np.polynomial.legendre.leggauss(order)
    t = 0.5 * (t + 1.0)
    wt = 0.5 * wt
    T, V = np.meshgrid(t, t, indexing="ij")
    W = np.outer(wt, wt)
    u = 0.5 * T**2          # radial-like coordinate in [0, 1/2]
    jac = 0.5 * 2 * T * u   # du/dt * (Duffy jacobian u)
    total = 0.0
    for sx in (1.0, -1.0):
        for sy in (1.0, -1.0):
            for swap in (False, True):
                a, b = u, u * V
                if swap:
                    a, b = b, a
                d = np.stack([sx * a, sy * b], axis=-1)
                total += float(np.sum(W * jac * g.green(d)))
    return total


# -- raster densities -----------------------------------------------------

@dataclass(frozen=True)
class DensityGrid:
    """Cell averages of a density on an n x n raster of the unit torus.

    ``values[i, j]`` is the average over the cell centred at
    (-1/2 + (i + 1/2)/n, -1/2 + (j + 1/2)/n); axis 0 is x, axis 1 is y.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"density grid must be square, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("density grid contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def cell_area(self) -> float:
        return 1.0 / self.n**2

    def mean(self) -> float:
        return float(self.values.mean())

    def total(self) -> float:
        return float(self.values.sum() * self.cell_area)

    def to_csv(self, path) -> None:
        header = f"n={self.n} row-major x-index then y-index, cell averages"
        np.savetxt(path, self.values.reshape(1, -1), delimiter=",", header=header)

    @classmethod
    def from_csv(cls, path) -> "DensityGrid":
        with open(path) as fh:
            head = fh.readline()
        n = int(head.split("n=")[1].split()[0])
        vals = np.loadtxt(path, delimiter=",", ndmin=2)
        return cls(vals.reshape(n, n))

    def to_binary(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(np.int64(self.n).tobytes())
            fh.write(self.values.astype("<f8").tobytes())

    @classmethod
    def from_binary(cls, path) -> "DensityGrid":
        raw = open(path, "rb").read()
        n = int(np.frombuffer(raw[:8], dtype=np.int64)[0])
        return cls(np.frombuffer(raw[8:], dtype="<f8").reshape(n, n).copy())


def cell_centers(n: int):
    s = -0.5 + (np.arange(n) + 0.5) / n
    return np.meshgrid(s, s, indexing="ij")


def wavenumber_sq(n: int) -> np.ndarray:
    """|k|^2 for integer wave vectors in numpy FFT ordering."""
    k = np.fft.fftfreq(n, d=1.0 / n)
    return k[:, None] ** 2 + k[None, :] ** 2


def inverse_laplacian_symbol(n: int) -> np.ndarray:
    k2 = wavenumber_sq(n)
    out = np.zeros_like(k2)
    nz = k2 > 0
    out[nz] = 1.0 / (4 * math.pi**2 * k2[nz])
    return out


def convolve_green(g: TorusGreen, rho: DensityGrid) -> DensityGrid:
    """Potential phi with -Delta phi = rho - mean(rho) and mean(phi) = 0."""
    if not _is_power_of_two(rho.n):
        raise ValueError(f"grid resolution must be a power of two, got {rho.n}")
    spec = np.fft.fft2(rho.values) * inverse_laplacian_symbol(rho.n)
    return DensityGrid(np.real(np.fft.ifft2(spec)))


def interaction_integral(g: TorusGreen, a: DensityGrid, b: DensityGrid) -> float:
    """Double integral of G(x, y) a(x) b(y); the zero modes drop out."""
    if a.n != b.n:
        raise ValueError(f"resolution mismatch: {a.n} vs {b.n}")
    if not _is_power_of_two(a.n):
        raise ValueError(f"grid resolution must be a power of two, got {a.n}")
    A = np.fft.fft2(a.values)
    B = np.fft.fft2(b.values)
    # Parseval: sum over modes of conj(A) B / (4 pi^2 k^2), normalised by n^4
    s = np.sum(np.real(np.conj(A) * B) * inverse_laplacian_symbol(a.n))
    return float(s) / a.n**4


def interaction_matrix(g: TorusGreen, fields) -> np.ndarray:
    """Pairwise interaction integrals for a list of same-size grids."""
    n = fields[0].n
    spec = [np.fft.fft2(f.values) for f in fields]
    sym = inverse_laplacian_symbol(n)
    m = len(fields)
    out = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            v = float(np.sum(np.real(np.conj(spec[i]) * spec[j]) * sym)) / n**4
            out[i, j] = out[j, i] = v
    return out
