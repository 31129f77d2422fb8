"""Periodic 1D grid, complex lattice fields and spectral calculus.

Everything else in the package sits on top of this layer: Fourier
differentiation, rectangle-rule quadrature (spectrally accurate for smooth
periodic integrands) and the L2/H1/Lp norms.

Conventions
-----------
The box is [-L, L) sampled at ``n_points`` equispaced nodes,
``x_j = -L + j * spacing`` with ``spacing = 2 L / n_points``.  Angular
wavenumbers follow ``numpy.fft`` ordering.  ``n_points`` is required to be a
power of two so that ``spacing * n_points == 2 L`` holds exactly in floating
point.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import IncompatibleGrids, InvalidArgument


def _is_power_of_two(n):
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic lattice on [-half_length, half_length)."""

    n_points: int
    half_length: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.n_points < 16:
            raise InvalidArgument(f"n_points must be >= 16, got {self.n_points}")
        if not _is_power_of_two(self.n_points):
            raise InvalidArgument(f"n_points must be a power of two, got {self.n_points}")
        if not (self.half_length > 0 and np.isfinite(self.half_length)):
            raise InvalidArgument(f"half_length must be positive, got {self.half_length}")

    @property
    def spacing(self):
        return 2.0 * self.half_length / self.n_points

    @property
    def x(self):
        """Node coordinates, shape (n_points,)."""
        if "x" not in self._cache:
            xs = -self.half_length + self.spacing * np.arange(self.n_points)
            xs.flags.writeable = False
            self._cache["x"] = xs
        return self._cache["x"]

    @property
    def wavenumbers(self):
        """Angular wavenumbers in fft order, shape (n_points,)."""
        if "k" not in self._cache:
            k = 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.spacing)
            k.flags.writeable = False
            self._cache["k"] = k
        return self._cache["k"]

    @property
    def wavenumbers_real(self):
        """Angular wavenumbers for rfft layout, shape (n_points//2 + 1,)."""
        if "kr" not in self._cache:
            kr = 2.0 * np.pi * np.fft.rfftfreq(self.n_points, d=self.spacing)
            kr.flags.writeable = False
            self._cache["kr"] = kr
        return self._cache["kr"]

    def key(self):
        return (self.n_points, self.half_length)


@dataclass(frozen=True)
class Field:
    """Complex-valued lattice function bound to a grid.

    Values are frozen after construction; all public operations return new
    fields, so instances can be shared freely between threads.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.shape != (self.grid.n_points,):
            raise InvalidArgument(
                f"values must have shape ({self.grid.n_points},), got {vals.shape}"
            )
        if not np.all(np.isfinite(vals.real)) or not np.all(np.isfinite(vals.imag)):
            raise InvalidArgument("field values must be finite")
        vals = vals.copy() if vals is self.values else vals
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def zero(cls, grid):
        return cls(grid, np.zeros(grid.n_points, dtype=np.complex128))


def _require_same_grid(f, g):
    if f.grid != g.grid:
        raise IncompatibleGrids(f"grids differ: {f.grid.key()} vs {g.grid.key()}")


def derivative_array(grid, values, order):
    """Spectral derivative of a raw array; internal fast path."""
    spec = np.fft.fft(values)
    k = grid.wavenumbers
    if order == 1:
        spec = spec * (1j * k)
    elif order == 2:
        spec = spec * (-(k ** 2))
    else:
        raise InvalidArgument(f"order must be 1 or 2, got {order}")
    return np.fft.ifft(spec)


def derivative(f: Field, order: int) -> Field:
    """Fourier derivative; exact for band-limited inputs."""
    return Field(f.grid, derivative_array(f.grid, f.values, order))


def inner_product(f: Field, g: Field) -> complex:
    """Rectangle-rule quadrature of f * conj(g) over the box."""
    _require_same_grid(f, g)
    return complex(np.sum(f.values * np.conj(g.values)) * f.grid.spacing)


def norm(f: Field, kind: str = "L2", p: float | None = None) -> float:
    """L2, H1 (with spectral d/dx) or Lp norm of a field."""
    h = f.grid.spacing
    if kind == "L2":
        return float(np.sqrt(np.sum(np.abs(f.values) ** 2) * h))
    if kind == "H1":
        df = derivative_array(f.grid, f.values, 1)
        return float(
            np.sqrt((np.sum(np.abs(f.values) ** 2) + np.sum(np.abs(df) ** 2)) * h)
        )
    if kind == "Lp":
        if p is None or p < 1:
            raise InvalidArgument(f"Lp norm needs p >= 1, got {p}")
        return float((np.sum(np.abs(f.values) ** p) * h) ** (1.0 / p))
    raise InvalidArgument(f"unknown norm kind {kind!r}")


def l2_norm_array(grid, values):
    return float(np.sqrt(np.sum(np.abs(values) ** 2) * grid.spacing))


def h1_norm_array(grid, values):
    df = derivative_array(grid, values, 1)
    return float(np.sqrt((np.sum(np.abs(values) ** 2) + np.sum(np.abs(df) ** 2)) * grid.spacing))


def shift_real_spectrum(grid, rspec, s):
    """Evaluate the band-limited interpolant of a real array at x - s.

    ``rspec`` is the rfft of the array; the shift theorem keeps spectral
    accuracy for any real s.
    """
    kr = grid.wavenumbers_real
    return np.fft.irfft(rspec * np.exp(-1j * kr * s), n=grid.n_points)


def resample_band_limited(values, src_grid, dst_grid):
    """Fourier interpolation of a real array onto a finer grid (same box)."""
    if src_grid.half_length != dst_grid.half_length:
        raise InvalidArgument("resampling requires identical half_length")
    if dst_grid.n_points < src_grid.n_points:
        raise InvalidArgument("resampling only upsamples")
    if dst_grid.n_points == src_grid.n_points:
        return np.asarray(values, dtype=float).copy()
    spec = np.fft.rfft(np.asarray(values, dtype=float))
    out = np.zeros(dst_grid.n_points // 2 + 1, dtype=np.complex128)
    out[: spec.size] = spec
    # shared Nyquist bin of the coarse grid is split between +/- modes
    out[spec.size - 1] *= 0.5
    return np.fft.irfft(out, n=dst_grid.n_points) * (dst_grid.n_points / src_grid.n_points)


def evaluate_band_limited(grid, values, targets):
    """Evaluate the trigonometric interpolant of a real array at arbitrary points.

    Direct mode summation; O(n * len(targets)), used once per rescale and
    cached by callers.  Points outside [-L, L) wrap periodically, which is
    harmless for profiles that decay below roundoff at the boundary.
    """
    n = grid.n_points
    spec = np.fft.fft(np.asarray(values, dtype=float))
    spec[n // 2] = 0.0  # drop the Nyquist mode; content is at roundoff level
    k = grid.wavenumbers
    y = np.asarray(targets, dtype=float) - (-grid.half_length)
    phases = np.exp(1j * np.outer(y, k))
    return np.real(phases @ spec) / n
