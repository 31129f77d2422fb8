"""Linearized operators around the ground state and their eigenstructure.

The operators are

    L+ f = -f'' + f - p Q^{p-1} f,      L- f = -f'' + f - Q^{p-1} f,

acting componentwise, and the full linearization L f = -L-(Im f) + i L+(Re f).
In the mass-supercritical range L has exactly one pair of real nonzero
eigenvalues +-e0 with normalized eigenfunctions Y+- satisfying conj(Y+) = Y-.
The eigenpair is obtained from a dense solve of the real block system

    [[0, -L-], [L+, 0]] (Y1, Y2) = e0 (Y1, Y2)

and the coercivity of the quadratic form (f1, L+ f1) + (f2, L- f2) is
verified on the subspace orthogonal to {Q', Y2} x {Q, Y1}.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import CoercivityViolation, IncompatibleGrids, InvalidArgument, SpectralFailure
from .ground_state import GroundState, _dense_second_derivative, fit_exponential_rate
from .spectral_grid import Field, derivative_array, l2_norm_array, resample_band_limited


@dataclass
class Eigenpair:
    """Unstable eigenvalue e0 and eigenfunctions of the linearization.

    Y1, Y2 are the real and imaginary parts of Y+; conj(Y+) = Y- holds by
    construction.  y_star = int (Y1^2 - Y2^2) dx enters the Jacobian of the
    final-data map and satisfies y_star^2 < 1.
    """

    e0: float
    grid: object
    Y1: np.ndarray
    Y2: np.ndarray
    p: float
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def Yplus(self):
        return Field(self.grid, self.Y1 + 1j * self.Y2)

    @property
    def Yminus(self):
        return Field(self.grid, self.Y1 - 1j * self.Y2)

    @property
    def y_star(self):
        return float(np.sum(self.Y1**2 - self.Y2**2) * self.grid.spacing)

    def on_grid(self, grid):
        """Fourier-upsampled copy on a finer grid over the same box."""
        if grid == self.grid:
            return self
        y1 = resample_band_limited(self.Y1, self.grid, grid)
        y2 = resample_band_limited(self.Y2, self.grid, grid)
        return Eigenpair(e0=self.e0, grid=grid, Y1=y1, Y2=y2, p=self.p)

    def scaled(self, w):
        """Per-scale bundle for Y+-_w = w^{-2/(p-1)} Y+-(x/w) on self.grid."""
        from .spectral_grid import evaluate_band_limited

        key = float(w)
        if key not in self._cache:
            grid = self.grid
            fac = w ** (-2.0 / (self.p - 1.0))
            if w == 1.0:
                y1w, y2w = self.Y1.copy(), self.Y2.copy()
            else:
                targets = grid.x / w
                inside = np.abs(targets) <= grid.half_length
                y1w = np.zeros(grid.n_points)
                y2w = np.zeros(grid.n_points)
                y1w[inside] = evaluate_band_limited(grid, self.Y1, targets[inside])
                y2w[inside] = evaluate_band_limited(grid, self.Y2, targets[inside])
                y1w *= fac
                y2w *= fac
            self._cache[key] = {
                "y1w_rfft": np.fft.rfft(y1w),
                "y2w_rfft": np.fft.rfft(y2w),
                "l2sq": float(np.sum(y1w**2 + y2w**2) * grid.spacing),
            }
        return self._cache[key]


def _potentials(Q: GroundState):
    qpm1 = Q.values ** (Q.p - 1.0)
    return qpm1


def apply_linearized(f: Field, variant: str, Q: GroundState) -> Field:
    """Apply L+, L- (componentwise over C) or the full linearization L."""
    if f.grid != Q.grid:
        raise IncompatibleGrids("field and ground state live on different grids")
    qpm1 = _potentials(Q)
    v = f.values
    if variant == "Lplus":
        out = -derivative_array(f.grid, v, 2) + v - Q.p * qpm1 * v
    elif variant == "Lminus":
        out = -derivative_array(f.grid, v, 2) + v - qpm1 * v
    elif variant == "L":
        f1, f2 = v.real, v.imag
        lm = np.real(-derivative_array(f.grid, f2, 2)) + f2 - qpm1 * f2
        lp = np.real(-derivative_array(f.grid, f1, 2)) + f1 - Q.p * qpm1 * f1
        out = -lm + 1j * lp
    else:
        raise InvalidArgument(f"unknown variant {variant!r}")
    return Field(f.grid, out)


def quadratic_form(f: Field, Q: GroundState) -> float:
    """(L f, f) = int Re(f) L+ Re(f) + int Im(f) L- Im(f)."""
    if f.grid != Q.grid:
        raise IncompatibleGrids("field and ground state live on different grids")
    f1, f2 = f.values.real, f.values.imag
    qpm1 = _potentials(Q)
    lp = np.real(-derivative_array(f.grid, f1, 2)) + f1 - Q.p * qpm1 * f1
    lm = np.real(-derivative_array(f.grid, f2, 2)) + f2 - qpm1 * f2
    return float((np.sum(f1 * lp) + np.sum(f2 * lm)) * f.grid.spacing)


def _operator_matrices(Q: GroundState):
    grid = Q.grid
    d2 = _dense_second_derivative(grid)
    eye = np.eye(grid.n_points)
    qpm1 = _potentials(Q)
    lplus = -d2 + eye - Q.p * np.diag(qpm1)
    lminus = -d2 + eye - np.diag(qpm1)
    return lplus, lminus


def solve_eigenpair(Q: GroundState, tol: float = 1e-8) -> Eigenpair:
    """Dense eigensolve of the 2N x 2N block system for the pair +-e0.

    Selects the real positive eigenvalue with a spatially decaying
    eigenvector; normalizes ||Y+||_L2 = 1 and fixes the sign by Y1(0) > 0.
    """
    grid = Q.grid
    n = grid.n_points
    lplus, lminus = _operator_matrices(Q)
    block = np.zeros((2 * n, 2 * n))
    block[:n, n:] = -lminus
    block[n:, :n] = lplus
    eigvals, eigvecs = np.linalg.eig(block)

    edge = n // 16
    best = None
    for i in range(2 * n):
        lam = eigvals[i]
        if abs(lam.imag) > 1e-8 * max(1.0, abs(lam.real)) or lam.real <= 1e-2:
            continue
        vec = eigvecs[:, i]
        mag = np.abs(vec)
        tails = np.concatenate(
            [mag[:edge], mag[n - edge : n], mag[n : n + edge], mag[2 * n - edge :]]
        )
        if np.max(tails) > 1e-6 * np.max(mag):
            continue  # radiation-like mode, not an eigenfunction
        if best is None or lam.real > best[0]:
            best = (lam.real, vec)
    if best is None:
        raise SpectralFailure(
            "no real positive eigenvalue with decaying eigenvector; "
            "check p > 5 and the grid size"
        )

    e0, vec = best
    if np.max(np.abs(vec.imag)) > 1e-8 * np.max(np.abs(vec)):
        raise SpectralFailure("eigenvector of the real eigenvalue is not real")
    y1 = vec[:n].real
    y2 = vec[n:].real
    # the operator commutes with parity and the eigenvalue is simple, so the
    # eigenfunction is even; project out the odd contamination the
    # non-normal dense solve leaves behind (the residual is preserved)
    flip = np.concatenate([[0], np.arange(n - 1, 0, -1)])
    y1 = 0.5 * (y1 + y1[flip])
    y2 = 0.5 * (y2 + y2[flip])
    nrm = np.sqrt(np.sum(y1**2 + y2**2) * grid.spacing)
    y1, y2 = y1 / nrm, y2 / nrm
    if y1[n // 2] < 0:
        y1, y2 = -y1, -y2

    eig = Eigenpair(e0=float(e0), grid=grid, Y1=y1, Y2=y2, p=Q.p)
    res = eigen_residual(Q, eig)
    if res > tol:
        raise SpectralFailure(f"eigenpair residual {res} exceeds tol {tol}")
    return eig


def eigen_residual(Q: GroundState, eig: Eigenpair) -> float:
    """|| L Y+ - e0 Y+ ||_L2 evaluated with spectral derivatives."""
    grid = eig.grid
    qvals = Q.values if Q.grid == grid else resample_band_limited(Q.values, Q.grid, grid)
    qpm1 = qvals ** (Q.p - 1.0)
    lp = np.real(-derivative_array(grid, eig.Y1, 2)) + eig.Y1 - Q.p * qpm1 * eig.Y1
    lm = np.real(-derivative_array(grid, eig.Y2, 2)) + eig.Y2 - qpm1 * eig.Y2
    res = (-lm - eig.e0 * eig.Y1) + 1j * (lp - eig.e0 * eig.Y2)
    return l2_norm_array(grid, res)


def eigenfunction_decay(eig: Eigenpair, window=(5.0, 15.0)) -> float:
    """Fitted exponential decay rate of |Y+| on the window."""
    return fit_exponential_rate(eig.grid.x, np.hypot(eig.Y1, eig.Y2), window)


def form_min_eigenvalue(Q: GroundState, eig: Eigenpair | None = None, constrained=True):
    """Smallest eigenvalue of the quadratic form, optionally constrained.

    Constraints: int Q' f1 = 0, int Q f2 = 0, Im int Y+ conj(f) = 0,
    Im int Y- conj(f) = 0; the last two are equivalent to f1 _|_ Y2 and
    f2 _|_ Y1, so the form block-decouples and both blocks are solved as
    symmetric dense problems on the projected subspace.
    """
    grid = Q.grid
    lplus, lminus = _operator_matrices(Q)
    lplus = 0.5 * (lplus + lplus.T)
    lminus = 0.5 * (lminus + lminus.T)
    if not constrained:
        return float(
            min(scipy.linalg.eigvalsh(lplus)[0], scipy.linalg.eigvalsh(lminus)[0])
        )
    if eig is None:
        raise InvalidArgument("constrained form needs the eigenpair")
    if eig.grid != grid:
        eig = eig.on_grid(grid) if eig.grid.n_points < grid.n_points else eig
        if eig.grid != grid:
            raise IncompatibleGrids("eigenpair grid does not match ground-state grid")
    dq = np.real(derivative_array(grid, Q.values, 1))
    gap1 = _projected_min(lplus, [dq, eig.Y2])
    gap2 = _projected_min(lminus, [Q.values.real, eig.Y1])
    return float(min(gap1, gap2))


def _projected_min(mat, constraints):
    basis = scipy.linalg.null_space(np.asarray(constraints, dtype=float))
    return scipy.linalg.eigvalsh(basis.T @ mat @ basis)[0]


def coercivity_gap(Q: GroundState, eig: Eigenpair) -> float:
    """Constrained smallest eigenvalue; positive in the supercritical range."""
    gap = form_min_eigenvalue(Q, eig, constrained=True)
    if gap <= 0:
        raise CoercivityViolation(
            f"constrained quadratic form has nonpositive smallest eigenvalue {gap}"
        )
    return gap
