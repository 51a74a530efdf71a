"""Symmetric tridiagonal rate matrices and certified Perron pairs.

A vector of positive transition rates lam_0..lam_n defines an
(n+2) x (n+2) symmetric tridiagonal matrix with zero diagonal and
off-diagonal entries lam_i ** -0.5.  The matrix is componentwise
nonnegative and irreducible, so its largest eigenvalue (the Perron root
sigma) is simple and positive and the associated eigenvector can be taken
strictly positive.  Everything else in the package is driven by that pair:
the steady-state production rate is sigma**-2 and the site densities and
rate sensitivities are rational expressions in (sigma, v).

Solver: a few shifted power steps orient the iterate, then inverse
iteration with Rayleigh-quotient shifts converges cubically; a
Sturm-sequence bisection plus inverse iteration serves as fallback when
the accelerated path stalls.  Every returned pair is certified by the
residual max|Bv - sigma v| <= tol * sigma together with strict positivity
of v (only the Perron pair has a positive eigenvector).
"""

from __future__ import annotations

import dataclasses

import numpy as np
import scipy.linalg

from .errors import NumericalError

DEFAULT_TOL = 1e-12

_POWER_STEPS = 10
_ACCEL_STEPS = 60


def _frozen_array(values, name):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclasses.dataclass(frozen=True)
class RateVector:
    """Positive transition rates lam_0..lam_n of a chain with n sites."""

    lam: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.lam, "lam")
        if arr.size < 2:
            raise ValueError("need at least two rates (chain length n >= 1)")
        for i, value in enumerate(arr):
            if not np.isfinite(value) or value <= 0.0:
                raise ValueError(f"rate at index {i} must be positive, got {value}")
        object.__setattr__(self, "lam", arr)

    @property
    def n(self):
        """Chain length (number of sites)."""
        return self.lam.size - 1

    @classmethod
    def ones(cls, n):
        if n < 1:
            raise ValueError(f"chain length must be >= 1, got {n}")
        return cls(np.ones(n + 1))


@dataclasses.dataclass(frozen=True)
class TridiagSymMatrix:
    """Zero-diagonal symmetric tridiagonal matrix with positive off-diagonal."""

    offdiag: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.offdiag, "offdiag")
        if arr.size < 2:
            raise ValueError("matrix dimension must be at least 3")
        for i, value in enumerate(arr):
            if not np.isfinite(value) or value <= 0.0:
                raise ValueError(
                    f"off-diagonal entry at index {i} must be positive, got {value}"
                )
        object.__setattr__(self, "offdiag", arr)

    @property
    def dim(self):
        return self.offdiag.size + 1

    def matvec(self, x):
        b = self.offdiag
        y = np.empty_like(x)
        y[0] = b[0] * x[1]
        y[-1] = b[-1] * x[-2]
        y[1:-1] = b[:-1] * x[:-2] + b[1:] * x[2:]
        return y

    def to_dense(self):
        out = np.zeros((self.dim, self.dim))
        idx = np.arange(self.dim - 1)
        out[idx, idx + 1] = self.offdiag
        out[idx + 1, idx] = self.offdiag
        return out


@dataclasses.dataclass(frozen=True)
class PerronPair:
    """Perron root sigma with its positive unit-norm eigenvector.

    residual is the certificate max|Bv - sigma v| achieved by the solver.
    """

    sigma: float
    v: np.ndarray
    residual: float

    def __post_init__(self):
        object.__setattr__(self, "v", _frozen_array(self.v, "v"))
        if self.sigma <= 0.0:
            raise ValueError(f"Perron root must be positive, got {self.sigma}")
        if self.v.min() <= 0.0:
            raise ValueError("Perron vector must be strictly positive")


def build_matrix(rates):
    """Matrix of the rate vector: off-diagonal entries lam_i ** -0.5."""
    return TridiagSymMatrix(rates.lam ** -0.5)


def _rayleigh(b, x):
    # x is unit norm; the quadratic form reduces to the off-diagonal sum
    return 2.0 * np.dot(b, x[:-1] * x[1:])


def _solve_shifted(b, shift, rhs):
    ab = np.zeros((3, rhs.size))
    ab[0, 1:] = b
    ab[1, :] = -shift
    ab[2, :-1] = b
    return scipy.linalg.solve_banded((1, 1), ab, rhs, check_finite=False)


def _inverse_step(b, shift, x):
    """One inverse-iteration step, or None if the solve is unusable."""
    try:
        y = _solve_shifted(b, shift, x)
    except scipy.linalg.LinAlgError:
        return None
    norm = np.linalg.norm(y)
    if not np.isfinite(norm) or norm == 0.0:
        return None
    y = y / norm
    return -y if y.sum() < 0 else y


def _sturm_count(b, x):
    """Number of eigenvalues below x, via the LDL^T pivot recurrence."""
    d = -x
    count = 1 if d < 0 else 0
    for bi in b:
        if d == 0.0:
            d = -1e-300
        d = -x - bi * bi / d
        if d < 0:
            count += 1
    return count


def perron(matrix, tol=DEFAULT_TOL, x0=None):
    """Perron root and positive unit eigenvector of the tridiagonal matrix.

    The result satisfies max|Bv - sigma v| <= tol * sigma.  x0, when given,
    warm-starts the iteration (useful when solving a sequence of nearby
    matrices); it does not affect the certificate.
    """
    if not 0.0 < tol <= 1e-3:
        raise ValueError(f"tol must be in (0, 1e-3], got {tol}")
    b = matrix.offdiag
    dim = matrix.dim
    budget = 100 * dim
    used = 0

    row_sums = np.zeros(dim)
    row_sums[:-1] += b
    row_sums[1:] += b
    sigma_hi = row_sums.max()  # strict upper bound: row sums are not constant
    sigma_lo = b.max()

    if x0 is not None and x0.size == dim and np.all(x0 > 0):
        x = x0 / np.linalg.norm(x0)
    else:
        x = np.full(dim, dim ** -0.5)

    for _ in range(_POWER_STEPS):
        y = matrix.matvec(x) + sigma_hi * x
        x = y / np.linalg.norm(y)
        used += 1

    best_resid = np.inf
    shift = sigma_hi * (1.0 + 1e-12)
    for _ in range(_ACCEL_STEPS):
        if used >= budget:
            break
        y = _inverse_step(b, shift, x)
        used += 1
        if y is None:
            shift *= 1.0 + 1e-13
            continue
        theta = _rayleigh(b, y)
        resid = np.max(np.abs(matrix.matvec(y) - theta * y))
        x = y
        best_resid = min(best_resid, resid)
        if resid <= tol * theta and y.min() > 0.0:
            # polish: one more inverse step at the converged shift sharpens v
            z = _inverse_step(b, theta * (1.0 + 1e-14), y)
            if z is not None and z.min() > 0.0:
                theta_z = _rayleigh(b, z)
                resid_z = np.max(np.abs(matrix.matvec(z) - theta_z * z))
                if resid_z <= resid:
                    return PerronPair(theta_z, z, resid_z)
            return PerronPair(theta, y, resid)
        # Rayleigh shift once the iterate is close; conservative shift before
        shift = theta if resid < 1e-3 * theta else sigma_hi * (1.0 + 1e-12)

    # Sturm fallback: bisection certifies the root even when the gap is tiny
    lo, hi = sigma_lo, sigma_hi * (1.0 + 1e-15)
    while hi - lo > 1e-15 * hi and used < budget:
        mid = 0.5 * (lo + hi)
        if _sturm_count(b, mid) == dim:
            hi = mid
        else:
            lo = mid
        used += 1
    x = np.full(dim, dim ** -0.5)
    for _ in range(3):
        y = _inverse_step(b, hi * (1.0 + 1e-14), x)
        if y is None:
            hi *= 1.0 + 1e-13
            continue
        x = y
        used += 1
    theta = _rayleigh(b, x)
    resid = np.max(np.abs(matrix.matvec(x) - theta * x))
    if resid <= tol * theta and x.min() > 0.0:
        return PerronPair(theta, x, resid)
    raise NumericalError(
        f"Perron iteration did not converge within {budget} iterations",
        residual=min(best_resid, resid),
    )


def toeplitz_oracle(n):
    """Closed-form Perron pair of the all-ones rate vector.

    For lam = 1 the matrix is Toeplitz: sigma = 2 cos(pi / (n+3)) and the
    eigenvector entries are sqrt(2/(n+3)) sin(i pi / (n+3)), i = 1..n+2.
    The normalization is exact because the squared sines sum to (n+3)/2.
    """
    if n < 1:
        raise ValueError(f"chain length must be >= 1, got {n}")
    size = n + 3
    sigma = 2.0 * np.cos(np.pi / size)
    i = np.arange(1, size)
    v = np.sqrt(2.0 / size) * np.sin(i * np.pi / size)
    matrix = TridiagSymMatrix(np.ones(n + 1))
    resid = float(np.max(np.abs(matrix.matvec(v) - sigma * v)))
    return PerronPair(sigma, v, resid)
