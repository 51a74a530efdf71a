"""Ribosome-flow-model steady states, trajectories, and sensitivities.

The chain dynamics are

    dx_i/dt = lam_{i-1} x_{i-1} (1 - x_i) - lam_i x_i (1 - x_{i+1})

with the boundary conventions x_0 = 1 and x_{n+1} = 0.  The unique
equilibrium e in (0,1)^n balances the flow through every link, and the
steady production rate R = lam_n e_n obeys R < min_i lam_i.

Two independent routes compute the equilibrium:

* spectral: R = sigma**-2 and e_i = v_{i+2} / (lam_i**0.5 sigma v_{i+1})
  from the Perron pair of the rate matrix;
* shooting: bisection on R of the forward recursion
  e_{i+1} = 1 - R / (lam_i e_i), e_0 = 1, driving e_{n+1} to zero.

Their agreement is the module's central cross-check.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import NumericalError
from .spectral import DEFAULT_TOL, build_matrix, perron

SHOOT_TOL = 1e-10
DEFAULT_STEP = 0.01

_BRACKET_EPS = 1e-12
_CUBE_SLACK = 1e-9
_CONVERGENCE_EPS = 1e-10


@dataclasses.dataclass(frozen=True)
class SteadyState:
    """Equilibrium densities e_1..e_n and production rate R."""

    e: np.ndarray
    R: float

    def __post_init__(self):
        arr = np.asarray(self.e, dtype=float).copy()
        arr.flags.writeable = False
        object.__setattr__(self, "e", arr)
        if arr.size < 1 or arr.min() <= 0.0 or arr.max() >= 1.0:
            raise ValueError("densities must lie strictly inside (0, 1)")
        if self.R <= 0.0:
            raise ValueError(f"production rate must be positive, got {self.R}")

    def flow_residual(self, rates):
        """max_i |lam_i e_i (1 - e_{i+1}) - R| with e_0 = 1, e_{n+1} = 0."""
        full = np.concatenate(([1.0], self.e, [0.0]))
        flows = rates.lam * full[:-1] * (1.0 - full[1:])
        return float(np.max(np.abs(flows - self.R)))


@dataclasses.dataclass(frozen=True)
class SensitivityVector:
    """Partial derivatives s_i = dR/dlam_i; strictly positive."""

    s: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.s, dtype=float).copy()
        arr.flags.writeable = False
        object.__setattr__(self, "s", arr)
        if arr.min() <= 0.0:
            raise ValueError("sensitivities must be strictly positive")

    def relative_spread(self):
        """(max - min) / mean; zero exactly at an optimum."""
        return float((self.s.max() - self.s.min()) / self.s.mean())


@dataclasses.dataclass(frozen=True)
class Trajectory:
    """Integrated states, one row per stored time; stays inside [0,1]^n."""

    times: np.ndarray
    states: np.ndarray
    converged: bool


def _steady_from_pair(rates, sigma, v, tol):
    lam = rates.lam
    R = sigma ** -2.0
    e = v[2:] / (np.sqrt(lam[1:]) * sigma * v[1:-1])
    if e.min() <= 0.0 or e.max() >= 1.0:
        overshoot = max(-e.min(), e.max() - 1.0)
        if overshoot > 10.0 * tol:
            raise NumericalError(
                "spectral densities left (0,1)", residual=overshoot
            )
    return SteadyState(e, R)


def steady_state_spectral(rates, tol=DEFAULT_TOL):
    """Equilibrium via the Perron pair: R = sigma**-2."""
    pair = perron(build_matrix(rates), tol)
    return _steady_from_pair(rates, pair.sigma, pair.v, tol)


def _shoot(lam, R):
    """Forward recursion from e_0 = 1; None when a density hits zero early."""
    e = np.empty(lam.size + 1)
    e[0] = 1.0
    for i in range(lam.size):
        e[i + 1] = 1.0 - R / (lam[i] * e[i])
        if e[i + 1] <= 0.0 and i + 1 < lam.size:
            return None
    return e


def steady_state_shooting(rates, tol=SHOOT_TOL):
    """Equilibrium via bisection on R of the forward density recursion.

    Larger R drives the terminal density lower, so the recursion brackets
    monotonically: a run that hits a nonpositive density before the end is
    classified as "R too large".
    """
    lam = rates.lam
    lam_min = lam.min()
    lo = _BRACKET_EPS
    hi = (1.0 - _BRACKET_EPS) * lam_min
    e_lo = _shoot(lam, lo)
    if e_lo is None or e_lo[-1] <= 0.0:
        raise NumericalError("shooting bracket failed at the lower end")
    for _ in range(200):
        if hi - lo <= 1e-16 * lam_min:
            break
        mid = 0.5 * (lo + hi)
        e_mid = _shoot(lam, mid)
        if e_mid is None or e_mid[-1] < 0.0:
            hi = mid
        else:
            lo = mid
    R = lo  # the feasible side of the bracket
    e = _shoot(lam, R)
    if e is None or abs(e[-1]) > tol:
        raise NumericalError(
            "shooting recursion missed the terminal condition",
            residual=None if e is None else abs(e[-1]),
        )
    return SteadyState(e[1:-1], R)


def _rhs(lam, x):
    ext = np.empty(x.size + 2)
    ext[0] = 1.0
    ext[1:-1] = x
    ext[-1] = 0.0
    flow = lam * ext[:-1] * (1.0 - ext[1:])
    return flow[:-1] - flow[1:]


def _rk4_step(lam, x, h):
    k1 = _rhs(lam, x)
    k2 = _rhs(lam, x + 0.5 * h * k1)
    k3 = _rhs(lam, x + 0.5 * h * k2)
    k4 = _rhs(lam, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _advance(lam, x, h, depth=0):
    """One step of size h, recursively halved if the cube check fails."""
    y = _rk4_step(lam, x, h)
    if y.min() >= -_CUBE_SLACK and y.max() <= 1.0 + _CUBE_SLACK:
        return np.clip(y, 0.0, 1.0)
    if depth >= 20:
        raise NumericalError(
            "state escaped [0,1]^n beyond tolerance; reduce the step size",
            residual=max(-y.min(), y.max() - 1.0),
        )
    half = _advance(lam, x, 0.5 * h, depth + 1)
    return _advance(lam, half, 0.5 * h, depth + 1)


def simulate(rates, x0, t_final, step=DEFAULT_STEP):
    """Integrate the chain with classical fixed-step RK4.

    Stores the state on the uniform grid k * step up to t_final.  The
    trajectory is flagged converged when two stored states one time unit
    apart differ by less than 1e-10 in sup norm.
    """
    lam = rates.lam
    x0 = np.asarray(x0, dtype=float)
    if x0.size != rates.n:
        raise ValueError(f"x0 must have {rates.n} entries, got {x0.size}")
    if x0.min() < 0.0 or x0.max() > 1.0:
        raise ValueError("initial state must lie in [0,1]^n")
    if t_final <= 0.0 or step <= 0.0:
        raise ValueError("t_final and step must be positive")

    n_steps = max(1, int(np.ceil(t_final / step - 1e-12)))
    times = np.empty(n_steps + 1)
    states = np.empty((n_steps + 1, rates.n))
    times[0] = 0.0
    states[0] = x0
    x = x0
    for k in range(n_steps):
        h = min(step, t_final - k * step)
        x = _advance(lam, x, h)
        times[k + 1] = min((k + 1) * step, t_final)
        states[k + 1] = x

    offset = max(1, int(round(1.0 / step)))
    converged = False
    if n_steps >= offset:
        gaps = np.max(np.abs(states[offset:] - states[:-offset]), axis=1)
        converged = bool(np.min(gaps) < _CONVERGENCE_EPS)
    return Trajectory(times, states, converged)


def sensitivities(rates, tol=DEFAULT_TOL):
    """s_i = dR/dlam_i = 2 R**1.5 v_{i+1} v_{i+2} / lam_i**1.5."""
    pair = perron(build_matrix(rates), tol)
    return _sensitivities_from_pair(rates, pair.sigma, pair.v)


def _sensitivities_from_pair(rates, sigma, v):
    R = sigma ** -2.0
    s = 2.0 * R ** 1.5 * v[:-1] * v[1:] / rates.lam ** 1.5
    return SensitivityVector(s)


def mu_values(rates, tol=DEFAULT_TOL):
    """mu_i = v_{i+1} v_{i+2} / lam_i**1.5; constant across i at an optimum."""
    pair = perron(build_matrix(rates), tol)
    return _mu_from_pair(rates, pair.v)


def _mu_from_pair(rates, v):
    return v[:-1] * v[1:] * rates.lam ** -1.5
