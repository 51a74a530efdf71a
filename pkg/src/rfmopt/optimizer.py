"""Minimize the Perron root over rate vectors with a fixed total budget.

Two independent solvers:

* solve_recursion: the boundary-value route.  The optimal Perron vector
  induces the scalar recursion a_{i+1} = r a_i**2 - a_{i-1} with
  a_0 = a_{n+3} = 0, a_1 = 1, whose single unknown r = sigma**(2/3)
  lam_0**(1/3) is pinned by a midpoint symmetry condition.  The root is
  found by bisection of the shooting residual; the optimal rates are
  recovered as lam_i = c a_{i+1} a_{i+2} with c fixed by the budget.

* solve_equalization: the first-order-condition route.  At the optimum
  all sensitivities dR/dlam_i coincide, equivalently all
  mu_i = v_{i+1} v_{i+2} lam_i**-1.5 are equal.  A damped fixed-point
  sweep (lam_i <- (v_{i+1} v_{i+2})**(2/3), rescaled) handles small
  chains; a guarded descent on sigma plus a Newton solve of the full
  stationarity system finishes the job when the sweep stalls.

Numerical note on the recursion route: the midpoint map has the unstable
multiplier 2 + sqrt(3) =~ 3.73 per step, so double-precision forward
shooting loses the answer beyond roughly fifteen steps (n =~ 20).  The
bisection therefore runs in software floats whose precision grows
linearly with the half-length; results are returned as ordinary floats.
"""

from __future__ import annotations

import dataclasses

import mpmath
import numpy as np
from scipy.optimize import minimize

from .errors import NumericalError
from .rfm import (
    _mu_from_pair,
    _sensitivities_from_pair,
    _steady_from_pair,
)
from .spectral import DEFAULT_TOL, RateVector, build_matrix, perron

R_LOWER = 2.0 ** (1.0 / 3.0)  # strict lower bound for the shooting root, n > 1
R_UPPER = 2.0 ** 0.5          # strict upper bound for the shooting root

_DIVERGENCE_LIMIT = 1e6
_SATURATED = 1e6
_GRID_STEP = 1e-4
# log10 of the unstable multiplier 2 + sqrt(3); precision budgets scale with it
_LOG10_GROWTH = 0.5719
_EQ_SWEEP_CAP = 200
_EQ_KKT_TARGET = 1e-10


@dataclasses.dataclass(frozen=True)
class RecursionProfile:
    """Shooting parameter r, fixed point q = 2/r, and the a-sequence.

    a holds a_0..a_{n+3} when fully materialized, or the shorter prefix a
    half-sequence run produced.  diverged marks runs stopped by the
    overflow guard |a_i| > 1e6; their trailing entry is the offender.
    """

    n: int
    r: float
    q: float
    a: np.ndarray
    diverged: bool = False

    def __post_init__(self):
        arr = np.asarray(self.a, dtype=float).copy()
        arr.flags.writeable = False
        object.__setattr__(self, "a", arr)


@dataclasses.dataclass(frozen=True)
class OptimalSolution:
    """A solved instance: optimal rates plus every derived quantity."""

    rates: RateVector
    sigma: float
    R: float
    steady: "SteadyState"
    profile: RecursionProfile
    sensitivities: "SensitivityVector"
    mu: np.ndarray
    kkt_residual: float
    eigen_residual: float
    method: str
    bracket_fallback: bool = False

    def __post_init__(self):
        arr = np.asarray(self.mu, dtype=float).copy()
        arr.flags.writeable = False
        object.__setattr__(self, "mu", arr)
        n = self.rates.n
        budget_gap = abs(self.rates.lam.sum() - (n + 1))
        if budget_gap > 1e-9 * (n + 1):
            raise ValueError(f"budget constraint violated by {budget_gap:.3e}")

    @property
    def n(self):
        return self.rates.n


def _half_limit(n):
    return (n + 3) // 2 + 1


def recursion_profile(r, n, half_only=False):
    """Iterate a_{i+1} = r a_i**2 - a_{i-1} from a_0 = 0, a_1 = 1.

    half_only stops at index (n+3)//2 + 1, which is all shooting needs and
    the only stretch that is numerically meaningful off the root; the full
    sequence can blow up double-exponentially.
    """
    if n < 1:
        raise ValueError(f"chain length must be >= 1, got {n}")
    if r <= 0.0:
        raise ValueError(f"shooting parameter must be positive, got {r}")
    last = _half_limit(n) if half_only else n + 3
    a = [0.0, 1.0]
    diverged = False
    for i in range(1, last):
        nxt = r * a[i] * a[i] - a[i - 1]
        a.append(nxt)
        if abs(nxt) > _DIVERGENCE_LIMIT:
            diverged = True
            break
    return RecursionProfile(n=n, r=r, q=2.0 / r, a=np.array(a), diverged=diverged)


def _midpoint_residual(a, n):
    if n % 2 == 0:
        m = (n + 2) // 2
        return a[m] - a[m + 1]
    return a[(n + 1) // 2] - a[(n + 5) // 2]


def shoot_residual(r, n):
    """Midpoint symmetry defect g(r); g(r_bar) = 0 at the optimum.

    Divergent runs return a saturated residual whose sign preserves the
    bisection bracket: a sequence that dipped below zero means r was too
    small (+), a monotone blow-up means r was too large (-).
    """
    profile = recursion_profile(r, n, half_only=True)
    if profile.diverged:
        return _SATURATED if profile.a.min() < 0.0 else -_SATURATED
    return float(_midpoint_residual(profile.a, n))


def _mp_half(r, n, limit):
    """(sequence, diverged, dipped_negative, first_decrease_index)."""
    seq = [mpmath.mpf(0), mpmath.mpf(1)]
    neg = False
    dec = None
    for i in range(1, limit):
        nxt = r * seq[i] * seq[i] - seq[i - 1]
        seq.append(nxt)
        if dec is None and nxt < seq[i]:
            dec = i
        if nxt < 0:
            neg = True
        if abs(nxt) > _DIVERGENCE_LIMIT:
            return seq, True, neg, dec
    return seq, False, neg, dec


def _mp_residual(r, n):
    seq, diverged, neg, _ = _mp_half(r, n, _half_limit(n))
    if diverged:
        return mpmath.mpf(_SATURATED) if neg else mpmath.mpf(-_SATURATED)
    return _midpoint_residual(seq, n)


def _mp_climbing(r, n):
    """True while the half-orbit is still strictly climbing at the midpoint.

    The first-decrease index grows monotonically with r, which makes this
    predicate bisectable even where the raw residual sign is erratic.
    """
    half = _half_limit(n) - 1
    seq, _, neg, dec = _mp_half(r, n, half + 1)
    if neg:
        return False
    return dec is None or dec >= half


def _mp_bisect_root(n):
    """Locate the shooting root in software floats; returns (r, half_seq).

    Stages: (1) bisect the climbing predicate down to the width of the
    positive residual band just below the root, (2) an exponent ladder
    from that edge finds where the residual turns negative, (3) plain
    bisection inside the final octave.  Stage 1 sidesteps the erratic
    residual signs left of the band that defeat naive bracketing.
    """
    half = _half_limit(n) - 1
    band_exp = int(2 * _LOG10_GROWTH * (half + 2)) + 8
    root_exp = band_exp + 18
    lo = (mpmath.cbrt(2) if n > 1 else mpmath.mpf(1)) + mpmath.mpf("1e-9")
    hi = mpmath.sqrt(2)
    width = mpmath.mpf(10) ** -root_exp

    if _mp_climbing(lo, n):
        pos_end = lo
    else:
        a, b = lo, hi
        target = mpmath.mpf(10) ** -band_exp
        while b - a > target:
            mid = (a + b) / 2
            if _mp_climbing(mid, n):
                b = mid
            else:
                a = mid
        pos_end = b
        while _mp_residual(pos_end, n) <= 0:
            # band estimate too wide: tighten until the edge lands inside it
            band_exp += 12
            if band_exp >= root_exp:
                raise NumericalError(
                    f"could not isolate the shooting root for n={n}"
                )
            target = mpmath.mpf(10) ** -band_exp
            while b - a > target:
                mid = (a + b) / 2
                if _mp_climbing(mid, n):
                    b = mid
                else:
                    a = mid
            pos_end = b
    if _mp_residual(pos_end, n) <= 0 or _mp_residual(hi, n) >= 0:
        raise NumericalError(f"shooting residual lost its bracket for n={n}")

    # exponent ladder: the root may sit exponentially close to pos_end
    span = hi - pos_end
    s_max = int(mpmath.log(span / width, 2)) + 2
    if _mp_residual(pos_end + span * mpmath.mpf(2) ** -s_max, n) <= 0:
        raise NumericalError(f"residual sign inconsistent near the band, n={n}")
    s_neg, s_pos = 0, s_max
    while s_pos - s_neg > 1:
        s_mid = (s_neg + s_pos) // 2
        if _mp_residual(pos_end + span * mpmath.mpf(2) ** -s_mid, n) > 0:
            s_pos = s_mid
        else:
            s_neg = s_mid
    a = pos_end + span * mpmath.mpf(2) ** -s_pos
    b = pos_end + span * mpmath.mpf(2) ** -s_neg
    while b - a > width:
        mid = (a + b) / 2
        if _mp_residual(mid, n) > 0:
            a = mid
        else:
            b = mid
    r = (a + b) / 2
    seq, diverged, neg, _ = _mp_half(r, n, _half_limit(n))
    if diverged or neg:
        raise NumericalError(f"shooting solution failed validation for n={n}")
    return r, seq


def _grid_fallback(n, tol):
    """Spec fallback: coarse scan from the top of the bracket, then bisect."""
    lo = R_LOWER + 1e-9 if n > 1 else 1.0 + 1e-9
    hi = R_UPPER
    prev_r, prev_g = hi, shoot_residual(hi, n)
    r = hi - _GRID_STEP
    while r > lo:
        g = shoot_residual(r, n)
        if g > 0.0 >= prev_g:
            a, b = r, prev_r
            while b - a > tol:
                mid = 0.5 * (a + b)
                if shoot_residual(mid, n) > 0.0:
                    a = mid
                else:
                    b = mid
            return 0.5 * (a + b)
        prev_r, prev_g = r, g
        r -= _GRID_STEP
    raise NumericalError(f"no shooting sign change found for n={n}")


def _assemble(rates, sigma, method, profile, pair, bracket_fallback=False):
    steady = _steady_from_pair(rates, pair.sigma, pair.v, DEFAULT_TOL)
    sens = _sensitivities_from_pair(rates, pair.sigma, pair.v)
    mu = _mu_from_pair(rates, pair.v)
    return OptimalSolution(
        rates=rates,
        sigma=sigma,
        R=sigma ** -2.0,
        steady=steady,
        profile=profile,
        sensitivities=sens,
        mu=mu,
        kkt_residual=sens.relative_spread(),
        eigen_residual=pair.residual,
        method=method,
        bracket_fallback=bracket_fallback,
    )


def solve_recursion(n, tol=1e-12):
    """Solve the budgeted Perron-root minimization via the shooting route."""
    if n < 1:
        raise ValueError(f"chain length must be >= 1, got {n}")
    if not 0.0 < tol <= 1e-6:
        raise ValueError(f"tol must be in (0, 1e-6], got {tol}")

    half = _half_limit(n) - 1
    dps = int(2 * _LOG10_GROWTH * (half + 2)) + 36
    fallback = False
    with mpmath.workdps(dps):
        try:
            r_mp, seq = _mp_bisect_root(n)
        except NumericalError:
            fallback = True
            r_mp = mpmath.mpf(_grid_fallback(n, tol))
            seq, diverged, neg, _ = _mp_half(r_mp, n, _half_limit(n))
            if diverged or neg:
                raise
        full = [seq[i] if i <= half else seq[n + 3 - i] for i in range(n + 4)]
        raw = [full[i + 1] * full[i + 2] for i in range(n + 1)]
        scale = (n + 1) / mpmath.fsum(raw)
        lam = np.array([float(scale * value) for value in raw])
        sigma = float(mpmath.sqrt(r_mp ** 3 / (scale * raw[0])))
        a_full = np.array([float(value) for value in full])
        r = float(r_mp)

    rates = RateVector(lam)
    profile = RecursionProfile(n=n, r=r, q=2.0 / r, a=a_full)
    pair = perron(build_matrix(rates))
    if abs(pair.sigma - sigma) > 1e-9 * sigma:
        raise NumericalError(
            "recursion and spectral Perron roots disagree",
            residual=abs(pair.sigma - sigma),
        )
    return _assemble(rates, sigma, "recursion", profile, pair, fallback)


def _profile_from_vector(n, r, v):
    """a_i = (v_i / v_1)**(2/3) with the zero boundary entries appended."""
    interior = (v / v[0]) ** (2.0 / 3.0)
    a = np.concatenate(([0.0], interior, [0.0]))
    return RecursionProfile(n=n, r=r, q=2.0 / r, a=a)


def _fixed_point_sweep(n, tol, max_iter):
    """The damped first-order sweep; returns (lam, converged, best_lam)."""
    lam = np.ones(n + 1)
    pair = perron(build_matrix(RateVector(lam)))
    mu = _mu_from_pair(RateVector(lam), pair.v)
    kkt = (mu.max() - mu.min()) / mu.mean()
    best_lam, best_kkt = lam, kkt
    for _ in range(min(max_iter, _EQ_SWEEP_CAP)):
        raw = (pair.v[:-1] * pair.v[1:]) ** (2.0 / 3.0)
        update = (n + 1) * raw / raw.sum()
        rel_change = np.max(np.abs(update - lam) / lam)
        candidate = update
        cand_pair = None
        for _ in range(40):
            rates = RateVector(candidate)
            cand_pair = perron(build_matrix(rates), x0=pair.v)
            cand_mu = _mu_from_pair(rates, cand_pair.v)
            cand_kkt = (cand_mu.max() - cand_mu.min()) / cand_mu.mean()
            if cand_kkt < kkt:
                break
            # oscillation: geometric averaging with the previous iterate
            candidate = np.sqrt(candidate * lam)
            candidate *= (n + 1) / candidate.sum()
        else:
            return lam, False, best_lam
        lam, pair, kkt = candidate, cand_pair, cand_kkt
        if kkt < best_kkt:
            best_lam, best_kkt = lam, kkt
        if rel_change < tol and kkt < _EQ_KKT_TARGET:
            return lam, True, best_lam
    return lam, False, best_lam


def _descent_rescue(n, lam0):
    """Guarded descent on sigma (convex objective, exact gradient -mu)."""

    def objective(lam):
        rates = RateVector(np.maximum(lam, 1e-9))
        pair = perron(build_matrix(rates))
        return pair.sigma, -_mu_from_pair(rates, pair.v)

    result = minimize(
        objective,
        lam0,
        jac=True,
        method="SLSQP",
        bounds=[(1e-6, None)] * (n + 1),
        constraints=[{
            "type": "eq",
            "fun": lambda lam: lam.sum() - (n + 1),
            "jac": lambda lam: np.ones_like(lam),
        }],
        options={"maxiter": 500, "ftol": 1e-14},
    )
    lam = np.maximum(result.x, 1e-9)
    return (n + 1) * lam / lam.sum()


def _stationarity_newton(n, lam, steps=15):
    """Newton on the full stationarity system in (lam, v, sigma, gamma).

    Residuals: the eigen equation, the unit-norm gauge, equality of all
    mu_i to the multiplier gamma, and the active budget.  Quadratic near
    the optimum; drives the sensitivity spread to rounding level.
    """
    pair = perron(build_matrix(RateVector(lam)))
    v = pair.v.copy()
    sigma = pair.sigma
    gamma = float(np.mean(lam ** -1.5 * v[:-1] * v[1:]))
    size = 2 * n + 5
    col_v = n + 1
    col_sigma = 2 * n + 3
    col_gamma = 2 * n + 4
    for _ in range(steps):
        b = lam ** -0.5
        Bv = np.zeros(n + 2)
        Bv[:-1] += b * v[1:]
        Bv[1:] += b * v[:-1]
        res = np.concatenate([
            Bv - sigma * v,
            [0.5 * (v @ v - 1.0)],
            lam ** -1.5 * v[:-1] * v[1:] - gamma,
            [lam.sum() - (n + 1)],
        ])
        if np.max(np.abs(res)) < 1e-13:
            break
        J = np.zeros((size, size))
        db = -0.5 * lam ** -1.5
        for i in range(n + 2):
            if i >= 1:
                J[i, i - 1] = db[i - 1] * v[i - 1]
                J[i, col_v + i - 1] = b[i - 1]
            if i <= n:
                J[i, i] += db[i] * v[i + 1]
                J[i, col_v + i + 1] = b[i]
            J[i, col_v + i] -= sigma
            J[i, col_sigma] = -v[i]
        J[n + 2, col_v:col_v + n + 2] = v
        for j in range(n + 1):
            row = n + 3 + j
            J[row, j] = -1.5 * lam[j] ** -2.5 * v[j] * v[j + 1]
            J[row, col_v + j] = lam[j] ** -1.5 * v[j + 1]
            J[row, col_v + j + 1] = lam[j] ** -1.5 * v[j]
            J[row, col_gamma] = -1.0
        J[2 * n + 4, :n + 1] = 1.0
        try:
            delta = np.linalg.solve(J, -res)
        except np.linalg.LinAlgError:
            break
        lam = lam + delta[:n + 1]
        v = v + delta[col_v:col_v + n + 2]
        sigma += delta[col_sigma]
        gamma += delta[col_gamma]
        if lam.min() <= 0.0:
            raise NumericalError("stationarity Newton left the positive cone")
    return lam


def solve_equalization(n, tol=1e-10, max_iter=10000):
    """Solve the same problem by equalizing the rate sensitivities.

    Fixed points of the sweep lam_i <- (v_{i+1} v_{i+2})**(2/3) (rescaled
    to the budget) are exactly the points where all dR/dlam_i agree.  The
    sweep alone converges for short chains; longer chains overshoot, so a
    guarded descent plus a Newton solve of the stationarity system takes
    over from the best sweep iterate.  Entirely independent of the
    recursion route.
    """
    if n < 1:
        raise ValueError(f"chain length must be >= 1, got {n}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")

    lam, converged, best_lam = _fixed_point_sweep(n, tol, max_iter)
    if not converged:
        lam = _descent_rescue(n, best_lam)
        lam = _stationarity_newton(n, lam)

    rates = RateVector(lam)
    pair = perron(build_matrix(rates))
    sens = _sensitivities_from_pair(rates, pair.sigma, pair.v)
    kkt = sens.relative_spread()
    if kkt > max(100.0 * tol, 1e-8):
        raise NumericalError(
            f"sensitivity equalization did not converge for n={n}",
            residual=kkt,
        )
    r = float((pair.sigma ** 2 * lam[0]) ** (1.0 / 3.0))
    profile = _profile_from_vector(n, r, pair.v)
    return _assemble(rates, pair.sigma, "equalization", profile, pair)


def baseline_ones(n):
    """The feasible all-ones rates and their Perron root 2 cos(pi/(n+3))."""
    if n < 1:
        raise ValueError(f"chain length must be >= 1, got {n}")
    return RateVector.ones(n), 2.0 * np.cos(np.pi / (n + 3))


def baseline_tilde(n):
    """The half-edge baseline c(n) * (1/2, 1, ..., 1, 1/2), n >= 2.

    Its Perron root is 2 sqrt(n/(n+1)) and every steady density equals
    1/2, giving the production rate (n+1)/(4n).  Used as the comparison
    point the optimizer must beat.
    """
    if n < 2:
        raise ValueError(f"half-edge baseline needs n >= 2, got {n}")
    c = (n + 1) / n
    lam = np.full(n + 1, c)
    lam[0] = lam[-1] = 0.5 * c
    rates = RateVector(lam)
    sigma = 2.0 * np.sqrt(n / (n + 1))
    pair = perron(build_matrix(rates))
    if abs(pair.sigma - sigma) > 1e-10 * sigma:
        raise NumericalError(
            "half-edge baseline failed its closed-form check",
            residual=abs(pair.sigma - sigma),
        )
    R = (n + 1) / (4.0 * n)
    return rates, sigma, R


def apply_F(s, point):
    """One step of the quadratic map F_s(u, v) = (s u**2 - v, u).

    The recursion orbit is (a_{i+1}, a_i) = F_r(a_i, a_{i-1}); the
    relevant fixed point is (2/s, 2/s), hyperbolic with multipliers
    2 +- sqrt(3) independent of s.
    """
    if s <= 0.0:
        raise ValueError(f"map parameter must be positive, got {s}")
    u, v = point
    return (s * u * u - v, u)
