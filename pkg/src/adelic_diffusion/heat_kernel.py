"""Closed-form single-prime heat kernel: radial density, ball and sphere
masses, exit laws, first-exit overshoot law, and exact radial convolution.

The kernel of the diffusion generated by the exponent-b multiplier at rate
sigma is radial; on the sphere of radius p^m it equals

    density(t, m) = sum_{r <= -m} (e^{-sigma t p^{rb}} - e^{-sigma t p^{(r+1)b}}) p^r.

All series here have geometrically decaying positive terms with a closed
form tail bound, so truncation is decided rigorously rather than by
heuristics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import TruncationError
from .primes import is_prime

_TINY = 1e-318
_EXP_UNDERFLOW = 745.0
VALUATION_GUARD = 2**20


@dataclass(frozen=True)
class KernelParams:
    """One p-adic diffusion component: prime p, exponent b, rate sigma."""

    p: int
    b: float
    sigma: float

    def __post_init__(self):
        if not is_prime(self.p):
            raise ValueError(f"p={self.p} is not prime")
        if not self.b > 0:
            raise ValueError("exponent b must be positive")
        if not self.sigma > 0:
            raise ValueError("diffusion constant sigma must be positive")


@dataclass(frozen=True)
class SeriesPolicy:
    rel_tol: float = 1e-14
    max_terms: int = 4096

    def __post_init__(self):
        if not 0 < self.rel_tol < 1:
            raise ValueError("rel_tol must be in (0, 1)")


DEFAULT_POLICY = SeriesPolicy()


def _pow(p: int, x: float) -> float:
    """p**x with clamped over/underflow (exact limits 0 and inf)."""
    e = x * math.log(p)
    if e > _EXP_UNDERFLOW:
        return math.inf
    if e < -_EXP_UNDERFLOW:
        return 0.0
    return math.exp(e)


def _decay(params: KernelParams, t: float, r: int) -> float:
    """e^{-sigma t p^{rb}}, clamped to exact limits."""
    a = params.sigma * t * _pow(params.p, r * params.b)
    if a == math.inf:
        return 0.0
    return math.exp(-a)


def alpha(params: KernelParams) -> float:
    """Exit-rate constant 1 - (p^b - 1)/(p^{b+1} - 1), strictly in (0, 1)."""
    p, b = params.p, params.b
    return 1.0 - (_pow(p, b) - 1.0) / (_pow(p, b + 1.0) - 1.0)


def _series_down(params: KernelParams, t: float, r_start: int, weight_exp_shift: float,
                 policy: SeriesPolicy) -> float:
    """sum_{r <= r_start} p^{r + shift} (E(r) - E(r+1)) with rigorous tail cut."""
    p, b, sigma = params.p, params.b, params.sigma
    ratio = _pow(p, -(b + 1.0))
    tail_coeff = sigma * t * (_pow(p, b) - 1.0) / (1.0 - ratio)
    total = 0.0
    e_next = _decay(params, t, r_start + 1)
    r = r_start
    for _ in range(policy.max_terms):
        e_cur = _decay(params, t, r)
        total += (e_cur - e_next) * _pow(p, r + weight_exp_shift)
        tail = tail_coeff * _pow(p, (r - 1) * (b + 1.0) + weight_exp_shift)
        if tail <= max(policy.rel_tol * total, _TINY):
            return total
        e_next = e_cur
        r -= 1
    raise TruncationError(
        f"radial series did not converge within {policy.max_terms} terms"
    )


def _r_all_terms(params: KernelParams, t: float) -> int:
    """r above which e^{-sigma t p^{rb}} underflows to exactly 0."""
    st = params.sigma * t
    if st >= _EXP_UNDERFLOW:
        return 2
    return int(math.ceil(math.log(_EXP_UNDERFLOW / st) / (params.b * math.log(params.p)))) + 2


@lru_cache(maxsize=1 << 18)
def _density_cached(params: KernelParams, t: float, m: int,
                    policy: SeriesPolicy) -> float:
    r_start = min(-m, _r_all_terms(params, t))
    return _series_down(params, t, r_start, 0.0, policy)


def density(params: KernelParams, t: float, m: int,
            policy: SeriesPolicy = DEFAULT_POLICY) -> float:
    """Kernel value on the sphere {|x| = p^m} at time t (radial density)."""
    if not t > 0:
        raise ValueError("t must be positive")
    return _density_cached(params, t, m, policy)


def density_center(params: KernelParams, t: float,
                   policy: SeriesPolicy = DEFAULT_POLICY) -> float:
    """Kernel value at the origin, the supremum of the density."""
    if not t > 0:
        raise ValueError("t must be positive")
    return _series_down(params, t, _r_all_terms(params, t), 0.0, policy)


@lru_cache(maxsize=1 << 18)
def _ball_mass_cached(params: KernelParams, t: float, nu: int,
                      policy: SeriesPolicy) -> float:
    head = _decay(params, t, -nu)
    r_start = min(-nu - 1, _r_all_terms(params, t))
    return head + _series_down(params, t, r_start, float(nu), policy)


def ball_mass(params: KernelParams, t: float, nu: int,
              policy: SeriesPolicy = DEFAULT_POLICY) -> float:
    """Mass of the ball {|x| <= p^nu} under the time-t kernel.

    Equals e^{-sigma t p^{-nu b}} plus the deeper-shell series; always at
    least e^{-sigma t p^{-nu b}}.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    return _ball_mass_cached(params, t, nu, policy)


def sphere_mass(params: KernelParams, t: float, m: int,
                policy: SeriesPolicy = DEFAULT_POLICY) -> float:
    """Mass of the sphere {|x| = p^m}: density(t, m) * p^m (1 - 1/p)."""
    mu = _pow(params.p, m) * (1.0 - 1.0 / params.p)
    return density(params, t, m, policy) * mu


def ball_kernel_mass(params: KernelParams, t: float, center_exp: int | None,
                     r: int, policy: SeriesPolicy = DEFAULT_POLICY) -> float:
    """Mass the time-t kernel started at 0 assigns to a ball B_r(c).

    center_exp is the exponent of |c| (None for c = 0).  For |c| <= p^r the
    ball coincides with B_r(0); otherwise every point of the ball sits on
    the sphere of radius |c|, where the density is constant.
    """
    if center_exp is None or center_exp <= r:
        return ball_mass(params, t, r, policy)
    return density(params, t, center_exp, policy) * _pow(params.p, r)


def exit_prob(params: KernelParams, T: float, r: int) -> float:
    """P(sup_{s <= T} |X_s| <= p^r) = e^{-sigma alpha T p^{-rb}}."""
    if T < 0:
        raise ValueError("T must be nonnegative")
    a = params.sigma * alpha(params) * T * _pow(params.p, -r * params.b)
    return math.exp(-a) if a != math.inf else 0.0


def exit_rate(params: KernelParams, r: int) -> float:
    """First-exit rate of the ball of radius p^r: sigma alpha p^{-rb}."""
    return params.sigma * alpha(params) * _pow(params.p, -r * params.b)


def overshoot_law(params: KernelParams, r: int, k: int) -> float:
    """P(first exit from a radius-p^r ball lands on the sphere p^{r+k}).

    Geometric in k >= 1 with ratio p^{-b}; independent of r.  This is the
    unique landing law consistent with the exponential exit times at every
    coarser radius.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    q = _pow(params.p, -params.b)
    return (1.0 - q) * q ** (k - 1)


@dataclass(frozen=True)
class RadialLaw:
    """Radial law over spheres p^m, m in [m_lo, m_hi], plus deep-ball rest.

    masses[m - m_lo] is the sphere mass at exponent m; bottom_mass is the
    mass of the ball {|x| <= p^(m_lo - 1)}; top_loss of the window's
    complement above m_hi.
    """

    p: int
    m_lo: int
    m_hi: int
    masses: tuple[float, ...]
    bottom_mass: float
    top_loss: float

    def __post_init__(self):
        assert len(self.masses) == self.m_hi - self.m_lo + 1

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.masses)

    def mass(self, m: int) -> float:
        if self.m_lo <= m <= self.m_hi:
            return self.masses[m - self.m_lo]
        return 0.0

    def ball_cdf(self, m: int) -> float:
        """Window-based mass of {|x| <= p^m}."""
        if m < self.m_lo:
            return self.bottom_mass
        hi = min(m, self.m_hi)
        return self.bottom_mass + float(np.sum(self.array[: hi - self.m_lo + 1]))

    def coverage(self) -> float:
        return float(np.sum(self.array))

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.array)

    def sample_exponents(self, gen: np.random.Generator, n: int) -> np.ndarray:
        """Sphere exponents from the window law renormalized to mass one."""
        c = self.cdf()
        u = gen.random(n) * c[-1]
        return np.searchsorted(c, u, side="right") + self.m_lo

    def ball_probability(self, d_exp: int | None, r: int) -> float:
        """P(Z in B_r(d)) for |d| = p^d_exp (None for d = 0), Z ~ this law."""
        if d_exp is None or r >= d_exp:
            return self.ball_cdf(r)
        frac = _pow(self.p, r - d_exp) * self.p / (self.p - 1.0)
        return self.mass(d_exp) * frac


def radial_law(params: KernelParams, t: float,
               policy: SeriesPolicy = DEFAULT_POLICY,
               coverage: float = 1.0 - 1e-12) -> RadialLaw:
    """Sphere-mass window covering at least `coverage` of the time-t kernel."""
    if not t > 0:
        raise ValueError("t must be positive")
    eps = (1.0 - coverage) / 2.0
    p, b = params.p, params.b

    rate = params.sigma * alpha(params) * t
    m = max(0, int(math.ceil(math.log(max(rate / max(eps, _TINY), 1.0)) / (b * math.log(p)))))
    for _ in range(policy.max_terms):
        if 1.0 - ball_mass(params, t, m, policy) <= eps:
            break
        m += 1
    else:
        raise TruncationError("could not find upper truncation radius")
    while m > -VALUATION_GUARD and 1.0 - ball_mass(params, t, m - 1, policy) <= eps:
        m -= 1
    m_hi = m

    target = math.log(1.0 / max(eps, _TINY)) / (params.sigma * t)
    m = min(m_hi, -int(math.floor(math.log(max(target, 1e-300)) / (b * math.log(p)))))
    for _ in range(policy.max_terms):
        if ball_mass(params, t, m - 1, policy) <= eps:
            break
        m -= 1
        if m < -VALUATION_GUARD:
            raise TruncationError(
                "truncation window cannot reach requested coverage within valuation range"
            )
    else:
        raise TruncationError("could not find lower truncation radius")
    while m + 1 <= m_hi and ball_mass(params, t, m, policy) <= eps:
        m += 1
    m_lo = m

    masses = tuple(sphere_mass(params, t, j, policy) for j in range(m_lo, m_hi + 1))
    bottom = ball_mass(params, t, m_lo - 1, policy)
    top = max(1.0 - ball_mass(params, t, m_hi, policy), 0.0)
    return RadialLaw(params.p, m_lo, m_hi, masses, bottom, top)


@lru_cache(maxsize=512)
def cached_radial_law(params: KernelParams, t: float,
                      policy: SeriesPolicy = DEFAULT_POLICY,
                      coverage: float = 1.0 - 1e-12) -> RadialLaw:
    return radial_law(params, t, policy, coverage)


def radial_convolve(u: RadialLaw, v: RadialLaw) -> RadialLaw:
    """Exact radial law of X + Y for independent radial X ~ u, Y ~ v.

    Ultrametric classes: |x + y| = max(|x|, |y|) off the diagonal; on the
    diagonal |x| = |y| = p^a the sum lands on p^e (e < a) with probability
    p^{e-a} and stays on p^a with probability (p-2)/(p-1).
    """
    if u.p != v.p:
        raise ValueError("laws live over different primes")
    p = u.p
    lo = min(u.m_lo, v.m_lo)
    hi = max(u.m_hi, v.m_hi)
    n = hi - lo + 1
    U = np.zeros(n)
    V = np.zeros(n)
    U[u.m_lo - lo : u.m_hi - lo + 1] = u.array
    V[v.m_lo - lo : v.m_hi - lo + 1] = v.array

    U_below = u.bottom_mass + np.concatenate(([0.0], np.cumsum(U)[:-1]))
    V_below = v.bottom_mass + np.concatenate(([0.0], np.cumsum(V)[:-1]))

    diag = U * V
    # G[e] = sum_{a > e} U[a] V[a] p^{e-a}
    G = np.zeros(n)
    acc = 0.0
    for i in range(n - 1, -1, -1):
        G[i] = acc
        acc = (acc + diag[i]) / p
    W = U * V_below + V * U_below + diag * ((p - 2.0) / (p - 1.0)) + G

    # Diagonal mass landing below the window: sum_a diag[a] p^{lo-a}/(p-1),
    # and acc = sum_a diag[a] p^{lo-1-a} after the scan above.
    bottom = u.bottom_mass * v.bottom_mass + acc * p / (p - 1.0)
    return RadialLaw(p, lo, hi, tuple(W.tolist()), bottom, u.top_loss + v.top_loss)
