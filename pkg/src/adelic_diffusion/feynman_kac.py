"""Monte Carlo estimation of the damped semigroup and its kernels.

The semigroup acts on an observable by pi_t f(x) = E_x[e^{-int_0^t v} f(X_t)].
Estimates run over adelic bundles truncated at N primes:

* exact mode: potentials and observables locally constant at known scales,
  so event-driven paths make the action integral exact and endpoint-only
  primes reduce to one radial increment (no time discretization anywhere);
* kernel mode: bridge Monte Carlo times the analytic endpoint density, with
  the action evaluated by a time-symmetric trapezoid over the bridge
  skeleton so that kernel estimates are exactly reversal-symmetric in law.

Paths are assigned to fixed-size chunks keyed by (seed, chunk index), so
results are bit-identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .adelic import (
    AdelicPoint,
    SigmaSequence,
    component_difference,
    tail_certificate,
)
from .errors import ConfigError, PrecisionError, ResolutionError
from .heat_kernel import (
    KernelParams,
    ball_kernel_mass,
    density,
    density_center,
    radial_law,
)
from .padic import PAdicScalar, uniform_sphere
from .primes import prime_at, prime_index
from .rng import RngStream
from .sampler import (
    BridgeSpec,
    EventPath,
    PathSkeleton,
    increment_law,
    sample_bridge,
    sample_event_path,
    sample_skeleton,
)
from .schwartz import (
    SBFunction,
    SimpleAdelicSB,
    SimplePotential,
    adelic_vladimirov_apply,
    eval_sb,
    resolution_for,
)

DEFAULT_CHUNK = 4096


@dataclass(frozen=True)
class FKRequest:
    """One estimation task; the seed pins every random draw."""

    sigma: SigmaSequence
    b: float
    t: float
    x: AdelicPoint
    alpha: SimpleAdelicSB
    v: SimplePotential
    n_paths: int
    truncation: int
    seed: int
    y: AdelicPoint | None = None
    mode: str = "exact"
    h: float | None = None
    bridge_steps: int = 128
    chunk_size: int = DEFAULT_CHUNK
    workers: int = 1
    precision: int = 24

    def __post_init__(self):
        if not self.t > 0:
            raise ConfigError("t must be positive")
        if self.mode not in ("exact", "quadrature"):
            raise ConfigError("mode must be 'exact' or 'quadrature'")
        if self.n_paths < 1:
            raise ConfigError("n_paths must be positive")
        if self.truncation < max(
            self.x.max_active_index(),
            self.y.max_active_index() if self.y is not None else 0,
            max((prime_index(p) for p in self.v.component_primes()), default=0),
            max((prime_index(p) for p in self.alpha.factor_primes()), default=0),
        ):
            raise ConfigError("truncation must cover active primes and factors")


@dataclass(frozen=True)
class FKEstimate:
    value: complex
    std_error: float
    n_paths: int
    tail_certificate: float
    mode: str
    density_factor: float | None = None
    bridge_factor: float | None = None
    extras: tuple[tuple[str, float], ...] = ()

    @property
    def real(self) -> float:
        return self.value.real


# -- action integrals --------------------------------------------------------


def action_integral(path: EventPath | PathSkeleton, v: SimplePotential,
                    t: float, mode: str = "exact", h: float | None = None,
                    weights: str = "left") -> float:
    """Time integral of the potential component along a single-prime path.

    Event paths give the exact integral whenever the potential is constant
    at the path resolution.  Skeletons integrate the cadlag interpolant:
    'left' weights are the plain piecewise-constant sum, 'trapezoid'
    averages endpoint values, which is invariant under time reversal.
    In quadrature mode the interpolant is sampled on a step-h grid.
    """
    if isinstance(path, EventPath):
        p = path.params.p
        comp = v.component(p)
        if comp is None:
            return 0.0
        tau, f = comp
        if path.resolution > f.min_radius_exp():
            raise ResolutionError(
                "event path coarser than the potential constancy scale"
            )
        total = 0.0
        for duration, pos in path.segments(min(t, path.horizon)):
            total += duration * eval_sb(f, pos).real
        return tau * total
    p = path.params.p
    comp = v.component(p)
    if comp is None:
        return 0.0
    tau, f = comp
    times = path.times
    vals = [eval_sb(f, pos).real for pos in path.values]
    if mode == "quadrature":
        step = h if h is not None else t / 1024.0
        steps = max(1, int(round(min(t, times[-1]) / step)))
        total = 0.0
        for k in range(steps):
            s = (k + 0.5) * step
            idx = int(np.searchsorted(times, s, side="right")) - 1
            total += step * vals[idx]
        return tau * total
    total = 0.0
    for k in range(len(times) - 1):
        dt = min(times[k + 1], t) - min(times[k], t)
        if dt <= 0:
            continue
        if weights == "trapezoid":
            total += dt * 0.5 * (vals[k] + vals[k + 1])
        else:
            total += dt * vals[k]
    return tau * total


def bundle_action(bundle_components, v: SimplePotential, t: float) -> float:
    """Sum of per-prime exact action integrals over an adelic bundle."""
    sampled = {p for p, _ in bundle_components}
    for p in v.component_primes():
        if p not in sampled:
            raise ConfigError(f"potential prime {p} not sampled in bundle")
    return sum(
        action_integral(path, v, t) for p, path in bundle_components
    )


# -- free propagation --------------------------------------------------------


@dataclass(frozen=True)
class FreePropagation:
    """Exact truncated free value with a multiplicative tail bracket.

    The full free value lies in [value * tail_lo_mult, value] when value is
    a nonnegative real (general complex values scale along the same ray).
    """

    value: complex
    tail_lo_mult: float
    truncation: int

    def interval(self) -> tuple[float, float]:
        r = self.value.real
        return min(r * self.tail_lo_mult, r), max(r * self.tail_lo_mult, r)


def _factor_convolution(params: KernelParams, t: float, f: SBFunction,
                        xc: PAdicScalar | None) -> complex:
    """(kernel_t * f)(xc); unresolved xc (in Z_p) is exact for vacuum f."""
    if xc is None:
        if not f.is_vacuum():
            raise PrecisionError(
                "free propagation of a non-vacuum factor needs a resolved point"
            )
        return complex(ball_kernel_mass(params, t, None, 0))
    out = 0j
    for ball, coeff in f.terms:
        d = xc - ball.center
        out += coeff * ball_kernel_mass(params, t, d.abs_exp(), ball.radius_exp)
    return out


def free_propagate(sigma: SigmaSequence, b: float, t: float,
                   alpha: SimpleAdelicSB, x: AdelicPoint, N: int) -> FreePropagation:
    """Free semigroup value (kernel_t * alpha)(x), truncated at N primes.

    Primes 1..N contribute exact per-prime convolutions; the inactive tail
    multiplies the result by a factor in [e^{-t sum_{i>N} sigma_i}, 1].
    """
    if not t > 0:
        raise ConfigError("t must be positive")
    needed = max(
        x.max_active_index(),
        max((prime_index(p) for p in alpha.factor_primes()), default=0),
    )
    if N < needed:
        raise ConfigError("truncation must cover active primes and factors")
    value = 1.0 + 0j
    for i in range(1, N + 1):
        p = prime_at(i)
        params = sigma.kernel_params(i, b)
        value *= _factor_convolution(params, t, alpha.factor(p), x.component(p))
    return FreePropagation(value, math.exp(-t * sigma.sigma_tail_upper(N)), N)


# -- chunked deterministic Monte Carlo engine --------------------------------


@dataclass(frozen=True)
class _PrimePlan:
    slot: int
    params: KernelParams
    start: PAdicScalar
    alpha_f: SBFunction
    v_term: tuple[float, SBFunction] | None
    r_min: int


def _compile_plans(req: FKRequest) -> tuple[_PrimePlan, ...]:
    plans = []
    for i in range(1, req.truncation + 1):
        p = prime_at(i)
        params = req.sigma.kernel_params(i, req.b)
        start = req.x.component(p)
        if start is None:
            start = PAdicScalar.zero(p)
        alpha_f = req.alpha.factor(p)
        v_term = req.v.component(p)
        fns = (alpha_f, v_term[1]) if v_term is not None else (alpha_f,)
        plans.append(_PrimePlan(i - 1, params, start, alpha_f, v_term,
                                resolution_for(*fns)))
    return tuple(plans)


def _endpoint_factor(plan: _PrimePlan, t: float, gen: np.random.Generator,
                     count: int, precision: int) -> np.ndarray:
    """Vectorized evaluation of the observable factor at X_t = start + inc.

    Off-diagonal radius comparisons decide every indicator through the
    ultrametric max rule; paths whose increment radius collides with a term
    offset are materialized digit-exactly.
    """
    law = increment_law(plan.params, t)
    exps = law.sample_exponents(gen, count)
    p = plan.params.p
    collide_exps = set()
    term_data = []
    for ball, coeff in plan.alpha_f.terms:
        d = plan.start - ball.center
        e_d = d.abs_exp() if not d.is_zero() else None
        term_data.append((ball, coeff, e_d))
        if e_d is not None:
            collide_exps.add(e_d)
    values = np.zeros(count, dtype=complex)
    collide = np.isin(exps, sorted(collide_exps)) if collide_exps else np.zeros(count, bool)
    for ball, coeff, e_d in term_data:
        r = ball.radius_exp
        if e_d is None:
            ind = exps <= r
        else:
            mx = np.maximum(exps, e_d)
            ind = np.where(collide, False, mx <= r)
        values += coeff * ind
    idx = np.nonzero(collide)[0]
    for j in idx:
        prec = max(precision, int(exps[j]) - plan.alpha_f.min_radius_exp() + 4)
        inc = uniform_sphere(gen, p, int(exps[j]), prec)
        values[j] = eval_sb(plan.alpha_f, plan.start + inc)
    return values


def _event_factor(plan: _PrimePlan, t: float, gen: np.random.Generator,
                  count: int) -> tuple[np.ndarray, np.ndarray]:
    """(action, observable factor) for primes carrying a potential term."""
    actions = np.zeros(count)
    values = np.zeros(count, dtype=complex)
    tau, f = plan.v_term
    for j in range(count):
        path = sample_event_path(plan.params, plan.start, t, plan.r_min, gen)
        total = 0.0
        for duration, pos in path.segments(t):
            total += duration * eval_sb(f, pos).real
        actions[j] = tau * total
        values[j] = eval_sb(plan.alpha_f, path.end_position())
    return actions, values


def _fk_exact_chunk(req: FKRequest, plans, chunk_idx: int, count: int) -> np.ndarray:
    stream = RngStream(req.seed)
    weighted = np.ones(count, dtype=complex)
    plain = np.ones(count, dtype=complex)
    actions = np.zeros(count)
    for plan in plans:
        gen = stream.child(chunk_idx, plan.slot).generator()
        if plan.v_term is None:
            vals = _endpoint_factor(plan, req.t, gen, count, req.precision)
        else:
            acts, vals = _event_factor(plan, req.t, gen, count)
            actions += acts
        weighted *= vals
        plain *= vals
    weighted = weighted * np.exp(-actions)
    return np.stack([weighted, plain], axis=1)


def _fk_chunk_entry(args):
    kind, req, plans, chunk_idx, count = args
    if kind == "exact":
        return chunk_idx, _fk_exact_chunk(req, plans, chunk_idx, count)
    if kind == "kernel":
        return chunk_idx, _kernel_chunk(req, plans, chunk_idx, count)
    raise ConfigError(f"unknown chunk kind {kind}")


def _run_chunks(kind: str, req: FKRequest, plans) -> np.ndarray:
    sizes = []
    remaining = req.n_paths
    idx = 0
    while remaining > 0:
        m = min(req.chunk_size, remaining)
        sizes.append((idx, m))
        remaining -= m
        idx += 1
    tasks = [(kind, req, plans, i, m) for i, m in sizes]
    if req.workers > 1 and len(tasks) > 1:
        try:
            with ProcessPoolExecutor(max_workers=req.workers) as pool:
                results = dict(pool.map(_fk_chunk_entry, tasks))
        except (OSError, PermissionError):
            results = dict(map(_fk_chunk_entry, tasks))
    else:
        results = dict(map(_fk_chunk_entry, tasks))
    return np.concatenate([results[i] for i, _ in sizes], axis=0)


def _mean_se(values: np.ndarray) -> tuple[complex, float]:
    n = len(values)
    mean = complex(np.mean(values))
    if n < 2:
        return mean, float("inf")
    var = float(np.var(values.real, ddof=1) + np.var(values.imag, ddof=1))
    return mean, math.sqrt(var / n)


def fk_expectation(req: FKRequest) -> FKEstimate:
    """Unbiased Monte Carlo estimate of (pi_t alpha)(x) truncated at N primes.

    Exact mode: primes without a potential term contribute one radial
    increment; primes with one run event paths at the constancy scale, so
    the action integral carries no discretization error.
    """
    if req.mode != "exact":
        return _fk_expectation_quadrature(req)
    plans = _compile_plans(req)
    data = _run_chunks("exact", req, plans)
    mean, se = _mean_se(data[:, 0])
    return FKEstimate(
        value=mean,
        std_error=se,
        n_paths=req.n_paths,
        tail_certificate=tail_certificate(req.sigma, req.b, req.t, req.truncation),
        mode=req.mode,
    )


def fk_expectation_pair(req: FKRequest) -> tuple[FKEstimate, FKEstimate, float]:
    """(damped estimate, free estimate, se of the damping correction).

    Both estimates share paths, so their difference estimates
    E[(1 - e^{-int v}) alpha(X_t)] with strongly reduced variance.
    """
    plans = _compile_plans(req)
    data = _run_chunks("exact", req, plans)
    w_mean, w_se = _mean_se(data[:, 0])
    p_mean, p_se = _mean_se(data[:, 1])
    _, d_se = _mean_se(data[:, 1] - data[:, 0])
    cert = tail_certificate(req.sigma, req.b, req.t, req.truncation)
    return (
        FKEstimate(w_mean, w_se, req.n_paths, cert, req.mode),
        FKEstimate(p_mean, p_se, req.n_paths, cert, req.mode),
        d_se,
    )


def _fk_expectation_quadrature(req: FKRequest) -> FKEstimate:
    """Skeleton-grid fallback for potentials without exact constancy scales.

    Composite midpoint rule with step h on the skeleton interpolant, plus
    one Richardson halving to expose the time-discretization bias.
    """
    h = req.h if req.h is not None else req.t / 1024.0
    steps = max(2, int(round(req.t / h)))
    epochs = [req.t * (k + 1) / steps for k in range(steps)]
    stream = RngStream(req.seed)
    vals = np.zeros(req.n_paths, dtype=complex)
    vals_coarse = np.zeros(req.n_paths, dtype=complex)
    plans = _compile_plans(req)
    for j in range(req.n_paths):
        total, total_c = 0.0, 0.0
        obs = 1.0 + 0j
        for plan in plans:
            gen = stream.child(j, plan.slot).generator()
            sk = sample_skeleton(plan.params, epochs, plan.start, gen, req.precision)
            if plan.v_term is not None:
                pot = SimplePotential(((plan.params.p, *plan.v_term),))
                total += action_integral(sk, pot, req.t)
                total_c += action_integral(
                    PathSkeleton(plan.params, sk.times[::2], sk.values[::2]), pot, req.t
                )
            obs *= eval_sb(plan.alpha_f, sk.end_position())
        vals[j] = math.exp(-total) * obs
        vals_coarse[j] = math.exp(-total_c) * obs
    mean, se = _mean_se(vals)
    mean_c, _ = _mean_se(vals_coarse)
    bias = abs(mean - mean_c)
    return FKEstimate(
        value=mean,
        std_error=se,
        n_paths=req.n_paths,
        tail_certificate=tail_certificate(req.sigma, req.b, req.t, req.truncation),
        mode="quadrature",
        extras=(("richardson_bias", bias), ("h", req.t / steps)),
    )


# -- kernels -----------------------------------------------------------------


@dataclass(frozen=True)
class _BridgePlan:
    slot: int
    params: KernelParams
    x: PAdicScalar
    y: PAdicScalar
    v_term: tuple[float, SBFunction]
    salt: int = 0


def _kernel_chunk(req: FKRequest, plans, chunk_idx: int, count: int) -> np.ndarray:
    stream = RngStream(req.seed)
    steps = req.bridge_steps
    epochs = [req.t * k / steps for k in range(1, steps)]
    out = np.ones((count, len(plans)))
    for col, plan in enumerate(plans):
        gen = stream.child(plan.salt, chunk_idx, plan.slot).generator()
        spec = BridgeSpec(plan.params, req.t, plan.x, plan.y)
        tau, f = plan.v_term
        pot = SimplePotential(((plan.params.p, tau, f),))
        for j in range(count):
            sk = sample_bridge(plan.params, spec, epochs, gen, req.precision)
            a = action_integral(sk, pot, req.t, weights="trapezoid")
            out[j, col] = math.exp(-a)
    return out


def _kernel_density_factor(req: FKRequest) -> float:
    """Product over primes 1..N of the endpoint density rho^i(t, x_i - y_i)."""
    if req.y is None:
        raise ConfigError("kernel estimation needs an endpoint y")
    total = 1.0
    for i in range(1, req.truncation + 1):
        p = prime_at(i)
        params = req.sigma.kernel_params(i, req.b)
        kind, info = component_difference(req.x, req.y, p)
        if kind == "exact":
            e = info.abs_exp()
            total *= (
                density(params, req.t, e) if e is not None
                else density_center(params, req.t)
            )
        elif kind == "exp":
            total *= density(params, req.t, info)
        else:
            raise PrecisionError(
                f"kernel endpoint difference unresolved at prime {p}; "
                "resolve both components or lower the truncation"
            )
    return total


def _bridge_plans(req: FKRequest, salt: int) -> tuple[_BridgePlan, ...]:
    if req.y is None:
        raise ConfigError("kernel estimation needs an endpoint y")
    plans = []
    for slot, (p, tau, f) in enumerate(req.v.components):
        i = prime_index(p)
        params = req.sigma.kernel_params(i, req.b)
        xc = req.x.component(p) or PAdicScalar.zero(p)
        yc = req.y.component(p) or PAdicScalar.zero(p)
        plans.append(_BridgePlan(slot, params, xc, yc, (tau, f), salt))
    return tuple(plans)


def fk_kernel(req: FKRequest) -> FKEstimate:
    """Kernel estimate K_t(x, y) = E_bridge[e^{-int v}] * rho(t, x - y).

    The density factor is analytic (exact at the truncation); only the
    bridge expectation carries Monte Carlo error.  The trapezoid action
    makes the estimator's law invariant under swapping x and y.
    """
    dens = _kernel_density_factor(req)
    plans = _bridge_plans(req, salt=0)
    if not plans:
        return FKEstimate(
            complex(dens), 0.0, req.n_paths,
            tail_certificate(req.sigma, req.b, req.t, req.truncation),
            req.mode, density_factor=dens, bridge_factor=1.0,
        )
    data = _run_chunks("kernel", req, plans)
    per_path = np.prod(data, axis=1)
    mean, se = _mean_se(per_path.astype(complex))
    return FKEstimate(
        value=complex(mean.real * dens),
        std_error=se * dens,
        n_paths=req.n_paths,
        tail_certificate=tail_certificate(req.sigma, req.b, req.t, req.truncation),
        mode=req.mode,
        density_factor=dens,
        bridge_factor=mean.real,
    )


def fk_kernel_product(req: FKRequest) -> tuple[FKEstimate, tuple]:
    """Product-form kernel: independent per-prime bridge factors multiplied.

    For a simple potential the kernel factorizes over primes, so this
    estimates the same quantity as fk_kernel with independent streams; the
    standard error combines per-prime relative errors in quadrature.
    """
    dens = _kernel_density_factor(req)
    factors = []
    total = dens
    rel_var = 0.0
    for salt, plan in enumerate(_bridge_plans(req, salt=0), start=1):
        sub = replace(req, v=SimplePotential(((plan.params.p, *plan.v_term),)))
        data = _run_chunks("kernel", sub, (replace(plan, salt=salt, slot=0),))
        mean, se = _mean_se(data[:, 0].astype(complex))
        factors.append((plan.params.p, mean.real, se))
        total *= mean.real
        rel_var += (se / mean.real) ** 2
    est = FKEstimate(
        value=total,
        std_error=abs(total) * math.sqrt(rel_var),
        n_paths=req.n_paths,
        tail_certificate=tail_certificate(req.sigma, req.b, req.t, req.truncation),
        mode=req.mode,
        density_factor=dens,
        bridge_factor=total / dens if dens else None,
    )
    return est, tuple(factors)


# -- semigroup and generator checks ------------------------------------------


@dataclass(frozen=True)
class SemigroupReport:
    s: float
    t: float
    direct: float
    composed: float
    combined_se: float

    @property
    def discrepancy(self) -> float:
        return abs(self.direct - self.composed)

    def within(self, k: float = 3.0) -> bool:
        return self.discrepancy <= k * self.combined_se or math.isclose(
            self.direct, self.composed, abs_tol=1e-10
        )


def semigroup_compose_free(sigma: SigmaSequence, b: float, s: float, t: float,
                           alpha: SimpleAdelicSB, x: AdelicPoint, N: int) -> SemigroupReport:
    """Analytic composition check: kernel_{s+t} * alpha vs the two-step
    radial convolution, both exact; discrepancy should sit at rounding."""
    direct = free_propagate(sigma, b, s + t, alpha, x, N).value.real
    composed = 1.0
    for i in range(1, N + 1):
        p = prime_at(i)
        params = sigma.kernel_params(i, b)
        law = radial_convolve_laws(params, s, t)
        f = alpha.factor(p)
        xc = x.component(p)
        factor = 0.0
        for ball, coeff in f.terms:
            if xc is None:
                d_exp = None
            else:
                d = xc - ball.center
                d_exp = d.abs_exp()
            factor += coeff.real * law.ball_probability(d_exp, ball.radius_exp)
        composed *= factor
    return SemigroupReport(s, t, direct, composed, 0.0)


def radial_convolve_laws(params: KernelParams, s: float, t: float):
    from .heat_kernel import radial_convolve

    return radial_convolve(
        radial_law(params, s, coverage=1 - 1e-13),
        radial_law(params, t, coverage=1 - 1e-13),
    )


def semigroup_check_mc(sigma: SigmaSequence, b: float, s: float, t: float,
                       alpha: SimpleAdelicSB, v: SimplePotential,
                       x: AdelicPoint, N: int, n: int, seed: int) -> SemigroupReport:
    """Nested Monte Carlo: pi_{s+t} alpha vs pi_s(pi_t alpha) at x.

    Outer and inner sample counts are both ~sqrt(n) (balanced variance).
    """
    direct = fk_expectation(FKRequest(
        sigma, b, s + t, x, alpha, v, n, N, seed=seed,
    ))
    n_out = max(2, int(math.sqrt(n)))
    n_in = n_out
    stream = RngStream(seed).child(777)
    outer_vals = np.zeros(n_out)
    plans = _compile_plans(FKRequest(sigma, b, s, x, alpha, v, 1, N, seed=seed))
    for j in range(n_out):
        action = 0.0
        endpoint: dict[int, PAdicScalar] = {}
        for plan in plans:
            gen = stream.child(j, plan.slot).generator()
            if plan.v_term is not None:
                path = sample_event_path(plan.params, plan.start, s, plan.r_min, gen)
                tau, f = plan.v_term
                for duration, pos in path.segments(s):
                    action += tau * duration * eval_sb(f, pos).real
                endpoint[plan.params.p] = path.end_position()
            else:
                law = increment_law(plan.params, s)
                m = int(law.sample_exponents(gen, 1)[0])
                endpoint[plan.params.p] = plan.start + uniform_sphere(gen, plan.params.p, m, 24)
        inner = fk_expectation(FKRequest(
            sigma, b, t, AdelicPoint.of(endpoint), alpha, v, n_in, N,
            seed=seed * 1_000_003 + j + 1,
        ))
        outer_vals[j] = math.exp(-action) * inner.value.real
    composed = float(np.mean(outer_vals))
    se_comp = float(np.std(outer_vals, ddof=1) / math.sqrt(n_out))
    combined = math.hypot(direct.std_error, se_comp)
    return SemigroupReport(s, t, direct.value.real, composed, combined)


@dataclass(frozen=True)
class GeneratorReport:
    ts: tuple[float, ...]
    finite_differences: tuple[float, ...]
    target: float
    errors: tuple[float, ...]
    orders: tuple[float, ...]
    mc_ses: tuple[float, ...]


def generator_check(sigma: SigmaSequence, b: float, alpha: SimpleAdelicSB,
                    v: SimplePotential, x: AdelicPoint, t_ladder,
                    n_paths: int, N: int, seed: int) -> GeneratorReport:
    """Finite differences (pi_t alpha - alpha)/t against -(D_A + V) alpha.

    The free part is analytic; the potential damping correction is Monte
    Carlo with paths shared between the damped and free estimators.  All
    quantities are truncated at N primes consistently, so the observed
    convergence order is 1 for the truncated system.
    """
    op_center, _ = adelic_vladimirov_apply(
        sigma, b, alpha, x, N
    )
    # strictly truncate: remove the within-table tail beyond N
    from .schwartz import multiplier_constant

    tail_exact = 0.0
    full = alpha.eval(x)
    top = sigma.n_defined()
    for i in range(N + 1, top + 1):
        tail_exact += sigma.sigma(i) * multiplier_constant(prime_at(i), b)
    op_truncated = (op_center - tail_exact * full).real
    target = -op_truncated - v.value(x) * alpha.eval(x).real

    fds, errs, ses = [], [], []
    for k, t in enumerate(t_ladder):
        free_val = free_propagate(sigma, b, t, alpha, x, N).value.real
        if v.components:
            req = FKRequest(sigma, b, t, x, alpha, v, n_paths, N, seed=seed + k)
            damped, plain, corr_se = fk_expectation_pair(req)
            correction = plain.value.real - damped.value.real
            se = corr_se / t
        else:
            correction, se = 0.0, 0.0
        pi_t = free_val - correction
        fd = (pi_t - alpha.eval(x).real) / t
        fds.append(fd)
        errs.append(abs(fd - target))
        ses.append(se)
    orders = tuple(
        math.log(errs[k] / errs[k + 1]) / math.log(t_ladder[k] / t_ladder[k + 1])
        for k in range(len(errs) - 1)
        if errs[k] > 0 and errs[k + 1] > 0
    )
    return GeneratorReport(
        tuple(t_ladder), tuple(fds), target, tuple(errs), orders, tuple(ses)
    )
