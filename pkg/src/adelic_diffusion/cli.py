"""Experiment command line: density tables, exit-law and exit-count
comparisons, operator checks, Feynman-Kac runs, and the validation suite.

Every command reads an optional JSON config plus flag overrides, writes
RFC-4180 CSV (or JSON lines) with a schema_id column, and always writes a
manifest alongside with the exact config echo and derived quantities, so a
run can be reproduced bit-exactly from its manifest.

Exit codes: 0 ok, 1 check failure, 2 config error, 3 numeric failure.
"""

from __future__ import annotations

import csv
import json
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import __version__
from .adelic import (
    AdelicPoint,
    SigmaSequence,
    exit_count_factorial_bound,
    exit_count_moment,
    exit_count_pmf,
    sample_adelic_path,
    tail_certificate,
)
from .errors import (
    BridgeUnderflowError,
    ConfigError,
    SummabilityError,
    TruncationError,
)
from .feynman_kac import FKRequest, fk_expectation, fk_kernel, fk_kernel_product, free_propagate
from .heat_kernel import (
    KernelParams,
    alpha,
    ball_mass,
    density,
    exit_prob,
    radial_law,
    sphere_mass,
)
from .io import observable_from_json, point_from_json, potential_from_json
from .padic import PAdicScalar
from .rng import RngStream
from .sampler import sample_event_path, sample_increment, sample_skeleton, sup_norm_exceeds
from .schwartz import SimpleAdelicSB, SimplePotential, vacuum_multiplier_norm_sq, vladimirov_apply
from .validate import run_checks

TOLERANCES = {
    "kernel_normalization": 1e-10,
    "chapman_kolmogorov": 1e-8,
    "sphere_density_consistency": 1e-12,
    "vacuum_norm_quadrature": 1e-12,
    "statistical_bands": "3 standard errors",
    "tv_radial_histograms": 0.01,
    "tv_overshoot": 0.02,
    "chisquare_pvalue_floor": 1e-6,
}

SEED_SCHEME = (
    "Philox streams via SeedSequence(entropy=seed, spawn_key=path); "
    "paths chunked by fixed index blocks, per-prime sub-streams, so outputs "
    "do not depend on worker count"
)


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get("ADELIC_DIFFUSION_WORKERS", "1")))
    except ValueError:
        return 1


class RunConfig(dict):
    """Config dict with typed access and precondition errors."""

    def need(self, key, cast, default=None):
        if key not in self and default is None:
            raise ConfigError(f"config key '{key}' is required")
        try:
            return cast(self.get(key, default))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config key '{key}': {exc}") from exc


def _load_config(path: str | None, overrides: dict) -> RunConfig:
    data: dict = {}
    if path:
        with open(path) as fh:
            doc = json.load(fh)
        data = doc.get("config", doc)  # accept a manifest as a config source
    for k, v in overrides.items():
        if v is not None:
            data[k] = v
    return RunConfig(data)


def _sigma_from_config(cfg: RunConfig) -> SigmaSequence:
    explicit = tuple(float(s) for s in cfg.get("sigma_explicit", ()))
    coeff = float(cfg.get("sigma_tail_coeff", 0.0 if explicit else 1.0))
    power = float(cfg.get("sigma_tail_power", 2.0))
    return SigmaSequence(explicit=explicit, tail_coeff=coeff, tail_power=power)


def _write_rows(out_path: Path, fmt: str, schema: str, header: list[str], rows) -> None:
    if fmt == "csv":
        with open(out_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["schema_id"] + header)
            for row in rows:
                w.writerow([schema] + [_cell(v) for v in row])
    else:
        with open(out_path, "w") as fh:
            for row in rows:
                doc = {"schema_id": schema}
                doc.update(dict(zip(header, row)))
                fh.write(json.dumps(doc, default=_cell) + "\n")


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (np.floating, np.integer)):
        return repr(v.item())
    return v


def _write_manifest(out_path: Path, command: str, cfg: RunConfig, derived: dict,
                    wall: float, fmt: str) -> Path:
    manifest = {
        "schema_id": "manifest_v1",
        "command": command,
        "artifact_version": __version__,
        "config": dict(cfg),
        "derived": derived,
        "tolerances": TOLERANCES,
        "seed_scheme": SEED_SCHEME,
        "wall_time_s": wall,
        "output": str(out_path),
        "format": fmt,
    }
    mpath = Path(str(out_path) + ".manifest.json")
    with open(mpath, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return mpath


def _finish(command, cfg, out, fmt, schema, header, rows, derived, t0):
    out_path = Path(out if out else f"{command.replace('-', '_')}.{'csv' if fmt == 'csv' else 'jsonl'}")
    _write_rows(out_path, fmt, schema, header, rows)
    _write_manifest(out_path, command, cfg, derived, time.time() - t0, fmt)
    click.echo(f"wrote {out_path} (+ manifest)")


def _run(fn):
    try:
        fn()
    except (TruncationError, BridgeUnderflowError) as exc:
        click.echo(f"numeric failure: {exc}", err=True)
        sys.exit(3)
    except (ConfigError, SummabilityError, ValueError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)


common = [
    click.option("--config", "config_path", type=click.Path(exists=True), default=None,
                 help="JSON config (a manifest file also works)"),
    click.option("--output", "-o", default=None, help="output data file"),
    click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None),
    click.option("--seed", type=int, default=None),
]


def _with_common(fn):
    for opt in reversed(common):
        fn = opt(fn)
    return fn


@click.group()
@click.version_option(__version__)
def main():
    """p-adic and adelic diffusion experiments."""


@main.command()
@_with_common
@click.option("--prime", "-p", type=int, default=None)
@click.option("--b", type=float, default=None)
@click.option("--sigma", type=float, default=None)
@click.option("--t", type=float, default=None)
def density_cmd(config_path, output, fmt, seed, prime, b, sigma, t, **_):
    """Radial density, sphere and ball masses over a radius window."""

    def go():
        t0 = time.time()
        cfg = _load_config(config_path, dict(prime=prime, b=b, sigma=sigma, t=t,
                                             seed=seed, format=fmt))
        p = cfg.need("prime", int, 2)
        params = KernelParams(p, cfg.need("b", float, 1.0), cfg.need("sigma", float, 1.0))
        tt = cfg.need("t", float, 1.0)
        law = radial_law(params, tt)
        rows = []
        total = 0.0
        for m in range(law.m_lo, law.m_hi + 1):
            sm = law.mass(m)
            total += sm
            rows.append([m, density(params, tt, m), sm, ball_mass(params, tt, m)])
        rows.append(["TOTAL", "", total + law.bottom_mass, ""])
        derived = {
            "alpha": alpha(params), "window": [law.m_lo, law.m_hi],
            "normalization_defect": abs(total + law.bottom_mass + law.top_loss - 1.0),
        }
        f = cfg.get("format", "csv")
        _finish("density", cfg, cfg.get("output", output), f, "density_v1",
                ["m", "density", "sphere_mass", "ball_mass"], rows, derived, t0)

    _run(go)


main.add_command(density_cmd, name="density")


@main.command("exit")
@_with_common
@click.option("--prime", "-p", type=int, default=None)
@click.option("--b", type=float, default=None)
@click.option("--sigma", type=float, default=None)
@click.option("--horizon", "-T", type=float, default=None)
@click.option("--r", type=int, default=None)
@click.option("--n-paths", type=int, default=None)
def exit_cmd(config_path, output, fmt, seed, prime, b, sigma, horizon, r, n_paths, **_):
    """Analytic exit law versus event and skeleton Monte Carlo."""

    def go():
        t0 = time.time()
        cfg = _load_config(config_path, dict(prime=prime, b=b, sigma=sigma, T=horizon,
                                             r=r, n_paths=n_paths, seed=seed, format=fmt))
        params = KernelParams(cfg.need("prime", int, 2), cfg.need("b", float, 1.0),
                              cfg.need("sigma", float, 1.0))
        T = cfg.need("T", float, 1.0)
        rr = cfg.need("r", int, 0)
        n = cfg.need("n_paths", int, 20_000)
        sd = cfg.need("seed", int, 1)
        analytic = exit_prob(params, T, rr)
        se = math.sqrt(analytic * (1 - analytic) / n)
        zero = PAdicScalar.zero(params.p)

        gen = RngStream(sd).child(1).generator()
        stay_event = 0
        for _ in range(n):
            path = sample_event_path(params, zero, T, min(rr, 0), gen)
            if not sup_norm_exceeds(path, rr):
                stay_event += 1
        n_sk = min(n, 5000)
        gen = RngStream(sd).child(2).generator()
        epochs = [T * k / 256 for k in range(1, 257)]
        stay_sk = 0
        for _ in range(n_sk):
            sk = sample_skeleton(params, epochs, zero, gen, 16)
            if all(v.is_zero() or v.abs_exp() <= rr for v in sk.values):
                stay_sk += 1
        rows = [
            ["analytic", T, rr, analytic, 0.0, 0],
            ["event_mc", T, rr, stay_event / n, se, n],
            ["skeleton_mc", T, rr, stay_sk / n_sk,
             math.sqrt(analytic * (1 - analytic) / n_sk), n_sk],
        ]
        derived = {"alpha": alpha(params), "exit_rate": params.sigma * alpha(params)}
        _finish("exit", cfg, cfg.get("output", output), cfg.get("format", "csv"),
                "exit_v1", ["estimator", "T", "r", "value", "std_error", "n"],
                rows, derived, t0)

    _run(go)


@main.command("sample")
@_with_common
@click.option("--prime", "-p", type=int, default=None)
@click.option("--b", type=float, default=None)
@click.option("--sigma", type=float, default=None)
@click.option("--horizon", "-T", type=float, default=None)
@click.option("--n-paths", type=int, default=None)
@click.option("--resolution", type=int, default=None)
def sample_cmd(config_path, output, fmt, seed, prime, b, sigma, horizon, n_paths,
               resolution, **_):
    """Emit sampled paths (event records, or skeletons when epochs given)."""

    def go():
        t0 = time.time()
        cfg = _load_config(config_path, dict(prime=prime, b=b, sigma=sigma, T=horizon,
                                             n_paths=n_paths, seed=seed, format=fmt,
                                             resolution=resolution))
        params = KernelParams(cfg.need("prime", int, 2), cfg.need("b", float, 1.0),
                              cfg.need("sigma", float, 1.0))
        T = cfg.need("T", float, 1.0)
        n = cfg.need("n_paths", int, 10)
        sd = cfg.need("seed", int, 1)
        epochs = cfg.get("epochs")
        rows = []
        zero = PAdicScalar.zero(params.p)
        for j in range(n):
            stream = RngStream(sd).child(j)
            if epochs:
                sk = sample_skeleton(params, [float(e) for e in epochs], zero, stream, 24)
                for tt, v in zip(sk.times, sk.values):
                    rows.append([j, "skeleton", tt, params.p,
                                 "" if v.is_zero() else v.valuation,
                                 "" if v.is_zero() else "".join(map(str, v.digits[:12])),
                                 "" if v.is_zero() else v.abs_exp()])
            else:
                res = cfg.need("resolution", int, 0)
                path = sample_event_path(params, zero, T, res, stream)
                rows.append([j, "start", 0.0, params.p, "", "", ""])
                for tt, v in path.events:
                    rows.append([j, "event", tt, params.p, v.valuation,
                                 "".join(map(str, v.digits[:12])), v.abs_exp()])
        derived = {"mode": "skeleton" if epochs else "event"}
        _finish("sample", cfg, cfg.get("output", output), cfg.get("format", "csv"),
                "sample_v1",
                ["path_id", "kind", "time", "prime", "valuation", "digits", "abs_exp"],
                rows, derived, t0)

    _run(go)


@main.command("exit-count")
@_with_common
@click.option("--b", type=float, default=None)
@click.option("--horizon", "-T", type=float, default=None)
@click.option("--truncation", "-N", type=int, default=None)
@click.option("--k-max", type=int, default=None)
@click.option("--n-paths", type=int, default=None)
def exit_count_cmd(config_path, output, fmt, seed, b, horizon, truncation, k_max,
                   n_paths, **_):
    """Exit-count pmf with factorial bounds, moments, and Monte Carlo."""

    def go():
        t0 = time.time()
        cfg = _load_config(config_path, dict(b=b, T=horizon, truncation=truncation,
                                             k_max=k_max, n_paths=n_paths, seed=seed,
                                             format=fmt))
        sigma = _sigma_from_config(cfg)
        bb = cfg.need("b", float, 1.0)
        T = cfg.need("T", float, 1.0)
        N = cfg.need("truncation", int, 15)
        km = cfg.need("k_max", int, 10)
        n = cfg.need("n_paths", int, 10_000)
        sd = cfg.need("seed", int, 1)
        dist = exit_count_pmf(sigma, bb, T, N, km)
        counts = np.zeros(km + 1)
        for j in range(n):
            bundle = sample_adelic_path(sigma, bb, T, AdelicPoint.zero(), N,
                                        RngStream(sd).child(j), resolution=0)
            k = bundle.exit_count()
            if k <= km:
                counts[k] += 1
        rows = []
        for k in range(km + 1):
            bound = exit_count_factorial_bound(sigma, bb, T, k)
            rows.append(["pmf", k, dist.pmf[k], dist.lo[k], dist.hi[k], bound,
                         counts[k] / n, bool(dist.pmf[k] <= bound)])
        for m in (1, 2):
            exact, bound = exit_count_moment(sigma, bb, T, N, m)
            rows.append(["moment", m, exact, "", "", bound, "", bool(exact < bound)])
        tv = 0.5 * float(np.sum(np.abs(counts / n - np.asarray(dist.pmf))))
        derived = {
            "betas": [sigma.beta(i, bb) for i in range(1, N + 1)],
            "tail_exit_bound": dist.tail_exit_bound,
            "mc_tv_distance": tv,
        }
        _finish("exit-count", cfg, cfg.get("output", output), cfg.get("format", "csv"),
                "exit_count_v1",
                ["kind", "k", "value", "lo", "hi", "bound", "mc", "below_bound"],
                rows, derived, t0)

    _run(go)


@main.command("operator")
@_with_common
@click.option("--b", type=float, default=None)
@click.option("--primes", default=None, help="comma list, default 2,3,5,7")
@click.option("--observable", type=click.Path(exists=True), default=None,
              help="JSON observable; emits operator values at radius ladder")
def operator_cmd(config_path, output, fmt, seed, b, primes, observable, **_):
    """Vacuum multiplier norms and operator applications."""

    def go():
        t0 = time.time()
        cfg = _load_config(config_path, dict(b=b, primes=primes, seed=seed, format=fmt))
        bb = cfg.need("b", float, 1.0)
        plist = [int(q) for q in str(cfg.get("primes", "2,3,5,7")).split(",")]
        rows = []
        for p in plist:
            closed = vacuum_multiplier_norm_sq(p, bb)
            quad, k, term = 0.0, 0, 1.0
            while term > 1e-20:
                term = p ** (-2 * bb * k) * p ** (-k) * (1 - 1 / p)
                quad += term
                k += 1
            rows.append(["norm", p, bb, "", closed, quad, abs(closed - quad)])
        if cfg.get("observable") or observable:
            path = cfg.get("observable", observable)
            with open(path) as fh:
                obs = observable_from_json(json.load(fh))
            for p, f in obs.factors:
                params = KernelParams(p, bb, 1.0)
                for m in range(-3, 4):
                    x = PAdicScalar(p, -m, 1, 24)
                    val = vladimirov_apply(params, f, x)
                    rows.append(["apply", p, bb, m, val.real, val.imag, ""])
        derived = {"moment_identity": "norm_sq(p, b) = unit_ball_abs_moment(p, 2b)"}
        _finish("operator", cfg, cfg.get("output", output), cfg.get("format", "csv"),
                "operator_v1",
                ["kind", "prime", "b", "m", "value_a", "value_b", "diff"],
                rows, derived, t0)

    _run(go)


@main.command("fk")
@_with_common
@click.option("--b", type=float, default=None)
@click.option("--t", type=float, default=None)
@click.option("--n-paths", type=int, default=None)
@click.option("--truncation", "-N", type=int, default=None)
@click.option("--observable", type=click.Path(exists=True), default=None)
@click.option("--potential", type=click.Path(exists=True), default=None)
@click.option("--point", "point_file", type=click.Path(exists=True), default=None)
@click.option("--endpoint", "endpoint_file", type=click.Path(exists=True), default=None,
              help="kernel mode: estimate K_t(x, y) for this y")
@click.option("--product", is_flag=True, help="also estimate the per-prime product form")
@click.option("--workers", type=int, default=None)
def fk_cmd(config_path, output, fmt, seed, b, t, n_paths, truncation, observable,
           potential, point_file, endpoint_file, product, workers, **_):
    """Feynman-Kac expectation (and kernels, with --endpoint)."""

    def go():
        t0 = time.time()
        cfg = _load_config(config_path, dict(b=b, t=t, n_paths=n_paths,
                                             truncation=truncation, seed=seed,
                                             format=fmt, workers=workers))
        sigma = _sigma_from_config(cfg)
        bb = cfg.need("b", float, 1.0)
        tt = cfg.need("t", float, 1.0)
        n = cfg.need("n_paths", int, 20_000)
        sd = cfg.need("seed", int, 1)
        wk = cfg.get("workers") or _default_workers()

        def _doc(flag, key):
            src = cfg.get(key, flag)
            if src is None:
                return None
            with open(src) as fh:
                return json.load(fh)

        obs_doc = _doc(observable, "observable")
        alpha_f = observable_from_json(obs_doc) if obs_doc else SimpleAdelicSB.vacuum()
        pot_doc = _doc(potential, "potential")
        pot = potential_from_json(pot_doc) if pot_doc else SimplePotential.zero()
        pt_doc = _doc(point_file, "point")
        x = point_from_json(pt_doc) if pt_doc else AdelicPoint.zero()
        y_doc = _doc(endpoint_file, "endpoint")
        y = point_from_json(y_doc) if y_doc else None

        N = cfg.need("truncation", int, max(
            4, x.max_active_index(),
            y.max_active_index() if y else 0,
        ))
        req = FKRequest(sigma, bb, tt, x, alpha_f, pot, n, N, seed=sd, y=y,
                        workers=int(wk), bridge_steps=cfg.need("bridge_steps", int, 128))
        rows = []
        if y is None:
            est = fk_expectation(req)
            rows.append(["expectation", est.value.real, est.value.imag,
                         est.std_error, est.n_paths, est.tail_certificate, "", ""])
            if not pot.components:
                fp = free_propagate(sigma, bb, tt, alpha_f, x, N)
                rows.append(["free_truncated", fp.value.real, fp.value.imag, 0.0, 0,
                             fp.tail_lo_mult, "", ""])
        else:
            est = fk_kernel(req)
            rows.append(["kernel", est.value.real, est.value.imag, est.std_error,
                         est.n_paths, est.tail_certificate, est.density_factor,
                         est.bridge_factor])
            if pot.components:
                rev = fk_kernel(replace(req, x=y, y=x, seed=sd + 1))
                rows.append(["kernel_reversed", rev.value.real, rev.value.imag,
                             rev.std_error, rev.n_paths, rev.tail_certificate,
                             rev.density_factor, rev.bridge_factor])
            if product or cfg.get("product"):
                pest, factors = fk_kernel_product(req)
                rows.append(["kernel_product", pest.value.real, pest.value.imag,
                             pest.std_error, pest.n_paths, pest.tail_certificate,
                             pest.density_factor, pest.bridge_factor])
                for p, mean, se in factors:
                    rows.append([f"bridge_factor_p{p}", mean, 0.0, se, n, "", "", ""])
        derived = {
            "truncation": N,
            "tail_certificate": tail_certificate(sigma, bb, tt, N),
            "alphas": [alpha(sigma.kernel_params(i, bb)) for i in range(1, N + 1)],
            "betas": [sigma.beta(i, bb) for i in range(1, N + 1)],
            "sigma_partial": sum(sigma.sigma(i) for i in range(1, N + 1)),
        }
        _finish("fk", cfg, cfg.get("output", output), cfg.get("format", "csv"),
                "fk_v1",
                ["quantity", "value_re", "value_im", "std_error", "n_paths",
                 "tail_certificate", "density_factor", "bridge_factor"],
                rows, derived, t0)

    _run(go)


@main.command("validate")
@_with_common
@click.option("--full", is_flag=True, help="full-size sample counts")
@click.option("--inject-alpha-bug", is_flag=True,
              help="self-test: corrupt the exit-law reference and expect detection")
def validate_cmd(config_path, output, fmt, seed, full, inject_alpha_bug, **_):
    """Run every module's invariant suite with pre-registered seeds."""

    def go():
        t0 = time.time()
        cfg = _load_config(config_path, dict(format=fmt))
        results = run_checks(fast=not full, inject_alpha_bug=inject_alpha_bug)
        rows = [[r.module, r.name, r.passed, r.detail, r.tolerance] for r in results]
        derived = {"n_checks": len(results),
                   "n_failed": sum(not r.passed for r in results)}
        _finish("validate", cfg, cfg.get("output", output), cfg.get("format", "csv"),
                "validate_v1", ["module", "check", "passed", "detail", "tolerance"],
                rows, derived, t0)
        for r in results:
            mark = "PASS" if r.passed else "FAIL"
            click.echo(f"[{mark}] {r.module}.{r.name}: {r.detail} ({r.tolerance})")
        if inject_alpha_bug:
            hit = any(not r.passed and r.name == "exit_law_event_mc" for r in results)
            click.echo("injected-bug detected" if hit else "injected-bug NOT detected")
            sys.exit(0 if hit else 1)
        if any(not r.passed for r in results):
            sys.exit(1)

    _run(go)


@main.command("bench")
@_with_common
@click.option("--n", type=int, default=None)
def bench_cmd(config_path, output, fmt, seed, n, **_):
    """Throughput of the core samplers."""

    def go():
        t0 = time.time()
        cfg = _load_config(config_path, dict(n=n, seed=seed, format=fmt))
        nn = cfg.need("n", int, 20_000)
        sd = cfg.need("seed", int, 1)
        params = KernelParams(2, 1.0, 1.0)
        zero = PAdicScalar.zero(2)
        rows = []

        gen = RngStream(sd).child(1).generator()
        t1 = time.time()
        for _ in range(nn):
            sample_increment(params, 1.0, gen, 16)
        dt = time.time() - t1
        rows.append(["increment", nn, dt, nn / dt])

        gen = RngStream(sd).child(2).generator()
        t1 = time.time()
        for _ in range(nn):
            sample_event_path(params, zero, 1.0, 0, gen)
        dt = time.time() - t1
        rows.append(["event_path", nn, dt, nn / dt])

        from .sampler import BridgeSpec, sample_bridge

        spec = BridgeSpec(params, 1.0, zero, PAdicScalar.from_int(1, 2))
        epochs = [k / 16 for k in range(1, 16)]
        gen = RngStream(sd).child(3).generator()
        nb = max(200, nn // 20)
        t1 = time.time()
        for _ in range(nb):
            sample_bridge(params, spec, epochs, gen, 16)
        dt = time.time() - t1
        rows.append(["bridge_16_epochs", nb, dt, nb / dt])

        _finish("bench", cfg, cfg.get("output", output), cfg.get("format", "csv"),
                "bench_v1", ["benchmark", "n", "seconds", "per_second"],
                rows, derived={}, t0=t0)

    _run(go)


if __name__ == "__main__":
    main()
