"""Command line entry point: ``backscatter <subcommand> [options]``.

Every subcommand reads an optional ``key = value`` config file, applies flag
overrides on top, and writes ``<output>.csv``, ``<output>.json`` and
``<output>.timing.json``. The JSON report embeds the resolved config and holds
no timings, so serial reruns are byte-identical.

Exit codes: 0 pass, 1 config or usage error, 2 numerical diagnostic,
3 verification failure.
"""

from __future__ import annotations

import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import click
import numpy as np

from . import __version__
from .born import DEFAULT_Q3_BUDGET, DEFAULT_Q3_SCHEME, CutoffSpec, born_approx
from .config import ConfigError, ExperimentConfig, load_config
from .dispersion import DEFAULT_S3_ORDERS, AngularRule
from .errors import InvalidInputError, NumericalDiagnostic
from .fields import GridSpec1D, RadialProfile, fit_decay
from .potentials import (
    bessel_spectrum,
    check_g_beta,
    default_g_beta_setup,
    g_beta_profile,
    gaussian_spectrum,
    make_g_beta,
)
from .pv import PVScheme
from .regularity import (
    SUPER_POLYNOMIAL_EXPONENT,
    ExperimentReport,
    _clean,
    counterexample_experiment,
    smoothing_check,
)
from .verify import FAULTS, SUITES, run_suites

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3

PV_DEFAULTS = {
    "pv.delta": PVScheme.delta,
    "pv.panel_order": PVScheme.panel_order,
    "pv.r_max": PVScheme.r_max,
    "pv.tail_tol": PVScheme.tail_tol,
    "pv.near_scheme": PVScheme.near_scheme,
}

DEFAULTS = {
    "counterexample": {
        "eta_min": 4.0,
        "eta_max": 512.0,
        "points": 48,
        "window_lo": 8.0,
        "window_hi": 512.0,
        "quad.order": 16,
        **PV_DEFAULTS,
    },
    "born": {
        "order": 2,
        "c0": 4.0,
        "preset": "bessel_power",
        "gaussian_a": 1.0,
        "eta_min": 4.0,
        "eta_max": 512.0,
        "points": 48,
        "window_lo": 16.0,
        "window_hi": 512.0,
        "quad.order": 16,
        "q3.budget": DEFAULT_Q3_BUDGET,
        **PV_DEFAULTS,
    },
    "verify": {"seed": 0},
    "decay-fit": {"window_lo": 8.0, "window_hi": 128.0, "gaussian_a": 1.0},
}


def _resolve(ctx, command, config_path, overrides, required=()):
    cfg = load_config(config_path, command) if config_path else ExperimentConfig(command)
    cfg = cfg.merged(overrides).with_defaults(DEFAULTS[command])
    missing = [k for k in required if cfg.get(k) is None]
    if missing:
        flags = ", ".join("--" + k.replace("_", "-").replace(".", "-") for k in missing)
        raise click.UsageError(f"missing required option(s): {flags}", ctx=ctx)
    return cfg


def _workers(cfg):
    if cfg.get("serial"):
        return 1
    w = cfg.get("workers")
    if w is None:
        return os.cpu_count() or 1
    if w < 1:
        raise ConfigError("workers must be at least 1")
    return w


@contextmanager
def _mapper(workers):
    if workers <= 1:
        yield map
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            yield pool.map


def _scheme(cfg) -> PVScheme:
    try:
        return PVScheme(
            delta=cfg.get("pv.delta"),
            panel_order=cfg.get("pv.panel_order"),
            r_max=cfg.get("pv.r_max"),
            tail_tol=cfg.get("pv.tail_tol"),
            near_scheme=cfg.get("pv.near_scheme"),
        )
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from None


def _eta_grid(cfg) -> GridSpec1D:
    try:
        return GridSpec1D(cfg.get("eta_min"), cfg.get("eta_max"), cfg.get("points"), "logarithmic")
    except InvalidInputError as exc:
        raise ConfigError(f"eta grid: {exc}") from None


def _dimension(cfg):
    n = cfg.get("n")
    if n not in (2, 3):
        raise ConfigError("n must be 2 or 3")
    return n


def _prefix(cfg, command):
    return Path(cfg.get("output") or command)


def _write_outputs(prefix: Path, report_json: str, csv_text, runtime: float):
    prefix.parent.mkdir(parents=True, exist_ok=True)
    if csv_text is not None:
        Path(f"{prefix}.csv").write_text(csv_text)
    Path(f"{prefix}.json").write_text(report_json)
    Path(f"{prefix}.timing.json").write_text(json.dumps({"runtime_seconds": runtime}) + "\n")


def _summarize(entries):
    for e in entries:
        status = "PASS" if e.get("pass") is not False else "FAIL"
        fitted = e.get("fitted")
        predicted = e.get("predicted")
        click.echo(f"{status}  {e.get('quantity', '')}: fitted {fitted} vs predicted {predicted}")


def config_option(f):
    return click.option("--config", "config_path", type=click.Path(dir_okay=False),
                        help="key = value file; flags override it.")(f)


def common_options(f):
    f = click.option("--output", help="Output path prefix (default: the subcommand name).")(f)
    f = click.option("--serial", is_flag=True, default=None, help="Run on one thread (reference mode).")(f)
    f = click.option("--workers", type=int, help="Parallel workers (default: available cores).")(f)
    return config_option(f)


def sweep_options(f):
    f = click.option("--n", "n", type=int, help="Spatial dimension (2 or 3).")(f)
    f = click.option("--beta", type=float, help="Smoothness parameter of q_beta.")(f)
    f = click.option("--eta-min", type=float)(f)
    f = click.option("--eta-max", type=float)(f)
    f = click.option("--points", type=int, help="Number of log-spaced |eta| nodes.")(f)
    f = click.option("--window-lo", type=float, help="Lower end of the decay-fit window.")(f)
    f = click.option("--window-hi", type=float)(f)
    f = click.option("--quad-order", type=int, help="Angular Gauss-Legendre order on the Ewald sphere.")(f)
    f = click.option("--pv-delta", type=float)(f)
    f = click.option("--pv-panel-order", type=int)(f)
    f = click.option("--pv-r-max", type=float)(f)
    f = click.option("--pv-tail-tol", type=float)(f)
    f = click.option("--pv-near-scheme", type=click.Choice(["symmetric_reflection", "taylor_subtraction"]))(f)
    return common_options(f)


def _sweep_overrides(kw):
    return {
        "n": kw["n"],
        "beta": kw["beta"],
        "eta_min": kw["eta_min"],
        "eta_max": kw["eta_max"],
        "points": kw["points"],
        "window_lo": kw["window_lo"],
        "window_hi": kw["window_hi"],
        "quad.order": kw["quad_order"],
        "pv.delta": kw["pv_delta"],
        "pv.panel_order": kw["pv_panel_order"],
        "pv.r_max": kw["pv_r_max"],
        "pv.tail_tol": kw["pv_tail_tol"],
        "pv.near_scheme": kw["pv_near_scheme"],
        "workers": kw["workers"],
        "serial": kw["serial"],
        "output": kw["output"],
    }


@click.group()
@click.version_option(__version__, prog_name="backscatter")
def cli():
    """Numerical experiments on the Born approximation from backscattering data."""


@cli.command()
@sweep_options
@click.pass_context
def counterexample(ctx, config_path, **kw):
    """Decay of S(q_beta) against the predicted exponent min(beta+n/2+1, 2beta+2)."""
    start = time.perf_counter()
    cfg = _resolve(ctx, "counterexample", config_path, _sweep_overrides(kw), required=("n", "beta"))
    n = _dimension(cfg)
    scheme = _scheme(cfg)
    grid = _eta_grid(cfg)
    rule = AngularRule(order=cfg.get("quad.order"))
    window = (cfg.get("window_lo"), cfg.get("window_hi"))
    with _mapper(_workers(cfg)) as mapper:
        report, data = counterexample_experiment(
            n, cfg.get("beta"), grid, scheme, window=window, rule=rule, mapper=mapper
        )
    report.config = {"command": "counterexample", **cfg.as_dict()}
    _write_outputs(_prefix(cfg, "counterexample"), report.to_json(), data.to_csv(),
                   time.perf_counter() - start)
    _summarize(report.entries)
    return EXIT_OK if report.passed else EXIT_VERIFY


@cli.command()
@sweep_options
@click.option("--order", type=int, help="Born truncation order J (2 or 3).")
@click.option("--c0", type=float, help="Cutoff: chi = 0 below c0, 1 above 2 c0.")
@click.option("--preset", type=click.Choice(["bessel_power", "gaussian"]))
@click.option("--gaussian-a", type=float, help="Width parameter of the Gaussian preset.")
@click.option("--s3-orders", help="Quadrature orders of the trilinear term, e.g. '32 32'.")
@click.option("--q3-budget", type=float, help="Maximum integrand evaluations per Q_3 node.")
@click.pass_context
def born(ctx, config_path, order, c0, preset, gaussian_a, s3_orders, q3_budget, **kw):
    """Residual chi(q - q_B) of the truncated Born series and its smoothing gain."""
    start = time.perf_counter()
    overrides = _sweep_overrides(kw)
    overrides.update({"order": order, "c0": c0, "preset": preset, "gaussian_a": gaussian_a,
                      "s3.orders": s3_orders, "q3.budget": q3_budget})
    cfg = _resolve(ctx, "born", config_path, overrides, required=("n",))
    n = _dimension(cfg)
    J = cfg.get("order")
    if J not in (2, 3):
        raise ConfigError(f"unsupported Born order J = {J}; only 2 and 3 are implemented")
    if J == 3 and n == 3:
        raise ConfigError("J = 3 in three dimensions is outside the desk-scale budget")
    gaussian = cfg.get("preset") == "gaussian"
    if not gaussian and cfg.get("beta") is None:
        raise click.UsageError("missing required option(s): --beta", ctx=ctx)
    if gaussian:
        qhat = gaussian_spectrum(cfg.get("gaussian_a"))
        beta = cfg.get("beta", 1.0)
    else:
        beta = cfg.get("beta")
        qhat = bessel_spectrum(beta, n)
    orders = cfg.get("s3.orders") or DEFAULT_S3_ORDERS[n]
    if len(orders) != (2 if n == 2 else 3):
        raise ConfigError(f"s3.orders needs {2 if n == 2 else 3} values for n = {n}")
    try:
        spec = CutoffSpec(cfg.get("c0"))
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from None
    result = born_approx(
        qhat, J, spec, n, _eta_grid(cfg), _scheme(cfg), DEFAULT_Q3_SCHEME,
        rule=AngularRule(order=cfg.get("quad.order")), orders=orders,
        q3_budget=cfg.get("q3.budget"), workers=_workers(cfg),
    )
    prefix = _prefix(cfg, "born")
    prefix.parent.mkdir(parents=True, exist_ok=True)
    # the spectra are written even when the smoothing fit below is refused
    csv_text = result.to_csv(f"{prefix}.csv")
    window = (cfg.get("window_lo"), cfg.get("window_hi"))
    entry = smoothing_check(result, beta, n, window=window)
    if gaussian:
        entry.update(beta=None, predicted="super-polynomial", required=None,
                     quantity="residual decay of chi(q - q_B), Gaussian preset",
                     label="closed-form envelope")
        entry["pass"] = bool(entry["super_polynomial"])
    entry["failed_nodes"] = {repr(float(result.eta[i])): msg for i, msg in sorted(result.failures.items())}
    report = ExperimentReport({"command": "born", **cfg.as_dict()}, [entry])
    _write_outputs(prefix, report.to_json(), csv_text, time.perf_counter() - start)
    _summarize(report.entries)
    return EXIT_OK if report.passed else EXIT_VERIFY


@cli.command()
@config_option
@click.option("--suite", "suites", multiple=True, type=click.Choice(list(SUITES)),
              help="Run only this suite (repeatable).")
@click.option("--seed", type=int, help="Seed of the randomized suites.")
@click.option("--cases", type=int, help="Cases per randomized suite (defaults per suite).")
@click.option("--output", help="Write the JSON report to <output>.json.")
@click.option("--fault", type=click.Choice(list(FAULTS)), hidden=True)
@click.pass_context
def verify(ctx, config_path, suites, seed, cases, output, fault):
    """Run the randomized property suites; exit 3 if any fails."""
    start = time.perf_counter()
    overrides = {"suite": ",".join(suites) if suites else None, "seed": seed, "cases": cases, "output": output}
    cfg = _resolve(ctx, "verify", config_path, overrides)
    names = [s for s in (cfg.get("suite") or "").replace(",", " ").split() if s] or None
    if names:
        unknown = [s for s in names if s not in SUITES]
        if unknown:
            raise ConfigError(f"unknown suite(s): {', '.join(unknown)}")
    if cases is not None and cases < 1:
        raise ConfigError("cases must be at least 1")
    results = run_suites(names, seed=cfg.get("seed"), cases=cfg.get("cases"), fault=fault)
    payload = _clean({
        "config": {"command": "verify", **cfg.as_dict()},
        "suites": [r.as_dict() for r in results],
        "pass": all(r.passed for r in results),
    })
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if cfg.get("output"):
        _write_outputs(Path(cfg.get("output")), text, None, time.perf_counter() - start)
    for r in results:
        click.echo(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.cases} checks, {len(r.failures)} failures")
    return EXIT_OK if payload["pass"] else EXIT_VERIFY


@cli.command("decay-fit")
@config_option
@click.option("--input", "input_path", type=click.Path(dir_okay=False),
              help="Radial profile CSV with columns rho, re, im.")
@click.option("--potential", type=click.Choice(["bessel_power", "g_beta", "gaussian"]))
@click.option("--n", "n", type=int)
@click.option("--beta", type=float)
@click.option("--gaussian-a", type=float)
@click.option("--bump-scale", type=float, help="Bump scale for g_beta (default: resolved per dimension).")
@click.option("--window-lo", type=float)
@click.option("--window-hi", type=float)
@click.option("--output", help="Output path prefix (default: decay-fit).")
@click.pass_context
def decay_fit(ctx, config_path, input_path, potential, n, beta, gaussian_a, bump_scale,
              window_lo, window_hi, output):
    """Fit the power-law decay exponent of a radial spectrum."""
    start = time.perf_counter()
    overrides = {"input": input_path, "potential": potential, "n": n, "beta": beta, "gaussian_a": gaussian_a,
                 "bump_scale": bump_scale, "window_lo": window_lo, "window_hi": window_hi, "output": output}
    cfg = _resolve(ctx, "decay-fit", config_path, overrides)
    if (cfg.get("input") is None) == (cfg.get("potential") is None):
        raise click.UsageError("give exactly one of --input and --potential", ctx=ctx)
    window = (cfg.get("window_lo"), cfg.get("window_hi"))
    extra = {}
    predicted = None
    kind = cfg.get("potential")
    if kind is None:
        try:
            profile = RadialProfile.from_csv(cfg.get("input"), name=cfg.get("input"))
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot read profile: {exc}") from None
    else:
        dim = _dimension(cfg)
        if kind in ("bessel_power", "g_beta") and cfg.get("beta") is None:
            raise click.UsageError("missing required option(s): --beta", ctx=ctx)
        if kind == "g_beta":
            grid, scale = default_g_beta_setup(dim)
            scale = cfg.get("bump_scale", scale)
            _, spectrum = make_g_beta(cfg.get("beta"), scale, grid, allow_large=True)
            extra = check_g_beta(cfg.get("beta"), spectrum, window)
            extra.update(grid_points=grid.points_per_axis, half_extent=grid.half_extent, bump_scale=scale)
            profile = g_beta_profile(spectrum)
        else:
            analytic = (bessel_spectrum(cfg.get("beta"), dim) if kind == "bessel_power"
                        else gaussian_spectrum(cfg.get("gaussian_a")))
            rho = np.geomspace(window[0], window[1], 64)
            profile = RadialProfile(rho, analytic(rho), name=kind)
        if kind != "gaussian":
            predicted = dim / 2 + cfg.get("beta")
    vals = np.abs(profile.values)
    sel = (profile.rho >= window[0]) & (profile.rho <= window[1])
    if kind == "gaussian" and np.any(vals[sel] == 0):
        fitted, fit_info, ok = float("inf"), {}, True
    else:
        fit = fit_decay(profile, window)
        fitted, fit_info = fit.exponent, fit.as_dict()
        if kind == "gaussian":
            ok = fitted > SUPER_POLYNOMIAL_EXPONENT
        else:
            ok = predicted is None or abs(fitted - predicted) <= 0.05
    entry = {"quantity": f"decay exponent of {profile.name or 'profile'}", "fitted": fitted,
             "predicted": "super-polynomial" if kind == "gaussian" else predicted,
             "window": list(window), "residual": fit_info.get("residual_rms"), "pass": ok,
             "n": cfg.get("n"), "beta": cfg.get("beta"), "j": None, "fit": fit_info, **extra}
    report = ExperimentReport({"command": "decay-fit", **cfg.as_dict()}, [entry])
    _write_outputs(_prefix(cfg, "decay-fit"), report.to_json(), profile.to_csv(), time.perf_counter() - start)
    _summarize(report.entries)
    return EXIT_OK if report.passed else EXIT_VERIFY


def main(argv=None) -> int:
    """Run the CLI and return the process exit code."""
    try:
        code = cli.main(args=argv, prog_name="backscatter", standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        return EXIT_CONFIG
    except click.ClickException as exc:
        exc.show()
        return EXIT_CONFIG
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_CONFIG
    except NumericalDiagnostic as exc:
        click.echo(f"numerical diagnostic ({type(exc).__name__}): {exc}", err=True)
        if getattr(exc, "details", None):
            click.echo(json.dumps(_clean(exc.details), sort_keys=True), err=True)
        return EXIT_NUMERICAL
    except (ConfigError, InvalidInputError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_CONFIG
    return int(code or 0)


if __name__ == "__main__":
    sys.exit(main())
