"""Command-line front end: run scenarios, list them, check the invariants.

Exit codes make failures distinguishable in CI: 0 success, 2 configuration
error (unknown scenario, malformed config file, unwritable output), 3
statistical failure in `properties` or `selftest`. `run` always exits 0 once
the report is written — its acceptance bands are verdicts inside meta.json,
not process failures.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from .scenario_lab import (
    SCENARIO_IDS,
    ScenarioConfig,
    config_defaults,
    make_config,
    run_scenario,
    write_report,
)

_DESCRIPTIONS = {
    "fig1_put": "protective put on a drifting stock, barrier on the put value",
    "fig2_vasicek": "zero-coupon bond under a mean-reverting short rate",
    "appC1_exp_payoff": "exponential terminal claim, volatility-loading route",
    "appD_sweep": "bond rate curves across mean-reversion speeds",
    "ex53_ambiguous": "two-sided discounting of a nonnegative claim",
    "ex54_entropic_brownian": "entropic evaluation of a scaled Brownian claim",
    "ex55_martingale": "plain conditional expectation (zero rate everywhere)",
    "ex56_jump_call": "call in a jump market, series vs Monte Carlo",
    "ex37_entropic_jump": "entropic rate of a capped jump-count claim",
}

_CONFIG_FIELDS = (
    "scenario_id",
    "params",
    "n_paths",
    "n_steps",
    "seed",
    "threshold",
    "out_dir",
)


class ConfigError(ValueError):
    """A problem with flags or a config file (exit code 2)."""


def load_config(path: str | Path) -> ScenarioConfig:
    """Read a flat JSON config; missing fields come from scenario defaults.

    The file must at least name ``scenario_id``. Unknown top-level keys and
    unknown model parameters are rejected with the offending field named.
    """
    text = Path(path).read_text()
    if not text.strip():
        raise ConfigError(f"{path}: empty config; required field 'scenario_id' missing")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    if "scenario_id" not in raw:
        raise ConfigError(f"{path}: required field 'scenario_id' missing")
    sid = raw["scenario_id"]
    unknown = sorted(set(raw) - set(_CONFIG_FIELDS))
    if unknown:
        raise ConfigError(
            f"{path}: unknown field(s) {', '.join(map(repr, unknown))}; "
            f"allowed: {', '.join(_CONFIG_FIELDS)}"
        )
    try:
        base = config_defaults(sid)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    params = base["params"]
    for key, value in dict(raw.get("params", {})).items():
        if key not in params:
            raise ConfigError(
                f"{path}: unknown model parameter {key!r} for {sid}; "
                f"known: {', '.join(sorted(params))}"
            )
        # JSON has no tuples; grid-valued parameters arrive as lists
        params[key] = tuple(value) if isinstance(value, list) else value
    try:
        return ScenarioConfig(
            scenario_id=sid,
            params=params,
            n_paths=int(raw.get("n_paths", base["n_paths"])),
            n_steps=int(raw.get("n_steps", base["n_steps"])),
            seed=int(raw.get("seed", base["seed"])),
            threshold=(
                None
                if raw.get("threshold", base["threshold"]) is None
                else float(raw.get("threshold", base["threshold"]))
            ),
            out_dir=raw.get("out_dir"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def write_config(config: ScenarioConfig, path: str | Path) -> Path:
    """Serialize a config so that :func:`load_config` restores it exactly."""
    payload = {
        "scenario_id": config.scenario_id,
        "params": {k: config.params[k] for k in sorted(config.params)},
        "n_paths": config.n_paths,
        "n_steps": config.n_steps,
        "seed": config.seed,
        "threshold": config.threshold,
        "out_dir": config.out_dir,
    }
    out = Path(path)
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return out


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reslab",
        description="Resilience rates of dynamic risk evaluations: "
        "scenario runs, invariant checks, self-test.",
    )
    parser.add_argument("--version", action="version", version=f"reslab {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    run = sub.add_parser("run", help="run one scenario and write its report")
    run.add_argument("--scenario", help="built-in scenario id (see list-scenarios)")
    run.add_argument("--config", help="JSON config file (fields fall back to defaults)")
    run.add_argument("--seed", type=int, help="override the RNG seed")
    run.add_argument("--paths", type=int, help="override the Monte Carlo path count")
    run.add_argument("--steps", type=int, help="override the number of grid steps")
    run.add_argument("--out", default="out", help="output root (default ./out)")
    run.add_argument(
        "--tolerance-scale",
        type=float,
        default=1.0,
        help="multiply the headline-target tolerances (statistical bands are fixed)",
    )
    run.add_argument("-v", "--verbose", action="store_true", help="print every band")

    sub.add_parser("list-scenarios", help="print the built-in scenario ids")

    props = sub.add_parser(
        "properties", help="run the structural-invariant suite (exit 3 on failure)"
    )
    props.add_argument("--paths", type=int, default=4000)
    props.add_argument("--seed", type=int, default=0)

    sub.add_parser(
        "selftest", help="fast end-to-end smoke of every module (exit 3 on failure)"
    )
    return parser


def _cmd_list() -> int:
    width = max(map(len, SCENARIO_IDS))
    for sid in SCENARIO_IDS:
        d = config_defaults(sid)
        print(
            f"{sid:<{width}}  {_DESCRIPTIONS[sid]}  "
            f"[paths={d['n_paths']}, steps={d['n_steps']}]"
        )
    return 0


def _resolve_run_config(args) -> ScenarioConfig:
    if not args.scenario and not args.config:
        raise ConfigError("run needs --scenario and/or --config")
    if args.config:
        config = load_config(args.config)
        if args.scenario and args.scenario != config.scenario_id:
            raise ConfigError(
                f"--scenario {args.scenario} contradicts config file "
                f"scenario_id {config.scenario_id}"
            )
    else:
        if args.scenario not in SCENARIO_IDS:
            raise ConfigError(
                f"unknown scenario {args.scenario!r}; available:\n  "
                + "\n  ".join(SCENARIO_IDS)
            )
        config = make_config(args.scenario)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.paths is not None:
        overrides["n_paths"] = args.paths
    if args.steps is not None:
        overrides["n_steps"] = args.steps
    if overrides:
        try:
            config = make_config(
                config.scenario_id,
                out_dir=config.out_dir,
                **{**_nondefault_fields(config), **overrides},
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return config


def _nondefault_fields(config: ScenarioConfig) -> dict:
    """Flatten a config back into make_config keyword form."""
    fields = dict(config.params)
    fields.update(
        n_paths=config.n_paths,
        n_steps=config.n_steps,
        seed=config.seed,
        threshold=config.threshold,
    )
    return fields


def _cmd_run(args) -> int:
    config = _resolve_run_config(args)
    if args.tolerance_scale <= 0:
        raise ConfigError(f"--tolerance-scale must be positive, got {args.tolerance_scale}")
    t0 = time.time()
    report = run_scenario(config, tolerance_scale=args.tolerance_scale)
    try:
        files = write_report(report, args.out)
    except OSError as exc:
        raise ConfigError(f"cannot write under {args.out!r}: {exc}") from None
    elapsed = time.time() - t0
    n_fail = sum(not b.passed for b in report.bands)
    print(
        f"{config.scenario_id}: {len(report.rate_rows)} instants, "
        f"{len(report.bands)} bands ({n_fail} failing), {elapsed:.1f}s"
    )
    shown = report.bands if args.verbose else [b for b in report.bands if not b.passed]
    for band in shown:
        mark = "ok " if band.passed else "FAIL"
        print(f"  {mark} {band.name}: {band.detail}")
    for f in files:
        print(f"  wrote {f}")
    return 0


def _cmd_properties(args) -> int:
    from .invariants import run_property_suite

    results = run_property_suite(n_paths=args.paths, seed=args.seed)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.detail}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} properties hold")
    return 3 if failed else 0


def _cmd_selftest() -> int:
    """One fast, deterministic exercise of each module's happy path."""
    import tempfile

    import numpy as np

    from . import (
        RateCurve,
        bs_put_price,
        first_hitting,
        is_acceptable,
        make_time_grid,
        rate_driver_expectation,
        sample_noise,
        simulate_gbm,
        var_rate,
    )
    from .bsde_engine import (
        RateEstimate,
        SolutionSample,
        builtin_drivers,
        entropic_rate_jump,
    )
    from .risk_closed_forms import BSPutSpec, GaussianClaimSpec
    from .resilience_toolkit import AcceptanceQuery, min_acceptance_level

    t0 = time.time()
    checks: list[tuple[str, bool, str]] = []

    def check(name: str, fn) -> None:
        try:
            fn()
            checks.append((name, True, ""))
        except Exception as exc:  # noqa: BLE001 - report, don't crash
            checks.append((name, False, f"{type(exc).__name__}: {exc}"))

    def paths_and_hitting():
        grid = make_time_grid(1.0, 16)
        noise = sample_noise(grid, 512, seed=1)
        s = simulate_gbm(grid, 1.0, 0.05, 0.2, noise).values
        assert s.shape == (512, 17) and (s > 0).all()
        tau = first_hitting(s, 1.1, ">=", grid=grid)
        assert 0 < tau.hit_fraction < 1

    def closed_forms():
        spec = GaussianClaimSpec(x0=0.0, mu_fn=0.1, sigma_fn=1.0, horizon=1.0)
        assert var_rate(spec, t=0.25, alpha=0.5) == 0.0
        put = BSPutSpec(s0=100.0, strike=100.0, mu=0.1, sigma=0.2, horizon=1.0)
        assert bs_put_price(put, 1.0, 80.0) == 20.0

    def engine_rates():
        grid = make_time_grid(1.0, 16)
        noise = sample_noise(grid, 512, seed=2)
        s = simulate_gbm(grid, 1.0, 0.0, 0.2, noise).values
        sol = SolutionSample(grid=grid, rho=s, z=0.2 * s)
        est = rate_driver_expectation(builtin_drivers()["zero"](), sol, 0.5)
        assert est.value == 0.0 and est.std_error == 0.0
        r1, r2 = entropic_rate_jump(1.0, 2.0, lambda n: 0.5 * np.minimum(n, 5), 1.0)
        assert abs(r1.value - r2.value) <= 1e-6 * abs(r1.value)

    def toolkit_round_trip():
        curve = RateCurve(times=(0.0, 0.5), values=(1.0, 2.0), horizon=1.0)
        assert curve.remaining_integral(0.0) == curve.integral(0.0, 1.0)
        rate = RateEstimate(value=1.5, std_error=0.1, method="closed_form")
        level = min_acceptance_level(rate)
        assert is_acceptable(rate, AcceptanceQuery(level=level, t=0.25)).acceptable

    def scenario_and_config():
        from .scenario_lab import make_config, run_scenario, write_report

        cfg = make_config("ex54_entropic_brownian", n_paths=512, n_steps=16)
        report = run_scenario(cfg)
        assert all(b.passed for b in report.bands)
        with tempfile.TemporaryDirectory() as tmp:
            files = write_report(report, tmp)
            assert all(f.exists() for f in files)
            out = write_config(cfg, Path(tmp) / "cfg.json")
            assert load_config(out) == cfg

    check("stochastic_core: paths and first hitting", paths_and_hitting)
    check("risk_closed_forms: analytic pins", closed_forms)
    check("bsde_engine: zero driver and jump representations", engine_rates)
    check("resilience_toolkit: curve and acceptance round trip", toolkit_round_trip)
    check("scenario_lab + cli: tiny run, emission, config round trip", scenario_and_config)

    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  {detail}" if detail else ""))
    failed = sum(not ok for _, ok, _ in checks)
    print(f"{len(checks) - failed}/{len(checks)} self-tests in {time.time() - t0:.1f}s")
    return 3 if failed else 0


def parse_and_dispatch(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.subcommand == "run":
            return _cmd_run(args)
        if args.subcommand == "list-scenarios":
            return _cmd_list()
        if args.subcommand == "properties":
            return _cmd_properties(args)
        return _cmd_selftest()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(parse_and_dispatch())


if __name__ == "__main__":
    main()
