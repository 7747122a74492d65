"""Scenario-driven command line front end.

A scenario is a flat key=value file (dotted prefixes group sections, ``#``
starts a comment line).  Everything is validated when the file loads;
no simulation starts from a half-checked configuration.  Each subcommand
writes its numeric outputs, rendered figures, and a run manifest into one
directory, and refuses to overwrite an existing run unless --force.

Exit codes: 0 success, 1 usage or configuration error, 2 a constraint
audit found violations, 3 numeric failure.

All randomness flows from the single scenario seed (or the
GROWTH_LAB_SEED environment variable when set); per-path streams are
derived by counter, so changing n_paths never perturbs earlier paths and
any worker count produces byte-identical numeric outputs.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .cer import (
    HorizonGrid,
    fit_rate,
    floor_gap_bound,
    gap_profile,
    sandwich_check,
    sweep_expected_utility,
    write_sweep,
)
from .constraints import (
    DrawdownWealth,
    FloorSpec,
    FloorWealth,
    ShiftedWealth,
    validate_drawdown_block,
    validate_floor_block,
    write_constraint_report,
)
from .errors import ConfigError, GrowthLabError, NumericError
from .figures import render_gap_vs_bound, render_path_fan, render_sandwich, render_sweep_fit
from .market import (
    RNG_ALGORITHM_ID,
    CoefficientSchedule,
    MertonWealth,
    NoiseBlock,
    ValueFunctionQuery,
    closed_form_value,
    simulate_assets,
    theta_sq_integral,
)
from .paths import DiscretePath, TimeGrid, write_path_dump
from .transforms import DrawdownSpec, LinearDrawdown, TabulatedDrawdown, build_scale_pair, linear_drawdown_scale
from .utility import PowerUtility, signed_log

SEED_ENV_VAR = "GROWTH_LAB_SEED"
MANIFEST_NAME = "manifest.txt"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VIOLATION = 2
EXIT_NUMERIC = 3

_AUDIT_PATHS = 1000
_DUMP_PATHS = 4
_FAN_PATHS = 40


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# --- scenario loading --------------------------------------------------------


def parse_key_values(text: str, source: str = "<scenario>") -> dict[str, str]:
    """Parse flat ``key = value`` lines; reject duplicates and junk."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _need(kv: dict[str, str], key: str) -> str:
    if key not in kv:
        raise ConfigError(f"{key}: required key is missing")
    return kv[key]


def _as_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: not a number: {value!r}") from exc


def _as_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: not an integer: {value!r}") from exc


def _as_floats(key: str, value: str) -> list[float]:
    items = [s.strip() for s in value.split(",") if s.strip()]
    if not items:
        raise ConfigError(f"{key}: expected a comma-separated list")
    return [_as_float(key, s) for s in items]


def _get_float(kv, key, default=None):
    if key not in kv:
        if default is None:
            raise ConfigError(f"{key}: required key is missing")
        return default
    return _as_float(key, kv[key])


def _get_int(kv, key, default=None):
    if key not in kv:
        if default is None:
            raise ConfigError(f"{key}: required key is missing")
        return default
    return _as_int(key, kv[key])


_KNOWN_SCALARS = {
    "p", "v0", "seed", "n_paths", "delta", "tail_fraction",
    "grid.t_max", "grid.n_steps", "grid.steps_per_year",
    "horizons",
    "market.breakpoints",
    "constraint.kind", "constraint.alpha", "constraint.w.x", "constraint.w.y",
    "constraint.floor.kind", "constraint.floor.epsilon", "constraint.floor.level",
    "constraint.floor.decay", "constraint.floor.fraction",
    "asymptotics.T", "value.T",
}


@dataclass(frozen=True)
class Scenario:
    """A fully validated experiment configuration."""

    raw: tuple[tuple[str, str], ...]
    p: float
    v0: float
    seed: int
    n_paths: int
    delta: float
    tail_fraction: float
    grid: TimeGrid
    horizons: HorizonGrid
    schedule: CoefficientSchedule
    constraint_kind: str
    alpha: float | None
    drawdown: DrawdownSpec | None
    floor_kind: str | None
    floor_epsilon: float | None
    floor_level: float
    floor_decay: float
    floor_fraction: float
    asymptotics_T: tuple[float, ...]
    value_T: float | None

    def hash(self) -> str:
        """Hash of the canonical key=value content with the effective seed."""
        items = dict(self.raw)
        items["seed"] = str(self.seed)
        canonical = "\n".join(f"{k}={v}" for k, v in sorted(items.items()))
        return hashlib.sha256(canonical.encode()).hexdigest()


def _build_schedule(kv: dict[str, str]) -> CoefficientSchedule:
    breaks = _as_floats("market.breakpoints", kv.get("market.breakpoints", "0"))
    n_intervals = len(breaks)
    mu_rows = []
    for k in range(n_intervals):
        mu_rows.append(_as_floats(f"market.mu.{k}", _need(kv, f"market.mu.{k}")))
    d = len(mu_rows[0])
    for k, row in enumerate(mu_rows):
        if len(row) != d:
            raise ConfigError(f"market.mu.{k}: expected {d} entries, got {len(row)}")
    sigma_rows = []
    for k in range(n_intervals):
        flat = _as_floats(f"market.sigma.{k}", _need(kv, f"market.sigma.{k}"))
        if len(flat) != d * d:
            raise ConfigError(
                f"market.sigma.{k}: expected {d * d} row-major entries, got {len(flat)}"
            )
        sigma_rows.append(np.asarray(flat).reshape(d, d))
    try:
        return CoefficientSchedule(
            breakpoints=np.asarray(breaks),
            mu=np.asarray(mu_rows),
            sigma=np.stack(sigma_rows),
        )
    except GrowthLabError as exc:
        raise ConfigError(f"market: {exc}") from exc


def load_scenario(path: str | Path) -> Scenario:
    """Load and eagerly validate a scenario file.

    Every failure names the offending key.  GROWTH_LAB_SEED, when set,
    replaces the scenario seed.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"scenario file not found: {path}")
    kv = parse_key_values(path.read_text(), source=str(path))
    for key in kv:
        if key in _KNOWN_SCALARS or key.startswith(("market.mu.", "market.sigma.")):
            continue
        raise ConfigError(f"{key}: unknown key")

    p = _get_float(kv, "p")
    if not (p < 1.0) or p == 0.0:
        raise ConfigError(f"p: power exponent must satisfy p < 1 and p != 0, got {p}")
    v0 = _get_float(kv, "v0", 1.0)
    if not v0 > 0.0:
        raise ConfigError(f"v0: must be positive, got {v0}")

    seed = _get_int(kv, "seed")
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        seed = _as_int(SEED_ENV_VAR, env_seed)
    if seed < 0:
        raise ConfigError(f"seed: must be nonnegative, got {seed}")

    n_paths = _get_int(kv, "n_paths")
    if n_paths < 1:
        raise ConfigError(f"n_paths: must be positive, got {n_paths}")
    delta = _get_float(kv, "delta", 0.01)
    if not (0.0 < delta < 1.0):
        raise ConfigError(f"delta: must lie in (0, 1), got {delta}")
    tail_fraction = _get_float(kv, "tail_fraction", 0.5)
    if not (0.0 < tail_fraction <= 1.0):
        raise ConfigError(f"tail_fraction: must lie in (0, 1], got {tail_fraction}")

    t_max = _get_float(kv, "grid.t_max")
    if not t_max > 0.0:
        raise ConfigError(f"grid.t_max: must be positive, got {t_max}")
    if "grid.n_steps" in kv and "grid.steps_per_year" in kv:
        raise ConfigError("grid.n_steps: give either n_steps or steps_per_year, not both")
    if "grid.n_steps" in kv:
        n_steps = _get_int(kv, "grid.n_steps")
    else:
        spy = _get_int(kv, "grid.steps_per_year", 50)
        if spy < 1:
            raise ConfigError(f"grid.steps_per_year: must be positive, got {spy}")
        n_steps = int(round(t_max * spy))
    if n_steps < 1:
        raise ConfigError(f"grid.n_steps: must be positive, got {n_steps}")
    grid = TimeGrid.regular(t_max, n_steps)

    try:
        horizons = HorizonGrid(np.asarray(_as_floats("horizons", _need(kv, "horizons"))))
    except GrowthLabError as exc:
        raise ConfigError(f"horizons: {exc}") from exc
    if horizons.t_max > t_max:
        raise ConfigError(
            f"horizons: largest horizon {horizons.t_max} exceeds grid.t_max {t_max}"
        )
    for T in horizons.horizons:
        try:
            grid.index_of(float(T))
        except GrowthLabError as exc:
            raise ConfigError(f"horizons: {T} does not land on the grid") from exc

    schedule = _build_schedule(kv)
    for b in schedule.breakpoints[1:]:
        if b < t_max:
            try:
                grid.index_of(float(b))
            except GrowthLabError as exc:
                raise ConfigError(
                    f"market.breakpoints: {b} does not land on the grid"
                ) from exc

    kind = kv.get("constraint.kind", "none")
    alpha = None
    drawdown = None
    floor_kind = None
    floor_epsilon = None
    floor_level = 0.0
    floor_decay = 0.0
    floor_fraction = 0.0
    if kind == "none":
        pass
    elif kind == "drawdown":
        alpha = _get_float(kv, "constraint.alpha")
        if not (0.0 <= alpha < 1.0):
            raise ConfigError(
                f"constraint.alpha: drawdown bound must lie in [0, 1), got {alpha}"
            )
        if ("constraint.w.x" in kv) != ("constraint.w.y" in kv):
            raise ConfigError("constraint.w.x: knot lists w.x and w.y come together")
        try:
            if "constraint.w.x" in kv:
                xs = _as_floats("constraint.w.x", kv["constraint.w.x"])
                ys = _as_floats("constraint.w.y", kv["constraint.w.y"])
                w = TabulatedDrawdown(xs=np.asarray(xs), ys=np.asarray(ys))
                drawdown = DrawdownSpec(w=w, alpha=alpha, v0=v0, breakpoints=np.asarray(xs))
            else:
                drawdown = DrawdownSpec(w=LinearDrawdown(alpha=alpha), alpha=alpha, v0=v0)
        except GrowthLabError as exc:
            raise ConfigError(f"constraint: {exc}") from exc
    elif kind == "floor":
        floor_kind = _need(kv, "constraint.floor.kind")
        floor_epsilon = _get_float(kv, "constraint.floor.epsilon")
        floor_level = _get_float(kv, "constraint.floor.level", 0.0)
        floor_decay = _get_float(kv, "constraint.floor.decay", 0.0)
        floor_fraction = _get_float(kv, "constraint.floor.fraction", 0.0)
        try:
            probe_ref = object() if floor_kind == "proportional" else None
            FloorSpec(
                kind=floor_kind,
                epsilon=floor_epsilon,
                v0=v0,
                level=floor_level,
                decay=floor_decay,
                fraction=floor_fraction,
                reference=probe_ref,
            )
        except GrowthLabError as exc:
            raise ConfigError(f"constraint.floor: {exc}") from exc
    else:
        raise ConfigError(
            f"constraint.kind: expected none, drawdown, or floor, got {kind!r}"
        )

    asymptotics_T = tuple(
        _as_floats("asymptotics.T", kv.get("asymptotics.T", "10,100,1000,10000"))
    )
    value_T = _as_float("value.T", kv["value.T"]) if "value.T" in kv else None

    return Scenario(
        raw=tuple(sorted(kv.items())),
        p=p,
        v0=v0,
        seed=seed,
        n_paths=n_paths,
        delta=delta,
        tail_fraction=tail_fraction,
        grid=grid,
        horizons=horizons,
        schedule=schedule,
        constraint_kind=kind,
        alpha=alpha,
        drawdown=drawdown,
        floor_kind=floor_kind,
        floor_epsilon=floor_epsilon,
        floor_level=floor_level,
        floor_decay=floor_decay,
        floor_fraction=floor_fraction,
        asymptotics_T=asymptotics_T,
        value_T=value_T,
    )


# --- manifest ----------------------------------------------------------------


def _utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def write_manifest(
    out_dir: Path, scenario: Scenario, status: str, started: str, finished: str | None
) -> None:
    """Write the run manifest; rewritten whenever the run changes state."""
    lines = [
        "# growth-lab manifest v1",
        f"version={__version__}",
        f"scenario_sha256={scenario.hash()}",
        f"seed={scenario.seed}",
        f"rng={RNG_ALGORITHM_ID}",
        f"status={status}",
        f"started_utc={started}",
        f"finished_utc={finished if finished else '-'}",
    ]
    (out_dir / MANIFEST_NAME).write_text("\n".join(lines) + "\n")


# --- model assembly ----------------------------------------------------------


def _merton(scn: Scenario) -> MertonWealth:
    return MertonWealth(schedule=scn.schedule, p=scn.p, v0=scn.v0)


def _drawdown_pair(scn: Scenario):
    if scn.drawdown is None:
        raise ConfigError("constraint.kind: this subcommand needs a drawdown scenario")
    if isinstance(scn.drawdown.w, LinearDrawdown):
        return linear_drawdown_scale(scn.alpha, scn.v0)
    return build_scale_pair(scn.drawdown)


def _drawdown_model(scn: Scenario) -> DrawdownWealth:
    # The composed objective U(F(x)) stays in the power family for the
    # linear drawdown function, with exponent p(1 - alpha); the same inner
    # strategy is used as a feasible stand-in for tabulated functions.
    q = scn.p * (1.0 - scn.alpha)
    inner = MertonWealth(schedule=scn.schedule, p=q, v0=scn.v0)
    return DrawdownWealth(inner=inner, scale=_drawdown_pair(scn))


def _floor_spec(scn: Scenario, reference) -> FloorSpec:
    if scn.floor_kind is None:
        raise ConfigError("constraint.kind: this subcommand needs a floor scenario")
    return FloorSpec(
        kind=scn.floor_kind,
        epsilon=scn.floor_epsilon,
        v0=scn.v0,
        level=scn.floor_level,
        decay=scn.floor_decay,
        fraction=scn.floor_fraction,
        reference=reference if scn.floor_kind == "proportional" else None,
    )


def _floor_models(scn: Scenario):
    # The proportional floor tracks the unshifted optimum as its benchmark;
    # the shifted copy xi is what the construction slices an epsilon of.
    benchmark = _merton(scn)
    xi = ShiftedWealth(inner=benchmark, delta=scn.delta, v0=scn.v0)
    spec = _floor_spec(scn, benchmark)
    vhat = FloorWealth(xi=xi, dominating=spec.dominating_model(), epsilon=spec.epsilon)
    return xi, spec, vhat


def _strategy_model(scn: Scenario):
    if scn.constraint_kind == "drawdown":
        return _drawdown_model(scn)
    if scn.constraint_kind == "floor":
        return _floor_models(scn)[2]
    return _merton(scn)


def _mean_theta_sq(scn: Scenario) -> float:
    return theta_sq_integral(scn.schedule, scn.grid.t_max) / scn.grid.t_max


# --- subcommands -------------------------------------------------------------


def cmd_simulate(scn: Scenario, out: Path, workers: int) -> int:
    """Dump sample asset and wealth paths, plus a fan chart."""
    model = _strategy_model(scn)
    n_dump = min(scn.n_paths, _DUMP_PATHS)
    dim = scn.schedule.mu.shape[1]
    for i in range(n_dump):
        noise = NoiseBlock(seed=scn.seed, path_index=i, grid=scn.grid, dim=dim)
        for j, asset in enumerate(simulate_assets(scn.schedule, scn.grid, noise)):
            with open(out / f"asset{j}-path{i:03d}.csv", "w") as fh:
                write_path_dump(asset, fh)
    n_fan = min(scn.n_paths, _FAN_PATHS)
    block = model.path_block(scn.grid, scn.seed, list(range(n_fan)))
    paths = [DiscretePath(grid=scn.grid, values=row, wealth=True) for row in block]
    for i in range(n_dump):
        with open(out / f"wealth-path{i:03d}.csv", "w") as fh:
            write_path_dump(paths[i], fh)
    render_path_fan(paths, out / "paths.png", title="sample wealth paths")
    print(f"wrote {n_dump} asset/wealth dumps and a {n_fan}-path fan chart to {out}")
    return EXIT_OK


def cmd_cer_sweep(scn: Scenario, out: Path, workers: int) -> int:
    """Sweep expected utility over horizons and fit the growth rate."""
    model = _strategy_model(scn)
    u = PowerUtility(scn.p)
    estimates = sweep_expected_utility(
        model, u, scn.horizons, scn.n_paths, scn.seed, grid=scn.grid, workers=workers
    )
    report = fit_rate(estimates, scn.tail_fraction)
    with open(out / "sweep.csv", "w") as fh:
        write_sweep(report, fh)
    render_sweep_fit(report, out / "sweep.png", title=f"rate sweep, p={scn.p:g}")
    tsq = _mean_theta_sq(scn)
    if scn.constraint_kind == "drawdown":
        q = scn.p * (1.0 - scn.alpha)
        target = abs(scn.p) * (1.0 - scn.alpha) / (2.0 * (1.0 - q)) * tsq
    else:
        target = abs(scn.p) / (2.0 * (1.0 - scn.p)) * tsq
    rel = abs(report.fitted_rate - target) / abs(target) if target else float("nan")
    print(f"fitted rate {report.fitted_rate:.6g} (long-run target {target:.6g}, "
          f"relative error {rel:.3g})")
    return EXIT_OK


def _write_gaps(path: Path, ts, gaps, ses, bound) -> None:
    with open(path, "w") as fh:
        fh.write("# growth-lab gaps v1\n")
        fh.write("T,gap,gap_se,bound\n")
        for T, g, s, b in zip(ts, gaps, ses, bound):
            fh.write(f"{_fmt(T)},{_fmt(g)},{_fmt(s)},{_fmt(b)}\n")


def cmd_verify_floor(scn: Scenario, out: Path, workers: int) -> int:
    """Construct the floored candidate, audit it, and report the rate gap."""
    xi, spec, vhat = _floor_models(scn)
    u = PowerUtility(scn.p)
    ref = sweep_expected_utility(
        xi, u, scn.horizons, scn.n_paths, scn.seed, grid=scn.grid, workers=workers
    )
    cand = sweep_expected_utility(
        vhat, u, scn.horizons, scn.n_paths, scn.seed, grid=scn.grid, workers=workers
    )
    ref_fit = fit_rate(ref, scn.tail_fraction)
    cand_fit = fit_rate(cand, scn.tail_fraction)
    with open(out / "sweep-reference.csv", "w") as fh:
        write_sweep(ref_fit, fh)
    with open(out / "sweep-floored.csv", "w") as fh:
        write_sweep(cand_fit, fh)
    ts, gaps, ses = gap_profile(cand_fit, ref_fit)
    bound = floor_gap_bound(scn.p, spec.epsilon, ts)
    _write_gaps(out / "gaps.csv", ts, gaps, ses, bound)
    render_gap_vs_bound(cand_fit, ref_fit, bound, out / "gaps.png",
                        title=f"floored rate gap, eps={spec.epsilon:g}")
    within = np.all(gaps <= bound + 3.0 * ses)
    print(f"rate gap within |p log eps|/T + 3 SE at every horizon: "
          f"{'yes' if within else 'NO'}")
    print(f"gap at T={ts[-1]:g}: {gaps[-1]:.6g} (bound {bound[-1]:.6g})")

    n_audit = min(scn.n_paths, _AUDIT_PATHS)
    idx = list(range(n_audit))
    vb = vhat.path_block(scn.grid, scn.seed, idx)
    refvals = None
    if spec.kind == "proportional":
        refvals = spec.reference.path_block(scn.grid, scn.seed, idx)
    audit = validate_floor_block(vb, scn.grid, spec, reference_values=refvals)
    with open(out / "constraint-report.txt", "w") as fh:
        write_constraint_report(audit, fh)
    fan = [DiscretePath(grid=scn.grid, values=row, wealth=True) for row in vb[:_FAN_PATHS]]
    floor_curve = None
    if spec.kind in ("constant", "exponential"):
        floor_curve = spec.floor_block(scn.grid)
    render_path_fan(fan, out / "paths.png", title="floored wealth", floor=floor_curve)
    print(f"floor audit: {audit.n_violations} violations over {audit.n_paths_checked} "
          f"paths (worst margin {audit.worst_margin:.6g})")
    return EXIT_VIOLATION if audit.n_violations else EXIT_OK


def cmd_verify_drawdown(scn: Scenario, out: Path, workers: int) -> int:
    """Construct the drawdown-constrained candidate, audit it, fit its rate."""
    model = _drawdown_model(scn)
    u = PowerUtility(scn.p)
    estimates = sweep_expected_utility(
        model, u, scn.horizons, scn.n_paths, scn.seed, grid=scn.grid, workers=workers
    )
    report = fit_rate(estimates, scn.tail_fraction)
    with open(out / "sweep.csv", "w") as fh:
        write_sweep(report, fh)
    render_sweep_fit(report, out / "sweep.png",
                     title=f"drawdown rate sweep, alpha={scn.alpha:g}")
    q = scn.p * (1.0 - scn.alpha)
    target = abs(scn.p) * (1.0 - scn.alpha) / (2.0 * (1.0 - q)) * _mean_theta_sq(scn)
    rel = abs(report.fitted_rate - target) / abs(target) if target else float("nan")
    linear = isinstance(scn.drawdown.w, LinearDrawdown)
    label = "long-run target" if linear else "linear-family reference"
    print(f"fitted rate {report.fitted_rate:.6g} ({label} {target:.6g}, "
          f"relative error {rel:.3g})")

    n_audit = min(scn.n_paths, _AUDIT_PATHS)
    block = model.path_block(scn.grid, scn.seed, list(range(n_audit)))
    audit = validate_drawdown_block(block, scn.drawdown)
    with open(out / "constraint-report.txt", "w") as fh:
        write_constraint_report(audit, fh)
    fan = [DiscretePath(grid=scn.grid, values=row, wealth=True) for row in block[:_FAN_PATHS]]
    render_path_fan(fan, out / "paths.png", title="drawdown-constrained wealth")
    print(f"drawdown audit: {audit.n_violations} violations over "
          f"{audit.n_paths_checked} paths (worst margin {audit.worst_margin:.6g})")
    return EXIT_VIOLATION if audit.n_violations else EXIT_OK


def cmd_asymptotics(scn: Scenario, out: Path, workers: int) -> int:
    """Evaluate the closed-form value sandwich across long horizons."""
    if scn.alpha is None:
        raise ConfigError("constraint.alpha: asymptotics needs a drawdown scenario")
    report = sandwich_check(scn.p, scn.alpha, scn.schedule, scn.asymptotics_T)
    with open(out / "asymptotics.csv", "w") as fh:
        fh.write("# growth-lab sandwich v1\n")
        fh.write("T,lower,upper,log_gap,gap_over_log_T\n")
        for i in range(report.T.size):
            fh.write(",".join(_fmt(x) for x in (
                report.T[i], report.lower[i], report.upper[i],
                report.log_gap[i], report.gap_over_log_T[i],
            )) + "\n")
    render_sandwich(report, out / "sandwich.png",
                    title=f"value sandwich, p={scn.p:g}, alpha={scn.alpha:g}")
    if not report.ordered:
        raise NumericError("sandwich bounds crossed: lower > upper at some horizon")
    c = report.gap_over_log_T
    print(f"bounds ordered at every T; gap/log T constant: "
          f"{', '.join(f'{x:.6g}' for x in c)} (largest {np.max(c):.6g})")
    return EXIT_OK


def cmd_value(scn: Scenario, out: Path, workers: int) -> int:
    """Print the closed-form optimal expected utility at value.T."""
    if scn.value_T is None:
        raise ConfigError("value.T: required for the value subcommand")
    query = ValueFunctionQuery(v0=scn.v0, T=scn.value_T, p=scn.p)
    value = closed_form_value(query, scn.schedule)
    with open(out / "value.txt", "w") as fh:
        fh.write("# growth-lab value v1\n")
        fh.write(f"T={_fmt(scn.value_T)}\n")
        fh.write(f"p={_fmt(scn.p)}\n")
        fh.write(f"v0={_fmt(scn.v0)}\n")
        fh.write(f"value={_fmt(value)}\n")
        fh.write(f"signed_log={_fmt(signed_log(value))}\n")
    print(f"value = {value:.17g}")
    return EXIT_OK


_COMMANDS = {
    "simulate": cmd_simulate,
    "cer-sweep": cmd_cer_sweep,
    "verify-floor": cmd_verify_floor,
    "verify-drawdown": cmd_verify_drawdown,
    "asymptotics": cmd_asymptotics,
    "value": cmd_value,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="growth-lab",
        description="Long-run growth experiments under floor and drawdown constraints.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        sp = sub.add_parser(name, help=fn.__doc__)
        sp.add_argument("--scenario", required=True, help="scenario key=value file")
        sp.add_argument("--out", default=None, help="output directory "
                        "(default: growth-lab-<command>)")
        sp.add_argument("--workers", type=int, default=None,
                        help="worker processes (default: machine parallelism)")
        sp.add_argument("--force", action="store_true",
                        help="overwrite an existing output directory")
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG

    try:
        scenario = load_scenario(args.scenario)
    except GrowthLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out) if args.out else Path(f"growth-lab-{args.command}")
    if (out / MANIFEST_NAME).exists() and not args.force:
        print(f"error: {out} already holds a run; pass --force to overwrite",
              file=sys.stderr)
        return EXIT_CONFIG
    out.mkdir(parents=True, exist_ok=True)

    workers = args.workers if args.workers is not None else (os.cpu_count() or 1)
    if workers < 1:
        print("error: --workers must be positive", file=sys.stderr)
        return EXIT_CONFIG

    started = _utc_now()
    write_manifest(out, scenario, "running", started, None)
    try:
        code = _COMMANDS[args.command](scenario, out, workers)
    except KeyboardInterrupt:
        write_manifest(out, scenario, "aborted", started, _utc_now())
        print("aborted", file=sys.stderr)
        return 130
    except ConfigError as exc:
        write_manifest(out, scenario, "aborted", started, _utc_now())
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GrowthLabError as exc:
        write_manifest(out, scenario, "aborted", started, _utc_now())
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except BaseException:
        write_manifest(out, scenario, "aborted", started, _utc_now())
        raise
    write_manifest(out, scenario, "complete", started, _utc_now())
    return code


if __name__ == "__main__":
    sys.exit(main())
