"""Command-line entry point.

Commands: ``simulate`` (write path ensembles as CSV), ``decompose`` (run the
multiplicative decomposition diagnostics over an ensemble), ``verify`` (exact
property suites), and ``experiment`` (the Monte Carlo studies; subcommands
are generated from the experiment registry).

Exit codes: 0 success; 2 invalid configuration or usage; 3 an acceptance
threshold failed while the computation itself succeeded; 4 unwritable
output.  The master seed comes from ``--seed``, falling back to the
``SIGMA_SEED`` environment variable.  ``--config FILE`` supplies defaults
from a flat ``key = value`` file (``#`` comments allowed); explicit flags
win over the file.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from pathlib import Path as FsPath

import click
import numpy as np

from . import reports
from .decompose import class_d_from_batches
from .experiments import EXPERIMENTS, _martingale_batch, _martingale_spec, _ranges, _stream_batches
from .generators import FAMILIES, GeneratorSpec, make_ensemble
from .grids import make_grid, write_paths_csv
from .verify import VERIFY_SUITES, run_suites

EXIT_ACCEPTANCE = 3
EXIT_OUTPUT = 4


@dataclass(frozen=True)
class RunConfig:
    """Programmatic equivalent of one CLI invocation.

    ``command`` is one of simulate/decompose/verify/experiment; ``name``
    selects the experiment or verify suite.  ``params`` carries the
    family/experiment-specific numeric options (``x0``, ``level``, ...).
    """

    command: str
    name: str = ""
    family: str = "brownian"
    params: dict = field(default_factory=dict)
    seed: int = 0
    n_paths: int = 10
    n_steps: int = 4096
    horizon: float = 1.0
    output_dir: str = "out"
    formats: tuple = ("json", "csv")
    workers: int = 1

    def __post_init__(self):
        if self.command not in ("simulate", "decompose", "verify", "experiment"):
            raise ValueError(f"unknown command {self.command!r}")
        for label, v in (("seed", self.seed), ("n_paths", self.n_paths),
                         ("n_steps", self.n_steps), ("horizon", self.horizon),
                         ("workers", self.workers)):
            if label != "seed" and not v > 0:
                raise ValueError(f"{label} must be positive, got {v}")

    def to_argv(self) -> list[str]:
        if self.command == "verify":
            return ["verify", self.name or "all", "--seed", str(self.seed)]
        common = [
            "--seed", str(self.seed),
            "--out", self.output_dir,
            "--formats", ",".join(self.formats),
            "--workers", str(self.workers),
            "--paths", str(self.n_paths),
        ]
        extra = [arg for k, v in sorted(self.params.items())
                 for arg in (f"--{k.replace('_', '-')}", str(v))]
        if self.command == "experiment":
            defn = EXPERIMENTS.get(self.name)
            if defn is not None:  # grid options only where the experiment has them
                if "horizon" in defn.params and "horizon" not in self.params:
                    extra += ["--horizon", repr(self.horizon)]
                if "n_steps" in defn.params and "n_steps" not in self.params:
                    extra += ["--n-steps", str(self.n_steps)]
            return ["experiment", self.name, *common, *extra]
        return [
            self.command, "--family", self.family,
            "--n-steps", str(self.n_steps), "--horizon", repr(self.horizon),
            *common, *extra,
        ]


def run(config: RunConfig) -> int:
    """Execute one run; returns the process exit code (0/2/3/4)."""
    try:
        main.main(args=config.to_argv(), standalone_mode=False)
        return 0
    except click.UsageError:
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)
    except OSError:
        return EXIT_OUTPUT

_MAX_SIMULATE_VALUES = 50_000_000


def _read_config(ctx: click.Context, param: click.Parameter, value):
    """Eager --config callback: file values become the command's defaults."""
    if not value:
        return value
    defaults = {}
    try:
        with open(value, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise click.UsageError(f"{value}:{lineno}: expected 'key = value'")
                key, val = (part.strip() for part in line.split("=", 1))
                defaults[key.replace("-", "_")] = val
    except OSError as exc:
        raise click.UsageError(f"cannot read config file {value}: {exc}")
    ctx.default_map = {**defaults, **(ctx.default_map or {})}
    return value


def _common_options(fn):
    fn = click.option("--seed", type=int, default=0, envvar="SIGMA_SEED", show_default=True,
                      help="Master seed (flag wins over SIGMA_SEED).")(fn)
    fn = click.option("--out", type=click.Path(file_okay=False), default="out", show_default=True,
                      help="Output directory.")(fn)
    fn = click.option("--formats", default="json,csv", show_default=True,
                      help="Comma list from {csv,json,svg}.")(fn)
    fn = click.option("--workers", type=int, default=lambda: os.cpu_count() or 1,
                      help="Worker processes (default: available parallelism).")(fn)
    fn = click.option("--config", type=click.Path(dir_okay=False), callback=_read_config,
                      expose_value=False, is_eager=True,
                      help="Flat key=value config file supplying option defaults.")(fn)
    return fn


def _parse_formats(formats: str) -> set[str]:
    parts = {p.strip() for p in formats.split(",") if p.strip()}
    bad = parts - {"csv", "json", "svg"}
    if bad:
        raise click.UsageError(f"unknown formats: {sorted(bad)}")
    return parts


def _build_spec(family, horizon, n_steps, a, b, x0, stop_level, stop_line_drift) -> GeneratorSpec:
    params = {}
    if family in ("bessel3", "scale_martingale"):
        params["x0"] = x0
    if family == "brownian_stopped_level":
        params["a"] = a
    if family == "brownian_drift_stopped_line":
        params["b"] = b
    if family == "exp_martingale":
        if stop_level > 0:
            params["stop_level"] = stop_level
        if stop_line_drift > 0:
            params["stop_line_drift"] = stop_line_drift
    try:
        return GeneratorSpec(family, params, make_grid(horizon, n_steps))
    except ValueError as exc:
        raise click.UsageError(str(exc))


def _family_options(fn):
    fn = click.option("--family", type=click.Choice(sorted(FAMILIES)), required=True)(fn)
    fn = click.option("--horizon", type=float, default=1.0, show_default=True)(fn)
    fn = click.option("--n-steps", type=int, default=4096, show_default=True)(fn)
    fn = click.option("--a", type=float, default=1.0, show_default=True,
                      help="Stopping level for brownian_stopped_level.")(fn)
    fn = click.option("--b", type=float, default=1.0, show_default=True,
                      help="Line drift for brownian_drift_stopped_line.")(fn)
    fn = click.option("--x0", type=float, default=1.0, show_default=True,
                      help="Start point for bessel3 / scale_martingale.")(fn)
    fn = click.option("--stop-level", type=float, default=0.0, show_default=True,
                      help="Optional exp_martingale level stop (0 disables).")(fn)
    fn = click.option("--stop-line-drift", type=float, default=0.0, show_default=True,
                      help="Optional exp_martingale line stop (0 disables).")(fn)
    return fn


def _write_guard(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except OSError as exc:
        click.echo(f"error: cannot write output: {exc}", err=True)
        sys.exit(EXIT_OUTPUT)


@click.group()
def main():
    """Stochastic-path toolkit: simulate ensembles, decompose nonnegative
    submartingales, and verify the decomposition identities by Monte Carlo."""


@main.command()
@_family_options
@click.option("--paths", type=int, default=10, show_default=True)
@_common_options
def simulate(family, horizon, n_steps, a, b, x0, stop_level, stop_line_drift,
             paths, seed, out, formats, workers):
    """Generate an ensemble and write it in the long-form CSV path format."""
    fmt = _parse_formats(formats)
    spec = _build_spec(family, horizon, n_steps, a, b, x0, stop_level, stop_line_drift)
    total = paths * (n_steps + 1)
    if total > _MAX_SIMULATE_VALUES:
        raise click.UsageError(
            f"simulate materializes paths; {paths} x {n_steps + 1} values exceed "
            f"the {_MAX_SIMULATE_VALUES} cap -- reduce --paths or --n-steps"
        )
    ens = make_ensemble(spec, paths, seed)
    out_dir = FsPath(out)
    _write_guard(out_dir.mkdir, parents=True, exist_ok=True)
    written = []
    if "csv" in fmt:
        p = out_dir / "paths.csv"
        _write_guard(write_paths_csv, ens.paths, p)
        written.append(p.name)
    if "json" in fmt:
        doc = {
            "schema": 1,
            "command": "simulate",
            "spec": spec.to_config(),
            "seed": seed,
            "n_paths": paths,
        }
        p = out_dir / "simulate.json"
        _write_guard(p.write_bytes, reports.report_json_bytes(doc))
        written.append(p.name)
    click.echo(f"simulate: {paths} {family} paths on [0, {horizon}] -> {out_dir} ({', '.join(written)})")


@main.command()
@_family_options
@click.option("--paths", type=int, default=10000, show_default=True)
@_common_options
def decompose(family, horizon, n_steps, a, b, x0, stop_level, stop_line_drift,
              paths, seed, out, formats, workers):
    """Decompose a positive-martingale ensemble and write the class-(D)
    diagnostics report (bessel3 enters via its normalized scale martingale)."""
    fmt = _parse_formats(formats)
    spec = _build_spec(family, horizon, n_steps, a, b, x0, stop_level, stop_line_drift)
    try:
        mspec = _martingale_spec(spec)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    rows = max(64, min(4096, 4_000_000 // (n_steps + 1)))
    cfg = mspec.to_config()
    args = [(cfg, seed, first, r) for first, r in _ranges(paths, rows)]
    classd = class_d_from_batches(_stream_batches(_martingale_batch, args, workers), mspec.grid)
    envelope = {
        "schema": 1,
        "command": "decompose",
        "spec": spec.to_config(),
        "seed": seed,
        "results": classd.as_dict(),
    }
    out_dir = FsPath(out)
    _write_guard(out_dir.mkdir, parents=True, exist_ok=True)
    written = []
    if "json" in fmt:
        p = out_dir / "classd_report.json"
        _write_guard(p.write_bytes, reports.report_json_bytes(envelope))
        written.append(p.name)
    if "csv" in fmt:
        from .calculus import running_min
        from .generators import generate_rows

        M = generate_rows(mspec, seed, 0, 1)[0]
        I = running_min(M)
        rows_csv = [
            {
                "t": float(t), "M": float(m), "I": float(i),
                "X": float(m / i - 1.0), "A": float(-np.log(i)),
                "N": float(m / i - 1.0 + np.log(i)),
            }
            for t, m, i in zip(mspec.grid.times, M, I)
        ]
        p = out_dir / "decomposition_path0.csv"
        _write_guard(reports.write_csv_table, p, ["t", "M", "I", "X", "A", "N"], rows_csv)
        written.append(p.name)
    click.echo(
        f"decompose: {family} x{paths} at T={horizon}: "
        f"E[MC]={classd.e_mc.mean:.5f}+-{classd.e_mc.stderr:.5f}, "
        f"1+E[int M dC]={classd.e_int.mean:.5f}+-{classd.e_int.stderr:.5f} -> {out_dir}"
    )


@main.command()
@click.argument("suite", type=click.Choice(sorted(VERIFY_SUITES) + ["all"]))
@click.option("--seed", type=int, default=None, envvar="SIGMA_SEED",
              help="Override the suite's pinned seed.")
def verify(suite, seed):
    """Run an exact property suite; exits 3 if a property fails."""
    names = sorted(VERIFY_SUITES) if suite == "all" else [suite]
    failed = False
    for name, ok, detail in run_suites(names, seed):
        click.echo(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        failed = failed or not ok
    if failed:
        sys.exit(EXIT_ACCEPTANCE)


@main.group()
def experiment():
    """Run a named Monte Carlo experiment (names come from the registry)."""


def _summary_line(name: str, report) -> str:
    envelope = report.as_report()
    res = envelope["results"]
    if name == "lemma-balance":
        return (f"lemma-balance: |diff|={res['abs_diff']:.5f} "
                f"({res['diff_over_stderr']:.2f} combined stderr, agree={res['ci_agreement']})")
    if name == "azema-law":
        return (f"azema-law: max|emp-formula|={res['max_abs_deviation']:.4f} "
                f"censoring={envelope['censoring_rate']:.4f}")
    if name == "two-infinity":
        gaps = ", ".join(f"T={r['horizon']:g}: {r['median_gap']:.4f}" for r in res["per_horizon"])
        return f"two-infinity: median gaps {gaps}"
    if name == "saturation":
        if res["levels"]:
            lv = ", ".join(
                f"a={r['level']:g}: {r['empirical_survival']['mean']:.4f} (ref {r['reference']:.4f})"
                for r in res["levels"]
            )
            return f"saturation[{res['kind']}]: {lv}"
        return f"saturation[{res['kind']}]: membership_rate={res['membership_rate']:.4f}"
    if name == "tail":
        ex = res["extras"]
        if res["kind"] == "T_a_heavy_tail":
            return f"tail[T_a]: loglog slope {ex['loglog_slope']:.3f} (ref {ex['loglog_slope_reference']:.3f})"
        w = ex["wealth_estimate"]
        return (f"tail[sigma_b]: E[exp(B-t/2)]={w['mean']:.4f}+-{w['stderr']:.4f} "
                f"side_of_one={ex['side_of_one']}")
    return name


def _make_experiment_command(defn):
    @click.option("--paths", type=int, default=10000, show_default=True)
    @_common_options
    def cmd(paths, seed, out, formats, workers, **params):
        fmt = _parse_formats(formats)
        try:
            report = defn.runner(seed=seed, n_paths=paths, workers=workers, **params)
        except ValueError as exc:
            raise click.UsageError(str(exc))
        written = _write_guard(reports.write_report, out, defn.name.replace("-", "_"),
                               report.as_report(), fmt)
        click.echo(_summary_line(defn.name, report) + f" -> {out} ({', '.join(written)})")

    for pname, default in reversed(list(defn.params.items())):
        ptype = {int: int, float: float}.get(type(default), str)
        cmd = click.option(f"--{pname.replace('_', '-')}", pname, type=ptype,
                           default=default, show_default=True)(cmd)
    cmd = click.command(name=defn.name, help=defn.summary)(cmd)
    return cmd


for _defn in EXPERIMENTS.values():
    experiment.add_command(_make_experiment_command(_defn))


if __name__ == "__main__":
    main()
