"""Command-line interface.

Exit codes: 0 success, 1 domain verdict (invalid state, failed guard,
unknown label), 2 usage error, 3 I/O or parse error.
"""

from __future__ import annotations

import math
import sys
from importlib import resources
from pathlib import Path

import click
import numpy as np

from . import __version__
from .comb import coarsening_map, pixel_labels, simulate_cm
from .config import load_tolerances, override_tolerances
from .exceptions import CombSteerError, ParseError, PartitionError
from .gaussian import Bipartition, CovarianceMatrix, ModeMap, apply_mode_map, validate
from .io import read_cm, read_model, write_cm, write_report
from .monogamy import MonogamyRelation, audit_many, monogamy_sweep, parse_config
from .montecarlo import monte_carlo_uncertainty
from .steering import (
    classify_direction,
    count_bipartitions,
    loss_scan,
    steering,
    steering_spectrum,
)

EXIT_DOMAIN, EXIT_USAGE, EXIT_IO = 1, 2, 3
NATS_TO_DB = 10.0 / math.log(10.0)
FIXTURES = {"default": "default_model.json", "one-way": "one_way_model.json", "tmsv": "tmsv_model.json"}


class _Group(click.Group):
    """Map package exceptions onto the documented exit codes."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (ParseError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(EXIT_IO)
        except (CombSteerError, ValueError) as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(EXIT_DOMAIN)


def _fmt(x: float) -> str:
    return "nan" if x is None or math.isnan(x) else f"{x:.6f}"


def _split(text: str) -> list[str]:
    return [s.strip() for s in text.split(",") if s.strip()]


def _resolve(cm: CovarianceMatrix, names: list[str]) -> tuple[int, ...]:
    if not names:
        raise click.UsageError("empty mode list")
    return tuple(cm.index(n) for n in names)


def _load(path) -> CovarianceMatrix:
    return read_cm(path).cm


def _emit(out, kind, data, inputs):
    if out:
        write_report(out, kind, data, inputs)
    else:
        from .io import report_bytes

        sys.stdout.write(report_bytes(kind, data, inputs).decode())


_jobs = click.option(
    "--jobs", "-j", type=click.IntRange(min=1), default=1, envvar="COMBSTEER_JOBS",
    show_default=True, help="Worker processes (env: COMBSTEER_JOBS).",
)
_out = click.option("--out", "-o", type=click.Path(dir_okay=False), help="Write the report here.")


@click.group(cls=_Group)
@click.version_option(__version__, prog_name="combsteer")
@click.option(
    "--tolerances", type=click.Path(exists=True, dir_okay=False),
    help="JSON file overriding numerical tolerances.",
)
@click.pass_context
def main(ctx, tolerances):
    """Gaussian steering analysis of multimode squeezed combs."""
    if tolerances:
        try:
            overrides = load_tolerances(tolerances)
        except ValueError as exc:
            raise ParseError(str(exc), tolerances) from None
        ctx.with_resource(override_tolerances(**overrides))


@main.command("validate")
@click.argument("path", type=click.Path(dir_okay=False))
def cmd_validate(path):
    """Check that a covariance-matrix file describes a physical state."""
    cm_file = read_cm(path, check=False)
    verdict = validate(cm_file.cm)
    click.echo(f"valid: {str(verdict.valid).lower()}")
    click.echo(f"n_modes: {verdict.n_modes}")
    click.echo(f"asymmetry: {verdict.asymmetry:.3e}")
    click.echo(f"min_eigenvalue: {verdict.min_eigenvalue:.6g}")
    if verdict.min_symplectic_eigenvalue is not None:
        click.echo(f"min_symplectic_eigenvalue: {verdict.min_symplectic_eigenvalue:.6g}")
    for failure in verdict.failures:
        click.echo(failure.message)
    if not verdict.valid:
        sys.exit(EXIT_DOMAIN)


@main.command("steer")
@click.argument("path", type=click.Path(dir_okay=False))
@click.option("--from", "from_", required=True, help="Steering modes, comma-separated labels.")
@click.option("--to", required=True, help="Steered modes, comma-separated labels.")
@click.option("--both-directions", is_flag=True, help="Also evaluate the reverse direction.")
@click.option("--db", is_flag=True, help="Also print values in dB.")
@_out
def cmd_steer(path, from_, to, both_directions, db, out):
    """Steerability from one party to another, in nats."""
    cm = _load(path)
    part = Bipartition(_resolve(cm, _split(from_)), _resolve(cm, _split(to)))
    results = [steering(cm, part)]
    if both_directions:
        results.append(steering(cm, part.reversed()))
    labels = cm.mode_labels
    for r in results:
        line = f"G {r.partition.describe(labels)} = {_fmt(r.value)} nats"
        if db:
            line += f" ({_fmt(r.value * NATS_TO_DB)} dB)"
        click.echo(line)
        click.echo("  spectrum: " + " ".join(_fmt(v) for v in r.spectrum))
    data = {"results": [r.as_dict(labels) for r in results]}
    if both_directions:
        direction = classify_direction(results[0].value, results[1].value)
        click.echo(f"direction: {direction.value}")
        data["direction"] = direction.value
    if out:
        write_report(out, "steer", data, {"cm": path})


@main.command("spectrum")
@click.argument("path", type=click.Path(dir_okay=False))
@click.option("--mode", type=click.Choice(["full", "pairs"]), default="full", show_default=True)
@click.option("--max-modes", type=int, default=20, show_default=True,
              help="Refuse larger states (enumeration guard).")
@click.option("--whisker", type=float, default=1.5, show_default=True,
              help="Tukey whisker length in IQRs.")
@_jobs
@_out
def cmd_spectrum(path, mode, max_modes, whisker, jobs, out):
    """Steerability of every bipartition; report on stdout or --out."""
    cm = _load(path)
    if cm.n_modes > max_modes:
        click.echo(
            f"error: {cm.n_modes} modes give {count_bipartitions(cm.n_modes, mode)} "
            f"bipartitions; raise --max-modes to proceed", err=True,
        )
        sys.exit(EXIT_DOMAIN)
    report = steering_spectrum(cm, mode, n_jobs=jobs, whisker=whisker)
    click.echo(
        f"{len(report.results)} partitions, {report.n_steerable} steerable, "
        f"{report.n_failed} failed", err=True,
    )
    _emit(out, "spectrum", report.as_dict(), {"cm": path})


@main.command("loss-scan")
@click.argument("path", type=click.Path(dir_okay=False))
@click.option("--remove", default="", help="Modes to discard in order, comma-separated.")
@click.option("--results/--no-results", default=False, show_default=True,
              help="Include every per-partition result.")
@_jobs
@_out
def cmd_loss_scan(path, remove, results, jobs, out):
    """Steerable-bipartition counts as modes are discarded one by one."""
    cm = _load(path)
    report = loss_scan(cm, _split(remove), n_jobs=jobs)
    for step in report.steps:
        gone = ",".join(step.removed) or "-"
        click.echo(f"removed {gone}: {step.n_steerable}/{step.n_partitions} steerable", err=True)
    _emit(out, "loss-scan", report.as_dict(results), {"cm": path})


@main.command("monogamy")
@click.argument("path", type=click.Path(dir_okay=False))
@click.option("--relation", required=True,
              type=click.Choice([r.value for r in MonogamyRelation]))
@click.option("--groups", multiple=True,
              help="Configuration like 'C|D->A,B' (repeatable).")
@click.option("--sweep", is_flag=True, help="Enumerate every configuration of the relation.")
@click.option("--max-group-size", type=click.IntRange(min=1), default=2, show_default=True)
@click.option("--steered-size", type=click.IntRange(min=1), multiple=True,
              help="Restrict steered-group sizes in TypeI/TypeII sweeps.")
@_jobs
@_out
def cmd_monogamy(path, relation, groups, sweep, max_group_size, steered_size, jobs, out):
    """Audit a monogamy relation on given or enumerated mode groups."""
    if bool(groups) == sweep:
        raise click.UsageError("give either --groups or --sweep")
    cm = _load(path)
    if sweep:
        reports = monogamy_sweep(
            cm, relation, max_group_size, steered_size or None, n_jobs=jobs
        )
    else:
        configs = []
        for spec in groups:
            try:
                configs.append(parse_config(spec, cm))
            except PartitionError as exc:
                raise click.UsageError(str(exc)) from None
        reports = audit_many(cm, relation, configs, n_jobs=jobs)
    labels = cm.mode_labels
    violations = sum(not r.satisfied for r in reports)
    for r in reports:
        if sweep and r.satisfied:
            continue  # sweeps list violations only
        flag = "ok" if r.satisfied else "VIOLATED"
        click.echo(
            f"{r.configuration.describe(labels)}: lhs {_fmt(r.lhs)} rhs {_fmt(r.rhs)} "
            f"margin {_fmt(r.margin)} {flag}"
        )
    click.echo(f"{relation}: {violations} violations in {len(reports)} configurations")
    data = {
        "relation": relation,
        "n_configurations": len(reports),
        "n_violations": violations,
        "rows": [r.as_dict(labels) for r in reports],
    }
    if out:
        write_report(out, "monogamy", data, {"cm": path})


@main.command("simulate")
@click.argument("model_path", type=click.Path(dir_okay=False))
@click.option("--pixels", type=click.Choice(["4", "8", "16"]), default="16", show_default=True)
@click.option("--out", "-o", required=True, type=click.Path(dir_okay=False))
def cmd_simulate(model_path, pixels, out):
    """Write the band-resolved covariance matrix of a comb model."""
    model_file = read_model(model_path)
    model = model_file.model
    if not hasattr(model, "with_pixels"):
        raise click.UsageError("simulate needs a comb model")
    cm = simulate_cm(model.with_pixels(int(pixels)))
    note = model_file.provenance or "simulated"
    write_cm(out, cm, provenance=f"simulated at {pixels} pixels; {note}")
    click.echo(f"wrote {cm.n_modes}-mode covariance matrix to {out}")


@main.command("mc")
@click.argument("model_path", type=click.Path(dir_okay=False))
@click.option("--from", "from_", required=True)
@click.option("--to", required=True)
@click.option("--noise-db", type=float, required=True, help="Squeezing s.d. per eigenmode (dB).")
@click.option("--samples", type=click.IntRange(min=2), default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--pixels", type=click.Choice(["4", "8", "16"]), default=None)
@_out
def cmd_mc(model_path, from_, to, noise_db, samples, seed, pixels, out):
    """Monte Carlo mean and s.d. of a steerability under squeezing noise."""
    model = read_model(model_path).model
    if pixels is not None:
        if not hasattr(model, "with_pixels"):
            raise click.UsageError("--pixels needs a comb model")
        model = model.with_pixels(int(pixels))
    labels = model.labels if model.labels is not None else tuple(
        str(i) for i in range(model.overlaps().shape[1])
    )
    probe = CovarianceMatrix(np.eye(2 * len(labels)), labels)  # for label lookup only
    part = Bipartition(_resolve(probe, _split(from_)), _resolve(probe, _split(to)))
    est = monte_carlo_uncertainty(model, part, noise_db, samples, seed)
    click.echo(
        f"G {part.describe(labels)} = {_fmt(est.mean)} +/- {_fmt(est.std)} nats "
        f"({est.n_samples} samples, seed {est.seed}, {est.n_unphysical_rejected} rejected)"
    )
    if out:
        write_report(out, "mc", est.as_dict(), {"model": model_path})


@main.command("coarsen")
@click.argument("path", type=click.Path(dir_okay=False))
@click.option("--merge", "merge_spec", default=None,
              help="Output modes as ';'-separated groups of ','-separated labels.")
@click.option("--to-pixels", type=click.Choice(["4", "8"]), default=None,
              help="Merge a 16- or 8-pixel comb state down to this resolution.")
@click.option("--out", "-o", required=True, type=click.Path(dir_okay=False))
def cmd_coarsen(path, merge_spec, to_pixels, out):
    """Merge modes into equally weighted combinations."""
    if (merge_spec is None) == (to_pixels is None):
        raise click.UsageError("give either --merge or --to-pixels")
    cm_file = read_cm(path)
    cm = cm_file.cm
    if to_pixels is not None:
        if cm.n_modes not in (8, 16) or cm.mode_labels != pixel_labels(cm.n_modes):
            raise click.UsageError("--to-pixels needs a comb state labelled per pixel")
        mode_map = coarsening_map(cm.n_modes, int(to_pixels))
    else:
        groups = [_split(g) for g in merge_spec.split(";") if g.strip()]
        if not groups or not all(groups):
            raise click.UsageError(f"malformed merge spec {merge_spec!r}")
        idx = [_resolve(cm, g) for g in groups]
        mode_map = ModeMap.merge(idx, cm.n_modes, ["+".join(g) for g in groups])
    merged = apply_mode_map(cm, mode_map)
    note = f"coarsened from {Path(path).name}"
    if cm_file.provenance:
        note += f"; {cm_file.provenance}"
    write_cm(out, merged, provenance=note)
    click.echo(f"wrote {merged.n_modes}-mode covariance matrix to {out}")


@main.command("fixture")
@click.argument("name", type=click.Choice(list(FIXTURES)))
@click.option("--out", "-o", required=True, type=click.Path(dir_okay=False))
def cmd_fixture(name, out):
    """Copy a shipped model fixture to a file."""
    data = resources.files("combsteer").joinpath("data", FIXTURES[name]).read_bytes()
    Path(out).write_bytes(data)
    click.echo(f"wrote {name} to {out}")


if __name__ == "__main__":  # pragma: no cover
    main()
