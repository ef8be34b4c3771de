"""Command-line harness: scenario generation, experiments, verification."""

from __future__ import annotations

import json
import sys

import click

from .bench import (
    ALL_ENGINES,
    EXP1_COLUMNS,
    EXP3_COLUMNS,
    run_experiment1,
    run_experiment3,
    run_experiment4,
    write_csv,
)
from .ledger import Ledger
from .queries import EngineKind
from .registry import check_invariants
from .scenario import ScenarioParams, build_fixture, generate_scenario


@click.group()
def main() -> None:
    """Provenance and copyright ledger benchmark harness."""


@main.command()
@click.option("--n", type=int, default=10, show_default=True, help="Model owners.")
@click.option("--d", type=int, default=10, show_default=True, help="Datasets per owner.")
@click.option("--l", type=int, default=10, show_default=True, help="Licenses per owner.")
@click.option("--m", type=int, default=1, show_default=True, help="Models per chain.")
@click.option("--t", type=int, default=10, show_default=True, help="Training datasets per model.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def gen(n: int, d: int, l: int, m: int, t: int, seed: int, out: str) -> None:
    """Generate a scenario and write its ledger snapshot."""
    world = generate_scenario(ScenarioParams(n=n, d=d, l=l, m=m, t=t, seed=seed))
    with open(out, "w") as handle:
        handle.write(world.snapshot_json())
    click.echo(f"wrote snapshot with {world.ledger.next_seq} transactions to {out}")


def _engines(engine: str) -> list[EngineKind]:
    if engine == "all":
        return list(ALL_ENGINES)
    return [EngineKind(engine)]


@main.command()
@click.option("--sweep", type=click.Choice(["N", "D", "L", "M", "T"]), required=True)
@click.option(
    "--engine",
    type=click.Choice(["indexed", "flat", "fullgraph", "all"]),
    default="all",
    show_default=True,
)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--reps", type=int, default=10, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def exp1(sweep: str, engine: str, seed: int, reps: int, out: str) -> None:
    """Search-operation sweep across engines (CSV)."""
    rows = run_experiment1(sweep, engines=_engines(engine), seed=seed, reps=reps)
    write_csv(out, EXP1_COLUMNS, rows)
    click.echo(f"wrote {len(rows)} rows to {out}")


@main.command()
@click.option("--edges", type=str, default="10,100,1000", show_default=True,
              help="Comma-separated preloaded graph sizes.")
@click.option("--rates", type=str, default="50,200,400", show_default=True,
              help="Comma-separated request rates per second.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--window", type=float, default=1.0, show_default=True,
              help="Replay window per cell, seconds.")
@click.option("--workers", type=int, default=8, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def exp3(edges: str, rates: str, seed: int, window: float, workers: int, out: str) -> None:
    """Scalability heat grid over graph size and request rate (CSV)."""
    edges_list = [int(v) for v in edges.split(",") if v]
    rates_list = [float(v) for v in rates.split(",") if v]
    rows = run_experiment3(
        edges_list, rates_list, seed=seed, window_s=window, workers=workers
    )
    write_csv(out, EXP3_COLUMNS, rows)
    click.echo(f"wrote {len(rows)} rows to {out}")


@main.command()
@click.option("--rate", type=float, default=300.0, show_default=True,
              help="Total paced request rate per second.")
@click.option("--malicious-pct", type=float, default=20.0, show_default=True)
@click.option("--attacks", type=str, default="P,S", show_default=True,
              help="Attack kinds to inject: P (provenance spoof), S (signature).")
@click.option("--requests", type=int, default=2000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def exp4(rate: float, malicious_pct: float, attacks: str, requests: int, seed: int, out: str) -> None:
    """Adversarial robustness run (JSON report)."""
    kinds = {v.strip() for v in attacks.split(",") if v.strip()}
    report = run_experiment4(
        rate=rate,
        malicious_pct=malicious_pct,
        attacks=kinds,
        seed=seed,
        total_requests=requests,
    )
    with open(out, "w") as handle:
        json.dump(report, handle, indent=2, sort_keys=True)
        handle.write("\n")
    click.echo(
        f"accepted {report['accepted']}/{report['submitted']}, "
        f"invariants {'ok' if report['invariants_ok'] else 'VIOLATED'}; wrote {out}"
    )


@main.command()
@click.option("--snapshot", type=click.Path(exists=True, dir_okay=False))
@click.option("--fixture", type=click.Path(exists=True, dir_okay=False))
def verify(snapshot: str | None, fixture: str | None) -> None:
    """Run the global invariant oracles against a snapshot or fixture."""
    if (snapshot is None) == (fixture is None):
        raise click.UsageError("pass exactly one of --snapshot / --fixture")
    if snapshot is not None:
        with open(snapshot) as handle:
            ledger = Ledger.from_snapshot(json.load(handle))
    else:
        with open(fixture) as handle:
            ledger = build_fixture(json.load(handle)).ledger
    report = check_invariants(ledger)
    if report.ok:
        click.echo("all invariants hold")
        return
    for issue in report.issues:
        click.echo(f"violation: {issue}")
    sys.exit(1)


if __name__ == "__main__":
    main()
