"""Experiment runners: search-operation sweeps, scalability replay, and
adversarial robustness.

Operation counts (records touched, edges traversed, index lookups) are
the primary signal; wall time is recorded for trend inspection but
never asserted as an absolute.  All target sampling is seeded, so two
runs with the same seed emit identical CSVs apart from wall-time
columns.
"""

from __future__ import annotations

import csv
import dataclasses
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Iterable

from .errors import AuthorizationError, InvalidParams, ProvenanceSpoof, ReplayError
from .integrity import compute_cid
from .ledger import CreateAction, Ledger, Role, Transaction
from .queries import EngineKind
from .records import DatasetMeta
from .registry import check_invariants
from .scenario import ScenarioParams, World, generate_scenario, split_seed

EXP1_COLUMNS = [
    "param", "value", "engine", "op", "rep",
    "wall_ns", "records", "edges", "index_lookups",
]

EXP3_COLUMNS = [
    "edges", "rate", "requests", "p95_wall_ns",
    "records_mean", "edges_traversed_mean", "index_lookups_mean",
]

# fixed-value rows of the evaluation grid: each sweep varies one knob and
# holds the rest at their defaults (the T sweep runs against a larger pool)
SWEEP_GRID: dict[str, dict[str, Any]] = {
    "N": {"values": list(range(10, 101, 10)), "fixed": dict(d=10, l=10, m=1, t=10)},
    "D": {"values": list(range(10, 101, 10)), "fixed": dict(n=10, l=10, m=1, t=10)},
    "L": {"values": list(range(10, 101, 10)), "fixed": dict(n=10, d=10, m=1, t=10)},
    "M": {"values": list(range(1, 11)), "fixed": dict(n=10, d=10, l=10, t=10)},
    "T": {"values": list(range(10, 101, 10)), "fixed": dict(n=10, d=100, l=10, m=1)},
}

ALL_ENGINES = (EngineKind.INDEXED, EngineKind.FLAT, EngineKind.FULL_GRAPH)


def params_for(sweep: str, value: int, seed: int) -> ScenarioParams:
    spec = SWEEP_GRID[sweep]
    fields = dict(spec["fixed"])
    fields[sweep.lower()] = value
    return ScenarioParams(seed=split_seed(seed, "cell", sweep, value), **fields)


def percentile_nearest_rank(samples: list[int], pct: float) -> int:
    if not samples:
        raise InvalidParams("empty sample")
    ordered = sorted(samples)
    rank = max(1, -(-len(ordered) * pct // 100))  # ceil
    return ordered[int(rank) - 1]


def write_csv(path: str, columns: list[str], rows: Iterable[dict[str, Any]]) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


# ---------------------------------------------------------------------------
# experiment 1: searching operations across engines
# ---------------------------------------------------------------------------


def run_experiment1(
    sweep: str,
    engines: Iterable[EngineKind] = ALL_ENGINES,
    seed: int = 0,
    reps: int = 10,
    values: list[int] | None = None,
) -> list[dict[str, Any]]:
    """For each sweep cell and engine, run the three graph-traversal
    operations ``reps`` times, each on an independently sampled random
    target, and record wall time plus operation counts."""
    if sweep not in SWEEP_GRID:
        raise InvalidParams(f"unknown sweep {sweep!r}")
    rows: list[dict[str, Any]] = []
    cell_values = values if values is not None else SWEEP_GRID[sweep]["values"]
    for value in cell_values:
        world = generate_scenario(params_for(sweep, value, seed))
        targets = random.Random(split_seed(seed, "targets", sweep, value))
        model_targets = [_random_model(world, targets) for _ in range(reps)]
        dataset_targets = [_random_model(world, targets) for _ in range(reps)]
        license_targets = [_random_license(world, targets) for _ in range(reps)]
        for kind in engines:
            engine = world.engine(kind)
            plan: list[tuple[str, Callable[[str, str], Any], tuple[str, str]]] = []
            for rep in range(reps):
                plan.append(("get_model_licenses", engine.get_model_licenses, model_targets[rep]))
                plan.append(("get_model_datasets", engine.get_model_datasets, dataset_targets[rep]))
                plan.append(("get_models_by_license", engine.get_models_by_license, license_targets[rep]))
            rep_counter: dict[str, int] = {}
            for op_name, op, (ao, target) in plan:
                rep = rep_counter.get(op_name, 0)
                rep_counter[op_name] = rep + 1
                started = time.perf_counter_ns()
                op(ao, target)
                wall = time.perf_counter_ns() - started
                rows.append(
                    {
                        "param": sweep,
                        "value": value,
                        "engine": kind.value,
                        "op": op_name,
                        "rep": rep,
                        "wall_ns": wall,
                        "records": engine.stats.records_touched,
                        "edges": engine.stats.edges_traversed,
                        "index_lookups": engine.stats.index_lookups,
                    }
                )
    return rows


def _random_model(world: World, rng: random.Random) -> tuple[str, str]:
    ao = rng.choice(sorted(world.owners))
    return ao, rng.choice(world.owners[ao].models)


def _random_license(world: World, rng: random.Random) -> tuple[str, str]:
    ao = rng.choice(sorted(world.owners))
    return ao, rng.choice(world.owners[ao].licenses)


def _random_tail_model(world: World, rng: random.Random) -> tuple[str, str]:
    ao = rng.choice(sorted(world.owners))
    return ao, world.owners[ao].models[-1]


# ---------------------------------------------------------------------------
# experiment 3: scalability under graph size and request rate
# ---------------------------------------------------------------------------

# one chain contributes (m-1) + m*t model edges plus d dataset->license
# edges; t == d keeps the per-query record count independent of the
# random dataset draws
_EXP3_SHAPE = dict(d=2, l=2, m=2, t=2)


def edges_per_chain(shape: dict[str, int] | None = None) -> int:
    s = shape or _EXP3_SHAPE
    return (s["m"] - 1) + s["m"] * s["t"] + s["d"]


def world_with_edges(edge_count: int, seed: int, commit_delay: float = 0.0) -> World:
    chains = max(1, round(edge_count / edges_per_chain()))
    params = ScenarioParams(n=chains, seed=split_seed(seed, "exp3", edge_count), **_EXP3_SHAPE)
    return generate_scenario(params, commit_delay=commit_delay)


def run_experiment3(
    edges_list: list[int],
    rates_list: list[float],
    seed: int = 0,
    window_s: float = 1.0,
    workers: int = 8,
    engine_kind: EngineKind = EngineKind.INDEXED,
    commit_delay: float = 0.0,
) -> list[dict[str, Any]]:
    """For each (graph size, request rate) cell, preload a lineage graph
    and replay paced write-read cycles; reports P95 end-to-end latency
    and mean per-request operation counts."""
    if not edges_list or not rates_list:
        raise InvalidParams("edges and rates must be nonempty")
    rows = []
    for edge_count in edges_list:
        world = world_with_edges(edge_count, seed, commit_delay=commit_delay)
        for rate in rates_list:
            rows.append(_replay_cell(world, edge_count, rate, seed, window_s, workers, engine_kind))
    return rows


def _replay_cell(
    world: World,
    edge_count: int,
    rate: float,
    seed: int,
    window_s: float,
    workers: int,
    engine_kind: EngineKind,
) -> dict[str, Any]:
    total = max(1, int(rate * window_s))
    rng = random.Random(split_seed(seed, "exp3-cell", edge_count, rate))
    # chain tails keep the queried shape fixed at (M, T) so per-request
    # counts are comparable across graph sizes
    turns = [_random_tail_model(world, rng) for _ in range(total)]
    latencies: list[int] = []
    stats: list[tuple[int, int, int]] = []

    def cycle(index: int) -> tuple[int, tuple[int, int, int]]:
        ao, model_id = turns[index]
        engine = world.engine(engine_kind)
        started = time.perf_counter_ns()
        content = f"exp3:{edge_count}:{rate}:{index}".encode()
        world.registry.register_dataset(
            ao,
            f"exp3-ds-{edge_count}-{rate}-{index}",
            source_url=f"https://exp3.example/{index}",
            copyright_owner_id="public-domain",
            content_hash=compute_cid(content).digest,
        )
        engine.get_model_licenses(ao, model_id)
        elapsed = time.perf_counter_ns() - started
        return elapsed, engine.stats.as_tuple()

    start = time.perf_counter()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = []
        for index in range(total):
            target_time = start + index / rate
            delay = target_time - time.perf_counter()
            if delay > 0:
                time.sleep(delay)
            futures.append(pool.submit(cycle, index))
        for future in futures:
            elapsed, stat = future.result()
            latencies.append(elapsed)
            stats.append(stat)

    count = len(stats)
    return {
        "edges": edge_count,
        "rate": rate,
        "requests": count,
        "p95_wall_ns": percentile_nearest_rank(latencies, 95),
        "records_mean": sum(s[0] for s in stats) / count,
        "edges_traversed_mean": sum(s[1] for s in stats) / count,
        "index_lookups_mean": sum(s[2] for s in stats) / count,
    }


# ---------------------------------------------------------------------------
# experiment 4: robustness under adversarial traffic
# ---------------------------------------------------------------------------

ATTACK_PROVENANCE = "P"
ATTACK_SIGNATURE = "S"

_REJECTION_KINDS = {
    ProvenanceSpoof: "provenanceSpoof",
    AuthorizationError: "signatureTamper",
    ReplayError: "signatureReplay",
}


@dataclass
class _Request:
    kind: str  # honest | P | S-tamper | S-replay
    tx: Transaction


def run_experiment4(
    rate: float,
    malicious_pct: float,
    attacks: set[str] | None = None,
    seed: int = 0,
    total_requests: int = 2000,
    edges: int = 100,
    workers: int = 8,
) -> dict[str, Any]:
    """Replay a paced mix of honest registrations and attack traffic;
    report throughput of accepted transactions, tail latency, and
    per-kind rejection rates.  Every rejected request leaves the ledger
    untouched, which the post-run invariant sweep confirms."""
    if not 0 <= malicious_pct <= 100:
        raise InvalidParams("malicious percentage must be within [0, 100]")
    attacks = attacks or {ATTACK_PROVENANCE, ATTACK_SIGNATURE}
    unknown = attacks - {ATTACK_PROVENANCE, ATTACK_SIGNATURE}
    if unknown:
        raise InvalidParams(f"unknown attack kinds {sorted(unknown)}")

    world = world_with_edges(edges, seed)
    requests = _plan_requests(world, malicious_pct, attacks, seed, total_requests)

    latencies: list[int] = []
    outcomes: list[tuple[str, str | None]] = []  # (request kind, rejection kind)

    def execute(request: _Request) -> tuple[int, str | None]:
        started = time.perf_counter_ns()
        rejection: str | None = None
        try:
            world.ledger.submit(request.tx)
        except (ProvenanceSpoof, AuthorizationError, ReplayError) as exc:
            rejection = _REJECTION_KINDS[type(exc)]
        return time.perf_counter_ns() - started, rejection

    start = time.perf_counter()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = []
        for index, request in enumerate(requests):
            target_time = start + index / rate
            delay = target_time - time.perf_counter()
            if delay > 0:
                time.sleep(delay)
            futures.append(pool.submit(execute, request))
        for request, future in zip(requests, futures):
            elapsed, rejection = future.result()
            latencies.append(elapsed)
            outcomes.append((request.kind, rejection))
    elapsed_s = time.perf_counter() - start

    injected: dict[str, int] = {}
    rejected_by_kind: dict[str, int] = {}
    accepted = honest_accepted = rejected = 0
    for kind, rejection in outcomes:
        if kind != "honest":
            injected[kind] = injected.get(kind, 0) + 1
        if rejection is None:
            accepted += 1
            if kind == "honest":
                honest_accepted += 1
        else:
            rejected += 1
            rejected_by_kind[rejection] = rejected_by_kind.get(rejection, 0) + 1

    report = check_invariants(world.ledger)
    rejection_rates = {}
    for attack_kind, verdict in (
        ("P", "provenanceSpoof"),
        ("S-tamper", "signatureTamper"),
        ("S-replay", "signatureReplay"),
    ):
        count = injected.get(attack_kind, 0)
        if count:
            rejection_rates[verdict] = rejected_by_kind.get(verdict, 0) / count

    return {
        "rate": rate,
        "malicious_pct": malicious_pct,
        "attacks": sorted(attacks),
        "submitted": len(requests),
        "accepted": accepted,
        "honest_accepted": honest_accepted,
        "rejected": rejected,
        "injected_by_kind": injected,
        "rejected_by_kind": rejected_by_kind,
        "rejection_rates": rejection_rates,
        "elapsed_s": elapsed_s,
        "throughput_tx_per_s": accepted / elapsed_s,
        "honest_throughput_tx_per_s": honest_accepted / elapsed_s,
        "p95_latency_ns": percentile_nearest_rank(latencies, 95),
        "invariants_ok": report.ok,
        "invariant_issues": report.issues,
    }


def _plan_requests(
    world: World,
    malicious_pct: float,
    attacks: set[str],
    seed: int,
    total_requests: int,
) -> list[_Request]:
    ledger = world.ledger
    rng = random.Random(split_seed(seed, "exp4-plan"))
    attacker = "mallory"
    ledger.create_party(attacker, Role.AO)
    owners = sorted(world.owners)

    # committed setup transactions to replay, and victim content to spoof
    replay_pool: list[Transaction] = []
    victim_contents: list[bytes] = []
    for index in range(16):
        ao = owners[index % len(owners)]
        content = f"seedling:{index}".encode()
        victim_contents.append(content)
        payload = _dataset_payload(ao, f"seed-ds-{index}", index, content)
        tx = ledger.build_signed_tx(ao, [CreateAction(payload)])
        ledger.submit(tx)
        replay_pool.append(tx)

    malicious_total = round(total_requests * malicious_pct / 100)
    kinds = ["honest"] * (total_requests - malicious_total)
    attack_cycle = []
    if ATTACK_PROVENANCE in attacks:
        attack_cycle.append("P")
    if ATTACK_SIGNATURE in attacks:
        attack_cycle.extend(["S-tamper", "S-replay"])
    kinds += [attack_cycle[i % len(attack_cycle)] for i in range(malicious_total)]
    rng.shuffle(kinds)

    requests: list[_Request] = []
    for index, kind in enumerate(kinds):
        if kind == "honest":
            ao = owners[index % len(owners)]
            content = f"exp4:honest:{index}".encode()
            payload = _dataset_payload(ao, f"exp4-ds-{index}", index, content)
            tx = ledger.build_signed_tx(ao, [CreateAction(payload)])
        elif kind == "P":
            content = rng.choice(victim_contents)
            payload = _dataset_payload(attacker, f"spoof-ds-{index}", index, content)
            tx = ledger.build_signed_tx(attacker, [CreateAction(payload)])
        elif kind == "S-tamper":
            content = f"exp4:tamper:{index}".encode()
            payload = _dataset_payload(attacker, f"tamper-ds-{index}", index, content)
            tx = ledger.build_signed_tx(attacker, [CreateAction(payload)])
            tx = _tampered(tx)
        else:  # S-replay
            tx = rng.choice(replay_pool)
        requests.append(_Request(kind=kind, tx=tx))
    return requests


def _dataset_payload(ao: str, dataset_id: str, index: int, content: bytes) -> DatasetMeta:
    return DatasetMeta(
        dataset_id=dataset_id,
        source_url=f"https://exp4.example/{index}",
        copyright_owner_id="public-domain",
        model_owner_id=ao,
        content_hash=compute_cid(content).digest,
    )


def _tampered(tx: Transaction) -> Transaction:
    sig = tx.signatures[0]
    flipped = bytes([sig.signature[0] ^ 0x01]) + sig.signature[1:]
    bad = dataclasses.replace(sig, signature=flipped)
    return dataclasses.replace(tx, signatures=(bad,) + tx.signatures[1:])
