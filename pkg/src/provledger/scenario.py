"""Parameterized scenario generation and fixture loading.

A scenario is described by five knobs: N model owners, each scraping D
datasets, holding L licenses (datasets are randomly assigned to one of
their owner's licenses), and training a chain of M models on T
datasets drawn from the owner's pool.  Generation is deterministic
from the seed: per-owner RNGs are split off the master seed so the
same parameters always yield byte-identical ledger snapshots.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Any

from .errors import InvalidParams
from .integrity import compute_cid
from .ledger import Ledger, Role
from .lifecycle import ClmConnector, LifecycleService
from .queries import EngineKind, make_engine
from .registry import RegistryService
from .validity import CheckerRegistry, EnvVars, env_at

REF_TIME_ISO = "2026-01-01T00:00:00Z"
YEAR = 365 * 24 * 3600


@dataclass(frozen=True)
class ScenarioParams:
    n: int  # model owners
    d: int  # scraped datasets per owner
    l: int  # licenses per owner
    m: int  # models per retraining chain
    t: int  # training datasets per model
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("n", "d", "l", "m", "t"):
            if getattr(self, name) < 1:
                raise InvalidParams(f"{name} must be positive")
        if self.t > self.d:
            raise InvalidParams("t cannot exceed d")


@dataclass
class OwnerManifest:
    datasets: list[str] = field(default_factory=list)
    licenses: list[str] = field(default_factory=list)
    models: list[str] = field(default_factory=list)


@dataclass
class World:
    """A populated ledger plus the services and handles around it."""

    ledger: Ledger
    checkers: CheckerRegistry
    registry: RegistryService
    lifecycle: LifecycleService
    env: EnvVars
    owners: dict[str, OwnerManifest] = field(default_factory=dict)
    params: ScenarioParams | None = None

    def engine(self, kind: EngineKind | str):
        return make_engine(kind, self.ledger, self.checkers)

    def snapshot_json(self) -> str:
        return self.ledger.snapshot_json(self.lifecycle.blacklists_dict())


def new_world(
    seed: int | None = None,
    commit_delay: float = 0.0,
    current_time: str | int = REF_TIME_ISO,
    connector: ClmConnector | None = None,
) -> World:
    ledger = Ledger(seed=seed, commit_delay=commit_delay)
    checkers = CheckerRegistry()
    registry = RegistryService(ledger, checkers)
    lifecycle = LifecycleService(ledger, registry, checkers, connector)
    return World(
        ledger=ledger,
        checkers=checkers,
        registry=registry,
        lifecycle=lifecycle,
        env=env_at(current_time),
    )


def split_seed(seed: int, *parts: Any) -> int:
    """Derive an independent 64-bit stream seed; splitting keeps
    per-owner generation order-independent and reproducible."""
    label = ":".join([str(seed), *map(str, parts)]).encode()
    return int.from_bytes(hashlib.sha256(label).digest()[:8], "big")


def generate_scenario(params: ScenarioParams, commit_delay: float = 0.0) -> World:
    world = new_world(seed=params.seed, commit_delay=commit_delay)
    world.params = params
    valid_from = world.env.current_time - YEAR

    for a in range(1, params.n + 1):
        ao = f"ao-{a}"
        rng = random.Random(split_seed(params.seed, "owner", a))
        manifest = OwnerManifest()
        world.owners[ao] = manifest
        world.ledger.create_party(ao, Role.AO)

        slots: list[tuple[str, str, str]] = []  # (license_id, scope, co)
        for j in range(1, params.l + 1):
            co = f"co-{a}-{j}"
            world.ledger.create_party(co, Role.CO)
            license_id = f"lic-{a}-{j}"
            scope = f"https://{co}.example/archive/"
            agreement_cid = world.lifecycle.draft_agreement(
                co,
                {
                    "id": license_id,
                    "scope": scope,
                    "copyrightOwnerId": co,
                    "modelOwnerId": ao,
                    "validFrom": valid_from,
                    "typeId": "time-bound",
                    "datasetList": [],
                    "extensions": {},
                },
            )
            world.lifecycle.accept_agreement(ao, agreement_cid)
            manifest.licenses.append(license_id)
            slots.append((license_id, scope, co))

        for i in range(1, params.d + 1):
            license_id, scope, co = slots[rng.randrange(params.l)]
            dataset_id = f"ds-{a}-{i}"
            content = f"dataset:{ao}:{i}:{params.seed}".encode()
            world.registry.register_dataset(
                ao,
                dataset_id,
                source_url=f"{scope}item-{i}",
                copyright_owner_id=co,
                content_hash=compute_cid(content).digest,
            )
            world.registry.bind_license(ao, dataset_id, license_id, world.env)
            manifest.datasets.append(dataset_id)

        previous: str | None = None
        for k in range(1, params.m + 1):
            model_id = f"m-{a}-{k}"
            training = rng.sample(manifest.datasets, params.t)
            content = f"model:{ao}:{k}:{params.seed}".encode()
            world.registry.register_model(
                ao,
                model_id,
                training,
                world.env,
                source_model_id=previous,
                hyperparams={"epochs": str(10 + k)},
                content_hash=compute_cid(content).digest,
            )
            manifest.models.append(model_id)
            previous = model_id

    return world


# ---------------------------------------------------------------------------
# fixture files
# ---------------------------------------------------------------------------


def build_fixture(doc: dict[str, Any], seed: int = 0) -> World:
    """Build a world from a JSON scenario fixture.

    Shape: ``{parties, datasets, licenses, models, links}`` with plain
    string identifiers.  Licenses go through the propose-accept flow;
    ``links`` bind datasets to licenses.  ``bindTime`` (default
    ``currentTime``) is the instant at which links and models are
    created, so fixtures can describe licenses that have expired by
    ``currentTime``.
    """
    current = doc.get("currentTime", REF_TIME_ISO)
    world = new_world(seed=seed, current_time=current)
    bind_env = env_at(doc.get("bindTime", current))

    for party in doc.get("parties", ()):
        world.ledger.create_party(party["id"], Role(party["role"]))
        if party["id"] not in world.owners:
            world.owners[party["id"]] = OwnerManifest()

    for entry in doc.get("datasets", ()):
        ao = entry["modelOwnerId"]
        content = entry.get("content", entry["datasetId"]).encode()
        world.registry.register_dataset(
            ao,
            entry["datasetId"],
            source_url=entry["sourceUrl"],
            copyright_owner_id=entry["copyrightOwnerId"],
            content_hash=compute_cid(content).digest,
        )
        world.owners.setdefault(ao, OwnerManifest()).datasets.append(entry["datasetId"])

    for entry in doc.get("licenses", ()):
        co = entry["copyrightOwnerId"]
        ao = entry["modelOwnerId"]
        cid = world.lifecycle.draft_agreement(
            co,
            {
                "id": entry["licenseId"],
                "scope": entry["scope"],
                "copyrightOwnerId": co,
                "modelOwnerId": ao,
                "validFrom": entry["validFrom"],
                "typeId": entry.get("typeId", "time-bound"),
                "datasetList": [],
                "extensions": entry.get("extensions", {}),
            },
        )
        world.lifecycle.accept_agreement(ao, cid)
        world.owners.setdefault(ao, OwnerManifest()).licenses.append(entry["licenseId"])

    for link in doc.get("links", ()):
        ao = link.get("modelOwnerId") or _dataset_owner(world, link["datasetId"])
        world.registry.bind_license(ao, link["datasetId"], link["licenseId"], bind_env)

    for entry in doc.get("models", ()):
        ao = entry["modelOwnerId"]
        content = entry.get("content", entry["modelId"]).encode()
        world.registry.register_model(
            ao,
            entry["modelId"],
            list(entry["datasetList"]),
            bind_env,
            source_model_id=entry.get("sourceModelId"),
            hyperparams=entry.get("hyperparams", {}),
            content_hash=compute_cid(content).digest,
        )
        world.owners.setdefault(ao, OwnerManifest()).models.append(entry["modelId"])

    return world


def _dataset_owner(world: World, dataset_id: str) -> str:
    for ao in world.owners:
        contract = world.registry.dataset_contract(ao, dataset_id)
        if contract is not None:
            return ao
    raise InvalidParams(f"fixture link references unknown dataset {dataset_id}")
