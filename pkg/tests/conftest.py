from __future__ import annotations

import copy
import random

import pytest

from provledger import ScenarioParams, build_fixture

# reference instants used across fixtures
T0 = "2026-01-01T00:00:00Z"
T0_PLUS_30D = "2026-01-31T00:00:00Z"
T0_PLUS_60D = "2026-03-02T00:00:00Z"
A_YEAR_BEFORE = "2025-01-01T00:00:00Z"

AO = "ao-1"

# the running example: one model trained on three datasets, retrained
# with a fourth into a second model; three licenses cover the four
# datasets (lic-1 expires 30 days after T0)
LINEAGE_DOC: dict = {
    "currentTime": T0,
    "bindTime": T0,
    "parties": [
        {"id": "co-1", "role": "CO"},
        {"id": "co-2", "role": "CO"},
        {"id": "co-3", "role": "CO"},
        {"id": AO, "role": "AO"},
    ],
    "datasets": [
        {
            "datasetId": f"ds-{i}",
            "sourceUrl": f"https://co-{c}.example/art/{i}",
            "copyrightOwnerId": f"co-{c}",
            "modelOwnerId": AO,
        }
        for i, c in ((1, 1), (2, 1), (3, 2), (4, 3))
    ],
    "licenses": [
        {
            "licenseId": "lic-1",
            "scope": "https://co-1.example/art/",
            "copyrightOwnerId": "co-1",
            "modelOwnerId": AO,
            "validFrom": A_YEAR_BEFORE,
            "typeId": "time-bound",
            "extensions": {"validUntil": T0_PLUS_30D},
        },
        {
            "licenseId": "lic-2",
            "scope": "https://co-2.example/art/",
            "copyrightOwnerId": "co-2",
            "modelOwnerId": AO,
            "validFrom": A_YEAR_BEFORE,
            "typeId": "time-bound",
        },
        {
            "licenseId": "lic-3",
            "scope": "https://co-3.example/art/",
            "copyrightOwnerId": "co-3",
            "modelOwnerId": AO,
            "validFrom": A_YEAR_BEFORE,
            "typeId": "time-bound",
        },
    ],
    "links": [
        {"datasetId": "ds-1", "licenseId": "lic-1"},
        {"datasetId": "ds-2", "licenseId": "lic-1"},
        {"datasetId": "ds-3", "licenseId": "lic-2"},
        {"datasetId": "ds-4", "licenseId": "lic-3"},
    ],
    "models": [
        {"modelId": "m-1", "modelOwnerId": AO, "datasetList": ["ds-1", "ds-2", "ds-3"]},
        {
            "modelId": "m-2",
            "modelOwnerId": AO,
            "datasetList": ["ds-4"],
            "sourceModelId": "m-1",
        },
    ],
}


def lineage_doc(current_time: str = T0) -> dict:
    doc = copy.deepcopy(LINEAGE_DOC)
    doc["currentTime"] = current_time
    return doc


@pytest.fixture
def lineage_world():
    """Running-example world at T0: every license currently valid."""
    return build_fixture(lineage_doc())


@pytest.fixture
def lineage_world_expired():
    """Same world viewed 60 days later: lic-1 has expired."""
    return build_fixture(lineage_doc(T0_PLUS_60D))


def random_params(rng: random.Random, seed: int) -> ScenarioParams:
    d = rng.randint(1, 10)
    return ScenarioParams(
        n=rng.randint(1, 10),
        d=d,
        l=rng.randint(1, 10),
        m=rng.randint(1, 10),
        t=rng.randint(1, d),
        seed=seed,
    )
