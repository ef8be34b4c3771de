from __future__ import annotations

import random

import pytest

from provledger import PUBLIC_DOMAIN, Role, check_invariants, compute_cid, new_world
from provledger.errors import (
    DuplicateDataset,
    DuplicateModel,
    InvalidLicense,
    NotVisible,
    ScopeMismatch,
    UnknownParty,
    UnknownSource,
    UnlicensedDataset,
)
from provledger.validity import format_instant

import oracles
from conftest import AO, T0_PLUS_60D, lineage_doc
from provledger import build_fixture


@pytest.fixture
def world():
    w = new_world(seed=17)
    w.ledger.create_party("co-1", Role.CO)
    w.ledger.create_party("ao-1", Role.AO)
    w.ledger.create_party("ao-2", Role.AO)
    return w


def grant_license(world, co, ao, license_id, scope, valid_until=None, extensions=None):
    ext = dict(extensions or {})
    if valid_until is not None:
        ext["validUntil"] = format_instant(valid_until)
    cid = world.lifecycle.draft_agreement(
        co,
        {
            "id": license_id,
            "scope": scope,
            "copyrightOwnerId": co,
            "modelOwnerId": ao,
            "validFrom": 0,
            "typeId": "time-bound",
            "extensions": ext,
        },
    )
    return world.lifecycle.accept_agreement(ao, cid)


class TestRegisterDataset:
    def test_fresh_registration(self, world):
        world.registry.register_dataset(
            "ao-1", "ds-1", "https://x.org/a", "co-1", compute_cid(b"a").digest
        )
        contract = world.registry.dataset_contract("ao-1", "ds-1")
        assert contract.payload.license_id is None
        assert contract.payload.model_list == ()

    def test_same_id_twice_rejected(self, world):
        world.registry.register_dataset(
            "ao-1", "ds-1", "https://x.org/a", "co-1", compute_cid(b"a").digest
        )
        with pytest.raises(DuplicateDataset):
            world.registry.register_dataset(
                "ao-1", "ds-1", "https://x.org/b", "co-1", compute_cid(b"b").digest
            )

    def test_public_domain_owner_accepted(self, world):
        world.registry.register_dataset(
            "ao-1", "ds-pd", "https://x.org/pd", PUBLIC_DOMAIN, compute_cid(b"pd").digest
        )
        contract = world.registry.dataset_contract("ao-1", "ds-pd")
        assert contract.payload.copyright_owner_id == PUBLIC_DOMAIN

    def test_unknown_owner_rejected(self, world):
        with pytest.raises(UnknownParty):
            world.registry.register_dataset(
                "ao-1", "ds-1", "https://x.org/a", "nobody", compute_cid(b"a").digest
            )

    def test_two_owners_may_use_same_dataset_id(self, world):
        world.registry.register_dataset(
            "ao-1", "ds-1", "https://x.org/a", "co-1", compute_cid(b"a1").digest
        )
        world.registry.register_dataset(
            "ao-2", "ds-1", "https://x.org/a", "co-1", compute_cid(b"a2").digest
        )


class TestBindLicense:
    def test_exact_scope_cover_links_both_records(self, world):
        world.registry.register_dataset(
            "ao-1", "ds-1", "https://x.org/a", "co-1", compute_cid(b"a").digest
        )
        grant_license(world, "co-1", "ao-1", "lic-1", "https://x.org/")
        world.registry.bind_license("ao-1", "ds-1", "lic-1", world.env)
        dataset = world.registry.dataset_contract("ao-1", "ds-1").payload
        license = world.registry.license_contract("ao-1", "lic-1").payload
        assert dataset.license_id == "lic-1"
        assert "ds-1" in license.dataset_list

    def test_disjoint_prefix_rejected(self, world):
        world.registry.register_dataset(
            "ao-1", "ds-1", "https://y.org/a", "co-1", compute_cid(b"a").digest
        )
        grant_license(world, "co-1", "ao-1", "lic-1", "https://x.org/")
        with pytest.raises(ScopeMismatch):
            world.registry.bind_license("ao-1", "ds-1", "lic-1", world.env)

    def test_link_symmetry_oracle_after_bind(self, world):
        world.registry.register_dataset(
            "ao-1", "ds-1", "https://x.org/a", "co-1", compute_cid(b"a").digest
        )
        grant_license(world, "co-1", "ao-1", "lic-1", "https://x.org/")
        world.registry.bind_license("ao-1", "ds-1", "lic-1", world.env)
        doc = world.ledger.snapshot()
        # re-derive the edge from each side independently
        assert oracles.datasets_by_license(doc, "ao-1", "lic-1") == {"ds-1"}
        license = next(
            l for l in oracles.licenses_of(doc, "ao-1") if l["licenseId"] == "lic-1"
        )
        assert license["datasetList"] == ["ds-1"]
        assert check_invariants(world.ledger).ok

    def test_expired_license_rejected(self, world):
        world.registry.register_dataset(
            "ao-1", "ds-1", "https://x.org/a", "co-1", compute_cid(b"a").digest
        )
        grant_license(
            world, "co-1", "ao-1", "lic-old", "https://x.org/",
            valid_until=world.env.current_time - 1,
        )
        with pytest.raises(InvalidLicense):
            world.registry.bind_license("ao-1", "ds-1", "lic-old", world.env)

    def test_foreign_records_invisible(self, world):
        world.registry.register_dataset(
            "ao-1", "ds-1", "https://x.org/a", "co-1", compute_cid(b"a").digest
        )
        grant_license(world, "co-1", "ao-1", "lic-1", "https://x.org/")
        with pytest.raises(NotVisible):
            world.registry.bind_license("ao-2", "ds-1", "lic-1", world.env)

    def test_wrong_copyright_owner_rejected(self, world):
        world.ledger.create_party("co-2", Role.CO)
        world.registry.register_dataset(
            "ao-1", "ds-1", "https://x.org/a", "co-2", compute_cid(b"a").digest
        )
        grant_license(world, "co-1", "ao-1", "lic-1", "https://x.org/")
        with pytest.raises(ScopeMismatch):
            world.registry.bind_license("ao-1", "ds-1", "lic-1", world.env)

    def test_rebind_replaces_never_appends(self, world):
        world.registry.register_dataset(
            "ao-1", "ds-1", "https://x.org/a/b", "co-1", compute_cid(b"a").digest
        )
        grant_license(world, "co-1", "ao-1", "lic-wide", "https://x.org/a/")
        world.registry.bind_license("ao-1", "ds-1", "lic-wide", world.env)
        # the wide license lapses; a renewal-created narrow one takes over
        world.lifecycle.renew_license(
            "co-1", "ao-1", "lic-wide", {"licenseId": "lic-narrow"}
        )
        dataset = world.registry.dataset_contract("ao-1", "ds-1").payload
        assert dataset.license_id == "lic-narrow"
        assert check_invariants(world.ledger).ok


class TestRegisterModel:
    def _licensed_datasets(self, world, count):
        grant_license(world, "co-1", "ao-1", "lic-1", "https://x.org/")
        ids = []
        for index in range(count):
            dataset_id = f"ds-{index + 1}"
            world.registry.register_dataset(
                "ao-1", dataset_id, f"https://x.org/{index}", "co-1",
                compute_cid(f"c{index}".encode()).digest,
            )
            world.registry.bind_license("ao-1", dataset_id, "lic-1", world.env)
            ids.append(dataset_id)
        return ids

    def test_initial_training_threads_model_into_datasets(self, world):
        ids = self._licensed_datasets(world, 3)
        world.registry.register_model(
            "ao-1", "m-1", ids, world.env, content_hash=compute_cid(b"m1").digest
        )
        for dataset_id in ids:
            dataset = world.registry.dataset_contract("ao-1", dataset_id).payload
            assert "m-1" in dataset.model_list

    def test_retraining_links_source_and_child(self, world):
        ids = self._licensed_datasets(world, 4)
        world.registry.register_model(
            "ao-1", "m-1", ids[:3], world.env, content_hash=compute_cid(b"m1").digest
        )
        world.registry.register_model(
            "ao-1", "m-2", [ids[3]], world.env,
            source_model_id="m-1", content_hash=compute_cid(b"m2").digest,
        )
        m1 = world.registry.model_contract("ao-1", "m-1").payload
        m2 = world.registry.model_contract("ao-1", "m-2").payload
        assert m2.source_model_id == "m-1"
        assert "m-2" in m1.child_model_list

    def test_unlicensed_dataset_aborts_without_writes(self, world):
        ids = self._licensed_datasets(world, 2)
        world.registry.register_dataset(
            "ao-1", "ds-dark", "https://dark.example/x", "co-1",
            compute_cid(b"dark").digest,
        )
        before = world.ledger.snapshot_json()
        with pytest.raises(UnlicensedDataset):
            world.registry.register_model(
                "ao-1", "m-1", ids + ["ds-dark"], world.env,
                content_hash=compute_cid(b"m1").digest,
            )
        assert world.ledger.snapshot_json() == before

    def test_unbound_public_domain_dataset_is_trainable(self, world):
        world.registry.register_dataset(
            "ao-1", "ds-pd", "https://anywhere.example/x", PUBLIC_DOMAIN,
            compute_cid(b"pd").digest,
        )
        world.registry.register_model(
            "ao-1", "m-pd", ["ds-pd"], world.env,
            content_hash=compute_cid(b"mpd").digest,
        )
        assert check_invariants(world.ledger).ok

    def test_unknown_source_rejected(self, world):
        ids = self._licensed_datasets(world, 1)
        with pytest.raises(UnknownSource):
            world.registry.register_model(
                "ao-1", "m-1", ids, world.env,
                source_model_id="ghost", content_hash=compute_cid(b"m").digest,
            )

    def test_duplicate_model_rejected(self, world):
        ids = self._licensed_datasets(world, 1)
        world.registry.register_model(
            "ao-1", "m-1", ids, world.env, content_hash=compute_cid(b"m1").digest
        )
        with pytest.raises(DuplicateModel):
            world.registry.register_model(
                "ao-1", "m-1", ids, world.env, content_hash=compute_cid(b"m2").digest
            )


class TestGlobalInvariants:
    def test_lineage_fixture_passes(self, lineage_world):
        assert check_invariants(lineage_world.ledger).ok

    def test_random_operation_sequences_preserve_links(self):
        rng = random.Random(2024)
        for round_index in range(5):
            world = new_world(seed=rng.randrange(2**31))
            world.ledger.create_party("co-1", Role.CO)
            world.ledger.create_party("ao-1", Role.AO)
            grant_license(world, "co-1", "ao-1", "lic-1", "https://a.example/")
            grant_license(world, "co-1", "ao-1", "lic-2", "https://b.example/")
            datasets = []
            for index in range(rng.randint(2, 6)):
                dataset_id = f"ds-{index}"
                host = rng.choice(["a", "b"])
                world.registry.register_dataset(
                    "ao-1", dataset_id, f"https://{host}.example/{index}", "co-1",
                    compute_cid(f"{round_index}:{index}".encode()).digest,
                )
                world.registry.bind_license(
                    "ao-1", dataset_id, "lic-1" if host == "a" else "lic-2", world.env
                )
                datasets.append(dataset_id)
            previous = None
            for model_index in range(rng.randint(1, 3)):
                model_id = f"m-{model_index}"
                training = rng.sample(datasets, rng.randint(1, len(datasets)))
                world.registry.register_model(
                    "ao-1", model_id, training, world.env, source_model_id=previous,
                    content_hash=compute_cid(f"m{round_index}:{model_index}".encode()).digest,
                )
                previous = model_id
            report = check_invariants(world.ledger)
            assert report.ok, report.issues

    def test_forged_cycle_is_reported(self, lineage_world):
        # corrupt the graph behind the registry's back: point m-1 at m-2
        import dataclasses as dc

        from provledger.ledger import ReplaceAction

        world = lineage_world
        contract = world.registry.model_contract(AO, "m-1")
        forged = dc.replace(contract.payload, source_model_id="m-2")
        world.ledger.submit(
            world.ledger.build_signed_tx(AO, [ReplaceAction(contract.id, forged)])
        )
        report = check_invariants(world.ledger)
        assert any("cycle" in issue for issue in report.issues)

    def test_scope_disjointness_enforced_per_pair(self, world):
        from provledger.errors import ScopeConflict

        grant_license(world, "co-1", "ao-1", "lic-1", "https://x.org/a/")
        with pytest.raises(ScopeConflict):
            grant_license(world, "co-1", "ao-1", "lic-2", "https://x.org/a/b/")
        # sibling scope and same scope for a different model owner both fine
        grant_license(world, "co-1", "ao-1", "lic-3", "https://x.org/b/")
        grant_license(world, "co-1", "ao-2", "lic-4", "https://x.org/a/")
        assert check_invariants(world.ledger).ok
