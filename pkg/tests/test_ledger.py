from __future__ import annotations

import dataclasses
import random

import pytest

from provledger import (
    ArchiveAction,
    ContractId,
    CreateAction,
    DatasetMeta,
    Ledger,
    ReplaceAction,
    Role,
    Template,
    Transaction,
    compute_cid,
)
from provledger.errors import (
    AuthorizationError,
    DuplicateKey,
    DuplicateParty,
    NotFound,
    NotVisible,
    ReplayError,
    StaleReference,
)

import oracles


def dataset(ao: str, dataset_id: str, co: str = "public-domain", content: bytes | None = None):
    return DatasetMeta(
        dataset_id=dataset_id,
        source_url=f"https://src.example/{dataset_id}",
        copyright_owner_id=co,
        model_owner_id=ao,
        content_hash=compute_cid(content or dataset_id.encode()).digest,
    )


@pytest.fixture
def ledger():
    led = Ledger(seed=11)
    led.create_party("ao-1", Role.AO)
    led.create_party("ao-2", Role.AO)
    led.create_party("co-1", Role.CO)
    return led


class TestParties:
    def test_first_registration_succeeds(self, ledger):
        party = ledger.create_party("ao-3", Role.AO)
        assert party.id == "ao-3"
        assert party.is_ao

    def test_duplicate_registration_rejected(self, ledger):
        with pytest.raises(DuplicateParty):
            ledger.create_party("ao-1", Role.AO)

    def test_public_domain_pre_registered(self):
        fresh = Ledger()
        party = fresh.party("public-domain")
        assert party.is_co and not party.is_ao

    def test_model_owner_gets_catch_all_license(self, ledger):
        cid = ledger.lookup_by_key(
            "ao-1", Template.LICENSE, ("ao-1", "public-domain")
        )
        license = ledger.read("ao-1", cid).payload
        assert license.scope == ""
        assert license.copyright_owner_id == "public-domain"


class TestSubmit:
    def test_single_create_commits(self, ledger):
        before = sum(1 for _ in ledger.active_contracts(Template.DATASET_META))
        tx = ledger.build_signed_tx("ao-1", [CreateAction(dataset("ao-1", "ds-1"))])
        created = ledger.submit(tx)
        assert len(created) == 1
        after = sum(1 for _ in ledger.active_contracts(Template.DATASET_META))
        assert after == before + 1

    def test_created_ids_in_action_order(self, ledger):
        writes = [CreateAction(dataset("ao-1", f"ds-{i}")) for i in range(3)]
        created = ledger.submit(ledger.build_signed_tx("ao-1", writes))
        payloads = [ledger.read("ao-1", cid).payload.dataset_id for cid in created]
        assert payloads == ["ds-0", "ds-1", "ds-2"]

    def test_stale_reference_rolls_back_whole_batch(self, ledger):
        [cid] = ledger.submit(
            ledger.build_signed_tx("ao-1", [CreateAction(dataset("ao-1", "ds-1"))])
        )
        ledger.submit(
            ledger.build_signed_tx(
                "ao-1",
                [ReplaceAction(cid, dataclasses.replace(dataset("ao-1", "ds-1"), license_id="public-domain"))],
            )
        )
        # cid now archived; 3 valid writes plus one stale reference
        before = ledger.snapshot_json()
        writes = [CreateAction(dataset("ao-1", f"ds-x{i}")) for i in range(3)]
        writes.append(ArchiveAction(cid))
        signatures = tuple(ledger.sign_action("ao-1", action) for action in writes)
        tx = Transaction(writes=tuple(writes), submitter="ao-1", signatures=signatures)
        with pytest.raises(StaleReference):
            ledger.submit(tx)
        assert ledger.snapshot_json() == before

    def test_license_needs_both_signatories(self, ledger):
        payload = ledger.license_payload(
            license_id="lic-a",
            scope="https://x.example/",
            copyright_owner_id="co-1",
            model_owner_id="ao-1",
            valid_from=0,
            type_id="time-bound",
        )
        action = CreateAction(payload)
        tx = Transaction(
            writes=(action,),
            submitter="co-1",
            signatures=(ledger.sign_action("co-1", action),),
        )
        before = ledger.snapshot_json()
        with pytest.raises(AuthorizationError):
            ledger.submit(tx)
        assert ledger.snapshot_json() == before

    def test_replay_of_committed_transaction(self, ledger):
        tx = ledger.build_signed_tx("ao-1", [CreateAction(dataset("ao-1", "ds-9"))])
        ledger.submit(tx)
        with pytest.raises(ReplayError):
            ledger.submit(tx)

    def test_duplicate_key_rejected(self, ledger):
        ledger.submit(ledger.build_signed_tx("ao-1", [CreateAction(dataset("ao-1", "ds-1"))]))
        tx = ledger.build_signed_tx("ao-1", [CreateAction(dataset("ao-1", "ds-1", content=b"other"))])
        with pytest.raises(DuplicateKey):
            ledger.submit(tx)

    def test_replace_frees_key_within_transaction(self, ledger):
        [cid] = ledger.submit(
            ledger.build_signed_tx("ao-1", [CreateAction(dataset("ao-1", "ds-1"))])
        )
        replacement = dataclasses.replace(dataset("ao-1", "ds-1"), model_list=("m-1",))
        ledger.submit(ledger.build_signed_tx("ao-1", [ReplaceAction(cid, replacement)]))
        contract = ledger.read("ao-1", cid)
        assert contract.status.value == "archived"

    def test_fault_mid_commit_leaves_no_trace(self, ledger):
        before = ledger.snapshot_json()
        writes = [CreateAction(dataset("ao-1", f"ds-f{i}")) for i in range(3)]
        tx = ledger.build_signed_tx("ao-1", writes)

        def explode(index: int) -> None:
            if index == 2:
                raise RuntimeError("injected")

        ledger.fault_hook = explode
        with pytest.raises(RuntimeError):
            ledger.submit(tx)
        ledger.fault_hook = None
        assert ledger.snapshot_json() == before


class TestVisibility:
    def test_owner_reads_own_dataset(self, ledger):
        [cid] = ledger.submit(
            ledger.build_signed_tx("ao-1", [CreateAction(dataset("ao-1", "ds-1"))])
        )
        assert ledger.read("ao-1", cid).payload.dataset_id == "ds-1"

    def test_unrelated_party_gets_not_visible(self, ledger):
        [cid] = ledger.submit(
            ledger.build_signed_tx("ao-1", [CreateAction(dataset("ao-1", "ds-1"))])
        )
        with pytest.raises(NotVisible):
            ledger.read("ao-2", cid)

    def test_never_issued_id_is_not_found(self, ledger):
        with pytest.raises(NotFound):
            ledger.read("ao-1", ContractId("c99999"))

    def test_archived_contract_remains_readable(self, ledger):
        [cid] = ledger.submit(
            ledger.build_signed_tx("ao-1", [CreateAction(dataset("ao-1", "ds-1"))])
        )
        bound = dataclasses.replace(dataset("ao-1", "ds-1"), license_id="public-domain")
        ledger.submit(ledger.build_signed_tx("ao-1", [ReplaceAction(cid, bound)]))
        contract = ledger.read("ao-1", cid)
        assert contract.status.value == "archived"
        assert contract.payload.dataset_id == "ds-1"
        with pytest.raises(NotVisible):
            ledger.read("ao-2", cid)

    def test_read_matches_membership_rule_everywhere(self, ledger):
        ledger.submit(ledger.build_signed_tx("ao-1", [CreateAction(dataset("ao-1", "ds-1"))]))
        doc = ledger.snapshot()
        parties = [p["id"] for p in doc["parties"]]
        for contract_doc in doc["contracts"]:
            for party in parties:
                allowed = (
                    party in contract_doc["signatories"]
                    or party in contract_doc["observers"]
                )
                cid = ContractId(contract_doc["id"])
                if allowed:
                    assert ledger.read(party, cid).id == cid
                else:
                    with pytest.raises(NotVisible):
                        ledger.read(party, cid)


class TestLookupByKey:
    def test_round_trip_after_create(self, ledger):
        [cid] = ledger.submit(
            ledger.build_signed_tx("ao-1", [CreateAction(dataset("ao-1", "ds-1"))])
        )
        assert ledger.lookup_by_key("ao-1", Template.DATASET_META, ("ao-1", "ds-1")) == cid

    def test_archived_key_absent(self, ledger):
        [cid] = ledger.submit(
            ledger.build_signed_tx("ao-1", [CreateAction(dataset("ao-1", "ds-1"))])
        )
        bound = dataclasses.replace(dataset("ao-1", "ds-1"), license_id="public-domain")
        [new_cid] = ledger.submit(ledger.build_signed_tx("ao-1", [ReplaceAction(cid, bound)]))
        found = ledger.lookup_by_key("ao-1", Template.DATASET_META, ("ao-1", "ds-1"))
        assert found == new_cid != cid

    def test_foreign_key_absent_for_requester(self, ledger):
        ledger.submit(ledger.build_signed_tx("ao-1", [CreateAction(dataset("ao-1", "ds-1"))]))
        assert ledger.lookup_by_key("ao-2", Template.DATASET_META, ("ao-1", "ds-1")) is None
        # oracle: linear scan with the visibility predicate agrees
        doc = ledger.snapshot()
        visible = [
            c
            for c in oracles.visible_contracts(doc, "ao-2")
            if c["status"] == "active"
            and c["template"] == "DatasetMeta"
            and c["payload"]["datasetId"] == "ds-1"
        ]
        assert visible == []


class TestAuthorizationFuzz:
    def test_mutated_signatures_never_commit(self, ledger):
        rng = random.Random(5)
        payload = ledger.license_payload(
            license_id="lic-f",
            scope="https://f.example/",
            copyright_owner_id="co-1",
            model_owner_id="ao-1",
            valid_from=0,
            type_id="time-bound",
        )
        action = CreateAction(payload)
        good = ledger.build_signed_tx("ao-1", [action])
        before = ledger.snapshot_json()
        for _ in range(60):
            tx = _mutate_tx(ledger, good, rng)
            with pytest.raises((AuthorizationError, ReplayError)):
                ledger.submit(tx)
            assert ledger.snapshot_json() == before
        # the untouched original still commits
        ledger.submit(good)

    def test_signature_from_wrong_party_rejected(self, ledger):
        action = CreateAction(dataset("ao-1", "ds-w"))
        tx = Transaction(
            writes=(action,),
            submitter="ao-2",
            signatures=(ledger.sign_action("ao-2", action),),
        )
        with pytest.raises(AuthorizationError):
            ledger.submit(tx)


def _mutate_tx(ledger, tx, rng: random.Random):
    mode = rng.choice(["drop", "forge", "swap-signer"])
    sigs = list(tx.signatures)
    index = rng.randrange(len(sigs))
    if mode == "drop":
        del sigs[index]
    elif mode == "forge":
        sig = sigs[index]
        flipped = bytearray(sig.signature)
        flipped[rng.randrange(len(flipped))] ^= 1 << rng.randrange(8)
        sigs[index] = dataclasses.replace(sig, signature=bytes(flipped))
    else:
        sig = sigs[index]
        other = "ao-2" if sig.signer != "ao-2" else "co-1"
        sigs[index] = dataclasses.replace(sig, signer=other)
    return dataclasses.replace(tx, signatures=tuple(sigs))


class TestAppendOnly:
    def test_created_payloads_never_disappear(self, ledger):
        seen: set[str] = set()
        for step in range(5):
            ledger.submit(
                ledger.build_signed_tx("ao-1", [CreateAction(dataset("ao-1", f"ds-a{step}"))])
            )
            ids = {c.id.value for c in ledger.all_contracts()}
            assert seen <= ids
            seen = ids


class TestSnapshot:
    def test_round_trip_preserves_bytes(self, ledger):
        ledger.submit(ledger.build_signed_tx("ao-1", [CreateAction(dataset("ao-1", "ds-1"))]))
        text = ledger.snapshot_json()
        restored = Ledger.from_snapshot(ledger.snapshot())
        assert restored.snapshot_json() == text

    def test_restored_ledger_accepts_new_writes(self, ledger):
        restored = Ledger.from_snapshot(ledger.snapshot())
        restored.submit(
            restored.build_signed_tx("ao-1", [CreateAction(dataset("ao-1", "ds-new"))])
        )
        key = restored.lookup_by_key("ao-1", Template.DATASET_META, ("ao-1", "ds-new"))
        assert key is not None
