"""Append-only contract ledger with parties, signatures, and atomic commits.

A single-node, in-memory stand-in for a permissioned contract ledger:
parties hold Ed25519 keypairs, contracts are created or archived only
through signed multi-action transactions, and every commit is all-or-
nothing under one ledger sequence number.  Visibility is party-scoped:
a contract can be read only by its signatories and observers, and an
unauthorized read is indistinguishable in shape from absence.
"""

from __future__ import annotations

import dataclasses
import json
import random
import threading
import time
from collections.abc import Callable, Iterator
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from . import crypto
from .errors import (
    AuthorizationError,
    DuplicateKey,
    DuplicateParty,
    NotFound,
    NotVisible,
    ProvenanceSpoof,
    ReplayError,
    StaleReference,
    UnknownParty,
)
from .records import (
    PUBLIC_DOMAIN,
    DatasetMeta,
    FrozenMap,
    License,
    ModelMeta,
    Payload,
    Signature,
    Template,
    payload_from_dict,
)


class Role(str, Enum):
    AO = "AO"
    CO = "CO"
    BOTH = "both"


@dataclass(frozen=True)
class Party:
    id: str
    role: Role
    public_key: bytes
    private_key: bytes

    @property
    def is_ao(self) -> bool:
        return self.role in (Role.AO, Role.BOTH)

    @property
    def is_co(self) -> bool:
        return self.role in (Role.CO, Role.BOTH)


@dataclass(frozen=True)
class ContractId:
    value: str


class ContractStatus(str, Enum):
    ACTIVE = "active"
    ARCHIVED = "archived"


@dataclass(frozen=True)
class LedgerContract:
    id: ContractId
    template: Template
    payload: Payload
    signatories: frozenset[str]
    observers: frozenset[str]
    status: ContractStatus
    created_at: int
    archived_at: int | None = None

    def visible_to(self, party_id: str) -> bool:
        return party_id in self.signatories or party_id in self.observers

    @property
    def is_active(self) -> bool:
        return self.status is ContractStatus.ACTIVE


# ---------------------------------------------------------------------------
# transaction actions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CreateAction:
    payload: Payload
    observers: frozenset[str] | None = None

    kind = "create"

    def digest(self) -> bytes:
        return crypto.digest_of(
            {
                "kind": self.kind,
                "template": self.payload.template.value,
                "payload": self.payload.to_dict(),
                "observers": sorted(self.effective_observers()),
            }
        )

    def effective_observers(self) -> frozenset[str]:
        if self.observers is None:
            return self.payload.default_observers()
        return self.observers


@dataclass(frozen=True)
class ArchiveAction:
    target: ContractId

    kind = "archive"

    def digest(self) -> bytes:
        return crypto.digest_of({"kind": self.kind, "target": self.target.value})


@dataclass(frozen=True)
class ReplaceAction:
    """Archive ``target`` and create a successor contract atomically."""

    target: ContractId
    payload: Payload
    observers: frozenset[str] | None = None

    kind = "replace"

    def digest(self) -> bytes:
        return crypto.digest_of(
            {
                "kind": self.kind,
                "target": self.target.value,
                "template": self.payload.template.value,
                "payload": self.payload.to_dict(),
                "observers": sorted(self.effective_observers()),
            }
        )

    def effective_observers(self) -> frozenset[str]:
        if self.observers is None:
            return self.payload.default_observers()
        return self.observers


Action = CreateAction | ArchiveAction | ReplaceAction


@dataclass(frozen=True)
class Transaction:
    writes: tuple[Action, ...]
    submitter: str
    signatures: tuple[Signature, ...]


@dataclass
class _StagedOp:
    archive: str | None  # contract-id value to archive
    payload: Payload | None
    observers: frozenset[str]


class Ledger:
    """Single commit path; reads observe committed state only.

    ``seed`` makes key generation and signature nonces reproducible so
    that two ledgers built by the same deterministic recipe serialize
    to byte-identical snapshots.  ``commit_delay`` adds a fixed
    synthetic pause per commit to emulate consensus cost; it defaults
    to zero.
    """

    def __init__(self, seed: int | None = None, commit_delay: float = 0.0):
        self._rng = random.Random(seed)
        self.commit_delay = commit_delay
        self._lock = threading.RLock()
        self._parties: dict[str, Party] = {}
        self._contracts: dict[str, LedgerContract] = {}
        self._order: list[str] = []  # contract-id values in creation order
        self._active_keys: dict[tuple[Template, tuple[str, str]], str] = {}
        self._licenses_by_pair: dict[tuple[str, str], list[str]] = {}
        self._cid_owner: dict[bytes, str] = {}
        self._nonces: dict[str, set[bytes]] = {}
        self._next_seq = 0
        self._next_contract = 0
        # test hook: called with the action index during commit staging
        self.fault_hook: Callable[[int], None] | None = None
        self._register_party(PUBLIC_DOMAIN, Role.CO)

    # -- parties and signing ------------------------------------------------

    def create_party(self, party_id: str, role: Role) -> Party:
        """Register a party with a fresh keypair.

        Parties that can own models also receive their catch-all
        public-domain license (scope "", always valid) so that
        public-domain datasets pass license checks without bespoke
        agreements.
        """
        with self._lock:
            party = self._register_party(party_id, role)
            if party.is_ao:
                self._create_public_domain_license(party_id)
            return party

    def _register_party(self, party_id: str, role: Role) -> Party:
        if party_id in self._parties:
            raise DuplicateParty(party_id)
        private, public = crypto.generate_keypair(self._rng.randbytes(32))
        party = Party(id=party_id, role=Role(role), public_key=public, private_key=private)
        self._parties[party_id] = party
        self._nonces[party_id] = set()
        return party

    def _create_public_domain_license(self, ao_id: str) -> None:
        payload = self.license_payload(
            license_id=PUBLIC_DOMAIN,
            scope="",
            copyright_owner_id=PUBLIC_DOMAIN,
            model_owner_id=ao_id,
            valid_from=0,
            type_id=PUBLIC_DOMAIN,
        )
        self.submit(self.build_signed_tx(ao_id, [CreateAction(payload)]))

    def party(self, party_id: str) -> Party:
        try:
            return self._parties[party_id]
        except KeyError:
            raise UnknownParty(party_id) from None

    def has_party(self, party_id: str) -> bool:
        return party_id in self._parties

    def parties(self) -> tuple[Party, ...]:
        return tuple(self._parties.values())

    def fresh_nonce(self) -> bytes:
        with self._lock:
            return self._rng.randbytes(crypto.NONCE_SIZE)

    def sign_payload(self, party_id: str, payload_digest: bytes) -> Signature:
        """Sign an arbitrary 32-byte digest as ``party_id``."""
        party = self.party(party_id)
        nonce = self.fresh_nonce()
        sig = crypto.sign(party.private_key, payload_digest + nonce)
        return Signature(
            signer=party_id, payload_digest=payload_digest, nonce=nonce, signature=sig
        )

    def sign_action(self, party_id: str, action: Action) -> Signature:
        return self.sign_payload(party_id, action.digest())

    def license_payload(
        self,
        license_id: str,
        scope: str,
        copyright_owner_id: str,
        model_owner_id: str,
        valid_from: int,
        type_id: str,
        dataset_list: tuple[str, ...] = (),
        extensions: dict[str, str] | None = None,
    ) -> License:
        """Build a license payload carrying both parties' signatures
        over its terms digest (the bilateral part of the record)."""
        unsigned = License(
            license_id=license_id,
            scope=scope,
            copyright_owner_id=copyright_owner_id,
            model_owner_id=model_owner_id,
            valid_from=valid_from,
            type_id=type_id,
            copyright_owner_signature=_PLACEHOLDER_SIG,
            model_owner_signature=_PLACEHOLDER_SIG,
            dataset_list=tuple(dataset_list),
            extensions=FrozenMap(extensions or {}),
        )
        digest = unsigned.agreement_digest()
        return dataclasses.replace(
            unsigned,
            copyright_owner_signature=self.sign_payload(copyright_owner_id, digest),
            model_owner_signature=self.sign_payload(model_owner_id, digest),
        )

    def build_signed_tx(self, submitter: str, writes: list[Action]) -> Transaction:
        """Sign every action for all of its required signatories.

        This is the trusted orchestration path used by the service
        layer once the acting party's authority has been established;
        ``submit`` still verifies every signature cryptographically.
        """
        with self._lock:
            signatures: list[Signature] = []
            for action in writes:
                for signer in sorted(self.required_signers(action)):
                    signatures.append(self.sign_action(signer, action))
            return Transaction(
                writes=tuple(writes), submitter=submitter, signatures=tuple(signatures)
            )

    def required_signers(self, action: Action) -> frozenset[str]:
        signers: set[str] = set()
        if isinstance(action, (CreateAction, ReplaceAction)):
            signers |= action.payload.signatory_ids()
        if isinstance(action, (ArchiveAction, ReplaceAction)):
            old = self._contracts.get(action.target.value)
            if old is None or not old.is_active:
                raise StaleReference(action.target.value)
            signers |= old.signatories
        return frozenset(signers)

    # -- validation and commit ----------------------------------------------

    def validate(self, tx: Transaction) -> None:
        """Run every submit-time check without mutating state."""
        with self._lock:
            self._validate(tx)

    def _validate(self, tx: Transaction) -> list[_StagedOp]:
        if not tx.writes:
            raise StaleReference("empty transaction")
        if tx.submitter not in self._parties:
            raise UnknownParty(tx.submitter)

        # replay: a transaction-authorization nonce is accepted at most
        # once per signer (embedded license signatures are data at rest,
        # protected by digest binding and key uniqueness instead)
        tx_sigs = list(dict.fromkeys(tx.signatures))
        fresh: set[tuple[str, bytes]] = set()
        for sig in tx_sigs:
            seen = self._nonces.get(sig.signer)
            if seen is not None and sig.nonce in seen:
                raise ReplayError(f"nonce reuse by {sig.signer}")
            if (sig.signer, sig.nonce) in fresh:
                raise ReplayError(f"nonce reuse by {sig.signer} within transaction")
            fresh.add((sig.signer, sig.nonce))

        # every provided signature must verify against its signer's key
        all_sigs = list(tx_sigs)
        for action in tx.writes:
            payload = getattr(action, "payload", None)
            if isinstance(payload, License):
                all_sigs.append(payload.copyright_owner_signature)
                all_sigs.append(payload.model_owner_signature)
        for sig in all_sigs:
            party = self._parties.get(sig.signer)
            if party is None:
                raise AuthorizationError(f"unknown signer {sig.signer}")
            if not crypto.verify(
                party.public_key, sig.payload_digest + sig.nonce, sig.signature
            ):
                raise AuthorizationError(f"invalid signature from {sig.signer}")

        # bilateral licenses: both embedded signatures over the agreed terms
        for action in tx.writes:
            payload = getattr(action, "payload", None)
            if isinstance(payload, License):
                digest = payload.agreement_digest()
                for sig, expected in (
                    (payload.copyright_owner_signature, payload.copyright_owner_id),
                    (payload.model_owner_signature, payload.model_owner_id),
                ):
                    if sig.signer != expected or sig.payload_digest != digest:
                        raise AuthorizationError(
                            f"license {payload.license_id} lacks a valid "
                            f"signature from {expected}"
                        )

        # duplicate content digests under a new owner are spoofs
        staged_cids: dict[bytes, str] = {}
        for action in tx.writes:
            payload = getattr(action, "payload", None)
            if isinstance(payload, (DatasetMeta, ModelMeta)):
                owner = payload.model_owner_id
                known = self._cid_owner.get(payload.content_hash) or staged_cids.get(
                    payload.content_hash
                )
                if known is not None and known != owner:
                    raise ProvenanceSpoof(
                        f"content digest {payload.content_hash.hex()[:12]} "
                        f"already registered by {known}"
                    )
                staged_cids[payload.content_hash] = owner

        # per-action structural checks against a staged view
        staged: list[_StagedOp] = []
        archived: set[str] = set()
        keys: dict[tuple[Template, tuple[str, str]], bool] = {}
        by_digest: dict[bytes, set[str]] = {}
        for sig in tx.signatures:
            by_digest.setdefault(sig.payload_digest, set()).add(sig.signer)

        for action in tx.writes:
            op = _StagedOp(archive=None, payload=None, observers=frozenset())
            required: set[str] = set()
            if isinstance(action, (ArchiveAction, ReplaceAction)):
                old = self._contracts.get(action.target.value)
                if old is None or not old.is_active or action.target.value in archived:
                    raise StaleReference(action.target.value)
                required |= old.signatories
                op.archive = action.target.value
                archived.add(action.target.value)
                keys[(old.template, old.payload.key())] = False
            if isinstance(action, (CreateAction, ReplaceAction)):
                payload = action.payload
                for signer in payload.signatory_ids():
                    if signer not in self._parties:
                        raise UnknownParty(signer)
                required |= payload.signatory_ids()
                key = (payload.template, payload.key())
                active_here = keys.get(key, key in self._active_keys)
                if active_here:
                    raise DuplicateKey(f"{payload.template.value} {payload.key()}")
                keys[key] = True
                op.payload = payload
                op.observers = action.effective_observers()

            have = by_digest.get(action.digest(), set())
            missing = required - have
            if missing:
                raise AuthorizationError(
                    f"action missing signatures from {sorted(missing)}"
                )
            staged.append(op)
        return staged

    def submit(self, tx: Transaction) -> list[ContractId]:
        """Atomically apply a transaction; any error leaves state intact."""
        with self._lock:
            staged = self._validate(tx)
            if self.commit_delay:
                time.sleep(self.commit_delay)

            seq = self._next_seq
            ordinal = self._next_contract
            new_contracts: list[LedgerContract] = []
            to_archive: list[str] = []
            created: list[ContractId] = []
            for index, op in enumerate(staged):
                if self.fault_hook is not None:
                    self.fault_hook(index)
                if op.archive is not None:
                    to_archive.append(op.archive)
                if op.payload is not None:
                    cid = ContractId(f"c{ordinal}")
                    ordinal += 1
                    contract = LedgerContract(
                        id=cid,
                        template=op.payload.template,
                        payload=op.payload,
                        signatories=op.payload.signatory_ids(),
                        observers=op.observers,
                        status=ContractStatus.ACTIVE,
                        created_at=seq,
                    )
                    new_contracts.append(contract)
                    created.append(cid)

            # point of no return: merge the staged effects
            for cid_value in to_archive:
                old = self._contracts[cid_value]
                self._unindex(old)
                self._contracts[cid_value] = dataclasses.replace(
                    old, status=ContractStatus.ARCHIVED, archived_at=seq
                )
            for contract in new_contracts:
                self._contracts[contract.id.value] = contract
                self._order.append(contract.id.value)
                self._index(contract)
            for sig in tx.signatures:
                self._nonces[sig.signer].add(sig.nonce)
            self._next_contract = ordinal
            self._next_seq = seq + 1
            return created

    def _index(self, contract: LedgerContract) -> None:
        self._active_keys[(contract.template, contract.payload.key())] = contract.id.value
        if isinstance(contract.payload, (DatasetMeta, ModelMeta)):
            self._cid_owner.setdefault(
                contract.payload.content_hash, contract.payload.model_owner_id
            )
        if isinstance(contract.payload, License):
            pair = (contract.payload.copyright_owner_id, contract.payload.model_owner_id)
            self._licenses_by_pair.setdefault(pair, []).append(contract.id.value)

    def _unindex(self, contract: LedgerContract) -> None:
        self._active_keys.pop((contract.template, contract.payload.key()), None)
        if isinstance(contract.payload, License):
            pair = (contract.payload.copyright_owner_id, contract.payload.model_owner_id)
            cids = self._licenses_by_pair.get(pair, [])
            if contract.id.value in cids:
                cids.remove(contract.id.value)

    # -- reads ----------------------------------------------------------------

    def read(self, requester: str, contract_id: ContractId) -> LedgerContract:
        contract = self._contracts.get(contract_id.value)
        if contract is None:
            raise NotFound(contract_id.value)
        if not contract.visible_to(requester):
            raise NotVisible(contract_id.value)
        return contract

    def lookup_by_key(
        self, requester: str, template: Template, key: tuple[str, str]
    ) -> ContractId | None:
        cid_value = self._active_keys.get((template, key))
        if cid_value is None:
            return None
        contract = self._contracts[cid_value]
        if not contract.visible_to(requester):
            return None
        return contract.id

    def active_contracts(
        self, template: Template | None = None, visible_to: str | None = None
    ) -> Iterator[LedgerContract]:
        """Active contracts in creation order, optionally filtered."""
        for cid_value in self._order:
            contract = self._contracts[cid_value]
            if not contract.is_active:
                continue
            if template is not None and contract.template is not template:
                continue
            if visible_to is not None and not contract.visible_to(visible_to):
                continue
            yield contract

    def all_contracts(self) -> Iterator[LedgerContract]:
        for cid_value in self._order:
            yield self._contracts[cid_value]

    def licenses_for_pair(self, copyright_owner_id: str, model_owner_id: str) -> tuple[str, ...]:
        """Active license contract ids for a (CO, AO) pair; secondary index."""
        return tuple(self._licenses_by_pair.get((copyright_owner_id, model_owner_id), ()))

    @property
    def next_seq(self) -> int:
        return self._next_seq

    def content_owner(self, digest: bytes) -> str | None:
        return self._cid_owner.get(digest)

    # -- snapshots --------------------------------------------------------------

    def snapshot(self, blacklists: dict[str, Any] | None = None) -> dict[str, Any]:
        parties = [
            {
                "id": p.id,
                "role": p.role.value,
                "publicKey": p.public_key.hex(),
                "privateKey": p.private_key.hex(),
            }
            for p in sorted(self._parties.values(), key=lambda p: p.id)
        ]
        contracts = [
            {
                "id": c.id.value,
                "template": c.template.value,
                "payload": c.payload.to_dict(),
                "signatories": sorted(c.signatories),
                "observers": sorted(c.observers),
                "status": c.status.value,
                "createdAt": c.created_at,
                "archivedAt": c.archived_at,
            }
            for c in self.all_contracts()
        ]
        return {
            "parties": parties,
            "contracts": contracts,
            "next_seq": self._next_seq,
            "nonces": {
                party: sorted(n.hex() for n in nonces)
                for party, nonces in sorted(self._nonces.items())
            },
            "blacklists": blacklists or {},
        }

    def snapshot_json(self, blacklists: dict[str, Any] | None = None) -> str:
        return json.dumps(
            self.snapshot(blacklists), sort_keys=True, separators=(",", ":")
        )

    @classmethod
    def from_snapshot(cls, doc: dict[str, Any]) -> Ledger:
        ledger = cls.__new__(cls)
        ledger._rng = random.Random()
        ledger.commit_delay = 0.0
        ledger._lock = threading.RLock()
        ledger._parties = {}
        ledger._contracts = {}
        ledger._order = []
        ledger._active_keys = {}
        ledger._licenses_by_pair = {}
        ledger._cid_owner = {}
        ledger._nonces = {}
        ledger.fault_hook = None
        for p in doc["parties"]:
            ledger._parties[p["id"]] = Party(
                id=p["id"],
                role=Role(p["role"]),
                public_key=bytes.fromhex(p["publicKey"]),
                private_key=bytes.fromhex(p["privateKey"]),
            )
        for party, nonces in doc.get("nonces", {}).items():
            ledger._nonces[party] = {bytes.fromhex(n) for n in nonces}
        for party_id in ledger._parties:
            ledger._nonces.setdefault(party_id, set())
        for c in doc["contracts"]:
            template = Template(c["template"])
            contract = LedgerContract(
                id=ContractId(c["id"]),
                template=template,
                payload=payload_from_dict(template, c["payload"]),
                signatories=frozenset(c["signatories"]),
                observers=frozenset(c["observers"]),
                status=ContractStatus(c["status"]),
                created_at=c["createdAt"],
                archived_at=c.get("archivedAt"),
            )
            ledger._contracts[contract.id.value] = contract
            ledger._order.append(contract.id.value)
            if isinstance(contract.payload, (DatasetMeta, ModelMeta)):
                ledger._cid_owner.setdefault(
                    contract.payload.content_hash, contract.payload.model_owner_id
                )
            if contract.is_active:
                ledger._index(contract)
        ledger._next_seq = doc["next_seq"]
        ledger._next_contract = len(ledger._order)
        return ledger


_PLACEHOLDER_SIG = Signature(signer="", payload_digest=b"\x00" * 32, nonce=b"", signature=b"")
