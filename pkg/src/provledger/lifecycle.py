"""License acquisition and renewal workflows.

The bilateral signing flow follows the propose-accept pattern: the
copyright owner creates a single-signed agreement (drafted through a
pluggable contract-management connector), and only the designated
model owner can accept it, which atomically archives the proposal and
creates the bilaterally signed license.

Off-ledger coordination (the e-mail traffic of a real deployment) is
modeled as an append-only notification event log.  Renewal checks come
in three flavors (license-, dataset-, and model-driven) and feed a
per-owner blacklist of datasets and models whose covering license
failed its last validity check.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Protocol

from .errors import (
    AuthorizationError,
    ConnectorError,
    NotController,
    NotFound,
    NotVisible,
    OwnerMismatch,
    ScopeConflict,
    StaleReference,
    UnknownDataset,
    UnknownLicense,
)
from .ledger import (
    ArchiveAction,
    ContractId,
    CreateAction,
    Ledger,
    LedgerContract,
    ReplaceAction,
    Transaction,
)
from .queries import IndexedEngine
from .records import (
    PUBLIC_DOMAIN,
    DatasetMeta,
    FrozenMap,
    License,
    LicenseAgreement,
    Template,
    scopes_intersect,
)
from .registry import RegistryService
from .validity import VALID_UNTIL_KEY, CheckerRegistry, EnvVars, parse_instant

NOTIFY_ON_TRAIN_KEY = "notifyOnTrain"


class EventKind(str, Enum):
    LICENSE_REQUEST = "licenseRequest"
    DRAFT_READY = "draftReady"
    AGREEMENT_ACCEPTED = "agreementAccepted"
    MODEL_TRAINED = "modelTrained"
    RENEWAL_NEEDED = "renewalNeeded"


@dataclass(frozen=True)
class NotificationEvent:
    seq: int
    at: int  # ledger sequence number when emitted
    kind: EventKind
    sender: str
    recipient: str
    subject: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "at": self.at,
            "kind": self.kind.value,
            "from": self.sender,
            "to": self.recipient,
            "subject": self.subject,
        }


class ClmConnector(Protocol):
    """Plug-point for external contract-management software: terms in,
    drafted agreement terms out."""

    def draft(self, terms: Mapping[str, Any]) -> Mapping[str, Any]: ...


class InMemoryClmConnector:
    """Reference connector: echoes the requested terms as the draft."""

    def draft(self, terms: Mapping[str, Any]) -> Mapping[str, Any]:
        return dict(terms)


@dataclass
class Blacklist:
    datasets: set[str] = field(default_factory=set)
    models: set[str] = field(default_factory=set)


@dataclass(frozen=True)
class RenewalFinding:
    license_id: str
    dataset_ids: tuple[str, ...]
    model_ids: tuple[str, ...]


class LifecycleService:
    def __init__(
        self,
        ledger: Ledger,
        registry: RegistryService,
        checkers: CheckerRegistry,
        connector: ClmConnector | None = None,
    ):
        self.ledger = ledger
        self.registry = registry
        self.checkers = checkers
        self.connector: ClmConnector = connector or InMemoryClmConnector()
        self.events: list[NotificationEvent] = []
        self._event_seq = itertools.count()
        self._blacklists: dict[str, Blacklist] = {}
        self._engine = IndexedEngine(ledger, checkers)

    # -- events -----------------------------------------------------------

    def _emit(self, kind: EventKind, sender: str, recipient: str, subject: str) -> NotificationEvent:
        event = NotificationEvent(
            seq=next(self._event_seq),
            at=self.ledger.next_seq,
            kind=kind,
            sender=sender,
            recipient=recipient,
            subject=subject,
        )
        self.events.append(event)
        return event

    def events_jsonl(self) -> str:
        return "\n".join(json.dumps(e.to_dict(), sort_keys=True) for e in self.events)

    def blacklist(self, ao: str) -> Blacklist:
        return self._blacklists.setdefault(ao, Blacklist())

    def blacklists_dict(self) -> dict[str, Any]:
        return {
            ao: {"datasets": sorted(b.datasets), "models": sorted(b.models)}
            for ao, b in sorted(self._blacklists.items())
            if b.datasets or b.models
        }

    # -- acquisition --------------------------------------------------------

    def request_license(self, ao: str, co: str, dataset_ids: list[str]) -> NotificationEvent:
        for dataset_id in dataset_ids:
            contract = self.registry.dataset_contract(ao, dataset_id)
            if contract is None:
                raise UnknownDataset(dataset_id)
            if contract.payload.copyright_owner_id != co:
                raise OwnerMismatch(
                    f"{dataset_id} belongs to {contract.payload.copyright_owner_id}"
                )
        return self._emit(
            EventKind.LICENSE_REQUEST, sender=ao, recipient=co,
            subject=",".join(dataset_ids),
        )

    def draft_agreement(
        self,
        co: str,
        terms: Mapping[str, Any],
        connector: ClmConnector | None = None,
    ) -> ContractId:
        """Draft through the connector and put the single-signed
        agreement on the ledger; only the named copyright owner can
        create it."""
        via = connector or self.connector
        try:
            drafted = via.draft(terms)
        except ConnectorError:
            raise
        except Exception as exc:
            raise ConnectorError(str(exc)) from exc

        agreement = _agreement_from_terms(drafted)
        if agreement.copyright_owner_id != co:
            raise AuthorizationError(
                f"{co} cannot draft for {agreement.copyright_owner_id}"
            )
        action = CreateAction(agreement)
        tx_signature = self.ledger.sign_action(co, action)
        cid = self.ledger.submit(
            Transaction(writes=(action,), submitter=co, signatures=(tx_signature,))
        )[0]
        self._emit(
            EventKind.DRAFT_READY, sender=co, recipient=agreement.model_owner_id,
            subject=cid.value,
        )
        return cid

    def accept_agreement(self, ao: str, agreement_id: ContractId) -> ContractId:
        contract = self._readable_agreement(ao, agreement_id)
        agreement: LicenseAgreement = contract.payload
        if ao != agreement.model_owner_id:
            raise NotController(ao)
        self._assert_scope_free(agreement)
        payload = self._license_from_agreement(agreement)
        writes = [ReplaceAction(contract.id, payload)]
        cid = self.ledger.submit(self.ledger.build_signed_tx(ao, writes))[0]
        self._emit(
            EventKind.AGREEMENT_ACCEPTED, sender=ao,
            recipient=agreement.copyright_owner_id, subject=payload.license_id,
        )
        return cid

    def _readable_agreement(self, ao: str, agreement_id: ContractId) -> LedgerContract:
        try:
            contract = self.ledger.read(ao, agreement_id)
        except NotVisible:
            raise NotController(ao) from None
        except NotFound:
            raise StaleReference(agreement_id.value) from None
        if contract.template is not Template.LICENSE_AGREEMENT:
            raise StaleReference(agreement_id.value)
        if not contract.is_active:
            raise StaleReference(f"{agreement_id.value} already accepted")
        return contract

    def _assert_scope_free(self, agreement: LicenseAgreement) -> None:
        if agreement.type_id == PUBLIC_DOMAIN:
            return
        for cid_value in self.ledger.licenses_for_pair(
            agreement.copyright_owner_id, agreement.model_owner_id
        ):
            existing: License = self.ledger.read(
                agreement.model_owner_id, ContractId(cid_value)
            ).payload
            if existing.type_id == PUBLIC_DOMAIN:
                continue
            if scopes_intersect(existing.scope, agreement.scope):
                raise ScopeConflict(
                    f"scope {agreement.scope!r} intersects active license "
                    f"{existing.license_id}"
                )

    def _license_from_agreement(self, agreement: LicenseAgreement) -> License:
        return self.ledger.license_payload(
            license_id=agreement.agreement_id,
            scope=agreement.scope,
            copyright_owner_id=agreement.copyright_owner_id,
            model_owner_id=agreement.model_owner_id,
            valid_from=agreement.valid_from,
            type_id=agreement.type_id,
            dataset_list=agreement.dataset_list,
            extensions=agreement.extensions.to_dict(),
        )

    # -- renewal checks ----------------------------------------------------

    def renewal_check_license_driven(
        self, actor: str, env: EnvVars
    ) -> list[RenewalFinding]:
        """Scan every license visible to the actor; failures are
        expanded to their dependent datasets and models (when the actor
        owns them) and blacklisted."""
        findings: list[RenewalFinding] = []
        for contract in self.ledger.active_contracts(Template.LICENSE, visible_to=actor):
            license: License = contract.payload
            if self.checkers.check(license, env).valid:
                continue
            if actor == license.model_owner_id:
                dataset_ids = tuple(
                    sorted(self._engine.get_datasets_by_license(actor, license.license_id))
                )
                model_ids = tuple(
                    sorted(
                        m.model_id
                        for m in self._engine.get_models_by_license(actor, license.license_id)
                    )
                )
                blacklist = self.blacklist(actor)
                blacklist.datasets.update(dataset_ids)
                blacklist.models.update(model_ids)
                counterparty = license.copyright_owner_id
            else:
                dataset_ids = tuple(sorted(license.dataset_list))
                model_ids = ()
                counterparty = license.model_owner_id
            findings.append(RenewalFinding(license.license_id, dataset_ids, model_ids))
            self._emit(
                EventKind.RENEWAL_NEEDED, sender=actor, recipient=counterparty,
                subject=license.license_id,
            )
        return findings

    def renewal_check_dataset_driven(
        self, ao: str, dataset_ids: list[str], env: EnvVars
    ) -> list[str]:
        """Per-dataset license lookup plus validity check; failing
        datasets are returned in input order and blacklisted."""
        licensed = self._engine.check_and_filter_licensed(ao, list(dataset_ids), env)
        failing = [d for d in dataset_ids if d not in licensed]
        if failing:
            self.blacklist(ao).datasets.update(failing)
        return failing

    def renewal_check_model_driven(self, ao: str, model_id: str, env: EnvVars) -> list[str]:
        """Validity check over the model's licenses; returns license ids
        needing renewal and blacklists the model if any fail."""
        licenses = self._engine.get_model_licenses(ao, model_id)
        failing = sorted(
            license.license_id
            for license in licenses
            if not self.checkers.check(license, env).valid
        )
        if failing:
            self.blacklist(ao).models.add(model_id)
        return failing

    # -- renewal -------------------------------------------------------------

    def renew_license(
        self, co: str, ao: str, old_license_id: str, new_terms: Mapping[str, Any]
    ) -> ContractId:
        """Replace an old license with a freshly signed one via
        propose-accept, re-link its datasets, and clear the affected
        entries from the blacklist.  The old contract is archived, so it
        stays readable by its signers forever; ``new_terms`` may
        override licenseId, scope, validFrom, typeId, and extensions
        (by default the old extensions are carried over minus any
        expiry)."""
        old_contract = self.registry.license_contract(ao, old_license_id)
        if old_contract is None:
            old_contract = self._archived_license(co, ao, old_license_id)
        if old_contract is None:
            raise UnknownLicense(old_license_id)
        old: License = old_contract.payload
        if old.copyright_owner_id != co or old.model_owner_id != ao:
            raise AuthorizationError(
                f"{old_license_id} is not between {co} and {ao}"
            )

        carried = {
            k: v for k, v in old.extensions.to_dict().items() if k != VALID_UNTIL_KEY
        }
        terms = {
            "id": new_terms.get("licenseId", f"{old_license_id}-r{self.ledger.next_seq}"),
            "scope": new_terms.get("scope", old.scope),
            "copyrightOwnerId": co,
            "modelOwnerId": ao,
            "validFrom": new_terms.get("validFrom", old.valid_from),
            "typeId": new_terms.get("typeId", old.type_id),
            "datasetList": [],
            "extensions": dict(new_terms.get("extensions", carried)),
        }
        agreement_cid = self.draft_agreement(co, terms)
        agreement_contract = self.ledger.read(ao, agreement_cid)
        agreement: LicenseAgreement = agreement_contract.payload

        payload = self.ledger.license_payload(
            license_id=agreement.agreement_id,
            scope=agreement.scope,
            copyright_owner_id=co,
            model_owner_id=ao,
            valid_from=agreement.valid_from,
            type_id=agreement.type_id,
            dataset_list=old.dataset_list,
            extensions=agreement.extensions.to_dict(),
        )
        writes: list = []
        if old_contract.is_active:
            writes.append(ArchiveAction(old_contract.id))
        writes.append(ReplaceAction(agreement_cid, payload))
        for dataset_id in old.dataset_list:
            dataset_contract = self.registry.dataset_contract(ao, dataset_id)
            if dataset_contract is None:
                continue
            dataset: DatasetMeta = dataset_contract.payload
            writes.append(
                ReplaceAction(
                    dataset_contract.id,
                    dataclasses.replace(dataset, license_id=payload.license_id),
                )
            )
        cid = self.ledger.submit(self.ledger.build_signed_tx(ao, writes))[0]
        self._emit(
            EventKind.AGREEMENT_ACCEPTED, sender=ao, recipient=co,
            subject=payload.license_id,
        )

        blacklist = self.blacklist(ao)
        blacklist.datasets.difference_update(old.dataset_list)
        restored = self._engine.get_models_by_license(ao, payload.license_id)
        blacklist.models.difference_update(m.model_id for m in restored)
        return cid

    def _archived_license(
        self, co: str, ao: str, license_id: str
    ) -> LedgerContract | None:
        newest = None
        for contract in self.ledger.all_contracts():
            if contract.template is not Template.LICENSE or contract.is_active:
                continue
            payload: License = contract.payload
            if (
                payload.license_id == license_id
                and payload.copyright_owner_id == co
                and payload.model_owner_id == ao
            ):
                newest = contract
        return newest

    # -- training notifications -------------------------------------------

    def notify_model_trained(self, ao: str, model_id: str) -> list[NotificationEvent]:
        """One event per distinct copyright owner whose license over the
        model's data opts into training notifications."""
        licenses = self._engine.get_model_licenses(ao, model_id)
        owners = sorted(
            {
                license.copyright_owner_id
                for license in licenses
                if license.copyright_owner_id != PUBLIC_DOMAIN
                and license.extensions.get(NOTIFY_ON_TRAIN_KEY) == "true"
            }
        )
        return [
            self._emit(EventKind.MODEL_TRAINED, sender=ao, recipient=co, subject=model_id)
            for co in owners
        ]


def _agreement_from_terms(terms: Mapping[str, Any]) -> LicenseAgreement:
    return LicenseAgreement(
        agreement_id=terms.get("id") or terms["licenseId"],
        scope=terms["scope"],
        copyright_owner_id=terms["copyrightOwnerId"],
        model_owner_id=terms["modelOwnerId"],
        valid_from=parse_instant(terms["validFrom"]),
        type_id=terms["typeId"],
        dataset_list=tuple(terms.get("datasetList", ())),
        extensions=FrozenMap(terms.get("extensions", {})),
    )
