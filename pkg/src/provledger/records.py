"""Contract payload templates and their linkage/scope rules.

Four payload templates live on the ledger: dataset metadata, bilaterally
signed licenses, single-signed license agreements awaiting acceptance,
and model metadata.  Payloads are immutable value objects; "updating" a
record on the append-only ledger means archiving the old contract and
creating a successor with a changed payload.
"""

from __future__ import annotations

from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from . import crypto

PUBLIC_DOMAIN = "public-domain"


class FrozenMap(Mapping):
    """Immutable, hashable string map for open attribute bags."""

    __slots__ = ("_items",)

    def __init__(self, items: Mapping[str, str] | None = None):
        pairs = tuple(sorted((str(k), str(v)) for k, v in (items or {}).items()))
        object.__setattr__(self, "_items", pairs)

    def __getitem__(self, key: str) -> str:
        for k, v in self._items:
            if k == key:
                return v
        raise KeyError(key)

    def __iter__(self) -> Iterator[str]:
        return (k for k, _ in self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __hash__(self) -> int:
        return hash(self._items)

    def __repr__(self) -> str:
        return f"FrozenMap({dict(self._items)!r})"

    def to_dict(self) -> dict[str, str]:
        return dict(self._items)


class Template(str, Enum):
    DATASET_META = "DatasetMeta"
    LICENSE = "License"
    LICENSE_AGREEMENT = "LicenseAgreement"
    MODEL_META = "ModelMeta"


@dataclass(frozen=True)
class Signature:
    """A party's Ed25519 signature over ``payload_digest || nonce``."""

    signer: str
    payload_digest: bytes
    nonce: bytes
    signature: bytes

    def to_dict(self) -> dict[str, str]:
        return {
            "signer": self.signer,
            "payload_digest": self.payload_digest.hex(),
            "nonce": self.nonce.hex(),
            "signature": self.signature.hex(),
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, str]) -> Signature:
        return cls(
            signer=doc["signer"],
            payload_digest=bytes.fromhex(doc["payload_digest"]),
            nonce=bytes.fromhex(doc["nonce"]),
            signature=bytes.fromhex(doc["signature"]),
        )


# ---------------------------------------------------------------------------
# scope semantics
# ---------------------------------------------------------------------------


def scope_covers(scope: str, source_url: str) -> bool:
    """A scope is a URL-path prefix; it covers a URL iff it is a
    segment-aligned prefix.  The empty scope covers everything (the
    catch-all used for public-domain content)."""
    if scope == "":
        return True
    trimmed = scope.rstrip("/")
    if source_url == trimmed:
        return True
    return source_url.startswith(trimmed + "/")


def scopes_intersect(a: str, b: str) -> bool:
    """Prefix scopes intersect iff one covers the other's root."""
    return scope_covers(a, b.rstrip("/")) or scope_covers(b, a.rstrip("/"))


# ---------------------------------------------------------------------------
# payload templates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DatasetMeta:
    dataset_id: str
    source_url: str
    copyright_owner_id: str
    model_owner_id: str
    content_hash: bytes
    license_id: str | None = None
    model_list: tuple[str, ...] = ()

    @property
    def template(self) -> Template:
        return Template.DATASET_META

    def signatory_ids(self) -> frozenset[str]:
        return frozenset({self.model_owner_id})

    def default_observers(self) -> frozenset[str]:
        return frozenset()

    def key(self) -> tuple[str, str]:
        return (self.model_owner_id, self.dataset_id)

    def to_dict(self) -> dict[str, Any]:
        return {
            "datasetId": self.dataset_id,
            "sourceUrl": self.source_url,
            "copyrightOwnerId": self.copyright_owner_id,
            "modelOwnerId": self.model_owner_id,
            "contentHash": self.content_hash.hex(),
            "licenseId": self.license_id,
            "modelList": list(self.model_list),
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> DatasetMeta:
        return cls(
            dataset_id=doc["datasetId"],
            source_url=doc["sourceUrl"],
            copyright_owner_id=doc["copyrightOwnerId"],
            model_owner_id=doc["modelOwnerId"],
            content_hash=bytes.fromhex(doc["contentHash"]),
            license_id=doc.get("licenseId"),
            model_list=tuple(doc.get("modelList", ())),
        )


@dataclass(frozen=True)
class License:
    license_id: str
    scope: str
    copyright_owner_id: str
    model_owner_id: str
    valid_from: int
    type_id: str
    copyright_owner_signature: Signature
    model_owner_signature: Signature
    dataset_list: tuple[str, ...] = ()
    extensions: FrozenMap = field(default_factory=FrozenMap)

    @property
    def template(self) -> Template:
        return Template.LICENSE

    def signatory_ids(self) -> frozenset[str]:
        return frozenset({self.copyright_owner_id, self.model_owner_id})

    def default_observers(self) -> frozenset[str]:
        return frozenset()

    def key(self) -> tuple[str, str]:
        return (self.model_owner_id, self.license_id)

    def agreement_dict(self) -> dict[str, Any]:
        """The bilaterally signed substance of the license.  The covered
        dataset list is derived linkage within the agreed scope, so it
        stays outside the signed terms and can be re-threaded without
        fresh consent."""
        return {
            "licenseId": self.license_id,
            "scope": self.scope,
            "copyrightOwnerId": self.copyright_owner_id,
            "modelOwnerId": self.model_owner_id,
            "validFrom": self.valid_from,
            "typeId": self.type_id,
            "extensions": self.extensions.to_dict(),
        }

    def agreement_digest(self) -> bytes:
        return crypto.digest_of(self.agreement_dict())

    def to_dict(self) -> dict[str, Any]:
        doc = self.agreement_dict()
        doc["datasetList"] = list(self.dataset_list)
        doc["copyrightOwnerSignature"] = self.copyright_owner_signature.to_dict()
        doc["modelOwnerSignature"] = self.model_owner_signature.to_dict()
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> License:
        return cls(
            license_id=doc["licenseId"],
            scope=doc["scope"],
            copyright_owner_id=doc["copyrightOwnerId"],
            model_owner_id=doc["modelOwnerId"],
            valid_from=int(doc["validFrom"]),
            type_id=doc["typeId"],
            copyright_owner_signature=Signature.from_dict(doc["copyrightOwnerSignature"]),
            model_owner_signature=Signature.from_dict(doc["modelOwnerSignature"]),
            dataset_list=tuple(doc.get("datasetList", ())),
            extensions=FrozenMap(doc.get("extensions", {})),
        )


@dataclass(frozen=True)
class LicenseAgreement:
    """Single-signed proposal; its ``agreement_id`` becomes the license id
    once the designated model owner accepts."""

    agreement_id: str
    scope: str
    copyright_owner_id: str
    model_owner_id: str
    valid_from: int
    type_id: str
    dataset_list: tuple[str, ...] = ()
    extensions: FrozenMap = field(default_factory=FrozenMap)

    @property
    def template(self) -> Template:
        return Template.LICENSE_AGREEMENT

    def signatory_ids(self) -> frozenset[str]:
        return frozenset({self.copyright_owner_id})

    def default_observers(self) -> frozenset[str]:
        # the counterparty must see the proposal to accept it
        return frozenset({self.model_owner_id})

    def key(self) -> tuple[str, str]:
        return (self.copyright_owner_id, self.agreement_id)

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.agreement_id,
            "scope": self.scope,
            "copyrightOwnerId": self.copyright_owner_id,
            "modelOwnerId": self.model_owner_id,
            "validFrom": self.valid_from,
            "typeId": self.type_id,
            "datasetList": list(self.dataset_list),
            "extensions": self.extensions.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> LicenseAgreement:
        return cls(
            agreement_id=doc["id"],
            scope=doc["scope"],
            copyright_owner_id=doc["copyrightOwnerId"],
            model_owner_id=doc["modelOwnerId"],
            valid_from=int(doc["validFrom"]),
            type_id=doc["typeId"],
            dataset_list=tuple(doc.get("datasetList", ())),
            extensions=FrozenMap(doc.get("extensions", {})),
        )


@dataclass(frozen=True)
class ModelMeta:
    model_id: str
    model_owner_id: str
    content_hash: bytes
    dataset_list: tuple[str, ...] = ()
    source_model_id: str | None = None
    child_model_list: tuple[str, ...] = ()
    hyperparams: FrozenMap = field(default_factory=FrozenMap)

    @property
    def template(self) -> Template:
        return Template.MODEL_META

    def signatory_ids(self) -> frozenset[str]:
        return frozenset({self.model_owner_id})

    def default_observers(self) -> frozenset[str]:
        return frozenset()

    def key(self) -> tuple[str, str]:
        return (self.model_owner_id, self.model_id)

    def to_dict(self) -> dict[str, Any]:
        return {
            "modelId": self.model_id,
            "modelOwnerId": self.model_owner_id,
            "contentHash": self.content_hash.hex(),
            "datasetList": list(self.dataset_list),
            "sourceModelId": self.source_model_id,
            "childModelList": list(self.child_model_list),
            "hyperparams": self.hyperparams.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> ModelMeta:
        return cls(
            model_id=doc["modelId"],
            model_owner_id=doc["modelOwnerId"],
            content_hash=bytes.fromhex(doc["contentHash"]),
            dataset_list=tuple(doc.get("datasetList", ())),
            source_model_id=doc.get("sourceModelId"),
            child_model_list=tuple(doc.get("childModelList", ())),
            hyperparams=FrozenMap(doc.get("hyperparams", {})),
        )


Payload = DatasetMeta | License | LicenseAgreement | ModelMeta

_TEMPLATE_TYPES: dict[Template, type] = {
    Template.DATASET_META: DatasetMeta,
    Template.LICENSE: License,
    Template.LICENSE_AGREEMENT: LicenseAgreement,
    Template.MODEL_META: ModelMeta,
}


def payload_from_dict(template: Template, doc: Mapping[str, Any]) -> Payload:
    return _TEMPLATE_TYPES[template].from_dict(doc)
