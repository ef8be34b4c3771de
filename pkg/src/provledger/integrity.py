"""Content-addressed integrity binding and attack screening.

Datasets and models live off-ledger; their on-ledger records carry a
SHA-256 content digest so tampering is detectable by recomputation.
Screening classifies incoming transactions before they commit:
replayed nonces, tampered signatures, and provenance spoofs (an exact
content digest re-registered under a different owner) are rejected
deterministically.  Near-duplicate spoofs that would need perceptual
similarity thresholds are out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Union

from . import crypto
from .errors import AuthorizationError, ProvenanceSpoof, ReplayError
from .records import DatasetMeta, ModelMeta

if TYPE_CHECKING:
    from .ledger import Ledger, Transaction


@dataclass(frozen=True)
class ContentId:
    """Collision-resistant digest of canonical content bytes."""

    digest: bytes

    def hex(self) -> str:
        return self.digest.hex()


class AttackKind(str, Enum):
    PROVENANCE_SPOOF = "provenanceSpoof"
    SIGNATURE_TAMPER = "signatureTamper"
    SIGNATURE_REPLAY = "signatureReplay"
    CLEAN = "clean"


@dataclass(frozen=True)
class AttackVerdict:
    kind: AttackKind
    detail: str = ""


def compute_cid(content: bytes) -> ContentId:
    return ContentId(crypto.sha256(content))


def verify_binding(record: Union[DatasetMeta, ModelMeta], content: bytes) -> bool:
    """True iff the off-ledger bytes still match the on-ledger digest."""
    return compute_cid(content).digest == record.content_hash


def screen_request(ledger: "Ledger", tx: "Transaction") -> AttackVerdict:
    """Classify a transaction without committing it.

    Checks run cheapest-first: nonce replay, then signature
    verification, then duplicate-content screening.  A verdict other
    than ``clean`` means the request would be rejected with no ledger
    writes; ``clean`` only means no attack pattern was detected.
    """
    try:
        ledger.validate(tx)
    except ReplayError as exc:
        return AttackVerdict(AttackKind.SIGNATURE_REPLAY, str(exc))
    except AuthorizationError as exc:
        return AttackVerdict(AttackKind.SIGNATURE_TAMPER, str(exc))
    except ProvenanceSpoof as exc:
        return AttackVerdict(AttackKind.PROVENANCE_SPOOF, str(exc))
    except Exception:
        return AttackVerdict(AttackKind.CLEAN)
    return AttackVerdict(AttackKind.CLEAN)
