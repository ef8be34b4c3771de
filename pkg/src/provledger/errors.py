"""Exception hierarchy shared across the ledger, registries, and services."""

from __future__ import annotations


class LedgerError(Exception):
    """Base class for every error raised by this package."""


# -- ledger core ------------------------------------------------------------


class DuplicateParty(LedgerError):
    pass


class UnknownParty(LedgerError):
    pass


class AuthorizationError(LedgerError):
    """A required signature is missing, malformed, or fails verification."""


class StaleReference(LedgerError):
    """An action references an archived or never-issued contract."""


class ReplayError(LedgerError):
    """A signature nonce was already accepted for that signer."""


class DuplicateKey(LedgerError):
    """A create would collide with an active contract's primary key."""


class NotVisible(LedgerError):
    """Requester is neither signatory nor observer; shaped like absence."""


class NotFound(LedgerError):
    """The contract id was never issued by this ledger."""


class ProvenanceSpoof(LedgerError):
    """Content digest already registered under a different owner."""


# -- registries ---------------------------------------------------------------


class DuplicateDataset(LedgerError):
    pass


class DuplicateModel(LedgerError):
    pass


class ScopeMismatch(LedgerError):
    """The license does not cover the dataset's source URL."""


class ScopeConflict(LedgerError):
    """A new license scope intersects an active one for the same parties."""


class InvalidLicense(LedgerError):
    """The license failed its validity check."""


class UnlicensedDataset(LedgerError):
    pass


class UnknownSource(LedgerError):
    pass


class CycleDetected(LedgerError):
    pass


# -- validity checking --------------------------------------------------------


class UnknownLicenseType(LedgerError):
    pass


class DuplicateType(LedgerError):
    pass


# -- queries ------------------------------------------------------------------


class UnknownDataset(LedgerError):
    pass


class UnknownModel(LedgerError):
    pass


class UnknownLicense(LedgerError):
    pass


class LineageCycle(LedgerError):
    """Defensive: a lineage walk revisited a model."""


# -- lifecycle ----------------------------------------------------------------


class OwnerMismatch(LedgerError):
    pass


class ConnectorError(LedgerError):
    pass


class NotController(LedgerError):
    """Only the designated counterparty may accept an agreement."""


# -- benchmarking -------------------------------------------------------------


class InvalidParams(LedgerError):
    pass
