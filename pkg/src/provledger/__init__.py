"""provledger: a desk-scale provenance and copyright ledger for AI
training workflows.

Party-scoped immutable registries for datasets, licenses, and models;
bilateral license signing via propose-accept; pluggable license
validity checks; and indexed lineage queries whose complexity
contracts are verified against brute-force baselines.
"""

from .errors import LedgerError
from .integrity import AttackKind, AttackVerdict, compute_cid, screen_request, verify_binding
from .ledger import (
    ArchiveAction,
    ContractId,
    CreateAction,
    Ledger,
    LedgerContract,
    Party,
    ReplaceAction,
    Role,
    Transaction,
)
from .lifecycle import (
    Blacklist,
    ClmConnector,
    EventKind,
    InMemoryClmConnector,
    LifecycleService,
    NotificationEvent,
)
from .queries import EngineKind, QueryStats, make_engine
from .records import (
    PUBLIC_DOMAIN,
    DatasetMeta,
    License,
    LicenseAgreement,
    ModelMeta,
    Signature,
    Template,
)
from .registry import RegistryService, check_invariants
from .scenario import ScenarioParams, World, build_fixture, generate_scenario, new_world
from .validity import CheckerRegistry, EnvVars, ValidityResult, check_time_bound, env_at

__version__ = "0.1.0"

__all__ = [
    "ArchiveAction",
    "AttackKind",
    "AttackVerdict",
    "Blacklist",
    "CheckerRegistry",
    "ClmConnector",
    "ContractId",
    "CreateAction",
    "DatasetMeta",
    "EngineKind",
    "EnvVars",
    "EventKind",
    "InMemoryClmConnector",
    "Ledger",
    "LedgerContract",
    "LedgerError",
    "License",
    "LicenseAgreement",
    "LifecycleService",
    "ModelMeta",
    "NotificationEvent",
    "PUBLIC_DOMAIN",
    "Party",
    "QueryStats",
    "RegistryService",
    "ReplaceAction",
    "Role",
    "ScenarioParams",
    "Signature",
    "Template",
    "Transaction",
    "ValidityResult",
    "World",
    "build_fixture",
    "check_invariants",
    "check_time_bound",
    "compute_cid",
    "env_at",
    "generate_scenario",
    "make_engine",
    "new_world",
    "screen_request",
    "verify_binding",
]
