"""Dataset, license, and model registries with bidirectional links.

Registration operations are pure transaction builders on top of the
ledger's single commit path.  Every link is stored on both ends
(dataset <-> license, dataset <-> model, model <-> model) and updated
atomically, so a full rescan of the active contracts must always
re-derive exactly the stored edges; ``check_invariants`` does that
rescan and is run by tests and the snapshot verifier.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .errors import (
    CycleDetected,
    DuplicateDataset,
    DuplicateModel,
    InvalidLicense,
    NotVisible,
    ScopeMismatch,
    UnknownParty,
    UnknownSource,
    UnlicensedDataset,
)
from .ledger import (
    ContractId,
    CreateAction,
    Ledger,
    LedgerContract,
    ReplaceAction,
)
from .queries import IndexedEngine
from .records import (
    PUBLIC_DOMAIN,
    DatasetMeta,
    FrozenMap,
    License,
    ModelMeta,
    Template,
    scope_covers,
    scopes_intersect,
)
from .validity import CheckerRegistry, EnvVars


class RegistryService:
    def __init__(self, ledger: Ledger, checkers: CheckerRegistry):
        self.ledger = ledger
        self.checkers = checkers
        self._engine = IndexedEngine(ledger, checkers)

    # -- resolution helpers --------------------------------------------------

    def dataset_contract(self, ao: str, dataset_id: str) -> LedgerContract | None:
        cid = self.ledger.lookup_by_key(ao, Template.DATASET_META, (ao, dataset_id))
        return None if cid is None else self.ledger.read(ao, cid)

    def license_contract(self, ao: str, license_id: str) -> LedgerContract | None:
        cid = self.ledger.lookup_by_key(ao, Template.LICENSE, (ao, license_id))
        return None if cid is None else self.ledger.read(ao, cid)

    def model_contract(self, ao: str, model_id: str) -> LedgerContract | None:
        cid = self.ledger.lookup_by_key(ao, Template.MODEL_META, (ao, model_id))
        return None if cid is None else self.ledger.read(ao, cid)

    # -- operations ------------------------------------------------------------

    def register_dataset(
        self,
        ao: str,
        dataset_id: str,
        source_url: str,
        copyright_owner_id: str,
        content_hash: bytes,
    ) -> ContractId:
        if not self.ledger.has_party(copyright_owner_id):
            raise UnknownParty(copyright_owner_id)
        if self.dataset_contract(ao, dataset_id) is not None:
            raise DuplicateDataset(dataset_id)
        payload = DatasetMeta(
            dataset_id=dataset_id,
            source_url=source_url,
            copyright_owner_id=copyright_owner_id,
            model_owner_id=ao,
            content_hash=content_hash,
        )
        tx = self.ledger.build_signed_tx(ao, [CreateAction(payload)])
        return self.ledger.submit(tx)[0]

    def bind_license(
        self, ao: str, dataset_id: str, license_id: str, env: EnvVars
    ) -> list[ContractId]:
        """Atomically point the dataset at the license and append the
        dataset to the license's covered list."""
        dataset_contract = self.dataset_contract(ao, dataset_id)
        if dataset_contract is None:
            raise NotVisible(dataset_id)
        license_contract = self.license_contract(ao, license_id)
        if license_contract is None:
            raise NotVisible(license_id)
        dataset: DatasetMeta = dataset_contract.payload
        license: License = license_contract.payload

        if license.copyright_owner_id != dataset.copyright_owner_id:
            raise ScopeMismatch(
                f"license {license_id} is granted by {license.copyright_owner_id}, "
                f"not {dataset.copyright_owner_id}"
            )
        if not scope_covers(license.scope, dataset.source_url):
            raise ScopeMismatch(f"{dataset.source_url} outside scope {license.scope!r}")
        verdict = self.checkers.check(license, env)
        if not verdict.valid:
            raise InvalidLicense(f"{license_id}: {verdict.reason}")
        if dataset.license_id == license_id:
            return []

        writes = [
            ReplaceAction(
                dataset_contract.id,
                dataclasses.replace(dataset, license_id=license_id),
            ),
            ReplaceAction(
                license_contract.id,
                dataclasses.replace(
                    license, dataset_list=license.dataset_list + (dataset_id,)
                ),
            ),
        ]
        # one license per dataset: a re-bind replaces, so the previous
        # license must stop listing the dataset in the same transaction
        if dataset.license_id is not None:
            previous = self.license_contract(ao, dataset.license_id)
            if previous is not None:
                old_license: License = previous.payload
                writes.append(
                    ReplaceAction(
                        previous.id,
                        dataclasses.replace(
                            old_license,
                            dataset_list=tuple(
                                d for d in old_license.dataset_list if d != dataset_id
                            ),
                        ),
                    )
                )
        return self.ledger.submit(self.ledger.build_signed_tx(ao, writes))

    def register_model(
        self,
        ao: str,
        model_id: str,
        dataset_ids: list[str],
        env: EnvVars,
        source_model_id: str | None = None,
        hyperparams: dict[str, str] | None = None,
        content_hash: bytes = b"",
    ) -> ContractId:
        """Record a trained model and thread it into the lineage graph:
        every training dataset gains the model in its model list and a
        source model, when given, gains it as a child."""
        if self.model_contract(ao, model_id) is not None:
            raise DuplicateModel(model_id)

        dataset_contracts: list[LedgerContract] = []
        for dataset_id in dataset_ids:
            contract = self.dataset_contract(ao, dataset_id)
            if contract is None:
                raise UnlicensedDataset(f"{dataset_id}: unknown dataset")
            dataset_contracts.append(contract)

        unlicensed = [
            d
            for d in dataset_ids
            if d not in self._engine.check_and_filter_licensed(ao, dataset_ids, env)
        ]
        if unlicensed:
            raise UnlicensedDataset(", ".join(sorted(unlicensed)))

        source_contract: LedgerContract | None = None
        if source_model_id is not None:
            source_contract = self.model_contract(ao, source_model_id)
            if source_contract is None:
                raise UnknownSource(source_model_id)
            self._assert_acyclic_source(ao, model_id, source_model_id)

        payload = ModelMeta(
            model_id=model_id,
            model_owner_id=ao,
            content_hash=content_hash,
            dataset_list=tuple(dataset_ids),
            source_model_id=source_model_id,
            hyperparams=FrozenMap(hyperparams or {}),
        )
        writes: list = [CreateAction(payload)]
        for contract in dataset_contracts:
            dataset: DatasetMeta = contract.payload
            writes.append(
                ReplaceAction(
                    contract.id,
                    dataclasses.replace(
                        dataset, model_list=dataset.model_list + (model_id,)
                    ),
                )
            )
        if source_contract is not None:
            source: ModelMeta = source_contract.payload
            writes.append(
                ReplaceAction(
                    source_contract.id,
                    dataclasses.replace(
                        source, child_model_list=source.child_model_list + (model_id,)
                    ),
                )
            )
        return self.ledger.submit(self.ledger.build_signed_tx(ao, writes))[0]

    def _assert_acyclic_source(self, ao: str, model_id: str, source_id: str) -> None:
        # a fresh model id cannot close a cycle, but walk anyway: defense
        # against corrupted fixtures
        seen = {model_id}
        current: str | None = source_id
        while current is not None:
            if current in seen:
                raise CycleDetected(current)
            seen.add(current)
            contract = self.model_contract(ao, current)
            if contract is None:
                raise UnknownSource(current)
            current = contract.payload.source_model_id


# ---------------------------------------------------------------------------
# global invariant oracle
# ---------------------------------------------------------------------------


@dataclass
class InvariantReport:
    issues: list[str]

    @property
    def ok(self) -> bool:
        return not self.issues


def check_invariants(ledger: Ledger) -> InvariantReport:
    """Re-derive every link from a full scan of active contracts and
    compare with the stored bidirectional edges; also check lineage
    acyclicity and per-pair scope disjointness."""
    issues: list[str] = []
    datasets: dict[tuple[str, str], DatasetMeta] = {}
    licenses: dict[tuple[str, str], License] = {}
    models: dict[tuple[str, str], ModelMeta] = {}
    for contract in ledger.active_contracts():
        payload = contract.payload
        if isinstance(payload, DatasetMeta):
            datasets[(payload.model_owner_id, payload.dataset_id)] = payload
        elif isinstance(payload, License):
            licenses[(payload.model_owner_id, payload.license_id)] = payload
        elif isinstance(payload, ModelMeta):
            models[(payload.model_owner_id, payload.model_id)] = payload

    # dataset -> license against license -> dataset
    for (ao, dataset_id), dataset in datasets.items():
        if dataset.license_id is None:
            continue
        license = licenses.get((ao, dataset.license_id))
        if license is None:
            issues.append(f"{dataset_id}: licenseId {dataset.license_id} not active")
        elif dataset_id not in license.dataset_list:
            issues.append(
                f"{dataset_id}: not listed by license {dataset.license_id}"
            )
    for (ao, license_id), license in licenses.items():
        for dataset_id in license.dataset_list:
            dataset = datasets.get((ao, dataset_id))
            if dataset is None:
                issues.append(f"{license_id}: lists unknown dataset {dataset_id}")
            elif dataset.license_id != license_id:
                issues.append(
                    f"{license_id}: lists {dataset_id} whose licenseId is "
                    f"{dataset.license_id}"
                )

    # dataset <-> model
    for (ao, dataset_id), dataset in datasets.items():
        for model_id in dataset.model_list:
            model = models.get((ao, model_id))
            if model is None:
                issues.append(f"{dataset_id}: lists unknown model {model_id}")
            elif dataset_id not in model.dataset_list:
                issues.append(f"{dataset_id}: not in model {model_id} dataset list")
    for (ao, model_id), model in models.items():
        for dataset_id in model.dataset_list:
            dataset = datasets.get((ao, dataset_id))
            if dataset is None:
                issues.append(f"{model_id}: trained on unknown dataset {dataset_id}")
            elif model_id not in dataset.model_list:
                issues.append(f"{model_id}: missing from {dataset_id} model list")

    # model <-> model mutual consistency
    for (ao, model_id), model in models.items():
        if model.source_model_id is not None:
            source = models.get((ao, model.source_model_id))
            if source is None:
                issues.append(f"{model_id}: unknown source {model.source_model_id}")
            elif model_id not in source.child_model_list:
                issues.append(
                    f"{model_id}: missing from {model.source_model_id} children"
                )
        for child_id in model.child_model_list:
            child = models.get((ao, child_id))
            if child is None:
                issues.append(f"{model_id}: unknown child {child_id}")
            elif child.source_model_id != model_id:
                issues.append(f"{model_id}: child {child_id} points elsewhere")

    issues.extend(_acyclicity_issues(models))
    issues.extend(_scope_issues(licenses))
    return InvariantReport(issues)


def _acyclicity_issues(models: dict[tuple[str, str], ModelMeta]) -> list[str]:
    issues = []
    for (ao, model_id), model in models.items():
        seen = {model_id}
        current = model.source_model_id
        while current is not None:
            if current in seen:
                issues.append(f"{model_id}: lineage cycle through {current}")
                break
            seen.add(current)
            upstream = models.get((ao, current))
            current = upstream.source_model_id if upstream else None
    return issues


def _scope_issues(licenses: dict[tuple[str, str], License]) -> list[str]:
    """Active scopes for a (CO, AO) pair must be pairwise disjoint; the
    public-domain catch-all (scope "") is exempt."""
    issues = []
    by_pair: dict[tuple[str, str], list[License]] = {}
    for license in licenses.values():
        if license.type_id == PUBLIC_DOMAIN:
            continue
        pair = (license.copyright_owner_id, license.model_owner_id)
        by_pair.setdefault(pair, []).append(license)
    for pair, group in by_pair.items():
        group.sort(key=lambda l: l.license_id)
        for i, first in enumerate(group):
            for second in group[i + 1 :]:
                if scopes_intersect(first.scope, second.scope):
                    issues.append(
                        f"{pair}: scopes intersect "
                        f"({first.license_id}, {second.license_id})"
                    )
    return issues
