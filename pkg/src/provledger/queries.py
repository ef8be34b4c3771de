"""Lineage and license queries over the ledger, three ways.

One shared set of read operations runs against three interchangeable
engines that differ only in how they resolve records:

* ``indexed``    — primary-key and (copyright-owner, model-owner)
                   indexes maintained by the ledger; targeted traversal.
* ``flat``       — no indexes; every lookup scans the relevant
                   registry.  A dataset record is treated as a
                   denormalized flat entry, so following its stored
                   license reference dereferences one record rather
                   than rescanning the license registry.
* ``fullgraph``  — adjacency resolved through keys, but the
                   dataset-to-license mapping is rebuilt per query by
                   scanning every visible license.

All engines must return set-equal results; the baselines double as
correctness oracles for the indexed engine.  Each engine handle keeps
operation counters (records touched, edges traversed, index lookups)
for the last query, which are the primary complexity signal: wall
time is hardware noise, counters are not.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import LineageCycle, UnknownDataset, UnknownLicense, UnknownModel
from .ledger import ContractId, Ledger
from .records import DatasetMeta, License, ModelMeta, Template, scope_covers
from .validity import CheckerRegistry, EnvVars, ValidityResult


@dataclass
class QueryStats:
    records_touched: int = 0
    edges_traversed: int = 0
    index_lookups: int = 0

    def reset(self) -> None:
        self.records_touched = 0
        self.edges_traversed = 0
        self.index_lookups = 0

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.records_touched, self.edges_traversed, self.index_lookups)


class EngineKind(str, Enum):
    INDEXED = "indexed"
    FLAT = "flat"
    FULL_GRAPH = "fullgraph"


class _EngineBase:
    """Shared traversal logic; subclasses provide record resolution."""

    kind: EngineKind

    def __init__(self, ledger: Ledger, checkers: CheckerRegistry):
        self._ledger = ledger
        self._checkers = checkers
        self.stats = QueryStats()
        self.last_visited_datasets: frozenset[str] = frozenset()
        self.last_exclusions: dict[str, str] = {}

    # -- resolution primitives (engine-specific) --------------------------

    def _find_dataset(self, requester: str, dataset_id: str) -> DatasetMeta | None:
        raise NotImplementedError

    def _find_model(self, requester: str, model_id: str) -> ModelMeta | None:
        raise NotImplementedError

    def _entry_license(self, requester: str, license_id: str) -> License | None:
        """Resolve a license used as the entry point of a query."""
        raise NotImplementedError

    def _deref_license(self, requester: str, dataset: DatasetMeta) -> License | None:
        """Follow a dataset's stored license reference."""
        raise NotImplementedError

    def _search_license(self, requester: str, dataset: DatasetMeta) -> License | None:
        """Find a license for an unbound dataset by copyright owner and
        scope; the most specific (longest) covering scope wins."""
        raise NotImplementedError

    def _begin_query(self, requester: str) -> None:
        pass

    def _start(self, requester: str) -> None:
        self.stats.reset()
        self.last_exclusions = {}
        self._begin_query(requester)

    # -- shared operation bodies -------------------------------------------

    def query_stats(self) -> QueryStats:
        """Counters for the last operation run on this handle."""
        return self.stats

    def _license_of(self, requester: str, dataset: DatasetMeta) -> License | None:
        if dataset.license_id is not None:
            license = self._deref_license(requester, dataset)
        else:
            license = self._search_license(requester, dataset)
        if license is not None:
            self.stats.edges_traversed += 1
        return license

    def get_dataset_license(self, requester: str, dataset_id: str) -> License | None:
        self._start(requester)
        dataset = self._find_dataset(requester, dataset_id)
        if dataset is None:
            raise UnknownDataset(dataset_id)
        return self._license_of(requester, dataset)

    def _upstream_chain(self, requester: str, model_id: str) -> list[ModelMeta]:
        model = self._find_model(requester, model_id)
        if model is None:
            raise UnknownModel(model_id)
        chain = [model]
        visited = {model.model_id}
        while model.source_model_id is not None:
            self.stats.edges_traversed += 1
            if model.source_model_id in visited:
                raise LineageCycle(model.source_model_id)
            model = self._find_model(requester, model.source_model_id)
            if model is None:
                raise UnknownModel(chain[-1].source_model_id)
            visited.add(model.model_id)
            chain.append(model)
        return chain

    def _chain_datasets(
        self, requester: str, chain: list[ModelMeta]
    ) -> dict[str, DatasetMeta]:
        """Datasets across a model chain, deduplicated, in visit order."""
        seen: dict[str, DatasetMeta] = {}
        for model in chain:
            self.stats.edges_traversed += len(model.dataset_list)
            for dataset in self._datasets_of_model(requester, model):
                if dataset.dataset_id not in seen:
                    seen[dataset.dataset_id] = dataset
        return seen

    def _datasets_of_model(
        self, requester: str, model: ModelMeta
    ) -> list[DatasetMeta]:
        found = []
        for dataset_id in model.dataset_list:
            dataset = self._find_dataset(requester, dataset_id)
            if dataset is not None:
                found.append(dataset)
        return found

    def get_model_datasets(self, requester: str, model_id: str) -> set[str]:
        self._start(requester)
        chain = self._upstream_chain(requester, model_id)
        datasets = self._chain_datasets(requester, chain)
        self.last_visited_datasets = frozenset(datasets)
        return set(datasets)

    def get_model_licenses(self, requester: str, model_id: str) -> set[License]:
        self._start(requester)
        chain = self._upstream_chain(requester, model_id)
        datasets = self._chain_datasets(requester, chain)
        self.last_visited_datasets = frozenset(datasets)
        licenses: dict[str, License] = {}
        for dataset in datasets.values():
            license = self._license_of(requester, dataset)
            if license is not None and license.license_id not in licenses:
                licenses[license.license_id] = license
        return set(licenses.values())

    def check_license_validity(
        self, requester: str, license_id: str, env: EnvVars
    ) -> ValidityResult:
        self._start(requester)
        license = self._entry_license(requester, license_id)
        if license is None:
            raise UnknownLicense(license_id)
        self.stats.index_lookups += 1  # type-id dispatch
        return self._checkers.check(license, env)

    def check_and_filter_licensed(
        self, requester: str, dataset_ids: list[str], env: EnvVars
    ) -> set[str]:
        """Subset of the given datasets whose license exists and is
        currently valid; failures are excluded, never raised, with the
        reason kept in ``last_exclusions``."""
        self._start(requester)
        licensed: set[str] = set()
        exclusions: dict[str, str] = {}
        for dataset_id in dataset_ids:
            dataset = self._find_dataset(requester, dataset_id)
            if dataset is None:
                exclusions[dataset_id] = "unknown dataset"
                continue
            license = self._license_of(requester, dataset)
            if license is None:
                exclusions[dataset_id] = "no covering license"
                continue
            self.stats.index_lookups += 1  # type-id dispatch
            result = self._checkers.check(license, env)
            if result.valid:
                licensed.add(dataset_id)
            else:
                exclusions[dataset_id] = result.reason or "invalid"
        self.last_exclusions = exclusions
        return licensed

    def get_datasets_by_license(self, requester: str, license_id: str) -> set[str]:
        self._start(requester)
        license = self._entry_license(requester, license_id)
        if license is None:
            raise UnknownLicense(license_id)
        self.stats.edges_traversed += len(license.dataset_list)
        return set(license.dataset_list)

    def get_models_by_license(self, requester: str, license_id: str) -> set[ModelMeta]:
        """Models trained directly on the license's datasets plus every
        descendant reached through child links."""
        self._start(requester)
        license = self._entry_license(requester, license_id)
        if license is None:
            raise UnknownLicense(license_id)
        collected: dict[str, ModelMeta] = {}
        frontier: list[ModelMeta] = []
        self.stats.edges_traversed += len(license.dataset_list)
        for dataset_id in license.dataset_list:
            dataset = self._find_dataset(requester, dataset_id)
            if dataset is None:
                continue
            self.stats.edges_traversed += len(dataset.model_list)
            for model_id in dataset.model_list:
                if model_id in collected:
                    continue
                model = self._find_model(requester, model_id)
                if model is not None:
                    collected[model_id] = model
                    frontier.append(model)
        while frontier:
            model = frontier.pop(0)
            self.stats.edges_traversed += len(model.child_model_list)
            for child_id in model.child_model_list:
                if child_id in collected:
                    continue
                child = self._find_model(requester, child_id)
                if child is not None:
                    collected[child_id] = child
                    frontier.append(child)
        return set(collected.values())


class IndexedEngine(_EngineBase):
    """Primary-key resolution everywhere; the targeted-traversal design."""

    kind = EngineKind.INDEXED

    def _lookup(self, requester: str, template: Template, key_id: str):
        self.stats.index_lookups += 1
        cid = self._ledger.lookup_by_key(requester, template, (requester, key_id))
        if cid is None:
            return None
        self.stats.records_touched += 1
        return self._ledger.read(requester, cid).payload

    def _find_dataset(self, requester, dataset_id):
        return self._lookup(requester, Template.DATASET_META, dataset_id)

    def _find_model(self, requester, model_id):
        return self._lookup(requester, Template.MODEL_META, model_id)

    def _entry_license(self, requester, license_id):
        return self._lookup(requester, Template.LICENSE, license_id)

    def _deref_license(self, requester, dataset):
        return self._lookup(requester, Template.LICENSE, dataset.license_id)

    def _search_license(self, requester, dataset):
        self.stats.index_lookups += 1
        candidates: list[License] = []
        for cid_value in self._ledger.licenses_for_pair(
            dataset.copyright_owner_id, requester
        ):
            contract = self._ledger.read(requester, ContractId(cid_value))
            self.stats.records_touched += 1
            license = contract.payload
            if scope_covers(license.scope, dataset.source_url):
                candidates.append(license)
        return _most_specific(candidates)


class FlatEngine(_EngineBase):
    """Sequential scans over party-visible registries."""

    kind = EngineKind.FLAT

    def _scan(self, requester: str, template: Template, wanted_id: str, id_of):
        match = None
        for contract in self._ledger.active_contracts(template, visible_to=requester):
            self.stats.records_touched += 1
            if id_of(contract.payload) == wanted_id:
                match = contract.payload
        return match

    def _find_dataset(self, requester, dataset_id):
        return self._scan(
            requester, Template.DATASET_META, dataset_id, lambda p: p.dataset_id
        )

    def _find_model(self, requester, model_id):
        return self._scan(
            requester, Template.MODEL_META, model_id, lambda p: p.model_id
        )

    def _entry_license(self, requester, license_id):
        return self._scan(
            requester, Template.LICENSE, license_id, lambda p: p.license_id
        )

    def _deref_license(self, requester, dataset):
        # flat entries are denormalized: the stored reference resolves to
        # one record without a registry rescan
        cid = self._ledger.lookup_by_key(
            requester, Template.LICENSE, (requester, dataset.license_id)
        )
        if cid is None:
            return None
        self.stats.records_touched += 1
        return self._ledger.read(requester, cid).payload

    def _search_license(self, requester, dataset):
        candidates: list[License] = []
        for contract in self._ledger.active_contracts(
            Template.LICENSE, visible_to=requester
        ):
            self.stats.records_touched += 1
            license = contract.payload
            if license.copyright_owner_id != dataset.copyright_owner_id:
                continue
            if scope_covers(license.scope, dataset.source_url):
                candidates.append(license)
        return _most_specific(candidates)

    def _datasets_of_model(self, requester, model):
        # one registry scan per model gathers all of its datasets
        wanted = set(model.dataset_list)
        found: dict[str, DatasetMeta] = {}
        for contract in self._ledger.active_contracts(
            Template.DATASET_META, visible_to=requester
        ):
            self.stats.records_touched += 1
            if contract.payload.dataset_id in wanted:
                found[contract.payload.dataset_id] = contract.payload
        return [found[d] for d in model.dataset_list if d in found]


class FullGraphEngine(_EngineBase):
    """Adjacency via keys, but no stored dataset-to-license mapping: it
    is rebuilt per query by scanning every visible license."""

    kind = EngineKind.FULL_GRAPH

    def __init__(self, ledger: Ledger, checkers: CheckerRegistry):
        super().__init__(ledger, checkers)
        self._license_map: dict[str, License] = {}

    def _begin_query(self, requester: str) -> None:
        self._license_map = {}
        for contract in self._ledger.active_contracts(
            Template.LICENSE, visible_to=requester
        ):
            self.stats.records_touched += 1
            license = contract.payload
            self.stats.edges_traversed += len(license.dataset_list)
            for dataset_id in license.dataset_list:
                self._license_map[dataset_id] = license

    def _lookup(self, requester: str, template: Template, key_id: str):
        self.stats.index_lookups += 1
        cid = self._ledger.lookup_by_key(requester, template, (requester, key_id))
        if cid is None:
            return None
        self.stats.records_touched += 1
        return self._ledger.read(requester, cid).payload

    def _find_dataset(self, requester, dataset_id):
        return self._lookup(requester, Template.DATASET_META, dataset_id)

    def _find_model(self, requester, model_id):
        return self._lookup(requester, Template.MODEL_META, model_id)

    def _entry_license(self, requester, license_id):
        return self._lookup(requester, Template.LICENSE, license_id)

    def _deref_license(self, requester, dataset):
        license = self._license_map.get(dataset.dataset_id)
        if license is not None:
            self.stats.records_touched += 1
        return license

    def _search_license(self, requester, dataset):
        candidates: list[License] = []
        for contract in self._ledger.active_contracts(
            Template.LICENSE, visible_to=requester
        ):
            self.stats.records_touched += 1
            license = contract.payload
            if license.copyright_owner_id != dataset.copyright_owner_id:
                continue
            if scope_covers(license.scope, dataset.source_url):
                candidates.append(license)
        return _most_specific(candidates)


def _most_specific(candidates: list[License]) -> License | None:
    if not candidates:
        return None
    return max(candidates, key=lambda l: (len(l.scope), l.license_id))


_ENGINE_TYPES: dict[EngineKind, type[_EngineBase]] = {
    EngineKind.INDEXED: IndexedEngine,
    EngineKind.FLAT: FlatEngine,
    EngineKind.FULL_GRAPH: FullGraphEngine,
}


def make_engine(
    kind: EngineKind | str, ledger: Ledger, checkers: CheckerRegistry
) -> _EngineBase:
    """One handle per worker: stats are confined to the handle."""
    return _ENGINE_TYPES[EngineKind(kind)](ledger, checkers)
