"""License validity checking.

A checker registry dispatches on a license's ``type_id`` to a
type-specific predicate.  Two checkers are always installed:
``public-domain`` (always valid) and ``time-bound`` (inclusive
validity window).  Checkers are pure functions of (license, env) so
they can run from any number of concurrent query workers.

Timestamps are integer seconds since the epoch internally and
ISO-8601 instants at interfaces (fixtures, extension values, CLI).
"""

from __future__ import annotations

from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .errors import DuplicateType, UnknownLicenseType
from .records import PUBLIC_DOMAIN, FrozenMap, License

VALID_UNTIL_KEY = "validUntil"
TIME_BOUND = "time-bound"


def parse_instant(value: str | int) -> int:
    """ISO-8601 instant (or raw integer seconds) to epoch seconds."""
    if isinstance(value, int):
        return value
    text = value.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def format_instant(seconds: int) -> str:
    return (
        datetime.fromtimestamp(seconds, tz=timezone.utc)
        .isoformat()
        .replace("+00:00", "Z")
    )


@dataclass(frozen=True)
class EnvVars:
    """Environment the validity of a license is judged against."""

    current_time: int
    operating_location: str | None = None
    extras: FrozenMap = field(default_factory=FrozenMap)


@dataclass(frozen=True)
class ValidityResult:
    valid: bool
    reason: str | None = None

    @classmethod
    def ok(cls) -> ValidityResult:
        return cls(True)

    @classmethod
    def fail(cls, reason: str) -> ValidityResult:
        return cls(False, reason)


Checker = Callable[[License, EnvVars], ValidityResult]


def check_time_bound(valid_from: int, valid_until: int | None, now: int) -> bool:
    """Inclusive on both ends; an absent end means open-ended."""
    starts_ok = now >= valid_from
    ends_ok = valid_until is None or now <= valid_until
    return starts_ok and ends_ok


def _public_domain_checker(license: License, env: EnvVars) -> ValidityResult:
    return ValidityResult.ok()


def _time_bound_checker(license: License, env: EnvVars) -> ValidityResult:
    until_raw = license.extensions.get(VALID_UNTIL_KEY)
    valid_until = parse_instant(until_raw) if until_raw is not None else None
    if env.current_time < license.valid_from:
        return ValidityResult.fail("not yet effective")
    if valid_until is not None and env.current_time > valid_until:
        return ValidityResult.fail("expired")
    return ValidityResult.ok()


class CheckerRegistry:
    """Maps license type ids to validity checkers.

    The two built-in entries are present on every registry and cannot
    be replaced; unknown type ids are a dispatch error, never a silent
    pass.
    """

    def __init__(self) -> None:
        self._checkers: dict[str, Checker] = {
            PUBLIC_DOMAIN: _public_domain_checker,
            TIME_BOUND: _time_bound_checker,
        }

    def register(self, type_id: str, checker: Checker) -> None:
        if type_id in self._checkers:
            raise DuplicateType(type_id)
        self._checkers[type_id] = checker

    def known_types(self) -> tuple[str, ...]:
        return tuple(sorted(self._checkers))

    def check(self, license: License, env: EnvVars) -> ValidityResult:
        """Dispatch on type id and run the type's checker."""
        checker = self._checkers.get(license.type_id)
        if checker is None:
            raise UnknownLicenseType(license.type_id)
        return checker(license, env)


def env_at(current_time: str | int, location: str | None = None,
           extras: Mapping[str, str] | None = None) -> EnvVars:
    return EnvVars(
        current_time=parse_instant(current_time),
        operating_location=location,
        extras=FrozenMap(extras or {}),
    )
