"""State environments: namespaced register keys and the left-biased overlay.

An environment is an immutable finite map from :class:`RegKey` to a value.
Undefined registers are simply absent. The concrete interpreter stores
integers; the communication analysis reuses the same container with bit-sets
as values for channel status registers.
"""

from __future__ import annotations

from collections.abc import Mapping
from typing import Any, Iterable, Iterator, NamedTuple, Union

MEM_SEP = "::"

# Reserved register names.
STATE = "state"
READY = "ready"
VALID = "valid"
DATA = "data"


class RegKey(NamedTuple):
    """``namespace`` is an instance name (str) or a channel number (int)."""

    namespace: Union[str, int]
    register: str

    def sort_key(self) -> tuple:
        ns = self.namespace
        kind, name = (0, ns) if isinstance(ns, int) else (1, 0)
        reg, _, idx = self.register.partition(MEM_SEP)
        return (kind, name, "" if kind == 0 else ns, reg, int(idx) if idx else -1)

    def __str__(self) -> str:
        return f"{self.namespace},{self.register}"


def mem_cell(bank: str, index: int) -> str:
    return f"{bank}{MEM_SEP}{index}"


def channel_key(channel: int, register: str) -> RegKey:
    return RegKey(channel, register)


class _Undefined:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "UNDEFINED"

    def __bool__(self):
        return False


UNDEFINED = _Undefined()


class Env(Mapping):
    """Immutable, hashable map from RegKey to value."""

    __slots__ = ("_data", "_hash")

    def __init__(self, items: Union[Mapping, Iterable, None] = None):
        data = dict(items) if items is not None else {}
        for k in list(data):
            if not isinstance(k, RegKey):
                data[RegKey(*k)] = data.pop(k)
        self._data = data
        self._hash = None

    def __getitem__(self, key) -> Any:
        return self._data[key]

    def __iter__(self) -> Iterator[RegKey]:
        return iter(self._data)

    def __len__(self) -> int:
        return len(self._data)

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._data.items()))
        return self._hash

    def __eq__(self, other) -> bool:
        if isinstance(other, Env):
            return self._data == other._data
        if isinstance(other, Mapping):
            return self._data == dict(other)
        return NotImplemented

    def __repr__(self) -> str:
        body = ", ".join(f"{k}: {v!r}" for k, v in self.sorted_items())
        return f"Env({{{body}}})"

    def sorted_items(self) -> list[tuple[RegKey, Any]]:
        return sorted(self._data.items(), key=lambda kv: kv[0].sort_key())

    def overlay(self, other: "Env") -> "Env":
        return overlay(self, other)

    def __or__(self, other: "Env") -> "Env":
        return overlay(self, other)

    def to_text(self) -> str:
        """One ``namespace,register: value`` line per key, canonical order."""
        return "".join(f"{k}: {format_value(v)}\n" for k, v in self.sorted_items())

    def to_json(self) -> dict[str, Any]:
        return {str(k): json_value(v) for k, v in self.sorted_items()}


EMPTY = Env()


def format_value(v: Any) -> str:
    if isinstance(v, (set, frozenset)):
        if len(v) == 1:
            return str(next(iter(v)))
        return "{" + ",".join(str(x) for x in sorted(v)) + "}"
    return str(v)


def json_value(v: Any) -> Any:
    if isinstance(v, (set, frozenset)):
        return sorted(v)
    return v


def overlay(first: Mapping, second: Mapping) -> Env:
    """Left-biased union: keys defined in ``first`` win over ``second``."""
    if not first:
        return second if isinstance(second, Env) else Env(second)
    if not second:
        return first if isinstance(first, Env) else Env(first)
    merged = dict(second)
    merged.update(first)
    return Env(merged)


def lookup(env: Mapping, key) -> Any:
    """Value at ``key`` or :data:`UNDEFINED`."""
    return env.get(RegKey(*key), UNDEFINED)


def env_equal(a: Mapping, b: Mapping) -> bool:
    return dict(a) == dict(b)
