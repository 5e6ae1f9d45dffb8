"""Search spaces, priors, and the decomposition of an old space against a new one.

Numeric hyperparameters are carried internally in a *unit encoding*: floats are
rescaled to [0, 1] (after a log transform for log-uniform domains), integers map
to the centre of their cell ``(i + 0.5) / n_levels``, and categoricals map to
their choice index. The encoding is what the density models and the importance
trees operate on; configurations handed to users are always plain dicts.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

Configuration = Dict[str, Any]

# Column kinds of the unit encoding.
KIND_CONT = 0
KIND_INT = 1
KIND_CAT = 2


def _is_real(value: Any) -> bool:
    return isinstance(value, numbers.Real) and not isinstance(value, bool) and math.isfinite(value)


@dataclass(frozen=True)
class Categorical:
    choices: Tuple[Any, ...]

    kind = "categorical"

    def __post_init__(self) -> None:
        object.__setattr__(self, "choices", tuple(self.choices))
        if not self.choices:
            raise ValueError("categorical domain needs at least one choice")
        if len(set(self.choices)) != len(self.choices):
            raise ValueError(f"duplicate choices in {self.choices!r}")

    def contains(self, value: Any) -> bool:
        try:
            return value in self.choices
        except TypeError:
            return False

    def measure(self) -> float:
        return float(len(self.choices))

    def same_values(self, other: "Domain") -> bool:
        return isinstance(other, Categorical) and set(self.choices) == set(other.choices)

    def intersect(self, other: "Domain") -> Optional["Categorical"]:
        keep = tuple(c for c in self.choices if other.contains(c))
        return Categorical(keep) if keep else None

    def minus(self, other: "Domain") -> Tuple["Categorical", ...]:
        rest = tuple(c for c in self.choices if not other.contains(c))
        return (Categorical(rest),) if rest else ()

    def sample(self, rng: np.random.Generator) -> Any:
        return self.choices[int(rng.integers(len(self.choices)))]

    def encode(self, value: Any) -> float:
        return float(self.choices.index(value))

    def decode(self, u: float) -> Any:
        return self.choices[int(u)]


@dataclass(frozen=True)
class UniformInt:
    lo: int
    hi: int

    kind = "int"

    def __post_init__(self) -> None:
        for bound in (self.lo, self.hi):
            if not _is_integral(bound):
                raise ValueError(f"integer bounds required, got {bound!r}")
        object.__setattr__(self, "lo", int(self.lo))
        object.__setattr__(self, "hi", int(self.hi))
        # A single admissible value is allowed: it has positive counting measure and
        # arises naturally as the intersection of two integer ranges.
        if self.lo > self.hi:
            raise ValueError(f"empty integer range [{self.lo}, {self.hi}]")

    @property
    def n_levels(self) -> int:
        return self.hi - self.lo + 1

    def contains(self, value: Any) -> bool:
        return _is_integral(value) and self.lo <= value <= self.hi

    def measure(self) -> float:
        return float(self.n_levels)

    def same_values(self, other: "Domain") -> bool:
        return self == other

    def intersect(self, other: "Domain") -> Optional["UniformInt"]:
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        return UniformInt(lo, hi) if lo <= hi else None

    def minus(self, other: "Domain") -> Tuple["UniformInt", ...]:
        pieces = []
        if self.lo < other.lo:
            pieces.append(UniformInt(self.lo, min(self.hi, other.lo - 1)))
        if other.hi < self.hi:
            pieces.append(UniformInt(max(self.lo, other.hi + 1), self.hi))
        return tuple(pieces)

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.lo, self.hi + 1))

    def encode(self, value: Any) -> float:
        return (int(value) - self.lo + 0.5) / self.n_levels

    def decode(self, u: float) -> int:
        return self.lo + min(int(u * self.n_levels), self.n_levels - 1)


def _is_integral(value: Any) -> bool:
    if isinstance(value, bool):
        return False
    if isinstance(value, numbers.Integral):
        return True
    return isinstance(value, float) and value.is_integer()


@dataclass(frozen=True)
class UniformFloat:
    lo: float
    hi: float

    kind = "float"

    def __post_init__(self) -> None:
        if not (_is_real(self.lo) and _is_real(self.hi)):
            raise ValueError(f"finite bounds required, got [{self.lo!r}, {self.hi!r}]")
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")

    def _t(self, x: float) -> float:
        return x

    def contains(self, value: Any) -> bool:
        return _is_real(value) and self.lo <= value <= self.hi

    def measure(self) -> float:
        return self._t(self.hi) - self._t(self.lo)

    def same_values(self, other: "Domain") -> bool:
        return self == other

    def intersect(self, other: "Domain") -> Optional["UniformFloat"]:
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        # zero-length overlaps carry no prior mass and count as empty
        return type(self)(lo, hi) if lo < hi else None

    def minus(self, other: "Domain") -> tuple:
        pieces = []
        if self.lo < other.lo:
            pieces.append(type(self)(self.lo, min(self.hi, other.lo)))
        if other.hi < self.hi:
            pieces.append(type(self)(max(self.lo, other.hi), self.hi))
        return tuple(pieces)

    def sample(self, rng: np.random.Generator) -> float:
        return self.decode(float(rng.random()))

    def encode(self, value: Any) -> float:
        return (self._t(float(value)) - self._t(self.lo)) / self.measure()

    def decode(self, u: float) -> float:
        return min(max(self.lo + u * (self.hi - self.lo), self.lo), self.hi)


@dataclass(frozen=True)
class LogUniformFloat(UniformFloat):
    kind = "logfloat"

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.lo <= 0:
            raise ValueError(f"log-uniform domain needs lo > 0, got {self.lo}")

    def _t(self, x: float) -> float:
        return math.log(x)

    def decode(self, u: float) -> float:
        x = math.exp(math.log(self.lo) + u * self.measure())
        return min(max(x, self.lo), self.hi)


Domain = Union[Categorical, UniformInt, UniformFloat, LogUniformFloat]


def same_kind(a: Domain, b: Domain) -> bool:
    return a.kind == b.kind


@dataclass(frozen=True)
class Region:
    """A union of same-kind domain pieces, optionally minus an excluded domain.

    The exclusion only matters on the shared boundary of float intervals, where
    it keeps a region disjoint from the intersection it was cut from.
    """

    pieces: Tuple[Domain, ...] = ()
    exclude: Optional[Domain] = None

    def contains(self, value: Any) -> bool:
        if self.exclude is not None and self.exclude.contains(value):
            return False
        return any(p.contains(value) for p in self.pieces)

    def measure(self) -> float:
        return float(sum(p.measure() for p in self.pieces))

    @property
    def empty(self) -> bool:
        return not self.pieces

    def sample(self, rng: np.random.Generator) -> Any:
        """Draw from the prior restricted to the region."""
        if not self.pieces:
            raise ValueError("cannot sample from an empty region")
        weights = np.array([p.measure() for p in self.pieces])
        while True:
            k = int(rng.choice(len(self.pieces), p=weights / weights.sum())) if len(self.pieces) > 1 else 0
            value = self.pieces[k].sample(rng)
            if self.contains(value):
                return value


class SearchSpace:
    """Ordered, immutable collection of named hyperparameter domains."""

    def __init__(self, hyperparameters: Union[Mapping[str, Domain], Iterable[Tuple[str, Domain]]] = ()):
        items = list(hyperparameters.items()) if isinstance(hyperparameters, Mapping) else list(hyperparameters)
        names = [name for name, _ in items]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate hyperparameter names in {names}")
        self._names: Tuple[str, ...] = tuple(names)
        self._domains: Tuple[Domain, ...] = tuple(d for _, d in items)
        self._index = {name: i for i, name in enumerate(self._names)}

        kinds, levels = [], []
        for d in self._domains:
            if isinstance(d, Categorical):
                kinds.append(KIND_CAT)
                levels.append(len(d.choices))
            elif isinstance(d, UniformInt):
                kinds.append(KIND_INT)
                levels.append(d.n_levels)
            else:
                kinds.append(KIND_CONT)
                levels.append(0)
        self.kinds = np.array(kinds, dtype=np.intc)
        self.levels = np.array(levels, dtype=np.intc)
        self.kinds.flags.writeable = False
        self.levels.flags.writeable = False

    @property
    def names(self) -> Tuple[str, ...]:
        return self._names

    @property
    def domains(self) -> Tuple[Domain, ...]:
        return self._domains

    @property
    def dim(self) -> int:
        return len(self._names)

    def __len__(self) -> int:
        return len(self._names)

    def __iter__(self) -> Iterator[str]:
        return iter(self._names)

    def __contains__(self, name: object) -> bool:
        return name in self._index

    def __getitem__(self, name: str) -> Domain:
        return self._domains[self._index[name]]

    def index(self, name: str) -> int:
        return self._index[name]

    def items(self) -> List[Tuple[str, Domain]]:
        return list(zip(self._names, self._domains))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SearchSpace) and self.items() == other.items()

    def __hash__(self) -> int:
        return hash(tuple(self.items()))

    def __repr__(self) -> str:
        inner = ", ".join(f"{n}={d!r}" for n, d in self.items())
        return f"SearchSpace({inner})"

    def subspace(self, names: Iterable[str]) -> "SearchSpace":
        return SearchSpace([(n, self[n]) for n in names])

    # -- unit encoding -----------------------------------------------------

    def encode(self, config: Mapping[str, Any]) -> np.ndarray:
        return np.array([d.encode(config[n]) for n, d in zip(self._names, self._domains)], dtype=float)

    def decode(self, row: Sequence[float]) -> Configuration:
        return {n: d.decode(u) for n, d, u in zip(self._names, self._domains, row)}

    def sample_encoded(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` prior draws in unit encoding, one uniform per cell."""
        u = rng.random((n, self.dim))
        discrete = self.kinds != KIND_CONT
        if discrete.any():
            lev = self.levels[discrete]
            idx = np.minimum(np.floor(u[:, discrete] * lev), lev - 1)
            is_int = self.kinds[discrete] == KIND_INT
            u[:, discrete] = np.where(is_int, (idx + 0.5) / lev, idx)
        return u

    def log_jacobian(self, config: Mapping[str, Any]) -> float:
        """log |d unit / d value| summed over float dimensions."""
        total = 0.0
        for n, d in zip(self._names, self._domains):
            if isinstance(d, LogUniformFloat):
                total -= math.log(float(config[n])) + math.log(d.measure())
            elif isinstance(d, UniformFloat):
                total -= math.log(d.measure())
        return total


def validate(config: Mapping[str, Any], space: SearchSpace) -> List[str]:
    """Return one message per violating hyperparameter; empty means valid."""
    problems = []
    for name, domain in space.items():
        if name not in config:
            problems.append(f"{name} missing")
        elif not domain.contains(config[name]):
            problems.append(f"{name} out of range")
    for name in config:
        if name not in space:
            problems.append(f"{name} unknown hyperparameter")
    return problems


def sample_prior(space: SearchSpace, rng: np.random.Generator) -> Configuration:
    return space.decode(space.sample_encoded(rng, 1)[0])


def project(config: Mapping[str, Any], subspace: Union[SearchSpace, Iterable[str]]) -> Configuration:
    out = {}
    for name in subspace:
        if name not in config:
            raise KeyError(f"configuration has no value for {name!r}")
        out[name] = config[name]
    return out


def in_region(config: Mapping[str, Any], regions: Mapping[str, Region]) -> bool:
    """True iff some listed hyperparameter's value falls inside its region."""
    return any(name in config and region.contains(config[name]) for name, region in regions.items())


@dataclass(frozen=True)
class RangePartition:
    name: str
    both: Domain
    only_new_fraction: float
    only_old_region: Region
    only_new_region: Region


@dataclass(frozen=True)
class SpaceDecomposition:
    only_new: SearchSpace
    only_old: SearchSpace
    both: SearchSpace
    range_partitions: Tuple[RangePartition, ...] = field(default_factory=tuple)

    @property
    def removed_regions(self) -> Dict[str, Region]:
        return {p.name: p.only_old_region for p in self.range_partitions if not p.only_old_region.empty}

    @property
    def added_partitions(self) -> Tuple[RangePartition, ...]:
        return tuple(p for p in self.range_partitions if not p.only_new_region.empty)


def decompose(old: SearchSpace, new: SearchSpace) -> SpaceDecomposition:
    """Split ``old`` and ``new`` into only-old, both and only-new parts.

    Hyperparameters are matched by name. A shared name whose domain kind differs,
    or whose old and new ranges do not overlap, is treated as removed and re-added.
    """
    only_new, both, partitions = [], [], []
    dropped = set()
    for name, nd in new.items():
        if name not in old:
            only_new.append((name, nd))
            continue
        od = old[name]
        if not same_kind(od, nd):
            only_new.append((name, nd))
            dropped.add(name)
            continue
        if nd.same_values(od):
            both.append((name, nd))
            continue
        inter = nd.intersect(od)
        if inter is None:
            only_new.append((name, nd))
            dropped.add(name)
            continue
        both.append((name, inter))
        added = Region(nd.minus(od), exclude=inter)
        removed = Region(od.minus(nd), exclude=inter)
        partitions.append(
            RangePartition(
                name=name,
                both=inter,
                only_new_fraction=added.measure() / nd.measure(),
                only_old_region=removed,
                only_new_region=added,
            )
        )
    only_old = [(n, d) for n, d in old.items() if n not in new or n in dropped]
    return SpaceDecomposition(
        only_new=SearchSpace(only_new),
        only_old=SearchSpace(only_old),
        both=SearchSpace(both),
        range_partitions=tuple(partitions),
    )
