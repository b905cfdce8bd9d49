"""Domain value types: atomic measures, interval partitions, ranked vectors.

All three are immutable after construction.  Interval partitions are stored
as ordered block-mass sequences; geometric boundaries are reconstructed
from cumulative sums only where the Hausdorff metric needs them.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaln

_LOC_COLLISION_EPS = 1e-15


@dataclass(frozen=True)
class AtomMeasure:
    """Finite purely atomic measure on [0,1]."""

    locations: np.ndarray
    masses: np.ndarray

    def __init__(self, atoms: Sequence[tuple[float, float]] | None = None,
                 locations=None, masses=None):
        if atoms is not None:
            locations = [a[0] for a in atoms]
            masses = [a[1] for a in atoms]
        locs = np.asarray(locations if locations is not None else [], dtype=float)
        ms = np.asarray(masses if masses is not None else [], dtype=float)
        if locs.shape != ms.shape or locs.ndim != 1:
            raise ValueError("locations and masses must be 1-d and equal length")
        if locs.size:
            if np.any(ms <= 0):
                raise ValueError("atom masses must be positive")
            if np.any((locs < 0) | (locs > 1)):
                raise ValueError("atom locations must lie in [0,1]")
            if np.unique(locs).size != locs.size:
                raise ValueError("atom locations must be pairwise distinct")
        locs.setflags(write=False)
        ms.setflags(write=False)
        object.__setattr__(self, "locations", locs)
        object.__setattr__(self, "masses", ms)

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.locations.tolist(), self.masses.tolist()))

    def __len__(self) -> int:
        return int(self.masses.size)

    def mass_at(self, u: float) -> float:
        hit = self.locations == u
        return float(self.masses[hit].sum())

    def is_zero(self) -> bool:
        return self.masses.size == 0

    def to_json(self) -> str:
        return json.dumps({"atoms": [[l, m] for l, m in self.atoms]})

    @classmethod
    def from_json(cls, text: str) -> "AtomMeasure":
        return cls(atoms=[tuple(a) for a in json.loads(text)["atoms"]])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["location", "mass"])
        for l, m in self.atoms:
            w.writerow([repr(l), repr(m)])
        return buf.getvalue()


ZERO_MEASURE = AtomMeasure(atoms=[])


@dataclass(frozen=True)
class IntervalPartition:
    """Ordered block masses of an interval partition of [0, M]."""

    blocks: np.ndarray

    def __init__(self, blocks=()):
        b = np.asarray(list(blocks), dtype=float)
        if b.size and np.any(b <= 0):
            raise ValueError("blocks must be positive")
        b.setflags(write=False)
        object.__setattr__(self, "blocks", b)

    @property
    def total_mass(self) -> float:
        return float(self.blocks.sum())

    def __len__(self) -> int:
        return int(self.blocks.size)

    def boundaries(self) -> np.ndarray:
        """Complement of the open blocks: the cumulative boundary points."""
        return np.concatenate([[0.0], np.cumsum(self.blocks)])

    def to_json(self) -> str:
        return json.dumps({"blocks": self.blocks.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "IntervalPartition":
        return cls(json.loads(text)["blocks"])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["block"])
        for b in self.blocks.tolist():
            w.writerow([repr(b)])
        return buf.getvalue()


EMPTY_PARTITION = IntervalPartition(())


@dataclass(frozen=True)
class RankedVector:
    """Non-increasing nonnegative masses; finite truncation of a point of
    the ordered simplex, with the truncated-away mass kept in mass_defect."""

    entries: np.ndarray
    mass_defect: float = 0.0

    def __init__(self, entries=(), mass_defect: float = 0.0):
        e = np.asarray(list(entries), dtype=float)
        if e.size:
            if np.any(e < 0):
                raise ValueError("entries must be nonnegative")
            if np.any(np.diff(e) > 1e-12):
                raise ValueError("entries must be non-increasing")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)
        object.__setattr__(self, "mass_defect", float(mass_defect))

    @property
    def sum(self) -> float:
        return float(self.entries.sum())

    def __len__(self) -> int:
        return int(self.entries.size)

    def power_sum(self, exponent: float) -> float:
        if self.entries.size == 0:
            return 0.0
        return float(np.sum(self.entries ** exponent))

    def to_json(self) -> str:
        return json.dumps({"entries": self.entries.tolist(),
                           "mass_defect": self.mass_defect})

    @classmethod
    def from_json(cls, text: str) -> "RankedVector":
        d = json.loads(text)
        return cls(d["entries"], d.get("mass_defect", 0.0))


def ranked(obj, normalize: bool = False) -> RankedVector:
    """Ranked (non-increasing) masses of a measure or interval partition."""
    if isinstance(obj, AtomMeasure):
        masses = obj.masses
    elif isinstance(obj, IntervalPartition):
        masses = obj.blocks
    elif isinstance(obj, RankedVector):
        masses = obj.entries
    else:
        masses = np.asarray(obj, dtype=float)
    total = float(np.sum(masses))
    if normalize:
        if total <= 0:
            raise ValueError("cannot normalize zero total mass")
        masses = masses / total
    return RankedVector(np.sort(np.asarray(masses, dtype=float))[::-1])


def concatenate(parts: Sequence[IntervalPartition]) -> IntervalPartition:
    blocks = [p.blocks for p in parts if len(p)]
    if not blocks:
        return EMPTY_PARTITION
    return IntervalPartition(np.concatenate(blocks))


def scale(g: float, beta: IntervalPartition) -> IntervalPartition:
    if not (g > 0):
        raise ValueError("scale factor must be positive")
    return IntervalPartition(g * beta.blocks)


def hausdorff_distance(beta1: IntervalPartition, beta2: IntervalPartition) -> float:
    """Hausdorff distance between the block-boundary point sets."""
    a = beta1.boundaries()
    b = beta2.boundaries()

    def directed(p: np.ndarray, q: np.ndarray) -> float:
        qs = np.sort(q)
        idx = np.searchsorted(qs, p)
        left = np.abs(p - qs[np.clip(idx - 1, 0, qs.size - 1)])
        right = np.abs(p - qs[np.clip(idx, 0, qs.size - 1)])
        return float(np.max(np.minimum(left, right)))

    return max(directed(a, b), directed(b, a))


def diversity_estimate(x: RankedVector, alpha: float,
                       h_grid: Sequence[float]) -> list[tuple[float, float]]:
    """Small-mass count statistic Gamma(1-alpha) h^alpha #{i: x_i > h}.

    The caller extrapolates h -> 0 to read off the diversity of x.
    """
    if len(x) == 0:
        raise ValueError("diversity of an empty vector is undefined")
    if not (0 < alpha < 1):
        raise ValueError("alpha must lie in (0,1)")
    c = math.exp(gammaln(1.0 - alpha))
    ent = x.entries
    out = []
    for h in h_grid:
        if h <= 0:
            raise ValueError("h must be positive")
        count = int(np.count_nonzero(ent > h))
        out.append((float(h), c * h ** alpha * count))
    return out


@dataclass(frozen=True)
class GridPath:
    """States on a time grid, with the cumulative 1/mass clock integral."""

    times: np.ndarray
    states: tuple
    clock: np.ndarray | None = None
    extinct: bool = False
    extinction_time: float | None = None

    def __init__(self, times, states, clock=None, extinct=False,
                 extinction_time=None):
        t = np.asarray(times, dtype=float)
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", tuple(states))
        object.__setattr__(self, "clock",
                           None if clock is None else np.asarray(clock, dtype=float))
        object.__setattr__(self, "extinct", bool(extinct))
        object.__setattr__(self, "extinction_time", extinction_time)

    def __len__(self) -> int:
        return int(self.times.size)

    def total_masses(self) -> np.ndarray:
        out = np.empty(len(self))
        for i, s in enumerate(self.states):
            if isinstance(s, (AtomMeasure, IntervalPartition)):
                out[i] = s.total_mass
            else:
                out[i] = float(np.sum(np.asarray(s, dtype=float)))
        return out

    def to_json_lines(self) -> str:
        lines = []
        masses = self.total_masses()
        for i, s in enumerate(self.states):
            rec = {"time": float(self.times[i]), "total_mass": float(masses[i])}
            if self.clock is not None:
                rec["clock_integral"] = float(self.clock[i])
            if isinstance(s, AtomMeasure):
                rec["atoms"] = [[l, m] for l, m in s.atoms]
            elif isinstance(s, IntervalPartition):
                rec["blocks"] = s.blocks.tolist()
            else:
                rec["value"] = np.asarray(s, dtype=float).tolist()
            lines.append(json.dumps(rec))
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["time", "value"])
        for t, s in zip(self.times.tolist(), self.states):
            w.writerow([repr(t), repr(float(np.asarray(s, dtype=float)))])
        return buf.getvalue()
