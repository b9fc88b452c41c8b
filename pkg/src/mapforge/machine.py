"""Machine model and processor-space transformation algebra.

A machine's processors of one kind form a base 2-D grid of
(nodes, processors per node).  A :class:`ProcessorSpace` is a view of
that grid reshaped by a chain of split / merge / swap / slice steps.
Each step maps indices of the transformed space back to indices of the
space it was built from:

    split(i, d):         b[i] = a[i] + a[i+1] * d
    merge(p, q), p < q:  b[p] = a[p] % inner,  b[q] = a[p] / inner
                         (inner = extent of dimension p before the merge)
    swap(p, q):          b[p] = a[q],  b[q] = a[p]
    slice(i, lo, hi):    b[i] = a[i] + lo

with all other coordinates passed through (shifted by one around the
inserted/removed dimension for split/merge).  Integer division
truncates toward zero; all indices in range are nonnegative, so this
matches floor division.  split/merge/swap are bijections, slice is an
injection, and chains compose lazily: spaces are cheap immutable
values and ``lookup`` walks the chain backwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from .ast import MEM_KINDS, PROC_KINDS


class SpaceError(ValueError):
    """Raised for invalid transformations or out-of-range lookups."""


@dataclass(frozen=True)
class MachineModel:
    name: str
    nodes: int
    proc_counts: Mapping[str, int]          # processors per node, by kind
    mem_capacity: Mapping[str, float]       # bytes per node, by memory kind
    bandwidth: Mapping[tuple[str, str, bool], float]  # (src, dst, same_node) -> B/s
    latency: Mapping[str, float]            # launch overhead seconds, by kind
    compute_rate: Mapping[str, float]       # flops/s, by kind
    concurrency: Mapping[str, int] = field(default_factory=dict)  # wave width

    def count(self, kind: str) -> int:
        return int(self.proc_counts.get(kind, 0))

    def bandwidth_for(self, src: str, dst: str, same_node: bool) -> float:
        # Bandwidth is symmetric in its memory arguments.
        key = (src, dst, same_node)
        if key in self.bandwidth:
            return self.bandwidth[key]
        return self.bandwidth[(dst, src, same_node)]


@dataclass(frozen=True)
class ProcIndex:
    node: int
    local: int


# --------------------------------------------------------------------------
# Transformation steps
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Split:
    dim: int
    factor: int

    def out_dims(self, dims: tuple[int, ...]) -> tuple[int, ...]:
        i, d = self.dim, self.factor
        return dims[:i] + (d, dims[i] // d) + dims[i + 1:]

    def to_parent(self, idx: list[int]) -> list[int]:
        i, d = self.dim, self.factor
        return idx[:i] + [idx[i] + idx[i + 1] * d] + idx[i + 2:]

    def from_parent(self, idx: list[int]) -> list[int]:
        i, d = self.dim, self.factor
        return idx[:i] + [idx[i] % d, idx[i] // d] + idx[i + 1:]

    def to_parent_array(self, a: np.ndarray) -> np.ndarray:
        i, d = self.dim, self.factor
        merged = a[:, i] + a[:, i + 1] * d
        return np.concatenate([a[:, :i], merged[:, None], a[:, i + 2:]], axis=1)


@dataclass(frozen=True)
class Merge:
    p: int
    q: int
    inner: int  # extent of dimension p in the parent space

    def out_dims(self, dims: tuple[int, ...]) -> tuple[int, ...]:
        p, q = self.p, self.q
        out = list(dims)
        out[p] = dims[p] * dims[q]
        del out[q]
        return tuple(out)

    def to_parent(self, idx: list[int]) -> list[int]:
        p, q, inner = self.p, self.q, self.inner
        out = list(idx)
        out[p] = idx[p] % inner
        out.insert(q, idx[p] // inner)
        return out

    def from_parent(self, idx: list[int]) -> list[int]:
        p, q, inner = self.p, self.q, self.inner
        out = list(idx)
        out[p] = idx[p] + inner * idx[q]
        del out[q]
        return out

    def to_parent_array(self, a: np.ndarray) -> np.ndarray:
        p, q, inner = self.p, self.q, self.inner
        col_p = a[:, p] % inner
        col_q = a[:, p] // inner
        parts = [a[:, :p], col_p[:, None], a[:, p + 1:q], col_q[:, None], a[:, q:]]
        return np.concatenate(parts, axis=1)


@dataclass(frozen=True)
class Swap:
    p: int
    q: int

    def out_dims(self, dims: tuple[int, ...]) -> tuple[int, ...]:
        out = list(dims)
        out[self.p], out[self.q] = out[self.q], out[self.p]
        return tuple(out)

    def to_parent(self, idx: list[int]) -> list[int]:
        out = list(idx)
        out[self.p], out[self.q] = out[self.q], out[self.p]
        return out

    from_parent = to_parent

    def to_parent_array(self, a: np.ndarray) -> np.ndarray:
        out = a.copy()
        out[:, [self.p, self.q]] = a[:, [self.q, self.p]]
        return out


@dataclass(frozen=True)
class Slice:
    dim: int
    low: int
    high: int

    def out_dims(self, dims: tuple[int, ...]) -> tuple[int, ...]:
        out = list(dims)
        out[self.dim] = self.high - self.low + 1
        return tuple(out)

    def to_parent(self, idx: list[int]) -> list[int]:
        out = list(idx)
        out[self.dim] += self.low
        return out

    def from_parent(self, idx: list[int]) -> list[int]:
        value = idx[self.dim] - self.low
        if not 0 <= value <= self.high - self.low:
            raise SpaceError(
                f"processor index {idx[self.dim]} lies outside the slice "
                f"[{self.low}, {self.high}] in dimension {self.dim}")
        out = list(idx)
        out[self.dim] = value
        return out

    def to_parent_array(self, a: np.ndarray) -> np.ndarray:
        out = a.copy()
        out[:, self.dim] += self.low
        return out


TransformStep = Union[Split, Merge, Swap, Slice]


# --------------------------------------------------------------------------
# ProcessorSpace
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ProcessorSpace:
    kind: str
    base_dims: tuple[int, int]
    dims: tuple[int, ...]
    chain: tuple[TransformStep, ...] = ()

    @property
    def size(self) -> tuple[int, ...]:
        return self.dims

    @property
    def rank(self) -> int:
        return len(self.dims)

    def _check_dim(self, i: int, what: str) -> None:
        if not 0 <= i < self.rank:
            raise SpaceError(
                f"{what} dimension {i} out of range for a rank-{self.rank} space")

    def _extend(self, step: TransformStep) -> "ProcessorSpace":
        return ProcessorSpace(self.kind, self.base_dims, step.out_dims(self.dims),
                              self.chain + (step,))

    def split(self, i: int, d: int) -> "ProcessorSpace":
        self._check_dim(i, "split")
        if d < 1 or self.dims[i] % d != 0:
            raise SpaceError(
                f"split factor {d} does not divide extent {self.dims[i]} "
                f"of dimension {i}")
        return self._extend(Split(i, d))

    def merge(self, p: int, q: int) -> "ProcessorSpace":
        self._check_dim(p, "merge")
        self._check_dim(q, "merge")
        if p >= q:
            raise SpaceError(f"merge requires p < q, got ({p}, {q})")
        return self._extend(Merge(p, q, self.dims[p]))

    def swap(self, p: int, q: int) -> "ProcessorSpace":
        self._check_dim(p, "swap")
        self._check_dim(q, "swap")
        return self._extend(Swap(p, q))

    def slice(self, i: int, low: int, high: int) -> "ProcessorSpace":
        self._check_dim(i, "slice")
        if not 0 <= low <= high < self.dims[i]:
            raise SpaceError(
                f"slice bounds out of range: [{low}, {high}] in dimension {i} "
                f"of extent {self.dims[i]}")
        return self._extend(Slice(i, low, high))

    def decompose(self, dim: int, shape: tuple[int, ...]) -> "ProcessorSpace":
        """Split one dimension into len(shape) dimensions of those extents.

        Only evenly dividing shapes are supported: the product of the
        shape must equal the dimension's extent.
        """
        self._check_dim(dim, "decompose")
        if not shape or any(s < 1 for s in shape):
            raise SpaceError(f"decompose shape {shape} must be positive")
        if math.prod(shape) != self.dims[dim]:
            raise SpaceError(
                f"decompose shape {shape} does not evenly divide extent "
                f"{self.dims[dim]} of dimension {dim}")
        space = self
        for k, extent in enumerate(shape[:-1]):
            space = space.split(dim + k, extent)
        return space

    # -- index resolution ------------------------------------------------

    def _check_index(self, index: tuple[int, ...]) -> None:
        ok = (len(index) == self.rank
              and all(0 <= v < e for v, e in zip(index, self.dims)))
        if not ok:
            raise SpaceError(
                f"Slice processor index out of bound: {tuple(index)} is not "
                f"within a space of size {self.dims}")

    def lookup(self, index: tuple[int, ...]) -> ProcIndex:
        """Resolve an index of this space to the base (node, local) pair."""
        self._check_index(index)
        idx = list(index)
        for step in reversed(self.chain):
            idx = step.to_parent(idx)
        return ProcIndex(idx[0], idx[1])

    def lookup_all(self, indices: np.ndarray) -> np.ndarray:
        """Vectorized ``lookup``: (N, rank) int array -> (N, 2) array."""
        a = np.asarray(indices, dtype=np.int64)
        if a.ndim != 2 or a.shape[1] != self.rank:
            raise SpaceError(
                f"expected an (N, {self.rank}) index array, got shape {a.shape}")
        dims = np.asarray(self.dims, dtype=np.int64)
        if a.size and ((a < 0) | (a >= dims)).any():
            bad = a[((a < 0) | (a >= dims)).any(axis=1)][0]
            raise SpaceError(
                f"Slice processor index out of bound: {tuple(int(v) for v in bad)} "
                f"is not within a space of size {self.dims}")
        for step in reversed(self.chain):
            a = step.to_parent_array(a)
        return a

    def index_of(self, proc: ProcIndex) -> tuple[int, ...]:
        """Inverse of ``lookup``: find this space's index of a base processor.

        Raises SpaceError when the processor is outside a sliced range.
        """
        if not (0 <= proc.node < self.base_dims[0]
                and 0 <= proc.local < self.base_dims[1]):
            raise SpaceError(
                f"processor ({proc.node}, {proc.local}) is not within the "
                f"base space of size {self.base_dims}")
        idx = [proc.node, proc.local]
        for step in self.chain:
            idx = step.from_parent(idx)
        return tuple(idx)

    def all_indices(self) -> np.ndarray:
        """Every index of this space, row-major, as an (N, rank) array."""
        total = math.prod(self.dims)
        if total == 0:
            return np.empty((0, self.rank), dtype=np.int64)
        grids = np.indices(self.dims).reshape(self.rank, total)
        return grids.T.astype(np.int64)


def machine_space(model: MachineModel, kind: str) -> ProcessorSpace:
    """The base 2-D (nodes, per-node count) space for one processor kind."""
    if kind not in PROC_KINDS:
        raise SpaceError(f"unknown processor kind {kind}")
    count = model.count(kind)
    if count < 1:
        raise SpaceError(f"no processors of kind {kind} on machine {model.name}")
    return ProcessorSpace(kind, (model.nodes, count), (model.nodes, count))


def default_machine(nodes: int = 2, gpus: int = 4, cpus: int = 4) -> MachineModel:
    """A small fixed machine used in tests and examples."""
    return MachineModel(
        name="default",
        nodes=nodes,
        proc_counts={"CPU": cpus, "GPU": gpus, "OMP": cpus},
        mem_capacity={m: 16e9 for m in MEM_KINDS},
        bandwidth={},
        latency={"CPU": 1e-6, "GPU": 1e-5, "OMP": 2e-6},
        compute_rate={"CPU": 1e11, "GPU": 5e12, "OMP": 4e11},
        concurrency={"CPU": 1, "GPU": 8, "OMP": 1},
    )
