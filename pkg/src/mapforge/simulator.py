"""Deterministic bulk-synchronous cost model for mapped applications.

One iteration is modeled as: place every region argument (first fit
down its memory preference list, per node), check layout requirements,
assign every launch point to a processor through its index-mapping
function (block distribution over the base grid when none is given),
then charge

    compute(proc) = sum over tasks of
        waves * launch_overhead + points * flops / rate * penalties
    comm(link)    = sum over transfers of bytes / bandwidth

and take ``wall_time = iterations * (max compute + max comm)``.

Waves model concurrent task instances: a processor runs its points for
one task in ceil(points / width) batches, where the width is the
processor kind's concurrency capped by any InstanceLimit for the task.
Penalties capture the layout and memory trade-offs: AOS data on a GPU,
under-aligned data, and GPU compute out of zero-copy memory are slower.
Transfers between points on the same processor are free, as are
same-node transfers within one node-shared memory (anything but FBMEM,
which is private to each GPU).

The model is not event-driven and knows nothing about network topology
or load imbalance over time; it exists to rank mappers deterministically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Union

from .binder import MappingDecisionTable
from .configs import ApplicationDescriptor, CostParams, ExchangeRule, TaskSpec
from .evaluator import EvalEnv, EvalError, TaskHandle, build_env, eval_mapping
from .machine import MachineModel, ProcIndex, SpaceError
from .ast import MapperProgram

# Memories shared by all processors of a node; FBMEM is per-GPU, so
# moving data between two GPUs' framebuffers costs bandwidth even on
# one node.
NODE_SHARED_MEMS = frozenset({"SYSMEM", "ZCMEM", "RDMEM", "SOCKMEM"})

# Alignment guarantees (bytes) below which compute pays the
# misalignment penalty.
PREFERRED_ALIGN = {"GPU": 64, "CPU": 16, "OMP": 16}


# --------------------------------------------------------------------------
# Results and errors
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SimResult:
    wall_time: float
    throughput: float  # flops/s for gflops apps, iterations/s otherwise
    per_task_compute: Mapping[str, float]
    comm_time: float
    peak_memory: Mapping[tuple[int, str], float]
    inter_node_bytes: float


@dataclass(frozen=True)
class OutOfMemory:
    node: int
    mem: str
    requested: float
    capacity: float

    def render(self) -> str:
        return (f"Failed allocation of {self.requested:.0f} bytes in "
                f"{self.mem} memory on node {self.node} "
                f"(capacity {self.capacity:.0f} bytes)")


@dataclass(frozen=True)
class LayoutMismatch:
    task: str
    region: str
    kind: str = "stride"  # "stride" | "dgemm"

    def render(self) -> str:
        if self.kind == "dgemm":
            return "DGEMM parameter number 8 had an illegal value"
        return "Assertion failed: stride does not match expected value."


@dataclass(frozen=True)
class MappingError:
    text: str

    def render(self) -> str:
        return self.text


SimError = Union[OutOfMemory, LayoutMismatch, MappingError]


# --------------------------------------------------------------------------
# Parameter resolution
# --------------------------------------------------------------------------


class _Costs:
    def __init__(self, machine: MachineModel, params: CostParams):
        self.machine = machine
        self.params = params

    def rate(self, kind: str) -> float:
        return self.params.compute_rate.get(kind) or self.machine.compute_rate[kind]

    def latency(self, kind: str) -> float:
        return self.params.latency.get(kind) or self.machine.latency[kind]

    def bandwidth(self, src: str, dst: str, same_node: bool) -> float:
        key = (src, dst, same_node)
        if key in self.params.bandwidth:
            return self.params.bandwidth[key]
        if (dst, src, same_node) in self.params.bandwidth:
            return self.params.bandwidth[(dst, src, same_node)]
        return self.machine.bandwidth_for(src, dst, same_node)


def _layout_penalty(table: MappingDecisionTable, task: TaskSpec, proc: str,
                    params: CostParams) -> float:
    penalty = 1.0
    for arg in task.args:
        layout = table.region_layout[(task.name, arg.region)]
        factor = 1.0
        if proc == "GPU" and layout.aos_or_soa == "AOS":
            factor *= params.aos_gpu_penalty
        if layout.align is not None and layout.align[1] < PREFERRED_ALIGN[proc]:
            factor *= params.misalign_penalty
        penalty = max(penalty, factor)
    return penalty


def _memory_penalty(table: MappingDecisionTable, placement, task: TaskSpec,
                    proc: str, params: CostParams) -> float:
    if proc != "GPU":
        return 1.0
    penalty = 1.0
    for arg in task.args:
        mems = placement.get((task.name, arg.region), {})
        if any(m == "ZCMEM" for m in mems.values()):
            penalty = max(penalty, params.zcmem_gpu_penalty)
    return penalty


# --------------------------------------------------------------------------
# Point-to-processor assignment
# --------------------------------------------------------------------------


def _row_major(ipoint: tuple[int, ...], domain: tuple[int, ...]) -> int:
    linear = 0
    for coord, extent in zip(ipoint, domain):
        linear = linear * extent + coord
    return linear


def _default_block(ipoint: tuple[int, ...], domain: tuple[int, ...],
                   machine: MachineModel, kind: str) -> ProcIndex:
    count = machine.count(kind)
    total_procs = machine.nodes * count
    points = math.prod(domain)
    linear = _row_major(ipoint, domain) * total_procs // points
    linear = min(linear, total_procs - 1)
    return ProcIndex(linear // count, linear % count)


def _all_points(domain: tuple[int, ...]):
    if not domain:
        yield ()
        return
    ranges = [range(e) for e in domain]
    idx = [0] * len(domain)
    while True:
        yield tuple(idx)
        for k in reversed(range(len(domain))):
            idx[k] += 1
            if idx[k] < domain[k]:
                break
            idx[k] = 0
        else:
            return


def assign_points(app: ApplicationDescriptor, table: MappingDecisionTable,
                  machine: MachineModel,
                  env: Optional[EvalEnv] = None,
                  ) -> dict[str, dict[tuple[int, ...], ProcIndex]] | MappingError:
    """Map every launch point of every task to a concrete processor."""
    if env is None:
        program = MapperProgram(table.bindings + tuple(table.functions.values()))
        try:
            env = build_env(program, machine)
        except (EvalError, SpaceError) as exc:
            return MappingError(str(exc))
    root = TaskHandle("__root__", (0,), (1,), processor=ProcIndex(0, 0))
    assignment: dict[str, dict[tuple[int, ...], ProcIndex]] = {}
    for task in app.tasks:
        kind = table.task_proc[task.name]
        func_name = (table.index_map.get(task.name) if task.launch == "index"
                     else table.single_map.get(task.name))
        func = table.functions.get(func_name) if func_name else None
        points: dict[tuple[int, ...], ProcIndex] = {}
        domain = task.domain if task.launch == "index" else (1,) * len(task.domain)
        for ipoint in _all_points(domain):
            if func is None:
                proc = _default_block(ipoint, domain, machine, kind)
            else:
                handle = TaskHandle(task.name, ipoint, domain, parent=root)
                try:
                    proc = eval_mapping(func, handle, env)
                except (EvalError, SpaceError) as exc:
                    return MappingError(str(exc))
                if not (0 <= proc.node < machine.nodes
                        and 0 <= proc.local < machine.count(kind)):
                    return MappingError(
                        f"Slice processor index out of bound: mapping function "
                        f"{func_name} produced ({proc.node}, {proc.local}) for "
                        f"{machine.nodes} nodes with {machine.count(kind)} "
                        f"{kind} processors each")
            points[ipoint] = proc
        assignment[task.name] = points
    return assignment


# --------------------------------------------------------------------------
# Memory placement
# --------------------------------------------------------------------------


def _place_regions(app: ApplicationDescriptor, table: MappingDecisionTable,
                   machine: MachineModel, assignment,
                   ) -> Union[tuple[dict, dict, dict], OutOfMemory]:
    """First-fit placement of each (task, region argument) per node.

    Returns (placement, peak, node_share): placement maps
    (task, region) -> {node: mem}, peak maps (node, mem) -> bytes, and
    node_share maps (task, region, node) -> bytes placed there.
    """
    usage: dict[tuple[int, str], float] = {}
    peak: dict[tuple[int, str], float] = {}
    placement: dict[tuple[str, str], dict[int, str]] = {}
    node_share: dict[tuple[str, str, int], float] = {}

    def bump(node: int, mem: str, amount: float):
        key = (node, mem)
        usage[key] = usage.get(key, 0.0) + amount
        peak[key] = max(peak.get(key, 0.0), usage[key])

    for task in app.tasks:
        points = assignment[task.name]
        total = len(points)
        per_node: dict[int, int] = {}
        for proc in points.values():
            per_node[proc.node] = per_node.get(proc.node, 0) + 1
        for arg in task.args:
            region = app.region(arg.region)
            prefs = table.region_mem[(task.name, arg.region)]
            placed: dict[int, str] = {}
            for node in sorted(per_node):
                share = region.footprint * per_node[node] / total
                chosen = None
                for mem in prefs:
                    capacity = machine.mem_capacity.get(mem, 0.0)
                    if usage.get((node, mem), 0.0) + share <= capacity:
                        chosen = mem
                        break
                if chosen is None:
                    first = prefs[0]
                    return OutOfMemory(node, first, share,
                                       machine.mem_capacity.get(first, 0.0))
                bump(node, chosen, share)
                placed[node] = chosen
                node_share[(task.name, arg.region, node)] = share
            placement[(task.name, arg.region)] = placed
        # Collected regions are freed once their task's phase completes.
        for arg in task.args:
            if (task.name, arg.region) in table.collect:
                for node, mem in placement[(task.name, arg.region)].items():
                    usage[(node, mem)] -= node_share[(task.name, arg.region, node)]
    return placement, peak, node_share


# --------------------------------------------------------------------------
# simulate
# --------------------------------------------------------------------------


def simulate(app: ApplicationDescriptor, table: MappingDecisionTable,
             machine: MachineModel, params: CostParams,
             ) -> SimResult | SimError:
    assignment = assign_points(app, table, machine)
    if isinstance(assignment, MappingError):
        return assignment

    placed = _place_regions(app, table, machine, assignment)
    if isinstance(placed, OutOfMemory):
        return placed
    placement, peak, _ = placed

    # Layout requirements of the chosen variants.
    for task in app.tasks:
        variant = task.variant_for(table.task_proc[task.name])
        for arg in task.args:
            layout = table.region_layout[(task.name, arg.region)]
            if variant.layout != "any" and variant.layout != layout.aos_or_soa:
                return LayoutMismatch(task.name, arg.region, "stride")
            if variant.order != "any" and variant.order != layout.order:
                kind = "dgemm" if app.metric == "gflops" else "stride"
                return LayoutMismatch(task.name, arg.region, kind)

    costs = _Costs(machine, params)

    # Compute time per processor; a processor is (kind, node, local).
    proc_time: dict[tuple[str, int, int], float] = {}
    per_task: dict[str, float] = {}
    for task in app.tasks:
        kind = table.task_proc[task.name]
        lay_pen = _layout_penalty(table, task, kind, params)
        mem_pen = _memory_penalty(table, placement, task, kind, params)
        point_time = task.flops_per_point / costs.rate(kind) * lay_pen * mem_pen
        width = machine.concurrency.get(kind, 1)
        limit = table.instance_limit.get(task.name)
        if limit is not None:
            width = min(width, limit)
        counts: dict[tuple[int, int], int] = {}
        for proc in assignment[task.name].values():
            counts[(proc.node, proc.local)] = counts.get((proc.node, proc.local), 0) + 1
        task_total = 0.0
        for (node, local), n_points in counts.items():
            waves = -(-n_points // width)
            t = waves * costs.latency(kind) + n_points * point_time
            key = (kind, node, local)
            proc_time[key] = proc_time.get(key, 0.0) + t
            task_total += t
        per_task[task.name] = task_total

    # Communication time per link from the exchange rules.
    link_time: dict[tuple[int, int], float] = {}
    inter_node_bytes = 0.0
    for rule in app.exchanges:
        task = app.task(rule.task)
        points = assignment[task.name]
        mems = placement.get((task.name, rule.region), {})
        for src_pt, dst_pt in _exchange_pairs(rule, task.domain):
            src = points[src_pt]
            dst = points[dst_pt]
            if src == dst:
                continue
            same_node = src.node == dst.node
            src_mem = mems.get(src.node, "SYSMEM")
            dst_mem = mems.get(dst.node, "SYSMEM")
            if not same_node:
                inter_node_bytes += rule.bytes_per_point
            elif src_mem == dst_mem and src_mem in NODE_SHARED_MEMS:
                continue  # one shared buffer: no copy
            bw = costs.bandwidth(src_mem, dst_mem, same_node)
            link = (min(src.node, dst.node), max(src.node, dst.node))
            link_time[link] = link_time.get(link, 0.0) + rule.bytes_per_point / bw

    compute = max(proc_time.values(), default=0.0)
    comm = max(link_time.values(), default=0.0)
    wall = app.iterations * (compute + comm)
    if wall <= 0.0:
        wall = 1e-12
    if app.metric == "gflops":
        flops = sum(t.flops_per_point * t.points for t in app.tasks) * app.iterations
        throughput = flops / wall
    else:
        throughput = app.iterations / wall
    return SimResult(
        wall_time=wall,
        throughput=throughput,
        per_task_compute={t: per_task[t] for t in sorted(per_task)},
        comm_time=app.iterations * comm,
        peak_memory={k: peak[k] for k in sorted(peak)},
        inter_node_bytes=app.iterations * inter_node_bytes,
    )


def _exchange_pairs(rule: ExchangeRule, domain: tuple[int, ...]):
    """Ordered (source point, destination point) pairs of one exchange."""
    if rule.pattern == "stencil":
        for dst in _all_points(domain):
            for offset in rule.offsets:
                src = tuple(c + o for c, o in zip(dst, offset))
                if rule.wrap:
                    src = tuple(c % e for c, e in zip(src, domain))
                elif not all(0 <= c < e for c, e in zip(src, domain)):
                    continue
                yield src, dst
    else:  # alltoall along one axis
        axis = rule.axis
        for dst in _all_points(domain):
            for other in range(domain[axis]):
                if other == dst[axis]:
                    continue
                src = dst[:axis] + (other,) + dst[axis + 1:]
                yield src, dst
