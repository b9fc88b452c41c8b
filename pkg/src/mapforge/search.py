"""Online mapper optimization: propose, evaluate, feed back, repeat.

Each iteration a strategy proposes a candidate mapper from the full
history (prior candidates, scores, and rendered feedback texts) and the
decision-dimension domains.  The candidate is validated, resolved, and
simulated; the outcome is classified and enhanced at the configured
feedback level and appended to the history.  Failures never stop a run:
an erroring candidate is recorded with its feedback and no score.

Built-in strategies: ``random`` (uniform over every dimension),
``hillclimb`` (mutate one dimension of the best candidate, with random
restarts after a stall), ``exhaustive`` (lexicographic enumeration),
and ``external`` (an optimizer behind the adapter wire protocol).  All
built-ins are deterministic given (history, seed).
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

from .adapter import AdapterClient, AdapterError, build_request, parse_response
from .binder import (
    DecisionDimension, decision_dimensions, emit, resolve, table_from_choices,
)
from .configs import ApplicationDescriptor, CostParams
from .feedback import (
    LEVEL_FULL, EnhancerRule, FeedbackReport, classify, enhance, render,
)
from .machine import MachineModel
from .parser import parse
from .printer import print_program
from .simulator import SimResult, simulate
from .validator import validate

DEFAULT_BUDGET = 10
DEFAULT_SEEDS = 5
STALL_LIMIT = 12


@dataclass(frozen=True)
class ObjectiveSpec:
    direction: str = "maximize"  # throughput
    baseline: Optional[float] = None
    budget: int = DEFAULT_BUDGET
    seeds: int = DEFAULT_SEEDS


@dataclass
class Candidate:
    program_text: str
    choices: Optional[tuple] = None  # one option per decision dimension


@dataclass
class IterationRecord:
    index: int
    candidate: Candidate
    feedback: FeedbackReport
    rendered_feedback: str
    score: Optional[float]
    best_so_far: Optional[float]


@dataclass
class Trajectory:
    strategy: str
    seed: int
    app: str
    machine: str
    records: list[IterationRecord] = field(default_factory=list)
    best_candidate: Optional[Candidate] = None

    @property
    def best_score(self) -> Optional[float]:
        return self.records[-1].best_so_far if self.records else None


# A strategy maps (history, dims, seed) to a proposal:
#   {"choices": [...]} or {"program": dsl_text}
Strategy = Callable[[Sequence[IterationRecord], Sequence[DecisionDimension], int], dict]


def _rng(seed: int, iteration: int) -> random.Random:
    return random.Random(seed * 1_000_003 + iteration)


# --------------------------------------------------------------------------
# Built-in strategies
# --------------------------------------------------------------------------


def random_agent(history, dims, seed: int) -> dict:
    rng = _rng(seed, len(history))
    return {"choices": [rng.choice(dim.options) for dim in dims]}


def _best_with_choices(history) -> Optional[Candidate]:
    best = None
    best_score = None
    for record in history:
        if record.score is None or record.candidate.choices is None:
            continue
        if best_score is None or record.score > best_score:
            best, best_score = record.candidate, record.score
    return best


def _stall_length(history) -> int:
    last_improve = -1
    for i, record in enumerate(history):
        if i == 0 and record.best_so_far is not None:
            last_improve = 0
        elif record.best_so_far is not None and (
                history[i - 1].best_so_far is None
                or record.best_so_far > history[i - 1].best_so_far):
            last_improve = i
    return len(history) - 1 - last_improve


def hill_climb(history, dims, seed: int, stall_limit: int = STALL_LIMIT) -> dict:
    rng = _rng(seed, len(history))
    base = _best_with_choices(history)
    stalls = _stall_length(history) if history else 0
    if base is None or (stalls > 0 and stalls % stall_limit == 0):
        return {"choices": [rng.choice(dim.options) for dim in dims]}
    choices = list(base.choices)
    dim_index = rng.randrange(len(dims))
    options = dims[dim_index].options
    if len(options) > 1:
        alternatives = [o for o in options if o != choices[dim_index]]
        choices[dim_index] = rng.choice(alternatives)
    return {"choices": choices}


def exhaustive(history, dims, seed: int) -> dict:
    total = math.prod(len(d.options) for d in dims)
    index = len(history) % total
    choices = [None] * len(dims)
    for k in reversed(range(len(dims))):
        options = dims[k].options
        index, pick = divmod(index, len(options))
        choices[k] = options[pick]
    return {"choices": choices}


def external_strategy(client: AdapterClient, app_name: str,
                      machine_name: str) -> Strategy:
    """Wrap an adapter endpoint as a strategy; protocol errors surface as
    AdapterError and are recorded as failed iterations."""

    def propose(history, dims, seed: int) -> dict:
        wire_history = []
        best = None
        for record in history:
            entry = {
                "iteration": record.index,
                "choices": _wire_choices(record.candidate.choices, dims),
                "program": record.candidate.program_text,
                "feedback": record.rendered_feedback,
                "score": record.score,
                "best_so_far": record.best_so_far,
            }
            wire_history.append(entry)
            if record.score is not None and (
                    best is None or record.score > best["score"]):
                best = {"score": record.score,
                        "choices": entry["choices"],
                        "program": record.candidate.program_text}
        request = build_request(app_name, machine_name, dims, wire_history, best)
        return parse_response(client.propose(request), dims)

    return propose


def _wire_choices(choices, dims) -> Optional[list[int]]:
    if choices is None:
        return None
    indexes = []
    for choice, dim in zip(choices, dims):
        try:
            indexes.append(dim.options.index(choice))
        except ValueError:
            return None
    return indexes


STRATEGIES = {
    "random": random_agent,
    "hillclimb": hill_climb,
    "exhaustive": exhaustive,
}


# --------------------------------------------------------------------------
# The optimization loop
# --------------------------------------------------------------------------


def evaluate_program(text: str, app: ApplicationDescriptor,
                     machine: MachineModel, costs: CostParams,
                     ) -> tuple[Union[SimResult, None], FeedbackReport]:
    """Compile, resolve, and simulate one candidate program; returns the
    result (None on failure) and its system-level feedback."""
    program = parse(text)
    if isinstance(program, list):
        return None, classify(program, app.metric)
    diagnostics = validate(program)
    if diagnostics:
        return None, classify(diagnostics, app.metric)
    table = resolve(program, app, machine)
    if isinstance(table, list):
        return None, classify(table, app.metric)
    outcome = simulate(app, table, machine, costs)
    if isinstance(outcome, SimResult):
        return outcome, classify(outcome, app.metric)
    return None, classify(outcome, app.metric)


def run(app: ApplicationDescriptor, machine: MachineModel, costs: CostParams,
        strategy: Union[str, Strategy], objective: ObjectiveSpec,
        feedback_level: str = LEVEL_FULL, seed: int = 0,
        rules: Optional[Sequence[EnhancerRule]] = None) -> Trajectory:
    """One seeded optimization run of ``objective.budget`` iterations."""
    from .feedback import default_rules

    if isinstance(strategy, str):
        strategy_name = strategy
        strategy_fn = STRATEGIES[strategy]
    else:
        strategy_name = getattr(strategy, "__name__", "custom")
        strategy_fn = strategy
    if rules is None:
        rules = default_rules()
    dims = decision_dimensions(app)
    trajectory = Trajectory(strategy_name, seed, app.name, machine.name)
    best_score: Optional[float] = None

    for iteration in range(objective.budget):
        candidate, failure = _propose(strategy_fn, trajectory.records, dims,
                                      seed, app)
        if failure is not None:
            report = failure
            score = None
        else:
            result, report = evaluate_program(candidate.program_text, app,
                                              machine, costs)
            score = result.throughput if result is not None else None
        report = enhance(report, rules, feedback_level)
        if score is not None and (best_score is None or score > best_score):
            best_score = score
            trajectory.best_candidate = candidate
        trajectory.records.append(IterationRecord(
            index=iteration,
            candidate=candidate,
            feedback=report,
            rendered_feedback=render(report),
            score=score,
            best_so_far=best_score,
        ))
    return trajectory


def _propose(strategy_fn, history, dims, seed, app,
             ) -> tuple[Candidate, Optional[FeedbackReport]]:
    try:
        proposal = strategy_fn(history, dims, seed)
    except AdapterError as exc:
        return Candidate(program_text=""), FeedbackReport("CompileError", str(exc))
    if "choices" in proposal:
        choices = list(proposal["choices"])
        try:
            table = table_from_choices(app, choices)
        except ValueError as exc:
            return (Candidate(program_text="", choices=tuple(choices)),
                    FeedbackReport("CompileError", str(exc)))
        text = print_program(emit(table, app))
        return Candidate(program_text=text, choices=tuple(choices)), None
    return Candidate(program_text=proposal["program"]), None


# --------------------------------------------------------------------------
# Aggregation and trajectory output
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AggregateRow:
    iteration: int
    mean_normalized_best: float


@dataclass(frozen=True)
class AggregateReport:
    rows: tuple[AggregateRow, ...]
    best_seed: int
    best_score: float
    best_normalized: float
    best_program: str


def aggregate(trajectories: Sequence[Trajectory],
              baseline_score: float) -> AggregateReport:
    """Per-iteration mean of normalized best-so-far across seeds, plus the
    single best mapper found.  Iterations with no success yet count as 0."""
    if not trajectories:
        raise ValueError("aggregate needs at least one trajectory")
    if baseline_score <= 0:
        raise ValueError("baseline score must be positive")
    budget = max(len(t.records) for t in trajectories)
    rows = []
    for i in range(budget):
        values = []
        for t in trajectories:
            best = t.records[i].best_so_far if i < len(t.records) else t.best_score
            values.append((best or 0.0) / baseline_score)
        rows.append(AggregateRow(i, sum(values) / len(values)))
    best_t = max(trajectories,
                 key=lambda t: (t.best_score is not None, t.best_score or 0.0))
    best_score = best_t.best_score or 0.0
    return AggregateReport(
        rows=tuple(rows),
        best_seed=best_t.seed,
        best_score=best_score,
        best_normalized=best_score / baseline_score,
        best_program=(best_t.best_candidate.program_text
                      if best_t.best_candidate else ""),
    )


def write_csv(trajectories: Sequence[Trajectory], path: Union[str, Path],
              baseline_score: Optional[float] = None) -> None:
    """Trajectory CSV: one row per (seed, iteration)."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["seed", "iteration", "score", "best_so_far",
                         "normalized", "feedback_kind"])
        for t in trajectories:
            for record in t.records:
                normalized = ""
                if baseline_score and record.best_so_far is not None:
                    normalized = repr(record.best_so_far / baseline_score)
                writer.writerow([
                    t.seed, record.index,
                    "" if record.score is None else repr(record.score),
                    "" if record.best_so_far is None else repr(record.best_so_far),
                    normalized,
                    record.feedback.kind,
                ])
