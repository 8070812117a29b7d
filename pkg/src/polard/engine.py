"""Session engine: the iterative query/feedback/update loop.

One session alternates between two phases.  In ``awaiting_feedback`` the
engine has sampled n new actions and issued a query bundle (all pairwise
comparisons among the new actions and the remembered buffer, plus coactive
and ordinal prompts for the new actions).  Submitting feedback moves to
``ready_to_advance``; advancing runs the mode's end-of-iteration posterior
update, refreshes the believed optimum, and samples the next actions.

Every state change is appended to a transcript (JSON-serializable event
dicts).  Replaying a transcript reproduces the exact final state: sampling
is driven by a seeded generator and feedback comes from the recorded
events, so sessions survive process restarts.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .actions import ActionSet, ActionSpace, DimensionSpec, action_at, build_space, snap_to_grid
from .feedback import (
    CoactiveRecord,
    FeedbackDataset,
    Link,
    NoiseParams,
    OrdinalRecord,
    OrdinalScale,
    PreferenceRecord,
)
from .posterior import KernelConfig, PosteriorModel, SolverConfig, Subset, update_posterior
from .sampling import (
    Buffer,
    SamplerConfig,
    construct_active_subset,
    construct_regret_subset,
    estimate_optimum,
    info_gain_sample,
    random_sample,
    roi_filter,
    thompson_sample,
)
from .synthetic import BenchmarkFunction, SyntheticOracle, synth_coactive, synth_ordinal, synth_preference

FEEDBACK_TYPES = ("preference", "coactive", "ordinal")
PHASES = ("awaiting_feedback", "ready_to_advance", "finished")

DEFAULT_CATEGORY_NAMES = ("Very Bad", "Bad", "Neutral", "Good")

Clock = Callable[[], float]


def _null_clock() -> float:
    return 0.0


class SessionError(Exception):
    """Invalid operation against a session (wrong phase, bad reference)."""


class PhaseError(SessionError):
    """Operation attempted in the wrong session phase."""


@dataclass
class SessionConfig:
    space: ActionSpace
    sampler: SamplerConfig
    kernel: KernelConfig = KernelConfig()
    noise: NoiseParams = NoiseParams()
    scale: OrdinalScale | None = None
    iterations: int = 30
    feedback_types: tuple[str, ...] = FEEDBACK_TYPES
    link: Link = Link.SIGMOID
    solver: SolverConfig = SolverConfig()
    source: str = "human"
    oracle: SyntheticOracle | None = None

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        types = tuple(self.feedback_types)
        if not types:
            raise ValueError("at least one feedback type must be enabled")
        for t in types:
            if t not in FEEDBACK_TYPES:
                raise ValueError(f"unknown feedback type {t!r}; expected one of {FEEDBACK_TYPES}")
        self.feedback_types = types
        if "preference" in types and self.sampler.n + self.sampler.b < 2:
            raise ValueError("preference feedback requires n + b >= 2 "
                             f"(got n={self.sampler.n}, b={self.sampler.b})")
        if self.scale is None:
            self.scale = OrdinalScale.from_prior(
                4, prior_std=float(np.sqrt(self.kernel.signal_variance)),
                names=DEFAULT_CATEGORY_NAMES)
        self.kernel.lengthscale_vector(self.space.ndim)  # dimensionality check
        if self.source not in ("human", "synthetic"):
            raise ValueError(f"source must be 'human' or 'synthetic', got {self.source!r}")
        if self.source == "synthetic" and self.oracle is None:
            raise ValueError("synthetic source requires an oracle")

    @property
    def seed(self) -> int:
        return self.sampler.rng_seed

    def to_dict(self) -> dict:
        d = {
            "space": {"dimensions": [
                {"name": dim.name, "min": dim.lower, "max": dim.upper, "step": dim.step}
                for dim in self.space.dims
            ]},
            "sampler": {
                "mode": self.sampler.mode,
                "n": self.sampler.n,
                "b": self.sampler.b,
                "R": self.sampler.R,
                "roi_lambda": self.sampler.roi_lambda,
                "b_roi": self.sampler.b_roi,
                "use_subset": self.sampler.use_subset,
                "mc_samples": self.sampler.mc_samples,
                "rng_seed": self.sampler.rng_seed,
            },
            "kernel": {
                "signal_variance": self.kernel.signal_variance,
                "lengthscales": list(self.kernel.lengthscales),
                "jitter": self.kernel.jitter,
            },
            "noise": {"c_p": self.noise.c_p, "c_c": self.noise.c_c, "c_o": self.noise.c_o},
            "ordinal": {
                "num_categories": self.scale.num_categories,
                "thresholds": list(self.scale.thresholds),
                "names": list(self.scale.names),
            },
            "link": self.link.value,
            "iterations": self.iterations,
            "feedback_types": list(self.feedback_types),
            "solver": {
                "max_newton_iters": self.solver.max_newton_iters,
                "grad_tol": self.solver.grad_tol,
            },
            "source": self.source,
        }
        if self.oracle is not None:
            d["oracle"] = _oracle_to_dict(self.oracle)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SessionConfig":
        dims = [DimensionSpec(lower=s["min"], upper=s["max"], step=s["step"],
                              name=s.get("name", ""))
                for s in d["space"]["dimensions"]]
        sampler = SamplerConfig(**d["sampler"])
        kernel_d = dict(d.get("kernel", {}))
        if "lengthscales" in kernel_d:
            kernel_d["lengthscales"] = tuple(kernel_d["lengthscales"])
        kernel = KernelConfig(**kernel_d)
        noise = NoiseParams(**d.get("noise", {}))
        scale = None
        if "ordinal" in d:
            o = d["ordinal"]
            if o.get("thresholds"):
                scale = OrdinalScale(o["num_categories"], tuple(o["thresholds"]),
                                     tuple(o.get("names", ())))
            else:
                scale = OrdinalScale.from_prior(
                    o["num_categories"],
                    prior_std=float(np.sqrt(kernel.signal_variance)),
                    names=tuple(o.get("names", ())))
        solver_d = d.get("solver", {})
        solver = SolverConfig(**solver_d) if solver_d else SolverConfig()
        oracle = _oracle_from_dict(d["oracle"]) if d.get("oracle") else None
        return cls(
            space=build_space(dims),
            sampler=sampler,
            kernel=kernel,
            noise=noise,
            scale=scale,
            iterations=d.get("iterations", 30),
            feedback_types=tuple(d.get("feedback_types", FEEDBACK_TYPES)),
            link=Link.parse(d.get("link", "sigmoid")),
            solver=solver,
            source=d.get("source", "human"),
            oracle=oracle,
        )


def _oracle_to_dict(oracle: SyntheticOracle) -> dict:
    bench: dict = {"kind": oracle.truth.kind}
    if oracle.truth.kind == "grid_table":
        bench["values"] = list(oracle.truth.table)
    return {
        "benchmark": bench,
        "c_p": oracle.c_p,
        "c_c": oracle.c_c,
        "c_o": oracle.c_o,
        "ordinal_thresholds": list(oracle.ordinal_thresholds),
        "eps1": oracle.eps1,
        "eps2": oracle.eps2,
        "f_eps1": oracle.f_eps1,
        "f_eps2": oracle.f_eps2,
        "link": oracle.link.value,
    }


def _oracle_from_dict(d: dict) -> SyntheticOracle | None:
    bench_d = d.get("benchmark", {})
    kind = bench_d.get("kind", "hartmann3")
    if kind == "custom":
        return None  # not reconstructible; replay never generates feedback
    if kind == "grid_table":
        bench = BenchmarkFunction(kind="grid_table", table=tuple(bench_d["values"]))
    else:
        bench = BenchmarkFunction(kind=kind)
    return SyntheticOracle(
        truth=bench,
        c_p=d.get("c_p", 0.01),
        c_c=d.get("c_c", 0.01),
        c_o=d.get("c_o", 0.1),
        ordinal_thresholds=tuple(d.get("ordinal_thresholds", ())),
        eps1=d.get("eps1", 0.1),
        eps2=d.get("eps2", 0.2),
        f_eps1=d.get("f_eps1", 0.0),
        f_eps2=d.get("f_eps2", 0.0),
        link=Link.parse(d.get("link", "sigmoid")),
    )


@dataclass
class QueryBundle:
    iteration: int
    comparisons: list[tuple[int, int]]
    coactive_prompts: list[int]
    ordinal_prompts: list[int]

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "comparisons": [list(p) for p in self.comparisons],
            "coactive_prompts": list(self.coactive_prompts),
            "ordinal_prompts": list(self.ordinal_prompts),
        }


SKIP = {"type": "skip"}


@dataclass
class ComparisonAnswer:
    pair: tuple[int, int]
    winner: int | None  # None = no preference


@dataclass
class CoactiveAnswer:
    action: int
    suggestion: Sequence[float] | None  # coords; None = no suggestion


@dataclass
class OrdinalAnswer:
    action: int
    label: int | None


@dataclass
class QueryResponses:
    comparisons: list[ComparisonAnswer] = field(default_factory=list)
    coactive: list[CoactiveAnswer] = field(default_factory=list)
    ordinal: list[OrdinalAnswer] = field(default_factory=list)


@dataclass
class SessionState:
    config: SessionConfig
    rng: np.random.Generator
    clock: Clock
    iteration: int = 0
    phase: str = "awaiting_feedback"
    executed: list[int] = field(default_factory=list)
    visited: ActionSet = field(default_factory=ActionSet)
    extra_actions: set[int] = field(default_factory=set)  # coactive refs outside V
    buffer: Buffer | None = None
    query_buffer: list[int] = field(default_factory=list)
    current_actions: list[int] = field(default_factory=list)
    datasets: FeedbackDataset = field(default_factory=FeedbackDataset)
    posterior: PosteriorModel | None = None
    optimum_estimate: int | None = None
    pending: QueryBundle | None = None
    ordinal_prompted: set[int] = field(default_factory=set)
    transcript: list[dict] = field(default_factory=list)
    posterior_history: list[dict] = field(default_factory=list)

    def log(self, event: dict) -> None:
        self.transcript.append(event)


def _engine_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), 0]))


def feedback_rng(seed: int, iteration: int = 0) -> np.random.Generator:
    """Stream for synthetic feedback, independent of the sampler stream.

    Seeded per iteration so a restored session continues deterministically
    without replaying earlier draws.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), 1, int(iteration)]))


def start_session(config: SessionConfig, clock: Clock | None = None) -> SessionState:
    """Create a session and sample the first iteration's random actions."""
    state = SessionState(config=config, rng=_engine_rng(config.seed),
                         clock=clock or _null_clock)
    state.buffer = Buffer(capacity=config.sampler.b)
    state.log({"event": "session_started", "seed": config.seed, "config": config.to_dict()})
    state.iteration = 1
    n = config.sampler.n
    space = config.space
    k = min(n, space.cardinality)
    first = [int(a) for a in state.rng.choice(space.cardinality, size=k, replace=False)]
    _execute_actions(state, first, strategy="random")
    return state


def _execute_actions(state: SessionState, actions: list[int], strategy: str,
                     roi_margins: list[float] | None = None) -> None:
    state.query_buffer = list(state.buffer.actions)
    state.executed.extend(actions)
    state.visited = state.visited.union(actions)
    state.buffer.push(actions)
    state.current_actions = list(actions)
    event = {"event": "actions_sampled", "iteration": state.iteration,
             "actions": list(actions), "strategy": strategy}
    if roi_margins is not None:
        event["roi_margins"] = [float(m) for m in roi_margins]
    state.log(event)
    state.pending = _make_bundle(state)
    state.ordinal_prompted.update(state.pending.ordinal_prompts)
    state.log({"event": "query_issued", "iteration": state.iteration,
               **state.pending.to_dict()})
    state.phase = "awaiting_feedback"


def _make_bundle(state: SessionState) -> QueryBundle:
    cfg = state.config
    pool: list[int] = []
    for a in state.current_actions + state.query_buffer:
        if a not in pool:
            pool.append(a)
    comparisons = (list(itertools.combinations(pool, 2))
                   if "preference" in cfg.feedback_types else [])
    new_unique = list(dict.fromkeys(state.current_actions))
    coactive = new_unique if "coactive" in cfg.feedback_types else []
    ordinal = ([a for a in new_unique if a not in state.ordinal_prompted]
               if "ordinal" in cfg.feedback_types else [])
    return QueryBundle(iteration=state.iteration, comparisons=comparisons,
                       coactive_prompts=list(coactive), ordinal_prompts=list(ordinal))


def build_queries(state: SessionState) -> QueryBundle:
    """The pending query bundle; only valid while awaiting feedback."""
    if state.phase != "awaiting_feedback":
        raise PhaseError(f"no queries pending in phase {state.phase!r}")
    return state.pending


def responses_to_records(state: SessionState, responses: QueryResponses) -> list[dict]:
    """Convert high-level answers into canonical feedback records.

    The output aligns one record (or skip) with every prompt of the pending
    bundle, in bundle order; unanswered prompts become skips.
    """
    bundle = build_queries(state)
    space = state.config.space
    by_pair = {frozenset(c.pair): c for c in responses.comparisons}
    if len(by_pair) != len(responses.comparisons):
        raise SessionError("duplicate comparison answers")
    for c in responses.comparisons:
        if frozenset(c.pair) not in {frozenset(p) for p in bundle.comparisons}:
            raise SessionError(f"comparison {c.pair} is not part of the current query")
        if c.winner is not None and c.winner not in c.pair:
            raise SessionError(f"winner {c.winner} is not in the pair {c.pair}")
    by_coactive = {c.action: c for c in responses.coactive}
    by_ordinal = {o.action: o for o in responses.ordinal}
    for a in by_coactive:
        if a not in bundle.coactive_prompts:
            raise SessionError(f"action {a} has no coactive prompt in the current query")
    for a, o in by_ordinal.items():
        if a not in bundle.ordinal_prompts:
            raise SessionError(f"action {a} has no ordinal prompt in the current query")
        if o.label is not None and not (1 <= o.label <= state.config.scale.num_categories):
            raise SessionError(
                f"ordinal label {o.label} out of range [1, {state.config.scale.num_categories}]")

    records: list[dict] = []
    for pair in bundle.comparisons:
        ans = by_pair.get(frozenset(pair))
        if ans is None or ans.winner is None:
            records.append(dict(SKIP))
        else:
            loser = pair[0] if ans.winner == pair[1] else pair[1]
            records.append({"type": "preference", "winner": ans.winner, "loser": loser})
    for a in bundle.coactive_prompts:
        ans = by_coactive.get(a)
        if ans is None or ans.suggestion is None:
            records.append(dict(SKIP))
            continue
        snapped = snap_to_grid(space, ans.suggestion)
        if snapped.index == a:
            records.append(dict(SKIP))
        else:
            records.append({"type": "coactive", "suggested": snapped.index, "original": a})
    for a in bundle.ordinal_prompts:
        ans = by_ordinal.get(a)
        if ans is None or ans.label is None:
            records.append(dict(SKIP))
        else:
            records.append({"type": "ordinal", "action": a, "label": int(ans.label)})
    return records


def submit_records(state: SessionState, records: list[dict]) -> SessionState:
    """Apply one canonical record per pending prompt, in bundle order.

    All records are validated before any is applied, so an invalid entry
    leaves the session untouched.
    """
    bundle = build_queries(state)
    expected = len(bundle.comparisons) + len(bundle.coactive_prompts) + len(bundle.ordinal_prompts)
    if len(records) != expected:
        raise SessionError(f"expected {expected} records (one per prompt), got {len(records)}")
    cardinality = state.config.space.cardinality
    pos = 0
    applied: list[dict] = []
    preferences: list[PreferenceRecord] = []
    coactive: list[CoactiveRecord] = []
    ordinal: list[OrdinalRecord] = []

    for pair in bundle.comparisons:
        rec = records[pos]
        pos += 1
        if rec.get("type") == "skip":
            applied.append(dict(SKIP))
            continue
        if rec.get("type") != "preference":
            raise SessionError(f"expected a preference or skip for pair {pair}, got {rec}")
        if {rec["winner"], rec["loser"]} != set(pair):
            raise SessionError(f"preference {rec} does not match the pair {pair}")
        preferences.append(PreferenceRecord(rec["winner"], rec["loser"]))
        applied.append({"type": "preference", "winner": rec["winner"], "loser": rec["loser"]})
    for a in bundle.coactive_prompts:
        rec = records[pos]
        pos += 1
        if rec.get("type") == "skip":
            applied.append(dict(SKIP))
            continue
        if rec.get("type") != "coactive":
            raise SessionError(f"expected a coactive record or skip for action {a}, got {rec}")
        if a not in (rec["suggested"], rec["original"]):
            raise SessionError(f"coactive record {rec} does not involve the prompted action {a}")
        for ref in (rec["suggested"], rec["original"]):
            if not (0 <= ref < cardinality):
                raise SessionError(f"coactive record references unknown action {ref}")
        coactive.append(CoactiveRecord(rec["suggested"], rec["original"]))
        applied.append({"type": "coactive", "suggested": rec["suggested"],
                        "original": rec["original"]})
    for a in bundle.ordinal_prompts:
        rec = records[pos]
        pos += 1
        if rec.get("type") == "skip":
            applied.append(dict(SKIP))
            continue
        if rec.get("type") != "ordinal" or rec.get("action") != a:
            raise SessionError(f"expected an ordinal record or skip for action {a}, got {rec}")
        label = int(rec["label"])
        if not (1 <= label <= state.config.scale.num_categories):
            raise SessionError(f"ordinal label {label} out of range "
                               f"[1, {state.config.scale.num_categories}]")
        ordinal.append(OrdinalRecord(a, label))
        applied.append({"type": "ordinal", "action": a, "label": label})

    state.datasets.preferences.extend(preferences)
    state.datasets.coactive.extend(coactive)
    state.datasets.ordinal.extend(ordinal)
    for rec in coactive:
        for ref in (rec.suggested, rec.original):
            if ref not in state.visited:
                state.extra_actions.add(ref)
    state.log({"event": "feedback_recorded", "iteration": state.iteration, "records": applied})
    state.pending = None
    state.phase = "ready_to_advance"
    return state


def submit_feedback(state: SessionState, responses: QueryResponses) -> SessionState:
    """Validate and record human-level answers for the pending bundle."""
    return submit_records(state, responses_to_records(state, responses))


def _subset_base(state: SessionState) -> ActionSet:
    return state.visited.union(state.extra_actions)


def _update(state: SessionState, subset: Subset, stage: str) -> PosteriorModel:
    cfg = state.config
    t0 = state.clock()
    post = update_posterior(subset, cfg.space, state.datasets, cfg.kernel, cfg.noise,
                            cfg.scale, cfg.link, cfg.solver)
    duration = state.clock() - t0
    state.log({"event": "posterior_updated", "iteration": state.iteration, "stage": stage,
               "subset_size": len(subset), "duration_s": float(duration)})
    state.posterior_history.append({
        "iteration": state.iteration,
        "stage": stage,
        "indices": list(subset.actions.indices),
        "mean": post.mean.copy(),
    })
    state.posterior = post
    return post


def _full_subset(state: SessionState) -> Subset:
    return Subset(ActionSet.of(range(state.config.space.cardinality)))


def advance(state: SessionState) -> SessionState:
    """End-of-iteration posterior update, optimum refresh, next sampling.

    Regret minimization with subset reduction updates the posterior twice
    per iteration: over the visited actions here (to refresh the believed
    optimum) and over the fresh line subset when sampling.  Active learning
    updates once, over R random actions plus visited, and the next
    iteration's information-gain step reuses that posterior.

    A posterior-solve failure propagates with its diagnostics and rolls the
    session back to the pre-advance state.
    """
    if state.phase != "ready_to_advance":
        raise PhaseError(f"cannot advance in phase {state.phase!r}")
    snapshot = _AdvanceSnapshot.capture(state)
    try:
        return _advance(state)
    except Exception:
        snapshot.restore(state)
        raise


class _AdvanceSnapshot:
    """Cheap rollback point for everything advance mutates."""

    def __init__(self, state: SessionState):
        self.iteration = state.iteration
        self.phase = state.phase
        self.executed_len = len(state.executed)
        self.visited = state.visited
        self.buffer_actions = list(state.buffer.actions)
        self.query_buffer = list(state.query_buffer)
        self.current_actions = list(state.current_actions)
        self.posterior = state.posterior
        self.optimum = state.optimum_estimate
        self.pending = state.pending
        self.ordinal_prompted = set(state.ordinal_prompted)
        self.transcript_len = len(state.transcript)
        self.history_len = len(state.posterior_history)
        self.rng_state = state.rng.bit_generator.state

    @classmethod
    def capture(cls, state: SessionState) -> "_AdvanceSnapshot":
        return cls(state)

    def restore(self, state: SessionState) -> None:
        state.iteration = self.iteration
        state.phase = self.phase
        del state.executed[self.executed_len:]
        state.visited = self.visited
        state.buffer.actions = self.buffer_actions
        state.query_buffer = self.query_buffer
        state.current_actions = self.current_actions
        state.posterior = self.posterior
        state.optimum_estimate = self.optimum
        state.pending = self.pending
        state.ordinal_prompted = self.ordinal_prompted
        del state.transcript[self.transcript_len:]
        del state.posterior_history[self.history_len:]
        state.rng.bit_generator.state = self.rng_state


def _advance(state: SessionState) -> SessionState:
    cfg = state.config
    sampler = cfg.sampler
    space = cfg.space

    restrict: ActionSet | None = None
    if not sampler.use_subset and sampler.mode != "random":
        estimate_post = _update(state, _full_subset(state), stage="estimate")
    elif sampler.mode == "active_learning":
        subset = construct_active_subset(space, _subset_base(state), sampler.R, state.rng)
        estimate_post = _update(state, subset, stage="estimate")
    else:
        estimate_post = _update(state, Subset(_subset_base(state)), stage="estimate")
        restrict = state.visited
    state.optimum_estimate = estimate_optimum(estimate_post, within=restrict)
    state.log({"event": "optimum_updated", "iteration": state.iteration,
               "action": state.optimum_estimate})

    if state.iteration >= cfg.iterations:
        state.phase = "finished"
        state.pending = None
        state.log({"event": "session_finished", "iterations": cfg.iterations})
        return state

    state.iteration += 1

    if sampler.mode == "random":
        actions = random_sample(space, sampler.n, state.rng)
        _execute_actions(state, actions, strategy="random")
    elif sampler.mode == "regret_min":
        if sampler.use_subset:
            anchor = action_at(space, state.optimum_estimate)
            subset = construct_regret_subset(space, _subset_base(state), anchor, state.rng)
            post = _update(state, subset, stage="sample")
        else:
            post = estimate_post
        actions = thompson_sample(post, sampler.n, state.rng)
        _execute_actions(state, actions, strategy="thompson")
    else:  # active_learning: reuse the posterior just inferred
        actions, margins = _sample_info_gain(state, estimate_post)
        _execute_actions(state, actions, strategy="info_gain", roi_margins=margins)
    return state


def _sample_info_gain(state: SessionState, post: PosteriorModel) -> tuple[list[int], list[float]]:
    cfg = state.config
    sampler = cfg.sampler
    roi = roi_filter(post, sampler.roi_lambda, sampler.b_roi)
    if len(roi) == 0:
        # Keep the loop alive: take the single most optimistic action.
        score = post.mean + sampler.roi_lambda * post.std()
        best = post.subset.actions.indices[int(np.argmax(score))]
        roi = ActionSet.of([best])
        state.log({"event": "roi_empty_fallback", "iteration": state.iteration,
                   "action": best})
    use_prefs = "preference" in cfg.feedback_types
    use_ordinal = "ordinal" in cfg.feedback_types
    picked: list[int] = []
    for _ in range(sampler.n):
        comparison_set = state.buffer.actions + picked
        comparison_set = [a for a in comparison_set if a in post.subset]
        choice = info_gain_sample(post, roi, Buffer(capacity=-1, actions=comparison_set),
                                  cfg.noise, cfg.scale, cfg.link, sampler.mc_samples,
                                  state.rng, use_ordinal=use_ordinal,
                                  use_preferences=use_prefs)
        picked.append(choice)
    score = post.mean + sampler.roi_lambda * post.std()
    pos = [post.subset.position(a) for a in picked]
    margins = [float(score[p] - sampler.b_roi) for p in pos]
    return picked, margins


def transcript_lines(events: list[dict]) -> str:
    """Canonical JSON-lines serialization of a transcript."""
    return "".join(json.dumps(e, sort_keys=True, separators=(",", ":")) + "\n"
                   for e in events)


def parse_transcript(text: str) -> list[dict]:
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def replay_transcript(events: list[dict], clock: Clock | None = None) -> SessionState:
    """Reconstruct a session from its event log.

    Sampling randomness is regenerated from the recorded seed; feedback is
    taken from the recorded events, so the rebuilt state (including the
    generator position) matches the original exactly.
    """
    if not events or events[0].get("event") != "session_started":
        raise ValueError("transcript must begin with a session_started event")
    config = SessionConfig.from_dict(events[0]["config"])
    state = start_session(config, clock=clock)
    feedback_events = [e for e in events if e.get("event") == "feedback_recorded"]
    advances = sum(1 for e in events
                   if e.get("event") == "posterior_updated" and e.get("stage") == "estimate")
    for i, ev in enumerate(feedback_events):
        submit_records(state, ev["records"])
        if i < advances:
            advance(state)
    return state


def state_digest(state: SessionState) -> str:
    """Deterministic fingerprint of a session, ignoring wall-clock fields."""
    import hashlib

    events = []
    for e in state.transcript:
        e = dict(e)
        e.pop("duration_s", None)
        events.append(e)
    doc = {
        "iteration": state.iteration,
        "phase": state.phase,
        "executed": state.executed,
        "optimum": state.optimum_estimate,
        "mean": state.posterior.mean.tolist() if state.posterior is not None else None,
        "events": events,
    }
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


# ---------------------------------------------------------------------------
# Simulation and evaluation


@dataclass
class MetricsReport:
    """Per-iteration evaluation of a synthetic run (ground truth required)."""

    iterations: list[int]
    optimal_action_error: list[float]
    instantaneous_regret: list[float]
    ordinal_prediction_error: list[float]
    posterior_update_seconds: list[float]
    confusion_matrix: list[list[int]]  # [true - 1][predicted - 1] counts

    CSV_HEADER = ("iteration,optimal_action_error,instantaneous_regret,"
                  "ordinal_prediction_error,posterior_update_seconds")

    def csv_text(self) -> str:
        lines = [self.CSV_HEADER]
        for i, row in enumerate(zip(self.optimal_action_error, self.instantaneous_regret,
                                    self.ordinal_prediction_error,
                                    self.posterior_update_seconds)):
            lines.append(",".join([str(self.iterations[i])] + [repr(v) for v in row]))
        return "\n".join(lines) + "\n"


def synthesize_responses(state: SessionState, oracle: SyntheticOracle,
                         rng: np.random.Generator) -> list[dict]:
    """Answer every pending prompt from the oracle, in bundle order."""
    bundle = build_queries(state)
    space = state.config.space
    records: list[dict] = []
    for i, j in bundle.comparisons:
        rec = synth_preference(oracle, action_at(space, i), action_at(space, j), rng)
        records.append({"type": "preference", "winner": rec.winner, "loser": rec.loser})
    for a in bundle.coactive_prompts:
        rec = synth_coactive(oracle, action_at(space, a), space, rng)
        if rec is None:
            records.append(dict(SKIP))
        else:
            records.append({"type": "coactive", "suggested": rec.suggested,
                            "original": rec.original})
    for a in bundle.ordinal_prompts:
        rec = synth_ordinal(oracle, action_at(space, a), rng)
        records.append({"type": "ordinal", "action": a, "label": rec.label})
    return records


def run_simulation(config: SessionConfig,
                   clock: Clock | None = None) -> tuple[SessionState, MetricsReport]:
    """Run the full loop answering every query from the configured oracle."""
    if config.source != "synthetic" or config.oracle is None:
        raise ValueError("run_simulation requires a synthetic source with an oracle")
    oracle = config.oracle
    state = start_session(config, clock=clock)
    while state.phase != "finished":
        rng = feedback_rng(config.seed, state.iteration)
        submit_records(state, synthesize_responses(state, oracle, rng))
        advance(state)
    return state, evaluate_metrics(state, oracle)


def evaluate_metrics(state: SessionState, oracle: SyntheticOracle) -> MetricsReport:
    """Ground-truth evaluation: regret, optimum error, ordinal prediction."""
    space = state.config.space
    scale = state.config.scale
    truths = oracle.utilities(space)
    best = float(np.max(truths))

    sampled: dict[int, list[int]] = {}
    optima: dict[int, int] = {}
    durations: dict[int, float] = {}
    for e in state.transcript:
        if e["event"] == "actions_sampled":
            sampled[e["iteration"]] = e["actions"]
        elif e["event"] == "optimum_updated":
            optima[e["iteration"]] = e["action"]
        elif e["event"] == "posterior_updated":
            durations[e["iteration"]] = durations.get(e["iteration"], 0.0) + e["duration_s"]

    estimates = {h["iteration"]: h for h in state.posterior_history if h["stage"] == "estimate"}

    iterations = sorted(optima)
    opt_err, regret, ord_err, seconds = [], [], [], []
    last_conf = [[0] * scale.num_categories for _ in range(scale.num_categories)]
    for i in iterations:
        opt_err.append(best - float(truths[optima[i]]))
        acts = sampled.get(i, [])
        regret.append(best - float(np.mean([truths[a] for a in acts])) if acts else 0.0)
        seconds.append(durations.get(i, 0.0))
        hist = estimates.get(i)
        if hist is None:
            ord_err.append(float("nan"))
            continue
        err_sum = 0.0
        conf = [[0] * scale.num_categories for _ in range(scale.num_categories)]
        for idx, mu in zip(hist["indices"], hist["mean"]):
            predicted = scale.bin_of(float(mu))
            true = oracle.true_label(action_at(space, idx))
            true = min(true, scale.num_categories)
            err_sum += abs(predicted - true)
            conf[true - 1][predicted - 1] += 1
        ord_err.append(err_sum / len(hist["indices"]))
        last_conf = conf

    return MetricsReport(
        iterations=iterations,
        optimal_action_error=opt_err,
        instantaneous_regret=regret,
        ordinal_prediction_error=ord_err,
        posterior_update_seconds=seconds,
        confusion_matrix=last_conf,
    )


def compare_runs(conditions: list[tuple[str, SessionConfig]], seeds: Sequence[int],
                 max_workers: int = 4,
                 clock: Clock | None = None) -> list[dict]:
    """Mean and standard error of every metric per condition and iteration.

    Seeds fan out across a bounded worker pool; rows are assembled in
    (condition, iteration) order regardless of completion order.
    """
    from concurrent.futures import ThreadPoolExecutor

    jobs = {}
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        for label, config in conditions:
            for seed in seeds:
                cfg = replace(config, sampler=replace(config.sampler, rng_seed=int(seed)))
                jobs[(label, int(seed))] = pool.submit(run_simulation, cfg, clock)
    results = {key: job.result()[1] for key, job in jobs.items()}

    metrics = ("optimal_action_error", "instantaneous_regret",
               "ordinal_prediction_error", "posterior_update_seconds")
    rows = []
    for label, config in conditions:
        reports = [results[(label, int(s))] for s in seeds]
        for it_pos, iteration in enumerate(reports[0].iterations):
            row = {"condition": label, "iteration": iteration}
            for m in metrics:
                vals = np.array([getattr(r, m)[it_pos] for r in reports], dtype=float)
                row[f"{m}_mean"] = float(np.mean(vals))
                row[f"{m}_se"] = (float(np.std(vals, ddof=1) / np.sqrt(len(vals)))
                                  if len(vals) > 1 else 0.0)
            rows.append(row)
    return rows


def comparison_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    cols = list(rows[0].keys())
    lines = [",".join(cols)]
    for row in rows:
        lines.append(",".join(
            str(row[c]) if isinstance(row[c], (str, int)) else repr(row[c]) for c in cols))
    return "\n".join(lines) + "\n"
