import numpy as np
import pytest

from polard.actions import DimensionSpec, action_at, build_space
from polard.engine import (
    CoactiveAnswer,
    ComparisonAnswer,
    OrdinalAnswer,
    PhaseError,
    QueryResponses,
    SessionConfig,
    SessionError,
    advance,
    build_queries,
    compare_runs,
    comparison_csv,
    evaluate_metrics,
    parse_transcript,
    replay_transcript,
    run_simulation,
    start_session,
    state_digest,
    submit_feedback,
    synthesize_responses,
    feedback_rng,
    transcript_lines,
)
from polard.feedback import NoiseParams, OrdinalScale
from polard.posterior import KernelConfig, SolverConfig
from polard.sampling import SamplerConfig
from polard.synthetic import BenchmarkFunction, SyntheticOracle


def ramp_oracle(n=10, **kwargs) -> SyntheticOracle:
    vals = tuple(float(i) / (n - 1) for i in range(n))
    defaults = dict(c_p=1e-6, c_c=1e-6, c_o=1e-6,
                    ordinal_thresholds=(0.35, 0.75), eps1=0.25, eps2=0.4,
                    f_eps1=0.3, f_eps2=0.7)
    defaults.update(kwargs)
    return SyntheticOracle(truth=BenchmarkFunction(kind="grid_table", table=vals), **defaults)


def ramp_config(n_actions=10, seed=0, mode="regret_min", iterations=5, n=1, b=1,
                feedback_types=("preference", "coactive", "ordinal"),
                use_subset=True, oracle=None, **sampler_kwargs) -> SessionConfig:
    space = build_space([DimensionSpec(0.0, (n_actions - 1) / 10, 0.1)])
    return SessionConfig(
        space=space,
        sampler=SamplerConfig(mode=mode, n=n, b=b, R=6, use_subset=use_subset,
                              mc_samples=60, rng_seed=seed, b_roi=-10.0,
                              **sampler_kwargs),
        kernel=KernelConfig(signal_variance=1.0, lengthscales=(0.3,), jitter=1e-5),
        noise=NoiseParams(c_p=0.1, c_c=0.2, c_o=0.4),
        scale=OrdinalScale(3, (-0.5, 0.5)),
        iterations=iterations,
        feedback_types=tuple(feedback_types),
        solver=SolverConfig(),
        source="synthetic" if oracle is not None else "human",
        oracle=oracle,
    )


def skip_everything(state) -> QueryResponses:
    bundle = build_queries(state)
    return QueryResponses(
        comparisons=[ComparisonAnswer(pair=p, winner=None) for p in bundle.comparisons],
        coactive=[CoactiveAnswer(action=a, suggestion=None) for a in bundle.coactive_prompts],
        ordinal=[OrdinalAnswer(action=a, label=None) for a in bundle.ordinal_prompts],
    )


class TestStartSession:
    def test_single_random_first_action(self):
        state = start_session(ramp_config(seed=1))
        assert state.iteration == 1
        assert state.phase == "awaiting_feedback"
        assert len(state.current_actions) == 1
        assert len(state.datasets) == 0

    def test_seeded_determinism(self):
        a = start_session(ramp_config(seed=5))
        b = start_session(ramp_config(seed=5))
        assert a.current_actions == b.current_actions

    def test_comparison_count_after_first_advance(self):
        # n = 2, b = 1: second iteration queries C(3, 2) = 3 comparisons
        config = ramp_config(seed=3, n=2, b=1)
        state = start_session(config)
        submit_feedback(state, skip_everything(state))
        advance(state)
        bundle = build_queries(state)
        pool = set(state.current_actions) | set(state.query_buffer)
        if len(pool) == 3:  # distinct draws; duplicates legitimately shrink the pool
            assert len(bundle.comparisons) == 3

    def test_invalid_config_rejected(self):
        with pytest.raises(ValueError):
            ramp_config(iterations=0)
        with pytest.raises(ValueError):
            ramp_config(feedback_types=())
        with pytest.raises(ValueError):
            ramp_config(n=1, b=0)  # preference feedback needs n + b >= 2


class TestQueries:
    def test_one_comparison_for_n1_b1(self):
        state = start_session(ramp_config(seed=7))
        submit_feedback(state, skip_everything(state))
        advance(state)
        bundle = build_queries(state)
        if state.current_actions[0] not in state.query_buffer:
            assert len(bundle.comparisons) == 1

    def test_one_comparison_for_n2_b0(self):
        state = start_session(ramp_config(seed=7, n=2, b=0))
        bundle = build_queries(state)
        assert len(bundle.comparisons) == 1

    def test_no_self_pairs(self):
        state = start_session(ramp_config(seed=7))
        for pair in build_queries(state).comparisons:
            assert pair[0] != pair[1]

    def test_prompts_follow_enabled_types(self):
        state = start_session(ramp_config(seed=2, feedback_types=("ordinal",), b=0))
        bundle = build_queries(state)
        assert bundle.comparisons == []
        assert bundle.coactive_prompts == []
        assert len(bundle.ordinal_prompts) == 1

    def test_wrong_phase_rejected(self):
        state = start_session(ramp_config(seed=2))
        submit_feedback(state, skip_everything(state))
        with pytest.raises(PhaseError):
            build_queries(state)


class TestSubmitFeedback:
    def test_all_skip_leaves_datasets_empty(self):
        state = start_session(ramp_config(seed=4))
        submit_feedback(state, skip_everything(state))
        assert len(state.datasets) == 0
        assert state.phase == "ready_to_advance"

    def test_preference_increments_dataset(self):
        state = start_session(ramp_config(seed=4, n=2, b=0))
        bundle = build_queries(state)
        pair = bundle.comparisons[0]
        responses = skip_everything(state)
        responses.comparisons = [ComparisonAnswer(pair=pair, winner=pair[0])]
        submit_feedback(state, responses)
        assert len(state.datasets.preferences) == 1
        assert state.datasets.preferences[0].winner == pair[0]

    def test_coactive_suggestion_snapped(self):
        state = start_session(ramp_config(seed=4))
        bundle = build_queries(state)
        target = bundle.coactive_prompts[0]
        coords = np.asarray(action_at(state.config.space, target).coords)
        other = coords + (0.1 if coords[0] < 0.5 else -0.1)
        suggestion = other + 0.04  # within step/2 of the neighboring point
        responses = skip_everything(state)
        responses.coactive = [CoactiveAnswer(action=target, suggestion=list(suggestion))]
        submit_feedback(state, responses)
        assert len(state.datasets.coactive) == 1
        rec = state.datasets.coactive[0]
        assert rec.original == target
        snapped_coords = action_at(state.config.space, rec.suggested).coords
        np.testing.assert_allclose(snapped_coords, other, atol=1e-9)

    def test_suggestion_equal_to_original_becomes_skip(self):
        state = start_session(ramp_config(seed=4))
        bundle = build_queries(state)
        target = bundle.coactive_prompts[0]
        responses = skip_everything(state)
        responses.coactive = [CoactiveAnswer(
            action=target, suggestion=list(action_at(state.config.space, target).coords))]
        submit_feedback(state, responses)
        assert len(state.datasets.coactive) == 0

    def test_rejects_unknown_pair(self):
        state = start_session(ramp_config(seed=4))
        responses = skip_everything(state)
        responses.comparisons = [ComparisonAnswer(pair=(997, 998), winner=997)]
        with pytest.raises(SessionError):
            submit_feedback(state, responses)

    def test_rejects_label_out_of_range(self):
        state = start_session(ramp_config(seed=4))
        bundle = build_queries(state)
        responses = skip_everything(state)
        responses.ordinal = [OrdinalAnswer(action=bundle.ordinal_prompts[0], label=9)]
        with pytest.raises(SessionError):
            submit_feedback(state, responses)

    def test_double_submit_rejected(self):
        state = start_session(ramp_config(seed=4))
        submit_feedback(state, skip_everything(state))
        with pytest.raises(PhaseError):
            submit_feedback(state, skip_everything(state))


class TestAdvance:
    def test_regret_subset_mode_updates_posterior_twice(self):
        config = ramp_config(seed=6, iterations=3, oracle=ramp_oracle())
        state, _ = run_simulation(config)
        per_iteration = {}
        for e in state.transcript:
            if e["event"] == "posterior_updated":
                per_iteration.setdefault(e["iteration"], []).append(e["stage"])
        assert per_iteration[1] == ["estimate"]  # first actions are random
        for i in (2, 3):
            assert sorted(per_iteration[i]) == ["estimate", "sample"]

    def test_active_mode_updates_once_per_iteration(self):
        config = ramp_config(seed=6, mode="active_learning", iterations=3,
                             oracle=ramp_oracle())
        state, _ = run_simulation(config)
        counts = {}
        for e in state.transcript:
            if e["event"] == "posterior_updated":
                counts[e["iteration"]] = counts.get(e["iteration"], 0) + 1
        assert counts == {1: 1, 2: 1, 3: 1}

    def test_active_sampled_action_within_roi(self):
        config = ramp_config(seed=8, mode="active_learning", iterations=4,
                             oracle=ramp_oracle())
        state, _ = run_simulation(config)
        for e in state.transcript:
            if e["event"] == "actions_sampled" and e["strategy"] == "info_gain":
                for margin in e["roi_margins"]:
                    assert margin > 0.0

    def test_without_subset_posterior_covers_full_space(self):
        for mode in ("regret_min", "active_learning"):
            config = ramp_config(n_actions=6, seed=9, mode=mode, iterations=2,
                                 use_subset=False, oracle=ramp_oracle(n=6))
            state, _ = run_simulation(config)
            assert len(state.posterior.subset) == state.config.space.cardinality

    def test_wrong_phase_rejected(self):
        state = start_session(ramp_config(seed=1))
        with pytest.raises(PhaseError):
            advance(state)

    def test_phase_machine_alternates(self):
        state = start_session(ramp_config(seed=1, iterations=2))
        assert state.phase == "awaiting_feedback"
        submit_feedback(state, skip_everything(state))
        assert state.phase == "ready_to_advance"
        advance(state)
        assert state.phase == "awaiting_feedback"
        submit_feedback(state, skip_everything(state))
        advance(state)
        assert state.phase == "finished"
        with pytest.raises(PhaseError):
            advance(state)

    def test_visited_accumulates_executed_actions(self):
        config = ramp_config(seed=10, iterations=4, oracle=ramp_oracle())
        state, _ = run_simulation(config)
        assert set(state.executed) == set(state.visited.indices)
        assert len(state.executed) == 4  # n = 1 per iteration

    def test_solver_failure_rolls_back_state(self, monkeypatch):
        import polard.engine as engine_mod

        state = start_session(ramp_config(seed=23, iterations=3))
        submit_feedback(state, skip_everything(state))
        digest_before = state_digest(state)
        rng_before = state.rng.bit_generator.state

        def boom(*args, **kwargs):
            raise RuntimeError("factorization failed")

        monkeypatch.setattr(engine_mod, "update_posterior", boom)
        with pytest.raises(RuntimeError):
            advance(state)
        assert state.phase == "ready_to_advance"
        assert state_digest(state) == digest_before
        assert state.rng.bit_generator.state == rng_before
        # a fixed solver lets the same advance succeed afterwards
        monkeypatch.undo()
        advance(state)
        assert state.phase == "awaiting_feedback"


class TestSimulation:
    def test_single_iteration_metrics(self):
        config = ramp_config(seed=11, iterations=1, oracle=ramp_oracle())
        state, report = run_simulation(config)
        assert report.iterations == [1]
        assert len(report.optimal_action_error) == 1

    def test_identical_seeds_identical_reports(self):
        config = ramp_config(seed=12, iterations=4, oracle=ramp_oracle())
        _, r1 = run_simulation(config)
        _, r2 = run_simulation(config)
        assert r1 == r2

    def test_noise_free_ramp_converges(self):
        hits = 0
        for seed in range(6):
            config = ramp_config(seed=seed, iterations=15, oracle=ramp_oracle())
            _, report = run_simulation(config)
            hits += report.optimal_action_error[-1] == 0.0
        assert hits >= 5

    def test_requires_synthetic_source(self):
        with pytest.raises(ValueError):
            run_simulation(ramp_config(seed=1))

    def test_metrics_nonnegative(self):
        config = ramp_config(seed=13, iterations=5, oracle=ramp_oracle())
        _, report = run_simulation(config)
        assert all(v >= 0 for v in report.optimal_action_error)
        assert all(v >= 0 for v in report.instantaneous_regret)

    def test_metrics_zero_when_optimum_found(self):
        config = ramp_config(seed=14, iterations=12, oracle=ramp_oracle())
        state, report = run_simulation(config)
        oracle = config.oracle
        if state.optimum_estimate == oracle.best_action(config.space):
            assert report.optimal_action_error[-1] == 0.0

    def test_confusion_matrix_shape_and_mass(self):
        config = ramp_config(seed=15, iterations=5, oracle=ramp_oracle())
        state, report = run_simulation(config)
        r = config.scale.num_categories
        conf = np.asarray(report.confusion_matrix)
        assert conf.shape == (r, r)
        assert conf.sum() == len(state.posterior_history[-1]["indices"])

    def test_csv_row_count(self):
        config = ramp_config(seed=16, iterations=4, oracle=ramp_oracle())
        _, report = run_simulation(config)
        lines = report.csv_text().strip().splitlines()
        assert lines[0].startswith("iteration,optimal_action_error")
        assert len(lines) == 5


class TestEvaluateMetrics:
    def test_perfect_predictor_has_diagonal_confusion(self):
        # model thresholds equal to the oracle's and tiny noise: predictions
        # land exactly in the true bins once utilities are learned precisely
        config = ramp_config(seed=17, iterations=1, oracle=ramp_oracle())
        state, report = run_simulation(config)
        # build a fake history entry whose means are equal to the truth
        oracle = config.oracle
        truths = oracle.utilities(config.space)
        state.posterior_history[-1]["mean"] = truths[
            np.asarray(state.posterior_history[-1]["indices"], dtype=int)]
        # model scale == oracle thresholds in this config
        state.config.scale = OrdinalScale(3, oracle.ordinal_thresholds)
        report = evaluate_metrics(state, oracle)
        conf = np.asarray(report.confusion_matrix)
        assert conf.sum() == np.trace(conf)
        assert report.ordinal_prediction_error[-1] == 0.0


class TestCompare:
    def test_single_condition_single_seed_matches_run(self):
        config = ramp_config(seed=0, iterations=3, oracle=ramp_oracle())
        rows = compare_runs([("only", config)], seeds=[21])
        from dataclasses import replace

        cfg = replace(config, sampler=replace(config.sampler, rng_seed=21))
        _, report = run_simulation(cfg)
        assert len(rows) == 3
        for row, err in zip(rows, report.optimal_action_error):
            assert row["optimal_action_error_mean"] == pytest.approx(err)
            assert row["optimal_action_error_se"] == 0.0

    def test_identical_conditions_identical_rows(self):
        config = ramp_config(seed=0, iterations=2, oracle=ramp_oracle())
        rows = compare_runs([("a", config), ("b", config)], seeds=[1, 2])
        a_rows = [dict(r, condition="") for r in rows if r["condition"] == "a"]
        b_rows = [dict(r, condition="") for r in rows if r["condition"] == "b"]
        assert a_rows == b_rows

    def test_csv_export(self):
        config = ramp_config(seed=0, iterations=2, oracle=ramp_oracle())
        rows = compare_runs([("a", config)], seeds=[1])
        text = comparison_csv(rows)
        assert text.splitlines()[0].startswith("condition,iteration,")
        assert len(text.strip().splitlines()) == 3


class TestTranscript:
    def test_replay_reproduces_state(self):
        config = ramp_config(seed=18, iterations=4, oracle=ramp_oracle())
        state, _ = run_simulation(config)
        events = parse_transcript(transcript_lines(state.transcript))
        replayed = replay_transcript(events)
        assert state_digest(replayed) == state_digest(state)
        assert replayed.executed == state.executed
        assert replayed.optimum_estimate == state.optimum_estimate
        np.testing.assert_array_equal(replayed.posterior.mean, state.posterior.mean)

    def test_replay_of_partial_session(self):
        config = ramp_config(seed=19, iterations=5, oracle=ramp_oracle())
        state = start_session(config)
        from polard.engine import submit_records

        for _ in range(2):
            rng = feedback_rng(config.seed, state.iteration)
            submit_records(state, synthesize_responses(state, config.oracle, rng))
            advance(state)
        replayed = replay_transcript(state.transcript)
        assert replayed.iteration == state.iteration
        assert replayed.phase == state.phase
        assert state_digest(replayed) == state_digest(state)

    def test_transcript_contains_required_events(self):
        config = ramp_config(seed=20, iterations=2, oracle=ramp_oracle())
        state, _ = run_simulation(config)
        kinds = {e["event"] for e in state.transcript}
        assert {"session_started", "actions_sampled", "query_issued", "feedback_recorded",
                "posterior_updated", "optimum_updated", "session_finished"} <= kinds

    def test_feedback_record_schema(self):
        config = ramp_config(seed=21, iterations=3, oracle=ramp_oracle())
        state, _ = run_simulation(config)
        for e in state.transcript:
            if e["event"] != "feedback_recorded":
                continue
            for rec in e["records"]:
                assert rec["type"] in ("preference", "coactive", "ordinal", "skip")
                if rec["type"] == "preference":
                    assert set(rec) == {"type", "winner", "loser"}
                elif rec["type"] == "coactive":
                    assert set(rec) == {"type", "suggested", "original"}
                elif rec["type"] == "ordinal":
                    assert set(rec) == {"type", "action", "label"}


class TestConfigRoundtrip:
    def test_to_from_dict(self):
        config = ramp_config(seed=22, iterations=7, oracle=ramp_oracle())
        rebuilt = SessionConfig.from_dict(config.to_dict())
        assert rebuilt.to_dict() == config.to_dict()
        assert rebuilt.space.cardinality == config.space.cardinality
        assert rebuilt.sampler == config.sampler
