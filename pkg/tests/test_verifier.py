import numpy as np
import pytest

from achilles import (
    Box,
    ExternalQuery,
    GridOutcome,
    QueryFormatError,
    VerdictKind,
    VerificationQuery,
    WitnessValidationError,
    check_witness,
    classify,
    classify_batch,
    export_query,
    export_witness,
    forward,
    forward_batch,
    grid_oracle,
    import_query,
    import_witness,
    interval_bounds,
    lipschitz_bound,
    margin,
    random_network,
    validate_witness,
    verify_local_robustness,
)
from helpers import flip_net, net_from_lists, zero_net


class TestIntervalBounds:
    def test_point_box_collapses_to_forward(self):
        net = random_network([2, 5, 3], 44)
        x = np.array([0.3, 0.8])
        lo, hi = interval_bounds(net, Box(lower=x, upper=x))
        values = forward(net, x).values
        assert np.allclose(lo, values, rtol=1e-9, atol=1e-12)
        assert np.allclose(hi, values, rtol=1e-9, atol=1e-12)
        assert (lo <= hi).all()

    def test_zero_net_bounds_are_biases(self):
        lo, hi = interval_bounds(zero_net(), Box(lower=[0.0, 0.0], upper=[1.0, 1.0]))
        assert np.array_equal(lo, [0.0, 0.0])
        assert np.array_equal(hi, [0.0, 0.0])
        biased = net_from_lists(
            [[[0.0]], [[0.0], [0.0]]], [[0.0], [2.0, -1.0]], [0.0], [1.0]
        )
        lo, hi = interval_bounds(biased, Box(lower=[0.0], upper=[1.0]))
        assert np.array_equal(lo, [2.0, -1.0])
        assert np.array_equal(hi, [2.0, -1.0])

    def test_sampled_points_stay_inside_enclosure(self):
        net = random_network([2, 4, 2], 45)
        lo, hi = interval_bounds(net, Box(lower=[0.0, 0.0], upper=[1.0, 1.0]))
        rng = np.random.default_rng(45)
        values = forward_batch(net, rng.uniform(0, 1, size=(10_000, 2)))
        assert (values >= lo - 1e-12).all()
        assert (values <= hi + 1e-12).all()

    def test_dimension_check(self):
        with pytest.raises(ValueError, match="dimensions"):
            interval_bounds(zero_net(), Box(lower=[0.0], upper=[1.0]))


class TestBox:
    def test_ordering_enforced(self):
        with pytest.raises(ValueError, match="exceeds"):
            Box(lower=[1.0], upper=[0.0])

    def test_widths(self):
        box = Box(lower=[0.0, 0.25], upper=[1.0, 0.75])
        assert np.array_equal(box.widths, [1.0, 0.5])
        assert np.array_equal(box.center, [0.5, 0.5])


class TestVerify:
    def test_lipschitz_safe_radius_is_unsat_at_root(self):
        net = flip_net()
        # margin(0.1) = 0.8 > 2 * L * delta = 0.1: certification inevitable.
        assert margin(net, [0.1]) > 2 * lipschitz_bound(net) * 0.05
        verdict = verify_local_robustness(
            net, VerificationQuery.for_point(net, [0.1], 0.05)
        )
        assert verdict.kind is VerdictKind.UNSAT
        assert verdict.boxes_explored <= 3

    def test_flip_net_sat_with_witness_past_boundary(self):
        net = flip_net()
        query = VerificationQuery.for_point(net, [0.4], 0.2)
        verdict = verify_local_robustness(net, query)
        assert verdict.kind is VerdictKind.SAT
        assert verdict.witness[0] >= 0.5
        assert check_witness(net, query, verdict.witness)

    def test_unsat_survives_random_falsification(self):
        net = random_network([2, 6, 6, 2], 321)
        rng = np.random.default_rng(321)
        query = None
        verdict = None
        for _ in range(50):
            x0 = rng.uniform(0, 1, size=2)
            candidate = VerificationQuery.for_point(net, x0, 0.02, time_budget=10.0)
            result = verify_local_robustness(net, candidate)
            if result.kind is VerdictKind.UNSAT:
                query, verdict = candidate, result
                break
        assert verdict is not None, "no UNSAT query found to falsify"
        from achilles.nn import perturbation_region

        lo, hi = perturbation_region(net, query.x0, query.delta)
        points = rng.uniform(lo, hi, size=(100_000, 2))
        assert (classify_batch(net, points) == query.label0).all()

    def test_budget_exhaustion(self):
        # The zero net never certifies (all outputs tie) and never
        # misclassifies; a tiny budget must stop the search.
        net = zero_net()
        query = VerificationQuery.for_point(
            net, [0.5, 0.5], 0.25, time_budget=0.05, min_box_width=0.25e-9
        )
        verdict = verify_local_robustness(net, query)
        assert verdict.kind is VerdictKind.UNKNOWN
        assert verdict.reason == "budget"

    def test_precision_exhaustion(self):
        net = zero_net()
        query = VerificationQuery.for_point(
            net, [0.5, 0.5], 0.25, time_budget=30.0, min_box_width=0.2
        )
        verdict = verify_local_robustness(net, query)
        assert verdict.kind is VerdictKind.UNKNOWN
        assert verdict.reason == "precision"
        # Monotone progress: the region is 0.5 wide per dimension, so two
        # halvings per dimension reach the width floor; the tree is small
        # and the depth bounded accordingly.
        assert verdict.max_depth <= 4
        assert verdict.boxes_explored <= 2 ** (2 * 2 + 1)

    def test_label_consistency_checked(self):
        net = flip_net()
        with pytest.raises(ValueError, match="label"):
            verify_local_robustness(
                net, VerificationQuery(x0=np.array([0.4]), delta=0.1, label0=0)
            )

    def test_ball_outside_box_rejected(self):
        net = flip_net()
        with pytest.raises(ValueError, match="intersect"):
            verify_local_robustness(
                net, VerificationQuery(x0=np.array([3.0]), delta=0.5, label0=0)
            )

    def test_stats_populated(self):
        net = flip_net()
        verdict = verify_local_robustness(
            net, VerificationQuery.for_point(net, [0.4], 0.2)
        )
        assert verdict.boxes_explored >= 1
        assert verdict.wall_time >= 0.0

    def test_agreement_with_grid_oracle(self):
        conflicts = []
        for seed in range(5):
            net = random_network([2, 6, 6, 2], 600 + seed, weight_scale=2.0)
            rng = np.random.default_rng(seed)
            for _ in range(10):
                x0 = rng.uniform(0, 1, size=2)
                delta = float(rng.uniform(0.02, 0.15))
                query = VerificationQuery.for_point(net, x0, delta, time_budget=10.0)
                verdict = verify_local_robustness(net, query)
                oracle = grid_oracle(net, query, spacing=delta / 15.0)
                if oracle.outcome is GridOutcome.SAT and verdict.kind is VerdictKind.UNSAT:
                    conflicts.append((seed, x0, delta))
                if oracle.outcome is GridOutcome.UNSAT and verdict.kind is VerdictKind.SAT:
                    conflicts.append((seed, x0, delta))
                if verdict.kind is VerdictKind.SAT:
                    assert check_witness(net, query, verdict.witness)
        assert conflicts == []


class TestGridOracle:
    def test_degenerate_region_with_positive_margin_is_unsat(self):
        # The input box is a single point, so the region degenerates to
        # one grid point and the realized spacing is zero.
        net = net_from_lists(
            [[[1.0]], [[1.0], [-1.0]]],
            [[0.0], [0.0, 1.0]],
            lower=[0.25],
            upper=[0.25],
        )
        query = VerificationQuery.for_point(net, [0.25], 0.5)
        assert margin(net, [0.25]) > 0
        result = grid_oracle(net, query, spacing=0.01)
        assert result.outcome is GridOutcome.UNSAT

    def test_flip_net_sat(self):
        net = flip_net()
        query = VerificationQuery.for_point(net, [0.4], 0.2)
        result = grid_oracle(net, query, spacing=0.01)
        assert result.outcome is GridOutcome.SAT
        assert check_witness(net, query, result.witness)

    def test_high_margin_unsat(self):
        net = flip_net()
        query = VerificationQuery.for_point(net, [0.1], 0.05)
        result = grid_oracle(net, query, spacing=0.001)
        assert result.outcome is GridOutcome.UNSAT

    def test_inconclusive_band(self):
        # No grid point flips, but the worst margin (0.1 at x=0.45) is
        # clearly below the certificate (realized spacing 0.2).
        net = flip_net()
        query = VerificationQuery.for_point(net, [0.35], 0.1)
        result = grid_oracle(net, query, spacing=0.2)
        assert result.outcome is GridOutcome.INCONCLUSIVE

    def test_dimension_guard(self):
        net = zero_net(sizes=(4, 2, 2))
        query = VerificationQuery.for_point(net, [0.5] * 4, 0.1)
        with pytest.raises(ValueError, match="dimensions"):
            grid_oracle(net, query, spacing=0.05)

    def test_spacing_must_be_positive(self):
        net = flip_net()
        query = VerificationQuery.for_point(net, [0.4], 0.1)
        with pytest.raises(ValueError, match="spacing"):
            grid_oracle(net, query, spacing=0.0)


class TestExternalBoundary:
    def test_query_round_trip(self):
        query = VerificationQuery(x0=np.array([0.4, 0.7]), delta=0.125, label0=1)
        wire = ExternalQuery.from_query(query, "nets/a.relunet")
        assert import_query(export_query(query, "nets/a.relunet")) == wire
        rebuilt = wire.to_query(time_budget=5.0)
        assert np.array_equal(rebuilt.x0, query.x0)
        assert rebuilt.delta == query.delta
        assert rebuilt.label0 == query.label0

    def test_witness_round_trip(self):
        point = np.array([0.52, 0.13])
        assert np.array_equal(import_witness(export_witness(point)), point)

    def test_validation_gate_rejects_non_flip(self):
        net = flip_net()
        query = VerificationQuery.for_point(net, [0.4], 0.2)
        with pytest.raises(WitnessValidationError):
            validate_witness(net, query, [0.45])  # still label 1

    def test_validation_gate_rejects_distant_point(self):
        net = flip_net()
        query = VerificationQuery.for_point(net, [0.2], 0.1)
        with pytest.raises(WitnessValidationError):
            validate_witness(net, query, [0.8])  # flips, but outside the ball

    def test_hand_written_witness_accepted(self):
        net = flip_net()
        query = VerificationQuery.for_point(net, [0.4], 0.2)
        verdict = validate_witness(net, query, import_witness("witness v1\nx 0.55\n"))
        assert verdict.kind is VerdictKind.SAT
        assert classify(net, verdict.witness) == 0

    def test_malformed_inputs(self):
        with pytest.raises(QueryFormatError):
            import_query("query v2\n")
        with pytest.raises(QueryFormatError):
            import_query("query v1\nnet a\nx0 nope\ndelta 0.1\nlabel 0\n")
        with pytest.raises(QueryFormatError):
            import_witness("witness v1\ny 1 2\n")
