import json

import numpy as np
import pytest

from hypuml.errors import BoundaryViolation, CurvatureMismatch, LabelLengthMismatch
from hypuml.evaluation import BallPoints, cmc, distance_matrix, evaluate, first_match_ranks, write_report

from conftest import ball_points


def test_hand_computed_cmc():
    dist = np.array(
        [
            [0.0, 3.0, 1.0, 2.0],
            [3.0, 0.0, 2.0, 1.0],
            [1.0, 2.0, 0.0, 3.0],
            [2.0, 1.0, 3.0, 0.0],
        ]
    )
    labels = np.array([0, 0, 1, 1])
    # query 0: order 2,3,1 -> first match rank 3; query 1: 3,2,0 -> 3
    # query 2: 0,1,3 -> 3; query 3: 1,0,2 -> 3
    np.testing.assert_array_equal(first_match_ranks(dist, labels, labels), [3, 3, 3, 3])
    rep = cmc(dist, labels, labels, ks=(1, 2, 3))
    assert rep.recall == (0.0, 0.0, 1.0)


def test_ties_break_by_gallery_index():
    dist = np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
    q = np.array([0, 0, 1])
    ranks = first_match_ranks(dist, q, q)
    # query 0 sees 1 then 2 (tie), query 1 sees 0 then 2
    np.testing.assert_array_equal(ranks, [1, 1, 0])


def test_query_gallery_protocol_keeps_diagonal():
    dist = np.array([[0.0, 5.0], [5.0, 0.0]])
    rep = cmc(dist, [0, 1], [0, 1], ks=(1,), protocol="query-gallery")
    assert rep.recall == (1.0,)
    assert rep.num_gallery == 2


def test_degenerate_queries_excluded():
    dist = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 2.0], [2.0, 2.0, 0.0]])
    rep = cmc(dist, [0, 0, 1], [0, 0, 1], ks=(1,))
    assert rep.num_queries == 2 and rep.degenerate_queries == 1
    assert rep.recall == (1.0,)


def test_perfect_clusters(rng):
    c = 0.1
    centers = ball_points(rng, 5, 8, c, hi=0.5)
    pts = np.repeat(centers, 4, axis=0) + rng.standard_normal((20, 8)) * 1e-4
    rep = evaluate(BallPoints(pts, c), np.repeat(np.arange(5), 4))
    assert rep.recall_at(1) == 1.0


def test_recall_monotone_and_reaches_one(rng):
    c = 0.3
    pts = ball_points(rng, 60, 4, c)
    labels = rng.integers(0, 6, 60)
    ks = tuple(range(1, 60))
    rep = evaluate(BallPoints(pts, c), labels, ks=ks)
    assert all(a <= b for a, b in zip(rep.recall, rep.recall[1:]))
    assert rep.recall[-1] == 1.0
    assert all(0.0 <= r <= 1.0 for r in rep.recall)


def test_chance_level_monte_carlo():
    P, K, trials = 10, 5, 50
    N = P * K
    labels = np.repeat(np.arange(P), K)
    r = np.random.default_rng(99)
    vals = [
        evaluate(BallPoints(ball_points(r, N, 8, 0.1), 0.1), labels).recall_at(1) for _ in range(trials)
    ]
    p = (K - 1) / (N - 1)
    se = np.sqrt(p * (1 - p) / N / trials)
    assert abs(np.mean(vals) - p) <= 3 * se


def test_chunked_ranks_match(monkeypatch, rng):
    import hypuml.evaluation as ev

    dist = rng.random((30, 30))
    labels = rng.integers(0, 4, 30)
    full = first_match_ranks(dist, labels, labels)
    monkeypatch.setattr(ev, "_ROW_CHUNK", 7)
    np.testing.assert_array_equal(first_match_ranks(dist, labels, labels), full)


def test_curvature_mismatch(rng):
    a = BallPoints(ball_points(rng, 3, 2, 0.1), 0.1)
    b = BallPoints(ball_points(rng, 3, 2, 0.3), 0.3)
    with pytest.raises(CurvatureMismatch):
        distance_matrix(a, b)


def test_points_outside_ball_rejected():
    with pytest.raises(BoundaryViolation):
        BallPoints(np.array([[4.0, 0.0]]), 0.1)


def test_label_length_mismatch():
    with pytest.raises(LabelLengthMismatch):
        cmc(np.zeros((3, 3)), [0, 1], [0, 1, 2])


def test_report_outputs(tmp_path):
    dist = np.array([[0.0, 1.0], [1.0, 0.0]])
    rep = cmc(dist, [0, 0], [0, 0], ks=(1, 2))
    text = rep.format()
    assert "recall@1  1.0000" in text and "same-set" in text
    write_report(tmp_path / "r.json", rep)
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["recall"] == [{"k": 1, "recall": 1.0}, {"k": 2, "recall": 1.0}]


def test_untrained_head_chance_with_shuffled_labels():
    # a fresh head is close to an isometry on separable synthetic features, so
    # chance level is only reached once labels carry no information
    from hypuml.data import SynthSpec, generate_synthetic
    from hypuml.head import head_forward, init_head

    data = generate_synthetic(SynthSpec(num_classes=10, per_class=5, dim=64))
    pts = BallPoints(head_forward(data.features, init_head(64, 128, seed=0)), 0.1)
    dist = distance_matrix(pts, pts)
    r = np.random.default_rng(5)
    vals = [cmc(dist, lab, lab, ks=(1,)).recall[0] for lab in (r.permutation(data.labels) for _ in range(50))]
    N, K = 50, 5
    p = (K - 1) / (N - 1)
    assert abs(np.mean(vals) - p) <= 3 * np.sqrt(p * (1 - p) / N / 50)
