import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import greedy_farthest_first, grid_min_1d, grid_min_2d, random_dissimilarity

from embedblock.datagen import generate_clean_records
from embedblock.embedding import (
    OosConfig,
    StressConfig,
    StressNormalizationError,
    embed_dataset,
    embed_out_of_sample,
    load_embedding,
    lsmds_full,
    normalized_stress,
    oos_objective,
    raw_stress,
    save_embedding,
    select_landmarks_farthest_first,
)
from embedblock.strdist import LEVENSHTEIN_CALLS, distance_matrix

# -- stress -------------------------------------------------------------------


def test_raw_stress_examples():
    X = np.array([[0.0, 0.0], [3.0, 4.0], [3.0, 0.0]])
    assert raw_stress(X, distance_from(X)) == 0.0
    assert raw_stress([[0.0], [1.0]], [[0, 3], [3, 0]]) == 4.0
    assert raw_stress([[1.0, 2.0]], [[0.0]]) == 0.0
    with pytest.raises(ValueError):
        raw_stress([[0.0], [1.0]], np.zeros((3, 3)))


def distance_from(X):
    return np.sqrt(((X[:, None] - X[None]) ** 2).sum(-1))


def test_normalized_stress_examples():
    X = np.array([[0.0], [2.0], [5.0]])
    assert normalized_stress(X, distance_from(X)) == 0.0
    assert normalized_stress([[0.0], [1.0]], [[0, 3], [3, 0]]) == pytest.approx(2 / 3, abs=1e-15)
    rng = np.random.default_rng(0)
    D = random_dissimilarity(rng, 6)
    assert normalized_stress(np.zeros((6, 2)), D) == 1.0
    with pytest.raises(StressNormalizationError):
        normalized_stress(np.zeros((3, 1)), np.zeros((3, 3)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0, 2 * np.pi), st.floats(-50, 50), st.floats(-50, 50))
def test_stress_rigid_invariance(seed, theta, tx, ty):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(8, 2))
    D = random_dissimilarity(rng, 8)
    R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    Y = X @ R.T + np.array([tx, ty])
    assert raw_stress(Y, D) == pytest.approx(raw_stress(X, D), abs=1e-9)


# -- SMACOF -------------------------------------------------------------------


def test_lsmds_equilateral_triangle():
    D = np.full((3, 3), 2.0) - 2.0 * np.eye(3)
    conf = lsmds_full(D, 2, StressConfig(max_iterations=2000, rel_tolerance=1e-12))
    assert conf.normalized_stress <= 1e-6


def test_lsmds_single_point_and_pair():
    conf = lsmds_full(np.zeros((1, 1)), 3)
    assert np.array_equal(conf.points, np.zeros((1, 3))) and conf.normalized_stress == 0
    conf = lsmds_full(np.array([[0.0, 4.0], [4.0, 0.0]]), 1)
    assert abs(abs(conf.points[0, 0] - conf.points[1, 0]) - 4.0) <= 1e-9
    assert conf.normalized_stress <= 1e-9


def test_lsmds_rejects_bad_input():
    with pytest.raises(ValueError):
        lsmds_full(np.zeros((0, 0)), 2)
    with pytest.raises(ValueError):
        lsmds_full(np.zeros((2, 2)), 0)


def test_lsmds_stress_fields_consistent():
    D = random_dissimilarity(np.random.default_rng(3), 20)
    conf = lsmds_full(D, 3)
    assert conf.normalized_stress == pytest.approx(normalized_stress(conf.points, D), rel=1e-12)
    assert conf.raw_stress == pytest.approx(raw_stress(conf.points, D), rel=1e-12)
    assert 0 <= conf.normalized_stress <= 1
    assert conf.stress_history[-1] == conf.normalized_stress


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 25), st.integers(1, 4))
def test_smacof_descent_property(seed, n, K):
    D = random_dissimilarity(np.random.default_rng(seed), n)
    hist = lsmds_full(D, K, StressConfig(rng_seed=seed)).stress_history
    assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))


def test_lsmds_deterministic_per_seed():
    D = random_dissimilarity(np.random.default_rng(1), 15)
    a = lsmds_full(D, 2, StressConfig(rng_seed=4))
    b = lsmds_full(D, 2, StressConfig(rng_seed=4))
    assert np.array_equal(a.points, b.points)


# -- farthest-first -------------------------------------------------------------


def test_farthest_first_examples():
    values = ["ab", "zz", "aa"]
    assert select_landmarks_farthest_first(values, 1) == [2]
    assert set(select_landmarks_farthest_first(values, 2)) == {2, 1}
    assert sorted(select_landmarks_farthest_first(values, 3)) == [0, 1, 2]
    with pytest.raises(ValueError):
        select_landmarks_farthest_first(values, 4)
    with pytest.raises(ValueError):
        select_landmarks_farthest_first(values, 0)


def test_farthest_first_brute_force_pair():
    # "zz" is the unique value at maximal distance from the start "aa"
    values = ["aa", "ab", "zz"]
    best = max(range(1, 3), key=lambda j: distance_matrix(values)[0, j])
    assert select_landmarks_farthest_first(values, 2) == [0, best] == [0, 2]


@settings(max_examples=25, deadline=None)
@given(st.lists(st.text(alphabet="abc", min_size=1, max_size=5), min_size=1, max_size=10), st.data())
def test_farthest_first_matches_greedy_oracle(values, data):
    L = data.draw(st.integers(1, len(values)))
    assert select_landmarks_farthest_first(values, L) == greedy_farthest_first(values, L)


# -- out-of-sample --------------------------------------------------------------


@pytest.mark.parametrize("seed", range(5))
def test_oos_single_landmark_sphere(seed):
    y = embed_out_of_sample(np.zeros((1, 3)), [5.0], OosConfig(rng_seed=seed))
    assert abs(np.linalg.norm(y) - 5.0) <= 1e-3


def test_oos_coincident_landmarks_zero_deltas():
    x = np.array([1.5, -2.0])
    y = embed_out_of_sample(np.tile(x, (3, 1)), [0.0, 0.0, 0.0])
    assert np.all(np.abs(y - x) <= 1e-6)


def test_oos_two_landmarks_1d_against_grid():
    landmarks, deltas = np.array([[0.0], [10.0]]), np.array([4.0, 6.0])
    y = embed_out_of_sample(landmarks, deltas)
    best, arg = grid_min_1d(landmarks, deltas)
    assert abs(y[0] - 4.0) <= 1e-3 and abs(arg[0] - 4.0) <= 1e-3
    assert abs(oos_objective(landmarks, deltas, y) - best) <= 1e-3


def test_oos_2d_against_grid():
    landmarks = np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 3.0]])
    deltas = np.array([2.5, 2.5, 2.0])
    y = embed_out_of_sample(landmarks, deltas)
    best, _ = grid_min_2d(landmarks, deltas)
    assert abs(oos_objective(landmarks, deltas, y) - best) <= 1e-3


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 12), st.integers(1, 5))
def test_oos_objective_never_increases(seed, L, K):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(L, K)) * 3
    d = rng.uniform(0, 6, size=L)
    y, hist = embed_out_of_sample(X, d, OosConfig(rng_seed=seed), return_history=True)
    assert np.all(np.diff(hist) <= 0)
    assert oos_objective(X, d, y) == hist[-1]


def test_oos_deterministic_and_keyed():
    X = np.random.default_rng(0).normal(size=(6, 3))
    d = np.arange(1.0, 7.0)
    assert np.array_equal(embed_out_of_sample(X, d, key="ann lee"), embed_out_of_sample(X, d, key="ann lee"))


def test_oos_rejects_bad_input():
    with pytest.raises(ValueError):
        embed_out_of_sample(np.zeros((0, 2)), [])
    with pytest.raises(ValueError):
        embed_out_of_sample(np.zeros((2, 2)), [1.0])
    with pytest.raises(ValueError):
        embed_out_of_sample(np.zeros((1, 2)), [-1.0])


def test_oos_config_step_schedule():
    steps = OosConfig().steps()
    assert np.all(steps > 0) and np.all(np.diff(steps) <= 0)
    with pytest.raises(ValueError):
        OosConfig(epochs=0)


# -- whole-dataset embedding -----------------------------------------------------


def test_complete_path_equals_lsmds_full():
    values = ["ann lee", "anne lee", "bob roy"]
    emb = embed_dataset(values, 2, L=3)
    conf = lsmds_full(distance_matrix(values), 2)
    assert np.array_equal(emb.points, conf.points)
    assert emb.landmark_indices.tolist() == [0, 1, 2]


def test_landmark_call_count_law():
    values = generate_clean_records(100, 2).blocking_values()
    LEVENSHTEIN_CALLS.reset()
    embed_dataset(values, 3, L=20)
    assert LEVENSHTEIN_CALLS.count == 190 + 1600 == 20 * 19 // 2 + 80 * 20


def test_copy_of_landmark_lands_on_landmark():
    # runs of one letter have edit distance |i - j|, a line metric embeddable with zero stress
    base = ["a" * i for i in range(1, 31)]
    cfg = StressConfig(max_iterations=3000, rel_tolerance=1e-14)
    emb = embed_dataset(base + base[::7], 2, L=10, cfg=cfg)
    assert emb.landmark_config.normalized_stress < 0.05
    lm_pos = {emb.landmark_values[j]: emb.landmark_indices[j] for j in range(emb.n_landmarks)}
    checked = 0
    for i, v in enumerate(base + base[::7]):
        if v in lm_pos and i != lm_pos[v]:
            assert np.linalg.norm(emb.points[i] - emb.points[lm_pos[v]]) <= 1e-3
            checked += 1
    assert checked >= 1


def test_embedding_deterministic():
    values = generate_clean_records(80, 5).blocking_values()
    a = embed_dataset(values, 3, L=15)
    b = embed_dataset(values, 3, L=15)
    assert np.array_equal(a.points, b.points)
    assert np.array_equal(a.landmark_indices, b.landmark_indices)


def test_embedding_invariants():
    values = generate_clean_records(60, 1).blocking_values()
    emb = embed_dataset(values, 4, L=12)
    assert emb.points.shape == (60, 4) and np.all(np.isfinite(emb.points))
    assert len(set(emb.landmark_indices.tolist())) == 12
    assert emb.landmark_values == [values[i] for i in emb.landmark_indices]
    with pytest.raises(ValueError):
        embed_dataset(values, 2, L=61)


def test_persistence_round_trip(tmp_path):
    rs = generate_clean_records(50, 3)
    emb = embed_dataset(rs.blocking_values(), 3, L=10, oos_cfg=OosConfig(rng_seed=2))
    save_embedding(tmp_path, emb, rs.ids, {"mode": "landmark"})
    back, ids, manifest = load_embedding(tmp_path)
    assert ids == rs.ids
    assert np.array_equal(back.points, emb.points)
    assert np.array_equal(back.landmark_indices, emb.landmark_indices)
    assert back.landmark_values == emb.landmark_values
    assert back.oos_config == emb.oos_config and back.stress_config == emb.stress_config
    assert manifest["K"] == 3 and manifest["L"] == 10 and manifest["mode"] == "landmark"
    assert manifest["normalized_stress"] == emb.landmark_config.normalized_stress


@pytest.mark.parametrize("seed", range(20))
def test_oos_escapes_symmetric_saddle(seed):
    # the start lies on the line through both landmarks, a saddle of the objective;
    # the circles intersect off that line, so the true minimum is zero
    landmarks, deltas = np.array([[0.0, 0.0], [6.0, 0.0]]), np.array([3.0, 4.0])
    y = embed_out_of_sample(landmarks, deltas, OosConfig(rng_seed=seed))
    assert oos_objective(landmarks, deltas, y) <= 1e-3
