"""Least-squares MDS embedding of blocking values.

Landmarks are chosen by farthest-first traversal in edit distance and placed
by SMACOF majorization. Every other value, and every later query, is placed
against the landmarks alone by stochastic gradient descent on its own
landmark stress.
"""

from __future__ import annotations

import csv
import json
import math
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numba import njit
from scipy.spatial.distance import cdist, pdist

from .strdist import EncodedStrings, check_dissimilarity, distance_matrix, levenshtein_to_many

COINCIDENCE_EPS = 1e-12


class StressNormalizationError(ValueError):
    """Normalized stress is undefined when every dissimilarity is zero."""


@dataclass(frozen=True)
class StressConfig:
    """SMACOF settings. All pair weights are fixed at 1."""

    max_iterations: int = 300
    rel_tolerance: float = 1e-6
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.rel_tolerance <= 0:
            raise ValueError("rel_tolerance must be positive")

    @property
    def weights(self) -> float:
        return 1.0


@dataclass(frozen=True)
class OosConfig:
    """Out-of-sample SGD settings.

    The step for epoch ``t`` (0-based) is ``initial_step / (1 + step_decay * t)``.
    ``jitter`` is the standard deviation of the seeded perturbation added to
    the starting landmark.
    """

    epochs: int = 200
    initial_step: float = 0.25
    step_decay: float = 0.05
    rng_seed: int = 0
    jitter: float = 0.1

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if self.initial_step <= 0 or self.step_decay < 0:
            raise ValueError("steps must be positive and non-increasing")
        if self.jitter < 0:
            raise ValueError("jitter must be non-negative")

    def steps(self) -> np.ndarray:
        t = np.arange(self.epochs, dtype=np.float64)
        return self.initial_step / (1.0 + self.step_decay * t)


@dataclass
class Configuration:
    points: np.ndarray
    raw_stress: float
    normalized_stress: float
    n_iter: int = 0
    stress_history: list[float] = field(default_factory=list)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]


@dataclass
class Embedding:
    """Coordinates for ``n`` items plus the landmark bookkeeping that produced them.

    ``landmark_indices`` keeps selection order; ``landmark_config`` is the
    SMACOF result on the landmark sub-matrix in that order.
    """

    points: np.ndarray
    landmark_indices: np.ndarray
    landmark_values: list[str]
    landmark_config: Configuration
    stress_config: StressConfig
    oos_config: OosConfig

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def n_landmarks(self) -> int:
        return len(self.landmark_indices)

    @property
    def landmark_points(self) -> np.ndarray:
        return self.points[self.landmark_indices]


# -- stress -----------------------------------------------------------------


def _check_sizes(X, D):
    X = np.asarray(X, dtype=np.float64)
    D = np.asarray(D, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("configuration must be an n x K array")
    if D.shape != (X.shape[0], X.shape[0]):
        raise ValueError(f"size mismatch: {X.shape[0]} points vs dissimilarities {D.shape}")
    return X, D


def raw_stress(X, D) -> float:
    """Sum over unordered pairs of ``(d_ij(X) - delta_ij)**2``."""
    X, D = _check_sizes(X, D)
    n = X.shape[0]
    if n < 2:
        return 0.0
    iu = np.triu_indices(n, 1)
    return float(np.sum((pdist(X) - D[iu]) ** 2))


def normalized_stress(X, D) -> float:
    """``sqrt(raw_stress / sum_{i<j} delta_ij**2)``."""
    X, D = _check_sizes(X, D)
    iu = np.triu_indices(X.shape[0], 1)
    denom = float(np.sum(D[iu] ** 2))
    if denom <= 0:
        raise StressNormalizationError("all dissimilarities are zero")
    return math.sqrt(raw_stress(X, D) / denom)


# -- SMACOF -----------------------------------------------------------------


def lsmds_full(D, K: int, cfg: StressConfig = StressConfig()) -> Configuration:
    """Minimize raw stress by SMACOF from a seeded uniform start in ``[0, 1]^K``.

    Iteration stops when the relative decrease of normalized stress drops
    below ``cfg.rel_tolerance`` or after ``cfg.max_iterations`` Guttman
    transforms. ``stress_history`` holds the normalized stress of every
    iterate, starting with the initial configuration.
    """
    D = check_dissimilarity(D)
    n = D.shape[0]
    if n == 0:
        raise ValueError("cannot embed an empty dissimilarity matrix")
    if K < 1:
        raise ValueError("dimension K must be at least 1")
    if n == 1:
        return Configuration(np.zeros((1, K)), 0.0, 0.0, 0, [0.0])

    iu = np.triu_indices(n, 1)
    delta = D[iu]
    denom = float(np.sum(delta**2))
    if denom == 0:
        return Configuration(np.zeros((n, K)), 0.0, 0.0, 0, [0.0])

    rng = np.random.default_rng(cfg.rng_seed)
    X = rng.uniform(0.0, 1.0, size=(n, K))
    history: list[float] = []
    n_iter = 0
    while True:
        dist = cdist(X, X)
        raw = float(np.sum((dist[iu] - delta) ** 2))
        sigma = math.sqrt(raw / denom)
        history.append(sigma)
        if n_iter > 0:
            prev = history[-2]
            if prev == 0 or (prev - sigma) / prev < cfg.rel_tolerance:
                break
        if n_iter >= cfg.max_iterations:
            break
        # Guttman transform with unit weights: X <- B(X) X / n
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dist > 0, D / dist, 0.0)
        B = -ratio
        B[np.diag_indices(n)] = ratio.sum(axis=1)
        X = B @ X / n
        n_iter += 1
    return Configuration(X, raw, sigma, n_iter, history)


# -- landmark selection -----------------------------------------------------


def _lexicographic_min(values: Sequence[str]) -> int:
    return min(range(len(values)), key=lambda i: (values[i], i))


def _farthest_first_rows(enc: EncodedStrings, L: int) -> tuple[np.ndarray, np.ndarray]:
    """Pick ``L`` landmarks and return them with their distance rows to every item.

    Each unordered pair is evaluated once: distances between landmarks are
    filled in from earlier rows by symmetry, so the total kernel count is
    ``L(L-1)/2 + (n-L)L``.
    """
    n = len(enc)
    if not 1 <= L <= n:
        raise ValueError(f"landmark count must be in [1, {n}], got {L}")
    rows = np.zeros((L, n), dtype=np.float64)
    chosen = np.empty(L, dtype=np.int64)
    is_chosen = np.zeros(n, dtype=bool)
    min_dist = np.full(n, np.inf)
    for j in range(L):
        if j == 0:
            idx = _lexicographic_min(enc.values)
        else:
            # argmax returns the first maximum, i.e. the smallest index on ties
            idx = int(np.argmax(np.where(is_chosen, -1.0, min_dist)))
        chosen[j] = idx
        is_chosen[idx] = True
        row = rows[j]
        targets = np.flatnonzero(~is_chosen)
        row[targets] = levenshtein_to_many(enc.values[idx], enc, targets)
        row[chosen[:j]] = rows[:j, idx]
        row[idx] = 0.0
        np.minimum(min_dist, row, out=min_dist)
    return chosen, rows


def select_landmarks_farthest_first(values: Sequence[str], L: int) -> list[int]:
    """Farthest-first traversal in edit distance.

    Starts from the lexicographically smallest value; each next landmark
    maximizes its minimum distance to those already chosen, ties going to
    the smallest index.
    """
    chosen, _ = _farthest_first_rows(EncodedStrings(values), L)
    return chosen.tolist()


# -- out-of-sample placement ------------------------------------------------


@njit(cache=True, nogil=True)
def _oos_objective(landmarks, deltas, y):
    total = 0.0
    for i in range(landmarks.shape[0]):
        s = 0.0
        for k in range(y.shape[0]):
            diff = landmarks[i, k] - y[k]
            s += diff * diff
        r = math.sqrt(s) - deltas[i]
        total += r * r
    return total


@njit(cache=True, nogil=True)
def _oos_sgd(landmarks, deltas, start, orders, steps, eps):
    K = start.shape[0]
    y = start.copy()
    best_y = start.copy()
    best = _oos_objective(landmarks, deltas, y)
    history = np.empty(orders.shape[0] + 1)
    history[0] = best
    diff = np.empty(K)
    for e in range(orders.shape[0]):
        eta = steps[e]
        for t in range(orders.shape[1]):
            i = orders[e, t]
            s = 0.0
            for k in range(K):
                diff[k] = y[k] - landmarks[i, k]
                s += diff[k] * diff[k]
            dist = math.sqrt(s)
            if dist < eps:
                continue
            g = eta * 2.0 * (dist - deltas[i]) / dist
            for k in range(K):
                y[k] -= g * diff[k]
        obj = _oos_objective(landmarks, deltas, y)
        # the iterate keeps moving; the best end-of-epoch point is returned
        if obj <= best:
            best = obj
            best_y[:] = y
        history[e + 1] = best
    return best_y, history


def oos_objective(landmarks, deltas, y) -> float:
    """Landmark stress of a single placed point: ``sum_i (||x_i - y|| - delta_i)**2``."""
    return float(
        _oos_objective(
            np.ascontiguousarray(landmarks, dtype=np.float64),
            np.ascontiguousarray(deltas, dtype=np.float64),
            np.ascontiguousarray(y, dtype=np.float64),
        )
    )


def _oos_rng(cfg: OosConfig, key: str | None) -> np.random.Generator:
    if key is None:
        return np.random.default_rng(cfg.rng_seed)
    return np.random.default_rng([cfg.rng_seed, zlib.crc32(key.encode("utf-8"))])


def embed_out_of_sample(
    landmarks,
    deltas,
    cfg: OosConfig = OosConfig(),
    key: str | None = None,
    return_history: bool = False,
):
    """Place one new item against fixed landmark points.

    Starts at the landmark with the smallest dissimilarity (plus seeded
    jitter) and runs ``cfg.epochs`` shuffled passes over the landmark terms.
    The best end-of-epoch iterate is returned, so the result never scores
    worse than the start. The iterate itself is allowed to climb, which lets
    it leave saddles that a strictly monotone scheme would stall on.

    Parameters
    ----------
    landmarks : (L, K) array
        Landmark coordinates.
    deltas : (L,) array
        Dissimilarities from the new item to each landmark.
    cfg : OosConfig
    key : str, optional
        Mixed into the seed, so equal keys get equal placements regardless
        of call order. The blocking value is the natural choice.
    return_history : bool
        Also return the per-epoch objective (initial value first).
    """
    X = np.ascontiguousarray(landmarks, dtype=np.float64)
    d = np.ascontiguousarray(deltas, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("need at least one landmark")
    if d.shape != (X.shape[0],):
        raise ValueError(f"expected {X.shape[0]} dissimilarities, got {d.shape}")
    if np.any(d < 0):
        raise ValueError("dissimilarities must be non-negative")
    L, K = X.shape
    rng = _oos_rng(cfg, key)
    start = X[int(np.argmin(d))] + rng.normal(0.0, cfg.jitter, size=K)
    orders = rng.permuted(np.tile(np.arange(L, dtype=np.int64), (cfg.epochs, 1)), axis=1)
    y, history = _oos_sgd(X, d, start, orders, cfg.steps(), COINCIDENCE_EPS)
    if return_history:
        return y, history
    return y


# -- whole-dataset embedding ------------------------------------------------


def embed_dataset(
    values: Sequence[str],
    K: int,
    L: int | None = None,
    cfg: StressConfig = StressConfig(),
    oos_cfg: OosConfig = OosConfig(),
) -> Embedding:
    """Embed every value: SMACOF on ``L`` landmarks, SGD placement for the rest.

    ``L=None`` or ``L=len(values)`` runs complete LSMDS on the full matrix,
    with landmarks in natural order.
    """
    values = list(values)
    n = len(values)
    if n == 0:
        raise ValueError("nothing to embed")
    L = n if L is None else L
    if not 1 <= L <= n:
        raise ValueError(f"landmark count must be in [1, {n}], got {L}")
    enc = EncodedStrings(values)

    if L == n:
        D = distance_matrix(enc)
        conf = lsmds_full(D, K, cfg)
        landmarks = np.arange(n, dtype=np.int64)
        return Embedding(conf.points.copy(), landmarks, values, conf, cfg, oos_cfg)

    landmarks, rows = _farthest_first_rows(enc, L)
    conf = lsmds_full(rows[:, landmarks], K, cfg)
    points = np.empty((n, K), dtype=np.float64)
    points[landmarks] = conf.points
    is_landmark = np.zeros(n, dtype=bool)
    is_landmark[landmarks] = True
    for i in np.flatnonzero(~is_landmark):
        points[i] = embed_out_of_sample(conf.points, rows[:, i], oos_cfg, key=values[i])
    return Embedding(points, landmarks, [values[i] for i in landmarks], conf, cfg, oos_cfg)


# -- persistence ------------------------------------------------------------

LANDMARKS_FILE = "landmarks.csv"
POINTS_FILE = "points.csv"
MANIFEST_FILE = "embedding.json"


def _coord_cols(K: int) -> list[str]:
    return [f"x{k + 1}" for k in range(K)]


def save_embedding(
    out_dir: str | Path,
    embedding: Embedding,
    record_ids: Sequence[str],
    extra: dict | None = None,
) -> dict:
    """Write landmarks, points and a manifest; coordinates round-trip exactly."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    K = embedding.dimension
    if len(record_ids) != embedding.points.shape[0]:
        raise ValueError("record_ids must align with embedded points")

    def fmt(row):
        return ",".join(repr(float(x)) for x in row)

    with open(out / LANDMARKS_FILE, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["ordinal", "blocking_value", *_coord_cols(K)])
        for j, (value, p) in enumerate(zip(embedding.landmark_values, embedding.landmark_points)):
            writer.writerow([j, value, *(repr(float(x)) for x in p)])
    with open(out / POINTS_FILE, "w", encoding="utf-8") as fh:
        fh.write(",".join(["record_id", *_coord_cols(K)]) + "\n")
        for rid, p in zip(record_ids, embedding.points):
            fh.write(f"{rid},{fmt(p)}\n")

    conf = embedding.landmark_config
    manifest = {
        "n": int(embedding.points.shape[0]),
        "K": K,
        "L": embedding.n_landmarks,
        "landmark_indices": [int(i) for i in embedding.landmark_indices],
        "raw_stress": conf.raw_stress,
        "normalized_stress": conf.normalized_stress,
        "smacof_iterations": conf.n_iter,
        "stress_config": asdict(embedding.stress_config),
        "oos_config": asdict(embedding.oos_config),
    }
    if extra:
        manifest.update(extra)
    with open(out / MANIFEST_FILE, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def load_embedding(in_dir: str | Path) -> tuple[Embedding, list[str], dict]:
    """Inverse of :func:`save_embedding`. Returns ``(embedding, record_ids, manifest)``."""
    src = Path(in_dir)
    with open(src / MANIFEST_FILE, encoding="utf-8") as fh:
        manifest = json.load(fh)
    K = manifest["K"]
    record_ids = []
    coords = []
    with open(src / POINTS_FILE, encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            parts = line.rstrip("\n").split(",")
            record_ids.append(parts[0])
            coords.append([float(x) for x in parts[1:]])
    points = np.array(coords, dtype=np.float64).reshape(len(coords), K)
    landmark_values = []
    with open(src / LANDMARKS_FILE, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            landmark_values.append(row[1])
    landmarks = np.array(manifest["landmark_indices"], dtype=np.int64)
    if len(landmark_values) != len(landmarks):
        raise ValueError("landmark file and manifest disagree on L")
    conf = Configuration(
        points[landmarks].copy(),
        manifest["raw_stress"],
        manifest["normalized_stress"],
        manifest["smacof_iterations"],
    )
    emb = Embedding(
        points,
        landmarks,
        landmark_values,
        conf,
        StressConfig(**manifest["stress_config"]),
        OosConfig(**manifest["oos_config"]),
    )
    return emb, record_ids, manifest
