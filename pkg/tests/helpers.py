import numpy as np

from trn.metrics import ScoreTable


def make_table(labels, scores, videos=None, anticipated=None):
    labels = np.asarray(labels, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    n = len(labels)
    videos = np.zeros(n, dtype=np.int64) if videos is None else np.asarray(videos, dtype=np.int64)
    frame = np.zeros(n, dtype=np.int64)
    for r in range(1, n):
        frame[r] = frame[r - 1] + 1 if videos[r] == videos[r - 1] else 0
    if anticipated is None:
        anticipated = np.zeros((n, 0, scores.shape[1]))
    ids = [f"v{k}" for k in range(int(videos.max()) + 1)]
    return ScoreTable(ids, videos, frame, labels, scores, np.asarray(anticipated, dtype=np.float64))


def random_table(rng, n=None, num_classes=None, steps=2, n_videos=None, ties=True):
    n = n or int(rng.integers(8, 51))
    C = num_classes or int(rng.integers(2, 5))  # 1..3 actions + background
    nv = n_videos or int(rng.integers(1, 4))
    videos = np.sort(rng.integers(0, nv, n))
    # relabel so that video ids are 0..m-1 with no gaps
    _, videos = np.unique(videos, return_inverse=True)
    # segment-style labels so that instances have length > 1
    labels = np.empty(n, dtype=np.int64)
    cur = int(rng.integers(0, C))
    for r in range(n):
        if rng.random() < 0.25:
            cur = int(rng.integers(0, C))
        labels[r] = cur
    for c in range(1, C):
        if not (labels == c).any():
            labels[rng.integers(0, n)] = c
    scores = rng.random((n, C))
    ant = rng.random((n, steps, C))
    if ties:
        scores = np.round(scores, 1)
        ant = np.round(ant, 1)
    return make_table(labels, scores, videos, ant)
