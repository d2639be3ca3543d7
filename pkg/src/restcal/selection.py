"""Fisher discriminant ratio scoring and top-k feature selection."""
from dataclasses import dataclass

import numpy as np

EPS_FDR = 1e-12


@dataclass(frozen=True)
class ClassStats:
    classes: np.ndarray
    means: np.ndarray  # (M, features)
    variances: np.ndarray  # (M, features), population


@dataclass(frozen=True)
class SelectionMask:
    indices: np.ndarray
    scores: np.ndarray
    names: tuple = ()

    def report(self):
        return {"indices": [int(i) for i in self.indices],
                "names": list(self.names),
                "scores": [float(s) for s in self.scores]}


def class_stats(values, labels, min_rows=2):
    values = np.asarray(values, dtype=float)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if len(classes) < 2:
        raise ValueError("feature scoring needs at least two classes")
    means, variances = [], []
    for c in classes:
        rows = values[labels == c]
        if rows.shape[0] < min_rows:
            raise ValueError(f"class {c!r} has fewer than {min_rows} rows")
        means.append(rows.mean(axis=0))
        variances.append(rows.var(axis=0))
    return ClassStats(classes, np.array(means), np.array(variances))


def fdr_scores(train, labels=None, eps=EPS_FDR):
    """sum_i sum_{j != i} (mu_i - mu_j)^2 / (var_i + var_j + eps), per feature."""
    if labels is None:
        values, labels = train.values, train.labels
    else:
        values = train
    st = class_stats(values, labels)
    mu, var = st.means, st.variances
    num = (mu[:, None, :] - mu[None, :, :]) ** 2
    den = var[:, None, :] + var[None, :, :] + eps
    # the diagonal terms have zero numerator
    return np.sum(num / den, axis=(0, 1))


def select_top_k(scores, k=25, names=None):
    """Indices of the k largest scores, ties to the lower index, returned in index order."""
    scores = np.asarray(scores, dtype=float)
    if not 0 < k <= scores.size:
        raise ValueError(f"cannot select {k} of {scores.size} features")
    order = np.argsort(-scores, kind="stable")[:k]
    kept = np.sort(order)
    return SelectionMask(indices=kept, scores=scores[kept],
                         names=tuple(names[i] for i in kept) if names is not None else ())


def apply_mask(mask, m):
    idx = np.asarray(getattr(mask, "indices", mask), dtype=np.int64)
    n = m.values.shape[1]
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"mask index out of range for {n} features")
    return m.with_values(m.values[:, idx], [m.columns[i] for i in idx])
