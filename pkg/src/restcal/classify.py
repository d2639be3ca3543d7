"""Linear SVM, LDA and Gaussian naive Bayes for the two-class problem.

Labels are 0 (left) and 1 (right).  Every model exposes
``decision_function``; a positive score means right, zero or negative
means left.
"""
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels

LDA_RIDGE = 1e-3
SVM_C = 1.0
SVM_TOL = 1e-4
SVM_MAX_ITER = 1_000_000
GNB_VAR_SCALE = 1e-9


def _split(train, labels=None):
    if labels is None:
        x, y = train.values, train.labels
    else:
        x, y = train, labels
    x = np.asarray(x, dtype=float)
    y = np.asarray(y).astype(np.int64)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError("training matrix and labels disagree")
    bad = set(np.unique(y)) - {0, 1}
    if bad:
        raise ValueError(f"labels must be 0/1, got {sorted(bad)}")
    return x, y


def _require_classes(y, min_rows):
    for c in (0, 1):
        n = int(np.sum(y == c))
        if n < min_rows:
            raise ValueError(f"class {c} has {n} training rows, need {min_rows}")


class _Linear:
    def decision_function(self, x):
        x = np.asarray(getattr(x, "values", x), dtype=float)
        if x.shape[-1] != self.w.shape[0]:
            raise ValueError(f"model expects {self.w.shape[0]} features, got {x.shape[-1]}")
        return x @ self.w + self.b


@dataclass
class LdaModel(_Linear):
    w: np.ndarray
    b: float
    priors: np.ndarray
    ridge: float = LDA_RIDGE
    kind: str = field(default="lda", init=False)


@dataclass
class SvmModel(_Linear):
    w: np.ndarray
    b: float
    C: float
    n_iter: int
    violation: float
    duality_gap: float
    primal: float
    dual: float
    converged: bool
    kind: str = field(default="svm", init=False)


@dataclass
class GnbModel:
    means: np.ndarray  # (2, features)
    variances: np.ndarray  # (2, features), floored
    priors: np.ndarray
    var_floor: np.ndarray
    kind: str = field(default="nb", init=False)

    def joint_log_likelihood(self, x):
        x = np.asarray(getattr(x, "values", x), dtype=float)
        if x.shape[-1] != self.means.shape[1]:
            raise ValueError(f"model expects {self.means.shape[1]} features, got {x.shape[-1]}")
        diff = x[:, None, :] - self.means[None]
        ll = -0.5 * np.sum(np.log(2 * np.pi * self.variances)[None] + diff ** 2 / self.variances[None],
                           axis=-1)
        return ll + np.log(self.priors)[None]

    def predict_proba(self, x):
        jll = self.joint_log_likelihood(x)
        jll -= jll.max(axis=1, keepdims=True)
        p = np.exp(jll)
        return p / p.sum(axis=1, keepdims=True)

    def decision_function(self, x):
        jll = self.joint_log_likelihood(x)
        return jll[:, 1] - jll[:, 0]


def train_lda(train, labels=None, ridge=LDA_RIDGE):
    """Shared-covariance discriminant with a trace-scaled ridge."""
    x, y = _split(train, labels)
    _require_classes(y, 2)
    mu0, mu1 = x[y == 0].mean(axis=0), x[y == 1].mean(axis=0)
    centered = np.concatenate([x[y == 0] - mu0, x[y == 1] - mu1])
    d = x.shape[1]
    cov = centered.T @ centered / max(x.shape[0] - 2, 1)
    scale = np.trace(cov) / d
    if scale <= 0:
        scale = 1.0
    cov_r = cov + ridge * scale * np.eye(d)
    w = np.linalg.solve(cov_r, mu1 - mu0)
    priors = np.array([np.mean(y == 0), np.mean(y == 1)])
    b = -0.5 * float(w @ (mu0 + mu1)) + float(np.log(priors[1] / priors[0]))
    return LdaModel(w=w, b=b, priors=priors, ridge=ridge)


def train_gnb(train, labels=None, var_scale=GNB_VAR_SCALE):
    """Per-class Gaussian per feature; variances floored at var_scale x column variance."""
    x, y = _split(train, labels)
    _require_classes(y, 2)
    floor = var_scale * x.var(axis=0)
    # an all-constant column still needs a positive variance
    floor = np.where(floor > 0, floor, var_scale)
    means = np.array([x[y == c].mean(axis=0) for c in (0, 1)])
    variances = np.array([np.maximum(x[y == c].var(axis=0), floor) for c in (0, 1)])
    priors = np.array([np.mean(y == 0), np.mean(y == 1)])
    return GnbModel(means=means, variances=variances, priors=priors, var_floor=floor)


def svm_objectives(x, s, alpha, w, b, C):
    """(primal, dual) for labels ``s`` in {-1, +1}."""
    hinge = np.maximum(0.0, 1.0 - s * (x @ w + b))
    primal = 0.5 * float(w @ w) + C * float(hinge.sum())
    dual = float(alpha.sum()) - 0.5 * float(w @ w)
    return primal, dual


def train_svm(train, labels=None, C=SVM_C, tol=SVM_TOL, max_iter=SVM_MAX_ITER):
    """Soft-margin linear SVM with bias, dual solved by maximal-violating-pair ascent."""
    x, y = _split(train, labels)
    _require_classes(y, 1)
    s = np.where(y == 1, 1.0, -1.0)
    alpha, grad, n_iter, violation = _kernels.svm_smo(x @ x.T, s, C, tol, max_iter)
    w = (alpha * s) @ x
    b = _svm_bias(alpha, s, grad, C)
    primal, dual = svm_objectives(x, s, alpha, w, b, C)
    return SvmModel(w=np.asarray(w), b=b, C=C, n_iter=int(n_iter), violation=float(violation),
                    duality_gap=primal - dual, primal=primal, dual=dual,
                    converged=bool(violation <= tol))


def _svm_bias(alpha, s, grad, C):
    v = -s * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(v[free].mean())
    pos = s > 0
    up = (pos & (alpha < C)) | (~pos & (alpha > 0))
    low = (~pos & (alpha < C)) | (pos & (alpha > 0))
    hi = v[up].max() if up.any() else v[low].min()
    lo = v[low].min() if low.any() else v[up].max()
    return float(0.5 * (hi + lo))


TRAINERS = {"svm": train_svm, "lda": train_lda, "nb": train_gnb}


@dataclass(frozen=True)
class Prediction:
    labels: np.ndarray
    scores: np.ndarray


def predict(model, m):
    scores = np.asarray(model.decision_function(m), dtype=float)
    return Prediction(labels=(scores > 0).astype(np.int64), scores=scores)


def accuracy(pred, labels):
    p = np.asarray(getattr(pred, "labels", pred))
    labels = np.asarray(labels)
    if p.shape != labels.shape or p.size == 0:
        raise ValueError("prediction and label counts differ")
    return float(np.mean(p == labels))


def model_to_dict(model):
    d = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in asdict(model).items()}
    d["kind"] = model.kind
    return d


def model_from_dict(d):
    d = dict(d)
    cls = {"svm": SvmModel, "lda": LdaModel, "nb": GnbModel}[d.pop("kind")]
    arrays = {"w", "priors", "means", "variances", "var_floor"}
    return cls(**{k: (np.asarray(v, dtype=float) if k in arrays else v) for k, v in d.items()})


def dump_model(model, path):
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=1)


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))
