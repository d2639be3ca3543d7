"""Leave-one-subject-out experiments with resting-state calibration.

Per subject: channel selection -> epochs -> CAR -> Butterworth band-pass ->
features; resting segment -> FFT band-pass -> CAR -> calibration vector;
task features divided by that vector.  Per fold: FDR scores and top-k
selection, then z-scoring, both fitted on the training subjects only,
then each classifier is trained and scored on the held-out subject.
"""
import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import classify, dataio, dsp, features, selection


DEFAULT_SUBJECTS = ("S1", "S2", "S3", "S5", "S6", "S7", "S8", "S9")
CLASSIFIERS = ("svm", "lda", "nb")
EYE_CONDITIONS = ("none", "open", "closed", "movement")
DURATIONS = (30.0, 60.0, 120.0)

_EYE_LABEL = {"open": "eye-open", "closed": "eye-close", "movement": "eye-movement"}
_CLF_LABEL = {"svm": "SVM", "lda": "LDA", "nb": "NB"}


class FoldError(RuntimeError):
    pass


@dataclass(frozen=True)
class Condition:
    eye_mode: str = "none"
    duration_s: float = None  # None: whole segment

    def __post_init__(self):
        if self.eye_mode not in ("none",) + dataio.EYE_MODES:
            raise ValueError(f"unknown eye mode {self.eye_mode!r}")
        if self.eye_mode == "none" and self.duration_s is not None:
            raise ValueError("uncalibrated condition takes no duration")

    @property
    def calibrated(self):
        return self.eye_mode != "none"

    @property
    def key(self):
        if self.duration_s is None:
            return self.eye_mode
        return f"{self.eye_mode}@{self.duration_s:g}s"

    @property
    def label(self):
        if not self.calibrated:
            return "No rest"
        if self.duration_s is None:
            return f"rest ({_EYE_LABEL[self.eye_mode]})"
        d = self.duration_s
        return f"rest ({d / 60:g}min)" if d >= 60 and d % 60 == 0 else f"rest ({d:g}s)"

    @classmethod
    def parse(cls, key):
        if "@" in key:
            mode, dur = key.split("@")
            return cls(mode, float(dur.rstrip("s")))
        return cls(key)


@dataclass
class ExperimentConfig:
    dataset_root: str = None
    subjects: list = field(default_factory=lambda: list(DEFAULT_SUBJECTS))
    classifiers: list = field(default_factory=lambda: list(CLASSIFIERS))
    eye_modes: list = field(default_factory=lambda: list(EYE_CONDITIONS))
    durations: list = field(default_factory=lambda: list(DURATIONS))
    conditions: list = None  # explicit condition keys for `loso`
    channels: list = field(default_factory=lambda: list(dataio.DEFAULT_CHANNELS))
    window: tuple = (0.0, 4.0)
    band: tuple = (8.0, 30.0)
    filter_order: int = 3
    zero_phase: bool = False
    k: int = 25
    eps_div: float = features.EPS_DIV
    eps_var: float = features.EPS_VAR
    eps_fdr: float = selection.EPS_FDR
    std_floor: float = features.STD_FLOOR
    lda_ridge: float = classify.LDA_RIDGE
    svm_C: float = classify.SVM_C
    svm_tol: float = classify.SVM_TOL
    svm_max_iter: int = classify.SVM_MAX_ITER
    gnb_var_scale: float = classify.GNB_VAR_SCALE
    welch_segment: int = 250
    welch_overlap: float = 0.5
    welch_window: str = "hann"
    shuffle_labels_seed: int = None
    threads: int = None

    def __post_init__(self):
        self.window = tuple(self.window)
        self.band = tuple(self.band)
        self.subjects = list(self.subjects)
        self.validate()

    def validate(self):
        if len(self.subjects) < 2:
            raise ValueError("leave-one-subject-out needs at least 2 subjects")
        if len(set(self.subjects)) != len(self.subjects):
            raise ValueError("duplicate subjects")
        bad = set(self.classifiers) - set(CLASSIFIERS)
        if bad:
            raise ValueError(f"unknown classifiers {sorted(bad)}")
        if "S4" in self.subjects and any(c.calibrated for c in self.all_conditions()):
            raise ValueError("S4 has no resting block and must be excluded when calibrating")
        if self.k < 1:
            raise ValueError("k must be positive")

    def eye_conditions(self):
        return [Condition(m) for m in self.eye_modes]

    def duration_conditions(self):
        return [Condition("none")] + [Condition("open", float(d)) for d in self.durations]

    def all_conditions(self):
        if self.conditions is not None:
            return [Condition.parse(c) for c in self.conditions]
        seen, out = set(), []
        for c in self.eye_conditions() + self.duration_conditions():
            if c.key not in seen:
                seen.add(c.key)
                out.append(c)
        return out

    @property
    def feature_params(self):
        return features.FeatureParams(psd_band=self.band, segment_len=self.welch_segment,
                                      overlap=self.welch_overlap, window=self.welch_window,
                                      eps_var=self.eps_var)

    def n_threads(self):
        if self.threads is not None:
            return max(1, int(self.threads))
        return max(1, int(os.environ.get("RESTCAL_THREADS", "1")))

    def to_dict(self):
        d = asdict(self)
        d["window"] = list(self.window)
        d["band"] = list(self.band)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class FoldResult:
    held_out: str
    condition: str
    classifier: str
    accuracy: float
    n_test_trials: int
    n_train_trials: int
    selected: dict
    guard_engagements: int
    leakage: dict  # held-out rows entering each fit; must be all zero
    model: dict = None


# ---------------------------------------------------------------------------
# per-subject preprocessing
# ---------------------------------------------------------------------------

def preprocess_task(rec, config):
    """Band-passed, re-referenced epochs of the selected channels."""
    sel = rec.select(config.channels)
    ep = dataio.extract_epochs(sel, config.window)
    spec = dsp.BandpassSpec(config.band[0], config.band[1], config.filter_order, rec.sample_rate)
    filt = dsp.design_butterworth_bandpass(spec)
    x = dsp.car_filter(ep.data.astype(np.float64))
    x = dsp.apply_iir(filt, x, zero_phase=config.zero_phase)
    return ep, x


def preprocess_rest(rec, condition, config):
    sel = rec.select(config.channels)
    seg = dataio.segment_resting(sel).get(condition.eye_mode)
    if condition.duration_s is not None:
        seg = dataio.truncate_segment(seg, condition.duration_s)
    x = dsp.fft_bandpass(seg.samples.astype(np.float64), config.band[0], config.band[1],
                         rec.sample_rate)
    return seg, dsp.car_filter(x)


def subject_features(rec, conditions, config):
    """``{condition.key: (FeatureMatrix, n_guarded)}`` for one recording."""
    params = config.feature_params
    ep, x = preprocess_task(rec, config)
    names = features.feature_names(config.channels)
    task = features.trial_features(x, rec.sample_rate, n_channels=len(config.channels),
                                   params=params)
    sid = rec.subject_id
    out = {}
    for cond in conditions:
        vals, n_guard = task, 0
        if cond.calibrated:
            seg, rx = preprocess_rest(rec, cond, config)
            cal = features.resting_features(rx, rec.sample_rate, cond.eye_mode,
                                            cond.duration_s, names, params)
            vals = features.calibrate(task, cal, config.eps_div)
            n_guard = int(features.guarded(cal.values, config.eps_div).sum()) * task.shape[0]
        out[cond.key] = (features.FeatureMatrix(vals, ep.labels, names,
                                                np.full(len(ep.labels), sid, dtype=object)),
                         n_guard)
    return out


# ---------------------------------------------------------------------------
# experiment
# ---------------------------------------------------------------------------

class Experiment:
    """Caches per-subject feature matrices across folds and sweeps.

    ``recordings`` maps subject id to a ContinuousRecording; when omitted,
    archives are loaded from ``config.dataset_root/<subject>``.
    """

    def __init__(self, config, recordings=None):
        self.config = config
        self._recordings = dict(recordings) if recordings is not None else None
        self._cache = {}

    def recording(self, sid):
        if self._recordings is not None:
            if sid not in self._recordings:
                raise FoldError(f"no recording for subject {sid}")
            return self._recordings[sid]
        if self.config.dataset_root is None:
            raise FoldError("no dataset_root configured")
        return dataio.load_recording(Path(self.config.dataset_root) / sid,
                                     selected=self.config.channels)

    def _prepare(self, conditions):
        missing = [(s, c) for s in self.config.subjects for c in conditions
                   if (s, c.key) not in self._cache]
        subjects = sorted({s for s, _ in missing}, key=self.config.subjects.index)
        if not subjects:
            return

        def work(sid):
            conds = [c for s, c in missing if s == sid]
            try:
                return sid, subject_features(self.recording(sid), conds, self.config)
            except (dataio.ArchiveError, ValueError) as exc:
                keys = ",".join(c.key for c in conds)
                raise FoldError(f"subject {sid} [{keys}]: {exc}") from exc

        with ThreadPoolExecutor(self.config.n_threads()) as pool:
            for sid, feats in pool.map(work, subjects):
                for key, val in feats.items():
                    self._cache[(sid, key)] = self._maybe_shuffle(sid, val)

    def _maybe_shuffle(self, sid, val):
        seed = self.config.shuffle_labels_seed
        if seed is None:
            return val
        m, n_guard = val
        idx = self.config.subjects.index(sid)
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), idx]))
        return features.FeatureMatrix(m.values, rng.permutation(m.labels), m.columns,
                                      m.subject_ids), n_guard

    def matrix(self, sid, condition):
        self._prepare([condition])
        return self._cache[(sid, condition.key)]

    def run_fold(self, held_out, condition, keep_models=False):
        cfg = self.config
        if held_out not in cfg.subjects:
            raise ValueError(f"{held_out} is not among the configured subjects")
        self._prepare([condition])
        train_ids = [s for s in cfg.subjects if s != held_out]
        train = features.FeatureMatrix.concat(self._cache[(s, condition.key)][0] for s in train_ids)
        test, n_guard = self._cache[(held_out, condition.key)]
        n_guard += sum(self._cache[(s, condition.key)][1] for s in train_ids)

        leakage = {}
        leakage["selection"] = int(np.sum(train.subject_ids == held_out))
        scores = selection.fdr_scores(train.values, train.labels, eps=cfg.eps_fdr)
        k = min(cfg.k, train.values.shape[1])
        mask = selection.select_top_k(scores, k, names=train.columns)
        train_s, test_s = selection.apply_mask(mask, train), selection.apply_mask(mask, test)

        leakage["normalization"] = int(np.sum(train_s.subject_ids == held_out))
        stats = features.fit_normalizer(train_s, floor=cfg.std_floor)
        train_n = features.apply_normalizer(stats, train_s)
        test_n = features.apply_normalizer(stats, test_s)

        leakage["training"] = int(np.sum(train_n.subject_ids == held_out))
        results = []
        for name in cfg.classifiers:
            model = _train(name, train_n, cfg)
            acc = classify.accuracy(classify.predict(model, test_n), test_n.labels)
            results.append(FoldResult(
                held_out=held_out, condition=condition.key, classifier=name, accuracy=acc,
                n_test_trials=test_n.n_rows, n_train_trials=train_n.n_rows,
                selected=mask.report(), guard_engagements=n_guard, leakage=dict(leakage),
                model=classify.model_to_dict(model) if keep_models else None))
        return results

    def run_conditions(self, conditions, title=""):
        conditions = list(conditions)
        self._prepare(conditions)
        tasks = [(c, s) for c in conditions for s in self.config.subjects]

        def work(task):
            cond, sid = task
            try:
                return self.run_fold(sid, cond)
            except (ValueError, np.linalg.LinAlgError) as exc:
                raise FoldError(f"fold {cond.key}/{sid}: {exc}") from exc

        with ThreadPoolExecutor(self.config.n_threads()) as pool:
            folds = [r for rs in pool.map(work, tasks) for r in rs]
        return ResultsTable.from_folds(folds, conditions, self.config, title)

    def eye_mode_sweep(self):
        return self.run_conditions(self.config.eye_conditions(), "eye-mode")

    def duration_sweep(self):
        return self.run_conditions(self.config.duration_conditions(), "duration")


def _train(name, m, cfg):
    if name == "svm":
        return classify.train_svm(m, C=cfg.svm_C, tol=cfg.svm_tol, max_iter=cfg.svm_max_iter)
    if name == "lda":
        return classify.train_lda(m, ridge=cfg.lda_ridge)
    return classify.train_gnb(m, var_scale=cfg.gnb_var_scale)


def run_fold(config, held_out, condition=Condition("none"), recordings=None):
    return Experiment(config, recordings).run_fold(held_out, condition)


def run_eye_mode_sweep(config, recordings=None):
    return Experiment(config, recordings).eye_mode_sweep()


def run_duration_sweep(config, recordings=None):
    return Experiment(config, recordings).duration_sweep()


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------

@dataclass
class ResultsTable:
    subjects: list
    rows: list  # dicts: label, condition, classifier, accuracy {sid: frac}, mean
    folds: list
    config: dict
    title: str = ""

    @classmethod
    def from_folds(cls, folds, conditions, config, title=""):
        folds = sorted(folds, key=lambda f: (
            [c.key for c in conditions].index(f.condition),
            config.classifiers.index(f.classifier),
            config.subjects.index(f.held_out)))
        rows = []
        for clf in config.classifiers:
            for cond in conditions:
                acc = {f.held_out: f.accuracy for f in folds
                       if f.classifier == clf and f.condition == cond.key}
                vals = [acc[s] for s in config.subjects]
                rows.append({"label": f"SI {_CLF_LABEL[clf]} - {cond.label}",
                             "condition": cond.key, "classifier": clf,
                             "accuracy": acc, "mean": float(np.mean(vals))})
        return cls(subjects=list(config.subjects), rows=rows, folds=folds,
                   config=config.to_dict(), title=title)

    def row(self, classifier, condition):
        for r in self.rows:
            if r["classifier"] == classifier and r["condition"] == condition:
                return r
        raise KeyError((classifier, condition))

    def mean(self, classifier, condition):
        return self.row(classifier, condition)["mean"]

    def to_dict(self):
        return {"title": self.title, "subjects": self.subjects, "rows": self.rows,
                "folds": [asdict(f) for f in self.folds], "config": self.config}

    @classmethod
    def from_dict(cls, d):
        return cls(subjects=d["subjects"], rows=d["rows"],
                   folds=[FoldResult(**f) for f in d["folds"]], config=d["config"],
                   title=d.get("title", ""))

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row"] + self.subjects + ["mean"])
        for r in self.rows:
            w.writerow([r["label"]] + [f"{100 * r['accuracy'][s]:.2f}" for s in self.subjects]
                       + [f"{100 * r['mean']:.2f}"])
        return buf.getvalue()


def emit_results(table, fmt, path):
    path = Path(path)
    text = {"csv": table.to_csv, "json": table.to_json}[fmt]()
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path


def write_features_csv(m, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(m.columns) + ["label", "subject_id"])
        for row, lab, sid in zip(m.values, m.labels, m.subject_ids):
            w.writerow([repr(float(v)) for v in row] + [dataio.CLASSES[int(lab)], sid])
