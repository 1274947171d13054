"""Surrogate malware detectors and the synthetic corpus they are trained on.

Two deliberately different models are provided: a logistic regression on the
normalized byte histogram (raw-byte view, threshold 0.5) and a boosted
ensemble of decision stumps over six engineered string/structure features
(threshold 0.8).
"""

from dataclasses import dataclass, field
import struct

import numpy as np

from . import texe

HISTOGRAM = "histogram"
STUMPS = "stumps"
KINDS = (HISTOGRAM, STUMPS)
DEFAULT_THRESHOLDS = {HISTOGRAM: 0.5, STUMPS: 0.8}
STRING_FEATURES = ("string_count", "mean_string_length", "printable_fraction",
                   "entropy", "section_count", "file_size")
MIN_STRING = 4

MODEL_MAGIC = b"ZXMD"
MODEL_VERSION = 1
_KIND_CODES = {HISTOGRAM: 1, STUMPS: 2}


def _as_array(data):
    if isinstance(data, np.ndarray):
        return data.astype(np.uint8, copy=False)
    return np.frombuffer(bytes(data), dtype=np.uint8)


_SCORE_LO = np.nextafter(0.0, 1.0)
_SCORE_HI = np.nextafter(1.0, 0.0)


def sigmoid(z):
    """Logistic function, clamped so the result stays strictly inside (0, 1)."""
    s = 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))
    return np.clip(s, _SCORE_LO, _SCORE_HI)


# -- features -----------------------------------------------------------------

def featurize_histogram(data):
    """Byte frequencies normalized to sum to one."""
    arr = _as_array(data)
    if arr.size == 0:
        raise ValueError("cannot featurize an empty sample")
    return np.bincount(arr, minlength=256) / arr.size


def entropy_bits(counts):
    p = counts[counts > 0] / counts.sum()
    return float(max(0.0, -(p * np.log2(p)).sum()))


def printable_runs(arr, min_len=MIN_STRING):
    """Lengths of maximal runs of bytes in [32, 126] that are at least ``min_len`` long."""
    mask = (arr >= 32) & (arr <= 126)
    edges = np.diff(np.concatenate(([0], mask.view(np.int8), [0])))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    lengths = stops - starts
    return lengths[lengths >= min_len]


def _section_count(arr):
    try:
        return len(texe.parse(arr.tobytes()).sections)
    except texe.TexeError:
        return 0


def featurize_strings(data):
    """Six engineered features, in the order of :data:`STRING_FEATURES`.

    Strings are maximal runs of at least four printable bytes. The section
    count is zero when the sample does not parse as TEXE.
    """
    arr = _as_array(data)
    n = arr.size
    if n == 0:
        return np.zeros(len(STRING_FEATURES))
    runs = printable_runs(arr)
    counts = np.bincount(arr, minlength=256)
    printable = counts[32:127].sum() / n
    return np.array([
        float(runs.size),
        float(runs.mean()) if runs.size else 0.0,
        float(printable),
        entropy_bits(counts),
        float(_section_count(arr)),
        float(n),
    ])


# -- models --------------------------------------------------------------------

@dataclass
class HistogramModel:
    weights: np.ndarray
    bias: float = 0.0
    threshold: float = DEFAULT_THRESHOLDS[HISTOGRAM]
    kind: str = field(default=HISTOGRAM, init=False)

    def decision(self, data):
        return float(featurize_histogram(data) @ self.weights + self.bias)

    def score(self, data):
        return float(sigmoid(self.decision(data)))


@dataclass
class StringStumpModel:
    """Boosted depth-1 trees; each stump is ``(feature, split, left, right)``."""

    stumps: list
    learning_rate: float = 0.3
    base: float = 0.0
    threshold: float = DEFAULT_THRESHOLDS[STUMPS]
    kind: str = field(default=STUMPS, init=False)

    def decision_features(self, x):
        total = self.base
        for j, split, left, right in self.stumps:
            total += self.learning_rate * (left if x[j] <= split else right)
        return total

    def decision(self, data):
        return float(self.decision_features(featurize_strings(data)))

    def score(self, data):
        return float(sigmoid(self.decision(data)))


def score(model, data):
    """Malicious-class probability in (0, 1); evasion means ``score < threshold``."""
    return model.score(data)


# -- training ------------------------------------------------------------------

def _check_labels(labels):
    y = np.asarray(labels, dtype=np.float64)
    if y.size == 0 or y.min() == y.max():
        raise ValueError("training needs both benign and malicious samples")
    return y


def train_histogram(samples, labels, epochs=3000, rate=50.0, l2=1e-4, threshold=None):
    """Logistic regression on byte histograms by full-batch gradient descent."""
    y = _check_labels(labels)
    X = np.array([featurize_histogram(s) for s in samples])
    w = np.zeros(256)
    b = 0.0
    n = len(y)
    for _ in range(epochs):
        p = sigmoid(X @ w + b)
        r = p - y
        w -= rate * (X.T @ r / n + l2 * w)
        b -= rate * r.mean() / 256
    return HistogramModel(w, float(b), DEFAULT_THRESHOLDS[HISTOGRAM] if threshold is None else threshold)


def _candidate_splits(col, max_splits=64):
    vals = np.unique(col)
    mids = (vals[1:] + vals[:-1]) / 2
    if mids.size > max_splits:
        mids = np.quantile(mids, np.linspace(0, 1, max_splits))
    return mids


def train_stumps(samples, labels, n_stumps=64, rate=0.3, colsample=0.5, seed=0, threshold=None):
    """Greedy gradient boosting of depth-1 trees under the logistic loss.

    Each round draws a ``colsample`` fraction of the features, fits Newton
    leaf values for every candidate split on them and keeps the split with the
    largest second-order gain. Subsampling stops a single perfectly separating
    feature from absorbing every round.
    """
    y = _check_labels(labels)
    X = np.array([featurize_strings(s) for s in samples])
    rng = np.random.default_rng(seed)
    prior = np.clip(y.mean(), 1e-6, 1 - 1e-6)
    base = float(np.log(prior / (1 - prior)))
    margin = np.full(len(y), base)
    splits = [_candidate_splits(X[:, j]) for j in range(X.shape[1])]
    n_cols = max(1, int(round(colsample * X.shape[1])))
    stumps = []
    lam = 1.0
    for _ in range(n_stumps):
        p = sigmoid(margin)
        grad = p - y
        hess = np.maximum(p * (1 - p), 1e-12)
        best = None
        for j in sorted(rng.choice(X.shape[1], size=n_cols, replace=False)):
            for s in splits[j]:
                left = X[:, j] <= s
                gl, hl = grad[left].sum(), hess[left].sum()
                gr, hr = grad[~left].sum(), hess[~left].sum()
                gain = gl * gl / (hl + lam) + gr * gr / (hr + lam)
                if best is None or gain > best[0]:
                    best = (gain, int(j), float(s), -gl / (hl + lam), -gr / (hr + lam))
        if best is None:  # every sampled feature is constant; skip the round
            continue
        _, j, s, lv, rv = best
        stumps.append((j, s, float(lv), float(rv)))
        margin += rate * np.where(X[:, j] <= s, lv, rv)
    return StringStumpModel(stumps, rate, base, DEFAULT_THRESHOLDS[STUMPS] if threshold is None else threshold)


def train(corpus, kind, epochs=None, rate=None):
    """Fit a detector of ``kind`` on a :class:`LabeledCorpus`.

    For histograms ``epochs``/``rate`` are gradient-descent iterations and step;
    for stumps they are the number of boosting rounds and the shrinkage.
    """
    if kind == HISTOGRAM:
        return train_histogram(corpus.samples, corpus.labels,
                               epochs=epochs or 3000, rate=rate or 50.0)
    if kind == STUMPS:
        return train_stumps(corpus.samples, corpus.labels,
                            n_stumps=epochs or 64, rate=rate or 0.3)
    raise ValueError(f"unknown detector kind {kind!r}")


def accuracy(model, samples, labels):
    pred = np.array([model.score(s) >= model.threshold for s in samples])
    return float((pred == np.asarray(labels, dtype=bool)).mean())


# -- persistence ---------------------------------------------------------------

def dump_model(model):
    """Serialize to the ZXMD format: magic, version, kind, threshold, f64 payload."""
    head = MODEL_MAGIC + struct.pack("<BB2xd", MODEL_VERSION, _KIND_CODES[model.kind], model.threshold)
    if model.kind == HISTOGRAM:
        body = struct.pack("<I", model.weights.size) + np.asarray(model.weights, "<f8").tobytes()
        body += struct.pack("<d", model.bias)
    else:
        body = struct.pack("<Idd", len(model.stumps), model.learning_rate, model.base)
        for j, s, lv, rv in model.stumps:
            body += struct.pack("<Iddd", j, s, lv, rv)
    return head + body


def load_model(data):
    data = bytes(data)
    if data[:4] != MODEL_MAGIC:
        raise ValueError(f"not a ZXMD model (magic {data[:4]!r})")
    version, code, threshold = struct.unpack_from("<BB2xd", data, 4)
    if version != MODEL_VERSION:
        raise ValueError(f"unsupported model version {version}")
    pos = 16
    if code == _KIND_CODES[HISTOGRAM]:
        (n,) = struct.unpack_from("<I", data, pos)
        pos += 4
        w = np.frombuffer(data, "<f8", n, pos).astype(np.float64)
        (bias,) = struct.unpack_from("<d", data, pos + 8 * n)
        return HistogramModel(w, bias, threshold)
    if code == _KIND_CODES[STUMPS]:
        n, lr, base = struct.unpack_from("<Idd", data, pos)
        pos += 20
        stumps = []
        for _ in range(n):
            j, s, lv, rv = struct.unpack_from("<Iddd", data, pos)
            stumps.append((j, s, lv, rv))
            pos += 28
        return StringStumpModel(stumps, lr, base, threshold)
    raise ValueError(f"unknown model kind code {code}")


def save_model(model, path):
    with open(path, "wb") as fh:
        fh.write(dump_model(model))


def read_model(path):
    with open(path, "rb") as fh:
        return load_model(fh.read())
