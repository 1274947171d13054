"""Seeded synthetic corpus of benign and malicious TEXE samples."""

from dataclasses import dataclass
import csv
import hashlib
import json
import os

import numpy as np

from . import texe

BENIGN, MALICIOUS = 0, 1
LABEL_NAMES = {BENIGN: "benign", MALICIOUS: "malicious"}
MANIFEST = "manifest.csv"

# benign text: lowercase-heavy prose; malicious strings: API names, hex, paths
_WORDS = (b"the of and to in is that for it as with was on be by this are from at "
          b"or an have not they which one you had but all were when we there can "
          b"your more time has will each about how up out them then she many some "
          b"so these would other into has her two like him see could no make than "
          b"first been its who now people my made over did down only way find use "
          b"may water long little very after words called just where most know").split()
_MAL_STRINGS = (b"GetProcAddress", b"LoadLibraryA", b"VirtualAllocEx", b"WriteProcessMemory",
                b"CreateRemoteThread", b"cmd.exe /c", b"HKLM\\Software\\Run", b"C:\\Windows\\Temp\\",
                b"http://", b"POST /gate.php", b"%APPDATA%", b"WinExec")


@dataclass
class LabeledCorpus:
    samples: list
    labels: list
    seed: int
    names: list = None

    def __post_init__(self):
        if self.names is None:
            self.names = [f"{LABEL_NAMES[y]}_{i:04d}.texe" for i, y in enumerate(self.labels)]

    def __len__(self):
        return len(self.samples)

    def subset(self, label):
        idx = [i for i, y in enumerate(self.labels) if y == label]
        return LabeledCorpus([self.samples[i] for i in idx], [label] * len(idx), self.seed,
                             [self.names[i] for i in idx])


def _prose(rng, n):
    out = bytearray()
    while len(out) < n:
        words = [_WORDS[i] for i in rng.integers(0, len(_WORDS), size=rng.integers(4, 16))]
        sentence = b" ".join(words)
        out += sentence[:1].upper() + sentence[1:] + b". "
    return bytes(out[:n])


def _filler(rng, n):
    """Low-entropy filler: zero runs and short repeated patterns."""
    if rng.random() < 0.6:
        return bytes(n)
    pattern = rng.integers(0, 16, size=rng.integers(1, 4), dtype=np.uint8).tobytes()
    return (pattern * (n // len(pattern) + 1))[:n]


def _benign_payload(rng, size):
    text_frac = rng.uniform(0.7, 0.9)
    out = bytearray()
    while len(out) < size:
        chunk = int(rng.integers(64, 1024))
        if rng.random() < text_frac:
            out += _prose(rng, chunk)
        else:
            out += _filler(rng, chunk)
    return bytes(out[:size])


def _malicious_payload(rng, size):
    random_frac = rng.uniform(0.6, 0.8)
    out = bytearray()
    while len(out) < size:
        chunk = int(rng.integers(64, 1024))
        u = rng.random()
        if u < random_frac:
            out += rng.integers(0, 256, size=chunk, dtype=np.uint8).tobytes()
        elif u < random_frac + 0.05:
            s = _MAL_STRINGS[int(rng.integers(len(_MAL_STRINGS)))]
            out += s + b"\0"
        else:
            out += _filler(rng, chunk)
    return bytes(out[:size])


def gen_sample(rng, label, size_range=(8192, 65536)):
    """One TEXE file whose total payload size falls in ``size_range``."""
    total = int(rng.integers(size_range[0], size_range[1] + 1))
    n = int(rng.integers(2, 7))
    cuts = np.sort(rng.choice(np.arange(1, total), size=n - 1, replace=False))
    sizes = np.diff(np.concatenate(([0], cuts, [total])))
    make = _benign_payload if label == BENIGN else _malicious_payload
    payloads = [make(rng, int(s)) for s in sizes]
    names = [b".text", b".data", b".rdata", b".rsrc", b".reloc", b".tls"][:n]
    entry = int(rng.integers(0, n))
    return texe.serialize(texe.build(payloads, names, entry_section=entry))


def gen_corpus(seed=42, n_benign=200, n_malicious=200, size_range=(8192, 65536)):
    """Interleaved benign/malicious samples reproducible bit-exactly from ``seed``."""
    if n_benign < 1 or n_malicious < 1:
        raise ValueError("both class counts must be at least 1")
    lo, hi = size_range
    if not 0 < lo <= hi:
        raise ValueError(f"invalid size range {size_range}")
    rng = np.random.default_rng(seed)
    labels = [BENIGN] * n_benign + [MALICIOUS] * n_malicious
    order = rng.permutation(len(labels))
    labels = [labels[i] for i in order]
    samples = [gen_sample(rng, y, size_range) for y in labels]
    return LabeledCorpus(samples, labels, seed)


def split(corpus, holdout=0.25, seed=0):
    """Stratified train/held-out split (deterministic in ``seed``)."""
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for label in (BENIGN, MALICIOUS):
        idx = [i for i, y in enumerate(corpus.labels) if y == label]
        idx = list(rng.permutation(idx))
        k = int(round(len(idx) * holdout))
        test_idx += idx[:k]
        train_idx += idx[k:]
    pick = lambda ids: LabeledCorpus([corpus.samples[i] for i in sorted(ids)],
                                     [corpus.labels[i] for i in sorted(ids)], corpus.seed,
                                     [corpus.names[i] for i in sorted(ids)])
    return pick(train_idx), pick(test_idx)


def write_corpus(corpus, out_dir, force=False):
    """Write ``.texe`` files plus a manifest (filename, label, seed, sha256)."""
    manifest = os.path.join(out_dir, MANIFEST)
    if os.path.exists(manifest) and not force:
        raise FileExistsError(f"{manifest} exists; pass force to overwrite")
    os.makedirs(out_dir, exist_ok=True)
    with open(manifest, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["filename", "label", "seed", "sha256"])
        for name, data, label in zip(corpus.names, corpus.samples, corpus.labels):
            with open(os.path.join(out_dir, name), "wb") as f:
                f.write(data)
            w.writerow([name, LABEL_NAMES[label], corpus.seed, hashlib.sha256(data).hexdigest()])
    with open(os.path.join(out_dir, "corpus.json"), "w", encoding="utf-8") as fh:
        json.dump({"seed": corpus.seed, "n_samples": len(corpus)}, fh)
    return manifest


def read_corpus(path):
    manifest = os.path.join(path, MANIFEST)
    if not os.path.isfile(manifest):
        raise FileNotFoundError(f"no corpus manifest at {manifest}")
    samples, labels, names, seed = [], [], [], None
    inv = {v: k for k, v in LABEL_NAMES.items()}
    with open(manifest, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            with open(os.path.join(path, row["filename"]), "rb") as f:
                samples.append(f.read())
            labels.append(inv[row["label"]])
            names.append(row["filename"])
            seed = int(row["seed"])
    return LabeledCorpus(samples, labels, seed, names)
