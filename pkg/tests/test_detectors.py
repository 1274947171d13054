import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zexe import corpus, detectors, texe
from zexe.detectors import (HistogramModel, StringStumpModel, featurize_histogram,
                            featurize_strings)


def test_histogram_zeros():
    h = featurize_histogram(bytes(1024))
    assert h[0] == 1.0 and h[1:].sum() == 0


def test_histogram_ramp():
    assert np.allclose(featurize_histogram(bytes(range(256))), 1 / 256)


def test_histogram_empty():
    with pytest.raises(ValueError):
        featurize_histogram(b"")


def test_histogram_normalized(rng):
    for _ in range(1000):
        blob = rng.integers(0, 256, int(rng.integers(1, 2000)), dtype=np.uint8).tobytes()
        assert abs(featurize_histogram(blob).sum() - 1) <= 1e-12


def test_strings_all_A():
    f = featurize_strings(b"A" * 100)
    assert list(f[:4]) == [1, 100, 1.0, 0.0]
    assert f[4] == 0 and f[5] == 100


def test_strings_threshold():
    assert featurize_strings(b"AB\0CD")[0] == 0
    assert featurize_strings(b"ABCD\0EFG\0HIJKL")[0:2].tolist() == [2, 4.5]


def test_strings_uniform_entropy(rng):
    f = featurize_strings(rng.integers(0, 256, 65536, dtype=np.uint8).tobytes())
    assert 7.9 <= f[3] <= 8.0


def test_strings_section_count():
    blob = texe.serialize(texe.build([b"a", b"b", b"c"]))
    assert featurize_strings(blob)[4] == 3


def test_zero_model_scores_half(rng):
    m = HistogramModel(np.zeros(256), 0.0)
    for _ in range(5):
        assert m.score(rng.integers(0, 256, 100, dtype=np.uint8).tobytes()) == 0.5


def test_high_entropy_weights_on_printable_sample():
    w = np.zeros(256)
    w[127:] = 5.0
    w[:32] = 5.0
    m = HistogramModel(w, -1.0)
    assert m.score(b"printable text only " * 50) < 0.5


@settings(max_examples=100)
@given(st.binary(min_size=1, max_size=3000))
def test_score_open_interval(blob):
    m = HistogramModel(np.linspace(-40, 40, 256), 3.0)
    s = StringStumpModel([(0, 2.0, -30.0, 30.0), (3, 4.0, 1.0, -1.0)], 1.0, 0.0)
    for model in (m, s):
        assert 0.0 < detectors.score(model, blob) < 1.0


def test_train_toy_separable():
    c = corpus.LabeledCorpus([b"A" * 64, b"\xff" * 64], [0, 1], seed=0)
    for kind in detectors.KINDS:
        m = detectors.train(c, kind, epochs=200)
        assert detectors.accuracy(m, c.samples, c.labels) == 1.0


def test_train_single_class():
    c = corpus.LabeledCorpus([b"ab", b"cd"], [1, 1], seed=0)
    with pytest.raises(ValueError):
        detectors.train(c, "histogram")
    with pytest.raises(ValueError):
        detectors.train(c, "forest")


def test_train_deterministic(small_corpus):
    for kind in detectors.KINDS:
        a = detectors.dump_model(detectors.train(small_corpus, kind))
        b = detectors.dump_model(detectors.train(small_corpus, kind))
        assert a == b


def test_model_persistence(small_corpus, tmp_path):
    for kind in detectors.KINDS:
        m = detectors.train(small_corpus, kind)
        path = tmp_path / f"{kind}.zxmd"
        detectors.save_model(m, path)
        blob = path.read_bytes()
        assert blob[:4] == b"ZXMD"
        back = detectors.read_model(path)
        assert back.kind == kind and back.threshold == m.threshold
        for s in small_corpus.samples[:5]:
            assert back.score(s) == m.score(s)


def test_load_rejects_garbage():
    with pytest.raises(ValueError):
        detectors.load_model(b"NOPE" + bytes(20))
    blob = bytearray(detectors.dump_model(HistogramModel(np.zeros(256))))
    blob[4] = 9
    with pytest.raises(ValueError):
        detectors.load_model(bytes(blob))


def test_default_thresholds():
    assert detectors.DEFAULT_THRESHOLDS == {"histogram": 0.5, "stumps": 0.8}


@pytest.mark.slow
def test_heldout_accuracy(default_corpus):
    train, test = corpus.split(default_corpus, holdout=0.25, seed=0)
    for kind in detectors.KINDS:
        m = detectors.train(train, kind)
        assert detectors.accuracy(m, train.samples, train.labels) >= 0.95
        assert detectors.accuracy(m, test.samples, test.labels) >= 0.95


def test_stumps_ensemble_size(histogram_model, stump_model):
    assert len(stump_model.stumps) == 64
    assert histogram_model.weights.shape == (256,)


def test_attack_relevance(default_corpus, histogram_model, rng):
    # injecting printable content lowers the high-entropy mass and the score
    mal = default_corpus.subset(corpus.MALICIOUS)
    for blob in mal.samples[:10]:
        base = texe.parse(blob)
        out, pm = texe.inject_sections(base, 10, rng.integers(32, 127, 10 * 512, dtype=np.uint8).tobytes())
        before = featurize_histogram(blob)
        after = featurize_histogram(texe.serialize(out))
        assert after[127:].sum() < before[127:].sum()
        assert histogram_model.score(texe.serialize(out)) < histogram_model.score(blob)


# -- corpus --------------------------------------------------------------------

def test_corpus_reproducible():
    a = corpus.gen_corpus(seed=5, n_benign=4, n_malicious=4, size_range=(1000, 3000))
    b = corpus.gen_corpus(seed=5, n_benign=4, n_malicious=4, size_range=(1000, 3000))
    assert a.samples == b.samples and a.labels == b.labels


def test_corpus_counts_and_validity(small_corpus):
    assert small_corpus.labels.count(0) == 12 and small_corpus.labels.count(1) == 12
    for s in small_corpus.samples:
        texe.parse(s)


def test_corpus_needs_both_classes():
    with pytest.raises(ValueError):
        corpus.gen_corpus(n_benign=3, n_malicious=0)


def test_entropy_gap(default_corpus):
    ent = {0: [], 1: []}
    for s, y in zip(default_corpus.samples, default_corpus.labels):
        ent[y].append(featurize_strings(s)[3])
    assert np.mean(ent[1]) - np.mean(ent[0]) >= 1.5


def test_split_stratified(small_corpus):
    train, test = corpus.split(small_corpus, holdout=0.25)
    assert test.labels.count(0) == 3 and test.labels.count(1) == 3
    assert len(train) + len(test) == len(small_corpus)
    assert not set(train.names) & set(test.names)


def test_write_read_corpus(small_corpus, tmp_path):
    corpus.write_corpus(small_corpus, tmp_path / "c")
    back = corpus.read_corpus(tmp_path / "c")
    assert back.samples == small_corpus.samples and back.labels == small_corpus.labels
    with pytest.raises(FileExistsError):
        corpus.write_corpus(small_corpus, tmp_path / "c")
    corpus.write_corpus(small_corpus, tmp_path / "c", force=True)
    with pytest.raises(FileNotFoundError):
        corpus.read_corpus(tmp_path / "missing")
