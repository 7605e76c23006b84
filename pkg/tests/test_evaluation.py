"""Evaluation tests: F1 against a brute-force oracle, meteor closed forms,
identity fixed points, operating-point policies and privacy records."""

import itertools

import numpy as np
import pytest

from a4nt.classifier import ClassifierModel
from a4nt.data import (AttributeLabel, Corpus, Document, Sentence, Vocabulary,
                       build_vocabulary, corpus_from_dicts,
                       generate_synthetic_corpus)
from a4nt.evaluation import (IdentityTranslator, build_holdout_ensemble,
                             corpus_metrics, evaluate_transfer, f1_score,
                             holdout_evaluation, macro_f1, meteor_proxy,
                             operating_points, precision_recall_f1,
                             privacy_analysis, transfer_corpus,
                             write_curves_csv, write_metrics_csv,
                             write_privacy_csv)


# ---------------------------------------------------------------------------
# F1 vs brute-force confusion-matrix oracle

def oracle_f1(true, pred, positive):
    tp = sum(1 for t, p in zip(true, pred) if t == positive and p == positive)
    fp = sum(1 for t, p in zip(true, pred) if t != positive and p == positive)
    fn = sum(1 for t, p in zip(true, pred) if t == positive and p != positive)
    if 2 * tp + fp + fn == 0:
        return 0.0
    return 2 * tp / (2 * tp + fp + fn)


def test_f1_exhaustive_against_oracle():
    labels = ("a", "b")
    for n in range(1, 7):
        for true in itertools.product(labels, repeat=n):
            for pred in itertools.product(labels, repeat=n):
                for positive in labels:
                    got = f1_score(list(true), list(pred), positive)
                    want = oracle_f1(true, pred, positive)
                    assert abs(got - want) < 1e-12, (true, pred, positive)


def test_f1_input_validation():
    with pytest.raises(ValueError):
        f1_score([], [], "a")
    with pytest.raises(ValueError):
        f1_score(["a"], ["a", "b"], "a")


def test_precision_recall_f1_hand_values():
    true = ["a", "a", "b", "b"]
    pred = ["a", "b", "b", "b"]
    p, r, f = precision_recall_f1(true, pred, "a")
    assert (p, r) == (1.0, 0.5)
    assert abs(f - 2 / 3) < 1e-12


def test_macro_f1_is_class_mean():
    true = ["a", "a", "b", "b"]
    pred = ["a", "b", "b", "b"]
    want = (oracle_f1(true, pred, "a") + oracle_f1(true, pred, "b")) / 2
    assert abs(macro_f1(true, pred, ("a", "b")) - want) < 1e-12


# ---------------------------------------------------------------------------
# meteor proxy

def test_meteor_identical_four_tokens():
    # P = R = 1, one chunk of four matches: 1 - 0.5 * (1/4)^3 = 0.9921875
    cand = ["a", "b", "c", "d"]
    assert meteor_proxy(cand, cand) == pytest.approx(0.9921875)


def test_meteor_disjoint_is_zero():
    assert meteor_proxy(["a", "b"], ["c", "d"]) == 0.0


def test_meteor_reordering_lowers_score():
    ref = ["a", "b", "c", "d"]
    assert meteor_proxy(["d", "c", "b", "a"], ref) < meteor_proxy(ref, ref)


def test_meteor_accepts_sentences_with_vocab(tiny_vocab):
    s = Sentence([5, 6, tiny_vocab.end_id])
    assert meteor_proxy(s, s, tiny_vocab) > 0.9


def test_meteor_recall_weighted():
    # F_mean = 10PR / (R + 9P) weights recall: dropping reference tokens
    # hurts more than adding extra candidate tokens
    ref = ["a", "b", "c", "d"]
    drop = meteor_proxy(["a", "b"], ref)
    add = meteor_proxy(["a", "b", "c", "d", "e", "f"], ref)
    assert drop < add


# ---------------------------------------------------------------------------
# corpus-level fixtures

def _synthetic(seed=0, docs=10):
    raw = generate_synthetic_corpus(seed, docs, 3)
    vocab = build_vocabulary([t for d in raw for t in d["sentences"]],
                             min_frequency=1)
    corpus = corpus_from_dicts(raw, "age", ("teen", "adult"), vocab, max_len=12)
    return vocab, corpus


class FlipTranslator:
    """Deterministically drops the first token; stand-in stochastic rewriter."""

    def __init__(self, vocab):
        self.vocab = vocab

    def translate(self, sentence, direction=None, mode="hard", max_len=20,
                  seed=0, greedy=False, temperature=0.5):
        rng = np.random.default_rng(seed)
        ids = [i for i in sentence.ids[:-1]]
        keep = [i for i in ids if rng.random() > 0.3]
        if not keep:
            keep = ids[:1]
        return Sentence(keep + [self.vocab.end_id])


def test_identity_translator_is_fixed_point():
    vocab, corpus = _synthetic()
    clf = ClassifierModel(vocab, ("teen", "adult"), d_emb=8, d_h=8, seed=0)
    original = corpus_metrics(clf, corpus, reference=corpus, vocab=vocab)
    transferred = evaluate_transfer(IdentityTranslator(), clf, corpus,
                                    vocab=vocab)
    assert transferred.document_f1 == original.document_f1
    assert transferred.sentence_f1 == original.sentence_f1
    assert transferred.meteor == pytest.approx(original.meteor)


def test_transfer_corpus_preserves_structure():
    vocab, corpus = _synthetic()
    out = transfer_corpus(FlipTranslator(vocab), corpus, seed=1, max_len=12)
    assert len(out.documents) == len(corpus.documents)
    for a, b in zip(out.documents, corpus.documents):
        assert a.doc_id == b.doc_id
        assert len(a.sentences) == len(b.sentences)


def test_transfer_corpus_deterministic():
    vocab, corpus = _synthetic()
    t = FlipTranslator(vocab)
    one = transfer_corpus(t, corpus, seed=2)
    two = transfer_corpus(t, corpus, seed=2)
    for a, b in zip(one.documents, two.documents):
        assert [s.ids for s in a.sentences] == [s.ids for s in b.sentences]


def test_operating_point_policies_ordered():
    vocab, corpus = _synthetic(docs=6)
    clf = ClassifierModel(vocab, ("teen", "adult"), d_emb=8, d_h=8, seed=0)
    points = operating_points(FlipTranslator(vocab), clf, corpus, k=5,
                              seed=0, max_len=12, vocab=vocab)
    by_policy = {p.policy: p.meteor for p in points}
    assert by_policy["min"] <= by_policy["random"] <= by_policy["max"]


def test_operating_points_validation():
    vocab, corpus = _synthetic(docs=2)
    clf = ClassifierModel(vocab, ("teen", "adult"), d_emb=8, d_h=8, seed=0)
    with pytest.raises(ValueError):
        operating_points(IdentityTranslator(), clf, corpus, k=0)
    with pytest.raises(ValueError):
        operating_points(IdentityTranslator(), clf, corpus, k=2,
                         policies=("median",))


def test_privacy_identity_all_zero_gains():
    vocab, corpus = _synthetic(docs=4)
    clf = ClassifierModel(vocab, ("teen", "adult"), d_emb=8, d_h=8, seed=0)
    records, curves = privacy_analysis(IdentityTranslator(), clf, corpus,
                                       vocab=vocab)
    assert records
    assert all(r.gain == 0.0 for r in records)
    assert sum(curves["counts"]) == len(records)


def test_privacy_records_fields_consistent():
    vocab, corpus = _synthetic(docs=4)
    clf = ClassifierModel(vocab, ("teen", "adult"), d_emb=8, d_h=8, seed=0)
    records, _ = privacy_analysis(FlipTranslator(vocab), clf, corpus,
                                  vocab=vocab)
    for r in records:
        assert 0.0 <= r.in_score <= 1.0 and 0.0 <= r.out_score <= 1.0
        assert r.gain == pytest.approx(r.in_score - r.out_score)


def test_csv_writers(tmp_path):
    vocab, corpus = _synthetic(docs=3)
    clf = ClassifierModel(vocab, ("teen", "adult"), d_emb=8, d_h=8, seed=0)
    records, curves = privacy_analysis(IdentityTranslator(), clf, corpus,
                                       vocab=vocab)
    write_privacy_csv(tmp_path / "p.csv", records)
    write_curves_csv(tmp_path / "c.csv", curves)
    write_metrics_csv(tmp_path / "m.csv",
                      [{"model": "x", "policy": "-", "sentence_f1": 1,
                        "doc_f1": 1, "meteor": 1}])
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == \
        "doc_id,sent_idx,in_score,out_score,gain,meteor"
    assert (tmp_path / "m.csv").read_text().splitlines()[0] == \
        "model,policy,sentence_f1,doc_f1,meteor"
    assert len((tmp_path / "c.csv").read_text().splitlines()) == 11


def test_holdout_ensemble_composition():
    vocab, _ = _synthetic(docs=2)
    ensemble = build_holdout_ensemble(vocab, ("teen", "adult"), d_emb=8)
    assert len(ensemble) == 6
    combos = {(m.d_h, m.pooling) for m in ensemble}
    assert combos == {(d, p) for d in (32, 64, 128) for p in ("concat", "final")}


def test_holdout_evaluation_reports_means():
    vocab, corpus = _synthetic(docs=3)
    ensemble = [ClassifierModel(vocab, ("teen", "adult"), d_emb=8, d_h=8, seed=s)
                for s in (0, 1)]
    result = holdout_evaluation(IdentityTranslator(), corpus, ensemble)
    assert result["original_f1"] == result["transferred_f1"]
    assert result["original_mean"] == pytest.approx(
        np.mean(result["original_f1"]))
