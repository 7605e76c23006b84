"""Training-loop tests: weight calibration, trace bookkeeping, determinism
and small-scale pretraining behaviour."""

import numpy as np
import pytest

from a4nt import evaluation, training
from a4nt.autograd import Tensor
from a4nt.classifier import ClassifierModel
from a4nt.data import build_vocabulary, corpus_from_dicts, \
    generate_synthetic_corpus, split_docs
from a4nt.losses import LanguageModel, LossReport, LossWeights, SemanticEmbedder
from a4nt.training import (TraceRow, TrainingConfig, TrainingTrace,
                           calibrate_loss_weights, restore, snapshot)
from a4nt.translator import TranslatorModel


def small_data(seed=0, docs=12, sentences=3, max_len=12):
    raw = generate_synthetic_corpus(seed, docs, sentences)
    train_d, val_d, _ = split_docs(raw, seed=seed + 1)
    vocab = build_vocabulary([t for d in raw for t in d["sentences"]],
                             min_frequency=1)
    classes = ("teen", "adult")
    train = corpus_from_dicts(train_d, "age", classes, vocab, max_len=max_len)
    val = corpus_from_dicts(val_d, "age", classes, vocab, max_len=max_len)
    return vocab, train, val


# ---------------------------------------------------------------------------
# calibration

def test_calibrate_equalizes_weighted_terms():
    report = LossReport(style=2.0, semantic=4.0, language=8.0, total=0.0)
    w = calibrate_loss_weights(report)
    assert abs(w.w_sty - 1.0) < 1e-9
    assert abs(w.w_sem - 0.5) < 1e-9
    assert abs(w.w_l - 0.25) < 1e-9
    terms = [w.w_sty * 2.0, w.w_sem * 4.0, w.w_l * 8.0]
    assert max(terms) - min(terms) <= 0.05 * max(terms)


def test_calibrate_handles_zero_component():
    report = LossReport(style=2.0, semantic=0.0, language=1.0, total=0.0)
    w = calibrate_loss_weights(report)
    assert w.w_sem == pytest.approx(1.0)  # zero component falls back to weight 1
    assert w.w_l == pytest.approx(2.0)


# ---------------------------------------------------------------------------
# trace and snapshots

def test_trace_requires_increasing_iterations():
    trace = TrainingTrace()
    trace.append(TraceRow(iteration=1))
    trace.append(TraceRow(iteration=2))
    with pytest.raises(ValueError):
        trace.append(TraceRow(iteration=2))


def test_trace_csv_columns(tmp_path):
    trace = TrainingTrace()
    trace.append(TraceRow(iteration=1, style=0.5, semantic=1.0, language=2.0,
                          total=3.5, val_f1=0.9, val_meteor=0.8))
    path = tmp_path / "trace.csv"
    trace.to_csv(path)
    header, row = path.read_text().strip().split("\n")
    assert header.split(",") == ["iteration", "style", "semantic", "language",
                                 "total", "disc_loss_xy", "disc_loss_yx",
                                 "val_f1", "val_meteor"]
    assert row.startswith("1,0.5,1.0,2.0,3.5")


def test_snapshot_restore_round_trip():
    p = Tensor(np.arange(6, dtype=np.float32).reshape(2, 3), requires_grad=True)
    snap = snapshot([p])
    p.data = p.data * 0
    restore([p], snap)
    np.testing.assert_array_equal(p.data, np.arange(6).reshape(2, 3))
    # snapshot is a copy, not a view
    snap[0][0, 0] = 99
    assert p.data[0, 0] == 0


def test_training_config_validation():
    with pytest.raises(ValueError):
        TrainingConfig(lr_classifier=0.0)
    with pytest.raises(ValueError):
        TrainingConfig(batch_size=0)


# ---------------------------------------------------------------------------
# pretraining behaviour at tiny scale

def test_pretrain_classifier_improves_and_is_deterministic():
    vocab, train, val = small_data()
    cfg = TrainingConfig(max_epochs=4, batch_size=8, max_len=12, d_emb=8, d_h=8)

    def run():
        model = ClassifierModel(vocab, ("teen", "adult"), d_emb=8, d_h=8, seed=3)
        training.pretrain_classifier(model, train, val, cfg)
        return model
    m1, m2 = run(), run()
    f1 = evaluation.corpus_metrics(m1, val).document_f1
    assert f1 >= 0.8
    for a, b in zip(m1.params(), m2.params()):
        np.testing.assert_array_equal(a.data, b.data)


def test_pretrain_language_model_reduces_nll_and_freezes():
    vocab, train, _ = small_data()
    lm = LanguageModel(vocab, "teen", d_emb=8, d_h=8, seed=0)
    cfg = TrainingConfig(max_epochs=5, batch_size=8, max_len=12)
    trace = training.pretrain_language_model(lm, train, cfg)
    assert trace.rows[-1].total < trace.rows[0].total
    assert lm.frozen
    assert all(not p.requires_grad for p in lm.params())


def test_pretrain_embedder_reduces_nll_and_freezes():
    vocab, train, _ = small_data()
    emb = SemanticEmbedder(vocab, d_emb=8, d_h=8, seed=0)
    cfg = TrainingConfig(max_epochs=5, batch_size=8, max_len=12)
    trace = training.pretrain_embedder(emb, train, cfg)
    assert trace.rows[-1].total < trace.rows[0].total
    assert emb.frozen


def test_pretrain_autoencoder_improves_reconstruction():
    vocab, train, _ = small_data(docs=10)
    model = TranslatorModel(vocab, ("teen", "adult"), d_emb=12, d_h=16, seed=0)
    cfg = TrainingConfig(ae_epochs=25, ae_min_epochs=25, batch_size=8,
                         max_len=12)
    before = training.token_reconstruction_accuracy(model, train, 12)
    training.pretrain_autoencoder(model, train, cfg)
    after = training.token_reconstruction_accuracy(model, train, 12)
    assert after > before


def test_train_gan_smoke_records_trace():
    vocab, train, val = small_data(docs=8)
    classes = ("teen", "adult")
    translator = TranslatorModel(vocab, classes, d_emb=8, d_h=8, seed=0)
    eval_clf = ClassifierModel(vocab, classes, d_emb=8, d_h=8, seed=1)
    discs = {c: ClassifierModel(vocab, classes, d_emb=8, d_h=8, seed=10 + i)
             for i, c in enumerate(classes)}
    cfg = TrainingConfig(gan_iterations=4, validate_every=2, batch_size=4,
                         max_len=12, d_emb=8, d_h=8, val_docs=4,
                         weights=LossWeights(1.0, 1.0, 0.0),
                         use_language_loss=False)
    trace = training.train_gan(translator, discs, None, None, train, val,
                               eval_clf, cfg)
    assert len(trace.rows) == 4
    assert [r.iteration for r in trace.rows] == [1, 2, 3, 4]
    validated = [r for r in trace.rows if r.val_f1 is not None]
    assert validated and all(0.0 <= r.val_f1 <= 1.0 for r in validated)
    # every logged report satisfies the weighted-sum identity
    for rep in trace.reports:
        want = 1.0 * rep.style + 1.0 * rep.semantic + 0.0 * rep.language
        assert abs(rep.total - want) <= 1e-6 * max(1.0, abs(want))


def test_train_gan_deterministic():
    vocab, train, val = small_data(docs=6)
    classes = ("teen", "adult")
    cfg = TrainingConfig(gan_iterations=3, validate_every=10, batch_size=4,
                         max_len=12, d_emb=8, d_h=8, val_docs=4,
                         weights=LossWeights(1.0, 1.0, 0.0),
                         use_language_loss=False)

    def run():
        translator = TranslatorModel(vocab, classes, d_emb=8, d_h=8, seed=0)
        eval_clf = ClassifierModel(vocab, classes, d_emb=8, d_h=8, seed=1)
        discs = {c: ClassifierModel(vocab, classes, d_emb=8, d_h=8, seed=10 + i)
                 for i, c in enumerate(classes)}
        training.train_gan(translator, discs, None, None, train, val,
                           eval_clf, cfg)
        return translator
    t1, t2 = run(), run()
    for a, b in zip(t1.params(), t2.params()):
        np.testing.assert_array_equal(a.data, b.data)
