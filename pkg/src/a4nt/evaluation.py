"""Privacy-effectiveness and semantic-similarity measurement: F1 scoring,
document-level accumulation, the unigram meteor proxy, operating points,
privacy-gain analysis and holdout-classifier generalization."""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .classifier import ClassifierModel
from .data import Corpus, Document, Sentence, Vocabulary
from .translator import TranslatorModel


# ---------------------------------------------------------------------------
# F1

def precision_recall_f1(true_labels: Sequence, predicted: Sequence,
                        positive_class) -> tuple[float, float, float]:
    tp = sum(1 for t, p in zip(true_labels, predicted)
             if p == positive_class and t == positive_class)
    fp = sum(1 for t, p in zip(true_labels, predicted)
             if p == positive_class and t != positive_class)
    fn = sum(1 for t, p in zip(true_labels, predicted)
             if p != positive_class and t == positive_class)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)


def f1_score(true_labels: Sequence, predicted: Sequence, positive_class) -> float:
    """Harmonic mean of precision and recall for the positive class; 0 when
    precision + recall is 0."""
    if len(true_labels) == 0 or len(true_labels) != len(predicted):
        raise ValueError("f1_score: label lists must be non-empty and equal length")
    return precision_recall_f1(true_labels, predicted, positive_class)[2]


def macro_f1(true_labels: Sequence, predicted: Sequence,
             classes: Sequence) -> float:
    if len(true_labels) == 0 or len(true_labels) != len(predicted):
        raise ValueError("macro_f1: label lists must be non-empty and equal length")
    return float(np.mean([f1_score(true_labels, predicted, c) for c in classes]))


# ---------------------------------------------------------------------------
# meteor proxy

def _align(candidate: list, reference: list) -> list[tuple[int, int]]:
    """Injective unigram alignment; prefers reference positions that extend
    the current contiguous run."""
    positions: dict = defaultdict(list)
    for j, tok in enumerate(reference):
        positions[tok].append(j)
    used = set()
    alignment = []
    prev_ref = None
    for i, tok in enumerate(candidate):
        avail = [j for j in positions.get(tok, ()) if j not in used]
        if not avail:
            continue
        if prev_ref is not None and prev_ref + 1 in avail:
            j = prev_ref + 1
        else:
            after = [j for j in avail if prev_ref is None or j > prev_ref]
            j = after[0] if after else avail[0]
        used.add(j)
        alignment.append((i, j))
        prev_ref = j
    return alignment


def _count_chunks(alignment: list[tuple[int, int]]) -> int:
    chunks = 0
    prev = None
    for i, j in alignment:
        if prev is None or i != prev[0] + 1 or j != prev[1] + 1:
            chunks += 1
        prev = (i, j)
    return chunks


def meteor_proxy(candidate, reference, vocab: Optional[Vocabulary] = None) -> float:
    """Exact-match unigram Meteor-style score in [0, 1]: F_mean = 10PR/(R+9P)
    with chunk penalty 0.5*(chunks/matches)^3.  Accepts Sentences or token
    lists; END and padding are excluded."""
    cand = _tokens(candidate, vocab)
    ref = _tokens(reference, vocab)
    if not cand or not ref:
        raise ValueError("meteor_proxy: both sentences must be non-empty")
    alignment = _align(cand, ref)
    m = len(alignment)
    if m == 0:
        return 0.0
    p = m / len(cand)
    r = m / len(ref)
    f_mean = 10 * p * r / (r + 9 * p)
    penalty = 0.5 * (_count_chunks(alignment) / m) ** 3
    return f_mean * (1.0 - penalty)


def _tokens(x, vocab: Optional[Vocabulary]) -> list:
    if isinstance(x, Sentence):
        end_id = vocab.end_id if vocab is not None else x.ids[-1]
        out = []
        for i in x.ids:
            if i == end_id:
                break
            out.append(i)
        return out
    return list(x)


# ---------------------------------------------------------------------------
# transfer evaluation

class IdentityTranslator:
    """No-op stand-in used as the fixed-point baseline in tests and analyses."""

    def translate(self, sentence: Sentence, direction=None, mode: str = "hard",
                  max_len: int = 0, seed: int = 0, greedy: bool = False,
                  temperature: float = 0.5) -> Sentence:
        return sentence


@dataclass
class EvalMetrics:
    sentence_f1: float
    document_f1: float
    meteor: float
    per_class: dict = field(default_factory=dict)


@dataclass
class OperatingPoint:
    policy: str
    k: int
    f1: float
    meteor: float


@dataclass
class PrivacyGainRecord:
    doc_id: str
    sent_idx: int
    in_score: float
    out_score: float
    gain: float
    meteor: float


def _other(class_names: Sequence[str], value: str) -> str:
    a, b = class_names
    return b if value == a else a


def transfer_corpus(translator, corpus: Corpus, seed: int = 0,
                    max_len: int = 20, greedy: bool = False) -> Corpus:
    """Rewrite every sentence from its true attribute to the other class."""
    out = Corpus(task=corpus.task, class_names=corpus.class_names)
    for d_idx, doc in enumerate(corpus.documents):
        direction = (doc.attribute.value, _other(corpus.class_names, doc.attribute.value))
        sentences = []
        for s_idx, sent in enumerate(doc.sentences):
            sentences.append(translator.translate(
                sent, direction, mode="hard", max_len=max_len,
                seed=seed * 1_000_003 + d_idx * 1009 + s_idx, greedy=greedy))
        out.documents.append(Document(doc.doc_id, doc.attribute, sentences))
    return out


def corpus_metrics(classifier: ClassifierModel, scored: Corpus,
                   reference: Optional[Corpus] = None,
                   vocab: Optional[Vocabulary] = None) -> EvalMetrics:
    """Classifier F1 on a corpus, plus mean meteor against a reference corpus
    (identical structure) when one is given."""
    doc_true, doc_pred = [], []
    sent_true, sent_pred = [], []
    meteors = []
    for i, doc in enumerate(scored.documents):
        pred, _ = classifier.classify_document(doc)
        doc_true.append(doc.attribute.value)
        doc_pred.append(pred)
        for j, sent in enumerate(doc.sentences):
            probs = classifier.classify_sentence(sent)
            sent_pred.append(classifier.class_names[int(np.argmax(probs))])
            sent_true.append(doc.attribute.value)
            if reference is not None:
                ref_sent = reference.documents[i].sentences[j]
                meteors.append(meteor_proxy(sent, ref_sent, vocab))
    per_class = {}
    for c in scored.class_names:
        p, r, f = precision_recall_f1(doc_true, doc_pred, c)
        per_class[c] = {"precision": p, "recall": r, "f1": f}
    return EvalMetrics(
        sentence_f1=macro_f1(sent_true, sent_pred, scored.class_names),
        document_f1=macro_f1(doc_true, doc_pred, scored.class_names),
        meteor=float(np.mean(meteors)) if meteors else 1.0,
        per_class=per_class)


def evaluate_transfer(translator, classifier: ClassifierModel, corpus: Corpus,
                      seed: int = 0, max_len: int = 20,
                      vocab: Optional[Vocabulary] = None) -> EvalMetrics:
    """Transfer every sentence to the other attribute and score the frozen
    source classifier on the result."""
    transferred = transfer_corpus(translator, corpus, seed=seed, max_len=max_len)
    return corpus_metrics(classifier, transferred, reference=corpus, vocab=vocab)


# ---------------------------------------------------------------------------
# operating points

def operating_points(translator, classifier: ClassifierModel, corpus: Corpus,
                     k: int, policies: Sequence[str] = ("min", "random", "max"),
                     seed: int = 0, max_len: int = 20,
                     vocab: Optional[Vocabulary] = None) -> list[OperatingPoint]:
    """k sampled transfers per sentence; each policy picks one per sentence by
    meteor and is scored as a corpus."""
    if k < 1:
        raise ValueError("operating_points: k must be >= 1")
    rng = np.random.default_rng(seed)
    candidates: list[list[tuple[Sentence, float]]] = []
    layout = []
    for d_idx, doc in enumerate(corpus.documents):
        direction = (doc.attribute.value, _other(corpus.class_names, doc.attribute.value))
        for s_idx, sent in enumerate(doc.sentences):
            samples = []
            for j in range(k):
                out = translator.translate(
                    sent, direction, mode="hard", max_len=max_len,
                    seed=seed * 7_777_777 + d_idx * 65_521 + s_idx * 257 + j)
                samples.append((out, meteor_proxy(out, sent, vocab)))
            candidates.append(samples)
            layout.append((d_idx, s_idx))
    points = []
    for policy in policies:
        chosen = []
        for samples in candidates:
            if policy == "min":
                pick = min(samples, key=lambda t: t[1])
            elif policy == "max":
                pick = max(samples, key=lambda t: t[1])
            elif policy == "random":
                pick = samples[int(rng.integers(len(samples)))]
            else:
                raise ValueError(f"unknown policy {policy!r}")
            chosen.append(pick)
        selected = Corpus(task=corpus.task, class_names=corpus.class_names)
        cursor = 0
        for doc in corpus.documents:
            sents = [chosen[cursor + j][0] for j in range(len(doc.sentences))]
            cursor += len(doc.sentences)
            selected.documents.append(Document(doc.doc_id, doc.attribute, sents))
        metrics = corpus_metrics(classifier, selected, reference=corpus, vocab=vocab)
        points.append(OperatingPoint(policy=policy, k=k, f1=metrics.document_f1,
                                     meteor=float(np.mean([m for _, m in chosen]))))
    return points


# ---------------------------------------------------------------------------
# privacy analysis

def privacy_analysis(translator, classifier: ClassifierModel, corpus: Corpus,
                     seed: int = 0, max_len: int = 20,
                     vocab: Optional[Vocabulary] = None, bins: int = 10):
    """Per-sentence source-class scores before and after transfer, with the
    binned curves behind the difficulty and privacy-gain figures."""
    records: list[PrivacyGainRecord] = []
    for d_idx, doc in enumerate(corpus.documents):
        src = doc.attribute.value
        src_idx = classifier.class_index(src)
        direction = (src, _other(corpus.class_names, src))
        for s_idx, sent in enumerate(doc.sentences):
            out = translator.translate(
                sent, direction, mode="hard", max_len=max_len,
                seed=seed * 999_983 + d_idx * 1013 + s_idx)
            in_score = float(classifier.classify_sentence(sent)[src_idx])
            out_score = float(classifier.classify_sentence(out)[src_idx])
            records.append(PrivacyGainRecord(
                doc_id=doc.doc_id, sent_idx=s_idx, in_score=in_score,
                out_score=out_score, gain=in_score - out_score,
                meteor=meteor_proxy(out, sent, vocab)))
    edges = np.linspace(0.0, 1.0, bins + 1)
    out_curve, meteor_curve, counts = [], [], []
    for b in range(bins):
        lo, hi = edges[b], edges[b + 1]
        sel = [r for r in records
               if (r.in_score >= lo and (r.in_score < hi or (b == bins - 1 and r.in_score <= hi)))]
        counts.append(len(sel))
        out_curve.append(float(np.mean([r.out_score for r in sel])) if sel else float("nan"))
        meteor_curve.append(float(np.mean([r.meteor for r in sel])) if sel else float("nan"))
    gain_hist, gain_edges = np.histogram([r.gain for r in records],
                                         bins=bins, range=(-1.0, 1.0))
    curves = {"bin_edges": edges.tolist(), "out_score": out_curve,
              "meteor": meteor_curve, "counts": counts,
              "gain_hist": gain_hist.tolist(), "gain_edges": gain_edges.tolist()}
    return records, curves


def write_privacy_csv(path, records: list[PrivacyGainRecord]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["doc_id", "sent_idx", "in_score", "out_score", "gain", "meteor"])
        for r in records:
            w.writerow([r.doc_id, r.sent_idx, f"{r.in_score:.6f}",
                        f"{r.out_score:.6f}", f"{r.gain:.6f}", f"{r.meteor:.6f}"])


def write_curves_csv(path, curves: dict):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_lo", "bin_hi", "count", "mean_out_score", "mean_meteor"])
        edges = curves["bin_edges"]
        for b in range(len(curves["counts"])):
            w.writerow([f"{edges[b]:.3f}", f"{edges[b + 1]:.3f}",
                        curves["counts"][b],
                        f"{curves['out_score'][b]:.6f}",
                        f"{curves['meteor'][b]:.6f}"])


def write_metrics_csv(path, rows: list[dict]):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["model", "policy", "sentence_f1",
                                           "doc_f1", "meteor"])
        w.writeheader()
        for row in rows:
            w.writerow(row)


# ---------------------------------------------------------------------------
# holdout ensemble

def build_holdout_ensemble(vocab: Vocabulary, class_names: Sequence[str],
                           d_emb: int = 32, seed: int = 1000) -> list[ClassifierModel]:
    """6 unseen classifiers: hidden sizes {32, 64, 128} x {final-only, concat}
    pooling."""
    ensemble = []
    i = 0
    for d_h in (32, 64, 128):
        for pooling in ("concat", "final"):
            ensemble.append(ClassifierModel(vocab, class_names, d_emb=d_emb,
                                            d_h=d_h, seed=seed + i, pooling=pooling))
            i += 1
    return ensemble


def holdout_evaluation(translator, corpus: Corpus,
                       ensemble: Sequence[ClassifierModel],
                       seed: int = 0, max_len: int = 20) -> dict:
    """Mean and max document F1 of the ensemble on original and transferred
    text."""
    transferred = transfer_corpus(translator, corpus, seed=seed, max_len=max_len)
    original_f1, transferred_f1 = [], []
    for clf in ensemble:
        original_f1.append(corpus_metrics(clf, corpus).document_f1)
        transferred_f1.append(corpus_metrics(clf, transferred).document_f1)
    return {
        "original_f1": original_f1,
        "transferred_f1": transferred_f1,
        "original_mean": float(np.mean(original_f1)),
        "original_max": float(np.max(original_f1)),
        "transferred_mean": float(np.mean(transferred_f1)),
        "transferred_max": float(np.max(transferred_f1)),
    }
