"""Tokenization, vocabulary, corpus files, batching and the synthetic
two-style corpus."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from a4nt.data import (CLASS_A_MARKERS, CLASS_B_MARKERS, Corpus, Sentence,
                       Vocabulary, batch_iterator, build_vocabulary,
                       corpus_from_dicts, decode_sentence, encode_sentence,
                       generate_synthetic_corpus, pack_batch,
                       read_jsonl_corpus, split_docs, tokenize,
                       write_jsonl_corpus)


# ---------------------------------------------------------------------------
# tokenization and vocabulary

def test_tokenize_lowercases_and_splits_punctuation():
    assert tokenize("Hello, World!") == ["hello", ",", "world", "!"]


def test_tokenize_number_rule():
    assert tokenize("over 9000 points") == ["over", "NUM", "points"]
    assert tokenize("I have 3 cats") == ["i", "have", "NUM", "cats"]
    assert tokenize("route66") == ["route66"]  # not a pure number


def test_tokenize_preserves_entity_placeholders():
    assert tokenize("PERSON went to LOC") == ["PERSON", "went", "to", "LOC"]


def test_vocabulary_reserved_ids():
    v = Vocabulary()
    assert v.pad_id == 0 and v.start_id == 1 and v.end_id == 2
    assert v.unk_id == 3 and v.num_id == 4
    assert v.id_of("PERSON") == 5 and v.id_of("LOC") == 8


def test_vocabulary_bijective_over_added_tokens():
    v = Vocabulary(["a", "b", "a"])
    ids = [v.id_of(t) for t in ("a", "b")]
    assert len(set(ids)) == 2
    assert [v.id_to_token[i] for i in ids] == ["a", "b"]


def test_vocabulary_json_round_trip():
    v = Vocabulary(["alpha", "beta"])
    w = Vocabulary.from_json(json.loads(json.dumps(v.to_json())))
    assert w.id_to_token == v.id_to_token


def test_vocabulary_json_rejects_bad_reserved():
    v = Vocabulary(["x"])
    obj = v.to_json()
    obj["id_to_token"][0] = "<oops>"
    with pytest.raises(ValueError):
        Vocabulary.from_json(obj)


def test_build_vocabulary_min_frequency():
    vocab = build_vocabulary(["a b", "a c"], min_frequency=2)
    assert "a" in vocab and "b" not in vocab
    assert vocab.id_of("b") == vocab.unk_id
    # min_freq 1 on {a, b} adds exactly two tokens past the reserved block
    v1 = build_vocabulary(["a b"], min_frequency=1)
    assert len(v1) == len(Vocabulary()) + 2


def test_build_vocabulary_rejects_empty():
    with pytest.raises(ValueError):
        build_vocabulary([], min_frequency=1)


def test_encode_decode_round_trip(tiny_vocab):
    sent = encode_sentence("the cat sat", tiny_vocab)
    assert sent.ids[-1] == tiny_vocab.end_id
    assert sent.n == 3
    assert decode_sentence(sent, tiny_vocab) == "the cat sat"


def test_encode_unknown_tokens_map_to_unk(tiny_vocab):
    sent = encode_sentence("the zebra", tiny_vocab)
    assert sent.ids[1] == tiny_vocab.unk_id


def test_encode_rejects_empty(tiny_vocab):
    with pytest.raises(ValueError):
        encode_sentence("   ", tiny_vocab)


def test_sentence_requires_end_terminator():
    with pytest.raises(ValueError):
        Sentence([2])


# ---------------------------------------------------------------------------
# jsonl corpus files

def test_jsonl_round_trip(tmp_path, tiny_vocab):
    docs = [{"doc_id": "d1", "attribute": "x", "sentences": ["the cat", "the dog"]},
            {"doc_id": "d2", "attribute": "y", "sentences": ["the mat"]}]
    path = tmp_path / "c.jsonl"
    write_jsonl_corpus(path, docs)
    corpus = read_jsonl_corpus(path, "task", ("x", "y"), tiny_vocab)
    assert [d.doc_id for d in corpus.documents] == ["d1", "d2"]
    assert corpus.documents[0].attribute.value == "x"
    assert len(corpus.documents[0].sentences) == 2


def test_jsonl_errors_carry_line_numbers(tmp_path, tiny_vocab):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"doc_id": "d", "attribute": "x", "sentences": ["a"]}\nnot json\n')
    with pytest.raises(ValueError, match=":2"):
        read_jsonl_corpus(path, "t", ("x", "y"), tiny_vocab)
    path.write_text('{"doc_id": "d", "attribute": "z", "sentences": ["a"]}\n')
    with pytest.raises(ValueError, match="attribute"):
        read_jsonl_corpus(path, "t", ("x", "y"), tiny_vocab)
    path.write_text('{"doc_id": "d", "sentences": ["a"]}\n')
    with pytest.raises(ValueError, match="attribute"):
        read_jsonl_corpus(path, "t", ("x", "y"), tiny_vocab)


def test_jsonl_truncates_to_max_len(tmp_path, tiny_vocab):
    path = tmp_path / "c.jsonl"
    write_jsonl_corpus(path, [{"doc_id": "d", "attribute": "x",
                               "sentences": ["the cat sat on the mat"]}])
    corpus = read_jsonl_corpus(path, "t", ("x", "y"), tiny_vocab, max_len=3)
    sent = corpus.documents[0].sentences[0]
    assert sent.n == 3 and sent.ids[-1] == tiny_vocab.end_id


# ---------------------------------------------------------------------------
# synthetic corpus

def test_synthetic_markers_are_class_exclusive():
    docs = generate_synthetic_corpus(0, 20, 5)
    a_tokens = set(t for d in docs if d["attribute"] == "teen"
                   for s in d["sentences"] for t in s.split())
    b_tokens = set(t for d in docs if d["attribute"] == "adult"
                   for s in d["sentences"] for t in s.split())
    assert not (set(CLASS_A_MARKERS) & b_tokens)
    assert not (set(CLASS_B_MARKERS) & a_tokens)
    assert set(CLASS_A_MARKERS) & a_tokens
    assert set(CLASS_B_MARKERS) & b_tokens


def test_synthetic_marker_rate_at_least_80_percent():
    docs = generate_synthetic_corpus(1, 30, 5)
    markers = set(CLASS_A_MARKERS) | set(CLASS_B_MARKERS)
    for d in docs:
        marked = sum(1 for s in d["sentences"] if set(s.split()) & markers)
        assert marked / len(d["sentences"]) >= 0.8


def test_synthetic_unigram_oracle_separates_classes():
    # a trivial marker-count rule must get >= 95% of documents right,
    # so the learned classifiers have headroom
    docs = generate_synthetic_corpus(2, 50, 4)
    correct = 0
    for d in docs:
        tokens = [t for s in d["sentences"] for t in s.split()]
        a = sum(t in CLASS_A_MARKERS for t in tokens)
        b = sum(t in CLASS_B_MARKERS for t in tokens)
        guess = "teen" if a >= b else "adult"
        correct += guess == d["attribute"]
    assert correct / len(docs) >= 0.95


def test_synthetic_deterministic_per_seed():
    assert generate_synthetic_corpus(3, 5, 3) == generate_synthetic_corpus(3, 5, 3)
    assert generate_synthetic_corpus(3, 5, 3) != generate_synthetic_corpus(4, 5, 3)


def test_synthetic_rejects_bad_counts():
    with pytest.raises(ValueError):
        generate_synthetic_corpus(0, 0, 3)


def test_split_docs_stratified_and_disjoint():
    docs = generate_synthetic_corpus(0, 20, 3)
    train, val, test = split_docs(docs, seed=0, val_fraction=0.25,
                                  test_fraction=0.25)
    ids = lambda group: {d["doc_id"] for d in group}
    assert not (ids(train) & ids(val)) and not (ids(val) & ids(test))
    assert ids(train) | ids(val) | ids(test) == ids(docs)
    for group in (train, val, test):
        per_class = {c: sum(d["attribute"] == c for d in group)
                     for c in ("teen", "adult")}
        assert per_class["teen"] == per_class["adult"]


# ---------------------------------------------------------------------------
# batching

def _small_corpus(tiny_vocab):
    docs = [{"doc_id": "a1", "attribute": "x", "sentences": ["the cat sat", "the dog"]},
            {"doc_id": "b1", "attribute": "y", "sentences": ["on the mat"]}]
    return corpus_from_dicts(docs, "t", ("x", "y"), tiny_vocab)


def test_pack_batch_shapes_and_padding(tiny_vocab):
    corpus = _small_corpus(tiny_vocab)
    items = [(s, i, d.doc_id) for i, d in enumerate(corpus.documents)
             for s in d.sentences]
    batch = pack_batch(items, max_len=10)
    assert batch.ids.shape[0] == 3
    assert batch.ids.dtype == np.int64
    for r in range(3):
        n = batch.lengths[r]
        assert batch.ids[r, n - 1] == tiny_vocab.end_id
        assert np.all(batch.ids[r, n:] == tiny_vocab.pad_id)


def test_batch_iterator_covers_corpus_once(tiny_vocab):
    corpus = _small_corpus(tiny_vocab)
    seen = 0
    for batch in batch_iterator(corpus, batch_size=2, max_len=10, seed=0):
        seen += batch.ids.shape[0]
    assert seen == 3


def test_batch_iterator_class_filter(tiny_vocab):
    corpus = _small_corpus(tiny_vocab)
    for batch in batch_iterator(corpus, 8, 10, seed=0, class_filter="x"):
        assert np.all(batch.labels == 0)
        assert batch.ids.shape[0] == 2


def test_batch_iterator_seeded_shuffle(tiny_vocab):
    corpus = corpus_from_dicts(generate_synthetic_corpus(0, 10, 3),
                               "age", ("teen", "adult"), tiny_vocab)
    first = [b.ids.tobytes() for b in batch_iterator(corpus, 4, 12, seed=5)]
    again = [b.ids.tobytes() for b in batch_iterator(corpus, 4, 12, seed=5)]
    other = [b.ids.tobytes() for b in batch_iterator(corpus, 4, 12, seed=6)]
    assert first == again
    assert first != other


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_synthetic_sentences_always_encode(seed):
    vocab = Vocabulary()
    docs = generate_synthetic_corpus(seed, 2, 2)
    for d in docs:
        for s in d["sentences"]:
            assert encode_sentence(s, vocab).n >= 1
