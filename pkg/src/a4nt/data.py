"""Vocabulary, tokenization, corpus ingestion and batching.

Corpus files are JSONL: one object per line with fields
``{"doc_id": str, "attribute": str, "sentences": [str, ...]}``.
Entity placeholders (PERSON, MISC, ORG, LOC) are expected pre-substituted;
the NUM rule is applied here.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

import numpy as np

PAD = "<pad>"
START = "<s>"
END = "</s>"
UNK = "<unk>"
NUM = "NUM"
ENTITY_TOKENS = ("PERSON", "MISC", "ORG", "LOC")
RESERVED = (PAD, START, END, UNK, NUM) + ENTITY_TOKENS

_TOKEN_RE = re.compile(r"[\w']+|[^\w\s]")
_NUMBER_RE = re.compile(r"^\d+([.,]\d+)*$")


class Vocabulary:
    """Bijective token/id map with fixed reserved ids.

    Reserved ids: PAD=0, START=1, END=2, UNK=3, NUM=4, then the four
    entity placeholders.
    """

    def __init__(self, tokens: Iterable[str] = ()):
        self.id_to_token: list[str] = list(RESERVED)
        self.token_to_id: dict[str, int] = {t: i for i, t in enumerate(self.id_to_token)}
        for t in tokens:
            self.add(t)

    def add(self, token: str) -> int:
        if token not in self.token_to_id:
            self.token_to_id[token] = len(self.id_to_token)
            self.id_to_token.append(token)
        return self.token_to_id[token]

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    @property
    def pad_id(self) -> int:
        return self.token_to_id[PAD]

    @property
    def start_id(self) -> int:
        return self.token_to_id[START]

    @property
    def end_id(self) -> int:
        return self.token_to_id[END]

    @property
    def unk_id(self) -> int:
        return self.token_to_id[UNK]

    @property
    def num_id(self) -> int:
        return self.token_to_id[NUM]

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, self.unk_id)

    def to_json(self) -> dict:
        return {"id_to_token": self.id_to_token}

    @classmethod
    def from_json(cls, obj: dict) -> "Vocabulary":
        vocab = cls()
        toks = obj["id_to_token"]
        if toks[: len(RESERVED)] != list(RESERVED):
            raise ValueError("vocabulary json: reserved tokens are wrong")
        for t in toks[len(RESERVED):]:
            vocab.add(t)
        return vocab


@dataclass
class AttributeLabel:
    task: str
    value: str


@dataclass
class Sentence:
    """END-terminated id sequence; n excludes the END token."""

    ids: list[int]

    @property
    def n(self) -> int:
        return len(self.ids) - 1

    def __post_init__(self):
        if len(self.ids) < 2:
            raise ValueError("sentence must contain at least one token before END")


@dataclass
class Document:
    doc_id: str
    attribute: AttributeLabel
    sentences: list[Sentence]

    def __post_init__(self):
        if not self.sentences:
            raise ValueError(f"document {self.doc_id}: no sentences")


@dataclass
class Corpus:
    task: str
    class_names: tuple[str, str]
    documents: list[Document] = field(default_factory=list)

    def sentences_of(self, class_name: str) -> list[Sentence]:
        return [s for d in self.documents if d.attribute.value == class_name
                for s in d.sentences]

    def all_sentences(self) -> list[Sentence]:
        return [s for d in self.documents for s in d.sentences]


def tokenize(text: str) -> list[str]:
    """Whitespace plus punctuation splitting; entity placeholders survive
    lowercasing, numbers collapse to NUM."""
    out = []
    for raw in _TOKEN_RE.findall(text):
        if raw in ENTITY_TOKENS:
            out.append(raw)
        elif _NUMBER_RE.match(raw):
            out.append(NUM)
        else:
            out.append(raw.lower())
    return out


def encode_sentence(text: str, vocab: Vocabulary) -> Sentence:
    tokens = tokenize(text)
    if not tokens:
        raise ValueError("encode_sentence: empty text")
    ids = [vocab.id_of(t) for t in tokens]
    ids.append(vocab.end_id)
    return Sentence(ids)


def decode_sentence(sentence: Sentence, vocab: Vocabulary) -> str:
    toks = []
    for i in sentence.ids:
        if i == vocab.end_id:
            break
        toks.append(vocab.id_to_token[i])
    return " ".join(toks)


def build_vocabulary(texts: Iterable[str], min_frequency: int = 2) -> Vocabulary:
    """Tokens seen at least min_frequency times get ids; the rest map to UNK."""
    counts: Counter = Counter()
    n_texts = 0
    for text in texts:
        n_texts += 1
        counts.update(tokenize(text))
    if n_texts == 0:
        raise ValueError("build_vocabulary: empty corpus")
    vocab = Vocabulary()
    for token, c in sorted(counts.items()):
        if c >= min_frequency and token not in vocab:
            vocab.add(token)
    return vocab


# ---------------------------------------------------------------------------
# JSONL ingestion

def read_jsonl_corpus(path, task: str, class_names: tuple[str, str],
                      vocab: Vocabulary, max_len: int = 20) -> Corpus:
    corpus = Corpus(task=task, class_names=class_names)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}:{lineno}: bad json ({e})")
            for key in ("doc_id", "attribute", "sentences"):
                if key not in obj:
                    raise ValueError(f"{path}:{lineno}: missing field {key!r}")
            if obj["attribute"] not in class_names:
                raise ValueError(
                    f"{path}:{lineno}: attribute {obj['attribute']!r} not in {class_names}")
            sentences = []
            for text in obj["sentences"]:
                sent = encode_sentence(text, vocab)
                if sent.n > max_len:
                    sent = Sentence(sent.ids[:max_len] + [vocab.end_id])
                sentences.append(sent)
            corpus.documents.append(Document(
                doc_id=str(obj["doc_id"]),
                attribute=AttributeLabel(task=task, value=obj["attribute"]),
                sentences=sentences))
    if not corpus.documents:
        raise ValueError(f"{path}: empty corpus")
    return corpus


def write_jsonl_corpus(path, docs: list[dict]):
    with open(path, "w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(json.dumps(d) + "\n")


# ---------------------------------------------------------------------------
# synthetic two-style corpus

CLASS_A_MARKERS = ("yeh", "lol", "wad", "gonna")
CLASS_B_MARKERS = ("indeed", "alas", "however", "certainly")

_TEMPLATES = [
    "i went to the park today",
    "the weather was really nice",
    "my friend came over for dinner",
    "i spent the whole day reading",
    "we watched a movie last night",
    "the music at the show was loud",
    "i am planning a trip next week",
    "the food at that place was great",
    "my day at work was very long",
    "i finally finished the big project",
    "the garden looks lovely this spring",
    "we talked about old times for hours",
    "the train was late again this morning",
    "i tried a new recipe for lunch",
    "the game last night went so well",
    "i need to clean the house soon",
]


def generate_synthetic_corpus(seed: int, num_docs_per_class: int,
                              sentences_per_doc: int,
                              task: str = "age",
                              class_names: tuple[str, str] = ("teen", "adult")) -> list[dict]:
    """Two-style corpus: shared content templates plus class-exclusive
    marker tokens.  Markers appear in at least 80% of each class's
    sentences and never in the other class.  Returns raw JSONL-style dicts.
    """
    if num_docs_per_class <= 0 or sentences_per_doc <= 0:
        raise ValueError("counts must be positive")
    rng = np.random.default_rng(seed)
    markers = {class_names[0]: CLASS_A_MARKERS, class_names[1]: CLASS_B_MARKERS}
    docs = []
    for cls in class_names:
        for d in range(num_docs_per_class):
            n_marked = max(1, int(round(0.9 * sentences_per_doc)))
            marked = set(rng.choice(sentences_per_doc, size=n_marked, replace=False).tolist())
            sentences = []
            for s in range(sentences_per_doc):
                text = _TEMPLATES[rng.integers(len(_TEMPLATES))]
                if s in marked:
                    marker = markers[cls][rng.integers(len(markers[cls]))]
                    if rng.random() < 0.5:
                        text = f"{marker} {text}"
                    else:
                        text = f"{text} {marker}"
                sentences.append(text)
            docs.append({"doc_id": f"{cls}-{d:04d}", "attribute": cls,
                         "sentences": sentences})
    return docs


def corpus_from_dicts(docs: list[dict], task: str, class_names: tuple[str, str],
                      vocab: Vocabulary, max_len: int = 20) -> Corpus:
    corpus = Corpus(task=task, class_names=class_names)
    for obj in docs:
        sentences = []
        for text in obj["sentences"]:
            sent = encode_sentence(text, vocab)
            if sent.n > max_len:
                sent = Sentence(sent.ids[:max_len] + [vocab.end_id])
            sentences.append(sent)
        corpus.documents.append(Document(
            doc_id=str(obj["doc_id"]),
            attribute=AttributeLabel(task=task, value=obj["attribute"]),
            sentences=sentences))
    return corpus


def split_docs(docs: list[dict], seed: int, val_fraction: float = 0.2,
               test_fraction: float = 0.0):
    """Seeded shuffle split at document level, stratified by attribute."""
    rng = np.random.default_rng(seed)
    by_class: dict[str, list[dict]] = {}
    for d in docs:
        by_class.setdefault(d["attribute"], []).append(d)
    train, val, test = [], [], []
    for cls in sorted(by_class):
        group = list(by_class[cls])
        rng.shuffle(group)
        n = len(group)
        n_test = int(round(test_fraction * n))
        n_val = int(round(val_fraction * n))
        test.extend(group[:n_test])
        val.extend(group[n_test:n_test + n_val])
        train.extend(group[n_test + n_val:])
    return train, val, test


# ---------------------------------------------------------------------------
# batching

@dataclass
class Batch:
    ids: np.ndarray        # (B, T) int64, PAD-filled past each length
    lengths: np.ndarray    # (B,) includes the END token
    labels: np.ndarray     # (B,) class index
    doc_ids: list[str]


def batch_iterator(corpus: Corpus, batch_size: int, max_len: int,
                   seed: int, class_filter: Optional[str] = None) -> Iterator[Batch]:
    """Seeded permutation of sentences, padded into fixed-width batches."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    class_index = {c: i for i, c in enumerate(corpus.class_names)}
    items = []
    for doc in corpus.documents:
        if class_filter is not None and doc.attribute.value != class_filter:
            continue
        for sent in doc.sentences:
            items.append((sent, class_index[doc.attribute.value], doc.doc_id))
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(items))
    for start in range(0, len(items), batch_size):
        chunk = [items[i] for i in order[start:start + batch_size]]
        yield pack_batch(chunk, max_len)


def pack_batch(items: list[tuple[Sentence, int, str]], max_len: int) -> Batch:
    trimmed = []
    for sent, label, doc_id in items:
        ids = sent.ids
        if len(ids) > max_len + 1:          # truncate before END
            ids = ids[:max_len] + [ids[-1]]
        trimmed.append((ids, label, doc_id))
    width = max(len(ids) for ids, _, _ in trimmed)
    batch_ids = np.zeros((len(trimmed), width), dtype=np.int64)
    lengths = np.zeros(len(trimmed), dtype=np.int64)
    labels = np.zeros(len(trimmed), dtype=np.int64)
    doc_ids = []
    for i, (ids, label, doc_id) in enumerate(trimmed):
        batch_ids[i, :len(ids)] = ids
        lengths[i] = len(ids)
        labels[i] = label
        doc_ids.append(doc_id)
    return Batch(ids=batch_ids, lengths=lengths, labels=labels, doc_ids=doc_ids)
