"""Command-line entry points for every pipeline stage.

Each subcommand reads one flat JSON config file (all keys optional, see
DEFAULTS) plus flag overrides.  Artifacts live under --home, which defaults
to $A4NT_HOME or ./a4nt_home.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import checkpoint, evaluation, training
from .classifier import ClassifierModel
from .data import (build_vocabulary, decode_sentence, encode_sentence,
                   generate_synthetic_corpus, read_jsonl_corpus, split_docs,
                   write_jsonl_corpus)
from .losses import LanguageModel, LossWeights, SemanticEmbedder
from .translator import TranslatorModel

DEFAULTS = {
    "seed": 0,
    "task": "age",
    "class_a": "teen",
    "class_b": "adult",
    "docs_per_class": 200,
    "sentences_per_doc": 4,
    "val_fraction": 0.2,
    "min_frequency": 1,
    "max_len": 14,
    "d_emb": 24,
    "d_h": 48,
    "batch_size": 32,
    "max_epochs": 10,
    "ae_epochs": 250,
    "ae_min_epochs": 40,
    "gan_iterations": 600,
    "validate_every": 100,
    "val_docs": 40,
    "temperature": 0.5,
    "w_sty": 1.0,
    "w_sem": 3.0,
    "w_l": 0.6,
    "auto_weights": False,
    "k": 5,
    "host": "127.0.0.1",
    "port": 8000,
}


class CliError(Exception):
    pass


def load_config(path) -> dict:
    cfg = dict(DEFAULTS)
    if path is not None:
        if not os.path.exists(path):
            raise CliError(f"config file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            try:
                user = json.load(fh)
            except json.JSONDecodeError as e:
                raise CliError(f"config file {path}: bad json ({e})")
        if not isinstance(user, dict):
            raise CliError(f"config file {path}: expected a flat json object")
        unknown = sorted(set(user) - set(DEFAULTS))
        if unknown:
            raise CliError(f"config file {path}: unknown keys {unknown}")
        cfg.update(user)
    return cfg


def _apply_overrides(cfg: dict, args: argparse.Namespace):
    for key in DEFAULTS:
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            cfg[key] = value
    return cfg


def _home(args) -> str:
    home = args.home or os.environ.get("A4NT_HOME") or "a4nt_home"
    os.makedirs(home, exist_ok=True)
    return home


def _classes(cfg) -> tuple[str, str]:
    return (cfg["class_a"], cfg["class_b"])


def _training_config(cfg, weights=None) -> training.TrainingConfig:
    return training.TrainingConfig(
        batch_size=cfg["batch_size"], max_epochs=cfg["max_epochs"],
        ae_epochs=cfg["ae_epochs"], ae_min_epochs=cfg["ae_min_epochs"],
        temperature=cfg["temperature"], weights=weights, seed=cfg["seed"],
        max_len=cfg["max_len"], d_emb=cfg["d_emb"], d_h=cfg["d_h"],
        gan_iterations=cfg["gan_iterations"],
        validate_every=cfg["validate_every"], val_docs=cfg["val_docs"])


def _load_splits(home, cfg):
    vocab_path = os.path.join(home, "vocab.json")
    if not os.path.exists(vocab_path):
        raise CliError(f"vocabulary not found: {vocab_path} (run gen-corpus first)")
    from .data import Vocabulary
    with open(vocab_path, encoding="utf-8") as fh:
        vocab = Vocabulary.from_json(json.load(fh))
    classes = _classes(cfg)
    train = read_jsonl_corpus(os.path.join(home, "train.jsonl"), cfg["task"],
                              classes, vocab, max_len=cfg["max_len"])
    val = read_jsonl_corpus(os.path.join(home, "val.jsonl"), cfg["task"],
                            classes, vocab, max_len=cfg["max_len"])
    return vocab, train, val


# ---------------------------------------------------------------------------
# subcommands

def cmd_gen_corpus(args):
    cfg = _apply_overrides(load_config(args.config), args)
    home = _home(args)
    docs = generate_synthetic_corpus(cfg["seed"], cfg["docs_per_class"],
                                     cfg["sentences_per_doc"], task=cfg["task"],
                                     class_names=_classes(cfg))
    train, val, _ = split_docs(docs, seed=cfg["seed"] + 1,
                               val_fraction=cfg["val_fraction"])
    write_jsonl_corpus(os.path.join(home, "train.jsonl"), train)
    write_jsonl_corpus(os.path.join(home, "val.jsonl"), val)
    texts = [t for d in train for t in d["sentences"]]
    vocab = build_vocabulary(texts, min_frequency=cfg["min_frequency"])
    with open(os.path.join(home, "vocab.json"), "w", encoding="utf-8") as fh:
        json.dump(vocab.to_json(), fh)
    print(f"wrote {len(train)} train docs, {len(val)} val docs, "
          f"vocabulary size {len(vocab)} to {home}")
    return 0


def cmd_train_classifier(args):
    cfg = _apply_overrides(load_config(args.config), args)
    home = _home(args)
    vocab, train, val = _load_splits(home, cfg)
    model = ClassifierModel(vocab, _classes(cfg), d_emb=cfg["d_emb"],
                            d_h=cfg["d_h"], seed=cfg["seed"] + 7)
    training.pretrain_classifier(model, train, val, _training_config(cfg))
    f1 = evaluation.corpus_metrics(model, val).document_f1
    path = os.path.join(home, "classifier.ckpt")
    checkpoint.save_checkpoint(model, path)
    print(f"classifier val doc f1 {f1:.3f} saved to {path}")
    return 0


def cmd_train_lm(args):
    cfg = _apply_overrides(load_config(args.config), args)
    home = _home(args)
    vocab, train, _ = _load_splits(home, cfg)
    for i, cls in enumerate(_classes(cfg)):
        lm = LanguageModel(vocab, cls, d_emb=cfg["d_emb"], d_h=cfg["d_h"],
                           seed=cfg["seed"] + 100 + i)
        training.pretrain_language_model(lm, train, _training_config(cfg))
        path = os.path.join(home, f"lm_{cls}.ckpt")
        checkpoint.save_checkpoint(lm, path)
        print(f"language model for {cls} saved to {path}")
    return 0


def cmd_train_embedder(args):
    cfg = _apply_overrides(load_config(args.config), args)
    home = _home(args)
    vocab, train, _ = _load_splits(home, cfg)
    emb = SemanticEmbedder(vocab, d_emb=cfg["d_emb"], d_h=cfg["d_h"],
                           seed=cfg["seed"] + 200)
    training.pretrain_embedder(emb, train, _training_config(cfg))
    path = os.path.join(home, "embedder.ckpt")
    checkpoint.save_checkpoint(emb, path)
    print(f"semantic embedder saved to {path}")
    return 0


def cmd_pretrain_ae(args):
    cfg = _apply_overrides(load_config(args.config), args)
    home = _home(args)
    vocab, train, _ = _load_splits(home, cfg)
    model = TranslatorModel(vocab, _classes(cfg), d_emb=cfg["d_emb"],
                            d_h=cfg["d_h"], seed=cfg["seed"] + 300)
    training.pretrain_autoencoder(model, train, _training_config(cfg))
    acc = training.token_reconstruction_accuracy(model, train, cfg["max_len"])
    path = os.path.join(home, "translator.ckpt")
    checkpoint.save_checkpoint(model, path)
    print(f"autoencoder token reconstruction {acc:.3f} saved to {path}")
    return 0


def cmd_train_a4nt(args):
    cfg = _apply_overrides(load_config(args.config), args)
    home = _home(args)
    vocab, train, val = _load_splits(home, cfg)
    classes = _classes(cfg)
    translator = checkpoint.load_checkpoint(
        os.path.join(home, "translator.ckpt"), expected_kind="translator")
    eval_clf = checkpoint.load_checkpoint(
        os.path.join(home, "classifier.ckpt"), expected_kind="classifier")
    lms = {}
    for cls in classes:
        path = os.path.join(home, f"lm_{cls}.ckpt")
        lms[cls] = checkpoint.load_checkpoint(path, expected_kind="lm") \
            if os.path.exists(path) else None
    if any(v is None for v in lms.values()):
        lms = None
    emb_path = os.path.join(home, "embedder.ckpt")
    embedder = checkpoint.load_checkpoint(emb_path, expected_kind="embedder") \
        if os.path.exists(emb_path) else None
    weights = None if cfg["auto_weights"] else LossWeights(
        cfg["w_sty"], cfg["w_sem"], cfg["w_l"])
    tcfg = _training_config(cfg, weights=weights)
    discs = {c: ClassifierModel(vocab, classes, d_emb=cfg["d_emb"],
                                d_h=cfg["d_h"], seed=cfg["seed"] + 400 + i)
             for i, c in enumerate(classes)}
    trace = training.train_gan(translator, discs, lms, embedder, train, val,
                               eval_clf, tcfg)
    out = os.path.join(home, "translator.ckpt")
    checkpoint.save_checkpoint(translator, out)
    trace.to_csv(os.path.join(home, "trace.csv"))
    last = [r for r in trace.rows if r.val_f1 is not None]
    if last:
        print(f"final val doc f1 {last[-1].val_f1:.3f} "
              f"meteor {last[-1].val_meteor:.3f}")
    print(f"translator saved to {out}")
    return 0


def cmd_obfuscate(args):
    cfg = _apply_overrides(load_config(args.config), args)
    translator = checkpoint.load_checkpoint(args.model, expected_kind="translator")
    clf = checkpoint.load_checkpoint(args.classifier, expected_kind="classifier") \
        if args.classifier else None
    vocab = translator.vocab
    target = args.target
    if target not in translator.class_names:
        raise CliError(f"unknown target class {target!r}")
    source = evaluation._other(translator.class_names, target)
    if not os.path.exists(args.infile):
        raise CliError(f"input file not found: {args.infile}")
    out_fh = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        with open(args.infile, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh):
                text = line.strip()
                if not text:
                    continue
                sent = encode_sentence(text, vocab)
                candidates = []
                for j in range(cfg["k"]):
                    out = translator.translate(
                        sent, (source, target), mode="hard",
                        max_len=cfg["max_len"],
                        seed=cfg["seed"] * 131 + lineno * 37 + j)
                    cand = {"text": decode_sentence(out, vocab),
                            "meteor": evaluation.meteor_proxy(out, sent, vocab),
                            "sample_index": j}
                    if clf is not None:
                        src_idx = clf.class_index(source)
                        cand["source_score_before"] = float(
                            clf.classify_sentence(sent)[src_idx])
                        cand["source_score_after"] = float(
                            clf.classify_sentence(out)[src_idx])
                    candidates.append(cand)
                candidates.sort(key=lambda c: (-c["meteor"], c["sample_index"]))
                out_fh.write(json.dumps({"input": text, "target": target,
                                         "candidates": candidates}) + "\n")
    finally:
        if out_fh is not sys.stdout:
            out_fh.close()
    return 0


def cmd_evaluate(args):
    cfg = _apply_overrides(load_config(args.config), args)
    home = _home(args)
    vocab, train, val = _load_splits(home, cfg)
    clf = checkpoint.load_checkpoint(os.path.join(home, "classifier.ckpt"),
                                     expected_kind="classifier")
    if args.identity:
        translator = evaluation.IdentityTranslator()
        model_name = "identity"
    else:
        translator = checkpoint.load_checkpoint(
            os.path.join(home, "translator.ckpt"), expected_kind="translator")
        model_name = "a4nt"
    original = evaluation.corpus_metrics(clf, val, reference=val, vocab=vocab)
    transferred = evaluation.evaluate_transfer(translator, clf, val,
                                               seed=cfg["seed"],
                                               max_len=cfg["max_len"], vocab=vocab)
    rows = [{"model": "original", "policy": "-",
             "sentence_f1": f"{original.sentence_f1:.4f}",
             "doc_f1": f"{original.document_f1:.4f}",
             "meteor": f"{original.meteor:.4f}"},
            {"model": model_name, "policy": "single",
             "sentence_f1": f"{transferred.sentence_f1:.4f}",
             "doc_f1": f"{transferred.document_f1:.4f}",
             "meteor": f"{transferred.meteor:.4f}"}]
    points = evaluation.operating_points(translator, clf, val, k=cfg["k"],
                                         seed=cfg["seed"],
                                         max_len=cfg["max_len"], vocab=vocab)
    for p in points:
        rows.append({"model": model_name, "policy": p.policy,
                     "sentence_f1": "-", "doc_f1": f"{p.f1:.4f}",
                     "meteor": f"{p.meteor:.4f}"})
    records, curves = evaluation.privacy_analysis(translator, clf, val,
                                                  seed=cfg["seed"],
                                                  max_len=cfg["max_len"],
                                                  vocab=vocab)
    evaluation.write_metrics_csv(os.path.join(home, "metrics.csv"), rows)
    evaluation.write_privacy_csv(os.path.join(home, "privacy.csv"), records)
    evaluation.write_curves_csv(os.path.join(home, "curves.csv"), curves)
    gains = [r.gain for r in records]
    print(f"original doc f1 {original.document_f1:.3f}; transferred doc f1 "
          f"{transferred.document_f1:.3f} meteor {transferred.meteor:.3f}; "
          f"median privacy gain {float(np.median(gains)):.3f}")
    print(f"csv written to {home}")
    return 0


def cmd_holdout_eval(args):
    cfg = _apply_overrides(load_config(args.config), args)
    home = _home(args)
    vocab, train, val = _load_splits(home, cfg)
    translator = checkpoint.load_checkpoint(
        os.path.join(home, "translator.ckpt"), expected_kind="translator")
    ensemble = evaluation.build_holdout_ensemble(vocab, _classes(cfg),
                                                 d_emb=cfg["d_emb"],
                                                 seed=cfg["seed"] + 1000)
    tcfg = _training_config(cfg)
    for clf in ensemble:
        training.pretrain_classifier(clf, train, val, tcfg)
    result = evaluation.holdout_evaluation(translator, val, ensemble,
                                           seed=cfg["seed"],
                                           max_len=cfg["max_len"])
    import csv
    with open(os.path.join(home, "holdout.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["classifier", "original_f1", "transferred_f1"])
        for i, (o, t) in enumerate(zip(result["original_f1"],
                                       result["transferred_f1"])):
            w.writerow([i, f"{o:.4f}", f"{t:.4f}"])
        w.writerow(["mean", f"{result['original_mean']:.4f}",
                    f"{result['transferred_mean']:.4f}"])
    print(f"holdout mean doc f1: original {result['original_mean']:.3f} "
          f"transferred {result['transferred_mean']:.3f} "
          f"drop {result['original_mean'] - result['transferred_mean']:.3f}")
    return 0


def cmd_charts(args):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import csv as _csv
    home = _home(args)
    made = []
    privacy_path = os.path.join(home, "privacy.csv")
    if os.path.exists(privacy_path):
        with open(privacy_path) as fh:
            rows = list(_csv.DictReader(fh))
        gains = [float(r["gain"]) for r in rows]
        fig, ax = plt.subplots()
        ax.hist(gains, bins=20, range=(-1, 1))
        ax.set_xlabel("privacy gain")
        ax.set_ylabel("sentences")
        out = os.path.join(home, "privacy_gain.png")
        fig.savefig(out)
        plt.close(fig)
        made.append(out)
    curves_path = os.path.join(home, "curves.csv")
    if os.path.exists(curves_path):
        with open(curves_path) as fh:
            rows = list(_csv.DictReader(fh))
        mids = [(float(r["bin_lo"]) + float(r["bin_hi"])) / 2 for r in rows]
        outs = [float(r["mean_out_score"]) for r in rows]
        mets = [float(r["mean_meteor"]) for r in rows]
        fig, ax = plt.subplots()
        ax.plot(mids, outs, marker="o", label="source score after")
        ax.plot(mids, mets, marker="s", label="meteor")
        ax.set_xlabel("input source-class probability bin")
        ax.legend()
        out = os.path.join(home, "curves.png")
        fig.savefig(out)
        plt.close(fig)
        made.append(out)
    if not made:
        raise CliError(f"no evaluation csv files found in {home}")
    print("charts: " + ", ".join(made))
    return 0


def cmd_serve(args):
    import uvicorn
    from .service import create_app
    cfg = _apply_overrides(load_config(args.config), args)
    home = _home(args)
    clf = checkpoint.load_checkpoint(os.path.join(home, "classifier.ckpt"),
                                     expected_kind="classifier")
    translator = checkpoint.load_checkpoint(
        os.path.join(home, "translator.ckpt"), expected_kind="translator")
    static_dir = args.static if args.static and os.path.isdir(args.static) else None
    app = create_app(clf, translator, cfg["task"], max_len=cfg["max_len"],
                     static_dir=static_dir)
    uvicorn.run(app, host=cfg["host"], port=int(cfg["port"]))
    return 0


# ---------------------------------------------------------------------------
# dispatch

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="a4nt",
                                     description="attribute obfuscation pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat json config file")
        p.add_argument("--home", help="artifact directory (default $A4NT_HOME)")
        p.add_argument("--seed", type=int)
        p.add_argument("--max-len", type=int, dest="max_len")
        return p

    p = common(sub.add_parser("gen-corpus", help="write synthetic train/val splits"))
    p.add_argument("--docs-per-class", type=int, dest="docs_per_class")
    p.add_argument("--sentences-per-doc", type=int, dest="sentences_per_doc")
    p.set_defaults(func=cmd_gen_corpus)

    p = common(sub.add_parser("train-classifier", help="train the frozen evaluation classifier"))
    p.add_argument("--max-epochs", type=int, dest="max_epochs")
    p.set_defaults(func=cmd_train_classifier)

    p = common(sub.add_parser("train-lm", help="train per-class language models"))
    p.add_argument("--max-epochs", type=int, dest="max_epochs")
    p.set_defaults(func=cmd_train_lm)

    p = common(sub.add_parser("train-embedder", help="train the semantic embedder"))
    p.add_argument("--max-epochs", type=int, dest="max_epochs")
    p.set_defaults(func=cmd_train_embedder)

    p = common(sub.add_parser("pretrain-ae", help="autoencoder pretraining of the translator"))
    p.add_argument("--ae-epochs", type=int, dest="ae_epochs")
    p.set_defaults(func=cmd_pretrain_ae)

    p = common(sub.add_parser("train-a4nt", help="adversarial training of the translator"))
    p.add_argument("--gan-iterations", type=int, dest="gan_iterations")
    p.add_argument("--w-sty", type=float, dest="w_sty")
    p.add_argument("--w-sem", type=float, dest="w_sem")
    p.add_argument("--w-l", type=float, dest="w_l")
    p.add_argument("--auto-weights", action="store_const", const=True,
                   default=None, dest="auto_weights")
    p.set_defaults(func=cmd_train_a4nt)

    p = common(sub.add_parser("obfuscate", help="rewrite text lines toward a target class"))
    p.add_argument("--model", required=True, help="translator checkpoint")
    p.add_argument("--classifier", help="optional classifier checkpoint for scores")
    p.add_argument("--in", required=True, dest="infile", help="text file, one sentence per line")
    p.add_argument("--target", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--out", help="output jsonl (default stdout)")
    p.set_defaults(func=cmd_obfuscate)

    p = common(sub.add_parser("evaluate", help="transfer metrics, privacy records, curves"))
    p.add_argument("--identity", action="store_true",
                   help="evaluate the identity translator baseline")
    p.add_argument("--k", type=int)
    p.set_defaults(func=cmd_evaluate)

    p = common(sub.add_parser("holdout-eval", help="unseen-classifier ensemble evaluation"))
    p.set_defaults(func=cmd_holdout_eval)

    p = common(sub.add_parser("charts", help="render evaluation csv files to png"))
    p.set_defaults(func=cmd_charts)

    p = common(sub.add_parser("serve", help="run the http service"))
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--static", help="directory of studio assets to serve at /")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (checkpoint.CheckpointError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
