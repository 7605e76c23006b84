"""HTTP service exposing classification and obfuscation.

One process serves one task: a frozen attribute classifier plus a trained
translator.  Models are loaded once and never mutated; every request owns an
rng derived from its seed, so responses are deterministic per (request, seed).
"""

from __future__ import annotations

import hashlib
from typing import Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .classifier import ClassifierModel
from .data import Sentence, encode_sentence, tokenize
from .evaluation import meteor_proxy
from .translator import TranslatorModel

MAX_TOKENS = 200


class ClassifyRequest(BaseModel):
    text: str
    task: str


class ObfuscationRequest(BaseModel):
    text: str
    task: str
    target: str
    k: int = Field(default=5, ge=1, le=32)
    seed: Optional[int] = None


class ObfuscationCandidate(BaseModel):
    text: str
    source_score_before: float
    source_score_after: float
    privacy_score: float
    meteor: float
    sample_index: int


class ObfuscationResponse(BaseModel):
    input_score: float
    candidates: list[ObfuscationCandidate]


def _default_seed(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:4], "little")


def create_app(classifier: ClassifierModel, translator: TranslatorModel,
               task: str, max_len: int = 20,
               static_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="a4nt")
    vocab = classifier.vocab
    class_names = classifier.class_names

    @app.exception_handler(RequestValidationError)
    async def bad_body(request: Request, exc: RequestValidationError):
        # name the offending fields, 400 rather than the framework's 422
        fields = sorted({str(e["loc"][-1]) for e in exc.errors()})
        return JSONResponse(status_code=400,
                            content={"detail": f"invalid fields: {fields}"})

    def parse_text(text: str) -> Sentence:
        if not text or not tokenize(text):
            raise HTTPException(status_code=400, detail="field 'text' is empty")
        if len(tokenize(text)) > MAX_TOKENS:
            raise HTTPException(status_code=413,
                                detail=f"text exceeds {MAX_TOKENS} tokens")
        sent = encode_sentence(text, vocab)
        if sent.n > max_len:
            sent = Sentence(sent.ids[:max_len] + [vocab.end_id])
        return sent

    def check_task(value: str):
        if value != task:
            raise HTTPException(status_code=404, detail=f"unknown task {value!r}")

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    @app.get("/api/attributes")
    def attributes():
        return {"tasks": [{"task": task, "classes": list(class_names)}]}

    @app.post("/api/classify")
    def classify(req: ClassifyRequest):
        check_task(req.task)
        sent = parse_text(req.text)
        probs = classifier.classify_sentence(sent)
        return {"task": task,
                "probabilities": {c: float(p) for c, p in zip(class_names, probs)}}

    @app.post("/api/obfuscate", response_model=ObfuscationResponse)
    def obfuscate(req: ObfuscationRequest):
        check_task(req.task)
        if req.target not in class_names:
            raise HTTPException(status_code=404,
                                detail=f"unknown class {req.target!r}")
        sent = parse_text(req.text)
        source = class_names[0] if req.target == class_names[1] else class_names[1]
        src_idx = classifier.class_index(source)
        seed = req.seed if req.seed is not None else _default_seed(req.text)
        input_score = float(classifier.classify_sentence(sent)[src_idx])
        candidates = []
        from .data import decode_sentence
        for j in range(req.k):
            out = translator.translate(sent, (source, req.target), mode="hard",
                                       max_len=max_len, seed=seed * 131 + j)
            after = float(classifier.classify_sentence(out)[src_idx])
            candidates.append(ObfuscationCandidate(
                text=decode_sentence(out, vocab),
                source_score_before=input_score,
                source_score_after=after,
                privacy_score=1.0 - after,
                meteor=meteor_proxy(out, sent, vocab),
                sample_index=j))
        candidates.sort(key=lambda c: (-c.meteor, c.sample_index))
        return ObfuscationResponse(input_score=input_score, candidates=candidates)

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="studio")
    return app
