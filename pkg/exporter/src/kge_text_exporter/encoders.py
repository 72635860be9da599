"""Text encoders: pretrained transformers and an offline stand-in.

Both produce one vector per input text with first-token pooling
semantics; ``resolve_encoder`` turns a command-line spec into an
encoder object exposing ``dim`` and ``encode``.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np


class EncoderError(RuntimeError):
    """Encoder spec invalid or model loading failed."""


class HashEncoder:
    """Deterministic pseudo-encoder seeded by sha256 of the text.

    Carries no semantic signal; exists so pipelines and tests run
    offline with platform-stable output.  Spec form: ``hash:<dim>``.
    """

    def __init__(self, dim: int):
        if dim < 1:
            raise EncoderError(f"hash encoder dimension must be >= 1, got {dim}")
        self.dim = dim

    def encode(self, texts, max_len: int = 512, batch_size: int = 32) -> np.ndarray:
        out = np.empty((len(texts), self.dim), dtype=np.float64)
        for i, text in enumerate(texts):
            out[i] = _hash_vector(text[:max_len], self.dim)
        return out


def _hash_vector(text: str, dim: int) -> np.ndarray:
    # sha256(counter || text) blocks, 8 bytes per value, mapped to [-1, 1)
    values = np.empty(dim, dtype=np.float64)
    i = 0
    counter = 0
    while i < dim:
        digest = hashlib.sha256(f"{counter}\x00{text}".encode("utf-8")).digest()
        for offset in range(0, 32, 8):
            if i >= dim:
                break
            (word,) = struct.unpack_from(">Q", digest, offset)
            values[i] = word / 2.0**63 - 1.0
            i += 1
        counter += 1
    return values


class TransformerEncoder:
    """First-token pooling over a pretrained transformer in eval mode.

    The vector for a text is the final hidden state at position 0 (the
    [CLS]-style aggregate token); inputs truncate at ``max_len``
    subwords and run in fixed-size batches under no_grad.
    """

    def __init__(self, model_id: str):
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:  # pragma: no cover - environment dependent
            raise EncoderError(
                "transformer encoders need the 'torch' and 'transformers' packages "
                "(pip install 'kge-text-exporter[hf]')"
            ) from exc
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(model_id)
            self.model = AutoModel.from_pretrained(model_id)
        except Exception as exc:
            raise EncoderError(f"cannot load encoder {model_id!r}: {exc}") from exc
        self.model.eval()
        self._torch = torch
        self.dim = int(self.model.config.hidden_size)

    def encode(self, texts, max_len: int = 512, batch_size: int = 32) -> np.ndarray:
        torch = self._torch
        chunks: list[np.ndarray] = []
        with torch.no_grad():
            for start in range(0, len(texts), batch_size):
                batch = list(texts[start:start + batch_size])
                tokens = self.tokenizer(batch, padding=True, truncation=True,
                                        max_length=max_len, return_tensors="pt")
                hidden = self.model(**tokens).last_hidden_state
                chunks.append(hidden[:, 0, :].to(torch.float64).cpu().numpy())
        if not chunks:
            return np.empty((0, self.dim), dtype=np.float64)
        return np.concatenate(chunks, axis=0)


def resolve_encoder(spec: str):
    """``hash:<dim>`` or a transformer model id / local directory."""
    if spec.startswith("hash:"):
        raw = spec.split(":", 1)[1]
        try:
            dim = int(raw)
        except ValueError:
            raise EncoderError(f"hash encoder expects an integer dimension, got {raw!r}") from None
        return HashEncoder(dim)
    return TransformerEncoder(spec)
