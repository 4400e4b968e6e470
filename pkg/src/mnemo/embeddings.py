"""Text and observation embedders plus cosine similarity.

Two providers ship here: :class:`HashingEmbedder`, a deterministic signed
character-trigram hasher that needs no model weights, and
:class:`RemoteEmbedder`, a thin HTTP client for an external encoder. Both return
float64 numpy vectors that are L2-normalized, or all-zero for degenerate input.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import urllib.error
import urllib.request
from typing import Protocol, Sequence

import numpy as np

from .core import Observation
from .errors import DimensionMismatch, EmptyInput, RemoteUnavailable

logger = logging.getLogger(__name__)

DEFAULT_DIMENSION = 256

# Boundary markers so strings shorter than three characters still yield a trigram.
_BOS = "\x02"
_EOS = "\x03"


class EmbeddingProvider(Protocol):
    kind: str
    dimension: int

    def embed_text(self, text: str) -> np.ndarray: ...

    def embed_observation(self, obs: Observation) -> np.ndarray: ...


def observation_text(obs: Observation) -> str:
    """Feature text for an observation: ``role:label`` per widget, in tree order.

    The screen id and geometry are deliberately left out.
    """
    return "\n".join(f"{w.role}:{w.label}" for w in obs.widgets)


def _normalize(vec: np.ndarray) -> np.ndarray:
    norm = math.sqrt(float(np.dot(vec, vec)))
    if norm == 0.0:
        return vec
    return vec / norm


def trigrams(text: str) -> list[str]:
    padded = _BOS + text + _EOS
    return [padded[i : i + 3] for i in range(len(padded) - 2)]


def _bucket(gram: str, dimension: int) -> tuple[int, float]:
    h = int.from_bytes(hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest(), "little")
    sign = -1.0 if h >> 63 else 1.0
    return h % dimension, sign


class HashingEmbedder:
    """Signed feature hashing of character trigrams into ``dimension`` buckets."""

    kind = "hashing"

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = dimension

    def embed_text(self, text: str) -> np.ndarray:
        if not isinstance(text, str) or text == "":
            raise EmptyInput("cannot embed empty text")
        vec = np.zeros(self.dimension, dtype=np.float64)
        for gram in trigrams(text):
            idx, sign = _bucket(gram, self.dimension)
            vec[idx] += sign
        return _normalize(vec)

    def embed_observation(self, obs: Observation) -> np.ndarray:
        if not obs.widgets:
            logger.debug("observation %s has no widgets; returning degenerate zero vector", obs.screen_id)
            return np.zeros(self.dimension, dtype=np.float64)
        return self.embed_text(observation_text(obs))

    def __repr__(self) -> str:
        return f"HashingEmbedder(dimension={self.dimension})"


class RemoteEmbedder:
    """Client for an embedding service speaking the ``POST {endpoint}/embed`` protocol.

    Request body is ``{"kind": "text"|"observation", "content": str}`` and the
    response is ``{"vector": [...]}``. Anything but a 200 with a well-formed
    vector of the configured dimension raises :class:`RemoteUnavailable`.
    """

    kind = "remote"

    def __init__(self, endpoint: str, dimension: int = DEFAULT_DIMENSION, timeout: float = 10.0):
        self.endpoint = endpoint.rstrip("/")
        self.dimension = dimension
        self.timeout = timeout

    def _request(self, kind: str, content: str) -> np.ndarray:
        body = json.dumps({"kind": kind, "content": content}).encode("utf-8")
        req = urllib.request.Request(
            self.endpoint + "/embed",
            data=body,
            method="POST",
            headers={"Content-Type": "application/json"},
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                status = resp.status
                payload = resp.read()
        except urllib.error.HTTPError as exc:
            raise RemoteUnavailable(f"embedding service returned HTTP {exc.code}") from exc
        except (urllib.error.URLError, OSError) as exc:
            raise RemoteUnavailable(f"embedding service unreachable: {exc}") from exc
        if status != 200:
            raise RemoteUnavailable(f"embedding service returned HTTP {status}")
        try:
            values = json.loads(payload)["vector"]
            vec = np.asarray(values, dtype=np.float64)
        except (ValueError, KeyError, TypeError) as exc:
            raise RemoteUnavailable(f"malformed embedding response: {exc}") from exc
        if vec.shape != (self.dimension,):
            raise DimensionMismatch(f"expected {self.dimension} values, got shape {vec.shape}")
        if not np.all(np.isfinite(vec)):
            raise RemoteUnavailable("embedding response contains non-finite values")
        return _normalize(vec)

    def embed_text(self, text: str) -> np.ndarray:
        if not isinstance(text, str) or text == "":
            raise EmptyInput("cannot embed empty text")
        return self._request("text", text)

    def embed_observation(self, obs: Observation) -> np.ndarray:
        return self._request("observation", observation_text(obs))

    def __repr__(self) -> str:
        return f"RemoteEmbedder({self.endpoint!r}, dimension={self.dimension})"


def make_provider(kind: str = "hashing", dimension: int = DEFAULT_DIMENSION, endpoint: str | None = None,
                  timeout: float = 10.0) -> EmbeddingProvider:
    if kind == "hashing":
        return HashingEmbedder(dimension)
    if kind == "remote":
        if not endpoint:
            raise ValueError("remote provider requires an endpoint")
        return RemoteEmbedder(endpoint, dimension, timeout)
    raise ValueError(f"unknown provider kind {kind!r}")


def embed_text(provider: EmbeddingProvider, text: str) -> np.ndarray:
    return provider.embed_text(text)


def embed_observation(provider: EmbeddingProvider, obs: Observation) -> np.ndarray:
    return provider.embed_observation(obs)


def is_degenerate(vec: np.ndarray) -> bool:
    """True for the all-zero vector produced by empty observations."""
    return not np.any(vec)


def cosine_similarity(a: Sequence[float], b: Sequence[float]) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"cannot compare vectors of shape {a.shape} and {b.shape}")
    na = math.sqrt(float(np.dot(a, a)))
    nb = math.sqrt(float(np.dot(b, b)))
    if na == 0.0 or nb == 0.0:
        return 0.0
    sim = float(np.dot(a, b)) / (na * nb)
    return min(1.0, max(-1.0, sim))
