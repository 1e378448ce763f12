"""Embedding providers: a deterministic stub and a remote sidecar client.

The stub keys a pseudo-random unit vector off a SHA-256 hash of the
content and seed, so identical inputs embed identically on every
platform and no neural model is ever needed by the core test suite.

The remote provider speaks the sidecar wire protocol:
``POST {url}/embed`` with ``{"type": "text", "text": ...}`` or
``{"type": "image", "data_base64": ...}``, expecting
``{"dim": d, "vec": [...]}`` back.
"""

from __future__ import annotations

import base64
import hashlib
from dataclasses import dataclass

import numpy as np
import requests

from .errors import ProviderUnavailableError
from .store import normalize

DEFAULT_STUB_DIMENSION = 512


@dataclass(frozen=True)
class ProviderConfig:
    mode: str = "stub"  # "stub" | "remote"
    remote_url: str | None = None
    timeout: float = 10.0
    stub_seed: int = 0

    def __post_init__(self):
        if self.mode not in ("stub", "remote"):
            raise ValueError(f"provider mode must be 'stub' or 'remote', got {self.mode!r}")
        if self.mode == "remote" and not self.remote_url:
            raise ValueError("remote provider requires remote_url")


def stub_embed(content: str | bytes, dimension: int, seed: int = 0) -> np.ndarray:
    """Deterministic unit vector keyed by a SHA-256 hash of (content, seed)."""
    if dimension < 8:
        raise ValueError(f"stub dimension must be >= 8, got {dimension}")
    if isinstance(content, str):
        payload = b"text\x00" + content.encode("utf-8")
    else:
        payload = b"image\x00" + content
    digest = hashlib.sha256(payload + b"\x00" + str(seed).encode("ascii")).digest()
    rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest[:16], "little")))
    return normalize(rng.standard_normal(dimension))


class StubProvider:
    """In-process provider; embeddings are hash-derived, not semantic."""

    def __init__(self, dimension: int = DEFAULT_STUB_DIMENSION, seed: int = 0):
        self.dimension = dimension
        self.seed = seed

    def embed_text(self, text: str) -> np.ndarray:
        return stub_embed(text, self.dimension, self.seed)

    def embed_image(self, data: bytes) -> np.ndarray:
        return stub_embed(data, self.dimension, self.seed)


class RemoteProvider:
    """Client for an embedding sidecar process.

    Connection failures and timeouts raise ProviderUnavailableError so
    callers can distinguish a retryable outage from bad input. When
    ``expected_dim`` is set (normally the corpus dimension), a response
    of any other width is rejected.
    """

    def __init__(self, url: str, timeout: float = 10.0, expected_dim: int | None = None):
        self.url = url.rstrip("/")
        self.timeout = timeout
        self.expected_dim = expected_dim

    @property
    def dimension(self) -> int | None:
        return self.expected_dim

    def _post(self, payload: dict) -> np.ndarray:
        try:
            response = requests.post(f"{self.url}/embed", json=payload, timeout=self.timeout)
        except (requests.ConnectionError, requests.Timeout) as exc:
            raise ProviderUnavailableError(f"embedding sidecar unreachable at {self.url}: {exc}") from exc
        if response.status_code != 200:
            raise ProviderUnavailableError(
                f"embedding sidecar returned HTTP {response.status_code}: {response.text[:200]}"
            )
        body = response.json()
        vec = np.asarray(body["vec"], dtype=np.float64)
        dim = int(body.get("dim", len(vec)))
        if dim != len(vec):
            raise RuntimeError(f"sidecar response is inconsistent: dim={dim} but vec has {len(vec)}")
        if self.expected_dim is not None and dim != self.expected_dim:
            raise RuntimeError(
                f"sidecar returned dimension {dim}, corpus expects {self.expected_dim}"
            )
        return normalize(vec)

    def embed_text(self, text: str) -> np.ndarray:
        return self._post({"type": "text", "text": text})

    def embed_image(self, data: bytes) -> np.ndarray:
        return self._post({"type": "image", "data_base64": base64.b64encode(data).decode("ascii")})


def make_provider(config: ProviderConfig, dimension: int | None = None):
    """Build the provider named by ``config``; dimension comes from the corpus."""
    if config.mode == "stub":
        return StubProvider(dimension or DEFAULT_STUB_DIMENSION, config.stub_seed)
    return RemoteProvider(config.remote_url, config.timeout, expected_dim=dimension)
