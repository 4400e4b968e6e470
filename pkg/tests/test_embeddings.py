import json
import math
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mnemo.core import BoundingBox, Observation, Widget
from mnemo.embeddings import (
    HashingEmbedder,
    RemoteEmbedder,
    cosine_similarity,
    embed_observation,
    embed_text,
    is_degenerate,
    make_provider,
)
from mnemo.errors import DimensionMismatch, EmptyInput, RemoteUnavailable
from mnemo.fixtures import load_fixture

from .oracles import py_cosine, reference_hash_embed

H = HashingEmbedder(256)


def test_deterministic_and_normalized():
    assert np.array_equal(embed_text(H, "abc"), embed_text(H, "abc"))
    assert abs(np.linalg.norm(H.embed_text("abc")) - 1) < 1e-9


@given(st.text(min_size=1, max_size=80))
def test_norm_is_one_for_any_text(s):
    assert abs(np.linalg.norm(H.embed_text(s)) - 1.0) < 1e-9


@given(st.text(min_size=1, max_size=40))
def test_matches_reference_hasher(s):
    assert H.embed_text(s).tolist() == reference_hash_embed(s)


def test_empty_text_rejected():
    with pytest.raises(EmptyInput):
        H.embed_text("")


def test_near_duplicate_similarity_matches_reference():
    expected = py_cosine(reference_hash_embed("login page"), reference_hash_embed("login pages"))
    got = cosine_similarity(H.embed_text("login page"), H.embed_text("login pages"))
    assert 0 < got < 1
    assert abs(got - expected) < 1e-12


def test_pinned_vectors_bit_identical():
    for text, vec in load_fixture("hashing-vectors"):
        assert np.array_equal(H.embed_text(text), vec), text


def _obs(sid, *pairs):
    return Observation(sid, tuple(Widget(f"w{i}", r, l, BoundingBox(0, 0.1 * i, 1, 0.1 * i + 0.05)) for i, (r, l) in enumerate(pairs)))


def test_observation_embedding_ignores_screen_id_and_geometry():
    a = _obs("one", ("button", "OK"), ("text", "Hello"))
    b = _obs("two", ("button", "OK"), ("text", "Hello"))
    assert np.array_equal(embed_observation(H, a), embed_observation(H, b))
    assert np.array_equal(H.embed_observation(a), H.embed_observation(a))
    assert not np.array_equal(H.embed_observation(a), H.embed_observation(_obs("x", ("text", "Hello"), ("button", "OK"))))


def test_empty_observation_is_degenerate_zero():
    v = H.embed_observation(Observation("blank"))
    assert is_degenerate(v) and v.shape == (256,)
    assert cosine_similarity(v, H.embed_text("x")) == 0.0


def test_cosine_examples():
    assert cosine_similarity([1, 0], [1, 0]) == 1.0
    assert cosine_similarity([1, 0], [0, 1]) == 0.0
    assert abs(cosine_similarity([1, 1], [1, 0]) - 0.70710678) < 1e-8
    assert abs(cosine_similarity([1, 1], [1, 0]) - 1 / math.sqrt(2)) < 1e-12
    with pytest.raises(DimensionMismatch):
        cosine_similarity([1, 0], [1, 0, 0])


vecs = st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3)


@given(vecs, vecs, st.floats(1e-3, 1e3))
def test_cosine_scale_invariance_and_symmetry(a, b, c):
    s = cosine_similarity(a, b)
    assert s == cosine_similarity(b, a)
    assert -1 <= s <= 1
    assert abs(cosine_similarity([c * x for x in a], b) - s) < 1e-9


# -- remote provider against a local server ---------------------------------


class _Handler(BaseHTTPRequestHandler):
    mode = "ok"

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        self.server.requests.append((self.path, body))
        if self.server.mode == "error":
            self.send_response(503)
            self.end_headers()
            return
        vec = [0.0] * 4
        vec[len(body["content"]) % 4] = 3.0
        out = json.dumps({"vector": vec if self.server.mode == "ok" else vec[:2]}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(out)))
        self.end_headers()
        self.wfile.write(out)

    def log_message(self, *args):
        pass


@pytest.fixture
def server():
    srv = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    srv.requests = []
    srv.mode = "ok"
    t = threading.Thread(target=srv.serve_forever, daemon=True)
    t.start()
    yield srv
    srv.shutdown()
    srv.server_close()


def test_remote_protocol(server):
    url = f"http://127.0.0.1:{server.server_address[1]}"
    p = make_provider("remote", 4, url)
    assert isinstance(p, RemoteEmbedder) and p.timeout == 10.0
    v = p.embed_text("abc")
    assert v.tolist() == [0, 0, 0, 1.0]  # normalized
    p.embed_observation(_obs("s", ("button", "OK")))
    assert server.requests[0] == ("/embed", {"kind": "text", "content": "abc"})
    assert server.requests[1] == ("/embed", {"kind": "observation", "content": "button:OK"})


def test_remote_concurrent_requests(server):
    p = RemoteEmbedder(f"http://127.0.0.1:{server.server_address[1]}", 4)
    results = {}

    def work(i):
        results[i] = p.embed_text("x" * i)

    threads = [threading.Thread(target=work, args=(i,)) for i in range(1, 9)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for i, v in results.items():
        assert v[i % 4] == 1.0


def test_remote_errors(server):
    url = f"http://127.0.0.1:{server.server_address[1]}"
    server.mode = "error"
    with pytest.raises(RemoteUnavailable):
        RemoteEmbedder(url, 4).embed_text("abc")
    server.mode = "short"
    with pytest.raises(DimensionMismatch):
        RemoteEmbedder(url, 4).embed_text("abc")
    with pytest.raises(RemoteUnavailable):
        RemoteEmbedder("http://127.0.0.1:9", 4, timeout=0.5).embed_text("abc")
