import hashlib
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np
import pytest

from diffusemix.imgcore import ImageBuffer, save_image


def rand_image(rng: np.random.Generator, w: int, h: int) -> ImageBuffer:
    return ImageBuffer(rng.random((h, w, 3)))


def make_dataset(root: Path, classes: int, per_class: int, size: int = 24,
                 seed: int = 1234) -> int:
    """Class-per-subdirectory tree of random PNGs; returns the image count."""
    rng = np.random.default_rng(seed)
    for c in range(classes):
        class_dir = root / f"class{c:02d}"
        class_dir.mkdir(parents=True, exist_ok=True)
        for i in range(per_class):
            save_image(rand_image(rng, size, size), class_dir / f"img{i:02d}.png")
    return classes * per_class


def tree_hash(root: Path) -> str:
    """Digest of every file's relative path and bytes, order-independent."""
    digest = hashlib.sha256()
    for path in sorted(Path(root).rglob("*")):
        if path.is_file():
            digest.update(path.relative_to(root).as_posix().encode())
            digest.update(path.read_bytes())
    return digest.hexdigest()


class MockGenerationServer:
    """Local stand-in for the remote generation service.

    `logic` receives the decoded JSON payload and returns (status, body);
    body may be a dict (sent as JSON) or raw bytes (sent as-is, for
    malformed-response tests). Requests are counted.
    """

    def __init__(self, logic):
        self.logic = logic
        self.requests = 0
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                outer.requests += 1
                length = int(self.headers.get("Content-Length", 0))
                payload = json.loads(self.rfile.read(length)) if length else {}
                status, body = outer.logic(payload)
                raw = body if isinstance(body, bytes) else json.dumps(body).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(raw)))
                self.end_headers()
                self.wfile.write(raw)

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self._server.server_address[1]}"

    def __enter__(self):
        self._thread.start()
        return self

    def __exit__(self, *exc_info):
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)


def echo_logic(payload):
    return 200, {"image": payload["image"]}


@pytest.fixture
def np_rng():
    return np.random.default_rng(20240917)
