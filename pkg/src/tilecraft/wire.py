"""td/1 wire protocol for remote noise estimation.

A message is one JSON header line (LF-terminated) followed by a raw float
payload:

    {"protocol": "td/1", "t": 37, "T": 50, "count": 2, "h": 96, "w": 96,
     "d": 4, "conditioning": ["a stone wall", "a stone wall"]}\n
    <count*h*w*d little-endian float32, (image, row, col, channel) order>

A response mirrors the header and carries the noise estimate in the same
layout. Servers report failures as a header of the form
{"protocol": "td/1", "error": "..."} with no payload. Transport is HTTP
POST to <endpoint>/denoise.
"""

from __future__ import annotations

import json
import socket
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .engine import DenoiserFn, DenoiserRequest

PROTOCOL = "td/1"
DEFAULT_TIMEOUT = 30.0


class WireError(Exception):
    pass


class TransportFailure(WireError):
    pass


class RequestTimeout(WireError):
    pass


class ProtocolVersionMismatch(WireError):
    pass


class ShapeMismatch(WireError):
    pass


def encode_message(t: int, total_steps: int, grids: np.ndarray,
                   conditioning: tuple[str, ...]) -> bytes:
    """Frame one request or response; grids is (count, h, w, d)."""
    grids = np.asarray(grids)
    if grids.ndim != 4:
        raise ShapeMismatch(f"grids must be 4-d (count, h, w, d), got {grids.shape}")
    count, h, w, d = grids.shape
    if len(conditioning) != count:
        raise ShapeMismatch(f"{count} grids but {len(conditioning)} conditioning entries")
    header = {
        "protocol": PROTOCOL,
        "t": int(t),
        "T": int(total_steps),
        "count": int(count),
        "h": int(h),
        "w": int(w),
        "d": int(d),
        "conditioning": list(conditioning),
    }
    return json.dumps(header, sort_keys=True).encode("utf-8") + b"\n" + \
        np.ascontiguousarray(grids, dtype="<f4").tobytes()


def decode_message(data: bytes) -> tuple[dict, np.ndarray]:
    """Split a framed message into (header, float32 grids).

    Raises ProtocolVersionMismatch for a foreign protocol tag, ShapeMismatch
    when the payload length disagrees with the declared dims, TransportFailure
    when the peer sent an error header or the frame is unreadable.
    """
    nl = data.find(b"\n")
    if nl < 0:
        raise TransportFailure("message has no header line")
    try:
        header = json.loads(data[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise TransportFailure(f"unreadable header: {e}") from None
    if not isinstance(header, dict):
        raise TransportFailure("header is not a JSON object")
    if header.get("protocol") != PROTOCOL:
        raise ProtocolVersionMismatch(f"peer speaks {header.get('protocol')!r}, not {PROTOCOL!r}")
    if "error" in header:
        raise TransportFailure(f"peer reported: {header['error']}")
    try:
        count, h, w, d = (int(header[k]) for k in ("count", "h", "w", "d"))
    except (KeyError, TypeError, ValueError):
        raise ShapeMismatch("header is missing integer dims count/h/w/d") from None
    payload = data[nl + 1:]
    want = count * h * w * d * 4
    if any(v < 0 for v in (count, h, w, d)) or len(payload) != want:
        raise ShapeMismatch(f"payload is {len(payload)} bytes, dims promise {want}")
    grids = np.frombuffer(payload, dtype="<f4").reshape(count, h, w, d)
    return header, grids


def _post(url: str, body: bytes, timeout: float) -> bytes:
    req = urllib.request.Request(url, data=body,
                                 headers={"Content-Type": "application/octet-stream"})
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.read()
    except socket.timeout:
        raise RequestTimeout(f"no response from {url} within {timeout}s") from None
    except TimeoutError:
        raise RequestTimeout(f"no response from {url} within {timeout}s") from None
    except urllib.error.HTTPError as e:
        # An error frame may still ride on a non-200 status.
        body = e.read()
        if body:
            decode_message(body)  # raises with the peer's message if framed
        raise TransportFailure(f"{url} answered HTTP {e.code}") from None
    except urllib.error.URLError as e:
        if isinstance(e.reason, (socket.timeout, TimeoutError)):
            raise RequestTimeout(f"no response from {url} within {timeout}s") from None
        raise TransportFailure(f"cannot reach {url}: {e.reason}") from None


def remote_denoise(req: DenoiserRequest, endpoint: str,
                   timeout: float = DEFAULT_TIMEOUT) -> np.ndarray:
    """Send one denoise query; retries once on timeout or transport loss."""
    body = encode_message(req.t, req.total_steps, req.grids, req.conditioning)
    url = endpoint.rstrip("/") + "/denoise"
    try:
        raw = _post(url, body, timeout)
    except (RequestTimeout, TransportFailure):
        raw = _post(url, body, timeout)
    header, grids = decode_message(raw)
    if tuple(grids.shape) != tuple(req.grids.shape):
        raise ShapeMismatch(f"response shape {grids.shape} != request {req.grids.shape}")
    return np.asarray(grids, dtype=np.float64)


def remote_denoiser(endpoint: str, timeout: float = DEFAULT_TIMEOUT) -> DenoiserFn:
    def run(req: DenoiserRequest) -> np.ndarray:
        return remote_denoise(req, endpoint, timeout)

    return run


# ── in-process test server ────────────────────────────────────────────────


class _LoopbackHandler(BaseHTTPRequestHandler):
    def do_POST(self):  # noqa: N802 (http.server API)
        try:
            length = int(self.headers.get("Content-Length", "0"))
            data = self.rfile.read(length)
            if self.path.rstrip("/") != "/denoise":
                raise WireError(f"unknown path {self.path}")
            header, grids = decode_message(data)
            if self.server.mode == "zero":
                eps = np.zeros_like(grids)
            else:
                eps = grids  # echo: bit-exact payload reflection
            out = encode_message(header["t"], header["T"], eps,
                                 tuple(header["conditioning"]))
            self.send_response(200)
        except Exception as e:  # malformed input must yield an error frame
            out = json.dumps({"protocol": PROTOCOL, "error": str(e)},
                             sort_keys=True).encode("utf-8") + b"\n"
            self.send_response(400)
        self.send_header("Content-Length", str(len(out)))
        self.end_headers()
        self.wfile.write(out)

    def log_message(self, *args):  # keep test output clean
        pass


@dataclass
class LoopbackServer:
    """Tiny in-process td/1 endpoint for tests and offline runs.

    mode "echo" reflects the payload back as the noise estimate; mode "zero"
    answers with zeros (the sampler then collapses to pure rescaling).
    """

    mode: str = "echo"
    host: str = "127.0.0.1"

    def __enter__(self) -> "LoopbackServer":
        self._httpd = ThreadingHTTPServer((self.host, 0), _LoopbackHandler)
        self._httpd.mode = self.mode
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        self.url = f"http://{self.host}:{self._httpd.server_port}"
        return self

    def __exit__(self, *exc) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        self._thread.join(timeout=5)


def conformance_vectors() -> list[DenoiserRequest]:
    """Deterministic request set exercising the framing corners: batch sizes,
    channel counts, odd dims, unicode conditioning and awkward float values.
    Any conforming echo server must reflect each payload bit for bit."""
    rng = np.random.default_rng(1213)
    vectors: list[DenoiserRequest] = []
    shapes = [(1, 8, 8, 1), (2, 16, 16, 4), (3, 5, 7, 3), (1, 1, 1, 1)]
    prompts = ["", "plain", "snow ❄ tile", "a\nnewline"]
    for i, shape in enumerate(shapes):
        grids = rng.standard_normal(shape).astype("<f4").astype(np.float64)
        vectors.append(DenoiserRequest(
            grids=grids, t=i + 1, total_steps=50,
            conditioning=tuple(prompts[j % len(prompts)] for j in range(shape[0]))))
    specials = np.array([0.0, -0.0, 1e-45, -1e-45, 3.4e38, -3.4e38, 1e-30, 42.0],
                        dtype="<f4").reshape(1, 2, 4, 1).astype(np.float64)
    vectors.append(DenoiserRequest(grids=specials, t=50, total_steps=50,
                                   conditioning=("edge floats",)))
    return vectors
