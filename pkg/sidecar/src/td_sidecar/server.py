"""The td/1 HTTP service.

POST /denoise, /encode and /decode all carry one framed message each way.
Requests are handled strictly one at a time (the protocol is plain
request/response), and every failure is answered with a framed error
header: a client never sees a silent close.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np

from .backbones import make_backbone
from .frame import FrameError, decode_frame, encode_frame, error_frame


@dataclass(frozen=True)
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8716
    backbone: str = "echo"   # "echo" | "seeded" | pretrained model id
    guidance: float = 7.5
    device: str = "cpu"
    max_batch: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.max_batch < 1:
            raise ValueError(f"max batch must be >= 1, got {self.max_batch}")
        if not 0 <= self.port <= 65535:
            raise ValueError(f"port {self.port} out of range")


class _Handler(BaseHTTPRequestHandler):
    server: "_SidecarHTTPServer"

    def _reply(self, status: int, body: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", "application/octet-stream")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self):  # noqa: N802 (http.server API)
        try:
            length = int(self.headers.get("Content-Length", "0"))
            data = self.rfile.read(length)
            route = self.path.rstrip("/")
            if route not in ("/denoise", "/encode", "/decode"):
                raise FrameError(f"unknown path {self.path}")
            header, grids = decode_frame(data)
            if grids.shape[0] > self.server.config.max_batch:
                raise FrameError(f"batch of {grids.shape[0]} exceeds "
                                 f"max batch {self.server.config.max_batch}")
            backbone = self.server.backbone
            if route == "/denoise":
                out = backbone.denoise(grids, header["t"], header["T"],
                                       tuple(header["conditioning"]))
            elif route == "/encode":
                out = backbone.encode(grids)
            else:
                out = backbone.decode(grids)
            out = np.asarray(out, dtype=np.float32)
            conditioning = list(header["conditioning"])[:out.shape[0]]
            conditioning += [""] * (out.shape[0] - len(conditioning))
            body = encode_frame(header["t"], header["T"], out, conditioning)
            self._reply(200, body)
        except FrameError as e:
            self._reply(400, error_frame(str(e)))
        except Exception as e:  # backbone faults still answer in-protocol
            self._reply(500, error_frame(str(e)))

    def do_GET(self):  # noqa: N802
        self._reply(400, error_frame("td/1 messages travel by POST"))

    def log_message(self, *args):
        pass


class _SidecarHTTPServer(HTTPServer):
    """Single-threaded on purpose: requests are served in arrival order."""

    def __init__(self, config: ServerConfig):
        super().__init__((config.host, config.port), _Handler)
        self.config = config
        self.backbone = make_backbone(config.backbone, config.device,
                                      config.guidance, config.seed)


@dataclass
class SidecarServer:
    """Run the service on a background thread; `url` is set once entered.

    Port 0 asks the OS for a free port, which is what tests want.
    """

    config: ServerConfig = field(default_factory=ServerConfig)

    def __enter__(self) -> "SidecarServer":
        self._httpd = _SidecarHTTPServer(self.config)
        self._thread = threading.Thread(target=self._httpd.serve_forever,
                                        daemon=True)
        self._thread.start()
        self.url = f"http://{self.config.host}:{self._httpd.server_port}"
        return self

    def __exit__(self, *exc) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        self._thread.join(timeout=5)


def serve(config: ServerConfig) -> None:
    """Blocking entry point used by the command line."""
    httpd = _SidecarHTTPServer(config)
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.server_close()
