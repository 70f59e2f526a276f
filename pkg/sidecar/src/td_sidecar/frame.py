"""td/1 message framing.

One message is a single JSON header line followed by a raw little-endian
float32 payload:

    {"T": ..., "conditioning": [...], "count": ..., "d": ..., "h": ...,
     "protocol": "td/1", "t": ..., "w": ...}\n<count*h*w*d little-endian f32>

Header keys are serialized sorted so frames are byte-reproducible. Error
replies are a bare header line {"error": text, "protocol": "td/1"} with no
payload. This module is self-contained on purpose: the service must not
depend on any particular client implementation.
"""

from __future__ import annotations

import json

import numpy as np

PROTOCOL = "td/1"


class FrameError(ValueError):
    """The bytes on the wire do not form a valid td/1 message."""


def encode_frame(t: int, total_steps: int, grids: np.ndarray,
                 conditioning: tuple[str, ...] | list[str]) -> bytes:
    grids = np.asarray(grids)
    if grids.ndim != 4:
        raise FrameError(f"grids must be (count, h, w, d), got {grids.shape}")
    count, h, w, d = grids.shape
    if len(conditioning) != count:
        raise FrameError(f"{count} grids but {len(conditioning)} conditioning entries")
    header = {
        "protocol": PROTOCOL,
        "t": int(t),
        "T": int(total_steps),
        "count": int(count),
        "h": int(h),
        "w": int(w),
        "d": int(d),
        "conditioning": [str(c) for c in conditioning],
    }
    return json.dumps(header, sort_keys=True).encode("utf-8") + b"\n" + \
        np.ascontiguousarray(grids, dtype="<f4").tobytes()


def error_frame(text: str) -> bytes:
    header = {"protocol": PROTOCOL, "error": str(text)}
    return json.dumps(header, sort_keys=True).encode("utf-8") + b"\n"


def decode_frame(data: bytes) -> tuple[dict, np.ndarray]:
    """Parse an incoming request into (header, float32 grids).

    Every reject path raises FrameError with a one-line reason; the server
    turns that into an error reply, so a malformed request can never kill
    the connection silently.
    """
    nl = data.find(b"\n")
    if nl < 0:
        raise FrameError("message has no header line")
    try:
        header = json.loads(data[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FrameError(f"unreadable header: {e}") from None
    if not isinstance(header, dict):
        raise FrameError("header is not a JSON object")
    if header.get("protocol") != PROTOCOL:
        raise FrameError(f"unsupported protocol {header.get('protocol')!r}")
    if "error" in header:
        raise FrameError(f"peer reported: {header['error']}")
    dims = {}
    for key in ("count", "h", "w", "d", "t", "T"):
        value = header.get(key)
        if isinstance(value, bool) or not isinstance(value, int):
            raise FrameError(f"header field {key!r} must be an integer")
        dims[key] = value
    count, h, w, d = dims["count"], dims["h"], dims["w"], dims["d"]
    if min(count, h, w, d) < 0:
        raise FrameError("dims must be non-negative")
    conditioning = header.get("conditioning")
    if not isinstance(conditioning, list) or len(conditioning) != count \
            or not all(isinstance(c, str) for c in conditioning):
        raise FrameError(f"conditioning must list {count} strings")
    payload = data[nl + 1:]
    want = count * h * w * d * 4
    if len(payload) != want:
        raise FrameError(f"payload is {len(payload)} bytes, dims promise {want}")
    grids = np.frombuffer(payload, dtype="<f4").reshape(count, h, w, d)
    return header, grids
