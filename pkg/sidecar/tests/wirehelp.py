"""Raw-socket helper shared by the server-facing tests."""

from __future__ import annotations

import urllib.error
import urllib.request


def post_raw(url: str, body: bytes, timeout: float = 10.0) -> tuple[int, bytes]:
    """POST and return (status, body) for 4xx/5xx too, never raising."""
    req = urllib.request.Request(
        url, data=body, headers={"Content-Type": "application/octet-stream"})
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.status, resp.read()
    except urllib.error.HTTPError as e:
        return e.code, e.read()
