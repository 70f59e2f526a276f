"""HTTP service answering td/1 denoise, encode and decode requests."""

from .backbones import (
    BackboneUnavailable,
    EchoBackbone,
    SeededBackbone,
    StableDiffusionBackbone,
    make_backbone,
)
from .frame import PROTOCOL, FrameError, decode_frame, encode_frame, error_frame
from .server import ServerConfig, SidecarServer, serve

__version__ = "0.1.0"

__all__ = [
    "PROTOCOL",
    "BackboneUnavailable",
    "EchoBackbone",
    "FrameError",
    "SeededBackbone",
    "ServerConfig",
    "SidecarServer",
    "StableDiffusionBackbone",
    "decode_frame",
    "encode_frame",
    "error_frame",
    "make_backbone",
    "serve",
    "__version__",
]
