"""Command line for the td/1 service."""

from __future__ import annotations

import argparse
import sys

from .backbones import BackboneUnavailable
from .server import ServerConfig, serve


def build_config(argv: list[str] | None = None) -> ServerConfig:
    parser = argparse.ArgumentParser(
        prog="td-sidecar",
        description="Serve td/1 denoise/encode/decode over HTTP")
    parser.add_argument("--listen", default="127.0.0.1:8716",
                        metavar="HOST:PORT", help="bind address (default %(default)s)")
    parser.add_argument("--backbone", default="echo",
                        help="echo, seeded, or a pretrained model id")
    parser.add_argument("--echo", action="store_true",
                        help="shorthand for --backbone echo")
    parser.add_argument("--guidance", type=float, default=7.5,
                        help="guidance scale (default %(default)s)")
    parser.add_argument("--device", default="cpu",
                        help="device for pretrained backbones (default %(default)s)")
    parser.add_argument("--max-batch", type=int, default=8, dest="max_batch",
                        help="largest accepted request batch (default %(default)s)")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for deterministic backbones")
    args = parser.parse_args(argv)

    host, sep, port = args.listen.rpartition(":")
    if not sep or not host or not port.isdigit():
        raise ValueError(f"--listen wants HOST:PORT, got {args.listen!r}")
    return ServerConfig(host=host, port=int(port),
                        backbone="echo" if args.echo else args.backbone,
                        guidance=args.guidance, device=args.device,
                        max_batch=args.max_batch, seed=args.seed)


def main(argv: list[str] | None = None) -> int:
    try:
        config = build_config(argv)
    except ValueError as e:
        print(f"td-sidecar: {e}", file=sys.stderr)
        return 1
    try:
        print(f"td-sidecar: serving {config.backbone} on "
              f"{config.host}:{config.port}", flush=True)
        serve(config)
    except BackboneUnavailable as e:
        print(f"td-sidecar: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"td-sidecar: cannot bind {config.host}:{config.port}: {e}",
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
