"""bbopt-server command line entry point."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .models import TORCHVISION_MODELS
from .server import ServerConfig, serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bbopt-server",
        description="Serve a classifier over the newline-JSON oracle protocol",
    )
    parser.add_argument("--model", required=True,
                        help=f"builtin:PATH or one of {sorted(TORCHVISION_MODELS)}")
    parser.add_argument("--port", type=int, default=9090)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--device", default="cpu", help="torch device hint")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("BBOPT_LOG", "INFO").upper())
    args = build_parser().parse_args(argv)
    cfg = ServerConfig(model=args.model, port=args.port, host=args.host,
                       device=args.device)
    try:
        serve(cfg)
    except KeyboardInterrupt:
        return 0
    except (ValueError, OSError, ImportError) as exc:
        print(f"server error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
