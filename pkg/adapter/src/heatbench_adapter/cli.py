"""Command line front end: ``adapter serve --model PATH --transport stdio|tcp``."""

from __future__ import annotations

import argparse
import sys

from .errors import ArtifactError
from .server import TRANSPORTS, AdapterConfig, serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adapter",
        description="Reference model adapter for the heatbench oracle wire protocol.")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("serve", help="answer score requests until the transport closes")
    sp.add_argument("--model", default="stub",
                    help="model artifact (JSON file) or 'stub' for the built-in scorer")
    sp.add_argument("--transport", default="stdio", choices=TRANSPORTS)
    sp.add_argument("--host", default="127.0.0.1", help="tcp bind address")
    sp.add_argument("--port", type=int, default=0, help="tcp port; 0 picks a free one")
    sp.add_argument("--device", default="cpu",
                    help="device tag handed to the model backend")
    sp.add_argument("--batch-size", type=int, default=8)
    return parser


def entrypoint(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = AdapterConfig(model=args.model, transport=args.transport,
                           device=args.device, batch_size=args.batch_size,
                           host=args.host, port=args.port)
    try:
        serve(config)
    except ArtifactError as exc:
        print(f"adapter: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 0
    return 0
