"""Launch the model server: ``python -m modelserver --model echo --port 8008``."""

from __future__ import annotations

import argparse
import os

import uvicorn

from .app import create_app
from .config import ServerConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qa-modelserver", description=__doc__)
    parser.add_argument("--model", default=os.environ.get("QA_MODELSERVER_MODEL", "echo"),
                        help="'echo' or a local transformers checkpoint path")
    parser.add_argument("--port", type=int, default=int(os.environ.get("QA_MODELSERVER_PORT", "8008")))
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--max-input-chars", type=int, default=4096)
    parser.add_argument("--max-new-tokens", type=int, default=64)
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--device", default="cpu")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = ServerConfig(
        model=args.model,
        max_input_chars=args.max_input_chars,
        max_new_tokens=args.max_new_tokens,
        batch_size=args.batch_size,
        device=args.device,
        port=args.port,
    )
    uvicorn.run(create_app(config), host=args.host, port=config.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
