"""Command line entry points: serve the HTTP API or run a headless export."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .session import SessionError, headless_run


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="linkspace", description="linked-spaces analysis workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--host", default="127.0.0.1")

    export = sub.add_parser("export", help="recompute an exported analysis without the GUI")
    export.add_argument("--data", required=True, help="input CSV file")
    export.add_argument("--settings", required=True, help="settings JSON document")
    export.add_argument("--out", required=True, help="output directory")

    args = parser.parse_args(argv)

    if args.command == "serve":
        import uvicorn

        from .service import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0

    try:
        settings = json.loads(Path(args.settings).read_text())
        headless_run(Path(args.data).read_bytes(), settings, args.out)
    except (SessionError, json.JSONDecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote assignments.csv, settings.json, plots.json to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
