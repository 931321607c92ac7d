#!/usr/bin/env python3
"""Run the authoring service.

    python scripts/serve.py [--config engine.conf] [--host H] [--port P]

Environment overrides: FACTWEAVE_LISTEN, FACTWEAVE_PERSIST_ROOT.
"""

import argparse

import uvicorn

from factweave.config import load_engine_config
from factweave.service import create_app


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=None)
    parser.add_argument("--host", default=None)
    parser.add_argument("--port", type=int, default=None)
    args = parser.parse_args()

    config = load_engine_config(args.config)
    host, _, port = config.service.listen.partition(":")
    uvicorn.run(
        create_app(config),
        host=args.host or host or "127.0.0.1",
        port=args.port or int(port or 8787),
    )


if __name__ == "__main__":
    main()
