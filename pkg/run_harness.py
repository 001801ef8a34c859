# Run script for the scenario harness

import argparse
import os
import sys
from pathlib import Path

from dotenv import load_dotenv
from loguru import logger

# Add current directory to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from harness.main import run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Run a gluing-construction scenario and write CSV/JSON results")
    parser.add_argument("--scenario", required=True, type=Path, help="YAML scenario file")
    parser.add_argument("--out", type=Path, default=None, help="Output directory (default: HK_OUTPUT_DIR or results)")
    parser.add_argument("--threads", type=int, default=int(os.environ.get("HK_THREADS", "1")),
                        help="Worker processes for sweep points")
    parser.add_argument("--seed", type=int, default=None, help="Override the scenario seed")
    parser.add_argument("--tolerance-profile", default=os.environ.get("HK_TOLERANCE_PROFILE", "strict"),
                        help="strict or fast")
    return parser


if __name__ == "__main__":
    load_dotenv()
    args = build_parser().parse_args()

    logger.remove()
    logger.add(sys.stderr, level=os.environ.get("HK_LOG_LEVEL", "INFO"))

    sys.exit(run(args.scenario, args.out, args.threads, args.seed, args.tolerance_profile))
