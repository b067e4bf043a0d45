"""
BEAT SIMULATOR COMMAND LINE
===========================

Entry point for the shared-infrastructure ledger simulator. It handles:
1. Scenario runs
2. Ledger verification
3. Offline audits

Commands:
-------------
1. run --scenario <path> [--seed <u64>] [--out <dir>]
   - Simulates the scenario to its horizon, drains the mempool, audits
   - Writes into <dir>:
     * summary.json     - run totals and the state digest
     * ledger.jsonl     - ledger dump (metadata line, then one block per line)
     * audit.jsonl      - one finding per audited flow
     * trace.jsonl      - event trace in processing order
     * disclosure.jsonl - flow manifests and retained record preimages

2. verify --ledger <path>
   - Re-checks every block of a dump; prints the verdict

3. audit --ledger <path> --disclosure <path> [--out <path>]
   - Replays the dump's contracts and audits the disclosed flows
   - Output matches the audit.jsonl of the run that produced both files

Exit codes:
------------
0 success, 2 scenario error, 3 verification failure, 4 audit input error

Configuration:
------------
BEAT_LOG_LEVEL, BEAT_LOG_DIR, BEAT_DEFAULT_SEED and BEAT_DEFAULT_OUT are read
from the environment or a .env file (see .env.example).
"""

from dotenv import load_dotenv
load_dotenv()

import argparse
import sys
from typing import List, Optional

from src.cli import audit_command, run_command, verify_command
from src.config.logging_config import setup_logging
from src.config.settings import get_settings


def _seed(value: str) -> int:
    seed = int(value)
    if not 0 <= seed < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return seed


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = argparse.ArgumentParser(prog="beat", description="Permissioned-ledger SLA simulator")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="simulate a scenario and write artifacts")
    run.add_argument("--scenario", required=True)
    run.add_argument("--seed", type=_seed, default=None, help="defaults to the scenario seed, then BEAT_DEFAULT_SEED")
    run.add_argument("--out", default=settings.default_out)

    verify = commands.add_parser("verify", help="verify a ledger dump")
    verify.add_argument("--ledger", required=True)

    audit = commands.add_parser("audit", help="audit disclosed flows against a ledger dump")
    audit.add_argument("--ledger", required=True)
    audit.add_argument("--disclosure", required=True)
    audit.add_argument("--out", default=None)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_settings()
    setup_logging(settings.log_level, settings.log_dir)

    if args.command == "run":
        return run_command(args.scenario, args.seed, args.out)
    if args.command == "verify":
        return verify_command(args.ledger)
    return audit_command(args.ledger, args.disclosure, args.out)


if __name__ == "__main__":
    sys.exit(main())
