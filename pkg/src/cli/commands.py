"""
Command handlers behind run.py.

Exit codes:
    0  success (verify: chain Valid)
    2  scenario error (parse, schema, topology)
    3  verification failure or unreadable ledger dump
    4  audit input error (disclosure file, contract rules)
"""

import json
import logging
import sys
from pathlib import Path
from typing import Optional, TextIO

from pydantic import ValidationError

from src.config.scenario import load_scenario
from src.config.settings import get_settings
from src.services.audit import AuditService, dump_disclosures, load_disclosures
from src.services.contracts import ContractRules, replay_chain
from src.services.errors import (
    BeatError,
    DisclosureParseError,
    DumpParseError,
    SpecParseError,
)
from src.services.ledger import dump_chain, load_dump, verify_chain
from src.services.network.simulator import Simulation
from . import artifacts

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_SPEC_ERROR = 2
EXIT_VERIFY_FAILED = 3
EXIT_AUDIT_INPUT = 4


def _diagnose(message: str, stream: TextIO):
    print(f"error: {message}", file=stream)


def run_command(scenario_path: str, seed: Optional[int], out_dir: str, stderr: Optional[TextIO] = None) -> int:
    """Simulate a scenario and write summary, ledger, audit, trace and disclosure files.

    The seed comes from the caller, else the scenario file, else BEAT_DEFAULT_SEED.
    """
    stderr = stderr or sys.stderr
    try:
        scenario = load_scenario(scenario_path)
        if seed is None:
            seed = scenario.seed if scenario.seed is not None else get_settings().default_seed
        simulation = Simulation(scenario, seed)
    except SpecParseError as e:
        _diagnose(f"{scenario_path}: {e}", stderr)
        return EXIT_SPEC_ERROR
    except (BeatError, ValidationError, KeyError) as e:
        _diagnose(f"{scenario_path}: invalid scenario: {e}", stderr)
        return EXIT_SPEC_ERROR

    findings = simulation.run()
    summary = simulation.summary()
    contents = {
        artifacts.SUMMARY_FILE: artifacts.render_summary(summary),
        artifacts.LEDGER_FILE: dump_chain(simulation.ledger.chain, simulation.ledger_config,
                                          simulation.rules.model_dump()),
        artifacts.AUDIT_FILE: artifacts.render_findings(findings),
        artifacts.TRACE_FILE: artifacts.render_lines(simulation.trace_lines()),
        artifacts.DISCLOSURE_FILE: dump_disclosures(simulation.disclosure_list()),
    }
    artifacts.write_artifacts(Path(out_dir), contents)
    logger.info(f"[CLI] Run complete: {summary.blocks_sealed} blocks, {summary.violations} violations", extra={
        "out": out_dir,
        "seed": seed
    })
    return EXIT_OK


def verify_command(ledger_path: str, stdout: Optional[TextIO] = None, stderr: Optional[TextIO] = None) -> int:
    """Check a ledger dump end to end and print the verdict"""
    stdout, stderr = stdout or sys.stdout, stderr or sys.stderr
    try:
        dump = load_dump(Path(ledger_path).read_text(encoding="utf-8"))
    except OSError as e:
        _diagnose(f"cannot read {ledger_path}: {e}", stderr)
        return EXIT_VERIFY_FAILED
    except DumpParseError as e:
        _diagnose(f"{ledger_path}: {e}", stderr)
        return EXIT_VERIFY_FAILED

    verdict = verify_chain(dump.blocks, dump.authority_ids)
    print(json.dumps(verdict.model_dump(mode="json"), sort_keys=True), file=stdout)
    return EXIT_OK if verdict.valid else EXIT_VERIFY_FAILED


def audit_command(
    ledger_path: str,
    disclosure_path: str,
    out_path: Optional[str] = None,
    stdout: Optional[TextIO] = None,
    stderr: Optional[TextIO] = None,
) -> int:
    """Replay a ledger dump and audit the disclosed flows against it"""
    stdout, stderr = stdout or sys.stdout, stderr or sys.stderr
    try:
        dump = load_dump(Path(ledger_path).read_text(encoding="utf-8"))
    except (OSError, DumpParseError) as e:
        _diagnose(f"{ledger_path}: {e}", stderr)
        return EXIT_VERIFY_FAILED

    verdict = verify_chain(dump.blocks, dump.authority_ids)
    if not verdict.valid:
        _diagnose(f"{ledger_path}: chain invalid at height {verdict.height} ({verdict.check.value})", stderr)
        return EXIT_VERIFY_FAILED

    try:
        disclosures = load_disclosures(Path(disclosure_path).read_text(encoding="utf-8"))
        rules = ContractRules(**dump.contract_rules)
    except (OSError, DisclosureParseError, ValidationError) as e:
        _diagnose(f"audit input: {e}", stderr)
        return EXIT_AUDIT_INPUT

    state = replay_chain(dump.blocks, rules)
    findings = AuditService(state, rules.digest_algorithm).audit(disclosures)
    report = artifacts.render_findings(findings)
    if out_path:
        Path(out_path).write_text(report, encoding="utf-8")
    else:
        stdout.write(report)
    return EXIT_OK
