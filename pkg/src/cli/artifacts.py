"""Artifact files written by `run` and read back by `verify` and `audit`."""

import json
from pathlib import Path
from typing import Dict, Sequence

from src.database.models import AuditFinding, RunSummary

SUMMARY_FILE = "summary.json"
LEDGER_FILE = "ledger.jsonl"
AUDIT_FILE = "audit.jsonl"
TRACE_FILE = "trace.jsonl"
DISCLOSURE_FILE = "disclosure.jsonl"

RUN_ARTIFACTS = (SUMMARY_FILE, LEDGER_FILE, AUDIT_FILE, TRACE_FILE, DISCLOSURE_FILE)


def render_summary(summary: RunSummary) -> str:
    return json.dumps(summary.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


def render_findings(findings: Sequence[AuditFinding]) -> str:
    lines = [
        json.dumps(f.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        for f in findings
    ]
    return "\n".join(lines) + "\n" if lines else ""


def render_lines(lines: Sequence[str]) -> str:
    return "\n".join(lines) + "\n" if lines else ""


def write_artifacts(out_dir: Path, contents: Dict[str, str]):
    """Write every artifact; contents are rendered in full before any file is touched"""
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in contents.items():
        (out_dir / name).write_text(text, encoding="utf-8")
