"""Off-ledger disclosure file.

JSON lines of two kinds, in flow order:

    {"kind":"flow", ...manifest}      what the auditing parties know of the flow
    {"kind":"preimage", ...}          one retained record preimage of that flow

A preimage line belongs to the flow with the same flow_id, which must have
appeared earlier in the file.
"""

import json
from typing import Dict, List, Sequence

from pydantic import ValidationError

from src.database.models import DisclosedPreimage, FlowDisclosure, FlowManifest
from src.services.errors import DisclosureParseError

_SEPARATORS = (",", ":")


def dump_disclosures(disclosures: Sequence[FlowDisclosure]) -> str:
    lines = []
    for disclosure in disclosures:
        lines.append(json.dumps(
            {"kind": "flow", **disclosure.manifest.model_dump(mode="json")},
            separators=_SEPARATORS, sort_keys=True,
        ))
        for preimage in disclosure.preimages:
            lines.append(json.dumps(
                {"kind": "preimage", **preimage.model_dump(mode="json")},
                separators=_SEPARATORS, sort_keys=True,
            ))
    return "\n".join(lines) + "\n" if lines else ""


def load_disclosures(text: str) -> List[FlowDisclosure]:
    flows: Dict[str, FlowDisclosure] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            if not isinstance(record, dict):
                raise DisclosureParseError(f"line {number}: expected an object")
            kind = record.pop("kind", None)
            if kind == "flow":
                manifest = FlowManifest(**record)
                if manifest.flow_id in flows:
                    raise DisclosureParseError(f"line {number}: flow {manifest.flow_id} declared twice")
                flows[manifest.flow_id] = FlowDisclosure(manifest=manifest)
            elif kind == "preimage":
                preimage = DisclosedPreimage(**record)
                if preimage.flow_id not in flows:
                    raise DisclosureParseError(f"line {number}: preimage for undeclared flow {preimage.flow_id}")
                flows[preimage.flow_id].preimages.append(preimage)
            else:
                raise DisclosureParseError(f"line {number}: unknown record kind {kind!r}")
        except DisclosureParseError:
            raise
        except (ValueError, TypeError, ValidationError) as e:
            raise DisclosureParseError(f"line {number}: {e}") from e
    return list(flows.values())
