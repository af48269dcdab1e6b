"""Receptive-field table of the detail repair network."""

import logging
from typing import Any, Dict, Sequence

from networks.detail_repair import DetailRepairNetwork
from networks.receptive_field import TABLE_DILATION, impulse_footprint, receptive_field_table
from utils.errors import SemiDRDError, error_result

logger = logging.getLogger(__name__)

VERIFY_DEPTHS = 4
VERIFY_CHANNELS = 4


def format_table(rows) -> str:
    columns = ["depth", "receptive_field", f"table_dilation{TABLE_DILATION}"]
    if rows and "impulse" in rows[0]:
        columns.append("impulse")
    lines = ["\t".join(columns)]
    for row in rows:
        lines.append("\t".join(str(row.get(c, "-")) for c in columns))
    return "\n".join(lines)


def run_inspect_rf(dilations: Sequence[int] = (1, 3, 5), num_blocks: int = 16, verify: bool = False) -> Dict[str, Any]:
    """
    Compute depth -> receptive field for `dilations` next to the dilation-7 column.

    With verify, depths 0..3 are also measured on a real network by impulse
    response and compared to the formula.
    """
    try:
        rows = receptive_field_table(dilations, num_blocks)
        mismatches = []
        if verify:
            network = DetailRepairNetwork(VERIFY_CHANNELS, num_blocks, dilations)
            for row in rows[:VERIFY_DEPTHS]:
                row["impulse"] = impulse_footprint(network, row["depth"])
                if row["impulse"] != row["receptive_field"]:
                    mismatches.append(row["depth"])
            if mismatches:
                logger.warning("Formula and impulse response disagree at depth(s) %s", mismatches)
        return {"success": True, "rows": rows, "table": format_table(rows), "mismatches": mismatches}
    except SemiDRDError as e:
        return error_result(e)
