"""
Profiler Controller - architecture sweep report
"""
import csv
import io
import logging
from typing import Optional

from app.repositories.binary_format import write_bytes
from app.services.profiler_service import SweepRow, architecture_sweep

logger = logging.getLogger(__name__)


class ProfilerController:

    def sweep(self, out_path: Optional[str] = None) -> str:
        """CSV text of the sweep (also written to ``out_path`` when given)"""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(SweepRow.HEADER)
        for row in architecture_sweep():
            writer.writerow(row.to_row())

        text = buffer.getvalue()
        if out_path:
            write_bytes(out_path, text.encode())
        return text


profiler_controller = ProfilerController()
