"""
Custom logging handler to capture logs for specific verification runs.
"""

import logging
from datetime import datetime
from typing import List, Dict

from backend.config import MAX_CAPTURED_LOGS


class LogCaptureHandler(logging.Handler):
    """Captures log messages for a specific run"""

    # per-node and per-level chatter from the search
    skip_patterns = [
        "Expanding node",
        "Eliminated",
        "frontier node(s)",
    ]

    def __init__(self, run_id: str, logs_store: Dict[str, List[dict]], limit: int = MAX_CAPTURED_LOGS):
        """
        Initialize the log capture handler.

        Args:
            run_id: The run ID to capture logs for
            logs_store: Shared dictionary to store logs for all runs
            limit: Number of most recent entries kept per run
        """
        super().__init__()
        self.run_id = run_id
        self.logs_store = logs_store
        self.limit = limit

        if run_id not in self.logs_store:
            self.logs_store[run_id] = []

    def emit(self, record: logging.LogRecord):
        try:
            message = record.getMessage()

            if any(pattern in message for pattern in self.skip_patterns):
                return

            log_entry = {
                "timestamp": datetime.now().isoformat(),
                "level": record.levelname,
                "message": message
            }

            entries = self.logs_store[self.run_id]
            entries.append(log_entry)
            if len(entries) > self.limit:
                entries.pop(0)

        except Exception:
            # Don't raise exceptions in logging handler
            self.handleError(record)
