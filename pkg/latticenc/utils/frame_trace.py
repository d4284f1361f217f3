"""
Line-delimited JSON trace of decoder internals (residuals, L-values per iteration).
"""

import threading
from pathlib import Path
from typing import Any

from latticenc.utils.serializers import to_json


class FrameTraceWriter:
    """Appends one JSON object per decoder stage; safe to share between worker threads."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._file = open(self.path, "w")
        self._lock = threading.Lock()
        self.records = 0

    def record(self, **fields: Any) -> None:
        line = to_json(fields)
        with self._lock:
            self._file.write(line + "\n")
            self.records += 1

    def bind(self, **context: Any):
        """A recorder that adds ``context`` (e.g. SNR and frame index) to every record."""

        def recorder(**fields: Any) -> None:
            self.record(**context, **fields)

        return recorder

    def close(self) -> None:
        with self._lock:
            if not self._file.closed:
                self._file.close()

    def __enter__(self) -> "FrameTraceWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
