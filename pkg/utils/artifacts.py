# =============================================================================
# FILE: artifacts.py
# PURPOSE:
#   Writes the text artifacts of a run directory (config.echo, loss.csv,
#   metrics.csv, manifests). Whole files are written to a temporary sibling
#   and renamed into place; loss.csv is appended to row by row.
# =============================================================================

import csv
import io
import logging
import os
import tempfile
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

from utils.errors import ArtifactIOError

logger = logging.getLogger(__name__)


# -----------------------------------------------------------------------------
# FUNCTION: write_text_artifact
# -----------------------------------------------------------------------------
def write_text_artifact(content: str, path: Union[str, Path]) -> Path:
    """
    Writes text to `path`, creating parent directories.

    Args:
        content: Text to be saved to disk.
        path: Destination file.

    Returns:
        The path that was written.

    Raises:
        ArtifactIOError: the directory or file cannot be written.
    """
    if not isinstance(content, str):
        raise ArtifactIOError(f"content must be a string, got {type(content).__name__}")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(content)
        os.replace(tmp_name, path)
    except OSError as e:
        raise ArtifactIOError(f"failed to write {path}: {e}")
    logger.debug("Wrote %s", path)
    return path


def render_csv(fields: Sequence[str], rows: Iterable[Mapping]) -> str:
    """CSV text with a header line and one line per row."""
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(fields), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({key: row[key] for key in fields})
    return buffer.getvalue()


def write_csv_artifact(fields: Sequence[str], rows: Iterable[Mapping], path: Union[str, Path]) -> Path:
    return write_text_artifact(render_csv(fields, rows), path)


# -----------------------------------------------------------------------------
# CLASS: CsvAppender
# -----------------------------------------------------------------------------
class CsvAppender:
    """
    Append-only CSV log. The header is written when the file is new or empty;
    each append is flushed so a crash loses at most the row in flight.
    """

    def __init__(self, path: Union[str, Path], fields: Sequence[str]):
        self.path = Path(path)
        self.fields = list(fields)
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            new = not self.path.exists() or self.path.stat().st_size == 0
            self._file = open(self.path, "a", encoding="utf-8", newline="")
        except OSError as e:
            raise ArtifactIOError(f"failed to open {self.path}: {e}")
        self._writer = csv.DictWriter(self._file, fieldnames=self.fields, lineterminator="\n")
        if new:
            self._writer.writeheader()
            self._file.flush()

    def append(self, row: Mapping) -> None:
        try:
            self._writer.writerow({key: row[key] for key in self.fields})
            self._file.flush()
        except OSError as e:
            raise ArtifactIOError(f"failed to append to {self.path}: {e}")

    def close(self) -> None:
        self._file.close()

    def __enter__(self) -> "CsvAppender":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
