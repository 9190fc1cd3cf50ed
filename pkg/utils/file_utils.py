#!/usr/bin/env python3

import csv
import io
import json
import os
from typing import Any, Iterable, Sequence

from utils.common import normalize_file_path
from utils.errors import DataError

__all__ = [
    "read_text",
    "ensure_directory_exists",
    "write_text_content",
    "csv_text",
    "write_csv",
    "write_json",
]


def read_text(file_path: str, encoding: str = "utf-8") -> str:
    """Read a whole UTF-8 input file.

    Raises:
        DataError: If the path is missing, a directory, or not valid UTF-8
    """
    full_path = normalize_file_path(file_path)
    if not os.path.exists(full_path):
        raise DataError(f"File does not exist: {file_path}")
    if os.path.isdir(full_path):
        raise DataError(f"Path is a directory, not a file: {file_path}")
    try:
        with open(full_path, "r", encoding=encoding) as f:
            return f.read()
    except UnicodeDecodeError as e:
        raise DataError(f"{file_path} is not valid {encoding}: {e}") from e


def ensure_directory_exists(file_path: str) -> None:
    directory = os.path.dirname(file_path)
    if directory and not os.path.exists(directory):
        os.makedirs(directory, exist_ok=True)


def write_text_content(file_path: str, content: str, encoding: str = "utf-8") -> None:
    ensure_directory_exists(file_path)
    with open(file_path, "w", encoding=encoding, newline="") as f:
        f.write(content)


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Render rows as CSV text with LF line endings."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buffer.getvalue()


def write_csv(file_path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    write_text_content(file_path, csv_text(header, rows))
    return file_path


def write_json(file_path: str, data: Any) -> str:
    write_text_content(file_path, json.dumps(data, indent=2, sort_keys=True) + "\n")
    return file_path
