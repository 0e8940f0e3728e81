"""Utility functions for file output, seeding and worker pools."""

import csv
import io
import json
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from . import __version__


def atomic_write(file_path: Path, content: Union[str, bytes]) -> None:
    """Write file atomically to prevent corruption.

    Args:
        file_path: Path to the file to write
        content: Text, or bytes for binary files

    Raises:
        OSError: If file write fails
    """
    directory = file_path.parent

    # Temp file in the same directory keeps the rename on one filesystem
    binary = isinstance(content, bytes)
    fd, temp_path = tempfile.mkstemp(dir=directory, suffix='.tmp', text=not binary)

    try:
        if binary:
            with os.fdopen(fd, 'wb') as f:
                f.write(content)
        else:
            with os.fdopen(fd, 'w', encoding='utf-8', newline='') as f:
                f.write(content)

        if os.name == 'nt' and file_path.exists():
            os.remove(file_path)
        os.rename(temp_path, file_path)

    except Exception as e:
        try:
            os.remove(temp_path)
        except OSError:
            pass
        raise e


def ensure_directory_exists(path: Path) -> None:
    """Create directory if it doesn't exist.

    Args:
        path: Path to the directory

    Raises:
        OSError: If directory creation fails
    """
    if not path.exists():
        path.mkdir(parents=True, mode=0o755)


def format_value(value) -> str:
    """Render a cell so that reruns produce identical bytes."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def render_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """Render rows as CSV text headed by a version comment and column names."""
    buffer = io.StringIO()
    buffer.write(f"# slocc-mbqc-lab {__version__}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    return buffer.getvalue()


def write_csv(file_path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Write a CSV table atomically.

    Args:
        file_path: Destination path
        header: Column names
        rows: Data rows

    Returns:
        The path written
    """
    file_path = Path(file_path)
    ensure_directory_exists(file_path.parent)
    atomic_write(file_path, render_csv(header, rows))
    return file_path


def write_jsonl(file_path: Path, records: Iterable[dict]) -> Path:
    """Write one JSON object per line, atomically."""
    file_path = Path(file_path)
    ensure_directory_exists(file_path.parent)
    lines = [json.dumps(record, sort_keys=True) for record in records]
    atomic_write(file_path, "\n".join(lines) + ("\n" if lines else ""))
    return file_path


def spawn_seeds(master_seed: int, count: int) -> list[int]:
    """Derive independent child seeds from a master seed."""
    children = np.random.SeedSequence(master_seed).spawn(count)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]


def parallel_map(fn: Callable, items: Sequence, threads: int = 1) -> list:
    """Map ``fn`` over ``items`` on a thread pool, preserving input order."""
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
