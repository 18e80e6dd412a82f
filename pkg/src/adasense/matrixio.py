"""Plain-text matrix format.

First line ``rows cols``, then one matrix row per line, values in
17-significant-digit decimal so float64 round-trips exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ConfigError


def format_matrix(a) -> str:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    lines = [f"{a.shape[0]} {a.shape[1]}"]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in a]
    return "\n".join(lines) + "\n"


def write_matrix(path, a) -> None:
    Path(path).write_text(format_matrix(a))


def parse_matrix(text: str, source: str = "<string>") -> np.ndarray:
    tokens = text.split()
    if len(tokens) < 2:
        raise ConfigError(f"{source}: missing 'rows cols' header")
    try:
        rows, cols = int(tokens[0]), int(tokens[1])
        values = np.array([float(t) for t in tokens[2:]])
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    if rows < 0 or cols < 0 or values.size != rows * cols:
        raise ConfigError(f"{source}: header says {rows}x{cols} but found {values.size} values")
    return values.reshape(rows, cols)


def read_matrix(path) -> np.ndarray:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read matrix file {path}: {exc.strerror}") from exc
    return parse_matrix(text, str(path))
