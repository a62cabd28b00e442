"""
Shared text-record helpers.

Trajectory files, buffer snapshots and metric logs share one convention: a
single header line of comma-separated `key=value` tokens led by a record tag,
then comma-separated rows with reals printed to 17 significant digits.
軌跡ファイル・バッファスナップショット・指標 CSV の共通書式。
"""

import json
import os
from pathlib import Path


def format_real(value):
    """Formats a real with 17 significant digits (round-trips float64 exactly)."""
    return format(float(value), ".17g")


def format_row(values):
    return ",".join(format_real(v) for v in values)


def format_header(tag, fields):
    """Returns '#tag,key=value,...' for the given ordered fields."""
    return ",".join([f"#{tag}"] + [f"{key}={value}" for key, value in fields.items()])


def parse_header(line, tag):
    """
    Parses a header written by format_header().

    Raises:
        ValueError: If the tag does not match.
    """
    tokens = line.strip().split(",")
    if not tokens or tokens[0] != f"#{tag}":
        raise ValueError(f"expected a '#{tag}' header line, got: {line.strip()[:60]}")
    fields = {}
    for token in tokens[1:]:
        key, _, value = token.partition("=")
        fields[key] = value
    return fields


def write_text_atomic(path, text):
    """Writes text to path through a temporary file and a rename."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    os.replace(tmp, path)


def write_json_atomic(path, data):
    write_text_atomic(path, json.dumps(data, indent=2, ensure_ascii=False) + "\n")


def load_json(path):
    """
    Loads a JSON file.

    JSON ファイルを読み込む。
    """
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)
