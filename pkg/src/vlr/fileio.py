"""Tiny JSON / JSON-lines helpers with deterministic byte output."""

from __future__ import annotations

import json
from pathlib import Path


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_json(doc, path, sort_keys=True):
    text = json.dumps(doc, indent=2, sort_keys=sort_keys) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def read_jsonl(path):
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def write_jsonl(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def iter_write_jsonl(records, path):
    """Streaming writer: records may be any iterable, memory stays bounded."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
