import json
from enum import Enum
from fractions import Fraction

import pandas as pd


def _plain_value(value):
    if hasattr(value, "__canonical__"):
        return _plain_value(value.__canonical__())
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (bytes, bytearray)):
        return bytes(value).hex()
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, dict):
        return {_key(k): _plain_value(v) for k, v in value.items()}
    if isinstance(value, (set, frozenset)):
        return sorted(_plain_value(v) for v in value)
    if isinstance(value, (list, tuple)):
        return [_plain_value(v) for v in value]
    return value


def _key(key):
    plain = _plain_value(key)
    return plain if isinstance(plain, str) else json.dumps(plain)


def to_plain(data):
    """
    Render a protocol value as compact, key-sorted JSON text

    Args:
        data: Event body, public record or any protocol value

    Returns:
        Single-line string
    """
    return json.dumps(_plain_value(data), sort_keys=True, separators=(",", ":"), default=str)


def export_to_tsv(data, path=None):
    """
    Export tabular data as tab-separated text

    Args:
        data: Data to export (can be DataFrame or list of dictionaries)
        path: Output file; None returns the text

    Returns:
        TSV text
    """
    if isinstance(data, list):
        df = pd.DataFrame(data)
    else:
        df = data

    tsv = df.to_csv(sep="\t", index=False, float_format="%.6f", lineterminator="\n")
    if path is not None:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(tsv)
    return tsv


def export_to_json(data, path=None):
    """Export a record as indented JSON"""
    jsonstr = json.dumps(_plain_value(data), indent=4, sort_keys=True, default=str)
    if path is not None:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(jsonstr + "\n")
    return jsonstr


def summary_block(title, pairs):
    """
    Key/value block printed after a run

    Args:
        title: Block heading
        pairs: Iterable of (key, value)

    Returns:
        Text with one ``key<TAB>value`` line per pair
    """
    lines = [f"# {title}"]
    for key, value in pairs:
        if isinstance(value, float):
            value = f"{value:.6f}"
        lines.append(f"{key}\t{value}")
    return "\n".join(lines) + "\n"


def generate_report_text(title, results, tables=None):
    """
    Generate a complete plain-text report

    Args:
        title: Report title
        results: Dictionary of headline results
        tables: Dictionary of name -> DataFrame (optional)

    Returns:
        Report as string
    """
    text = summary_block(title, results.items())
    for name, df in (tables or {}).items():
        text += f"\n# {name}\n"
        text += export_to_tsv(df)
    return text
