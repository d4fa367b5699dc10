# frontend/output.py
"""CSV/JSON writers. Files are written to a temp file and renamed into place."""
import json
import math
import os
import sys
import tempfile

from functools import lru_cache

import jsonschema
import numpy as np
import pandas as pd

from backend.errors import SchemaViolation

FLOAT_FORMAT = "%.17g"
SCHEMA_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), "output_schema.json")


def _plain(value):
    """JSON-safe copy: numpy scalars and arrays unwrapped, non-finite floats as strings."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isfinite(value):
            return value
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, pd.DataFrame):
        return _plain(value.to_dict(orient="records"))
    return value


@lru_cache(maxsize=1)
def load_schema():
    with open(SCHEMA_PATH, "r", encoding="utf-8") as f:
        return json.load(f)


def validate_document(doc):
    """Raise SchemaViolation unless ``doc`` (already plain) matches output_schema.json."""
    try:
        jsonschema.validate(instance=doc, schema=load_schema())
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise SchemaViolation(f"output document invalid at {where}: {e.message}") from e
    return doc


def render_json(payload):
    doc = validate_document(_plain(payload))
    # repr of a float is its shortest round-trip form (at most 17 digits)
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def render_csv(frame, inputs):
    """Input echo as leading '# key=value' lines, then the table."""
    lines = [f"# {k}={_plain(v)}" for k, v in inputs.items()]
    body = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return "\n".join(lines) + ("\n" if lines else "") + body


def scalar_frame(result):
    """One-row table from a (possibly nested) result dict."""
    return pd.json_normalize(_plain(result), sep=".")


def write_text(text, path=None):
    if path in (None, "", "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
        return None
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".fracheat-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    return path


def write_output(payload, frame, fmt="json", path=None):
    """payload is the full JSON document; frame is its tabular view for CSV."""
    if fmt == "json":
        return write_text(render_json(payload), path)
    return write_text(render_csv(frame, payload.get("inputs", {})), path)
