# frontend/config_file.py
"""
TOML run configuration. Sections and keys map onto CLI option names; a key
that is not listed here is a usage error.
"""
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from backend.errors import UsageError

# ---------------------------------------------------------
# SCHEMA: section -> {key: (option name, type)}
# ---------------------------------------------------------
SCHEMA = {
    "kernel": {"family": ("kernel", str), "alpha": ("alpha", float), "d": ("dim", int)},
    "time": {"hurst": ("hurst", float), "T": ("horizon", float)},
    "grid": {"times": ("grid_times", int), "sites": ("grid_sites", int),
             "extent": ("extent", float)},
    "quadrature": {
        "base_rule": ("rule", str),
        "panels_per_axis": ("panels", int),
        "singularity_split": ("singularity_split", bool),
        "rel_tolerance": ("rel_tol", float),
        "max_refinements": ("max_refinements", int),
        "order": ("order", int),
    },
    "simulation": {"draws": ("draws", int), "seed": ("seed", int), "threads": ("threads", int),
                   "mc_samples": ("mc_samples", int)},
    "output": {"format": ("format", str), "path": ("output", str)},
}


def _coerce(value, kind, where):
    if kind is bool:
        if isinstance(value, bool):
            return value
        raise UsageError(f"{where} must be true or false")
    if kind is int and isinstance(value, bool):
        raise UsageError(f"{where} must be an integer")
    try:
        out = kind(value)
    except (TypeError, ValueError):
        raise UsageError(f"{where} must be of type {kind.__name__}, got {value!r}")
    if kind is int and out != value:
        raise UsageError(f"{where} must be an integer, got {value!r}")
    return out


def parse_config_text(text):
    """Flat {option name: value} from config file text."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise UsageError(f"config file is not valid TOML: {e}")
    values = {}
    for section, body in doc.items():
        if section not in SCHEMA:
            raise UsageError(f"unknown config section [{section}]; expected one of "
                             f"{', '.join(SCHEMA)}")
        if not isinstance(body, dict):
            raise UsageError(f"[{section}] must be a table of key = value pairs")
        for key, value in body.items():
            if key not in SCHEMA[section]:
                raise UsageError(f"unknown key {key!r} in [{section}]")
            option, kind = SCHEMA[section][key]
            values[option] = _coerce(value, kind, f"[{section}] {key}")
    return values


def load_config_file(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            return parse_config_text(f.read())
    except OSError as e:
        raise UsageError(f"cannot read config file {path}: {e}")
