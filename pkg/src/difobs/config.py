"""Run configuration: a flat ``key = value`` file merged with command flags.

Grammar (a strict subset of TOML)::

    # comment
    key = 1.5            # float
    key = 300            # integer
    key = "fixed:2"      # string
    key = true           # boolean
    key = [0, 1, 2]      # array of scalars

Keys use underscores (``epsilon_factor``); the matching flag uses dashes
(``--epsilon-factor``). Tables are rejected, as are keys the command does
not know. Precedence: flag, then file, then built-in default.
"""

from dataclasses import dataclass
import math

from .errors import InvalidParameterError

try:  # Python >= 3.11
    import tomllib
except ImportError:  # pragma: no cover
    import tomli as tomllib


@dataclass(frozen=True)
class Param:
    """One configurable key.

    ``kind`` is ``int``, ``float``, ``str``, ``bool``, ``"ints"``/``"floats"``
    (comma-separated on the command line, arrays in the file) or ``"path"``.
    ``check`` returns an error message or ``None``.
    """

    name: str
    kind: object
    default: object = None
    help: str = ""
    check: object = None
    choices: tuple = None
    short: str = None

    @property
    def flag(self):
        return "--" + self.name.replace("_", "-")


def positive(v):
    return None if v > 0 else "must be > 0"


def non_negative(v):
    return None if v >= 0 else "must be >= 0"


def at_least(k):
    return lambda v: None if v >= k else f"must be >= {k}"


def open_unit(v):
    return None if 0 < v < 1 else "must lie in the open interval (0, 1)"


def all_of(check):
    def inner(vals):
        for v in vals:
            msg = check(v)
            if msg:
                return f"entries {msg}"
        return None if vals else "must not be empty"

    return inner


def load_file(path):
    """Parse a flat config file into a dict."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise InvalidParameterError(f"cannot read config {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise InvalidParameterError(f"config {path}: {exc}") from None
    for key, value in data.items():
        if isinstance(value, dict):
            raise InvalidParameterError(f"config {path}: tables are not allowed ([{key}])")
        if isinstance(value, list) and any(isinstance(v, (dict, list)) for v in value):
            raise InvalidParameterError(f"config {path}: {key} must be a flat array")
    return data


def convert(param, value):
    """Coerce a flag string or config value to the parameter's type."""
    kind = param.kind
    try:
        if kind in ("ints", "floats"):
            items = value.split(",") if isinstance(value, str) else list(value) if isinstance(value, (list, tuple)) else [value]
            cast = int if kind == "ints" else float
            out = []
            for v in items:
                if isinstance(v, bool) or (cast is int and isinstance(v, float)):
                    raise ValueError(v)
                out.append(cast(v.strip()) if isinstance(v, str) else cast(v))
            return tuple(out)
        if kind is bool:
            if isinstance(value, bool):
                return value
            if str(value).lower() in ("true", "1", "yes"):
                return True
            if str(value).lower() in ("false", "0", "no"):
                return False
            raise ValueError(value)
        if kind is int:
            if isinstance(value, (bool, float)):
                raise ValueError(value)
            return int(value)
        if kind is float:
            if isinstance(value, bool):
                raise ValueError(value)
            v = float(value)
            if math.isnan(v):
                raise ValueError(value)
            return v
        if isinstance(value, (list, dict, bool)):
            raise ValueError(value)
        return str(value)
    except (TypeError, ValueError):
        name = kind if isinstance(kind, str) else kind.__name__
        raise InvalidParameterError(f"{param.name}: cannot read {value!r} as {name}") from None


def resolve(params, flags, file_values=None, source="config"):
    """Merge flag values (``None`` when absent) over file values over defaults,
    then type-check and range-check every key before anything runs."""
    file_values = dict(file_values or {})
    known = {p.name: p for p in params}
    unknown = sorted(set(file_values) - set(known))
    if unknown:
        raise InvalidParameterError(f"{source}: unknown keys {', '.join(unknown)}")
    out = {}
    for p in params:
        if flags.get(p.name) is not None:
            value = flags[p.name]
        elif p.name in file_values:
            value = file_values[p.name]
        else:
            value = p.default
        if value is not None:
            value = convert(p, value)
            if p.choices is not None and value not in p.choices:
                raise InvalidParameterError(f"{p.name} must be one of {', '.join(map(str, p.choices))}; got {value!r}")
            if p.check is not None:
                msg = p.check(value)
                if msg:
                    raise InvalidParameterError(f"{p.name} {msg}; got {value!r}")
        out[p.name] = value
    return out
