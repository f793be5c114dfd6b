"""Case configuration files (JSON) and their schema."""
import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import jsonschema

from .errors import ConfigError

__all__ = ["CaseConfig", "schema", "validate", "load_config", "parse_refine"]

_COMMON = ("refine", "quad", "bc_method", "solver", "penalty")


@lru_cache(maxsize=None)
def schema():
    """The case-configuration JSON schema."""
    text = resources.files("isoga").joinpath("schemas/case.schema.json").read_text()
    return json.loads(text)


def _json_path(err):
    path = "$"
    for p in err.absolute_path:
        path += f"[{p}]" if isinstance(p, int) else f".{p}"
    if err.validator == "additionalProperties" and isinstance(err.instance, dict):
        known = set(err.schema.get("properties", {}))
        extra = sorted(k for k in err.instance if k not in known)
        if extra:
            path += f".{extra[0]}"
    return path


def validate(data):
    """Check ``data`` against the schema.

    Raises
    ------
    ConfigError
        First violation (the most deeply nested one), with its JSON path.
    """
    validator = jsonschema.Draft202012Validator(schema())
    errors = list(validator.iter_errors(data))
    if not errors:
        return data
    err = max(errors, key=lambda e: len(e.absolute_path))
    best = jsonschema.exceptions.best_match([err]) or err
    raise ConfigError(best.message, _json_path(best))


@dataclass
class CaseConfig:
    """Validated configuration.

    Attributes
    ----------
    case : str
    overrides : dict
        Parameters passed to the case on top of its defaults.
    output : dict
        ``dir``, ``vtk`` and ``metrics`` settings.
    """

    case: str
    overrides: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)


def load_config(source):
    """Read and validate a configuration file (or an already parsed dict).

    Raises
    ------
    ConfigError
        Unreadable file, invalid JSON or schema violation.
    """
    if isinstance(source, dict):
        data = source
    else:
        try:
            with open(source, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", "$") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}", "$") from exc
    validate(data)
    overrides = dict(data.get("params", {}))
    for k in _COMMON:
        if k in data:
            overrides[k] = data[k]
    return CaseConfig(data["case"], overrides, dict(data.get("output", {})))


def parse_refine(spec):
    """Parse a ``--refine`` flag such as ``h:2``, ``p:1`` or ``k:1``.

    Several directives may be comma separated; for ``k`` the count is the
    number of bisections after a one-step degree raise.

    Raises
    ------
    ConfigError
        Malformed directive.
    """
    steps = []
    for part in spec.split(","):
        kind, _, n = part.strip().partition(":")
        if kind not in ("h", "p", "k") or not n.isdigit():
            raise ConfigError(f"bad refinement directive {part!r}; expected h:N, p:N or k:N", "--refine")
        n = int(n)
        if kind == "h":
            steps.append({"type": "h", "levels": n})
        elif kind == "p":
            steps.append({"type": "p", "by": n})
        else:
            steps.append({"type": "k", "by": 1, "levels": n})
    return steps
