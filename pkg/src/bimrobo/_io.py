"""YAML loading with JSON-schema validation and line-number context."""

from __future__ import annotations

import json
import os
from importlib import resources
from typing import Any

import jsonschema
import yaml


class InputError(ValueError):
    """Malformed or inconsistent input file."""


class _Loader(yaml.SafeLoader):
    pass


# keep dates as plain strings; they are parsed (and reported) explicitly
_Loader.yaml_implicit_resolvers = {
    k: [(tag, rx) for tag, rx in v if tag != "tag:yaml.org,2002:timestamp"]
    for k, v in yaml.SafeLoader.yaml_implicit_resolvers.items()
}


def data_path(*parts: str) -> str:
    path = resources.files("bimrobo").joinpath("data")
    for part in parts:
        path = path.joinpath(part)
    return str(path)


def load_schema(name: str) -> dict[str, Any]:
    with open(data_path("schemas", f"{name}.schema.json"), encoding="utf-8") as fh:
        return json.load(fh)


def _line_index(node: yaml.Node, path: tuple = (), out: dict | None = None) -> dict:
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            out[path + (k.value,)] = k.start_mark.line + 1
            _line_index(v, path + (k.value,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_index(v, path + (i,), out)
    return out


def format_path(path) -> str:
    s = ""
    for p in path:
        s += f"[{p}]" if isinstance(p, int) else (f".{p}" if s else str(p))
    return s or "<root>"


def load_yaml_validated(path: str | os.PathLike, schema_name: str) -> tuple[dict, dict]:
    """Load and schema-check a YAML document.

    Returns the data and a map from key path tuples to 1-based line numbers.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        node = yaml.compose(text, Loader=_Loader)
        data = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        raise InputError(f"{path}: YAML syntax error: {exc}") from exc
    if data is None:
        data = {}
    lines = _line_index(node) if node is not None else {}
    validator = jsonschema.Draft202012Validator(load_schema(schema_name))
    errors = sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        p = tuple(err.absolute_path)
        line = _nearest_line(lines, p)
        raise InputError(f"{path}:{line}: {format_path(p)}: {err.message}")
    return data, lines


def _nearest_line(lines: dict, p: tuple) -> int:
    while p and p not in lines:
        p = p[:-1]
    return lines.get(p, 1)


def context(path: str, lines: dict, key: tuple) -> str:
    return f"{path}:{_nearest_line(lines, key)}: {format_path(key)}"


def dump_yaml(data: Any, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(data, fh, sort_keys=False, default_flow_style=None, allow_unicode=True)
