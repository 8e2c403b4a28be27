"""Parameter documents, contract lists and atomic output files."""

from __future__ import annotations

import csv
import dataclasses
import datetime as _dt
import hashlib
import io
import json
import os
import platform
import tempfile
from importlib import metadata
from importlib.resources import files as _resource_files
from pathlib import Path

from .model import TABLE1_MATURITIES, InvalidParameters, ModelParams, validate_params
from .term_structure import ContractSpec

BUILTIN_PARAMS = {"table1": "table1.json"}

_FIELDS = {f.name for f in dataclasses.fields(ModelParams)}
_REQUIRED = {f.name for f in dataclasses.fields(ModelParams)
             if f.default is dataclasses.MISSING}


def params_from_dict(doc: dict) -> ModelParams:
    """Build and validate params from a flat key-value document."""
    if not isinstance(doc, dict):
        raise InvalidParameters([f"parameter document must be an object, got {type(doc).__name__}"])
    errors = [f"unknown parameter key {k!r}" for k in sorted(set(doc) - _FIELDS)]
    errors += [f"missing parameter key {k!r}" for k in sorted(_REQUIRED - set(doc))]
    if errors:
        raise InvalidParameters(errors)
    kwargs = dict(doc)
    if "x0" in kwargs:
        x0 = kwargs["x0"]
        if not isinstance(x0, (list, tuple)) or len(x0) != 3:
            raise InvalidParameters([f"x0 must be a list of three numbers, got {x0!r}"])
        kwargs["x0"] = tuple(float(v) for v in x0)
    return validate_params(ModelParams(**kwargs))


def load_params(source: str | os.PathLike | None) -> ModelParams:
    """Load params from a JSON file, or a built-in set by name (``table1``)."""
    if source is None:
        source = "table1"
    if str(source) in BUILTIN_PARAMS:
        text = _resource_files("mctou.data").joinpath(BUILTIN_PARAMS[str(source)]).read_text()
    else:
        path = Path(source)
        if not path.is_file():
            raise InvalidParameters([f"parameter file not found: {path}"])
        text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidParameters([f"parameter file is not valid JSON: {exc}"]) from exc
    return params_from_dict(doc)


def parse_contracts(text: str) -> tuple[ContractSpec, ...]:
    """Parse ``T1,T3`` or ``0.25,0.5`` into contract specs."""
    contracts = []
    for item in (s.strip() for s in text.split(",")):
        if not item:
            raise ValueError(f"empty entry in contract list {text!r}")
        if item.upper() in TABLE1_MATURITIES:
            contracts.append(ContractSpec(TABLE1_MATURITIES[item.upper()], item.upper()))
            continue
        try:
            maturity = float(item)
        except ValueError:
            raise ValueError(f"contract {item!r} is neither T1/T2/T3 nor a year fraction") from None
        contracts.append(ContractSpec(maturity, item))
    return tuple(contracts)


def csv_text(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("mctou", "numpy", "scipy"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = "unknown"
    return out


def write_manifest(out_dir: Path, *, command: str, argv: list[str], config: dict,
                   params: ModelParams | None, outputs: dict[str, str]) -> Path:
    """Record config, params, versions and output checksums beside the outputs."""
    manifest = {
        "command": command,
        "argv": list(argv),
        "config": config,
        "params": params.to_dict() if params is not None else None,
        "versions": versions(),
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "outputs": {
            name: hashlib.sha256(text.encode()).hexdigest() for name, text in sorted(outputs.items())
        },
    }
    path = Path(out_dir) / f"manifest-{command}.json"
    write_atomic(path, json_text(manifest))
    return path
