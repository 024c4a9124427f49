"""JSON network documents and the binary weight file format.

Network document::

    {"version": 1, "name": "...", "fps": null, "continual": false,
     "input": {"channels": 3, "height": 56, "width": 56},
     "layers": [{"kind": "conv3d", ...}, ...]}

Parsing is strict: unknown fields, missing required fields and wrong types
are rejected with the JSON path of the offending record.

Weight file: one JSON header line ``{"entries": [{"name", "shape",
"dtype": "f32"}, ...]}``, a newline, then the little-endian float32 payload of
every entry in header order.
"""

from __future__ import annotations

import json
import warnings
from pathlib import Path
from typing import Any

import numpy as np

from .conv import ConvSpec
from .layers import NormSpec, PoolSpec, SEParams
from .network import (
    ActivationSpec,
    GlobalPoolSpec,
    LinearSpec,
    NetworkSpec,
    ResidualBlock,
    init_parameters,
    parameters,
)
from .tensor import DimSpec

FORMAT_VERSION = 1
WEIGHT_DTYPE = np.dtype("<f4")


class SpecError(ValueError):
    """Malformed network document."""


class WeightFileError(ValueError):
    """Malformed weight file or weights that do not fit the network."""


# -- field schemas ---------------------------------------------------------------

_TRIPLE = "triple"
# kind -> {field: (type, default)}; default ... marks a required field
_SCHEMAS: dict[str, dict[str, tuple[Any, Any]]] = {
    "conv3d": {
        "in_channels": (int, ...),
        "out_channels": (int, ...),
        "kernel": (_TRIPLE, ...),
        "stride": (_TRIPLE, [1, 1, 1]),
        "dilation": (_TRIPLE, [1, 1, 1]),
        "padding": (_TRIPLE, [0, 0, 0]),
        "groups": (int, 1),
        "bias": (bool, False),
    },
    "pool": {
        "mode": (str, "avg"),
        "kernel": (_TRIPLE, ...),
        "stride": (_TRIPLE, [1, 1, 1]),
        "dilation": (_TRIPLE, [1, 1, 1]),
        "padding": (_TRIPLE, [0, 0, 0]),
    },
    "activation": {"fn": (str, ...)},
    "norm": {"channels": (int, ...), "eps": (float, 1e-5)},
    "se": {"channels": (int, ...), "hidden": (int, ...), "act": (str, "relu"), "temporal": (bool, False)},
    "residual_block": {
        "inner": (list, ...),
        "shortcut": (list, []),
        "activation": ((str, type(None)), None),
        "delay": ((int, type(None)), None),
    },
    "global_pool": {"temporal_kernel": (int, 1), "mode": (str, "avg")},
    "linear": {"in_features": (int, ...), "out_features": (int, ...), "bias": (bool, True)},
}


def _check_type(value, typ, where: str):
    if typ == _TRIPLE:
        if not (isinstance(value, list) and len(value) == 3 and all(_is_int(v) for v in value)):
            raise SpecError(f"{where}: expected a list of three integers, got {value!r}")
        return [int(v) for v in value]
    if typ is int:
        if not _is_int(value):
            raise SpecError(f"{where}: expected an integer, got {value!r}")
        return int(value)
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SpecError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if typ == (int, type(None)):
        return None if value is None else _check_type(value, int, where)
    if not isinstance(value, typ) or (typ is int and isinstance(value, bool)):
        raise SpecError(f"{where}: expected {getattr(typ, '__name__', typ)}, got {value!r}")
    return value


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _fields(record: dict, schema: dict, where: str, extra=("kind", "name")) -> dict:
    unknown = set(record) - set(schema) - set(extra)
    if unknown:
        raise SpecError(f"{where}: unknown field(s) {sorted(unknown)}")
    out = {}
    for key, (typ, default) in schema.items():
        if key in record:
            out[key] = _check_type(record[key], typ, f"{where}.{key}")
        elif default is ...:
            raise SpecError(f"{where}: missing required field {key!r}")
        else:
            out[key] = default
    return out


def _dims(kernel, stride, dilation, padding) -> list[DimSpec]:
    return [DimSpec(*vals) for vals in zip(kernel, stride, dilation, padding)]


def _parse_layer(record, where: str):
    if not isinstance(record, dict):
        raise SpecError(f"{where}: layer must be an object")
    kind = record.get("kind")
    if kind not in _SCHEMAS:
        raise SpecError(f"{where}: unknown layer kind {kind!r}; expected one of {sorted(_SCHEMAS)}")
    name = record.get("name", "")
    if not isinstance(name, str):
        raise SpecError(f"{where}.name: expected a string")
    f = _fields(record, _SCHEMAS[kind], where)
    try:
        if kind == "conv3d":
            t, h, w = _dims(f["kernel"], f["stride"], f["dilation"], f["padding"])
            return ConvSpec(
                f["in_channels"], f["out_channels"], t, h, w, groups=f["groups"], has_bias=f["bias"], name=name
            )
        if kind == "pool":
            t, h, w = _dims(f["kernel"], f["stride"], f["dilation"], f["padding"])
            return PoolSpec(f["mode"], t, h, w, name=name)
        if kind == "activation":
            return ActivationSpec(f["fn"], name=name)
        if kind == "norm":
            norm = NormSpec.identity(f["channels"], eps=f["eps"], name=name)
            return norm
        if kind == "se":
            return SEParams.zeros(f["channels"], f["hidden"], act=f["act"], temporal=f["temporal"], name=name)
        if kind == "residual_block":
            inner = [_parse_layer(r, f"{where}.inner[{i}]") for i, r in enumerate(f["inner"])]
            shortcut = [_parse_layer(r, f"{where}.shortcut[{i}]") for i, r in enumerate(f["shortcut"])]
            return ResidualBlock(inner, shortcut, f["activation"], f["delay"], name=name)
        if kind == "global_pool":
            return GlobalPoolSpec(f["temporal_kernel"], f["mode"], name=name)
        return LinearSpec(f["in_features"], f["out_features"], has_bias=f["bias"], name=name)
    except SpecError:
        raise
    except ValueError as exc:
        raise SpecError(f"{where}: {exc}") from None


def parse_spec(document: dict | str) -> NetworkSpec:
    """Build a NetworkSpec (zero parameters) from a document or its JSON text."""
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SpecError(f"invalid JSON: {exc}") from None
    if not isinstance(document, dict):
        raise SpecError("document must be a JSON object")
    top = {
        "version": (int, ...),
        "input": (dict, ...),
        "layers": (list, ...),
        "name": (str, ""),
        "fps": ((float, int, type(None)), None),
        "continual": (bool, False),
    }
    f = _fields(document, top, "$", extra=())
    if f["version"] != FORMAT_VERSION:
        raise SpecError(f"$.version: unsupported version {f['version']}")
    dims = _fields(f["input"], {k: (int, ...) for k in ("channels", "height", "width")}, "$.input", extra=())
    layers = [_parse_layer(r, f"$.layers[{i}]") for i, r in enumerate(f["layers"])]
    try:
        return NetworkSpec(
            (dims["channels"], dims["height"], dims["width"]),
            layers,
            fps=f["fps"],
            name=f["name"],
            continual=f["continual"],
        )
    except ValueError as exc:
        raise SpecError(str(exc)) from None


def _triple(dims, attr) -> list[int]:
    return [getattr(d, attr) for d in dims]


def _layer_record(layer) -> dict:
    rec: dict[str, Any] = {"kind": layer.kind, "name": layer.name}
    if isinstance(layer, (ConvSpec, PoolSpec)):
        dims = (layer.temporal, layer.spatial_h, layer.spatial_w)
        if isinstance(layer, ConvSpec):
            rec.update(in_channels=layer.in_channels, out_channels=layer.out_channels)
        else:
            rec["mode"] = layer.mode
        for attr in ("kernel", "stride", "dilation", "padding"):
            rec[attr] = _triple(dims, attr)
        if isinstance(layer, ConvSpec):
            rec.update(groups=layer.groups, bias=layer.has_bias)
    elif isinstance(layer, ActivationSpec):
        rec["fn"] = layer.fn
    elif isinstance(layer, NormSpec):
        rec.update(channels=layer.channels, eps=layer.eps)
    elif isinstance(layer, SEParams):
        rec.update(channels=layer.channels, hidden=layer.hidden, act=layer.act, temporal=layer.temporal)
    elif isinstance(layer, ResidualBlock):
        rec.update(
            inner=[_layer_record(x) for x in layer.inner],
            shortcut=[_layer_record(x) for x in layer.shortcut],
            activation=layer.activation,
            delay=layer.delay,
        )
    elif isinstance(layer, GlobalPoolSpec):
        rec.update(temporal_kernel=layer.temporal_kernel, mode=layer.mode)
    elif isinstance(layer, LinearSpec):
        rec.update(in_features=layer.in_features, out_features=layer.out_features, bias=layer.has_bias)
    else:
        raise TypeError(f"cannot serialise {type(layer).__name__}")
    return rec


def spec_to_document(net: NetworkSpec) -> dict:
    c, h, w = net.input_shape
    return {
        "version": FORMAT_VERSION,
        "name": net.name,
        "fps": net.fps,
        "continual": net.continual,
        "input": {"channels": c, "height": h, "width": w},
        "layers": [_layer_record(layer) for layer in net.layers],
    }


def dumps_spec(net: NetworkSpec) -> str:
    return json.dumps(spec_to_document(net), indent=2) + "\n"


def load_spec(path: str | Path) -> NetworkSpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc.strerror}") from None
    return parse_spec(text)


def save_spec(path: str | Path, net: NetworkSpec) -> None:
    Path(path).write_text(dumps_spec(net))


# -- weight files -----------------------------------------------------------------


def write_weights(path: str | Path, tensors: dict[str, np.ndarray]) -> None:
    entries = [{"name": k, "shape": list(np.shape(v)), "dtype": "f32"} for k, v in tensors.items()]
    with open(path, "wb") as fh:
        fh.write(json.dumps({"entries": entries}).encode() + b"\n")
        for value in tensors.values():
            fh.write(np.ascontiguousarray(value, dtype=WEIGHT_DTYPE).tobytes())


def read_weights(path: str | Path) -> dict[str, np.ndarray]:
    """Entries of a weight file, in file order, as float32 arrays."""
    with open(path, "rb") as fh:
        blob = fh.read()
    newline = blob.find(b"\n")
    if newline < 0:
        raise WeightFileError(f"{path}: missing header line")
    try:
        header = json.loads(blob[:newline])
        entries = header["entries"]
    except (ValueError, KeyError, TypeError):
        raise WeightFileError(f"{path}: header is not a valid entries object") from None
    if set(header) != {"entries"}:
        raise WeightFileError(f"{path}: unknown header field(s) {sorted(set(header) - {'entries'})}")
    out: dict[str, np.ndarray] = {}
    offset = newline + 1
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or set(entry) != {"name", "shape", "dtype"}:
            raise WeightFileError(f"{path}: entry {i} must have exactly name, shape and dtype")
        name, shape = entry["name"], entry["shape"]
        if entry["dtype"] != "f32":
            raise WeightFileError(f"{path}: entry {name!r} has unsupported dtype {entry['dtype']!r}")
        if not isinstance(shape, list) or not all(_is_int(d) and d >= 0 for d in shape):
            raise WeightFileError(f"{path}: entry {name!r} has invalid shape {shape!r}")
        if name in out:
            raise WeightFileError(f"{path}: duplicate entry name {name!r}")
        nbytes = int(np.prod(shape, dtype=np.int64)) * WEIGHT_DTYPE.itemsize
        if offset + nbytes > len(blob):
            raise WeightFileError(
                f"{path}: truncated payload in entry {name!r} "
                f"(needs {nbytes} bytes, {len(blob) - offset} left)"
            )
        out[name] = np.frombuffer(blob, WEIGHT_DTYPE, nbytes // 4, offset).reshape(shape).astype(np.float32)
        offset += nbytes
    if offset != len(blob):
        raise WeightFileError(f"{path}: {len(blob) - offset} trailing bytes after last entry")
    return out


def network_weights(net: NetworkSpec) -> dict[str, np.ndarray]:
    return {entry: getattr(layer, attr) for entry, layer, attr in parameters(net)}


def save_weights(path: str | Path, net: NetworkSpec) -> None:
    write_weights(path, network_weights(net))


def load_weights(path: str | Path, net: NetworkSpec, seed: int = 0) -> NetworkSpec:
    """Install weights from ``path`` into ``net`` (in place; also returned).

    Entries absent from the file get the seeded uniform initialisation of
    ``init_parameters`` and trigger a warning.
    """
    tensors = read_weights(path)
    slots = {entry: (layer, attr) for entry, layer, attr in parameters(net)}
    unknown = [name for name in tensors if name not in slots]
    if unknown:
        raise WeightFileError(f"{path}: entries not in network: {unknown}")
    for name, value in tensors.items():
        layer, attr = slots[name]
        expected = getattr(layer, attr).shape
        if value.shape != expected:
            raise WeightFileError(
                f"{path}: layer {layer.name!r} parameter {name!r} has shape "
                f"{tuple(value.shape)} in file but {tuple(expected)} in network"
            )
    missing = {name for name in slots if name not in tensors}
    if missing:
        warnings.warn(
            f"{len(missing)} parameter(s) missing from {path}; using seeded init: {sorted(missing)[:5]}",
            stacklevel=2,
        )
        init_parameters(net, seed, names=missing)
    for name, value in tensors.items():
        layer, attr = slots[name]
        setattr(layer, attr, value)
    return net
