"""Bit-exact file formats and fail-closed configuration loading.

Field files ("PHKF"): magic, u32 version=1, u32 ndim, u64 dims (little
endian), u8 dtype tag (0 = float64, 1 = complex128 interleaved), row-major
little-endian payload.

Table files ("PHKT"): magic, u32 version=1, u64 header length, UTF-8 JSON
header (edge keys, vertex classes, metadata; canonical key order), then
float64 payload arrays (means, covariances, diagonal) in the header's order.

Run configuration is a JSON document mirroring the model spec; unknown keys
anywhere are rejected.
"""

import json
import struct

import numpy as np

from .covariance import CovarianceTable
from .errors import ConfigError, FormatError
from .graph import Edge, ModelSpec, OptimizerSettings, SymmetryGroup
from .wavelets import LOWPASS

FIELD_MAGIC = b"PHKF"
TABLE_MAGIC = b"PHKT"
VERSION = 1


# ----- field files ----------------------------------------------------------

def write_field(path, array):
    array = np.asarray(array)
    if array.ndim < 1:
        raise ConfigError("cannot write a scalar as a field file")
    if np.iscomplexobj(array):
        tag = 1
        payload = np.ascontiguousarray(array, dtype="<c16").tobytes()
    else:
        tag = 0
        payload = np.ascontiguousarray(array, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(FIELD_MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", array.ndim))
        for dim in array.shape:
            fh.write(struct.pack("<Q", dim))
        fh.write(struct.pack("<B", tag))
        fh.write(payload)


def read_field(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != FIELD_MAGIC:
            raise FormatError(f"bad field magic {magic!r}")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise FormatError(f"unsupported field version {version}")
        (ndim,) = struct.unpack("<I", fh.read(4))
        dims = [struct.unpack("<Q", fh.read(8))[0] for _ in range(ndim)]
        (tag,) = struct.unpack("<B", fh.read(1))
        if tag not in (0, 1):
            raise FormatError(f"unknown dtype tag {tag}")
        dtype = "<f8" if tag == 0 else "<c16"
        count = int(np.prod(dims)) if dims else 1
        payload = fh.read()
    expected = count * (8 if tag == 0 else 16)
    if len(payload) != expected:
        raise FormatError(f"payload length {len(payload)} != expected {expected}")
    return np.frombuffer(payload, dtype=dtype).reshape(dims).copy()


# ----- covariance table files -----------------------------------------------

def _channel_to_json(ch):
    return "low" if ch == LOWPASS else [ch[0], ch[1]]


def _channel_from_json(obj):
    if obj == "low":
        return LOWPASS
    return (int(obj[0]), int(obj[1]))


def _key_to_json(key):
    ch, k, ch2, k2, du = key
    return [_channel_to_json(ch), k, _channel_to_json(ch2), k2, [du[0], du[1]]]


def _key_from_json(obj):
    return (
        _channel_from_json(obj[0]),
        int(obj[1]),
        _channel_from_json(obj[2]),
        int(obj[3]),
        (int(obj[4][0]), int(obj[4][1])),
    )


def write_table(path, table):
    edge_keys = sorted(table.cov, key=str)
    classes = sorted(table.means, key=str)
    diag_classes = sorted(table.diag, key=str)
    header = {
        "edges": [_key_to_json(k) for k in edge_keys],
        "vertex_classes": [[_channel_to_json(c), k] for (c, k) in classes],
        "diag_classes": [[_channel_to_json(c), k] for (c, k) in diag_classes],
        "group": table.group.to_dict(),
        "normalized": table.normalized,
        "has_norm_diag": table.norm_diag is not None,
        "source": table.source,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    means = np.array([table.means[c] for c in classes], dtype="<c16")
    cov = np.array([table.cov[k] for k in edge_keys], dtype="<c16")
    diag = np.array([table.diag[c] for c in diag_classes], dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(TABLE_MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(means.tobytes())
        fh.write(cov.tobytes())
        fh.write(diag.tobytes())
        if table.norm_diag is not None:
            norm = np.array([table.norm_diag[c] for c in diag_classes], dtype="<f8")
            fh.write(norm.tobytes())


def read_table(path):
    with open(path, "rb") as fh:
        if fh.read(4) != TABLE_MAGIC:
            raise FormatError("bad table magic")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise FormatError(f"unsupported table version {version}")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode())
        edge_keys = [_key_from_json(e) for e in header["edges"]]
        classes = [(_channel_from_json(c), int(k)) for c, k in header["vertex_classes"]]
        diag_classes = [(_channel_from_json(c), int(k)) for c, k in header["diag_classes"]]
        means = np.frombuffer(fh.read(16 * len(classes)), dtype="<c16")
        cov = np.frombuffer(fh.read(16 * len(edge_keys)), dtype="<c16")
        diag = np.frombuffer(fh.read(8 * len(diag_classes)), dtype="<f8")
        norm_diag = None
        if header["has_norm_diag"]:
            norm = np.frombuffer(fh.read(8 * len(diag_classes)), dtype="<f8")
            norm_diag = dict(zip(diag_classes, norm.tolist()))
    return CovarianceTable(
        means=dict(zip(classes, means.tolist())),
        cov=dict(zip(edge_keys, cov.tolist())),
        diag=dict(zip(diag_classes, diag.tolist())),
        group=SymmetryGroup(**header["group"]),
        normalized=bool(header["normalized"]),
        norm_diag=norm_diag,
        source=header.get("source", ""),
    )


# ----- run configuration ------------------------------------------------------

_GROUP_KEYS = {"rotations", "line_reflection", "sign_change", "central_reflection"}
_MODEL_KEYS = {"name", "J", "Q", "k_min", "k_max", "delta_n", "delta_j", "delta_ell", "group"}
_OPT_KEYS = {"max_iter", "memory", "c1", "c2", "gtol", "eps_ratio", "restarts", "seed"}
_EVAL_KEYS = {"k_lo", "k_hi", "delta_n", "a_max", "j_list", "q_list"}
_TOP_KEYS = {"model", "optimizer", "evaluation", "seed", "restarts", "sample_count"}


def _reject_unknown(mapping, allowed, where):
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)} in {where}")


def parse_config(doc):
    """Validated run configuration from a parsed JSON document (fail-closed)."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration root must be a JSON object")
    _reject_unknown(doc, _TOP_KEYS, "configuration root")
    model_doc = doc.get("model", {})
    if not isinstance(model_doc, dict):
        raise ConfigError("'model' must be an object")
    _reject_unknown(model_doc, _MODEL_KEYS, "'model'")
    group_doc = model_doc.get("group", {})
    _reject_unknown(group_doc, _GROUP_KEYS, "'model.group'")
    opt_doc = doc.get("optimizer", {})
    _reject_unknown(opt_doc, _OPT_KEYS, "'optimizer'")
    eval_doc = doc.get("evaluation", {})
    _reject_unknown(eval_doc, _EVAL_KEYS, "'evaluation'")

    group = SymmetryGroup(**{k: bool(v) for k, v in group_doc.items()})
    optimizer = OptimizerSettings(**opt_doc)
    name = model_doc.get("name", "custom")
    fields = {k: v for k, v in model_doc.items() if k not in ("group", "name")}
    if name.upper() in ("A", "B", "C", "D"):
        from .graph import model_preset

        overrides = dict(fields)
        if group_doc:
            overrides["group"] = group
        spec = model_preset(name, **overrides)
        spec.optimizer = optimizer
    else:
        spec = ModelSpec(name=name, group=group, optimizer=optimizer, **fields).validate()
    if "restarts" in doc:
        spec.optimizer.restarts = int(doc["restarts"])
    if "seed" in doc:
        spec.optimizer.seed = int(doc["seed"])
    return {
        "spec": spec,
        "evaluation": dict(eval_doc),
        "sample_count": int(doc.get("sample_count", 10)),
    }


def load_config(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return parse_config(doc)


def spec_to_json(spec):
    """Round-trippable JSON document of a model spec."""
    return {
        "model": {
            "name": spec.name,
            "J": spec.J,
            "Q": spec.Q,
            "k_min": spec.k_min,
            "k_max": spec.k_max,
            "delta_n": spec.delta_n,
            "delta_j": spec.delta_j,
            "delta_ell": spec.delta_ell,
            "group": spec.group.to_dict(),
        },
        "optimizer": spec.optimizer.to_dict(),
    }


# ----- PGM export -------------------------------------------------------------

def export_pgm(field, path):
    """16-bit binary PGM, min-max scaled, plus a JSON sidecar with (min, max).

    The sidecar makes the scaling invertible up to 16-bit quantization.
    Constant fields map to zero with min = max recorded.
    """
    x = np.asarray(field, dtype=float)
    lo = float(x.min())
    hi = float(x.max())
    if hi > lo:
        scaled = np.rint((x - lo) / (hi - lo) * 65535.0).astype(">u2")
    else:
        scaled = np.zeros(x.shape, dtype=">u2")
    header = f"P5\n{x.shape[1]} {x.shape[0]}\n65535\n".encode()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(scaled.tobytes())
    with open(str(path) + ".json", "w") as fh:
        json.dump({"min": lo, "max": hi}, fh, sort_keys=True)
        fh.write("\n")


def import_pgm(path):
    """Invert :func:`export_pgm` using the sidecar (16-bit quantized)."""
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise FormatError("not a binary PGM file")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 65535:
        raise FormatError("expected a 16-bit PGM")
    payload = parts[4]
    raw = np.frombuffer(payload[: w * h * 2], dtype=">u2").reshape(h, w)
    with open(str(path) + ".json") as fh:
        side = json.load(fh)
    lo, hi = side["min"], side["max"]
    if hi > lo:
        return lo + raw.astype(float) / 65535.0 * (hi - lo)
    return np.full((h, w), lo)


# ----- CSV --------------------------------------------------------------------

def format_float(x):
    """Round-trip safe float formatting (17 significant digits)."""
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = [format_float(c) if isinstance(c, float) else str(c) for c in row]
            fh.write(",".join(cells) + "\n")
