"""Serialization: JSON with 17-significant-digit floats, profile and table
CSVs, all carrying the config hash."""
from __future__ import annotations

import hashlib
import io
import json
import math
from typing import Iterable, Sequence

import numpy as np

from .model import SampledProfile, SolutionRecord


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def _emit(obj, out, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            out.write("{}")
            return
        out.write("{\n")
        for i, (k, v) in enumerate(sorted(obj.items())):
            out.write(f"{pad}{json.dumps(k)}: ")
            _emit(v, out, indent, level + 1)
            out.write(",\n" if i < len(obj) - 1 else "\n")
        out.write(end + "}")
    elif isinstance(obj, list):
        if all(not isinstance(v, (dict, list)) for v in obj):
            out.write("[" + ", ".join(_scalar(v) for v in obj) + "]")
            return
        out.write("[\n")
        for i, v in enumerate(obj):
            out.write(pad)
            _emit(v, out, indent, level + 1)
            out.write(",\n" if i < len(obj) - 1 else "\n")
        out.write(end + "]")
    else:
        out.write(_scalar(obj))


def _scalar(v) -> str:
    if isinstance(v, float):
        return fmt_float(v) if math.isfinite(v) else "null"
    return json.dumps(v)


def dumps(obj, indent: int = 2) -> str:
    """Deterministic JSON: sorted keys, floats as %.17g, non-finite as null."""
    buf = io.StringIO()
    _emit(_plain(obj), buf, indent, 0)
    buf.write("\n")
    return buf.getvalue()


def config_hash(flat_config: dict) -> str:
    canon = json.dumps(_plain(flat_config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def record_dict(record: SolutionRecord, with_profile: bool = False) -> dict:
    d = record.to_dict()
    d.update({k: v for k, v in record.meta.items() if k in ("triviality", "target_nodes")})
    if with_profile and record.profile is not None:
        d["profile"] = {"radii": record.profile.radii, "values": record.profile.values,
                        "derivatives": record.profile.derivatives}
    return d


def csv_table(header: Sequence[str], rows: Iterable[Sequence], chash: str) -> str:
    lines = [f"# config_hash={chash}", ",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, (float, np.floating)):
                cells.append(fmt_float(v) if math.isfinite(v) else "nan")
            elif isinstance(v, (bool, np.bool_)):
                cells.append("true" if v else "false")
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def profile_csv(profile: SampledProfile, chash: str) -> str:
    header = ["r"]
    for j in range(profile.n):
        header += [f"u_{j + 1}", f"du_{j + 1}"]
    cols = [profile.radii]
    for j in range(profile.n):
        cols += [profile.values[j], profile.derivatives[j]]
    return csv_table(header, zip(*cols), chash)


def read_profile_csv(text: str) -> SampledProfile:
    rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    data = np.array([[float(x) for x in ln.split(",")] for ln in rows[1:]])
    n = (data.shape[1] - 1) // 2
    return SampledProfile(data[:, 0], data[:, 1::2].T[:n], data[:, 2::2].T[:n])
