"""Configuration documents and CSV/JSON formats.

Config: one JSON object with sections ``receiver``, ``source``, ``channel``,
``sweep``, ``simulation`` and a scalar ``c_EC``. A flat object whose keys
are model field names (``p_Z, d, eta_Z, eta_X, mu, nu, p_mu, ...``) is
accepted too and split into the receiver and source sections.

Stats CSV: header ``intensity_tag,Q_Z,E_X,Q_cross,Q_Z_total,e_Z`` and one
row per tag ``signal``/``decoy``/``vacuum``. The two scalar columns repeat
on every row and must agree.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from passive_bb84.channel import ChannelModel
from passive_bb84.model import (
    INTENSITIES,
    Intensity,
    ObservedStats,
    ReceiverModel,
    SourceModel,
    ValidationError,
    receiver_from_dict,
    source_from_dict,
)
from passive_bb84.sweep import SweepSpec

STATS_COLUMNS = ("intensity_tag", "Q_Z", "E_X", "Q_cross", "Q_Z_total", "e_Z")


@dataclass(frozen=True)
class RunConfig:
    receiver: ReceiverModel
    source: SourceModel
    channel: ChannelModel
    sweep: SweepSpec
    c_EC: float = 1.1
    intensity_probs: tuple[float, float, float] | None = None


def fmt(x: float) -> str:
    """17 significant digits, '.' decimal, no grouping."""
    return f"{x:.17g}"


SECTIONS = frozenset({"receiver", "source", "channel", "sweep", "simulation", "c_EC"})


def preset_text() -> str:
    return resources.files("passive_bb84.presets").joinpath("paper.json").read_text()


def _grid(spec: Any) -> tuple[float, ...]:
    if isinstance(spec, Mapping):
        start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        digits = max(0, -int(math.floor(math.log10(step))) + 2)
        return tuple(round(start + k * step, digits) for k in range(n))
    return tuple(float(v) for v in spec)


def sweep_from_dict(data: Mapping[str, Any]) -> SweepSpec:
    kw: dict[str, Any] = {}
    for key, value in data.items():
        if key in ("lengths", "p_Z_grid", "mu_grid"):
            kw[key] = _grid(value)
        elif key == "variants":
            kw[key] = tuple(value)
        elif key in {f.name for f in fields(SweepSpec)}:
            kw[key] = float(value)
        else:
            raise ValidationError(f"unknown sweep field {key!r}")
    return SweepSpec(**kw)


def config_from_dict(doc: Mapping[str, Any]) -> RunConfig:
    if not isinstance(doc, Mapping):
        raise ValidationError("config must be a JSON object")
    if not set(doc) <= SECTIONS:
        # flat key-value document
        rnames = {f.name for f in fields(ReceiverModel)}
        snames = {f.name for f in fields(SourceModel)}
        unknown = set(doc) - rnames - snames - {"length_km", "e_ch", "c_EC"}
        if unknown:
            raise ValidationError(f"unknown config keys {sorted(unknown)}")
        doc = {
            "receiver": {k: v for k, v in doc.items() if k in rnames},
            "source": {k: v for k, v in doc.items() if k in snames},
            "channel": {k: doc[k] for k in ("length_km", "e_ch") if k in doc},
            **({"c_EC": doc["c_EC"]} if "c_EC" in doc else {}),
        }
    receiver = receiver_from_dict(doc.get("receiver", {}))
    source = source_from_dict(doc.get("source", {}))
    ch = doc.get("channel", {})
    channel = ChannelModel(float(ch.get("length_km", 0.0)), float(ch.get("e_ch", 0.03)))
    sweep = sweep_from_dict(doc.get("sweep", {}))
    probs = doc.get("simulation", {}).get("intensity_probs")
    return RunConfig(
        receiver,
        source,
        channel,
        sweep,
        float(doc.get("c_EC", 1.1)),
        tuple(float(p) for p in probs) if probs is not None else None,
    )


def load_config(path: str | Path | None) -> RunConfig:
    """Read a config file; ``None`` gives the bundled preset."""
    text = preset_text() if path is None else Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed config JSON: {exc}") from exc
    if path is not None and isinstance(doc, dict) and set(doc) <= SECTIONS:
        # sections left out of a sectioned document come from the preset
        doc = {**json.loads(preset_text()), **doc}
    try:
        return config_from_dict(doc)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed config: {exc!r}") from exc


def stats_to_csv(obs: ObservedStats) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STATS_COLUMNS)
    for tag in INTENSITIES:
        w.writerow([
            tag.value,
            fmt(obs.Q_Z_given[tag]),
            fmt(obs.E_X_given[tag]),
            fmt(obs.Q_cross_given[tag]),
            fmt(obs.Q_Z_total),
            fmt(obs.e_Z),
        ])
    return buf.getvalue()


def stats_from_csv(text: str) -> ObservedStats:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or tuple(reader.fieldnames) != STATS_COLUMNS:
        raise ValidationError(f"stats CSV header must be {','.join(STATS_COLUMNS)}")
    qz, ex, qc, scalars = {}, {}, {}, set()
    try:
        for row in reader:
            tag = Intensity(row["intensity_tag"].strip())
            if tag in qz:
                raise ValidationError(f"duplicate row for {tag.value}")
            qz[tag] = float(row["Q_Z"])
            ex[tag] = float(row["E_X"])
            qc[tag] = float(row["Q_cross"])
            scalars.add((float(row["Q_Z_total"]), float(row["e_Z"])))
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed stats CSV: {exc}") from exc
    if set(qz) != set(INTENSITIES):
        raise ValidationError("stats CSV needs rows for signal, decoy and vacuum")
    if len(scalars) != 1:
        raise ValidationError("Q_Z_total and e_Z must be identical on every row")
    (q_total, e_z), = scalars
    return ObservedStats(qz, ex, qc, q_total, e_z)


def load_stats(path: str | Path) -> ObservedStats:
    return stats_from_csv(Path(path).read_text())


def _jsonable(x: Any) -> Any:
    if isinstance(x, dict):
        return {(k.value if isinstance(k, Intensity) else str(k)): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, Intensity):
        return x.value
    return x


def to_json(obj: Any) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True)
