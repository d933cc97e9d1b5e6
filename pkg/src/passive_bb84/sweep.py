"""Distance sweeps with exhaustive (p_Z, mu) grid optimization."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from passive_bb84.channel import ChannelModel, active_expected_stats, expected_stats
from passive_bb84.keyrate import RateReport, active_rate, passive_rate
from passive_bb84.model import ReceiverModel, SourceModel, ValidationError

VARIANTS = ("active", "passive_r1", "passive_r0.5", "virtual")
CSV_COLUMNS = ("length_km", "variant", "p_Z", "mu", "R", "valid", "h_arg")


def default_p_Z_grid() -> tuple[float, ...]:
    return tuple(round(0.5 + 0.01 * k, 2) for k in range(50))


def default_mu_grid() -> tuple[float, ...]:
    return tuple(round(0.05 * k, 2) for k in range(1, 21))


def default_lengths() -> tuple[float, ...]:
    return tuple(float(l) for l in range(0, 255, 5))


@dataclass(frozen=True)
class SweepSpec:
    lengths: tuple[float, ...] = field(default_factory=default_lengths)
    p_Z_grid: tuple[float, ...] = field(default_factory=default_p_Z_grid)
    mu_grid: tuple[float, ...] = field(default_factory=default_mu_grid)
    nu: float = 0.05
    d: float = 1e-7
    eta_det: float = 0.7
    e_ch: float = 0.03
    c_EC: float = 1.1
    variants: tuple[str, ...] = VARIANTS

    def __post_init__(self) -> None:
        if not (self.lengths and self.p_Z_grid and self.mu_grid):
            raise ValidationError("sweep grids must be nonempty")
        if min(self.p_Z_grid) < 0.5 or max(self.p_Z_grid) > 0.99:
            raise ValidationError("p_Z grid must lie within [0.5, 0.99]")
        unknown = set(self.variants) - set(VARIANTS)
        if unknown:
            raise ValidationError(f"unknown variants {sorted(unknown)}")
        object.__setattr__(self, "p_Z_grid", tuple(sorted(self.p_Z_grid)))
        object.__setattr__(self, "mu_grid", tuple(sorted(self.mu_grid)))


@dataclass(frozen=True)
class SweepRow:
    length_km: float
    variant: str
    p_Z: float
    mu: float
    R: float
    valid: bool
    h_arg: float
    gap_to_active: float = math.nan


def _r_of(variant: str) -> float:
    return 0.5 if variant == "passive_r0.5" else 1.0


def evaluate(length_km: float, p_Z: float, mu: float, spec: SweepSpec, variant: str) -> RateReport:
    """One grid point: channel, decoy bounds and rate for a variant."""
    r = _r_of(variant)
    m = ReceiverModel(p_Z=p_Z, d=spec.d, eta_Z=spec.eta_det, eta_X=spec.eta_det * r)
    src = SourceModel(mu=mu, nu=spec.nu, p_Z_alice=p_Z)
    ch = ChannelModel(length_km, spec.e_ch)
    if variant == "active":
        return active_rate(active_expected_stats(ch, m, src), src, spec.c_EC)
    obs = expected_stats(ch, m, src)
    return passive_rate(obs, m, src, spec.c_EC, virtual=variant == "virtual")


def optimize_point(length_km: float, spec: SweepSpec, variant: str) -> SweepRow:
    """Grid argmax of R; ties go to smaller p_Z, then smaller mu."""
    best: tuple[float, float, RateReport] | None = None
    for p_Z in spec.p_Z_grid:
        for mu in spec.mu_grid:
            if mu <= spec.nu:
                continue
            rep = evaluate(length_km, p_Z, mu, spec, variant)
            if rep.valid and (best is None or rep.R > best[2].R):
                best = (p_Z, mu, rep)
    if best is None:
        return SweepRow(length_km, variant, math.nan, math.nan, 0.0, False, math.nan)
    p_Z, mu, rep = best
    return SweepRow(length_km, variant, p_Z, mu, rep.R, True, rep.h_arg)


def _task(args: tuple[float, SweepSpec, str]) -> SweepRow:
    return optimize_point(*args)


def sweep(spec: SweepSpec, workers: int | None = 1) -> list[SweepRow]:
    """One row per (length, variant), ordered by length then variant."""
    tasks = [(l, spec, v) for l in spec.lengths for v in spec.variants]
    if workers == 1:
        rows = [_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_task, tasks, chunksize=4))
    active = {row.length_km: row.R for row in rows if row.variant == "active"}
    out = []
    for row in rows:
        ref = active.get(row.length_km)
        gap = (ref - row.R) / ref if ref else math.nan
        out.append(replace(row, gap_to_active=gap))
    return out


def _fmt(x: float) -> str:
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(float(f"{x:.17g}"))
    return str(x)


def rows_to_csv(rows: Iterable[SweepRow], columns: Sequence[str] = CSV_COLUMNS) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(getattr(row, c)) for c in columns])
    return buf.getvalue()
