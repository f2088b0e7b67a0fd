"""On-disk formats.

- pulse-train record: first line ``T K``, then K lines ``c d r tau``
  (17 significant digits, so float64 values round-trip bit-exact)
- firing times: header ``# b kappa delta horizon``, one timestamp per
  line with 12 fractional digits
- ECG record: CSV with header ``time_s,voltage``, strictly increasing
  and uniformly spaced time column
- heart-rate series: CSV with header ``t_s,bpm``
- reconstruction result: JSON with the parameter table, diagnostics
  block, and the coefficient vector as (m, re, im) triples
- experiment config: ``key = value`` lines, ``#`` comments
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, PreconditionError
from .model import FourierCoeffs, VpwPulse, VpwSignal
from .sampling import FiringTimes, TemParams

__all__ = [
    "EcgRecord",
    "write_signal",
    "read_signal",
    "write_firings",
    "read_firings",
    "write_ecg_csv",
    "read_ecg_csv",
    "write_hr_csv",
    "read_hr_csv",
    "recon_result_to_dict",
    "write_recon_json",
    "write_metrics_json",
    "read_config",
    "write_config",
    "write_table_csv",
    "read_table_csv",
]


@dataclass(frozen=True)
class EcgRecord:
    """Uniformly sampled voltage trace."""

    time_s: np.ndarray
    voltage: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.time_s, dtype=np.float64)
        v = np.asarray(self.voltage, dtype=np.float64)
        if t.ndim != 1 or t.shape != v.shape or t.size < 2:
            raise PreconditionError("record needs matching 1-D time and voltage arrays")
        dt = np.diff(t)
        if np.any(dt <= 0.0):
            raise PreconditionError("time column must be strictly increasing")
        if np.max(np.abs(dt - dt[0])) > 1e-6 * dt[0]:
            raise PreconditionError("time column must be uniformly spaced")
        t = t.copy()
        v = v.copy()
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "time_s", t)
        object.__setattr__(self, "voltage", v)

    @property
    def fs(self) -> float:
        return float((self.time_s.size - 1) / (self.time_s[-1] - self.time_s[0]))

    @property
    def duration(self) -> float:
        return float(self.time_s[-1] - self.time_s[0] + 1.0 / self.fs)


def _g17(x: float) -> str:
    return format(float(x), ".17g")


def write_signal(signal: VpwSignal, path) -> None:
    lines = [f"{_g17(signal.period)} {signal.n_pulses}"]
    for p in signal.pulses:
        lines.append(f"{_g17(p.c)} {_g17(p.d)} {_g17(p.r)} {_g17(p.tau)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_signal(path) -> VpwSignal:
    try:
        raw = Path(path).read_text().strip().splitlines()
        head = raw[0].split()
        period, k = float(head[0]), int(head[1])
        if len(raw) != k + 1:
            raise FormatError(f"expected {k} pulse lines, found {len(raw) - 1}")
        pulses = []
        for line in raw[1 : k + 1]:
            c, d, r, tau = (float(tok) for tok in line.split())
            pulses.append(VpwPulse(c=c, d=d, r=r, tau=tau))
    except (IndexError, ValueError) as err:
        raise FormatError(f"malformed pulse-train record {path}: {err}") from err
    return VpwSignal(period=period, pulses=tuple(pulses))


def write_firings(times: FiringTimes, tem: TemParams, path) -> None:
    lines = [f"# {_g17(tem.b)} {_g17(tem.kappa)} {_g17(tem.delta)} {_g17(times.horizon)}"]
    lines.extend(format(t, ".12f") for t in times.times)
    Path(path).write_text("\n".join(lines) + "\n")


def read_firings(path) -> tuple[FiringTimes, TemParams]:
    try:
        raw = Path(path).read_text().strip().splitlines()
        head = raw[0].lstrip("#").split()
        b, kappa, delta, horizon = (float(tok) for tok in head)
        times = np.array([float(line) for line in raw[1:]])
    except (IndexError, ValueError) as err:
        raise FormatError(f"malformed firing-times file {path}: {err}") from err
    return FiringTimes(times=times, horizon=horizon), TemParams(b=b, kappa=kappa, delta=delta)


def write_ecg_csv(record: EcgRecord, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s", "voltage"])
        for t, v in zip(record.time_s, record.voltage):
            w.writerow([repr(float(t)), repr(float(v))])


def read_ecg_csv(path) -> EcgRecord:
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if [h.strip() for h in header] != ["time_s", "voltage"]:
                raise FormatError(f"expected header 'time_s,voltage', got {header}")
            rows = [(float(a), float(b)) for a, b in reader]
    except (ValueError, StopIteration) as err:
        raise FormatError(f"malformed ECG CSV {path}: {err}") from err
    t = np.array([r[0] for r in rows])
    v = np.array([r[1] for r in rows])
    try:
        return EcgRecord(time_s=t, voltage=v)
    except PreconditionError as err:
        raise FormatError(f"bad ECG CSV {path}: {err}") from err


def write_hr_csv(t_s: np.ndarray, bpm: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", "bpm"])
        for t, b in zip(t_s, bpm):
            w.writerow([repr(float(t)), repr(float(b))])


def read_hr_csv(path) -> tuple[np.ndarray, np.ndarray]:
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if [h.strip() for h in header] != ["t_s", "bpm"]:
                raise FormatError(f"expected header 't_s,bpm', got {header}")
            rows = [(float(a), float(b)) for a, b in reader]
    except (ValueError, StopIteration) as err:
        raise FormatError(f"malformed HR CSV {path}: {err}") from err
    return np.array([r[0] for r in rows]), np.array([r[1] for r in rows])


def _coeff_triples(coeffs: FourierCoeffs) -> list[list[float]]:
    return [[m, float(v.real), float(v.imag)] for m, v in coeffs.items()]


def recon_result_to_dict(result) -> dict:
    sig = result.signal
    diag = result.diagnostics
    return {
        "period": sig.period,
        "pulses": [
            {"c": p.c, "d": p.d, "r": p.r, "tau": p.tau} for p in sig.pulses
        ],
        "diagnostics": {
            "firing_count": diag.firing_count,
            "lsq_residual": diag.lsq_residual,
            "condition_estimate": diag.condition_estimate,
            "annihilation_residual": None
            if math.isnan(diag.annihilation_residual)
            else diag.annihilation_residual,
            "dc_slot": [diag.dc_slot.real, diag.dc_slot.imag],
            "clamped_roots": diag.clamped_roots,
        },
        "coeffs": _coeff_triples(result.coeffs),
    }


def write_recon_json(result, path) -> None:
    Path(path).write_text(json.dumps(recon_result_to_dict(result), indent=2) + "\n")


def write_metrics_json(metrics, path, extra: dict | None = None) -> None:
    payload = {
        "success_rate": metrics.success_rate,
        "pcc": metrics.pcc,
        "mae": metrics.mae,
        "rmse": metrics.rmse,
        "n_points": metrics.n_points,
        "pcc_degenerate": metrics.pcc_degenerate,
    }
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def _parse_value(text: str):
    text = text.strip()
    if "," in text:
        return [_parse_value(tok) for tok in text.split(",")]
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def read_config(path) -> dict:
    """Parse ``key = value`` lines; values become int/float/str or a
    comma-separated list thereof."""
    out: dict = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise FormatError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        out[key.strip()] = _parse_value(value)
    return out


def _format_value(value) -> str:
    if isinstance(value, (list, tuple)):
        return ",".join(_format_value(v) for v in value)
    return str(value)


def write_config(mapping: dict, path) -> None:
    lines = [f"{key} = {_format_value(value)}" for key, value in mapping.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def write_table_csv(columns: list[str], rows: list[dict], path, meta: dict | None = None) -> None:
    """CSV with optional ``# key: value`` metadata header lines. Output is
    deterministic (no timestamps), so identical inputs give identical bytes."""
    with open(path, "w", newline="") as fh:
        for key, value in (meta or {}).items():
            fh.write(f"# {key}: {_format_value(value)}\n")
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row.get(col, "")) for col in columns])


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def read_table_csv(path) -> tuple[list[str], list[dict], dict]:
    meta: dict = {}
    with open(path, newline="") as fh:
        lines = fh.readlines()
    body_start = 0
    for line in lines:
        if line.startswith("#"):
            body_start += 1
            key, _, value = line.lstrip("#").partition(":")
            meta[key.strip()] = _parse_value(value)
        else:
            break
    reader = csv.reader(lines[body_start:])
    try:
        columns = next(reader)
    except StopIteration as err:
        raise FormatError(f"empty table {path}") from err
    rows = [
        {col: _parse_value(cell) for col, cell in zip(columns, row)}
        for row in reader
        if row
    ]
    return columns, rows, meta
