"""Command-line interface.

Subcommands: synth, encode, reconstruct, hrm, sweep, plot. Every
subcommand accepts ``--config FILE`` (simple ``key = value`` lines) whose
entries override the built-in defaults and are in turn overridden by
explicit flags; ``--print-config`` prints the effective defaults and
exits. Exit codes: 0 success, 2 underdetermined or precondition failure,
3 I/O or format error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import experiments as _exp
from . import io as _io
from . import plots as _plots
from .denoise import NoiseModel
from .errors import FormatError, PreconditionError, StageFailure, TemfriError
from .hrm import HrmConfig, HrSeries, hr_series, run_hrm_pipeline, score
from .model import amplitude_bound, fourier_coeffs
from .recon import reconstruct
from .sampling import KernelSpec, TemParams, discretize_record, encode, suggest_params
from .synth import random_vpw_signal, synth_ecg_record

__all__ = ["main"]


def _merge_config(defaults: dict, args: argparse.Namespace) -> dict:
    cfg = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path:
        cfg.update(_io.read_config(config_path))
    for key in defaults:
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
    return cfg


def _print_config(defaults: dict) -> int:
    for key, value in defaults.items():
        print(f"{key} = {_io._format_value(value)}")
    return 0


SYNTH_DEFAULTS = {
    "kind": "record",  # or "signal"
    "seed": 0,
    "k": 5,
    "period": 1.0,
    "duration": 60.0,
    "fs": 2000.0,
    "bpm": 60.0,
}


def cmd_synth(args) -> int:
    cfg = _merge_config(SYNTH_DEFAULTS, args)
    if args.print_config:
        return _print_config(cfg)
    if not args.out:
        raise PreconditionError("synth needs --out")
    if cfg["kind"] == "signal":
        rng = np.random.default_rng(int(cfg["seed"]))
        signal = random_vpw_signal(rng, int(cfg["k"]), period=float(cfg["period"]))
        _io.write_signal(signal, args.out)
    elif cfg["kind"] == "record":
        sub = synth_ecg_record(
            duration_s=float(cfg["duration"]),
            fs=float(cfg["fs"]),
            seed=int(cfg["seed"]),
            mean_bpm=float(cfg["bpm"]),
        )
        _io.write_ecg_csv(sub.record, args.out)
        if args.beats_out:
            _io.write_hr_csv(
                sub.beat_times, np.full(sub.beat_times.size, sub.mean_bpm), args.beats_out
            )
    else:
        raise PreconditionError(f"unknown synth kind {cfg['kind']!r}")
    print(f"wrote {args.out}")
    return 0


ENCODE_DEFAULTS = {
    "k": 5,
    "m_max": 0,  # 0 means 4K
    "margin": 2.0,
    "b": 0.0,  # 0 means suggest
    "kappa": 1.0,
    "delta": 0.0,
    "horizon": 0.0,  # 0 means one period
    "t0": 0.0,
    "period": 0.0,  # records only; 0 means the full record length
}


def cmd_encode(args) -> int:
    cfg = _merge_config(ENCODE_DEFAULTS, args)
    if args.print_config:
        return _print_config(cfg)
    if bool(args.signal) == bool(args.record):
        raise PreconditionError("pass exactly one of --signal or --record")
    k = int(cfg["k"])
    m_max = int(cfg["m_max"]) or 4 * k
    if args.signal:
        signal = _io.read_signal(args.signal)
        period = signal.period
        coeffs = fourier_coeffs(signal, m_max).without_dc()
    else:
        record = _io.read_ecg_csv(args.record)
        period = float(cfg["period"]) or record.duration
        coeffs = discretize_record(record.voltage, record.fs, period, m_max)
    bound = amplitude_bound(coeffs)
    if cfg["b"] and cfg["delta"]:
        tem = TemParams(
            b=float(cfg["b"]), kappa=float(cfg["kappa"]), delta=float(cfg["delta"]),
            c=bound * (1.0 + 1e-9),
        )
    else:
        tem = suggest_params(k, period, c=bound, margin=float(cfg["margin"]), kappa=float(cfg["kappa"]))
    horizon = float(cfg["horizon"]) or period
    times = encode(coeffs, tem, horizon=horizon, t0=float(cfg["t0"]))
    _io.write_firings(times, tem, args.out)
    print(f"wrote {args.out} ({times.n} firings, rate {times.n / horizon:.3g} Hz)")
    return 0


RECON_DEFAULTS = {
    "k": 5,
    "m_max": 0,  # 0 means 4K
    "period": 1.0,
    "denoiser": "none",
    "snr_db": math.inf,
    "convention": "signal-power-ratio",
    "seed": 0,
    "render_fs": 200.0,
}


def cmd_reconstruct(args) -> int:
    cfg = _merge_config(RECON_DEFAULTS, args)
    if args.print_config:
        return _print_config(cfg)
    times, tem = _io.read_firings(args.firings)
    k = int(cfg["k"])
    m_max = int(cfg["m_max"]) or 4 * k
    period = float(cfg["period"])
    kernel = KernelSpec(m_max=m_max, period=period)
    denoiser = None if cfg["denoiser"] in ("none", "") else str(cfg["denoiser"])
    noise = None
    if math.isfinite(float(cfg["snr_db"])):
        noise = NoiseModel(
            snr_db=float(cfg["snr_db"]), seed=int(cfg["seed"]), convention=str(cfg["convention"])
        )
    result = reconstruct(times, tem, kernel, k, denoiser=denoiser, noise_model=noise)
    _io.write_recon_json(result, args.out)
    print(f"wrote {args.out}")
    if args.ref:
        truth = _io.read_signal(args.ref)
        errs = _exp.parameter_errors(result.signal, truth)
        print(f"max relative parameter error vs reference: {errs['max_rel']:.3e}")
    if args.plot_dir:
        out = Path(args.plot_dir)
        out.mkdir(parents=True, exist_ok=True)
        fs = float(cfg["render_fs"])
        n = max(int(round(period * fs)), 2 * m_max + 2)
        from .hrm import render_model_window

        wave = render_model_window(result.signal, n, m_render=4 * m_max)
        tgrid = np.arange(n) * (period / n)
        _io.write_table_csv(
            ["t_s", "value"],
            [{"t_s": float(t), "value": float(v)} for t, v in zip(tgrid, wave)],
            out / "waveform.csv",
            meta={"kind": "reconstruction"},
        )
        _plots.plot_waveform(tgrid, wave, out / "waveform.png")
        print(f"wrote {out / 'waveform.csv'} and {out / 'waveform.png'}")
    return 0


HRM_DEFAULTS = {
    "k": 10,
    "beats_per_window": 2,
    "snr_db": math.inf,
    "convention": "signal-power-ratio",
    "seed": 0,
    "denoiser": "pan",
    "window_s": 40.0,
    "update_s": 0.5,
    "band_lo": 0.7,
    "band_hi": 2.0,
    "hr_mode": "indicator",
}


def cmd_hrm(args) -> int:
    cfg = _merge_config(HRM_DEFAULTS, args)
    if args.print_config:
        return _print_config(cfg)
    record = _io.read_ecg_csv(args.record)
    hcfg = HrmConfig(
        k=int(cfg["k"]),
        beats_per_window=int(cfg["beats_per_window"]),
        snr_db=float(cfg["snr_db"]),
        noise_convention=str(cfg["convention"]),
        noise_seed=int(cfg["seed"]),
        denoiser=None if cfg["denoiser"] in ("none", "") else str(cfg["denoiser"]),
        window_s=float(cfg["window_s"]),
        update_s=float(cfg["update_s"]),
        band=(float(cfg["band_lo"]), float(cfg["band_hi"])),
        hr_mode=str(cfg["hr_mode"]),
    )
    reference = None
    if args.ref:
        reference = _io.read_hr_csv(args.ref)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = run_hrm_pipeline(record, hcfg, reference=reference)
    _io.write_hr_csv(result.series.timestamps, result.series.bpm, out_dir / "hr.csv")
    written = [out_dir / "hr.csv"]
    if result.metrics is not None:
        _io.write_metrics_json(
            result.metrics,
            out_dir / "metrics.json",
            extra={
                "band_hz": list(hcfg.band),
                "hr_mode": hcfg.hr_mode,
                "snr_db": hcfg.snr_db if math.isfinite(hcfg.snr_db) else None,
                "noise_convention": hcfg.noise_convention,
                "failed_windows": len(result.failures),
            },
        )
        written.append(out_dir / "metrics.json")
    ref_t, ref_bpm = (reference if reference is not None else (None, None))
    _plots.plot_hr_series(
        result.series.timestamps, result.series.bpm, out_dir / "hr.png",
        ref_t=ref_t, ref_bpm=ref_bpm,
    )
    written.append(out_dir / "hr.png")
    for path in written:
        print(f"wrote {path}")
    if result.failures:
        print(f"{len(result.failures)} window(s) failed and were interpolated")
    return 0


def cmd_sweep(args) -> int:
    if args.print_config:
        kind = args.kind or "denoiser_sweep"
        spec = _exp.ExperimentSpec(kind=kind)
        return _print_config(spec.to_mapping())
    if args.spec:
        spec = _exp.ExperimentSpec.from_mapping(_io.read_config(args.spec))
    elif args.kind:
        overrides = {}
        for item in args.set or []:
            if "=" not in item:
                raise PreconditionError(f"--set expects key=value, got {item!r}")
            key, _, value = item.partition("=")
            overrides[key.strip()] = _io._parse_value(value)
        seed = int(overrides.pop("seed", 0))
        trials = overrides.pop("trials", None)
        defaults_trials = _exp.spec_defaults(args.kind).get("trials", 10)
        spec = _exp.ExperimentSpec(
            kind=args.kind,
            seed=seed,
            trials=int(trials) if trials is not None else defaults_trials,
            params=overrides,
        )
    else:
        raise PreconditionError("sweep needs --spec FILE or --kind KIND")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = _exp.run(spec)
    table.write_csv(out_dir / "results.csv")
    (out_dir / "summary.json").write_text(json.dumps(table.summary, indent=2) + "\n")
    _io.write_config(spec.to_mapping(), out_dir / "spec.cfg")
    print(f"wrote {out_dir / 'results.csv'}")
    print(f"wrote {out_dir / 'summary.json'}")
    if not args.no_plots:
        for path in _exp.emit_plots(table, out_dir):
            print(f"wrote {path}")
    return 0


def cmd_plot(args) -> int:
    columns, rows, meta = _io.read_table_csv(args.table)
    kind = meta.get("kind")
    if kind not in _exp.KINDS:
        raise FormatError(f"table {args.table} has no recognizable 'kind' header")
    table = _exp.ResultTable(kind=kind, columns=tuple(columns), rows=tuple(rows), summary={})
    for path in _exp.emit_plots(table, args.out_dir):
        print(f"wrote {path}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="temfri",
        description="Time-encoded sub-Nyquist sampling, reconstruction, and heart-rate tools",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--print-config", action="store_true", help="print effective defaults and exit")

    p = sub.add_parser("synth", help="generate a pulse-train file or a synthetic ECG record")
    add_common(p)
    p.add_argument("--out", help="output path")
    p.add_argument("--beats-out", help="also write the true beat schedule (records only)")
    p.add_argument("--kind", choices=["signal", "record"])
    p.add_argument("--seed", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--period", type=float)
    p.add_argument("--duration", type=float)
    p.add_argument("--fs", type=float)
    p.add_argument("--bpm", type=float)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("encode", help="time-encode a signal or one record window")
    add_common(p)
    p.add_argument("--signal", help="pulse-train record file")
    p.add_argument("--record", help="ECG CSV file")
    p.add_argument("--out", required=False, help="firing-times output path")
    p.add_argument("--k", type=int)
    p.add_argument("--m-max", dest="m_max", type=int)
    p.add_argument("--margin", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--t0", type=float)
    p.add_argument("--period", type=float)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("reconstruct", help="recover pulse parameters from firing times")
    add_common(p)
    p.add_argument("--firings", required=False, help="firing-times file")
    p.add_argument("--out", required=False, help="result JSON path")
    p.add_argument("--ref", help="true pulse-train file for an error report")
    p.add_argument("--plot-dir", help="directory for the rendered waveform CSV and figure")
    p.add_argument("--k", type=int)
    p.add_argument("--m-max", dest="m_max", type=int)
    p.add_argument("--period", type=float)
    p.add_argument("--denoiser", choices=["none", "cadzow", "pan", "matrix_pencil"])
    p.add_argument("--snr-db", dest="snr_db", type=float)
    p.add_argument("--convention", choices=["signal-power-ratio", "per-coefficient-variance"])
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("hrm", help="full record-to-heart-rate pipeline")
    add_common(p)
    p.add_argument("--record", required=False, help="ECG CSV file")
    p.add_argument("--ref", help="reference heart-rate CSV")
    p.add_argument("--out-dir", dest="out_dir", required=False, help="output directory")
    p.add_argument("--k", type=int)
    p.add_argument("--beats-per-window", dest="beats_per_window", type=int)
    p.add_argument("--snr-db", dest="snr_db", type=float)
    p.add_argument("--convention", choices=["signal-power-ratio", "per-coefficient-variance"])
    p.add_argument("--seed", type=int)
    p.add_argument("--denoiser", choices=["none", "cadzow", "pan", "matrix_pencil"])
    p.add_argument("--window-s", dest="window_s", type=float)
    p.add_argument("--update-s", dest="update_s", type=float)
    p.add_argument("--band-lo", dest="band_lo", type=float)
    p.add_argument("--band-hi", dest="band_hi", type=float)
    p.add_argument("--hr-mode", dest="hr_mode", choices=["indicator", "waveform"])
    p.set_defaults(func=cmd_hrm)

    p = sub.add_parser("sweep", help="run an experiment grid")
    add_common(p)
    p.add_argument("--spec", help="experiment spec config file")
    p.add_argument("--kind", choices=list(_exp.KINDS))
    p.add_argument("--set", action="append", help="override key=value (repeatable)")
    p.add_argument("--out-dir", dest="out_dir", required=False, help="output directory")
    p.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="render plot files from a results table")
    p.add_argument("--table", required=True, help="results.csv from a sweep")
    p.add_argument("--out-dir", dest="out_dir", required=True, help="output directory")
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command in ("synth", "encode", "reconstruct", "hrm", "sweep"):
            # required-output checks are deferred so --print-config works
            if not args.print_config:
                missing = {
                    "synth": ["out"],
                    "encode": ["out"],
                    "reconstruct": ["firings", "out"],
                    "hrm": ["record", "out_dir"],
                    "sweep": ["out_dir"],
                }[args.command]
                for name in missing:
                    if not getattr(args, name, None):
                        flag = "--" + name.replace("_", "-")
                        raise PreconditionError(f"{args.command} needs {flag}")
        return args.func(args)
    except StageFailure as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (FormatError,) as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except TemfriError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
