"""Command-line front end: ``qcorr run|sweep|spectrum|validate|psd``.

Exit codes: 0 success, 1 invalid scenario or arguments, 2 file I/O failure,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import subprocess
import sys
import time
from importlib import resources
from pathlib import Path

from . import __version__
from .analysis import find_peak, spectrum
from .config import ScenarioError, load_scenario
from .files import read_trace_csv, write_spectrum_csv, write_trace_csv, write_trace_json
from .noise import averaged_psd, fit_lorentzian
from .protocol import BUILDERS, sweep_delay

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3


def version_string() -> str:
    """``git describe`` of the source tree when available, else ``v<version>``."""
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=Path(__file__).parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"v{__version__}-g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return f"v{__version__}"


def resolve_config(path: str) -> Path:
    """A scenario path, or the name of a packaged scenario such as ``fig4b.ini``."""
    p = Path(path)
    if p.exists():
        return p
    packaged = resources.files("qcorr") / "scenarios" / p.name
    if packaged.is_file():
        return Path(str(packaged))
    raise FileNotFoundError(f"scenario file not found: {path}")


def cmd_run(args) -> int:
    cfg = load_scenario(resolve_config(args.config))
    if args.kind:
        cfg.protocol.kind = args.kind
    seed = cfg.run.seed if args.seed is None else args.seed
    out = Path(args.out or cfg.output.path)

    started = time.perf_counter()
    trace = sweep_delay(
        BUILDERS[cfg.protocol.kind],
        cfg.spin_system(),
        cfg.noise_model(seed),
        cfg.delays(),
        cfg.protocol.t_interr_s,
        mode=cfg.run.mode,
        n_traj=cfg.run.n_traj,
        substep_dt=cfg.run.substep_dt_s,
        randomize_mode=cfg.protocol.randomize_mode,
        seed=seed,
        noise_dt=cfg.noise.dt_s,
        workers=args.workers,
        meta={"scenario": Path(args.config).stem, "kind": cfg.protocol.kind},
    )
    wall = time.perf_counter() - started

    out.mkdir(parents=True, exist_ok=True)
    written = []
    if cfg.output.format == "csv":
        write_trace_csv(trace, out / "trace.csv")
        written.append("trace.csv")
    else:
        write_trace_json(trace, out / "trace.json")
        written.append("trace.json")

    manifest = {
        "config": cfg.as_dict(),
        "seed": seed,
        "version": version_string(),
        "wall_time_s": wall,
        "workers": args.workers,
        "files": written,
    }
    if cfg.output.emit_spectrum:
        spec = spectrum(trace, cfg.output.window)
        write_spectrum_csv(spec, out / "spectrum.csv")
        written.append("spectrum.csv")
        peak = find_peak(spec)
        manifest["peak"] = {"freq_hz": peak.freq, "amplitude": peak.amplitude, "distinct": peak.distinct}
        print(f"peak {peak.freq:.6g} Hz, amplitude {peak.amplitude:.6g}" + ("" if peak.distinct else " (no distinct peak)"))
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"{cfg.protocol.kind} sweep of {len(trace)} delays in {wall:.2f} s -> {out}")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    trace = read_trace_csv(args.trace)
    spec = spectrum(trace, args.window)
    out = Path(args.out or Path(args.trace).parent)
    out.mkdir(parents=True, exist_ok=True)
    write_spectrum_csv(spec, out / "spectrum.csv")
    band = tuple(args.band) if args.band else None
    peak = find_peak(spec, band)
    print(f"peak {peak.freq:.6g} Hz, amplitude {peak.amplitude:.6g}" + ("" if peak.distinct else " (no distinct peak)"))
    return EXIT_OK


def cmd_validate(args) -> int:
    from .oracle import calibrate_eq3_constant, cross_validate

    worst = cross_validate(args.n, args.seed or 0)
    ok = worst <= 1e-8
    print(f"executor vs oracle on {args.n} random scenarios: max |diff| = {worst:.3e} ({'ok' if ok else 'FAIL'})")
    c = calibrate_eq3_constant()
    print(f"calibrated QC prefactor c = {c:.6f}")
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_psd(args) -> int:
    cfg = load_scenario(resolve_config(args.config))
    seed = cfg.run.seed if args.seed is None else args.seed
    model = cfg.noise_model(seed)
    if model.kind == "none":
        raise ScenarioError("psd needs a noise model other than 'none'")
    dt = args.dt or cfg.noise.dt_s
    if dt is None:
        fmax = model.max_frequency or 1.0 / (cfg.protocol.t_interr_s)
        dt = 1.0 / (8 * fmax)
    duration = args.duration or (60 * model.tau if model.kind == "ou_lorentzian" else 4096 * dt)
    spec = averaged_psd(model, duration, dt, args.n_traj)
    out = Path(args.out or cfg.output.path)
    out.mkdir(parents=True, exist_ok=True)
    write_spectrum_csv(spec, out / "psd.csv")
    if model.kind == "ou_lorentzian":
        center = model.center_freq if model.center_freq > 0 else None
        fc, fwhm, _ = fit_lorentzian(spec, center, span=10 * model.fwhm)
        print(f"Lorentzian fit: center {fc:.6g} Hz, FWHM {fwhm:.6g} Hz (target {model.fwhm:.6g} Hz)")
    else:
        peak = find_peak(spec, (spec.resolution, spec.freqs[-1]))
        print(f"PSD peak {peak.freq:.6g} Hz (bin width {spec.resolution:.6g} Hz)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcorr", description="Quantum/classical correlation sensing simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("run", "sweep"):
        p = sub.add_parser(name, help="run the delay sweep of a scenario")
        p.add_argument("--config", required=True, help="scenario .ini path or packaged scenario name")
        p.add_argument("--out", help="output directory (default: output.path)")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--seed", type=int, help="override run.seed")
        p.add_argument("--kind", choices=sorted(BUILDERS), help="override protocol.kind")
        p.set_defaults(func=cmd_run)

    p = sub.add_parser("spectrum", help="spectrum of an existing trace CSV")
    p.add_argument("trace")
    p.add_argument("--out")
    p.add_argument("--window", choices=("rect", "hann"), default="hann")
    p.add_argument("--band", type=float, nargs=2, metavar=("LO_HZ", "HI_HZ"))
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("validate", help="oracle cross-check and prefactor calibration")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("psd", help="spectrum of the scenario's noise model")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--n-traj", type=int, default=4096)
    p.add_argument("--duration", type=float, help="trajectory length in s")
    p.add_argument("--dt", type=float, help="sample spacing in s")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_psd)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ArithmeticError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
