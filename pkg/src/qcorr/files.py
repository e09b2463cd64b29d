"""CSV/JSON readers and writers for traces, spectra and run manifests.

Floats are written with 17 significant digits, which round-trips IEEE
doubles exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .analysis import CorrelationTrace, Spectrum

TRACE_HEADER = ["delay_s", "value", "stderr"]
SPECTRUM_HEADER = ["freq_hz", "amplitude"]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_rows(path, header, columns) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([_fmt(v) for v in row])


def _read_rows(path, header) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != header:
        raise ValueError(f"{path}: expected header {','.join(header)}")
    return np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(header))


def write_trace_csv(trace: CorrelationTrace, path) -> None:
    _write_rows(path, TRACE_HEADER, (trace.delays, trace.values, trace.stderrs))


def read_trace_csv(path) -> CorrelationTrace:
    data = _read_rows(path, TRACE_HEADER)
    return CorrelationTrace(data[:, 0], data[:, 1], data[:, 2], {"source": str(path)})


def write_trace_json(trace: CorrelationTrace, path) -> None:
    payload = {
        "delay_s": trace.delays.tolist(),
        "value": trace.values.tolist(),
        "stderr": trace.stderrs.tolist(),
        "meta": trace.meta,
    }
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def write_spectrum_csv(spec: Spectrum, path) -> None:
    _write_rows(path, SPECTRUM_HEADER, (spec.freqs, spec.amplitudes))


def read_spectrum_csv(path) -> Spectrum:
    data = _read_rows(path, SPECTRUM_HEADER)
    f = data[:, 0]
    return Spectrum(f, data[:, 1], float(f[1] - f[0]) if len(f) > 1 else 0.0)
