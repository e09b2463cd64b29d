"""Strict INI-style scenario files.

Format: ``[section]`` headers, ``key = value`` lines, ``#`` comments.
Every key carries its unit as a suffix (``_hz``, ``_s``, ``_rad_s``,
``_gauss``).  Unknown sections or keys, duplicates and out-of-range values
are errors that name the offending line or key.

Sections and defaults::

    [sensor]                      # reserved, takes no keys
    [bath]
    omega0_hz = ...               # or b_z_gauss (+ gamma_hz_per_t, 13C default)
    a_par_hz = 0
    a_perp_hz = ...               # required; comma-separated list for n_spins > 1
    p_z = ...                     # required
    n_spins = 1
    [noise]
    kind = none                   # none | ac | random_phase_ac | ou_lorentzian | white
    amplitude_rad_s = 0           # standard deviation for ou_lorentzian / white
    frequency_hz = 0
    fwhm_hz = 0
    center_freq_hz = 0
    phase_rad = 0
    dt_s = auto
    [protocol]
    kind = qc                     # required: qc | cc
    t_interr_s = ...              # required
    randomize_mode = exact_channel
    [sweep]
    delay_start_s = t_interr_s
    delay_step_s = ...            # required
    n_points = ...                # required
    [run]
    mode = exact                  # exact | mc
    n_traj = 1
    substep_dt_s = auto
    seed = 0
    [output]
    path = .
    format = csv                  # csv | json
    emit_spectrum = false
    window = hann                 # rect | hann
"""

from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .noise import KINDS, NoiseModel
from .protocol import RANDOMIZE_MODES
from .spins import GAMMA_13C_HZ_PER_T, SpinSystem, build_bath, omega0_from_field

TWO_PI = 2 * math.pi


class ScenarioError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)
        self.line = line
        self.column = column


@dataclass
class BathConfig:
    a_perp_hz: list[float]
    p_z: list[float]
    omega0_hz: list[float] | None = None
    b_z_gauss: float | None = None
    gamma_hz_per_t: float = GAMMA_13C_HZ_PER_T
    a_par_hz: list[float] = field(default_factory=lambda: [0.0])
    n_spins: int = 1


@dataclass
class NoiseConfig:
    kind: str = "none"
    amplitude_rad_s: float = 0.0
    frequency_hz: float = 0.0
    fwhm_hz: float = 0.0
    center_freq_hz: float = 0.0
    phase_rad: float = 0.0
    dt_s: float | None = None


@dataclass
class ProtocolConfig:
    kind: str
    t_interr_s: float
    randomize_mode: str = "exact_channel"


@dataclass
class SweepConfig:
    delay_step_s: float
    n_points: int
    delay_start_s: float | None = None


@dataclass
class RunConfig:
    mode: str = "exact"
    n_traj: int = 1
    substep_dt_s: float | None = None
    seed: int = 0


@dataclass
class OutputConfig:
    path: str = "."
    format: str = "csv"
    emit_spectrum: bool = False
    window: str = "hann"


@dataclass
class ScenarioConfig:
    bath: BathConfig
    protocol: ProtocolConfig
    sweep: SweepConfig
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    run: RunConfig = field(default_factory=RunConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def spin_system(self) -> SpinSystem:
        b = self.bath
        if b.omega0_hz is not None:
            omega0 = [TWO_PI * f for f in b.omega0_hz]
        else:
            omega0 = omega0_from_field(b.b_z_gauss, b.gamma_hz_per_t)
        return build_bath(
            omega0=omega0,
            a_par=[TWO_PI * f for f in b.a_par_hz],
            a_perp=[TWO_PI * f for f in b.a_perp_hz],
            p_z=b.p_z,
            n_spins=b.n_spins,
        )

    def noise_model(self, seed: int | None = None) -> NoiseModel:
        n = self.noise
        return NoiseModel(
            kind=n.kind,
            amplitude=n.amplitude_rad_s,
            frequency=n.frequency_hz,
            fwhm=n.fwhm_hz,
            center_freq=n.center_freq_hz,
            phase=n.phase_rad,
            seed_base=self.run.seed if seed is None else seed,
        )

    def delays(self) -> np.ndarray:
        s = self.sweep
        start = self.protocol.t_interr_s if s.delay_start_s is None else s.delay_start_s
        return start + s.delay_step_s * np.arange(s.n_points)

    def as_dict(self) -> dict:
        return asdict(self)


# --- value converters -----------------------------------------------------------------


def _float(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _int(text: str) -> int:
    if not re.fullmatch(r"[+-]?\d+", text):
        raise ValueError("must be an integer")
    return int(text)


def _float_list(text: str) -> list[float]:
    return [_float(part.strip()) for part in text.split(",")]


def _bool(text: str) -> bool:
    t = text.lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError("must be true or false")


def _choice(*options: str) -> Callable[[str], str]:
    def convert(text: str) -> str:
        if text not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return text

    return convert


def _auto_float(text: str) -> float | None:
    return None if text.lower() == "auto" else _float(text)


SCHEMA: dict[str, dict[str, Callable[[str], object]]] = {
    "sensor": {},
    "bath": {
        "omega0_hz": _float_list,
        "b_z_gauss": _float,
        "gamma_hz_per_t": _float,
        "a_par_hz": _float_list,
        "a_perp_hz": _float_list,
        "p_z": _float_list,
        "n_spins": _int,
    },
    "noise": {
        "kind": _choice(*KINDS),
        "amplitude_rad_s": _float,
        "frequency_hz": _float,
        "fwhm_hz": _float,
        "center_freq_hz": _float,
        "phase_rad": _float,
        "dt_s": _auto_float,
    },
    "protocol": {
        "kind": _choice("qc", "cc"),
        "t_interr_s": _float,
        "randomize_mode": _choice(*RANDOMIZE_MODES),
    },
    "sweep": {"delay_start_s": _float, "delay_step_s": _float, "n_points": _int},
    "run": {
        "mode": _choice("exact", "mc"),
        "n_traj": _int,
        "substep_dt_s": _auto_float,
        "seed": _int,
    },
    "output": {
        "path": str,
        "format": _choice("csv", "json"),
        "emit_spectrum": _bool,
        "window": _choice("rect", "hann"),
    },
}

REQUIRED = {
    "bath": ("a_perp_hz", "p_z"),
    "protocol": ("kind", "t_interr_s"),
    "sweep": ("delay_step_s", "n_points"),
}

_SECTION = re.compile(r"\[\s*([A-Za-z_][\w]*)\s*\]$")
_KEY_VALUE = re.compile(r"([A-Za-z_][\w]*)\s*=\s*(.*)$")


def _read_sections(text: str) -> dict[str, dict[str, tuple[object, int]]]:
    sections: dict[str, dict[str, tuple[object, int]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        stripped = line.lstrip()
        if not stripped:
            continue
        col = len(line) - len(stripped) + 1
        if stripped.startswith("["):
            m = _SECTION.match(stripped)
            if not m:
                raise ScenarioError("malformed section header", lineno, col)
            current = m.group(1)
            if current not in SCHEMA:
                raise ScenarioError(f"unknown section [{current}]", lineno, col)
            if current in sections:
                raise ScenarioError(f"duplicate section [{current}]", lineno, col)
            sections[current] = {}
            continue
        m = _KEY_VALUE.match(stripped)
        if not m:
            raise ScenarioError("expected 'key = value'", lineno, col)
        if current is None:
            raise ScenarioError("key outside of any section", lineno, col)
        key, value = m.group(1), m.group(2).strip()
        if key not in SCHEMA[current]:
            raise ScenarioError(f"unknown key {current}.{key}", lineno, col)
        if key in sections[current]:
            raise ScenarioError(f"duplicate key {current}.{key}", lineno, col)
        if not value:
            raise ScenarioError(f"empty value for {current}.{key}", lineno, col + m.start(2))
        try:
            sections[current][key] = (SCHEMA[current][key](value), lineno)
        except ValueError as exc:
            raise ScenarioError(f"{current}.{key}: {exc}", lineno, col + m.start(2)) from None
    return sections


def _range(ok: bool, key: str, what: str, line: int | None = None):
    if not ok:
        raise ScenarioError(f"{key} {what}", line)


def parse_scenario(text: str) -> ScenarioConfig:
    """Parse and validate a scenario file's text."""
    raw = _read_sections(text)
    for section, keys in REQUIRED.items():
        for key in keys:
            if key not in raw.get(section, {}):
                raise ScenarioError(f"missing required key {section}.{key}")
    values = {s: {k: v for k, (v, _) in entries.items()} for s, entries in raw.items()}
    lines = {f"{s}.{k}": ln for s, entries in raw.items() for k, (_, ln) in entries.items()}

    def check(key, ok, what):
        _range(ok, key, what, lines.get(key))

    bath = values["bath"]
    if ("omega0_hz" in bath) == ("b_z_gauss" in bath):
        raise ScenarioError("bath needs exactly one of omega0_hz or b_z_gauss")
    if "gamma_hz_per_t" in bath and "b_z_gauss" not in bath:
        raise ScenarioError("bath.gamma_hz_per_t is only used with bath.b_z_gauss", lines["bath.gamma_hz_per_t"])
    n_spins = bath.get("n_spins", 1)
    check("bath.n_spins", n_spins >= 1, "must be >= 1")
    for key in ("omega0_hz", "a_par_hz", "a_perp_hz", "p_z"):
        if key in bath:
            check(f"bath.{key}", len(bath[key]) in (1, n_spins), f"needs 1 or {n_spins} values")
    check("bath.p_z", all(abs(p) <= 1 for p in bath["p_z"]), "out of range: need |p_z| <= 1")
    check("bath.a_perp_hz", all(a >= 0 for a in bath["a_perp_hz"]), "must be >= 0")
    if "omega0_hz" in bath:
        check("bath.omega0_hz", all(w >= 0 for w in bath["omega0_hz"]), "must be >= 0")
    if "gamma_hz_per_t" in bath:
        check("bath.gamma_hz_per_t", bath["gamma_hz_per_t"] > 0, "must be > 0")

    proto = values["protocol"]
    check("protocol.t_interr_s", proto["t_interr_s"] > 0, "must be > 0")

    sweep = values["sweep"]
    check("sweep.delay_step_s", sweep["delay_step_s"] > 0, "must be > 0")
    check("sweep.n_points", sweep["n_points"] >= 2, "must be >= 2")
    if "delay_start_s" in sweep:
        check("sweep.delay_start_s", sweep["delay_start_s"] >= proto["t_interr_s"], "must be >= protocol.t_interr_s")

    noise = values.get("noise", {})
    for key in ("amplitude_rad_s", "frequency_hz", "fwhm_hz", "center_freq_hz"):
        if key in noise:
            check(f"noise.{key}", noise[key] >= 0, "must be >= 0")
    if noise.get("kind") == "ou_lorentzian":
        check("noise.fwhm_hz", noise.get("fwhm_hz", 0) > 0, "must be > 0 for ou_lorentzian noise")
    if noise.get("dt_s") is not None:
        check("noise.dt_s", noise["dt_s"] > 0, "must be > 0")

    run = values.get("run", {})
    if "n_traj" in run:
        check("run.n_traj", run["n_traj"] >= 1, "must be >= 1")
    if "seed" in run:
        check("run.seed", 0 <= run["seed"] < 2**64, "must be an unsigned 64-bit integer")
    if run.get("substep_dt_s") is not None:
        check("run.substep_dt_s", run["substep_dt_s"] > 0, "must be > 0")

    return ScenarioConfig(
        bath=BathConfig(**bath),
        protocol=ProtocolConfig(**proto),
        sweep=SweepConfig(**sweep),
        noise=NoiseConfig(**noise),
        run=RunConfig(**run),
        output=OutputConfig(**values.get("output", {})),
    )


def load_scenario(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())
