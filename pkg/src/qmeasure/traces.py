"""Power traces: containers, CSV/manifest I/O, and the synthetic generator.

Trace files are two-column CSV with header ``timestamp_s,power_w``.  A run
manifest is a JSON object ``{"traces": {label: path}}`` mapping the standard
labels (P_I, P_E, P_int, P_00, P_01, P_11, P_T, P_R) to files, with relative
paths resolved against the manifest location.

The generator writes trace sets whose underlying ratios follow the filter
physics for a chosen true measure, so the analysis pipeline can be checked
against known ground truth.  All randomness is seeded.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import InputError, ParseError
from .optics import FilterParams, dsi_monitor_powers, port_powers, build_dsi_filter, single_pass_powers, DSI_MONITOR_BLOCKS

TRACE_LABELS = ("P_I", "P_E", "P_int", "P_00", "P_01", "P_11", "P_T", "P_R")

CSV_HEADER = "timestamp_s,power_w"


@dataclass(frozen=True)
class PowerTrace:
    """Timestamped power samples; timestamps strictly increasing, powers >= 0."""

    times: np.ndarray
    powers: np.ndarray
    label: str = ""

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        powers = np.asarray(self.powers, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "powers", powers)
        if times.ndim != 1 or powers.ndim != 1 or times.size != powers.size:
            raise InputError(f"trace {self.label!r}: times and powers must be equal-length 1-D arrays")
        if times.size == 0:
            raise InputError(f"trace {self.label!r}: empty trace")
        if np.any(np.diff(times) <= 0):
            raise InputError(f"trace {self.label!r}: timestamps must be strictly increasing")
        if np.any(powers < 0):
            raise InputError(f"trace {self.label!r}: negative power sample")

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def mean_power(self) -> float:
        return float(np.mean(self.powers))

    def to_csv(self, path: str | Path) -> None:
        lines = [CSV_HEADER]
        lines.extend(f"{float(t)!r},{float(p)!r}" for t, p in zip(self.times, self.powers))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path: str | Path, label: str = "") -> PowerTrace:
        text = Path(path).read_text().strip().splitlines()
        if not text or text[0].strip() != CSV_HEADER:
            raise ParseError(f"{path}: expected header '{CSV_HEADER}'", line=1, column=1)
        times, powers = [], []
        for i, line in enumerate(text[1:], start=2):
            if not line.strip():
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ParseError(f"{path}: expected two comma-separated fields", line=i, column=1)
            try:
                times.append(float(parts[0]))
                powers.append(float(parts[1]))
            except ValueError as exc:
                raise ParseError(f"{path}: {exc}", line=i, column=1) from exc
        return cls(times=np.array(times), powers=np.array(powers), label=label or Path(path).stem)


def window_means(trace: PowerTrace, starts: np.ndarray, window_seconds: float) -> np.ndarray:
    """Mean power over contiguous windows [start, start + window)."""
    if window_seconds <= 0:
        raise InputError("window_seconds must be positive")
    cum = np.concatenate(([0.0], np.cumsum(trace.powers)))
    i = np.searchsorted(trace.times, starts, side="left")
    j = np.searchsorted(trace.times, starts + window_seconds, side="left")
    counts = j - i
    if np.any(counts <= 0):
        raise InputError("empty bootstrap window; increase window length or trace density")
    return (cum[j] - cum[i]) / counts


def write_manifest(path: str | Path, trace_files: dict[str, str]) -> None:
    Path(path).write_text(json.dumps({"traces": trace_files}, indent=2, sort_keys=True) + "\n")


def load_manifest(path: str | Path) -> dict[str, PowerTrace]:
    """Load every trace listed in a manifest, keyed by label."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed manifest JSON in {path}: {exc.msg}", exc.lineno, exc.colno) from exc
    if not isinstance(doc, dict) or "traces" not in doc or not isinstance(doc["traces"], dict):
        raise InputError(f"{path}: manifest must be an object with a 'traces' map")
    traces: dict[str, PowerTrace] = {}
    for label, rel in doc["traces"].items():
        file_path = Path(rel)
        if not file_path.is_absolute():
            file_path = path.parent / file_path
        if not file_path.exists():
            raise InputError(f"manifest trace {label!r}: file not found: {file_path}")
        traces[label] = PowerTrace.from_csv(file_path, label=label)
    return traces


def require_traces(traces: dict[str, PowerTrace], labels: tuple[str, ...]) -> None:
    missing = [label for label in labels if label not in traces]
    if missing:
        raise InputError(f"missing trace label(s): {', '.join(missing)}")


# ---------------------------------------------------------------------------
# synthetic trace generation


@dataclass(frozen=True)
class TraceScenario:
    """Ground truth for a synthetic run.

    ``mu_star`` is encoded by operating the ideal filter at the phase offset
    whose interference yields exactly that measure; alternatively a full
    ``filter_params`` set can be supplied and is used as-is.  Noise is
    per-sample multiplicative Gaussian; drift is a linear end-to-end ramp
    applied to the labels in ``drift_labels``.
    """

    mu_star: float = 1.25
    eta_s: float = 0.9356
    noise_fraction: float = 0.01
    drift_fraction: float = 0.02
    drift_labels: tuple[str, ...] = ("P_E",)
    phase_jitter_rad: float = 0.0
    duration_s: float = 3600.0
    sample_rate_hz: float = 5.0
    input_power_w: float = 1.0e-3
    seed: int = 0
    filter_params: FilterParams | None = None

    def __post_init__(self):
        if self.filter_params is None and not (0.25 < self.mu_star <= 1.25):
            raise InputError(f"mu_star {self.mu_star} not reachable by the ideal filter (needs (0.25, 1.25])")
        if not (0.0 < self.eta_s <= 1.0):
            raise InputError("eta_s must lie in (0, 1]")
        if self.duration_s <= 0 or self.sample_rate_hz <= 0:
            raise InputError("duration and sample rate must be positive")


def phase_for_measure(mu_star: float) -> float:
    """Ideal-filter phase offset at which the event measure equals mu_star."""
    if not (0.25 < mu_star <= 1.25):
        raise InputError(f"mu_star {mu_star} outside the ideal filter's range (0.25, 1.25]")
    return math.acos(2.0 * mu_star - 1.5)


def _sinusoid_through(params: FilterParams, blocks: tuple[str, ...]) -> tuple[float, float, float]:
    """Exact (offset, amplitude, phase) of the PM power as a function of the
    glass-plate phase; PM power is a single harmonic in that phase."""
    samples = {}
    for x in (0.0, math.pi / 2.0, math.pi):
        circ = build_dsi_filter(replace(params, phi_g=x))
        samples[x] = port_powers(circ, blocked_paths=blocks)["PM"]
    a = 0.5 * (samples[0.0] + samples[math.pi])
    b_cos = samples[0.0] - a
    b_sin = a - samples[math.pi / 2.0]
    return a, math.hypot(b_cos, b_sin), math.atan2(b_sin, b_cos)


def synthesize_traces(scenario: TraceScenario) -> dict[str, PowerTrace]:
    """Deterministic-for-seed trace set encoding the scenario's ground truth."""
    params = scenario.filter_params
    if params is None:
        params = FilterParams(eta_s=scenario.eta_s, phi_g=phase_for_measure(scenario.mu_star))
    rng = np.random.default_rng(scenario.seed)
    n = int(round(scenario.duration_s * scenario.sample_rate_hz))
    if n < 2:
        raise InputError("scenario too short: needs at least two samples")
    times = np.arange(n, dtype=float) / scenario.sample_rate_hz

    ratios: dict[str, np.ndarray] = {"P_I": np.ones(n)}
    if scenario.phase_jitter_rad > 0:
        phase = params.phi_g + scenario.phase_jitter_rad * rng.standard_normal(n)
        for label, blocks in (("P_E", ()), ("P_int", ("U",))):
            a, b, c = _sinusoid_through(params, blocks)
            ratios[label] = a + b * np.cos(phase + c)
    else:
        monitors = dsi_monitor_powers(params)
        ratios["P_E"] = np.full(n, monitors["P_E"])
        ratios["P_int"] = np.full(n, monitors["P_int"])
    circuit = build_dsi_filter(params)
    for label in ("P_00", "P_01", "P_11"):
        ratios[label] = np.full(n, port_powers(circuit, blocked_paths=DSI_MONITOR_BLOCKS[label])["PM"])
    single = single_pass_powers(params)
    ratios["P_T"] = np.full(n, single["T"])
    ratios["P_R"] = np.full(n, single["R"])

    traces: dict[str, PowerTrace] = {}
    for label in TRACE_LABELS:
        powers = scenario.input_power_w * ratios[label]
        if scenario.noise_fraction > 0:
            powers = powers * (1.0 + scenario.noise_fraction * rng.standard_normal(n))
        if scenario.drift_fraction != 0 and label in scenario.drift_labels:
            powers = powers * (1.0 + scenario.drift_fraction * (times / scenario.duration_s - 0.5))
        traces[label] = PowerTrace(times=times, powers=np.clip(powers, 0.0, None), label=label)
    return traces


def write_trace_set(traces: dict[str, PowerTrace], out_dir: str | Path) -> Path:
    """Write one CSV per trace plus the manifest; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    for label, trace in traces.items():
        name = f"{label}.csv"
        trace.to_csv(out / name)
        files[label] = name
    manifest_path = out / "manifest.json"
    write_manifest(manifest_path, files)
    return manifest_path
