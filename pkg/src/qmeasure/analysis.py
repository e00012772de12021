"""Inference pipeline: power traces to a measure distribution with uncertainty.

Steps, in pipeline order:

1. substrate transmittance from the calibration traces,
   eta_s = (P_T + P_R) / P_I;
2. bootstrap of the event probability: windowed means of P_E and P_I drawn
   independently (the two traces are never paired sample-by-sample), ratio
   collected per resample;
3. loss correction p / eta_s^2 (the beam crosses the substrate twice) and
   conversion to the measure via the designed loss factor 2;
4. interferometric phase distribution from the monitor traces, with samples
   rejected when the interference criterion fails;
5. a theoretical expectation band from joint component-imperfection draws;
6. significance of the result against the classical bound and the theory
   median.

Distributions are summarized by the median and the asymmetric percentile
widths sigma+/- (84.13th / 15.87th percentiles relative to the median).
All resampling is vectorized over a single seeded generator, so results are
reproducible and independent of execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateDataError, InputError
from .noise import NoiseModel
from .optics import dsi_history_fields
from .traces import PowerTrace, require_traces, window_means

#: Designed power discard of the filter (diagonal-basis projection on one
#: branch, the tap splitter on the other): measure = 2 x corrected probability.
LOSS_FACTOR = 2.0

PERCENTILE_UPPER = 84.13
PERCENTILE_LOWER = 15.87

SIGMA_CONVENTIONS = ("std", "sigma-plus", "sigma-minus", "side-matched")

#: Roundoff grace on |cos phi| <= 1 so data sitting exactly at the
#: constructive/destructive limit is not rejected for a last-ulp excess.
_COS_GRACE = 1e-9


@dataclass(frozen=True)
class BootstrapConfig:
    """Window length, resample count and seed for all bootstrap draws."""

    window_seconds: float = 100.0
    n_resamples: int = 100_000
    rng_seed: int = 0

    def __post_init__(self):
        if self.window_seconds <= 0:
            raise InputError("window_seconds must be positive")
        if self.n_resamples < 1:
            raise InputError("n_resamples must be at least 1")


@dataclass(frozen=True)
class MeasureDistribution:
    """Sample set with median and asymmetric percentile uncertainties."""

    samples: np.ndarray
    median: float
    sigma_plus: float
    sigma_minus: float

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> MeasureDistribution:
        samples = np.asarray(samples, dtype=float)
        if samples.size == 0:
            raise InputError("cannot summarize an empty sample set")
        median = float(np.median(samples))
        upper = float(np.percentile(samples, PERCENTILE_UPPER))
        lower = float(np.percentile(samples, PERCENTILE_LOWER))
        return cls(
            samples=samples,
            median=median,
            sigma_plus=upper - median,
            sigma_minus=median - lower,
        )

    @property
    def n_samples(self) -> int:
        return int(self.samples.size)

    def summary(self) -> dict:
        return {
            "median": self.median,
            "sigma_plus": self.sigma_plus,
            "sigma_minus": self.sigma_minus,
            "n_samples": self.n_samples,
        }


@dataclass(frozen=True)
class PhaseDistribution:
    """Accepted phase samples plus the fraction rejected by the criterion."""

    samples: np.ndarray
    rejection_fraction: float
    n_total: int


def _mean_power(value: PowerTrace | float) -> float:
    if isinstance(value, PowerTrace):
        return value.mean_power
    return float(value)


def transmittance(p_i: PowerTrace | float, p_t: PowerTrace | float, p_r: PowerTrace | float) -> float:
    """Substrate transmittance (P_T + P_R) / P_I of the double-passed splitter."""
    denom = _mean_power(p_i)
    if denom <= 0:
        raise InputError("input power P_I must be positive")
    return (_mean_power(p_t) + _mean_power(p_r)) / denom


def _window_starts(rng: np.random.Generator, trace: PowerTrace, window_seconds: float, n: int) -> np.ndarray:
    t0 = float(trace.times[0])
    t1 = float(trace.times[-1])
    if t1 - t0 < window_seconds:
        raise InputError(
            f"trace {trace.label!r} spans {t1 - t0:.3f} s, shorter than the {window_seconds} s window"
        )
    return rng.uniform(t0, t1 - window_seconds, size=n)


def bootstrap_probability(trace_e: PowerTrace, trace_i: PowerTrace, cfg: BootstrapConfig) -> np.ndarray:
    """Resampled ratios mean(window of P_E) / mean(window of P_I).

    Windows are contiguous, of equal length, with independently drawn start
    times in each trace; this preserves short-timescale structure while
    averaging fast noise.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    starts_e = _window_starts(rng, trace_e, cfg.window_seconds, cfg.n_resamples)
    starts_i = _window_starts(rng, trace_i, cfg.window_seconds, cfg.n_resamples)
    means_e = window_means(trace_e, starts_e, cfg.window_seconds)
    means_i = window_means(trace_i, starts_i, cfg.window_seconds)
    if np.any(means_i <= 0):
        raise InputError("bootstrap drew a window with nonpositive input power")
    return means_e / means_i


def corrected_probability(p: np.ndarray | float, eta_s: float) -> np.ndarray | float:
    """Undo the substrate loss accrued over the two splitter traversals."""
    if not (0.0 < eta_s <= 1.0):
        raise InputError(f"eta_s must lie in (0, 1], got {eta_s}")
    return p / (eta_s * eta_s)


def measure_from_probability(p_corrected: np.ndarray | float) -> MeasureDistribution:
    """Apply the designed loss factor and summarize the measure distribution."""
    samples = np.atleast_1d(np.asarray(p_corrected, dtype=float)) * LOSS_FACTOR
    return MeasureDistribution.from_samples(samples)


def extract_phase(i_phi: float, i_1: float, i_2: float) -> float | None:
    """Interferometric phase from the combined and individual intensities.

    Inverts I(phi) = I1 + I2 + 2 sqrt(I1 I2) cos(phi) onto [0, pi].  Returns
    None when the intensities are incompatible with interference of the two
    beams (|cos| would exceed 1), which marks the sample as rejected.
    """
    if i_1 <= 0 or i_2 <= 0:
        raise InputError("individual intensities must be positive to extract a phase")
    cos_phi = (i_phi - i_1 - i_2) / (2.0 * math.sqrt(i_1 * i_2))
    if abs(cos_phi) > 1.0 + _COS_GRACE:
        return None
    return math.acos(min(1.0, max(-1.0, cos_phi)))


def phase_distribution(
    trace_int: PowerTrace,
    trace_01: PowerTrace,
    trace_11: PowerTrace,
    cfg: BootstrapConfig,
) -> PhaseDistribution:
    """Bootstrap the phase: windowed intensity triples through extract_phase.

    The phase formula is scale-invariant, so raw powers serve as intensities.
    Samples failing the interference criterion are dropped and counted; more
    than half rejected aborts, as such data cannot support a phase estimate.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    i_phi = window_means(trace_int, _window_starts(rng, trace_int, cfg.window_seconds, cfg.n_resamples), cfg.window_seconds)
    i_1 = window_means(trace_01, _window_starts(rng, trace_01, cfg.window_seconds, cfg.n_resamples), cfg.window_seconds)
    i_2 = window_means(trace_11, _window_starts(rng, trace_11, cfg.window_seconds, cfg.n_resamples), cfg.window_seconds)
    if np.any(i_1 <= 0) or np.any(i_2 <= 0):
        raise InputError("individual intensities must be positive to extract a phase")
    cos_phi = (i_phi - i_1 - i_2) / (2.0 * np.sqrt(i_1 * i_2))
    valid = np.abs(cos_phi) <= 1.0 + _COS_GRACE
    rejection = 1.0 - float(np.count_nonzero(valid)) / cfg.n_resamples
    if rejection > 0.5:
        exc = DegenerateDataError(
            f"phase criterion rejected {rejection:.1%} of samples; data cannot support a phase estimate"
        )
        exc.rejection_fraction = rejection
        raise exc
    phases = np.arccos(np.clip(cos_phi[valid], -1.0, 1.0))
    return PhaseDistribution(samples=phases, rejection_fraction=rejection, n_total=cfg.n_resamples)


def intensity_measure(
    p_00: PowerTrace | float,
    p_01: PowerTrace | float,
    p_11: PowerTrace | float,
    p_i: PowerTrace | float,
    eta_s: float,
) -> float:
    """Zero-phase measure from per-history powers:
    I(g) = (2/eta_s^2)(P_g/P_I), mu = I00 + I01 + I11 + 2 sqrt(I01 I11)."""
    if not (0.0 < eta_s <= 1.0):
        raise InputError(f"eta_s must lie in (0, 1], got {eta_s}")
    denom = _mean_power(p_i)
    if denom <= 0:
        raise InputError("input power P_I must be positive")
    powers = [_mean_power(p) for p in (p_00, p_01, p_11)]
    if any(p < 0 for p in powers):
        raise InputError("history powers must be nonnegative")
    i00, i01, i11 = ((2.0 / eta_s**2) * (p / denom) for p in powers)
    return i00 + i01 + i11 + 2.0 * math.sqrt(i01 * i11)


def theoretical_measure(
    noise: NoiseModel,
    phase_samples: np.ndarray | None,
    n_draws: int,
    seed: int = 0,
) -> MeasureDistribution:
    """Expectation band: per draw, sample component imperfections, propagate
    the isolated history fields through the circuit, pick a phase sample, and
    evaluate mu = |A(00)|^2 + |A(01) + e^{i phi} A(11)|^2 componentwise.

    Amplitudes are normalized by folding out the substrate loss and undoing
    the designed factor-2 discard; deviations of the real components from
    their design values remain in the result.
    """
    if n_draws < 1:
        raise InputError("n_draws must be at least 1")
    rng = np.random.default_rng(seed)
    phases = None
    if phase_samples is not None:
        phases = np.asarray(phase_samples, dtype=float)
        if phases.size == 0:
            phases = None
    mus = np.empty(n_draws)
    for k in range(n_draws):
        params = noise.sample_filter_params(rng, phi_g=0.0, fold_out_substrate=True)
        fields = dsi_history_fields(params, histories=("00", "01", "11"))
        phi = float(phases[rng.integers(phases.size)]) if phases is not None else 0.0
        mus[k] = _measure_from_fields(fields, phi)
    return MeasureDistribution.from_samples(mus)


def _measure_from_fields(fields: dict[str, dict[str, complex]], phi: float) -> float:
    """Combine isolated history fields; the factor 2 undoes the designed loss."""
    rot = complex(math.cos(phi), math.sin(phi))
    direct = sum(abs(a) ** 2 for a in fields["00"].values())
    interference = sum(
        abs(fields["01"][pol] + rot * fields["11"][pol]) ** 2 for pol in fields["01"]
    )
    return LOSS_FACTOR * (direct + interference)


def significance_from_sigma(median: float, reference: float, sigma: float) -> float:
    if sigma <= 0:
        raise DegenerateDataError("significance undefined for zero spread")
    return abs(median - reference) / sigma


def significance(dist: MeasureDistribution, reference: float, convention: str = "std") -> float:
    """|median - reference| in units of the spread chosen by ``convention``.

    ``std`` uses the sample standard deviation; ``sigma-plus``/``sigma-minus``
    the percentile widths; ``side-matched`` the width on the side the
    reference lies on.
    """
    if convention not in SIGMA_CONVENTIONS:
        raise InputError(f"unknown sigma convention {convention!r}; choose from {SIGMA_CONVENTIONS}")
    if convention == "std":
        sigma = float(np.std(dist.samples))
    elif convention == "sigma-plus":
        sigma = dist.sigma_plus
    elif convention == "sigma-minus":
        sigma = dist.sigma_minus
    else:
        sigma = dist.sigma_plus if reference >= dist.median else dist.sigma_minus
    return significance_from_sigma(dist.median, reference, sigma)


# ---------------------------------------------------------------------------
# end-to-end pipeline and report assembly


#: The classical probability ceiling the measured value is tested against.
CLASSICAL_BOUND = 1.0


@dataclass(frozen=True)
class AnalysisResult:
    measure: MeasureDistribution
    theory: MeasureDistribution
    phase: PhaseDistribution | None
    eta_s: float
    mu_phi0_intensity: float
    report: dict


def run_pipeline(
    traces: dict[str, PowerTrace],
    cfg: BootstrapConfig,
    noise: NoiseModel | None = None,
    theory_draws: int = 4000,
    sigma_convention: str = "std",
) -> AnalysisResult:
    """Full inference chain on a labeled trace set; see the module docstring.

    A failed phase step (criterion rejecting most samples) degrades the run
    instead of aborting it: the report records the reason and the theory band
    falls back to zero phase.
    """
    require_traces(traces, ("P_I", "P_E", "P_T", "P_R", "P_int", "P_01", "P_11", "P_00"))
    noise = noise or NoiseModel.ideal()

    eta_s = transmittance(traces["P_I"], traces["P_T"], traces["P_R"])
    raw = bootstrap_probability(traces["P_E"], traces["P_I"], cfg)
    corrected = corrected_probability(raw, eta_s)
    dist = measure_from_probability(corrected)

    phase: PhaseDistribution | None
    phase_note = None
    phase_rejection = None
    try:
        phase = phase_distribution(traces["P_int"], traces["P_01"], traces["P_11"], cfg)
        phase_rejection = phase.rejection_fraction
    except DegenerateDataError as exc:
        phase = None
        phase_note = str(exc)
        phase_rejection = getattr(exc, "rejection_fraction", None)

    theory = theoretical_measure(
        noise,
        phase.samples if phase is not None else None,
        n_draws=theory_draws,
        seed=cfg.rng_seed,
    )
    mu_phi0 = intensity_measure(traces["P_00"], traces["P_01"], traces["P_11"], traces["P_I"], eta_s)

    significances: dict[str, float | None] = {}
    degenerate: dict[str, str] = {}
    for key, reference in (("vs_classical_bound", CLASSICAL_BOUND), ("vs_theory", theory.median)):
        try:
            significances[key] = significance(dist, reference, sigma_convention)
        except DegenerateDataError as exc:
            significances[key] = None
            degenerate[key] = str(exc)

    report = {
        **dist.summary(),
        "rejection_fraction": phase_rejection,
        "eta_s": eta_s,
        "mu_phi0_intensity": mu_phi0,
        "significance": {**significances, "convention": sigma_convention},
        "theory": theory.summary(),
        "phase": (
            {
                "median_rad": float(np.median(phase.samples)),
                "n_accepted": int(phase.samples.size),
            }
            if phase is not None
            else None
        ),
        "notes": _notes(phase_note, degenerate),
    }
    return AnalysisResult(
        measure=dist, theory=theory, phase=phase, eta_s=eta_s, mu_phi0_intensity=mu_phi0, report=report
    )


def _notes(phase_note: str | None, degenerate: dict[str, str]) -> list[str]:
    notes = []
    if phase_note:
        notes.append(f"phase step degraded: {phase_note}; theory band assumes zero phase")
    for key, msg in degenerate.items():
        notes.append(f"significance {key} degenerate: {msg}")
    return notes


def report_from_summary(
    median: float,
    sigma_plus: float,
    sigma_minus: float,
    significances: dict[str, float | None],
    provenance: str,
    n_samples: int | None = None,
    sigma_convention: str = "std",
) -> dict:
    """Assemble a report in the pipeline's schema from externally supplied
    summary statistics; ``provenance`` must say where the numbers came from."""
    return {
        "median": median,
        "sigma_plus": sigma_plus,
        "sigma_minus": sigma_minus,
        "n_samples": n_samples,
        "rejection_fraction": None,
        "significance": {**significances, "convention": sigma_convention},
        "provenance": provenance,
    }


def histogram_table(samples: np.ndarray, bins: int | str = "fd") -> list[tuple[float, float, int]]:
    """(bin_left, bin_right, count) rows; Freedman-Diaconis binning by default."""
    counts, edges = np.histogram(np.asarray(samples, dtype=float), bins=bins)
    return [(float(edges[i]), float(edges[i + 1]), int(c)) for i, c in enumerate(counts)]


def write_histogram_csv(path: str | Path, samples: np.ndarray, bins: int | str = "fd") -> None:
    rows = histogram_table(samples, bins=bins)
    lines = ["bin_left,bin_right,count"]
    lines.extend(f"{left!r},{right!r},{count}" for left, right, count in rows)
    Path(path).write_text("\n".join(lines) + "\n")
