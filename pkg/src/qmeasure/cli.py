"""Command-line front end binding the core modules into reproducible runs.

Subcommands: measure, simulate, analyze, synth, significance.  Every run that
writes outputs also writes ``run_config.json``, the fully resolved
configuration plus a creation timestamp; everything else a command produces
is byte-identical when re-run with the same inputs and seed.  Domain errors
exit nonzero with a JSON envelope ``{"error": {"code", "message"}}`` on
stderr.  The seed falls back to the QMEASURE_SEED environment variable, then
to 0.
"""

from __future__ import annotations

import dataclasses
import functools
import json
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import click
import numpy as np

from . import __version__
from . import histories as hist
from .analysis import (
    SIGMA_CONVENTIONS,
    AnalysisResult,
    BootstrapConfig,
    MeasureDistribution,
    run_pipeline,
    significance,
    significance_from_sigma,
    write_histogram_csv,
)
from .errors import ConfigurationError, InputError, QMeasureError
from .histories import Event, HopperModel
from .noise import NoiseModel
from .optics import FilterParams, OpticalCircuit, PhasePlate, build_dsi_filter, port_powers
from .traces import TraceScenario, load_manifest, synthesize_traces, write_trace_set

SEED_ENV_VAR = "QMEASURE_SEED"


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except QMeasureError as exc:
            click.echo(json.dumps({"error": {"code": exc.code, "message": str(exc)}}), err=True)
            sys.exit(1)

    return wrapper


def _resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"{SEED_ENV_VAR} must be an integer, got {raw!r}") from exc


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_provenance(out_dir: Path, command: str, config: dict) -> None:
    _write_json(
        out_dir / "run_config.json",
        {
            "command": command,
            "config": config,
            "created_utc": datetime.now(timezone.utc).isoformat(),
            "qmeasure_version": __version__,
        },
    )


def _parse_event(spec: str) -> Event:
    tokens = [tok.strip() for tok in spec.split(",") if tok.strip()]
    return Event.from_strings(tokens)


@click.group()
@click.version_option(version=__version__, prog_name="qmeasure")
def main():
    """Quantum measures of hopper events: compute, simulate, analyze."""


# ---------------------------------------------------------------------------
# measure


@main.command("measure")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="hopper model JSON")
@click.option("--event", "event_spec", required=True,
              help="comma-separated history bit-strings, e.g. '00,01,11'; empty for the empty event")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="write the result JSON here as well")
@_guarded
def cmd_measure(model_path, event_spec, out_path):
    """Quantum measure of an event under a hopper model."""
    model = HopperModel.load(model_path)
    event = _parse_event(event_spec)
    value = hist.measure(model, event)
    doc = {"measure": value, "event": event.to_strings(), "model": model.to_json()}
    click.echo(json.dumps(doc, sort_keys=True))
    if out_path:
        _write_json(Path(out_path), doc)


# ---------------------------------------------------------------------------
# simulate


def _build_circuit(netlist, dsi, params_path, phi_g, eta_s) -> OpticalCircuit:
    if netlist and dsi:
        raise click.UsageError("give either --netlist or --dsi, not both")
    if netlist:
        return OpticalCircuit.load(netlist)
    if not dsi:
        raise click.UsageError("provide --netlist or --dsi")
    if params_path:
        params = FilterParams.from_json(json.loads(Path(params_path).read_text()))
    else:
        params = FilterParams()
    if phi_g is not None:
        params = dataclasses.replace(params, phi_g=phi_g)
    if eta_s is not None:
        params = dataclasses.replace(params, eta_s=eta_s)
    return build_dsi_filter(params)


def _with_phase(circuit: OpticalCircuit, component_name: str, phase: float) -> OpticalCircuit:
    found = False
    components = []
    for comp in circuit.components:
        if isinstance(comp, PhasePlate) and comp.name == component_name:
            comp = dataclasses.replace(comp, phase=phase)
            found = True
        components.append(comp)
    if not found:
        raise ConfigurationError(f"no phase plate named {component_name!r} to sweep")
    return dataclasses.replace(circuit, components=tuple(components))


@main.command("simulate")
@click.option("--netlist", type=click.Path(exists=True, dir_okay=False), default=None,
              help="circuit netlist JSON")
@click.option("--dsi", is_flag=True, help="use the built-in event-filter circuit")
@click.option("--params", "params_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="filter parameter JSON (with --dsi)")
@click.option("--phi-g", type=float, default=None, help="override the glass-plate phase (with --dsi)")
@click.option("--eta-s", type=float, default=None, help="override the substrate transmittance (with --dsi)")
@click.option("--block", "block_spec", default="", help="comma-separated path labels to block")
@click.option("--sweep-phi-g", "sweep_steps", type=int, default=None,
              help="sweep the phase plate over [0, 2pi) in this many steps")
@click.option("--sweep-component", default="glass_plate", show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False), default=None)
@click.option("--no-figures", is_flag=True)
@_guarded
def cmd_simulate(netlist, dsi, params_path, phi_g, eta_s, block_spec, sweep_steps,
                 sweep_component, out_dir, no_figures):
    """Port powers of an optical circuit, optionally swept over the phase."""
    circuit = _build_circuit(netlist, dsi, params_path, phi_g, eta_s)
    blocked = tuple(tok.strip() for tok in block_spec.split(",") if tok.strip())
    config = {
        "netlist": netlist, "dsi": dsi, "params": params_path, "phi_g": phi_g, "eta_s": eta_s,
        "block": list(blocked), "sweep_phi_g": sweep_steps, "sweep_component": sweep_component,
    }

    if sweep_steps is None:
        powers = port_powers(circuit, blocked_paths=blocked)
        doc = {"ports": powers, "blocked": list(blocked)}
        click.echo(json.dumps(doc, sort_keys=True))
        if out_dir:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            _write_json(out / "ports.json", doc)
            _write_provenance(out, "simulate", config)
        return

    if sweep_steps < 2:
        raise InputError("--sweep-phi-g needs at least 2 steps")
    if not out_dir:
        raise click.UsageError("--sweep-phi-g requires --out-dir")
    phis = np.linspace(0.0, 2.0 * math.pi, sweep_steps, endpoint=False)
    ports = sorted(circuit.monitored_ports)
    rows = []
    for phi in phis:
        powers = port_powers(_with_phase(circuit, sweep_component, float(phi)), blocked_paths=blocked)
        rows.append([float(phi)] + [powers[p] for p in ports])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "sweep.csv"
    lines = [",".join(["phi_g"] + ports)]
    lines.extend(",".join(repr(v) for v in row) for row in rows)
    csv_path.write_text("\n".join(lines) + "\n")
    if not no_figures:
        from .plotting import save_sweep_figure

        save_sweep_figure(
            out / "sweep.png",
            phis,
            {p: np.array([row[1 + i] for row in rows]) for i, p in enumerate(ports)},
        )
    _write_provenance(out, "simulate", config)
    click.echo(f"wrote {csv_path}")


# ---------------------------------------------------------------------------
# analyze


def _parse_bins(raw: str) -> int | str:
    if raw == "fd":
        return "fd"
    try:
        n = int(raw)
    except ValueError as exc:
        raise InputError(f"--bins must be 'fd' or an integer, got {raw!r}") from exc
    if n < 1:
        raise InputError("--bins must be positive")
    return n


@main.command("analyze")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--window-seconds", type=float, default=100.0, show_default=True)
@click.option("--resamples", type=int, default=100_000, show_default=True)
@click.option("--seed", type=int, default=None, help=f"falls back to ${SEED_ENV_VAR}, then 0")
@click.option("--sigma-convention", type=click.Choice(SIGMA_CONVENTIONS), default="std", show_default=True)
@click.option("--noise-config", type=click.Path(exists=True, dir_okay=False), default=None,
              help="noise-model JSON for the theory band; omit for ideal components")
@click.option("--theory-draws", type=int, default=4000, show_default=True)
@click.option("--bins", default="fd", show_default=True, help="'fd' or a bin count for the histogram")
@click.option("--out-dir", type=click.Path(file_okay=False), default="qmeasure-analysis", show_default=True)
@click.option("--no-figures", is_flag=True)
@_guarded
def cmd_analyze(manifest_path, window_seconds, resamples, seed, sigma_convention,
                noise_config, theory_draws, bins, out_dir, no_figures):
    """Full pipeline: traces to measure distribution, theory band, significance."""
    seed = _resolve_seed(seed)
    bins = _parse_bins(bins)
    traces = load_manifest(manifest_path)
    cfg = BootstrapConfig(window_seconds=window_seconds, n_resamples=resamples, rng_seed=seed)
    noise = None
    if noise_config:
        noise = NoiseModel.from_json(json.loads(Path(noise_config).read_text()))
    result: AnalysisResult = run_pipeline(
        traces, cfg, noise=noise, theory_draws=theory_draws, sigma_convention=sigma_convention
    )

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "report.json", result.report)
    write_histogram_csv(out / "histogram.csv", result.measure.samples, bins=bins)
    if not no_figures:
        from .plotting import save_measure_figure

        save_measure_figure(out / "measure_hist.png", result.measure, theory=result.theory, bins=bins)
    _write_provenance(out, "analyze", {
        "manifest": str(manifest_path),
        "window_seconds": window_seconds,
        "resamples": resamples,
        "seed": seed,
        "sigma_convention": sigma_convention,
        "noise_config": noise_config,
        "theory_draws": theory_draws,
        "bins": str(bins),
    })
    click.echo(json.dumps(result.report, sort_keys=True))


# ---------------------------------------------------------------------------
# synth


@main.command("synth")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--mu-star", type=float, default=1.25, show_default=True)
@click.option("--eta-s", type=float, default=0.9356, show_default=True)
@click.option("--noise", "noise_fraction", type=float, default=0.01, show_default=True)
@click.option("--drift", "drift_fraction", type=float, default=0.02, show_default=True)
@click.option("--phase-jitter", type=float, default=0.0, show_default=True)
@click.option("--duration", type=float, default=3600.0, show_default=True)
@click.option("--rate", type=float, default=5.0, show_default=True)
@click.option("--seed", type=int, default=None, help=f"falls back to ${SEED_ENV_VAR}, then 0")
@_guarded
def cmd_synth(out_dir, mu_star, eta_s, noise_fraction, drift_fraction, phase_jitter,
              duration, rate, seed):
    """Write a synthetic trace set plus manifest for the analyze command."""
    seed = _resolve_seed(seed)
    scenario = TraceScenario(
        mu_star=mu_star,
        eta_s=eta_s,
        noise_fraction=noise_fraction,
        drift_fraction=drift_fraction,
        phase_jitter_rad=phase_jitter,
        duration_s=duration,
        sample_rate_hz=rate,
        seed=seed,
    )
    traces = synthesize_traces(scenario)
    manifest_path = write_trace_set(traces, out_dir)
    _write_provenance(Path(out_dir), "synth", {
        "mu_star": mu_star, "eta_s": eta_s, "noise": noise_fraction, "drift": drift_fraction,
        "phase_jitter": phase_jitter, "duration": duration, "rate": rate, "seed": seed,
    })
    click.echo(str(manifest_path))


# ---------------------------------------------------------------------------
# significance


@main.command("significance")
@click.option("--samples", "samples_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="text file with one sample per line")
@click.option("--median", "median_value", type=float, default=None,
              help="summary-statistics mode: distribution median")
@click.option("--sigma", "sigma_value", type=float, default=None,
              help="summary-statistics mode: spread to divide by")
@click.option("--reference", type=float, required=True)
@click.option("--sigma-convention", type=click.Choice(SIGMA_CONVENTIONS), default="std", show_default=True)
@_guarded
def cmd_significance(samples_path, median_value, sigma_value, reference, sigma_convention):
    """Distance of a distribution (or summary) from a reference, in sigmas."""
    if samples_path is not None:
        values = []
        for line in Path(samples_path).read_text().splitlines():
            line = line.strip()
            if not line:
                continue
            try:
                values.append(float(line))
            except ValueError as exc:
                raise InputError(f"{samples_path}: bad sample line {line!r}") from exc
        dist = MeasureDistribution.from_samples(np.array(values))
        value = significance(dist, reference, sigma_convention)
        doc = {"significance": value, "reference": reference, "convention": sigma_convention,
               "median": dist.median, "n_samples": dist.n_samples}
    elif median_value is not None and sigma_value is not None:
        value = significance_from_sigma(median_value, reference, sigma_value)
        doc = {"significance": value, "reference": reference, "convention": "external-sigma",
               "median": median_value, "sigma": sigma_value}
    else:
        raise click.UsageError("provide --samples, or both --median and --sigma")
    click.echo(json.dumps(doc, sort_keys=True))


if __name__ == "__main__":
    main()
