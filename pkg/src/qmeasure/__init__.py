"""Quantum measures of two-site hopper events, end to end.

Three layers: ``histories`` computes event measures over finite history
spaces; ``optics`` simulates the polarization-ancilla event filter at the
amplitude level; ``traces``/``analysis`` run the experimental inference
pipeline from power traces to a measure distribution with significance
statistics.  ``cli`` binds them into the ``qmeasure`` command.
"""

__version__ = "0.1.0"

from .analysis import (
    BootstrapConfig,
    MeasureDistribution,
    PhaseDistribution,
    bootstrap_probability,
    corrected_probability,
    extract_phase,
    intensity_measure,
    measure_from_probability,
    phase_distribution,
    run_pipeline,
    significance,
    theoretical_measure,
    transmittance,
)
from .errors import (
    ConfigurationError,
    ContractViolationError,
    DegenerateDataError,
    InputError,
    ParseError,
    QMeasureError,
    WiringError,
)
from .histories import (
    BeamsplitterParams,
    Event,
    History,
    HistorySpace,
    HopperModel,
    amplitude,
    default_role_table,
    dsi_role_table,
    enumerate_histories,
    is_serial,
    measure,
    measure_oracle,
)
from .noise import Distribution, NoiseModel
from .optics import (
    FilterParams,
    MirrorParams,
    ModeState,
    OpticalCircuit,
    apply_component,
    build_dsi_filter,
    dsi_equivalent_model,
    dsi_history_fields,
    dsi_monitor_powers,
    port_powers,
    run_circuit,
)
from .traces import PowerTrace, TraceScenario, load_manifest, synthesize_traces, write_trace_set
