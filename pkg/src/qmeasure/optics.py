"""Amplitude-level simulation of the displaced-Sagnac event-filter circuit.

The optical state is a map from (path label, polarization) modes to complex
amplitudes, normalized so the circuit input carries unit power.  Components
transform the map one after another in circuit order; paths can be blocked,
which zeroes their amplitude wherever they appear (the simulation analog of
dropping a beam block into the setup).

Conventions, fixed so the three canonical intermediate states of the filter
come out verbatim:

* A beamsplitter maps its two inputs (a, b) to outputs
  (t a + r e^{i phi} b, r e^{i phi} a + t b), each scaled by sqrt(eta_s) per
  traversal of the substrate.
* A half-wave plate with fast axis at theta applies
  [[cos 2theta, sin 2theta], [sin 2theta, -cos 2theta]] on (H, V); theta =
  pi/4 swaps H and V, theta = pi/8 maps them to the +/- diagonal basis.
* A polarizing beamsplitter transmits H and reflects V, with optional power
  extinction fractions leaking into the wrong port.
* Mirrors treat H as p-polarized and V as s-polarized (beams stay in the
  horizontal bench plane).

The double-passed splitter of the Sagnac ring appears as two circuit stages
sharing one parameter set, so its substrate transmittance enters twice, and
the ring mirrors appear as one combined element per arm, placed after the
in-arm plates.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ConfigurationError, ParseError, WiringError
from .histories import BeamsplitterParams, HopperModel, dsi_role_table

Mode = tuple[str, str]

POLARIZATIONS = ("H", "V")


@dataclass(frozen=True)
class ModeState:
    """Complex amplitudes over (path, polarization) modes."""

    amplitudes: dict[Mode, complex]

    def get(self, path: str, pol: str) -> complex:
        return self.amplitudes.get((path, pol), 0.0 + 0.0j)

    def power(self, paths: Iterable[str] | None = None) -> float:
        """Total |amplitude|^2, optionally restricted to the given paths."""
        if paths is None:
            return sum(abs(a) ** 2 for a in self.amplitudes.values())
        wanted = set(paths)
        return sum(abs(a) ** 2 for (p, _), a in self.amplitudes.items() if p in wanted)

    def nonzero_modes(self) -> list[Mode]:
        return sorted(m for m, a in self.amplitudes.items() if a != 0)


# ---------------------------------------------------------------------------
# components


@dataclass(frozen=True)
class BeamSplitter:
    name: str
    in_a: str
    in_b: str | None
    out_a: str
    out_b: str
    t: float
    r: float
    phi: float
    eta_s: float = 1.0

    def __post_init__(self):
        if abs(self.t**2 + self.r**2 - 1.0) > 1e-12:
            raise ConfigurationError(f"{self.name}: beamsplitter needs t^2 + r^2 = 1")
        if not (0.0 < self.eta_s <= 1.0):
            raise ConfigurationError(f"{self.name}: eta_s must lie in (0, 1], got {self.eta_s}")

    def inputs(self) -> tuple[str, ...]:
        return (self.in_a,) if self.in_b is None else (self.in_a, self.in_b)

    def outputs(self) -> tuple[str, ...]:
        return (self.out_a, self.out_b)

    def apply(self, amps: dict[Mode, complex]) -> None:
        scale = math.sqrt(self.eta_s)
        refl = self.r * cmath.exp(1j * self.phi)
        for pol in POLARIZATIONS:
            a = amps.pop((self.in_a, pol), 0.0 + 0.0j)
            b = amps.pop((self.in_b, pol), 0.0 + 0.0j) if self.in_b is not None else 0.0 + 0.0j
            if a == 0 and b == 0:
                continue
            amps[(self.out_a, pol)] = scale * (self.t * a + refl * b)
            amps[(self.out_b, pol)] = scale * (refl * a + self.t * b)

    def to_json(self) -> dict:
        return {
            "kind": "beam_splitter", "name": self.name,
            "in_a": self.in_a, "in_b": self.in_b, "out_a": self.out_a, "out_b": self.out_b,
            "t": self.t, "r": self.r, "phi": self.phi, "eta_s": self.eta_s,
        }


@dataclass(frozen=True)
class PolarizingBS:
    """Transmits H, reflects V; ``extinction_t`` is the power fraction of V
    leaking into the transmit port, ``extinction_r`` that of H into reflect."""

    name: str
    path_in: str
    out_transmit: str
    out_reflect: str
    extinction_t: float = 0.0
    extinction_r: float = 0.0

    def __post_init__(self):
        for label, eps in (("extinction_t", self.extinction_t), ("extinction_r", self.extinction_r)):
            if not (0.0 <= eps <= 1.0):
                raise ConfigurationError(f"{self.name}: {label} must lie in [0, 1]")

    def inputs(self) -> tuple[str, ...]:
        return (self.path_in,)

    def outputs(self) -> tuple[str, ...]:
        return (self.out_transmit, self.out_reflect)

    def apply(self, amps: dict[Mode, complex]) -> None:
        a_h = amps.pop((self.path_in, "H"), 0.0 + 0.0j)
        a_v = amps.pop((self.path_in, "V"), 0.0 + 0.0j)
        if a_h != 0:
            amps[(self.out_transmit, "H")] = a_h * math.sqrt(1.0 - self.extinction_r)
            leak = a_h * math.sqrt(self.extinction_r)
            if leak != 0:
                amps[(self.out_reflect, "H")] = leak
        if a_v != 0:
            amps[(self.out_reflect, "V")] = a_v * math.sqrt(1.0 - self.extinction_t)
            leak = a_v * math.sqrt(self.extinction_t)
            if leak != 0:
                amps[(self.out_transmit, "V")] = leak

    def to_json(self) -> dict:
        return {
            "kind": "polarizing_bs", "name": self.name, "path_in": self.path_in,
            "out_transmit": self.out_transmit, "out_reflect": self.out_reflect,
            "extinction_t": self.extinction_t, "extinction_r": self.extinction_r,
        }


@dataclass(frozen=True)
class HalfWavePlate:
    name: str
    path: str
    theta: float

    def inputs(self) -> tuple[str, ...]:
        return (self.path,)

    def outputs(self) -> tuple[str, ...]:
        return (self.path,)

    def apply(self, amps: dict[Mode, complex]) -> None:
        a_h = amps.pop((self.path, "H"), 0.0 + 0.0j)
        a_v = amps.pop((self.path, "V"), 0.0 + 0.0j)
        if a_h == 0 and a_v == 0:
            return
        c = math.cos(2.0 * self.theta)
        s = math.sin(2.0 * self.theta)
        amps[(self.path, "H")] = c * a_h + s * a_v
        amps[(self.path, "V")] = s * a_h - c * a_v

    def to_json(self) -> dict:
        return {"kind": "half_wave_plate", "name": self.name, "path": self.path, "theta": self.theta}


@dataclass(frozen=True)
class PhasePlate:
    name: str
    path: str
    phase: float

    def inputs(self) -> tuple[str, ...]:
        return (self.path,)

    def outputs(self) -> tuple[str, ...]:
        return (self.path,)

    def apply(self, amps: dict[Mode, complex]) -> None:
        factor = cmath.exp(1j * self.phase)
        for pol in POLARIZATIONS:
            mode = (self.path, pol)
            if mode in amps:
                amps[mode] *= factor

    def to_json(self) -> dict:
        return {"kind": "phase_plate", "name": self.name, "path": self.path, "phase": self.phase}


@dataclass(frozen=True)
class Mirror:
    name: str
    path: str
    r_s: float = 1.0
    r_p: float = 1.0
    phase_s: float = 0.0
    phase_p: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.r_s <= 1.0 and 0.0 <= self.r_p <= 1.0):
            raise ConfigurationError(f"{self.name}: reflectivities must lie in [0, 1]")

    def inputs(self) -> tuple[str, ...]:
        return (self.path,)

    def outputs(self) -> tuple[str, ...]:
        return (self.path,)

    def apply(self, amps: dict[Mode, complex]) -> None:
        mode_h = (self.path, "H")
        mode_v = (self.path, "V")
        if mode_h in amps:
            amps[mode_h] *= math.sqrt(self.r_p) * cmath.exp(1j * self.phase_p)
        if mode_v in amps:
            amps[mode_v] *= math.sqrt(self.r_s) * cmath.exp(1j * self.phase_s)

    def to_json(self) -> dict:
        return {
            "kind": "mirror", "name": self.name, "path": self.path,
            "r_s": self.r_s, "r_p": self.r_p, "phase_s": self.phase_s, "phase_p": self.phase_p,
        }


@dataclass(frozen=True)
class Polarizer:
    name: str
    path: str
    axis: str = "H"
    extinction: float = 0.0

    def __post_init__(self):
        if self.axis not in POLARIZATIONS:
            raise ConfigurationError(f"{self.name}: axis must be 'H' or 'V'")
        if not (0.0 <= self.extinction <= 1.0):
            raise ConfigurationError(f"{self.name}: extinction must lie in [0, 1]")

    def inputs(self) -> tuple[str, ...]:
        return (self.path,)

    def outputs(self) -> tuple[str, ...]:
        return (self.path,)

    def apply(self, amps: dict[Mode, complex]) -> None:
        other = "V" if self.axis == "H" else "H"
        mode = (self.path, other)
        if mode in amps:
            a = amps.pop(mode) * math.sqrt(self.extinction)
            if a != 0:
                amps[mode] = a

    def to_json(self) -> dict:
        return {
            "kind": "polarizer", "name": self.name, "path": self.path,
            "axis": self.axis, "extinction": self.extinction,
        }


Component = BeamSplitter | PolarizingBS | HalfWavePlate | PhasePlate | Mirror | Polarizer

_COMPONENT_KINDS = {
    "beam_splitter": BeamSplitter,
    "polarizing_bs": PolarizingBS,
    "half_wave_plate": HalfWavePlate,
    "phase_plate": PhasePlate,
    "mirror": Mirror,
    "polarizer": Polarizer,
}


# ---------------------------------------------------------------------------
# circuit


@dataclass(frozen=True)
class OpticalCircuit:
    """Ordered component list with single-feed wiring, evaluated in one pass."""

    components: tuple[Component, ...]
    input_port: str
    monitored_ports: dict[str, tuple[str, ...]]

    def __post_init__(self):
        live = {self.input_port}
        seen = {self.input_port}
        for i, comp in enumerate(self.components):
            for label in comp.inputs():
                if label not in live:
                    raise WiringError(
                        f"component {i} ({comp.to_json()['kind']} '{comp.name}'): "
                        f"input path '{label}' is not fed at this stage"
                    )
            in_place = set(comp.inputs()) == set(comp.outputs())
            if not in_place:
                live -= set(comp.inputs())
                for label in comp.outputs():
                    if label in seen:
                        raise WiringError(
                            f"component {i} ({comp.to_json()['kind']} '{comp.name}'): "
                            f"output path '{label}' already used"
                        )
                    live.add(label)
                    seen.add(label)
        object.__setattr__(self, "_labels", frozenset(seen))
        for port, paths in self.monitored_ports.items():
            for p in paths:
                if p not in seen:
                    raise WiringError(f"monitored port '{port}' references unknown path '{p}'")

    @property
    def path_labels(self) -> frozenset[str]:
        return self._labels  # type: ignore[attr-defined]

    def to_json(self) -> dict:
        return {
            "input_port": self.input_port,
            "monitored_ports": {k: list(v) for k, v in self.monitored_ports.items()},
            "components": [c.to_json() for c in self.components],
        }

    @classmethod
    def from_json(cls, doc: dict) -> OpticalCircuit:
        for key in ("input_port", "monitored_ports", "components"):
            if key not in doc:
                raise ConfigurationError(f"netlist missing '{key}'")
        components = []
        for i, raw in enumerate(doc["components"]):
            kind = raw.get("kind")
            if kind not in _COMPONENT_KINDS:
                raise ConfigurationError(f"component {i}: unknown kind {kind!r}")
            ctor = _COMPONENT_KINDS[kind]
            fields = {k: v for k, v in raw.items() if k != "kind"}
            try:
                components.append(ctor(**fields))
            except TypeError as exc:
                missing = _missing_ctor_args(ctor, fields)
                what = f"missing parameter(s) {', '.join(missing)}" if missing else str(exc)
                raise ConfigurationError(f"component {i} ({kind} '{raw.get('name', '?')}'): {what}") from exc
        return cls(
            components=tuple(components),
            input_port=doc["input_port"],
            monitored_ports={k: tuple(v) for k, v in doc["monitored_ports"].items()},
        )

    @classmethod
    def load(cls, path: str | Path) -> OpticalCircuit:
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed netlist JSON in {path}: {exc.msg}", exc.lineno, exc.colno) from exc
        return cls.from_json(doc)


def _missing_ctor_args(ctor, fields: dict) -> list[str]:
    import inspect

    sig = inspect.signature(ctor)
    return [
        name for name, p in sig.parameters.items()
        if p.default is inspect.Parameter.empty and name not in fields
    ]


@dataclass(frozen=True)
class CircuitResult:
    final: ModeState
    stages: tuple[tuple[str, ModeState], ...]

    def after(self, name: str) -> ModeState:
        for stage_name, state in self.stages:
            if stage_name == name:
                return state
        raise WiringError(f"no recorded stage named '{name}'")


def run_circuit(
    circuit: OpticalCircuit,
    blocked_paths: Iterable[str] = (),
    input_polarization: str = "H",
    record: bool = False,
) -> CircuitResult:
    """Propagate unit input power through the circuit.

    ``blocked_paths`` are zeroed on sight, before and after every component,
    mimicking physical beam blocks.
    """
    blocked = frozenset(blocked_paths)
    unknown = blocked - circuit.path_labels
    if unknown:
        raise WiringError(f"cannot block unknown path(s): {', '.join(sorted(unknown))}")
    amps: dict[Mode, complex] = {(circuit.input_port, input_polarization): 1.0 + 0.0j}
    _drop_blocked(amps, blocked)
    stages: list[tuple[str, ModeState]] = []
    for comp in circuit.components:
        comp.apply(amps)
        _drop_blocked(amps, blocked)
        if record:
            stages.append((comp.name, ModeState(dict(amps))))
    return CircuitResult(final=ModeState(dict(amps)), stages=tuple(stages))


def _drop_blocked(amps: dict[Mode, complex], blocked: frozenset[str]) -> None:
    if not blocked:
        return
    for mode in [m for m in amps if m[0] in blocked]:
        del amps[mode]


def apply_component(state: ModeState, component: Component) -> ModeState:
    """One component applied to an immutable state; returns the new state."""
    amps = dict(state.amplitudes)
    component.apply(amps)
    return ModeState(amps)


def port_powers(circuit: OpticalCircuit, blocked_paths: Iterable[str] = ()) -> dict[str, float]:
    """Power at every monitored port for unit input power."""
    state = run_circuit(circuit, blocked_paths=blocked_paths).final
    return {port: state.power(paths) for port, paths in circuit.monitored_ports.items()}


# ---------------------------------------------------------------------------
# the canonical displaced-Sagnac event filter


@dataclass(frozen=True)
class MirrorParams:
    r_s: float = 1.0
    r_p: float = 1.0
    phase_s: float = 0.0
    phase_p: float = 0.0

    def to_json(self) -> dict:
        return {"r_s": self.r_s, "r_p": self.r_p, "phase_s": self.phase_s, "phase_p": self.phase_p}

    @classmethod
    def from_json(cls, doc: dict) -> MirrorParams:
        return cls(**doc)


@dataclass(frozen=True)
class FilterParams:
    """Full parameter set of the event-filter circuit; defaults are ideal."""

    bs1: BeamsplitterParams = field(default_factory=BeamsplitterParams.ideal)
    eta_s: float = 1.0
    phi_g: float = 0.0
    bs2: BeamsplitterParams = field(default_factory=BeamsplitterParams.ideal)
    bs2_eta_s: float = 1.0
    hwp1_theta: float = math.pi / 4.0
    hwp2_theta: float = math.pi / 8.0
    hwp3_theta: float = math.pi / 4.0
    pbs1_extinction_t: float = 0.0
    pbs1_extinction_r: float = 0.0
    pbs2_extinction_t: float = 0.0
    pbs2_extinction_r: float = 0.0
    mirror_a: MirrorParams = field(default_factory=MirrorParams)
    mirror_c: MirrorParams = field(default_factory=MirrorParams)
    input_polarizer_extinction: float = 0.0

    def to_json(self) -> dict:
        return {
            "bs1": {"t": self.bs1.t, "r": self.bs1.r, "phi": self.bs1.phi},
            "eta_s": self.eta_s,
            "phi_g": self.phi_g,
            "bs2": {"t": self.bs2.t, "r": self.bs2.r, "phi": self.bs2.phi},
            "bs2_eta_s": self.bs2_eta_s,
            "hwp1_theta": self.hwp1_theta,
            "hwp2_theta": self.hwp2_theta,
            "hwp3_theta": self.hwp3_theta,
            "pbs1_extinction_t": self.pbs1_extinction_t,
            "pbs1_extinction_r": self.pbs1_extinction_r,
            "pbs2_extinction_t": self.pbs2_extinction_t,
            "pbs2_extinction_r": self.pbs2_extinction_r,
            "mirror_a": self.mirror_a.to_json(),
            "mirror_c": self.mirror_c.to_json(),
            "input_polarizer_extinction": self.input_polarizer_extinction,
        }

    @classmethod
    def from_json(cls, doc: dict) -> FilterParams:
        kwargs = dict(doc)
        for bs_key in ("bs1", "bs2"):
            if bs_key in kwargs:
                raw = kwargs[bs_key]
                missing = [k for k in ("t", "r", "phi") if k not in raw]
                if missing:
                    raise ConfigurationError(f"{bs_key}: missing parameter(s) {', '.join(missing)}")
                kwargs[bs_key] = BeamsplitterParams(t=raw["t"], r=raw["r"], phi=raw["phi"])
        for m_key in ("mirror_a", "mirror_c"):
            if m_key in kwargs:
                kwargs[m_key] = MirrorParams.from_json(kwargs[m_key])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigurationError(f"bad filter parameter set: {exc}") from exc


#: Internal path labels the experiment drops beam blocks on, per monitored power.
DSI_MONITOR_BLOCKS: dict[str, tuple[str, ...]] = {
    "P_E": (),
    "P_int": ("U",),
    "P_01": ("U", "C"),
    "P_11": ("U", "A"),
    "P_00": ("L",),
}

#: Blocks isolating a single history, and the output path it then reaches.
DSI_HISTORY_ROUTES: dict[str, tuple[tuple[str, ...], str]] = {
    "00": (("C",), "out_u"),
    "01": (("C", "U"), "out_l"),
    "10": (("A",), "out_u"),
    "11": (("A", "U"), "out_l"),
}


def build_dsi_filter(params: FilterParams) -> OpticalCircuit:
    """The event-filter circuit for the history set {00, 01, 11}.

    Stage order: input polarizer, first splitter pass (arms A and C), glass
    plate on A / half-wave plate on C, arm mirrors, second splitter pass
    (outputs U and L), then per-branch selection: U goes through a polarizing
    splitter that discards history 10, a half-wave plate and the tap splitter;
    L goes through the diagonal-basis plate and the second polarizing
    splitter.  Both branch outputs land on the power-meter port PM.
    """
    bs1, bs2 = params.bs1, params.bs2
    components: tuple[Component, ...] = (
        Polarizer("gt", "in", axis="H", extinction=params.input_polarizer_extinction),
        BeamSplitter("bs1_pass1", in_a="in", in_b=None, out_a="A", out_b="C",
                     t=bs1.t, r=bs1.r, phi=bs1.phi, eta_s=params.eta_s),
        PhasePlate("glass_plate", "A", params.phi_g),
        HalfWavePlate("hwp1", "C", params.hwp1_theta),
        Mirror("mirrors_a", "A", **params.mirror_a.to_json()),
        Mirror("mirrors_c", "C", **params.mirror_c.to_json()),
        BeamSplitter("bs1_pass2", in_a="A", in_b="C", out_a="U", out_b="L",
                     t=bs1.t, r=bs1.r, phi=bs1.phi, eta_s=params.eta_s),
        PolarizingBS("pbs1", "U", out_transmit="U1", out_reflect="discard_10",
                     extinction_t=params.pbs1_extinction_t, extinction_r=params.pbs1_extinction_r),
        HalfWavePlate("hwp3", "U1", params.hwp3_theta),
        BeamSplitter("bs2", in_a="U1", in_b=None, out_a="out_u", out_b="bs2_tap",
                     t=bs2.t, r=bs2.r, phi=bs2.phi, eta_s=params.bs2_eta_s),
        HalfWavePlate("hwp2", "L", params.hwp2_theta),
        PolarizingBS("pbs2", "L", out_transmit="out_l", out_reflect="discard_minus",
                     extinction_t=params.pbs2_extinction_t, extinction_r=params.pbs2_extinction_r),
    )
    return OpticalCircuit(
        components=components,
        input_port="in",
        monitored_ports={
            "PM": ("out_u", "out_l"),
            "discard_10": ("discard_10",),
            "bs2_tap": ("bs2_tap",),
            "discard_minus": ("discard_minus",),
        },
    )


def dsi_monitor_powers(params: FilterParams) -> dict[str, float]:
    """PM power ratio under each of the experiment's block configurations,
    plus the single-pass transmitted/reflected powers used for the
    transmittance calibration."""
    circuit = build_dsi_filter(params)
    powers = {
        label: port_powers(circuit, blocked_paths=blocks)["PM"]
        for label, blocks in DSI_MONITOR_BLOCKS.items()
    }
    single = single_pass_powers(params)
    powers["P_T"] = single["T"]
    powers["P_R"] = single["R"]
    return powers


def single_pass_powers(params: FilterParams) -> dict[str, float]:
    """One traversal of the main splitter: powers behind its two outputs."""
    circuit = OpticalCircuit(
        components=(
            Polarizer("gt", "in", axis="H", extinction=params.input_polarizer_extinction),
            BeamSplitter("bs1_single", in_a="in", in_b=None, out_a="T", out_b="R",
                         t=params.bs1.t, r=params.bs1.r, phi=params.bs1.phi, eta_s=params.eta_s),
        ),
        input_port="in",
        monitored_ports={"T": ("T",), "R": ("R",)},
    )
    return port_powers(circuit)


def dsi_history_fields(
    params: FilterParams,
    histories: Sequence[str] = ("00", "01", "11"),
) -> dict[str, dict[str, complex]]:
    """Output-port field of each history, isolated by blocking the others.

    Returns, per history, the complex amplitude by polarization at the PM
    port path it reaches.  These carry the designed 1/sqrt(2) branch loss and
    the substrate factor; callers normalize as needed.
    """
    circuit = build_dsi_filter(params)
    fields: dict[str, dict[str, complex]] = {}
    for gamma in histories:
        if gamma not in DSI_HISTORY_ROUTES:
            raise ConfigurationError(f"unknown filter history {gamma!r}")
        blocks, out_path = DSI_HISTORY_ROUTES[gamma]
        state = run_circuit(circuit, blocked_paths=blocks).final
        fields[gamma] = {pol: state.get(out_path, pol) for pol in POLARIZATIONS}
    return fields


def dsi_equivalent_model(params: FilterParams) -> HopperModel:
    """Hopper model realized by the filter's ring: the same splitter twice,
    with the Sagnac site labeling (first-pass transmission is site 0)."""
    return HopperModel(steps=(params.bs1, params.bs1), role_table=dsi_role_table(2))
