"""History spaces and quantum measures for finite two-site hopper models.

A hopper traverses n beamsplitters; each traversal leaves it at site 0 or 1,
so a complete history is a length-n bit sequence and the history space holds
all 2^n of them.  An event is a set of histories.  Its quantum measure is

    mu(E) = sum_{g, h in E} A(g) A*(h) [endpoint(g) == endpoint(h)]

i.e. only histories terminating at the same site interfere.  Grouping the
double sum by endpoint gives the numerically used form

    mu(E) = sum_k | sum_{g in E, endpoint(g)=k} A(g) |^2

which is manifestly real and non-negative.  ``measure_oracle`` keeps the
literal double sum as an independent cross-check.

Amplitudes are products of per-step beamsplitter factors: ``t_k`` for a
transmission, ``r_k * exp(i phi_k)`` for a reflection.  Which role a step
plays for a given history bit is fixed by the interferometer topology; see
``default_role_table`` and ``dsi_role_table``.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import ConfigurationError, ContractViolationError, InputError, ParseError

#: Reflection role marker used in role tables.
REFLECT = "r"
#: Transmission role marker used in role tables.
TRANSMIT = "t"

#: Default cap on model depth; 2^n histories get enumerated.
MAX_STEPS_DEFAULT = 24

#: Absolute tolerance for complex-arithmetic equality checks.
TOL = 1e-12

RoleTable = tuple[dict[str, str], ...]


@dataclass(frozen=True, order=True)
class History:
    """One complete trajectory: the site label (0 or 1) after each step."""

    sites: tuple[int, ...]

    def __post_init__(self):
        if len(self.sites) < 1:
            raise InputError("a history needs at least one step")
        if any(s not in (0, 1) for s in self.sites):
            raise InputError(f"history sites must be 0 or 1, got {self.sites}")

    @classmethod
    def from_string(cls, bits: str) -> History:
        if not bits or any(c not in "01" for c in bits):
            raise InputError(f"invalid history bit-string: {bits!r}")
        return cls(tuple(int(c) for c in bits))

    @property
    def endpoint(self) -> int:
        return self.sites[-1]

    def __len__(self) -> int:
        return len(self.sites)

    def __str__(self) -> str:
        return "".join(str(s) for s in self.sites)


@dataclass(frozen=True)
class HistorySpace:
    """The full set of 2^n histories for an n-step hopper, in lex order."""

    n_steps: int
    histories: tuple[History, ...]

    def __len__(self) -> int:
        return len(self.histories)

    def __iter__(self) -> Iterator[History]:
        return iter(self.histories)

    def __contains__(self, h: History) -> bool:
        return len(h) == self.n_steps

    def full_event(self, label: str | None = None) -> Event:
        return Event.of(self.histories, label=label)


@dataclass(frozen=True)
class Event:
    """A set of equal-length histories, stored in canonical sorted order."""

    members: tuple[History, ...]
    label: str | None = field(default=None, compare=False)

    @classmethod
    def of(cls, histories: Iterable[History], label: str | None = None) -> Event:
        members = sorted(histories)
        for a, b in zip(members, members[1:]):
            if a == b:
                raise InputError(f"duplicate history in event: {a}")
        lengths = {len(h) for h in members}
        if len(lengths) > 1:
            raise InputError(f"event mixes history lengths: {sorted(lengths)}")
        return cls(tuple(members), label=label)

    @classmethod
    def from_strings(cls, bits: Iterable[str], label: str | None = None) -> Event:
        return cls.of((History.from_string(b) for b in bits), label=label)

    def to_strings(self) -> list[str]:
        return [str(h) for h in self.members]

    def complement(self, space: HistorySpace) -> Event:
        _require_in_space(self, space)
        present = set(self.members)
        return Event.of(h for h in space.histories if h not in present)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[History]:
        return iter(self.members)

    def __contains__(self, h: History) -> bool:
        return h in self.members


@dataclass(frozen=True)
class BeamsplitterParams:
    """Lossless beamsplitter: real t, r with t^2 + r^2 = 1, reflection phase phi.

    Substrate losses are an optics-layer concern and are deliberately absent
    here.  Note that with the same phase factor attached to both reflections,
    the step is unitary (power-conserving across both output arms) only for
    phi = +-pi/2; other phases are allowed but describe post-selected or
    effective dynamics.
    """

    t: float
    r: float
    phi: float

    def __post_init__(self):
        if not (0.0 <= self.t <= 1.0 and 0.0 <= self.r <= 1.0):
            raise ConfigurationError(f"t and r must lie in [0, 1], got t={self.t}, r={self.r}")
        if abs(self.t * self.t + self.r * self.r - 1.0) > TOL:
            raise ConfigurationError(
                f"lossless constraint t^2 + r^2 = 1 violated: {self.t**2 + self.r**2!r}"
            )
        if not math.isfinite(self.phi):
            raise ConfigurationError("phi must be finite")

    @classmethod
    def ideal(cls) -> BeamsplitterParams:
        """Balanced 50:50 splitter with quarter-turn reflection phase."""
        inv = 1.0 / math.sqrt(2.0)
        return cls(t=inv, r=inv, phi=math.pi / 2.0)

    @property
    def reflection_factor(self) -> complex:
        return self.r * cmath.exp(1j * self.phi)


def default_role_table(n_steps: int) -> RoleTable:
    """Role map of the mirror-routed two-beamsplitter topology.

    Step 1: arriving at site 0 is a reflection, site 1 a transmission.
    Later steps: staying at the same site is a reflection, switching is a
    transmission.  For n = 2 this reproduces the four amplitudes
    A(00) = r1 e^{i phi1} r2 e^{i phi2}, A(01) = r1 e^{i phi1} t2,
    A(10) = t1 t2, A(11) = t1 r2 e^{i phi2}.
    """
    if n_steps < 1:
        raise ConfigurationError("role table needs n_steps >= 1")
    table: list[dict[str, str]] = [{"0": REFLECT, "1": TRANSMIT}]
    for _ in range(1, n_steps):
        table.append({"00": REFLECT, "01": TRANSMIT, "10": TRANSMIT, "11": REFLECT})
    return tuple(table)


def dsi_role_table(n_steps: int) -> RoleTable:
    """Role map of the displaced-Sagnac labeling, the mirror image of the default.

    There the transmitted beam after the first pass is labeled site 0 and the
    output that keeps the site label is the transmitted one.
    """
    if n_steps < 1:
        raise ConfigurationError("role table needs n_steps >= 1")
    table: list[dict[str, str]] = [{"0": TRANSMIT, "1": REFLECT}]
    for _ in range(1, n_steps):
        table.append({"00": TRANSMIT, "01": REFLECT, "10": REFLECT, "11": TRANSMIT})
    return tuple(table)


def _validate_role_table(table: Sequence[dict[str, str]], n_steps: int) -> RoleTable:
    if len(table) != n_steps:
        raise ConfigurationError(f"role table has {len(table)} entries for {n_steps} steps")
    norm: list[dict[str, str]] = []
    first = dict(table[0])
    if set(first) != {"0", "1"}:
        raise ConfigurationError(f"step 1 role entry must map sites '0' and '1', got {sorted(first)}")
    _require_split_roles(first["0"], first["1"], step=1)
    norm.append(first)
    for k, entry in enumerate(table[1:], start=2):
        entry = dict(entry)
        if set(entry) != {"00", "01", "10", "11"}:
            raise ConfigurationError(
                f"step {k} role entry must map transitions '00','01','10','11', got {sorted(entry)}"
            )
        # each input arm must split into one transmitted and one reflected branch
        _require_split_roles(entry["00"], entry["01"], step=k)
        _require_split_roles(entry["10"], entry["11"], step=k)
        norm.append(entry)
    return tuple(norm)


def _require_split_roles(a: str, b: str, step: int) -> None:
    if {a, b} != {TRANSMIT, REFLECT}:
        raise ConfigurationError(
            f"step {step}: each input arm needs one '{TRANSMIT}' and one '{REFLECT}' branch, got {a!r}/{b!r}"
        )


@dataclass(frozen=True)
class HopperModel:
    """Ordered beamsplitter parameters plus the step-role convention."""

    steps: tuple[BeamsplitterParams, ...]
    role_table: RoleTable | None = None

    def __post_init__(self):
        if len(self.steps) < 1:
            raise ConfigurationError("a hopper model needs at least one step")
        if self.role_table is not None:
            object.__setattr__(self, "role_table", _validate_role_table(self.role_table, len(self.steps)))

    @classmethod
    def ideal(cls, n_steps: int = 2) -> HopperModel:
        return cls(steps=tuple(BeamsplitterParams.ideal() for _ in range(n_steps)))

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    def roles(self) -> RoleTable:
        return self.role_table if self.role_table is not None else default_role_table(self.n_steps)

    def to_json(self) -> dict:
        doc: dict = {
            "steps": [{"t": s.t, "r": s.r, "phi": s.phi} for s in self.steps],
        }
        if self.role_table is not None:
            doc["role_table"] = [dict(entry) for entry in self.role_table]
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> HopperModel:
        if not isinstance(doc, dict) or "steps" not in doc:
            raise ConfigurationError("model document must be an object with a 'steps' array")
        steps = []
        for i, raw in enumerate(doc["steps"]):
            missing = [k for k in ("t", "r", "phi") if k not in raw]
            if missing:
                raise ConfigurationError(f"step {i}: missing parameter(s) {', '.join(missing)}")
            steps.append(BeamsplitterParams(t=float(raw["t"]), r=float(raw["r"]), phi=float(raw["phi"])))
        role_table = doc.get("role_table")
        if role_table is not None:
            role_table = tuple(dict(entry) for entry in role_table)
        return cls(steps=tuple(steps), role_table=role_table)

    @classmethod
    def load(cls, path: str | Path) -> HopperModel:
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed model JSON in {path}: {exc.msg}", exc.lineno, exc.colno) from exc
        return cls.from_json(doc)


def enumerate_histories(model: HopperModel, max_steps: int = MAX_STEPS_DEFAULT) -> HistorySpace:
    """All 2^n histories of the model, lexicographically ordered.

    ``max_steps`` guards against accidental exponential blowup; pass a larger
    value explicitly to go past the default cap of 24.
    """
    n = model.n_steps
    if n > max_steps:
        raise ConfigurationError(
            f"model has {n} steps, above the cap of {max_steps}; raise max_steps explicitly to proceed"
        )
    histories = tuple(History(bits) for bits in product((0, 1), repeat=n))
    return HistorySpace(n_steps=n, histories=histories)


def amplitude(model: HopperModel, h: History) -> complex:
    """Product of per-step transmission/reflection factors along ``h``."""
    if len(h) != model.n_steps:
        raise ContractViolationError(
            f"history length {len(h)} does not match model step count {model.n_steps}"
        )
    roles = model.roles()
    amp: complex = 1.0 + 0.0j
    prev: int | None = None
    for k, (site, params) in enumerate(zip(h.sites, model.steps)):
        key = str(site) if prev is None else f"{prev}{site}"
        if roles[k][key] == REFLECT:
            amp *= params.reflection_factor
        else:
            amp *= params.t
        prev = site
    return amp


def _require_in_space(e: Event, space_or_model: HistorySpace | HopperModel) -> None:
    n = space_or_model.n_steps
    for h in e.members:
        if len(h) != n:
            raise ContractViolationError(
                f"event history {h} has length {len(h)}, expected {n}"
            )


def measure(model: HopperModel, e: Event) -> float:
    """Quantum measure of ``e``, endpoint-grouped: sum_k |sum_{end=k} A|^2."""
    _require_in_space(e, model)
    totals: dict[int, complex] = {}
    for h in e.members:
        totals[h.endpoint] = totals.get(h.endpoint, 0.0 + 0.0j) + amplitude(model, h)
    return sum(abs(z) ** 2 for z in totals.values())


def measure_oracle(model: HopperModel, e: Event) -> float:
    """Literal pairwise double sum with the endpoint delta; test cross-check.

    Evaluates every A(g) A*(h) term individually instead of grouping by
    endpoint, so it shares no arithmetic shortcuts with ``measure``.
    """
    _require_in_space(e, model)
    amps = [(h.endpoint, amplitude(model, h)) for h in e.members]
    total: complex = 0.0 + 0.0j
    for end_i, a_i in amps:
        for end_j, a_j in amps:
            if end_i == end_j:
                total += a_i * a_j.conjugate()
    if abs(total.imag) > TOL:
        raise ContractViolationError(f"measure came out non-real: imaginary residue {total.imag!r}")
    return total.real


def is_serial(e: Event, space: HistorySpace) -> bool:
    """True iff ``e`` equals the Cartesian product of its per-step projections.

    Such events can be realized by blocking paths and projective detection;
    everything else needs ancilla-based filtering.
    """
    _require_in_space(e, space)
    if len(e) == 0:
        return True
    n = space.n_steps
    projections = [set() for _ in range(n)]
    for h in e.members:
        for k, site in enumerate(h.sites):
            projections[k].add(site)
    product_size = 1
    for s in projections:
        product_size *= len(s)
    # e is always a subset of the projection product, so sizes match iff equal
    return product_size == len(e)
