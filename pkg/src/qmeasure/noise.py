"""Component-imperfection distributions for theoretical-expectation bands.

A ``NoiseModel`` holds one scalar distribution per imperfection channel and
turns joint draws into ``FilterParams`` for the circuit simulator.  Sampled
values must land in their physical range; truncated draws retry a bounded
number of times and then fail loudly rather than silently clamping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ConfigurationError
from .histories import BeamsplitterParams
from .optics import FilterParams, MirrorParams

_MAX_TRUNCATION_RETRIES = 1000


@dataclass(frozen=True)
class Distribution:
    """Scalar sampling spec: fixed value, uniform range, or truncated normal."""

    kind: str
    value: float = 0.0
    mean: float = 0.0
    sd: float = 0.0
    low: float | None = None
    high: float | None = None

    def __post_init__(self):
        if self.kind not in ("fixed", "uniform", "normal"):
            raise ConfigurationError(f"unknown distribution kind {self.kind!r}")
        if self.kind == "uniform" and (self.low is None or self.high is None or self.low > self.high):
            raise ConfigurationError("uniform distribution needs low <= high")
        if self.kind == "normal" and self.sd < 0:
            raise ConfigurationError("normal distribution needs sd >= 0")

    @classmethod
    def fixed(cls, value: float) -> Distribution:
        return cls(kind="fixed", value=value)

    @classmethod
    def uniform(cls, low: float, high: float) -> Distribution:
        return cls(kind="uniform", low=low, high=high)

    @classmethod
    def normal(cls, mean: float, sd: float, low: float | None = None, high: float | None = None) -> Distribution:
        return cls(kind="normal", mean=mean, sd=sd, low=low, high=high)

    def sample(self, rng: np.random.Generator) -> float:
        if self.kind == "fixed":
            return self.value
        if self.kind == "uniform":
            return float(rng.uniform(self.low, self.high))
        for _ in range(_MAX_TRUNCATION_RETRIES):
            x = float(rng.normal(self.mean, self.sd))
            if (self.low is None or x >= self.low) and (self.high is None or x <= self.high):
                return x
        raise ConfigurationError(
            f"could not draw a physical value from {self} after {_MAX_TRUNCATION_RETRIES} tries"
        )

    def to_json(self) -> dict:
        doc = {"kind": self.kind}
        if self.kind == "fixed":
            doc["value"] = self.value
        elif self.kind == "uniform":
            doc.update(low=self.low, high=self.high)
        else:
            doc.update(mean=self.mean, sd=self.sd)
            if self.low is not None:
                doc["low"] = self.low
            if self.high is not None:
                doc["high"] = self.high
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> Distribution:
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigurationError(f"bad distribution spec {doc!r}: {exc}") from exc


def _fixed(value: float) -> Distribution:
    return Distribution.fixed(value)


@dataclass(frozen=True)
class NoiseModel:
    """Joint imperfection model of the event-filter bench.

    ``bs*_transmitted_fraction`` is the lossless splitting fraction
    T/(T+R); substrate loss lives separately in ``eta_s``.  The arm mirrors
    share one draw per sample (both beams bounce off the same physical
    mirrors), with r_s/r_p the combined multi-bounce power reflectivities.
    Waveplate misalignment is drawn independently per plate.
    """

    eta_s: Distribution = field(default_factory=lambda: _fixed(1.0))
    bs1_transmitted_fraction: Distribution = field(default_factory=lambda: _fixed(0.5))
    bs2_transmitted_fraction: Distribution = field(default_factory=lambda: _fixed(0.5))
    hwp_misalignment_rad: Distribution = field(default_factory=lambda: _fixed(0.0))
    mirror_r_s: Distribution = field(default_factory=lambda: _fixed(1.0))
    mirror_r_p: Distribution = field(default_factory=lambda: _fixed(1.0))
    mirror_phase_s: Distribution = field(default_factory=lambda: _fixed(0.0))
    mirror_phase_p: Distribution = field(default_factory=lambda: _fixed(0.0))
    pbs_extinction: Distribution = field(default_factory=lambda: _fixed(0.0))

    @classmethod
    def ideal(cls) -> NoiseModel:
        return cls()

    @classmethod
    def representative_lab(cls) -> NoiseModel:
        """Plausible bench-grade defaults.

        Splitting fractions follow a measured-style 52.6:47.4 imbalance of
        the double-passed splitter; mirror reflectivities are combined
        three-bounce values for protected metal mirrors with a small s/p
        split; waveplate alignment is good to about half a degree; polarizer
        leakage is catalog-grade.
        """
        return cls(
            eta_s=Distribution.normal(0.9356, 0.002, 0.80, 1.0),
            bs1_transmitted_fraction=Distribution.normal(0.526, 0.004, 0.40, 0.60),
            bs2_transmitted_fraction=Distribution.normal(0.50, 0.01, 0.40, 0.60),
            hwp_misalignment_rad=Distribution.normal(0.0, 0.009, -0.05, 0.05),
            mirror_r_s=Distribution.normal(0.94, 0.008, 0.80, 1.0),
            mirror_r_p=Distribution.normal(0.95, 0.008, 0.80, 1.0),
            mirror_phase_s=Distribution.normal(0.0, 0.05),
            mirror_phase_p=Distribution.normal(0.0, 0.05),
            pbs_extinction=Distribution.uniform(0.0, 0.005),
        )

    def sample_filter_params(
        self,
        rng: np.random.Generator,
        phi_g: float = 0.0,
        fold_out_substrate: bool = True,
    ) -> FilterParams:
        """Draw one joint parameter set for the filter circuit.

        With ``fold_out_substrate`` the sampled eta_s is ignored and the
        circuit is built loss-free at the main splitter, matching the
        convention that measured powers are corrected by eta_s^2 before any
        comparison with amplitudes.
        """
        bs1 = _split_from_fraction(self.bs1_transmitted_fraction.sample(rng))
        bs2 = _split_from_fraction(self.bs2_transmitted_fraction.sample(rng))
        eta = 1.0 if fold_out_substrate else self.eta_s.sample(rng)
        if not (0.0 < eta <= 1.0):
            raise ConfigurationError(f"sampled eta_s {eta} outside (0, 1]")
        mirror = MirrorParams(
            r_s=self.mirror_r_s.sample(rng),
            r_p=self.mirror_r_p.sample(rng),
            phase_s=self.mirror_phase_s.sample(rng),
            phase_p=self.mirror_phase_p.sample(rng),
        )
        return FilterParams(
            bs1=bs1,
            eta_s=eta,
            phi_g=phi_g,
            bs2=bs2,
            hwp1_theta=math.pi / 4.0 + self.hwp_misalignment_rad.sample(rng),
            hwp2_theta=math.pi / 8.0 + self.hwp_misalignment_rad.sample(rng),
            hwp3_theta=math.pi / 4.0 + self.hwp_misalignment_rad.sample(rng),
            pbs1_extinction_t=self.pbs_extinction.sample(rng),
            pbs1_extinction_r=self.pbs_extinction.sample(rng),
            pbs2_extinction_t=self.pbs_extinction.sample(rng),
            pbs2_extinction_r=self.pbs_extinction.sample(rng),
            mirror_a=mirror,
            mirror_c=mirror,
        )

    def to_json(self) -> dict:
        return {f.name: getattr(self, f.name).to_json() for f in fields(self)}

    @classmethod
    def from_json(cls, doc: dict) -> NoiseModel:
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigurationError(f"unknown noise channel(s): {', '.join(sorted(unknown))}")
        return cls(**{k: Distribution.from_json(v) for k, v in doc.items()})


def _split_from_fraction(transmitted_fraction: float) -> BeamsplitterParams:
    if not (0.0 < transmitted_fraction < 1.0):
        raise ConfigurationError(f"transmitted fraction {transmitted_fraction} outside (0, 1)")
    return BeamsplitterParams(
        t=math.sqrt(transmitted_fraction),
        r=math.sqrt(1.0 - transmitted_fraction),
        phi=math.pi / 2.0,
    )
