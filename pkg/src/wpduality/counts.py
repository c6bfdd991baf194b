"""Simulated coincidence counting in the six polarization bases.

Each measurement axis has an outcome-0 projector (``H``, ``D``, ``R`` for
``Z``, ``X``, ``Y``) and an outcome-1 projector (``V``, ``A``, ``L``). A
record holds the raw coincidences ``(n0, n1)`` for one repeat on one axis.

Noise model: per repeat the total is ``Poisson(rate * duration)`` and the
split is ``Binomial(total, p0)``. Dark counts, drift and detector efficiency
are not modeled.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .optics import DEFAULT_CONVENTION, Convention
from .qstate import DensityMatrix, PureState

DEFAULT_RATE = 16_000.0
DEFAULT_REPEATS = 100

AXES = ("Z", "X", "Y")
AXIS_LABELS = {"Z": ("H", "V"), "X": ("D", "A"), "Y": ("R", "L")}
_AXIS_INDEX = {a: i for i, a in enumerate(AXES)}

_r2 = 1.0 / math.sqrt(2.0)
_KETS = {
    "H": (1.0, 0.0),
    "V": (0.0, 1.0),
    "D": (_r2, _r2),
    "A": (_r2, -_r2),
    "R": (_r2, 1j * _r2),
    "L": (_r2, -1j * _r2),
}


class EmptyRecord(ValueError):
    """A count record with no coincidences cannot give a probability."""


class AxisMismatch(ValueError):
    """A record was measured on an axis other than the Hamiltonian's."""


@dataclass(frozen=True)
class MeasurementSetting:
    label: str
    projector: PureState

    @property
    def axis(self) -> str:
        for axis, labels in AXIS_LABELS.items():
            if self.label in labels:
                return axis
        raise ValueError(self.label)

    @property
    def outcome(self) -> int:
        return AXIS_LABELS[self.axis].index(self.label)


SETTINGS = {label: MeasurementSetting(label, PureState(*amp)) for label, amp in _KETS.items()}


@dataclass(frozen=True)
class CountRecord:
    """Coincidences on one axis for one repeat.

    ``config`` says what preceded the measurement: ``"tomo"`` for the bare
    state, ``"wave"`` for the interferometer at ``phase``, ``"particle+"`` or
    ``"particle-"`` for the which-path unitaries.
    """

    axis: str
    n0: int
    n1: int
    repeat: int = 0
    config: str = "tomo"
    phase: float | None = None

    def __post_init__(self):
        if self.axis not in _AXIS_INDEX:
            raise ValueError(f"unknown axis {self.axis!r}")
        if self.n0 < 0 or self.n1 < 0:
            raise ValueError("counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.n0 + self.n1


@dataclass(frozen=True)
class NoiseModel:
    mean_rate: float = DEFAULT_RATE
    duration_s: float = 1.0 / DEFAULT_REPEATS
    n_repeats: int = DEFAULT_REPEATS
    seed: int = 0

    def __post_init__(self):
        if not self.mean_rate > 0:
            raise ValueError("mean_rate must be positive")
        if not self.duration_s > 0:
            raise ValueError("duration_s must be positive")
        if self.n_repeats < 1:
            raise ValueError("n_repeats must be at least 1")

    @classmethod
    def for_counts(cls, counts_per_axis: float, n_repeats: int = DEFAULT_REPEATS, seed: int = 0,
                   mean_rate: float = DEFAULT_RATE) -> "NoiseModel":
        """Noise model whose expected total per axis is ``counts_per_axis``."""
        return cls(mean_rate, counts_per_axis / (mean_rate * n_repeats), n_repeats, seed)

    @property
    def expected_per_axis(self) -> float:
        return self.mean_rate * self.duration_s * self.n_repeats


def _setting(setting) -> MeasurementSetting:
    return SETTINGS[setting] if isinstance(setting, str) else setting


def born_prob(rho: DensityMatrix, setting: MeasurementSetting | str) -> float:
    v = _setting(setting).projector.vector
    p = float(np.real(v.conj() @ rho.matrix @ v))
    return min(max(p, 0.0), 1.0)


def axis_prob(rho: DensityMatrix, axis: str) -> float:
    """Born probability of the outcome-0 projector of ``axis``."""
    return born_prob(rho, AXIS_LABELS[axis][0])


def hamiltonian_axis(conv: Convention = DEFAULT_CONVENTION) -> str:
    """Measurement axis whose outcome 0 is the Hamiltonian eigendirection."""
    if conv.tag == "general":
        raise ValueError("a general frame has no fixed measurement axis")
    return "Z" if conv.tag == "main" else "X"


def _stream_rng(seed: int, stream: int, axis: str) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(stream), _AXIS_INDEX[axis]])


def simulate_counts(
    rho: DensityMatrix,
    noise: NoiseModel,
    axes: Iterable[str] = AXES,
    *,
    config: str = "tomo",
    phase: float | None = None,
    stream: int = 0,
) -> list[CountRecord]:
    """Draw coincidence records for every axis and repeat.

    The generator for each axis is keyed by ``(noise.seed, stream, axis)``,
    so axes and streams can be simulated in any order or concurrently.
    """
    lam = noise.mean_rate * noise.duration_s
    records = []
    for axis in axes:
        p = axis_prob(rho, axis)
        rng = _stream_rng(noise.seed, stream, axis)
        totals = rng.poisson(lam, size=noise.n_repeats)
        n0 = rng.binomial(totals, p)
        for k in range(noise.n_repeats):
            records.append(CountRecord(axis, int(n0[k]), int(totals[k] - n0[k]), k, config, phase))
    return records


def estimate_prob(record: CountRecord, outcome: int = 0) -> float:
    """``p(a|x) = N_x^a / (N_x^0 + N_x^1)``."""
    total = record.total
    if total == 0:
        raise EmptyRecord(f"no coincidences on axis {record.axis} (repeat {record.repeat})")
    p0 = record.n0 / total
    return p0 if outcome == 0 else 1.0 - p0


def estimate_work(record: CountRecord, E: float = 1.0, conv: Convention = DEFAULT_CONVENTION) -> float:
    """Extractable energy ``E * p(0|x)`` from a record on the Hamiltonian axis."""
    expected = hamiltonian_axis(conv)
    if record.axis != expected:
        raise AxisMismatch(f"record axis {record.axis} does not match Hamiltonian axis {expected}")
    return E * estimate_prob(record, 0)


def pool(records: Iterable[CountRecord]) -> dict[tuple, CountRecord]:
    """Sum repeats that share ``(config, phase, axis)``; keys keep first-seen order."""
    out: dict[tuple, list[int]] = {}
    for r in records:
        key = (r.config, r.phase, r.axis)
        acc = out.setdefault(key, [0, 0])
        acc[0] += r.n0
        acc[1] += r.n1
    return {k: CountRecord(k[2], n0, n1, 0, k[0], k[1]) for k, (n0, n1) in out.items()}


def axis_totals(records: Iterable[CountRecord], config: str = "tomo") -> dict[str, tuple[int, int]]:
    """Pooled ``(n0, n1)`` per axis for records with the given ``config``."""
    out = {}
    for r in records:
        if r.config != config:
            continue
        n0, n1 = out.get(r.axis, (0, 0))
        out[r.axis] = (n0 + r.n0, n1 + r.n1)
    return out


def write_counts_csv(records: Iterable[CountRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["axis", "repeat", "n0", "n1"])
        for r in records:
            w.writerow([r.axis, r.repeat, r.n0, r.n1])


def read_counts_csv(path) -> list[CountRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"axis", "repeat", "n0", "n1"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"count file is missing columns: {sorted(missing)}")
        return [CountRecord(row["axis"].strip(), int(row["n0"]), int(row["n1"]), int(row["repeat"])) for row in reader]
