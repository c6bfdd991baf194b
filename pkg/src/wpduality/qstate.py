"""Qubit states: construction, Stokes decomposition, spectra and fidelity.

All formulas are the closed forms for a two-level system. Stokes components
follow ``S_k = Tr(rho sigma_k)`` with the standard Pauli matrices, so that
``s1 = 2 Re rho_12``, ``s2 = -2 Im rho_12`` and ``s3 = rho_11 - rho_22``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

NORM_TOL = 1e-3
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
BLOCH_TOL = 1e-6
PURE_SNAP = 1e-14

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_3 = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SIGMA_1, SIGMA_2, SIGMA_3)


class NormalizationError(ValueError):
    """Pure-state amplitudes are too far from unit norm."""


class BlochViolation(ValueError):
    """A Stokes vector lies outside the Bloch ball."""


class InvalidState(ValueError):
    """A matrix is not a valid qubit density matrix."""


def _finite_complex(z) -> complex:
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError(f"amplitude must be finite, got {z!r}")
    return z


@dataclass(frozen=True)
class PureState:
    """``alpha|h> + beta|v>``, renormalized to exact unit norm on construction.

    Amplitudes may deviate from unit norm by up to ``NORM_TOL`` because
    printed amplitudes are usually rounded to four decimals.
    """

    alpha: complex
    beta: complex

    def __post_init__(self):
        a = _finite_complex(self.alpha)
        b = _finite_complex(self.beta)
        norm2 = abs(a) ** 2 + abs(b) ** 2
        if abs(norm2 - 1.0) > NORM_TOL:
            raise NormalizationError(f"|alpha|^2 + |beta|^2 = {norm2:.6g}, expected 1 within {NORM_TOL}")
        scale = 1.0 / math.sqrt(norm2)
        object.__setattr__(self, "alpha", a * scale)
        object.__setattr__(self, "beta", b * scale)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.alpha, self.beta], dtype=complex)

    @classmethod
    def from_vector(cls, v) -> "PureState":
        """Build from an arbitrary nonzero 2-vector, normalizing first."""
        v = np.asarray(v, dtype=complex).reshape(2)
        n = np.linalg.norm(v)
        if n == 0:
            raise NormalizationError("zero vector has no direction")
        return cls(v[0] / n, v[1] / n)


@dataclass(frozen=True)
class StokesVector:
    s1: float
    s2: float
    s3: float

    def __post_init__(self):
        for name in ("s1", "s2", "s3"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, val)

    @property
    def s0(self) -> float:
        return 1.0

    @property
    def r(self) -> float:
        return math.sqrt(self.s1 ** 2 + self.s2 ** 2 + self.s3 ** 2)

    def as_array(self) -> np.ndarray:
        return np.array([self.s1, self.s2, self.s3])

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (1.0, self.s1, self.s2, self.s3)


class DensityMatrix:
    """Immutable 2x2 Hermitian, unit-trace, positive semidefinite matrix."""

    __slots__ = ("_m",)

    def __init__(self, matrix):
        m = np.array(matrix, dtype=complex).reshape(2, 2)
        if not np.all(np.isfinite(m)):
            raise InvalidState("density matrix has non-finite entries")
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise InvalidState("density matrix is not Hermitian")
        if abs(m[0, 0].real + m[1, 1].real - 1.0) > TRACE_TOL:
            raise InvalidState(f"trace is {np.trace(m).real!r}, expected 1")
        # Closed-form smallest eigenvalue: (1 - r) / 2.
        r = _radius(m)
        if (1.0 - r) / 2.0 < -PSD_TOL:
            raise InvalidState(f"negative eigenvalue {(1.0 - r) / 2.0:.3g}")
        m = 0.5 * (m + m.conj().T)
        m.setflags(write=False)
        self._m = m

    @property
    def matrix(self) -> np.ndarray:
        return self._m

    def __array__(self, dtype=None, copy=None):
        return np.array(self._m, dtype=dtype)

    def __repr__(self) -> str:
        s = to_stokes(self)
        return f"DensityMatrix(stokes=({s.s1:.6g}, {s.s2:.6g}, {s.s3:.6g}))"

    def __eq__(self, other) -> bool:
        if not isinstance(other, DensityMatrix):
            return NotImplemented
        return bool(np.array_equal(self._m, other._m))

    def __hash__(self) -> int:
        return hash(self._m.tobytes())

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self._m @ self._m)))


def _radius(m: np.ndarray) -> float:
    s1 = 2.0 * m[0, 1].real
    s2 = -2.0 * m[0, 1].imag
    s3 = (m[0, 0] - m[1, 1]).real
    return math.sqrt(s1 * s1 + s2 * s2 + s3 * s3)


def density_from_pure(state: PureState) -> DensityMatrix:
    v = state.vector
    return DensityMatrix(np.outer(v, v.conj()))


def to_stokes(rho: DensityMatrix) -> StokesVector:
    m = rho.matrix
    return StokesVector(2.0 * m[0, 1].real, -2.0 * m[0, 1].imag, (m[0, 0] - m[1, 1]).real)


def from_stokes(s: StokesVector) -> DensityMatrix:
    """Density matrix ``(I + s.sigma) / 2``; radii within ``BLOCH_TOL`` above 1 are clamped."""
    r = s.r
    if r > 1.0 + BLOCH_TOL:
        raise BlochViolation(f"Bloch radius {r:.9g} exceeds 1")
    s1, s2, s3 = s.s1, s.s2, s.s3
    if r > 1.0:
        s1, s2, s3 = s1 / r, s2 / r, s3 / r
    m = 0.5 * np.array([[1 + s3, s1 - 1j * s2], [s1 + 1j * s2, 1 - s3]], dtype=complex)
    return DensityMatrix(m)


def eigvals(rho: DensityMatrix) -> tuple[float, float]:
    """``((1 + r)/2, (1 - r)/2)``."""
    r = min(_radius(rho.matrix), 1.0)
    return (0.5 * (1.0 + r), 0.5 * (1.0 - r))


def _det(rho: DensityMatrix) -> float:
    lmax, lmin = eigvals(rho)
    # a rounding-level eigenvalue would leak ~1e-8 into the square root
    return 0.0 if lmin < PURE_SNAP else lmax * lmin


def fidelity(rho_ideal: DensityMatrix, rho_exp: DensityMatrix) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2``.

    Uses the qubit identity ``F = Tr(rho sigma) + 2 sqrt(det rho det sigma)``.
    """
    overlap = float(np.real(np.sum(rho_ideal.matrix * rho_exp.matrix.T)))
    f = overlap + 2.0 * math.sqrt(_det(rho_ideal) * _det(rho_exp))
    return min(max(f, 0.0), 1.0)


def random_state(seed, kind: Literal["pure", "bloch_ball"] = "pure") -> DensityMatrix:
    """Haar-random pure state or a state uniform in the Bloch ball."""
    rng = np.random.default_rng(seed)
    return from_stokes(StokesVector(*random_stokes(rng, 1, kind)[0]))


def random_stokes(rng: np.random.Generator, n: int, kind: Literal["pure", "bloch_ball"] = "pure") -> np.ndarray:
    """``(n, 3)`` array of Stokes vectors; uniform direction, radius 1 or ``U^(1/3)``."""
    if kind not in ("pure", "bloch_ball"):
        raise ValueError(f"unknown kind {kind!r}")
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    if kind == "bloch_ball":
        v *= rng.random(n)[:, None] ** (1.0 / 3.0)
    return v


def load_state(path) -> DensityMatrix:
    """Read a state file holding either ``alpha``/``beta`` or ``stokes``.

    The file is YAML (JSON is accepted too)::

        alpha: [0.5417, 0.6645]
        beta: [-0.4545, 0.2418]
    """
    import yaml

    data = yaml.safe_load(Path(path).read_text())
    return state_from_record(data)


def state_from_record(data: dict) -> DensityMatrix:
    if not isinstance(data, dict):
        raise ValueError("state record must be a mapping")
    has_amp = "alpha" in data or "beta" in data
    has_stokes = "stokes" in data
    if has_amp == has_stokes:
        raise ValueError("state record needs exactly one of alpha/beta or stokes")
    if has_stokes:
        s1, s2, s3 = (float(x) for x in data["stokes"])
        return from_stokes(StokesVector(s1, s2, s3))
    a_re, a_im = (float(x) for x in data["alpha"])
    b_re, b_im = (float(x) for x in data["beta"])
    return density_from_pure(PureState(complex(a_re, a_im), complex(b_re, b_im)))


def state_to_record(rho: DensityMatrix) -> dict:
    s = to_stokes(rho)
    return {"stokes": [s.s1, s.s2, s.s3]}
