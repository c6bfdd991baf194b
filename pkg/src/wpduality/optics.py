"""Interferometer unitaries, bare Hamiltonians and the phase-dependent energy.

Two fixed frames are supported:

``MAIN_TEXT``
    Hamiltonian ``E|h><h|``; the wave interferometer is
    ``U_bs U_phi U_bs^dag = exp(i phi sigma_1 / 2)``.
``APPENDIX``
    Hamiltonian ``E|D><D|``; the wave interferometer is the bare phase
    plate ``U_phi = exp(i phi sigma_3 / 2)``.

``general(U)`` describes the frame obtained from a base frame by a unitary
``U``: the Hamiltonian, the wave unitary and the particle unitaries are all
conjugated by ``U``, so every energy equals the base-frame energy of
``U rho U^dag``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .qstate import (
    PAULIS,
    SIGMA_1,
    SIGMA_3,
    DensityMatrix,
    PureState,
    StokesVector,
    to_stokes,
)

UNITARY_TOL = 1e-12
DEFAULT_SCAN_POINTS = 1001

H_KET = np.array([1, 0], dtype=complex)
V_KET = np.array([0, 1], dtype=complex)
D_KET = np.array([1, 1], dtype=complex) / math.sqrt(2)


class NotUnitary(ValueError):
    pass


class Unitary2:
    """Immutable 2x2 unitary matrix."""

    __slots__ = ("_m",)

    def __init__(self, matrix):
        m = np.array(matrix, dtype=complex).reshape(2, 2)
        err = np.max(np.abs(m.conj().T @ m - np.eye(2)))
        if not err < UNITARY_TOL:
            raise NotUnitary(f"||U^dag U - I|| = {err:.3g}")
        m.setflags(write=False)
        self._m = m

    @property
    def matrix(self) -> np.ndarray:
        return self._m

    @property
    def dagger(self) -> "Unitary2":
        return Unitary2(self._m.conj().T)

    def __matmul__(self, other: "Unitary2") -> "Unitary2":
        return Unitary2(self._m @ other._m)

    def __array__(self, dtype=None, copy=None):
        return np.array(self._m, dtype=dtype)

    def __repr__(self) -> str:
        return f"Unitary2({self._m.tolist()!r})"

    def rotation(self) -> np.ndarray:
        """SO(3) matrix ``R`` with ``S' = R S`` under ``rho -> U rho U^dag``."""
        u = self._m
        ud = u.conj().T
        return np.array(
            [[0.5 * np.real(np.trace(pi @ u @ pj @ ud)) for pj in PAULIS] for pi in PAULIS]
        )


@dataclass(frozen=True)
class BareHamiltonian:
    """Rank-one Hamiltonian ``E |psi><psi|``."""

    energy_unit: float
    eigendirection: PureState

    def __post_init__(self):
        e = float(self.energy_unit)
        if not math.isfinite(e) or e < 0:
            raise ValueError(f"energy unit must be finite and >= 0, got {e!r}")
        object.__setattr__(self, "energy_unit", e)

    @property
    def matrix(self) -> np.ndarray:
        v = self.eigendirection.vector
        return self.energy_unit * np.outer(v, v.conj())

    @property
    def axis(self) -> np.ndarray:
        """Bloch vector of the eigendirection."""
        v = self.eigendirection.vector
        p = np.outer(v, v.conj())
        return np.array([np.real(np.trace(p @ s)) for s in PAULIS])


@dataclass(frozen=True, eq=False)
class Convention:
    tag: str
    rotation: Unitary2 | None = field(default=None)
    base: str = "appendix"

    def __post_init__(self):
        if self.tag not in ("main", "appendix", "general"):
            raise ValueError(f"unknown convention {self.tag!r}")
        if self.tag == "general":
            if self.rotation is None:
                raise ValueError("general convention needs a rotation")
            if self.base not in ("main", "appendix"):
                raise ValueError(f"base must be 'main' or 'appendix', got {self.base!r}")
            if not isinstance(self.rotation, Unitary2):
                object.__setattr__(self, "rotation", Unitary2(self.rotation))

    @property
    def base_tag(self) -> str:
        return self.base if self.tag == "general" else self.tag

    def __eq__(self, other) -> bool:
        if not isinstance(other, Convention):
            return NotImplemented
        if self.tag != other.tag:
            return False
        if self.tag != "general":
            return True
        return self.base == other.base and np.array_equal(self.rotation.matrix, other.rotation.matrix)

    def __hash__(self) -> int:
        return hash((self.tag, self.base))

    def __str__(self) -> str:
        return self.tag if self.tag != "general" else f"general({self.base})"


MAIN_TEXT = Convention("main")
APPENDIX = Convention("appendix")
DEFAULT_CONVENTION = APPENDIX


def general(rotation, base: str = "appendix") -> Convention:
    return Convention("general", rotation if isinstance(rotation, Unitary2) else Unitary2(rotation), base)


def convention_from_name(name: str) -> Convention:
    key = name.strip().lower()
    if key in ("main", "maintext", "main_text"):
        return MAIN_TEXT
    if key == "appendix":
        return APPENDIX
    raise ValueError(f"unknown convention {name!r}; use 'main' or 'appendix'")


@dataclass(frozen=True)
class PhaseScan:
    phases: np.ndarray
    energies: np.ndarray

    def __post_init__(self):
        phases = np.asarray(self.phases, dtype=float)
        energies = np.asarray(self.energies, dtype=float)
        if phases.shape != energies.shape or phases.ndim != 1:
            raise ValueError("phases and energies must be 1-d arrays of equal length")
        if np.any(np.diff(phases) <= 0):
            raise ValueError("phases must be strictly increasing")
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "energies", energies)

    @property
    def maximum(self) -> float:
        return float(self.energies.max())

    @property
    def minimum(self) -> float:
        return float(self.energies.min())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("phi_radians,W_over_E\n")
            for p, w in zip(self.phases, self.energies):
                fh.write(f"{p:.12g},{w:.12g}\n")


# -- unitaries ---------------------------------------------------------------


def u_bs() -> Unitary2:
    return Unitary2((SIGMA_1 + SIGMA_3) / math.sqrt(2))


def u_phase(phi: float) -> Unitary2:
    phi = float(phi)
    if not math.isfinite(phi):
        raise ValueError("phase must be finite")
    return Unitary2(np.diag([np.exp(0.5j * phi), np.exp(-0.5j * phi)]))


def u_particle(sign: str) -> Unitary2:
    """``(sigma_1 +- sigma_3) / sqrt(2)``; ``sign`` is ``'+'`` or ``'-'``."""
    if sign not in ("+", "-"):
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")
    s = 1.0 if sign == "+" else -1.0
    return Unitary2((SIGMA_1 + s * SIGMA_3) / math.sqrt(2))


def _conjugate(u: Unitary2, conv: Convention) -> Unitary2:
    if conv.tag != "general":
        return u
    r = conv.rotation
    return r.dagger @ u @ r


def u_wave(phi: float, conv: Convention = DEFAULT_CONVENTION) -> Unitary2:
    if conv.base_tag == "main":
        b = u_bs()
        u = b @ u_phase(phi) @ b.dagger
    else:
        u = u_phase(phi)
    return _conjugate(u, conv)


def particle_unitaries(conv: Convention = DEFAULT_CONVENTION) -> tuple[Unitary2, Unitary2]:
    """The two which-path unitaries ``(U+, U-)`` expressed in the frame of ``conv``."""
    return (_conjugate(u_particle("+"), conv), _conjugate(u_particle("-"), conv))


def hamiltonian_for(conv: Convention = DEFAULT_CONVENTION, energy_unit: float = 1.0) -> BareHamiltonian:
    ket = H_KET if conv.base_tag == "main" else D_KET
    if conv.tag == "general":
        ket = conv.rotation.dagger.matrix @ ket
    return BareHamiltonian(energy_unit, PureState.from_vector(ket))


# -- evolution and energies --------------------------------------------------


def evolve(rho: DensityMatrix, u: Unitary2) -> DensityMatrix:
    m = u.matrix
    return DensityMatrix(m @ rho.matrix @ m.conj().T)


def mean_energy(rho: DensityMatrix, h: BareHamiltonian) -> float:
    v = h.eigendirection.vector
    return h.energy_unit * float(np.real(v.conj() @ rho.matrix @ v))


def frame_stokes(rho: DensityMatrix, conv: Convention) -> StokesVector:
    """Stokes vector of ``rho`` seen from the base frame of ``conv``."""
    s = to_stokes(rho)
    if conv.tag != "general":
        return s
    return StokesVector(*(conv.rotation.rotation() @ s.as_array()))


def w_phi(rho: DensityMatrix, phi: float, conv: Convention = DEFAULT_CONVENTION, energy_unit: float = 1.0) -> float:
    """Mean energy after the wave interferometer at phase ``phi``.

    ``MAIN_TEXT``: ``(E/2)(1 - S2 sin(phi) + S3 cos(phi))``.
    ``APPENDIX``: ``(E/2)(1 + S1 cos(phi) + S2 sin(phi))``.
    """
    s = frame_stokes(rho, conv)
    c, sn = math.cos(phi), math.sin(phi)
    if conv.base_tag == "main":
        return 0.5 * energy_unit * (1.0 - s.s2 * sn + s.s3 * c)
    return 0.5 * energy_unit * (1.0 + s.s1 * c + s.s2 * sn)


def visibility(rho: DensityMatrix, conv: Convention = DEFAULT_CONVENTION) -> float:
    s = frame_stokes(rho, conv)
    if conv.base_tag == "main":
        return math.hypot(s.s2, s.s3)
    return math.hypot(s.s1, s.s2)


def w_phi_extrema(rho: DensityMatrix, conv: Convention = DEFAULT_CONVENTION, energy_unit: float = 1.0) -> tuple[float, float]:
    """Closed-form ``(max, min)`` of the phase curve: ``(E/2)(1 +- V)``."""
    v = visibility(rho, conv)
    return 0.5 * energy_unit * (1.0 + v), 0.5 * energy_unit * (1.0 - v)


def phase_scan(
    rho: DensityMatrix,
    conv: Convention = DEFAULT_CONVENTION,
    n_points: int = DEFAULT_SCAN_POINTS,
    energy_unit: float = 1.0,
) -> PhaseScan:
    if n_points < 8:
        raise ValueError("a phase scan needs at least 8 points")
    phases = np.linspace(0.0, 2.0 * math.pi, n_points)
    s = frame_stokes(rho, conv)
    if conv.base_tag == "main":
        w = 0.5 * energy_unit * (1.0 - s.s2 * np.sin(phases) + s.s3 * np.cos(phases))
    else:
        w = 0.5 * energy_unit * (1.0 + s.s1 * np.cos(phases) + s.s2 * np.sin(phases))
    return PhaseScan(phases, w)


def frame_rotation(h: BareHamiltonian, conv_target: Convention = DEFAULT_CONVENTION) -> Unitary2:
    """Smallest SU(2) rotation carrying the eigendirection of ``h`` onto the
    canonical eigendirection of ``conv_target`` (``|h>`` or ``|D>``).

    The global phase is fixed so the first nonzero entry of the first column
    is real and positive.
    """
    target = hamiltonian_for(Convention(conv_target.base_tag)).axis
    n = h.axis
    n = n / np.linalg.norm(n)
    cos_t = float(np.clip(n @ target, -1.0, 1.0))
    axis = np.cross(n, target)
    sin_t = float(np.linalg.norm(axis))
    if sin_t < 1e-12:
        if cos_t > 0:
            u = np.eye(2, dtype=complex)
            return Unitary2(u)
        # antipodal: any perpendicular axis works
        trial = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        axis = np.cross(n, trial)
        axis /= np.linalg.norm(axis)
        theta = math.pi
    else:
        axis /= sin_t
        theta = math.atan2(sin_t, cos_t)
    gen = sum(a * p for a, p in zip(axis, PAULIS))
    u = math.cos(theta / 2) * np.eye(2) - 1j * math.sin(theta / 2) * gen
    col = u[:, 0]
    k = 0 if abs(col[0]) > 1e-15 else 1
    u = u * (abs(col[k]) / col[k])
    return Unitary2(u)
