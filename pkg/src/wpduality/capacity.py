"""Work capacities of a qubit battery and the energy duality relations.

Three capacities are compared, all defined as ``max - min`` of the mean
energy ``Tr(H U rho U^dag)`` over a family of unitaries:

* ``cap_p``: all unitaries. Equals ``r E``.
* ``cap_v``: the phase-scanned wave interferometer. Equals ``V E``.
* ``cap_d``: the two which-path unitaries ``U+``/``U-``. Equals ``|S_k| E``
  for the Stokes component along the Hamiltonian axis seen after ``U+``.

Since ``r^2`` splits into the squared Stokes components, ``C_p^2 = C_d^2 + C_v^2``
for every state, and ``max(C_d, C_v) <= C_p <= C_d + C_v``.

The brute-force oracles at the bottom evaluate the energies by explicit
matrix products on a grid. They never use the Stokes closed forms.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .optics import (
    DEFAULT_CONVENTION,
    BareHamiltonian,
    Convention,
    evolve,
    frame_stokes,
    hamiltonian_for,
    mean_energy,
    particle_unitaries,
    u_wave,
)
from .qstate import DensityMatrix, to_stokes

INEQUALITY_TOL = 1e-9
E_JOULES = 2.45e-19


@dataclass
class CapacityReport:
    c_p: float
    c_d: float
    c_v: float
    convention: str
    equality_residual: float
    inequality_ok: bool
    E_joules: float = E_JOULES
    std_errors: dict | None = field(default=None)

    def to_dict(self) -> dict:
        return asdict(self)


def cap_p(rho: DensityMatrix, h: BareHamiltonian | None = None) -> float:
    e = 1.0 if h is None else h.energy_unit
    return e * min(to_stokes(rho).r, 1.0)


def cap_v(rho: DensityMatrix, conv: Convention = DEFAULT_CONVENTION, energy_unit: float = 1.0) -> float:
    s = frame_stokes(rho, conv)
    if conv.base_tag == "main":
        return energy_unit * math.hypot(s.s2, s.s3)
    return energy_unit * math.hypot(s.s1, s.s2)


def cap_d(rho: DensityMatrix, conv: Convention = DEFAULT_CONVENTION, energy_unit: float = 1.0) -> float:
    s = frame_stokes(rho, conv)
    if conv.base_tag == "main":
        return energy_unit * abs(s.s1)
    return energy_unit * abs(s.s3)


def inequality_holds(c_p: float, c_d: float, c_v: float, tol: float = INEQUALITY_TOL) -> bool:
    return max(c_d, c_v) <= c_p + tol and c_p <= c_d + c_v + tol


def duality_check(
    rho: DensityMatrix,
    conv: Convention = DEFAULT_CONVENTION,
    E_joules: float = E_JOULES,
) -> CapacityReport:
    """Capacities in units of ``E`` with the equality residual and inequality flag."""
    p = cap_p(rho)
    d = cap_d(rho, conv)
    v = cap_v(rho, conv)
    return report_from_capacities(p, d, v, conv, E_joules)


def report_from_capacities(c_p, c_d, c_v, conv: Convention | str, E_joules: float = E_JOULES) -> CapacityReport:
    return CapacityReport(
        c_p=float(c_p),
        c_d=float(c_d),
        c_v=float(c_v),
        convention=str(conv),
        equality_residual=abs(c_p * c_p - c_d * c_d - c_v * c_v),
        inequality_ok=inequality_holds(c_p, c_d, c_v),
        E_joules=float(E_joules),
    )


def capacities_batch(stokes: np.ndarray, conv: Convention = DEFAULT_CONVENTION) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized ``(C_p, C_d, C_v)`` in units of ``E`` for an ``(n, 3)`` Stokes array."""
    s = np.asarray(stokes, dtype=float)
    if conv.tag == "general":
        s = s @ conv.rotation.rotation().T
    c_p = np.minimum(np.linalg.norm(s, axis=1), 1.0)
    if conv.base_tag == "main":
        c_d = np.abs(s[:, 0])
        c_v = np.hypot(s[:, 1], s[:, 2])
    else:
        c_d = np.abs(s[:, 2])
        c_v = np.hypot(s[:, 0], s[:, 1])
    return c_p, c_d, c_v


# -- brute-force oracles -----------------------------------------------------


@lru_cache(maxsize=8)
def _euler_grid(grid_density: int) -> np.ndarray:
    """``Rz(a) Ry(b) Rz(c)`` on a uniform grid, shape ``(n, 2, 2)``."""
    a = np.linspace(0.0, 2.0 * math.pi, grid_density, endpoint=False)
    b = np.linspace(0.0, math.pi, grid_density)
    c = np.linspace(0.0, 2.0 * math.pi, grid_density, endpoint=False)
    A, B, C = np.meshgrid(a, b, c, indexing="ij")
    A, B, C = A.ravel(), B.ravel(), C.ravel()
    cb, sb = np.cos(B / 2), np.sin(B / 2)
    u = np.empty((A.size, 2, 2), dtype=complex)
    u[:, 0, 0] = np.exp(-0.5j * (A + C)) * cb
    u[:, 0, 1] = -np.exp(-0.5j * (A - C)) * sb
    u[:, 1, 0] = np.exp(0.5j * (A - C)) * sb
    u[:, 1, 1] = np.exp(0.5j * (A + C)) * cb
    u.setflags(write=False)
    return u


def brute_force_cap_p(rho: DensityMatrix, h: BareHamiltonian | None = None, grid_density: int = 50) -> float:
    """``max - min`` of ``Tr(H U rho U^dag)`` over an Euler-angle grid of SU(2)."""
    if grid_density < 20:
        raise ValueError("grid_density must be at least 20")
    if h is None:
        h = hamiltonian_for(DEFAULT_CONVENTION)
    u = _euler_grid(grid_density)
    # Tr(E|psi><psi| U rho U^dag) = E <v|rho|v> with v = U^dag psi
    v = np.einsum("nki,k->ni", u.conj(), h.eigendirection.vector)
    rv = v @ rho.matrix.T
    w = h.energy_unit * np.real(np.sum(v.conj() * rv, axis=1))
    return float(w.max() - w.min())


def brute_force_cap_v(rho: DensityMatrix, conv: Convention = DEFAULT_CONVENTION, n_phi: int = 10_000) -> float:
    """``max - min`` of the wave-configuration energy on a uniform phase grid."""
    if n_phi < 100:
        raise ValueError("n_phi must be at least 100")
    h = hamiltonian_for(conv)
    hm = h.matrix
    phases = np.linspace(0.0, 2.0 * math.pi, n_phi)
    u = np.stack([u_wave(p, conv).matrix for p in phases])
    w = np.real(np.einsum("nki,kl,nlj,ji->n", u.conj(), hm, u, rho.matrix, optimize=True))
    return float(w.max() - w.min())


def brute_force_cap_d(rho: DensityMatrix, conv: Convention = DEFAULT_CONVENTION) -> float:
    """``|W(U+) - W(U-)|`` from explicit evolution under both which-path unitaries."""
    h = hamiltonian_for(conv)
    w = [mean_energy(evolve(rho, u), h) for u in particle_unitaries(conv)]
    return abs(w[0] - w[1])
