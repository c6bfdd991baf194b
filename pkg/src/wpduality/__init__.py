"""Energy-capacity wave-particle duality for single qubits.

A qubit treated as a quantum battery has three work capacities: ``C_p`` over
all unitaries, ``C_v`` over the phase-scanned interferometer and ``C_d`` over
the two which-path unitaries. They satisfy ``C_p^2 = C_d^2 + C_v^2``. This
package computes them in closed form, checks them against brute-force
oracles, and simulates the photon-counting experiment that estimates them.
"""

from .capacity import CapacityReport, cap_d, cap_p, cap_v, duality_check
from .optics import APPENDIX, MAIN_TEXT, BareHamiltonian, Convention, general
from .qstate import DensityMatrix, PureState, StokesVector, density_from_pure, from_stokes, to_stokes

__all__ = [
    "APPENDIX",
    "MAIN_TEXT",
    "BareHamiltonian",
    "CapacityReport",
    "Convention",
    "DensityMatrix",
    "PureState",
    "StokesVector",
    "cap_d",
    "cap_p",
    "cap_v",
    "density_from_pure",
    "duality_check",
    "from_stokes",
    "general",
    "to_stokes",
]
