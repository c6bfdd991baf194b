"""Maximum-likelihood reconstruction of a qubit state from coincidence counts.

The state is parametrized as ``rho(t) = T^dag T / Tr(T^dag T)`` with ``T``
lower triangular::

    T = [[t0,        0 ],
         [t2 + i t3, t1]]

so every parameter vector maps to a physical state. The binomial negative
log-likelihood of the pooled counts is minimized with Nelder-Mead, started
from the linear-inversion estimate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from .capacity import CapacityReport, cap_d, cap_p, cap_v, report_from_capacities
from .counts import AXES, CountRecord, hamiltonian_axis
from .optics import DEFAULT_CONVENTION, Convention
from .qstate import DensityMatrix, StokesVector, fidelity, from_stokes, to_stokes

PROB_CLAMP = 1e-12
SEED_MIX = 1e-3


class DegenerateParams(ValueError):
    """``Tr(T^dag T)`` underflowed; the parameters describe no state."""


class NonConvergence(RuntimeWarning):
    """The optimizer hit its iteration budget before meeting the tolerance."""


@dataclass(frozen=True)
class MLEOptions:
    max_iters: int = 100_000
    tol: float = 1e-10
    max_restarts: int = 6
    seed: int = 0


@dataclass
class TomographyResult:
    rho_hat: DensityMatrix
    neg_log_lik: float
    iterations: int
    converged: bool
    fidelity_vs_target: float | None = None
    seed_neg_log_lik: float | None = None
    t: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        m = self.rho_hat.matrix
        s = to_stokes(self.rho_hat)
        return {
            "rho_hat": {
                f"rho_{i + 1}{j + 1}": {"re": float(m[i, j].real), "im": float(m[i, j].imag)}
                for i in range(2)
                for j in range(2)
            },
            "stokes": [s.s1, s.s2, s.s3],
            "neg_log_lik": float(self.neg_log_lik),
            "seed_neg_log_lik": None if self.seed_neg_log_lik is None else float(self.seed_neg_log_lik),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "fidelity": None if self.fidelity_vs_target is None else float(self.fidelity_vs_target),
        }


# -- parametrization ---------------------------------------------------------


def _stokes_of_t(t) -> tuple[float, float, float, float]:
    a, b, cr, ci = (float(x) for x in t)
    tr = a * a + b * b + cr * cr + ci * ci
    if tr <= 1e-300:
        return 0.0, 0.0, 0.0, tr
    return 2.0 * cr * b / tr, 2.0 * ci * b / tr, (a * a + cr * cr + ci * ci - b * b) / tr, tr


def rho_from_t(t) -> DensityMatrix:
    t = np.asarray(t, dtype=float).reshape(4)
    T = np.array([[t[0], 0.0], [t[2] + 1j * t[3], t[1]]], dtype=complex)
    m = T.conj().T @ T
    tr = float(np.real(np.trace(m)))
    if not tr > 1e-300:
        raise DegenerateParams(f"Tr(T^dag T) = {tr!r}")
    return DensityMatrix(m / tr)


def t_from_rho(rho: DensityMatrix) -> np.ndarray:
    """Cholesky-style inverse of :func:`rho_from_t` with ``Tr(T^dag T) = 1``."""
    m = rho.matrix
    b = math.sqrt(max(m[1, 1].real, 0.0))
    if b < 1e-15:
        return np.array([1.0, 0.0, 0.0, 0.0])
    c = m[1, 0] / b
    a = math.sqrt(max(m[0, 0].real - abs(c) ** 2, 0.0))
    return np.array([a, b, c.real, c.imag])


# -- likelihood --------------------------------------------------------------


def _totals_arrays(totals: Mapping[str, tuple[int, int]]) -> tuple[list[int], np.ndarray, np.ndarray]:
    idx, n0, n1 = [], [], []
    # Stokes order: X -> s1, Y -> s2, Z -> s3
    for k, axis in enumerate(("X", "Y", "Z")):
        if axis in totals and sum(totals[axis]) > 0:
            idx.append(k)
            n0.append(totals[axis][0])
            n1.append(totals[axis][1])
    return idx, np.array(n0, dtype=float), np.array(n1, dtype=float)


def _tomo_totals(counts: Iterable[CountRecord]) -> dict[str, tuple[int, int]]:
    out: dict[str, tuple[int, int]] = {}
    for r in counts:
        if r.config != "tomo":
            continue
        n0, n1 = out.get(r.axis, (0, 0))
        out[r.axis] = (n0 + r.n0, n1 + r.n1)
    return out


def _make_objective(totals: Mapping[str, tuple[int, int]]):
    idx, n0, n1 = _totals_arrays(totals)
    terms = [(k, float(a), float(b)) for k, a, b in zip(idx, n0, n1)]
    lo, hi = PROB_CLAMP, 1.0 - PROB_CLAMP
    log = math.log

    def nll(t) -> float:
        s1, s2, s3, tr = _stokes_of_t(t)
        if tr <= 1e-300:
            return math.inf
        s = (s1, s2, s3)
        total = 0.0
        for k, a, b in terms:
            p = 0.5 * (1.0 + s[k])
            p = lo if p < lo else hi if p > hi else p
            total -= a * log(p) + b * log(1.0 - p)
        return total

    return nll


def neg_log_likelihood(t, counts: Sequence[CountRecord]) -> float:
    """Binomial negative log-likelihood of the ``"tomo"`` records at ``rho(t)``.

    Probabilities are clamped to ``[1e-12, 1 - 1e-12]``; axes without counts
    contribute nothing.
    """
    if not counts:
        raise ValueError("no count records")
    return _make_objective(_tomo_totals(counts))(t)


def stokes_neg_log_likelihood(stokes: np.ndarray, totals: Mapping[str, tuple[int, int]]) -> np.ndarray:
    """Vectorized likelihood over an ``(n, 3)`` array of Bloch vectors."""
    s = np.atleast_2d(np.asarray(stokes, dtype=float))
    out = np.zeros(s.shape[0])
    for k, axis in enumerate(("X", "Y", "Z")):
        if axis not in totals:
            continue
        n0, n1 = totals[axis]
        p = np.clip(0.5 * (1.0 + s[:, k]), PROB_CLAMP, 1.0 - PROB_CLAMP)
        out -= n0 * np.log(p) + n1 * np.log1p(-p)
    return out


def grid_search_mle(counts: Sequence[CountRecord], step: float = 0.02) -> tuple[float, np.ndarray]:
    """Exhaustive search over a cubic grid of the Bloch ball.

    Returns the smallest likelihood found and its Bloch vector.
    """
    totals = _tomo_totals(counts)
    g = np.arange(-1.0, 1.0 + step / 2, step)
    best, arg = math.inf, None
    for x in g:
        yy, zz = np.meshgrid(g, g, indexing="ij")
        pts = np.column_stack([np.full(yy.size, x), yy.ravel(), zz.ravel()])
        pts = pts[np.einsum("ij,ij->i", pts, pts) <= 1.0 + 1e-12]
        if pts.size == 0:
            continue
        vals = stokes_neg_log_likelihood(pts, totals)
        k = int(np.argmin(vals))
        if vals[k] < best:
            best, arg = float(vals[k]), pts[k]
    return best, arg


# -- estimators --------------------------------------------------------------


def linear_inversion(probs) -> StokesVector:
    """Stokes vector from outcome-0 probabilities ordered ``(Z, X, Y)``.

    ``s_k = 2 p_k - 1``; a result outside the Bloch ball is scaled back onto
    the sphere. A mapping keyed by axis name is accepted as well.
    """
    if isinstance(probs, Mapping):
        pz, px, py = probs["Z"], probs["X"], probs["Y"]
    else:
        pz, px, py = probs
    s = np.array([2.0 * px - 1.0, 2.0 * py - 1.0, 2.0 * pz - 1.0])
    r = float(np.linalg.norm(s))
    if r > 1.0:
        s /= r
    return StokesVector(*s)


def _seed_from_totals(totals: Mapping[str, tuple[int, int]]) -> np.ndarray:
    probs = {}
    for axis in AXES:
        n0, n1 = totals.get(axis, (0, 0))
        probs[axis] = n0 / (n0 + n1) if n0 + n1 > 0 else 0.5
    s = linear_inversion(probs).as_array() * (1.0 - SEED_MIX)
    return t_from_rho(from_stokes(StokesVector(*s)))


def _initial_simplex(x0: np.ndarray, scale: float = 0.05) -> np.ndarray:
    sim = np.tile(x0, (5, 1))
    for i in range(4):
        sim[i + 1, i] += scale
    return sim


def mle_reconstruct(
    counts: Sequence[CountRecord],
    opts: MLEOptions | None = None,
    target: DensityMatrix | None = None,
) -> TomographyResult:
    """Maximum-likelihood state from the ``"tomo"`` records of ``counts``.

    Nelder-Mead is restarted from its own optimum with a fresh simplex until a
    restart improves the objective by less than ``opts.tol``. If the budget
    runs out the result is still returned, with ``converged=False``.
    """
    opts = opts or MLEOptions()
    totals = _tomo_totals(counts)
    missing = [a for a in AXES if sum(totals.get(a, (0, 0))) == 0]
    if missing:
        raise ValueError(f"counts must cover all three axes; missing {missing}")
    return _mle_from_totals(totals, opts, target)


def _mle_from_totals(totals, opts: MLEOptions, target: DensityMatrix | None = None) -> TomographyResult:
    f = _make_objective(totals)
    x0 = _seed_from_totals(totals)
    seed_val = f(x0)

    def run(x, budget):
        res = minimize(
            f,
            x,
            method="Nelder-Mead",
            options={
                "maxiter": budget,
                "maxfev": 2 * budget,
                "xatol": 1e-9,
                "fatol": opts.tol,
                "initial_simplex": _initial_simplex(x, 0.05 * max(np.linalg.norm(x), 1e-3)),
            },
        )
        return res

    used = 0
    best_x, best_f = x0, seed_val
    converged = False
    rng = np.random.default_rng(opts.seed)
    start, kicked = x0, False
    for attempt in range(opts.max_restarts + 1):
        budget = opts.max_iters - used
        if budget <= 0:
            break
        res = run(start, budget)
        used += int(res.nit)
        improvement = best_f - float(res.fun)
        if res.fun < best_f:
            best_x, best_f = np.asarray(res.x) / np.linalg.norm(res.x), float(res.fun)
        if res.success and attempt > 0 and improvement < opts.tol:
            converged = True
            break
        start = best_x
        if not res.success and not kicked:
            # one random kick if a descent stalled
            start = best_x + 1e-3 * rng.normal(size=4)
            kicked = True

    if not converged:
        warnings.warn(f"MLE did not converge within {opts.max_iters} iterations", NonConvergence, stacklevel=2)
    rho_hat = rho_from_t(best_x)
    fid = fidelity(target, rho_hat) if target is not None else None
    return TomographyResult(rho_hat, best_f, used, converged, fid, seed_val, best_x)


# -- capacities from records -------------------------------------------------


def fit_sinusoid(phases, values) -> tuple[float, float, float]:
    """Least-squares ``y = a + b cos(phi) + c sin(phi)``; returns ``(a, b, c)``."""
    phases = np.asarray(phases, dtype=float)
    A = np.column_stack([np.ones_like(phases), np.cos(phases), np.sin(phases)])
    coef, *_ = np.linalg.lstsq(A, np.asarray(values, dtype=float), rcond=None)
    return float(coef[0]), float(coef[1]), float(coef[2])


def _pool_arrays(records: Sequence[CountRecord]):
    keys: dict[tuple, int] = {}
    group = np.empty(len(records), dtype=np.int64)
    n0 = np.empty(len(records), dtype=np.int64)
    n1 = np.empty(len(records), dtype=np.int64)
    for i, r in enumerate(records):
        group[i] = keys.setdefault((r.config, r.phase, r.axis), len(keys))
        n0[i] = r.n0
        n1[i] = r.n1
    return list(keys), group, n0, n1


def _capacities_from_pooled(keys, p0, p1, conv: Convention, opts: MLEOptions):
    tomo = {k[2]: (int(a), int(b)) for k, a, b in zip(keys, p0, p1) if k[0] == "tomo"}
    missing = [a for a in AXES if sum(tomo.get(a, (0, 0))) == 0]
    if missing:
        raise ValueError(f"tomography records must cover all three axes; missing {missing}")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NonConvergence)
        result = _mle_from_totals(tomo, opts)
    rho_hat = result.rho_hat
    c_p = cap_p(rho_hat)

    particle = {}
    wave = []
    for k, a, b in zip(keys, p0, p1):
        if a + b == 0:
            continue
        if k[0] in ("particle+", "particle-"):
            particle[k[0]] = a / (a + b)
        elif k[0] == "wave":
            wave.append((k[1], a / (a + b)))
    if particle:
        if set(particle) != {"particle+", "particle-"}:
            raise ValueError("direct distinguishability needs both particle+ and particle- records")
        c_d = abs(particle["particle+"] - particle["particle-"])
    else:
        c_d = cap_d(rho_hat, conv)
    if wave:
        if len(wave) < 3:
            raise ValueError("direct visibility needs at least three scan phases")
        ph, w = zip(*wave)
        _, b, c = fit_sinusoid(ph, w)
        c_v = 2.0 * math.hypot(b, c)
    else:
        c_v = cap_v(rho_hat, conv)
    return c_p, c_d, c_v, result, bool(caught) or not result.converged


def estimate_capacities(
    records: Sequence[CountRecord],
    conv: Convention = DEFAULT_CONVENTION,
    opts: MLEOptions | None = None,
) -> tuple[CapacityReport, TomographyResult]:
    """Capacities in units of ``E`` estimated from count records.

    ``C_p`` always comes from the MLE state. ``C_d`` comes from the
    ``particle+``/``particle-`` records when present and ``C_v`` from a
    sinusoid fit to the ``wave`` scan records when present; otherwise both
    are read off the MLE state, where the equality holds identically.
    """
    opts = opts or MLEOptions()
    if any(r.config != "tomo" for r in records):
        hamiltonian_axis(conv)  # direct routes only exist in the fixed frames
    keys, group, n0, n1 = _pool_arrays(records)
    p0 = np.bincount(group, weights=n0, minlength=len(keys)).astype(np.int64)
    p1 = np.bincount(group, weights=n1, minlength=len(keys)).astype(np.int64)
    c_p, c_d, c_v, result, _ = _capacities_from_pooled(keys, p0, p1, conv, opts)
    return report_from_capacities(c_p, c_d, c_v, conv), result


@dataclass
class BootstrapResult:
    se_c_p: float
    se_c_d: float
    se_c_v: float
    se_residual: float
    n_replicates: int
    n_nonconverged: int
    valid: bool
    residuals: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))

    def to_dict(self) -> dict:
        return {
            "se_c_p": self.se_c_p,
            "se_c_d": self.se_c_d,
            "se_c_v": self.se_c_v,
            "se_residual": self.se_residual,
            "n_replicates": self.n_replicates,
            "n_nonconverged": self.n_nonconverged,
            "valid": self.valid,
        }


def bootstrap_capacities(
    counts: Sequence[CountRecord],
    B: int = 200,
    conv: Convention = DEFAULT_CONVENTION,
    seed: int = 0,
    opts: MLEOptions | None = None,
) -> BootstrapResult:
    """Parametric bootstrap of the capacity estimates.

    Each record is redrawn as ``Binomial(n0 + n1, n0 / (n0 + n1))`` with its
    total held fixed, and :func:`estimate_capacities` is rerun. Replicate
    ``b`` uses the generator keyed by ``(seed, b)``. The returned values are
    sample standard deviations of ``C_p``, ``C_d``, ``C_v`` and of the signed
    residual ``C_p^2 - C_d^2 - C_v^2``. Fewer than two replicates give an
    invalid result with zero spreads.
    """
    opts = opts or MLEOptions()
    if any(r.config != "tomo" for r in counts):
        hamiltonian_axis(conv)
    if B < 100:
        warnings.warn(f"bootstrap with B={B} < 100 replicates", RuntimeWarning, stacklevel=2)
    keys, group, n0, n1 = _pool_arrays(counts)
    totals = n0 + n1
    p_hat = np.divide(n0, totals, out=np.zeros(len(totals)), where=totals > 0)
    samples = np.empty((B, 4))
    bad = 0
    for b in range(B):
        rng = np.random.default_rng([int(seed), b])
        r0 = rng.binomial(totals, p_hat)
        q0 = np.bincount(group, weights=r0, minlength=len(keys)).astype(np.int64)
        q1 = np.bincount(group, weights=totals - r0, minlength=len(keys)).astype(np.int64)
        c_p, c_d, c_v, _, flagged = _capacities_from_pooled(keys, q0, q1, conv, opts)
        bad += int(flagged)
        samples[b] = (c_p, c_d, c_v, c_p * c_p - c_d * c_d - c_v * c_v)
    if B < 2:
        return BootstrapResult(0.0, 0.0, 0.0, 0.0, B, bad, False, samples[:, 3].copy())
    sd = samples.std(axis=0, ddof=1)
    return BootstrapResult(float(sd[0]), float(sd[1]), float(sd[2]), float(sd[3]), B, bad, True, samples[:, 3].copy())
