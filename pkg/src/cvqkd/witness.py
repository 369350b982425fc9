"""Effective-entanglement witness on the bipartite expectation value matrix.

Alice's qubit enters through the operators |i><j| and Bob's side through the
basis (1, X, Y).  The 6x6 matrix

    chi = [[B0, D], [D^dag, B1]],   B_i = p_i <B_k^dag B_l>_{rho_i},
    D_kl = <|0><1| (x) B_k^dag B_l>,

is PSD for every physical state.  Bob's measurements fix B0 and B1, Alice's
preparation fixes D[0, 0] = c (her qubit coherence); the rest of D is unknown.
For a separable state the partial transpose [[B0, D^dag], [D, B1]] is PSD as
well, so if no completion D makes both matrices PSD, the data certify
effective entanglement.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import sdp
from .channel import RecordBatch, SourceConfig, amplitude_for_overlap
from .estimation import estimate_conditional_moments, vacuum_moments
from .quantum import VACUUM_QUADRATURE_VARIANCE, MomentSet, UnitConvention

log = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-7
DEFAULT_RESOLUTION = 1e-3
COHERENCE_MODES = ("source", "channel")


def conditional_moment_matrix(m: MomentSet, project: bool = True) -> np.ndarray:
    """Operator moment matrix <B_k^dag B_l> over (1, X, Y) from heterodyne moments.

    Heterodyne outcomes carry one extra vacuum unit, so <X^2> = var_Q - 1/4 +
    <X>^2 in natural units.  The commutator [X, Y] = i/2 puts +i/4 into the
    (X, Y) entry.  Matrices that are non-PSD by less than the sampling error
    are clipped onto the PSD cone.
    """
    nat = m.to(UnitConvention.NATURAL)
    floor = VACUUM_QUADRATURE_VARIANCE * (1.0 - 10.0 * m.stat_error)
    if nat.var_x < floor or nat.var_y < floor:
        raise ValueError("outcome variance below the added-vacuum floor; unphysical moments")
    mx, my = nat.mean_x, nat.mean_y
    xx = nat.var_x - VACUUM_QUADRATURE_VARIANCE + mx * mx
    yy = nat.var_y - VACUUM_QUADRATURE_VARIANCE + my * my
    xy = nat.cov_xy + mx * my
    M = np.array(
        [
            [1.0, mx, my],
            [mx, xx, xy + 0.25j],
            [my, xy - 0.25j, yy],
        ],
        dtype=complex,
    )
    if project and m.n_samples > 0:
        w, v = np.linalg.eigh(M)
        if w[0] < 0:
            if w[0] < -10.0 * m.stat_error:
                raise ValueError(f"moment matrix eigenvalue {w[0]:.3g} far below zero; unphysical moments")
            clipped = (v * np.clip(w, 0.0, None)) @ v.conj().T
            log.info("projected moment matrix onto PSD cone (distance %.3g)", np.linalg.norm(clipped - M))
            M = clipped
    return M


@dataclass
class EvmProblem:
    B0: np.ndarray
    B1: np.ndarray
    c: complex
    tolerance: float = DEFAULT_TOLERANCE
    fixed_completion: Optional[np.ndarray] = None

    def __post_init__(self):
        self.B0 = np.asarray(self.B0, dtype=complex)
        self.B1 = np.asarray(self.B1, dtype=complex)
        for B in (self.B0, self.B1):
            if B.shape != (3, 3) or not np.allclose(B, B.conj().T, atol=1e-12):
                raise ValueError("diagonal blocks must be 3x3 Hermitian")
        if abs(self.c) > 0.5 + 1e-12:
            raise ValueError("|c| must not exceed 1/2")
        if self.fixed_completion is not None:
            D = np.asarray(self.fixed_completion, dtype=complex)
            if abs(D[0, 0] - self.c) > 1e-12:
                raise ValueError("fixed completion must have D[0, 0] = c")
            self.fixed_completion = D


@dataclass
class WitnessVerdict:
    t_star: float
    entangled: Optional[bool]  # None when the solver did not converge
    completion: np.ndarray
    solver_iterations: int
    status: str
    gap: float = math.nan
    method: str = "auto"
    inputs: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        if self.entangled is None:
            return "unresolved"
        return "entangled" if self.entangled else "inconclusive"


def assemble_evm(p: EvmProblem, D: np.ndarray) -> np.ndarray:
    D = np.asarray(D, dtype=complex)
    if abs(D[0, 0] - p.c) > 1e-12:
        raise ValueError("completion must satisfy D[0, 0] = c")
    return np.block([[p.B0, D], [D.conj().T, p.B1]])


def partial_transpose_alice(chi: np.ndarray) -> np.ndarray:
    """Transpose Alice's qubit index: swap the off-diagonal 3x3 blocks."""
    chi = np.asarray(chi)
    out = chi.copy()
    out[:3, 3:] = chi[3:, :3]
    out[3:, :3] = chi[:3, 3:]
    return out


def _free_generators() -> np.ndarray:
    """Generators for the 16 real parameters of D (all entries but D[0, 0]).

    Returns shape (16, 2, 6, 6): block 0 is chi, block 1 its partial transpose.
    """
    gens = []
    for k in range(3):
        for l in range(3):
            if k == 0 and l == 0:
                continue
            for unit in (1.0, 1.0j):
                E = np.zeros((3, 3), dtype=complex)
                E[k, l] = unit
                Z = np.zeros((3, 3))
                chi = np.block([[Z, E], [E.conj().T, Z]])
                gens.append([chi, partial_transpose_alice(chi)])
    return np.array(gens)


_GENERATORS = _free_generators()


def _completion_from(z: np.ndarray, c: complex) -> np.ndarray:
    D = np.zeros((3, 3), dtype=complex)
    D[0, 0] = c
    idx = 0
    for k in range(3):
        for l in range(3):
            if k == 0 and l == 0:
                continue
            D[k, l] = z[idx] + 1j * z[idx + 1]
            idx += 2
    return D


def min_eigenvalues(p: EvmProblem, D: np.ndarray) -> tuple[float, float]:
    chi = assemble_evm(p, D)
    return (
        float(np.linalg.eigvalsh(chi)[0]),
        float(np.linalg.eigvalsh(partial_transpose_alice(chi))[0]),
    )


def sdp_feasibility_margin(p: EvmProblem, method: str = "auto") -> WitnessVerdict:
    """Largest t with chi(D) >= tI and chi^TA(D) >= tI over the free completions D.

    t_star < -tolerance means no completion is compatible with a separable
    state; otherwise the result is inconclusive.
    """
    if p.fixed_completion is not None:
        chi = assemble_evm(p, p.fixed_completion)
        C = np.array([chi, partial_transpose_alice(chi)])
        G = np.zeros((0, 2, 6, 6), dtype=complex)
    else:
        D0 = np.zeros((3, 3), dtype=complex)
        D0[0, 0] = p.c
        chi = assemble_evm(p, D0)
        C = np.array([chi, partial_transpose_alice(chi)])
        G = _GENERATORS
    res = sdp.solve(C, G, method=method)
    if p.fixed_completion is not None:
        D = p.fixed_completion
    else:
        D = _completion_from(res.z, p.c)
    # decide on the certified upper bound of the optimum
    entangled = (res.t + max(res.gap, 0.0) < -p.tolerance) if res.converged else None
    return WitnessVerdict(
        t_star=res.t,
        entangled=entangled,
        completion=D,
        solver_iterations=res.iterations,
        status=res.status,
        gap=res.gap,
        method=res.method,
    )


def coherence(overlap: float, T: float = 1.0, mode: str = "source") -> float:
    """Fixed entry c = D[0, 0] for equal priors.

    "source" uses the prepared overlap (Alice's reduced state is untouched by
    the channel); "channel" uses the overlap exp(-2 T alpha^2) of the received
    conditional states.
    """
    if mode == "source":
        return 0.5 * overlap
    if mode == "channel":
        return 0.5 * overlap**T
    raise ValueError(f"coherence mode must be one of {COHERENCE_MODES}")


def problem_from_moments(
    m0: MomentSet,
    m1: MomentSet,
    overlap: float,
    T: float = 1.0,
    mode: str = "source",
    tol: float = DEFAULT_TOLERANCE,
) -> EvmProblem:
    """EVM problem for equal priors; m0 belongs to bit 0 (|-alpha>), m1 to bit 1."""
    return EvmProblem(
        0.5 * conditional_moment_matrix(m0),
        0.5 * conditional_moment_matrix(m1),
        coherence(overlap, T, mode),
        tolerance=tol,
    )


def problem_from_excess(
    T: float,
    overlap: float,
    excess_x: float,
    excess_y: Optional[float] = None,
    mode: str = "source",
    tol: float = DEFAULT_TOLERANCE,
    n_samples: int = 0,
) -> EvmProblem:
    """EVM problem for received states |+-sqrt(T) alpha> with operator excess variances."""
    if excess_y is None:
        excess_y = excess_x
    alpha = 0.0 if overlap >= 1.0 else amplitude_for_overlap(overlap)
    mean = math.sqrt(T) * alpha
    m0 = MomentSet.from_quadrature_excess(-mean, excess_x, excess_y, n_samples=n_samples)
    m1 = MomentSet.from_quadrature_excess(mean, excess_x, excess_y, n_samples=n_samples)
    return problem_from_moments(m0, m1, overlap, T, mode, tol)


def witness_from_excess(T, overlap, excess_x, excess_y=None, mode="source", tol=DEFAULT_TOLERANCE, n_samples=0, method="auto"):
    p = problem_from_excess(T, overlap, excess_x, excess_y, mode, tol, n_samples)
    v = sdp_feasibility_margin(p, method=method)
    v.inputs = {"T": T, "overlap": overlap, "E_x": excess_x, "E_y": excess_x if excess_y is None else excess_y, "mode": mode}
    return v


def calibrated(m: MomentSet, vacuum_var: float) -> MomentSet:
    """Rescale SNU moments so that the measured vacuum variance becomes exactly 1."""
    m = m.to(UnitConvention.SNU)
    s = 1.0 / math.sqrt(vacuum_var)
    return MomentSet(m.mean_x * s, m.mean_y * s, m.var_x * s * s, m.var_y * s * s, m.cov_xy * s * s, UnitConvention.SNU, m.n_samples)


def witness_from_data(
    records: RecordBatch,
    source: SourceConfig,
    channel_T: float,
    tol: float = DEFAULT_TOLERANCE,
    mode: str = "source",
    method: str = "auto",
) -> WitnessVerdict:
    """Estimate both conditional moment sets, calibrate to the batch vacuum, and test."""
    vac = vacuum_moments(records)
    vv = 0.5 * (vac.var_x + vac.var_y)
    m0 = calibrated(estimate_conditional_moments(records, 0), vv)
    m1 = calibrated(estimate_conditional_moments(records, 1), vv)
    p = problem_from_moments(m0, m1, source.overlap, channel_T, mode, tol)
    v = sdp_feasibility_margin(p, method=method)
    v.inputs = {"T": channel_T, "overlap": source.overlap, "mode": mode, "n0": m0.n_samples, "n1": m1.n_samples}
    return v


@dataclass
class BoundCurve:
    transmission: float
    overlap: float
    points: list
    E_max: float
    resolution: float
    mode: str = "source"


def entanglement_bound(
    T: float,
    o: float,
    resolution: float = DEFAULT_RESOLUTION,
    mode: str = "source",
    tol: float = DEFAULT_TOLERANCE,
    method: str = "auto",
) -> BoundCurve:
    """Bisect the symmetric operator excess variance E between entangled and inconclusive.

    E_max is the largest E on the entangled side of the final bracket; it is 0
    when even noiseless states are inconclusive (o = 1).
    """
    if not 0.0 < T <= 1.0 or not 0.0 < o <= 1.0:
        raise ValueError("need T in (0, 1] and o in (0, 1]")
    points = []

    def check(E):
        v = witness_from_excess(T, o, E, mode=mode, tol=tol, method=method)
        if v.entangled is None:
            raise sdp.SolverError(f"solver failed at T={T}, o={o}, E={E}: {v.status}")
        points.append((E, v.entangled))
        return v.entangled

    if not check(0.0):
        return BoundCurve(T, o, points, 0.0, resolution, mode)
    lo, hi = 0.0, 0.5
    while check(hi):
        lo, hi = hi, 2.0 * hi
        if hi > 64:
            raise sdp.SolverError("bound did not close")
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if check(mid):
            lo = mid
        else:
            hi = mid
    points.sort()
    return BoundCurve(T, o, points, lo, resolution, mode)


def bound_grid(
    transmissions,
    overlaps,
    resolution: float = DEFAULT_RESOLUTION,
    mode: str = "source",
    tol: float = DEFAULT_TOLERANCE,
    method: str = "auto",
    workers: int = 1,
) -> list[BoundCurve]:
    """entanglement_bound on a T x overlap grid, ordered T-major as given."""
    grid = [(float(T), float(o)) for T in transmissions for o in overlaps]

    def run(point):
        return entanglement_bound(point[0], point[1], resolution, mode, tol, method)

    if workers > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, grid))
    return [run(g) for g in grid]
