"""Small dense semidefinite programs of the form

    maximize t  subject to  C_k + sum_j z_j G_kj - t I  >= 0   (k = 1..K)

over real z, with Hermitian (possibly complex) n x n blocks.  The optimum is the
largest achievable minimum eigenvalue over the affine family.

Two independent routes are provided:

* ``interior-point``: a primal-dual path-following method (HKM direction,
  Mehrotra predictor-corrector) working directly on the complex Hermitian
  blocks.  The returned t is the exact minimum eigenvalue at the returned z (a
  rigorous lower bound) and the dual matrix is turned into a rigorous upper
  bound, so the reported gap is certified.
* ``cvxopt``: cvxopt's primal-dual conic solver on the real symmetric embedding
  H = A + iB  ->  [[A, -B], [B, A]], which is PSD iff H is and has every
  eigenvalue of H twice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class SolverError(RuntimeError):
    """Raised when no solver route converged."""


@dataclass
class SdpResult:
    t: float
    z: np.ndarray
    status: str  # "optimal" or a failure description
    iterations: int
    gap: float
    dual_residual: float
    method: str

    @property
    def converged(self) -> bool:
        return self.status == "optimal"


def _herm(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + np.conj(np.swapaxes(M, -1, -2)))


def _ip(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Real trace inner products sum_k tr(A_k B_k); broadcasts over leading axes."""
    return np.real(np.einsum("...kab,...kba->...", A, B))


def _max_step(M: np.ndarray, dM: np.ndarray) -> float:
    """Largest step a <= 1 keeping M + a dM positive definite (M > 0)."""
    a = 1.0
    for blk, dblk in zip(M, dM):
        L = np.linalg.cholesky(blk)
        Li = np.linalg.inv(L)
        w = np.linalg.eigvalsh(_herm(Li @ dblk @ Li.conj().T))
        if w[0] < 0:
            a = min(a, -1.0 / w[0])
    return a


def min_eig_objective(C: np.ndarray, G: np.ndarray, z: np.ndarray) -> float:
    """Exact value of the objective at z: the smallest eigenvalue over all blocks."""
    S = C + np.tensordot(z, G, axes=(0, 0)) if len(z) else C
    return min(float(np.linalg.eigvalsh(_herm(blk))[0]) for blk in S)


def solve_interior_point(
    C: np.ndarray,
    G: np.ndarray,
    gap_tol: float = 1e-10,
    cert_tol: float = 1e-8,
    max_iter: int = 100,
) -> SdpResult:
    """Infeasible primal-dual path following with the HKM search direction.

    The problem is cast as  max b.y  s.t.  S = C - sum_j y_j A_j >= 0  with
    y = (z, t), A_j = -G_j, A_t = I, b = (0, ..., 0, 1); X is the dual matrix.
    C has shape (K, n, n); G has shape (m, K, n, n).
    """
    C = _herm(np.asarray(C, dtype=complex))
    G = np.asarray(G, dtype=complex).reshape((-1,) + C.shape)
    K, n, _ = C.shape
    m = G.shape[0]
    nu = K * n
    A = np.concatenate([-G, np.broadcast_to(np.eye(n), (1, K, n, n))], axis=0)
    b = np.zeros(m + 1)
    b[-1] = 1.0

    def Aop(X):
        return _ip(A, X[None])

    def Aadj(y):
        return np.tensordot(y, A, axes=(0, 0))

    scale = max(1.0, float(np.max(np.abs(C))))
    X = np.broadcast_to(np.eye(n), (K, n, n)).astype(complex) / nu
    S = np.broadcast_to(np.eye(n), (K, n, n)).astype(complex) * scale
    y = np.zeros(m + 1)
    y[-1] = min(float(np.linalg.eigvalsh(blk)[0]) for blk in C) - scale
    status = "iteration limit"
    it = 0
    for it in range(1, max_iter + 1):
        Rp = b - Aop(X)
        Rd = _herm(C - Aadj(y) - S)
        mu = float(_ip(X, S)) / nu
        pobj = float(b @ y)
        dobj = float(_ip(C, X))
        if (
            abs(dobj - pobj) < gap_tol * (1.0 + abs(pobj))
            and np.max(np.abs(Rp)) < gap_tol
            and np.max(np.abs(Rd)) < gap_tol * scale
        ):
            status = "optimal"
            break
        try:
            X, S, y = _hkm_step(A, Aop, Aadj, X, S, y, Rp, Rd, mu, nu)
        except np.linalg.LinAlgError:
            # an iterate lost definiteness to rounding, typically at a singular optimum;
            # fall through to the certificate below
            status = "numerical breakdown"
            break

    z = y[:-1].copy()
    t = min_eig_objective(C, G, z)
    upper = certified_upper_bound(C, G, X)
    gap = upper - t
    if gap <= cert_tol:
        status = "optimal"
    elif status == "optimal":
        status = f"gap {gap:.3g} not certified"
    return SdpResult(t, z, status, it, gap, _dual_residual(X, G), "interior-point")


def _hkm_step(A, Aop, Aadj, X, S, y, Rp, Rd, mu, nu):
    """One Mehrotra predictor-corrector iteration with the HKM direction."""
    Sinv = _herm(np.linalg.inv(S))
    # Schur complement M_ij = sum_k tr(A_ik X_k A_jk S_k^-1)
    AX = np.einsum("jkab,kbc->jkac", A, X)
    ASi = np.einsum("jkab,kbc->jkac", A, Sinv)
    M = np.real(np.einsum("ikab,jkba->ij", AX, ASi))

    def direction(sigma_mu, corr=None):
        rc = sigma_mu * Sinv - X
        if corr is not None:
            rc = rc - corr
        rhs = Rp - Aop(rc) + Aop(np.einsum("kab,kbc,kcd->kad", X, Rd, Sinv))
        dy = np.linalg.solve(M, rhs)
        dS = _herm(Rd - Aadj(dy))
        dX = _herm(rc - np.einsum("kab,kbc,kcd->kad", X, dS, Sinv))
        return dy, dX, dS

    # Mehrotra predictor-corrector
    dy, dX, dS = direction(0.0)
    ap = _max_step(X, dX)
    ad = _max_step(S, dS)
    mu_aff = float(_ip(X + ap * dX, S + ad * dS)) / nu
    sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
    corr = np.einsum("kab,kbc,kcd->kad", dX, dS, Sinv)
    dy, dX, dS = direction(sigma * mu, corr)
    ap = min(1.0, 0.98 * _max_step(X, dX))
    ad = min(1.0, 0.98 * _max_step(S, dS))
    X = _herm(X + ap * dX)
    S = _herm(S + ad * dS)
    y = y + ad * dy
    return X, S, y


def _dual_residual(Z: np.ndarray, G: np.ndarray) -> float:
    resid = np.real(np.einsum("kab,jkba->j", Z, G)) if len(G) else np.zeros(0)
    trace_sum = float(np.real(np.einsum("kaa->", Z)))
    return float(max(abs(trace_sum - 1.0), np.max(np.abs(resid), initial=0.0)))


def certified_upper_bound(C: np.ndarray, G: np.ndarray, Z: np.ndarray) -> float:
    """Upper bound on the optimal t from an approximate dual point Z.

    Any Z >= 0 with sum_k tr Z_k = 1 and sum_k tr(Z_k G_kj) = 0 bounds the
    optimum by sum_k tr(Z_k C_k).  Z is first corrected onto these equalities
    by a least-norm step; if that costs positivity, a multiple of the identity
    is added (the generators must be traceless) and the trace renormalized.
    """
    K, n, _ = C.shape
    eye = np.broadcast_to(np.eye(n), (1, K, n, n))
    A = np.concatenate([G, eye], axis=0) if len(G) else np.array(eye)
    target = np.zeros(len(A))
    target[-1] = 1.0
    current = np.real(np.einsum("kab,jkba->j", Z, A))
    gram = np.real(np.einsum("ikab,jkba->ij", A, A))
    y = np.linalg.lstsq(gram, target - current, rcond=None)[0]
    Zc = Z + np.tensordot(y, A, axes=(0, 0))
    Zc = 0.5 * (Zc + np.conj(np.swapaxes(Zc, -1, -2)))
    lam = min(float(np.linalg.eigvalsh(blk)[0]) for blk in Zc)
    if lam < 0:
        if len(G) and np.max(np.abs(np.einsum("jkaa->j", G))) > 1e-12:
            return math.inf
        Zc = Zc - lam * np.eye(n)
        Zc = Zc / float(np.real(np.einsum("kaa->", Zc)))
    return float(np.real(np.einsum("kab,kba->", Zc, C)))


def real_embedding(H: np.ndarray) -> np.ndarray:
    """[[Re H, -Im H], [Im H, Re H]]; applies to the last two axes."""
    A = np.real(H)
    B = np.imag(H)
    top = np.concatenate([A, -B], axis=-1)
    bot = np.concatenate([B, A], axis=-1)
    return np.concatenate([top, bot], axis=-2)


def solve_cvxopt(C: np.ndarray, G: np.ndarray, tol: float = 1e-9) -> SdpResult:
    from cvxopt import matrix, solvers

    C = np.asarray(C, dtype=complex)
    G = np.asarray(G, dtype=complex).reshape((-1,) + C.shape)
    K, n, _ = C.shape
    m = G.shape[0]
    N = 2 * n
    Gs, hs = [], []
    for k in range(K):
        cols = [-real_embedding(G[j, k]).ravel(order="F") for j in range(m)]
        cols.append(np.eye(N).ravel(order="F"))
        Gs.append(matrix(np.column_stack(cols)))
        hs.append(matrix(real_embedding(C[k])))
    c = matrix(np.concatenate([np.zeros(m), [-1.0]]))
    opts = {"show_progress": False, "abstol": tol, "reltol": tol, "feastol": tol, "maxiters": 200}
    sol = solvers.sdp(c, Gs=Gs, hs=hs, options=opts)
    x = np.array(sol["x"]).ravel()
    status = "optimal" if sol["status"] == "optimal" else f"cvxopt: {sol['status']}"
    gap = float(sol["gap"]) if sol["gap"] is not None else math.nan
    # the embedding doubles every eigenvalue, so the gap is reported per complex block
    return SdpResult(
        float(x[-1]),
        x[:-1],
        status,
        int(sol["iterations"]),
        gap / 2.0,
        float(max(sol["primal infeasibility"] or 0.0, sol["dual infeasibility"] or 0.0)),
        "cvxopt",
    )


METHODS = ("auto", "interior-point", "cvxopt")


def solve(C: np.ndarray, G: np.ndarray, method: str = "auto", **kw) -> SdpResult:
    """Dispatch to a route; "auto" runs interior-point and falls back to cvxopt if it fails."""
    if method == "auto":
        res = solve_interior_point(C, G)
        return res if res.converged else solve_cvxopt(C, G)
    if method == "interior-point":
        return solve_interior_point(C, G, **kw)
    if method == "cvxopt":
        return solve_cvxopt(C, G, **kw)
    raise ValueError(f"unknown SDP method {method!r}")
