"""Shared numerical kernels: local solves, eigenproblems, orthonormalization.

All kernels are stateless and operate on plain numpy / scipy.sparse inputs,
so they can be called concurrently from independent per-region builders.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import LocalSolverError, SingularMetricError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EigenPairs:
    """Ascending eigenvalues with matching (metric-orthonormal) columns."""

    values: np.ndarray
    vectors: np.ndarray


def generalized_sym_eig(S: np.ndarray, T: np.ndarray) -> EigenPairs:
    """Solve S v = lambda T v for symmetric S and SPD T.

    Small symmetry drift (from forming Gram matrices in floating point) is
    removed by averaging before factorization.
    """
    S = np.asarray(S, dtype=float)
    T = np.asarray(T, dtype=float)
    S = 0.5 * (S + S.T)
    T = 0.5 * (T + T.T)
    try:
        values, vectors = sla.eigh(S, T)
    except (sla.LinAlgError, ValueError) as exc:
        raise SingularMetricError(f"metric not SPD: {exc}") from exc
    return EigenPairs(values=values, vectors=vectors)


def local_dirichlet_solve(A_local, rhs, tol: float = 1e-10, label: str = ""):
    """Solve a local square system with a checked relative residual.

    Accepts a sparse or dense matrix and one or several right-hand sides.
    """
    rhs = np.asarray(rhs, dtype=float)
    where = f" ({label})" if label else ""
    try:
        if sp.issparse(A_local):
            x = spla.splu(A_local.tocsc()).solve(rhs)
        else:
            x = sla.solve(np.asarray(A_local, dtype=float), rhs)
    except (RuntimeError, sla.LinAlgError) as exc:
        raise LocalSolverError(f"local solve failed{where}: {exc}") from exc
    resid = A_local @ x - rhs
    scale = np.linalg.norm(rhs)
    err = np.linalg.norm(resid) / (scale if scale > 0.0 else 1.0)
    if not np.isfinite(err) or err > tol:
        raise LocalSolverError(
            f"local solve residual {err:.3e} exceeds tol {tol:.3e}{where}"
        )
    return x


def extend_orthonormal(Q: np.ndarray | None, V: np.ndarray, droptol: float = 1e-10):
    """Orthonormalize the columns of V against Q and each other.

    Returns the accepted new columns only.  A column is dropped when its
    residual after projection is at most droptol times its original norm,
    so the combined span is preserved up to droptol.
    """
    V = np.array(V, dtype=float, copy=True)
    if V.ndim != 2 or V.shape[1] == 0:
        return np.zeros((V.shape[0] if V.ndim == 2 else 0, 0))
    norms0 = np.linalg.norm(V, axis=0)

    nq = 0 if Q is None else Q.shape[1]
    accepted = np.zeros((V.shape[0], V.shape[1]))
    na = 0
    block = 128
    for lo in range(0, V.shape[1], block):
        W = V[:, lo : lo + block]
        # two projection passes keep orthogonality near machine precision
        for _ in range(2):
            if nq:
                W -= Q[:, :nq] @ (Q[:, :nq].T @ W)
            if na:
                W -= accepted[:, :na] @ (accepted[:, :na].T @ W)
        for j in range(W.shape[1]):
            w = W[:, j]
            if na:
                w = w - accepted[:, :na] @ (accepted[:, :na].T @ w)
            nrm = np.linalg.norm(w)
            if nrm <= droptol * max(norms0[lo + j], np.finfo(float).tiny):
                continue
            accepted[:, na] = w / nrm
            na += 1
    return accepted[:, :na].copy()


def orthonormalize_columns(V: np.ndarray, droptol: float = 1e-10) -> np.ndarray:
    """Euclidean orthonormalization with near-dependent columns dropped."""
    return extend_orthonormal(None, V, droptol=droptol)


def _factor_psd(B_uu, label: str):
    """Factor a PSD block, retrying once with a tiny ridge if singular."""
    sparse = sp.issparse(B_uu)
    dim = B_uu.shape[0]
    trace = B_uu.diagonal().sum() if sparse else np.trace(B_uu)
    for attempt in range(2):
        try:
            if sparse:
                lu = spla.splu(B_uu.tocsc())
                return lu.solve
            c, low = sla.cho_factor(np.asarray(B_uu, dtype=float))
            return lambda rhs: sla.cho_solve((c, low), rhs)
        except (RuntimeError, sla.LinAlgError):
            if attempt == 1:
                break
            ridge = 1e-12 * trace / max(dim, 1)
            log.warning("singular energy block%s: adding ridge %.3e", label, ridge)
            B_uu = B_uu + ridge * (sp.eye(dim, format="csc") if sparse else np.eye(dim))
    raise LocalSolverError(f"energy block not factorizable{label}")


def min_energy_extension(B_local, constrained_dofs, trace_values, label: str = ""):
    """Minimum-B-energy extension of prescribed values on a region.

    Given a symmetric PSD matrix over the region dofs, returns the vector
    (or one column per trace column) that matches ``trace_values`` on
    ``constrained_dofs``, vanishes implicitly outside the region, and
    minimizes v^T B v.  The unconstrained block is solved against minus the
    coupling block times the trace.
    """
    constrained = np.asarray(constrained_dofs, dtype=np.int64)
    traces = np.asarray(trace_values, dtype=float)
    dim = B_local.shape[0]
    free = np.setdiff1d(np.arange(dim), constrained, assume_unique=False)
    single = traces.ndim == 1
    T = traces[:, None] if single else traces
    if T.shape[0] != constrained.size:
        raise ValueError("trace rows must match constrained dof count")

    out = np.zeros((dim, T.shape[1]))
    out[constrained] = T
    if free.size:
        if sp.issparse(B_local):
            B_uu = B_local[free][:, free]
            B_uc = B_local[free][:, constrained]
            rhs = -(B_uc @ T)
        else:
            B_uu = B_local[np.ix_(free, free)]
            rhs = -(B_local[np.ix_(free, constrained)] @ T)
        where = f" ({label})" if label else ""
        out[free] = _factor_psd(B_uu, where)(rhs)
    return out[:, 0] if single else out
