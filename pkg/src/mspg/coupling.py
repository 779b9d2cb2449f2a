"""Reduced saddle system, error reporting, inf-sup estimate and the online
residual-driven test enrichment loop.

The reduced blocks contract the fine operator with the test matrix Theta
and trial matrix Xi.  The squared fine operator is never materialized:
every product with it is evaluated as two sparse products.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .assembly import SparseOperator
from .errors import SolverFailureError
from .grid import CoarseTopology, Neighborhood, coloring
from .numerics import extend_orthonormal


@dataclass(frozen=True)
class SaddleState:
    """Solved reduced system with its fine-grid expansions."""

    op: SparseOperator
    Theta: np.ndarray
    Xi: np.ndarray
    G_ww: np.ndarray
    G_wu: np.ndarray
    rhs_w: np.ndarray
    w: np.ndarray
    u: np.ndarray
    w_fine: np.ndarray
    u_fine: np.ndarray


def _solve_saddle(G_ww, G_wu, rhs_w):
    """Dense solve of [[G_ww, G_wu], [G_wu^T, 0]] [w; u] = [rhs_w; 0].

    The test block is SPD by construction, so the system is reduced by a
    Cholesky block elimination and the Schur complement is solved with
    partial pivoting; a singular complement means rank-deficient blocks.
    """
    N, M = G_wu.shape
    with warnings.catch_warnings():
        warnings.simplefilter("error", sla.LinAlgWarning)
        factor = sla.cho_factor(G_ww, lower=True)
        X = sla.cho_solve(factor, G_wu)  # G_ww^{-1} G_wu
        schur = G_wu.T @ X
        u = sla.solve(schur, X.T @ rhs_w, overwrite_a=True, overwrite_b=True)
        w = sla.cho_solve(factor, rhs_w - G_wu @ u)
    return w, u


def solve_coupled(op: SparseOperator, Theta: np.ndarray, Xi: np.ndarray) -> SaddleState:
    """Assemble and solve the dense reduced saddle system."""
    Theta = np.asarray(Theta, dtype=float)
    Xi = np.asarray(Xi, dtype=float)
    N, M = Theta.shape[1], Xi.shape[1]
    Y = op.A.T @ Theta
    G_ww = Y.T @ Y
    G_wu = Y.T @ Xi
    del Y
    rhs_w = Theta.T @ op.f

    try:
        w, u = _solve_saddle(G_ww, G_wu, rhs_w)
    except (sla.LinAlgError, sla.LinAlgWarning) as exc:
        ranks = (np.linalg.matrix_rank(G_ww), np.linalg.matrix_rank(G_wu))
        raise SolverFailureError(
            f"singular reduced system (blocks N={N}, M={M}, "
            f"rank G_ww {ranks[0]}, rank G_wu {ranks[1]}): {exc}"
        ) from exc
    return SaddleState(
        op=op,
        Theta=Theta,
        Xi=Xi,
        G_ww=G_ww,
        G_wu=G_wu,
        rhs_w=rhs_w,
        w=w,
        u=u,
        w_fine=Theta @ w,
        u_fine=Xi @ u,
    )


@dataclass(frozen=True)
class ErrorReport:
    """Percent errors of one solve against the fine reference."""

    err_ms_pct: float
    err_proj_pct: float
    w_norm: float
    min_lambda_excluded: float | None = None
    infsup_est: float | None = None
    online_iter: int = 0


def error_report(
    state: SaddleState,
    u_ref: np.ndarray,
    projection: str = "l2",
    min_lambda_excluded: float | None = None,
    infsup_est: float | None = None,
    online_iter: int = 0,
) -> ErrorReport:
    """Multiscale and best-approximation errors of the trial span.

    ``projection='l2'`` measures plain coefficient-vector norms;
    ``projection='mass'`` switches both the projector and the norms to the
    mass inner product.
    """
    if projection == "l2":
        def nrm(v):
            return float(np.linalg.norm(v))

        Q, _ = np.linalg.qr(state.Xi)
        proj = Q @ (Q.T @ u_ref)
    elif projection == "mass":
        M = state.op.M

        def nrm(v):
            return float(np.sqrt(max(v @ (M @ v), 0.0)))

        MXi = M @ state.Xi
        coeff = sla.solve(state.Xi.T @ MXi, MXi.T @ u_ref, assume_a="pos")
        proj = state.Xi @ coeff
    else:
        raise ValueError(f"unknown projection mode {projection!r}")

    ref = nrm(u_ref)
    scale = ref if ref > 0.0 else 1.0
    return ErrorReport(
        err_ms_pct=100.0 * nrm(u_ref - state.u_fine) / scale,
        err_proj_pct=100.0 * nrm(u_ref - proj) / scale,
        w_norm=float(np.linalg.norm(state.w_fine)),
        min_lambda_excluded=min_lambda_excluded,
        infsup_est=infsup_est,
        online_iter=online_iter,
    )


def infsup_estimate(op: SparseOperator, Theta: np.ndarray, Xi: np.ndarray) -> float:
    """Smallest squared-energy projection ratio of the lifted trial columns.

    Each trial column is lifted through the transposed fine operator and
    projected onto the span of the test matrix in the squared-operator
    inner product; the estimate is the smallest ratio over the trial range
    and equals 1 when the lifted columns are contained in that span.
    """
    from .numerics import generalized_sym_eig

    try:
        lu = spla.splu(op.A.T.tocsc())
    except RuntimeError as exc:
        raise SolverFailureError(f"adjoint factorization failed: {exc}") from exc
    Z = lu.solve(np.asarray(Xi, dtype=float))
    W = op.A.T @ Z
    Y = op.A.T @ np.asarray(Theta, dtype=float)
    G1 = W.T @ W
    C = W.T @ Y
    G_ww = Y.T @ Y
    del Y
    G2 = C @ sla.solve(G_ww, C.T, assume_a="pos")
    vals = generalized_sym_eig(G2, G1).values
    return float(np.sqrt(max(vals[0], 0.0)))


def residual_full(state: SaddleState) -> np.ndarray:
    """Strong residual of the first block equation on the fine grid."""
    op = state.op
    return op.A @ (op.A.T @ state.w_fine) + op.A @ state.u_fine - op.f


def residual_local(state: SaddleState, region) -> np.ndarray:
    """Restriction of the global residual to a neighborhood interior."""
    idx = region.interior if isinstance(region, Neighborhood) else np.asarray(region)
    return residual_full(state)[idx]


@dataclass(frozen=True)
class OnlineSweepReport:
    iteration: int
    added_columns: int
    residual_norm: float


def _online_columns(state: SaddleState, topology: CoarseTopology, nodes, r, floor):
    """Local squared-operator solves against the residual, one per node."""
    op = state.op
    cols = []
    for node in nodes:
        nbhd = topology.neighborhoods[int(node)]
        I = nbhd.interior
        r_I = r[I]
        if np.linalg.norm(r_I) <= floor:
            continue
        A_I = op.A[I, :]
        B = (A_I @ A_I.T).tocsc()
        phi_I = spla.splu(B).solve(r_I)
        col = np.zeros(op.A.shape[0])
        col[I] = phi_I
        cols.append(col)
    return np.stack(cols, axis=1) if cols else np.zeros((op.A.shape[0], 0))


def online_enrich(
    state: SaddleState,
    topology: CoarseTopology,
    iterations: int = 1,
    droptol: float = 1e-10,
    refresh_between_classes: bool = True,
    residual_floor: float = 1e-12,
):
    """Grow the test space from local residuals and re-solve.

    One iteration sweeps the four parity classes of coarse nodes; within a
    class the neighborhood interiors are disjoint, so the local solves are
    independent.  By default the coupled system is re-solved after every
    class so later classes see the updated residual.
    """
    op = state.op
    classes = coloring(topology)
    floor = residual_floor * max(np.linalg.norm(op.f), 1.0)
    reports = []
    for it in range(1, iterations + 1):
        added = 0
        if refresh_between_classes:
            for nodes in classes:
                r = residual_full(state)
                new = _online_columns(state, topology, nodes, r, floor)
                accepted = extend_orthonormal(state.Theta, new, droptol=droptol)
                if accepted.shape[1]:
                    added += accepted.shape[1]
                    state = solve_coupled(
                        op, np.hstack([state.Theta, accepted]), state.Xi
                    )
        else:
            r = residual_full(state)
            new = np.hstack(
                [_online_columns(state, topology, nodes, r, floor) for nodes in classes]
            )
            accepted = extend_orthonormal(state.Theta, new, droptol=droptol)
            if accepted.shape[1]:
                added += accepted.shape[1]
                state = solve_coupled(op, np.hstack([state.Theta, accepted]), state.Xi)
        reports.append(
            OnlineSweepReport(
                iteration=it,
                added_columns=added,
                residual_norm=float(np.linalg.norm(residual_full(state))),
            )
        )
    return state, reports
