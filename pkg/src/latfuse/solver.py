"""Inexact-ALM solver for the latent low-rank decomposition X = XZ + LX + E.

The problem minimized is

    min_{Z,L,E}  ||Z||_* + ||L||_* + lam * ||E||_1
    s.t.         X = XZ + LX + E

where ``||.||_*`` is the nuclear norm and ``||.||_1`` the elementwise l1
norm.  Splitting variables J = Z and S = L turn the nuclear-norm terms into
plain singular value thresholding steps; the equality constraints carry
Lagrange multipliers Y1 (data), Y2 (Z - J) and Y3 (L - S), with a penalty
parameter mu grown geometrically each sweep.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import InvalidInputError, NumericalError


def _as_matrix(M, name: str = "matrix") -> np.ndarray:
    A = np.asarray(M, dtype=np.float64)
    if A.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.isfinite(A).all():
        raise InvalidInputError(f"{name} contains NaN or Inf entries")
    return A


def soft_threshold(M, tau: float) -> np.ndarray:
    """Elementwise shrinkage sign(m) * max(|m| - tau, 0).

    Proximal operator of ``tau * ||.||_1``; used for the sparse term E.
    """
    if not tau >= 0:
        raise InvalidInputError(f"shrinkage threshold must be >= 0, got {tau}")
    A = _as_matrix(M)
    return np.sign(A) * np.maximum(np.abs(A) - tau, 0.0)


def svt(M, tau: float) -> np.ndarray:
    """Singular value thresholding: proximal operator of ``tau * ||.||_*``.

    Computes M = U diag(s) V^T and returns U diag(max(s - tau, 0)) V^T.
    """
    if not tau >= 0:
        raise InvalidInputError(f"shrinkage threshold must be >= 0, got {tau}")
    A = _as_matrix(M)
    try:
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError:
        # The divide-and-conquer driver occasionally fails to converge on
        # valid inputs; retry with the slower QR-iteration driver.
        try:
            U, s, Vt = scipy.linalg.svd(
                A, full_matrices=False, lapack_driver="gesvd", check_finite=False
            )
        except scipy.linalg.LinAlgError as exc:
            raise NumericalError(
                f"SVD did not converge on a {A.shape[0]}x{A.shape[1]} input: {exc}"
            ) from exc
    s = s - tau
    keep = int(np.count_nonzero(s > 0.0))
    if keep == 0:
        return np.zeros_like(A)
    return (U[:, :keep] * s[:keep]) @ Vt[:keep]


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of the inexact-ALM solve.

    ``lam`` balances the l1 penalty on E against the two nuclear norms and is
    the only model parameter; the rest control the penalty schedule and
    stopping rule.  ``tol`` applies in the max-abs norm to the data constraint
    X - XZ - LX - E and to both auxiliary constraints Z - J and L - S.
    """

    lam: float = 0.8
    mu0: float = 1e-6
    rho: float = 1.1
    mu_max: float = 1e10
    tol: float = 1e-7
    max_iter: int = 2000

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidInputError(f"lam must be > 0, got {self.lam}")
        if not self.mu0 > 0:
            raise InvalidInputError(f"mu0 must be > 0, got {self.mu0}")
        if not self.rho > 1:
            raise InvalidInputError(f"rho must be > 1, got {self.rho}")
        if not self.mu0 < self.mu_max:
            raise InvalidInputError(
                f"mu0 must be < mu_max, got mu0={self.mu0}, mu_max={self.mu_max}"
            )
        if not self.tol > 0:
            raise InvalidInputError(f"tol must be > 0, got {self.tol}")
        if int(self.max_iter) < 1:
            raise InvalidInputError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass
class LatLrrSolution:
    """Result of one latent low-rank solve.

    ``final_residual`` is the max-abs norm of X - XZ - LX - E for the
    returned iterate; ``aux_residual`` is the larger of the max-abs norms of
    Z - J and L - S.  When ``converged`` is False the returned matrices are
    the best-feasibility iterate observed within the iteration budget.
    """

    Z: np.ndarray
    L: np.ndarray
    E: np.ndarray
    iterations: int
    final_residual: float
    aux_residual: float
    converged: bool
    residual_history: list[float] = field(default_factory=list, repr=False)


def solve_latlrr(X, cfg: SolverConfig | None = None) -> LatLrrSolution:
    """Solve X = XZ + LX + E for low-rank Z, L and sparse E by inexact ALM.

    X must be a finite real matrix with at least 2 rows and 2 columns.
    Returns a :class:`LatLrrSolution`; non-convergence within
    ``cfg.max_iter`` sweeps is reported through ``converged=False`` rather
    than raised, so callers can warn and continue.  Divergent iterates raise
    :class:`NumericalError`.
    """
    X = _as_matrix(X, "X")
    rows, cols = X.shape
    if rows < 2 or cols < 2:
        raise InvalidInputError(
            f"X must be at least 2x2 to have nontrivial row and column spaces, "
            f"got {rows}x{cols}"
        )
    if cfg is None:
        cfg = SolverConfig()

    # Both normal matrices are symmetric positive definite and depend only on
    # X; factor once and reuse a pair of triangular solves every sweep.
    Xt = X.T
    try:
        fac_cols = scipy.linalg.cho_factor(
            np.eye(cols) + Xt @ X, check_finite=False
        )
        fac_rows = scipy.linalg.cho_factor(
            np.eye(rows) + X @ Xt, check_finite=False
        )
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - SPD by construction
        raise NumericalError(f"Cholesky factorization failed: {exc}") from exc

    Z = np.zeros((cols, cols))
    L = np.zeros((rows, rows))
    E = np.zeros((rows, cols))
    Y1 = np.zeros((rows, cols))
    Y2 = np.zeros((cols, cols))
    Y3 = np.zeros((rows, rows))
    mu = cfg.mu0

    history: list[float] = []
    best_crit = np.inf
    best = None
    converged = False
    iterations = 0
    residual = np.inf
    aux = np.inf

    for it in range(1, int(cfg.max_iter) + 1):
        iterations = it
        J = svt(Z + Y2 / mu, 1.0 / mu)
        S = svt(L + Y3 / mu, 1.0 / mu)
        Z = scipy.linalg.cho_solve(
            fac_cols,
            Xt @ (X - L @ X - E) + J + (Xt @ Y1 - Y2) / mu,
            check_finite=False,
        )
        L = scipy.linalg.cho_solve(
            fac_rows,
            ((X - X @ Z - E) @ Xt + S + (Y1 @ Xt - Y3) / mu).T,
            check_finite=False,
        ).T
        XZ = X @ Z
        LX = L @ X
        T = X - XZ - LX + Y1 / mu
        if not np.isfinite(T).all():
            raise NumericalError(f"solver diverged at iteration {it} (non-finite iterate)")
        E = soft_threshold(T, cfg.lam / mu)

        R1 = X - XZ - LX - E
        R2 = Z - J
        R3 = L - S
        residual = float(np.max(np.abs(R1)))
        aux = max(float(np.max(np.abs(R2))), float(np.max(np.abs(R3))))
        if not (np.isfinite(residual) and np.isfinite(aux)):
            raise NumericalError(f"solver diverged at iteration {it} (non-finite residual)")
        history.append(residual)

        crit = max(residual, aux)
        if crit < best_crit:
            best_crit = crit
            best = (Z.copy(), L.copy(), E.copy(), it, residual, aux)

        if residual <= cfg.tol and aux <= cfg.tol:
            converged = True
            break

        Y1 = Y1 + mu * R1
        Y2 = Y2 + mu * R2
        Y3 = Y3 + mu * R3
        mu = min(cfg.rho * mu, cfg.mu_max)

    if converged:
        return LatLrrSolution(
            Z=Z,
            L=L,
            E=E,
            iterations=iterations,
            final_residual=residual,
            aux_residual=aux,
            converged=True,
            residual_history=history,
        )

    # Iteration budget exhausted: hand back the most feasible sweep seen.
    Zb, Lb, Eb, itb, resb, auxb = best
    return LatLrrSolution(
        Z=Zb,
        L=Lb,
        E=Eb,
        iterations=itb,
        final_residual=resb,
        aux_residual=auxb,
        converged=False,
        residual_history=history,
    )
