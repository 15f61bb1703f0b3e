"""Shift-invert restarted Arnoldi (Krylov-Schur) for ``K x = Lambda M x`` with singular ``M``.

The Krylov operator is ``T = (K - sigma M)^-1 M``.  A Ritz value ``theta`` of
``T`` maps back to ``Lambda = sigma + 1/theta``; the infinite eigenvalues
carried by the zero block of ``M`` map to ``theta = 0`` and are discarded.
Restarts keep the Schur vectors of the wanted Ritz values (Krylov-Schur
form, equivalent to exact-shift implicit restarting) and converged blocks are
refined by one more operator application plus a Rayleigh-Ritz projection,
which also purges directions of the nilpotent part of ``T``.

:func:`dense_qz_oracle` solves the same pencil densely through the
generalized Schur form and serves as an independent check on small systems.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "EPS0",
    "MU0",
    "SolverConfig",
    "EigenPair",
    "SingularShiftError",
    "ConvergenceError",
    "OracleError",
    "ShiftInvertSolver",
    "factorize",
    "shift_invert_arnoldi",
    "dense_qz_oracle",
    "compute_residuals",
]

log = logging.getLogger(__name__)

EPS0 = 8.8541878128e-12   # F/m
MU0 = 1.25663706212e-6    # H/m

INFINITE_THETA = 1e-10    # |theta| below this * ||T|| is an image of the M null block
PIVOT_TOLERANCE = 1e-14


class SingularShiftError(RuntimeError):
    """The shifted matrix ``K - sigma M`` is (numerically) singular."""


class ConvergenceError(RuntimeError):
    """Arnoldi did not converge; ``pairs`` holds what did converge."""

    def __init__(self, message, pairs=()):
        super().__init__(message)
        self.pairs = list(pairs)


class OracleError(ValueError):
    pass


@dataclass
class SolverConfig:
    shift: complex = 1.0
    nev: int = 6
    ncv: int | None = None
    tol: float = 1e-10
    max_restarts: int = 300
    seed: int = 0

    def __post_init__(self):
        self.shift = complex(self.shift)
        if self.nev < 1:
            raise ValueError("nev must be >= 1")
        if self.ncv is None:
            self.ncv = max(2 * self.nev + 1, 20)
        if self.ncv < self.nev + 2:
            raise ValueError("ncv must be >= nev + 2")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass
class EigenPair:
    lam: complex
    xi: np.ndarray
    zeta: np.ndarray
    residual: float = float("nan")
    constraint_residual: float = float("nan")
    converged: bool = True

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.xi, self.zeta])

    @property
    def omega(self) -> complex:
        """Angular frequency from ``Lambda = omega^2 eps0 mu0`` (principal root)."""
        w = np.sqrt(complex(self.lam) / (EPS0 * MU0))
        return complex(w)

    @property
    def frequency(self) -> float:
        return self.omega.real / (2.0 * np.pi)


# ---------------------------------------------------------------------------
# factorization


class ShiftInvertSolver:
    """Sparse LU of ``K - sigma M`` (optionally bordered by a gauge vector).

    Use from one thread at a time.
    """

    def __init__(self, K, M, shift, gauge=None):
        K = sp.csc_matrix(K, dtype=complex)
        M = sp.csc_matrix(M, dtype=complex)
        self.shift = complex(shift)
        self.size = K.shape[0]
        S = (K - self.shift * M).tocsc()
        if gauge is not None:
            z = sp.csc_matrix(np.asarray(gauge, dtype=complex).reshape(-1, 1))
            S = sp.bmat([[S, z], [z.T, None]], format="csc")
        self.bordered = gauge is not None
        self._S = S
        t0 = time.perf_counter()
        try:
            # minimum degree on the symmetrised pattern with threshold pivoting;
            # the zero dummy-variable block forces off-diagonal pivots
            self._lu = spla.splu(
                S,
                permc_spec="MMD_AT_PLUS_A",
                diag_pivot_thresh=0.01,
                relax=1,
                panel_size=10,
                options={"SymmetricMode": True},
            )
        except RuntimeError as exc:
            raise SingularShiftError(
                f"K - sigma*M is singular at sigma={self.shift}: {exc}"
            ) from None
        self.factor_time = time.perf_counter() - t0
        piv = np.abs(self._lu.U.diagonal())
        self.pivot_ratio = float(piv.min() / piv.max()) if piv.size else 1.0
        if not np.isfinite(self.pivot_ratio) or self.pivot_ratio < PIVOT_TOLERANCE:
            raise SingularShiftError(
                f"K - sigma*M is near-singular at sigma={self.shift}: "
                f"min/max |U_ii| = {self.pivot_ratio:.3e} "
                f"(smallest pivot {piv.min():.3e})"
            )
        self.fill = self._lu.L.nnz + self._lu.U.nnz

    def solve(self, r, refine: int = 2):
        """Solve ``(K - sigma M) y = r`` with up to ``refine`` correction steps.

        Threshold pivoting trades some backward stability for sparsity;
        iterative refinement recovers it.
        """
        r = np.asarray(r, dtype=complex)
        if self.bordered:
            pad = np.zeros((1,) + r.shape[1:], dtype=complex)
            r = np.concatenate([r, pad])
        y = self._lu.solve(r)
        nr = np.linalg.norm(r)
        for _ in range(refine):
            d = r - self._S @ y
            if np.linalg.norm(d) <= 1e-15 * nr:
                break
            y = y + self._lu.solve(d)
        return y[: self.size] if self.bordered else y


def factorize(K, M, shift, gauge=None) -> ShiftInvertSolver:
    return ShiftInvertSolver(K, M, shift, gauge)


# ---------------------------------------------------------------------------
# Arnoldi


def _orthogonalize(V, w):
    # classical Gram-Schmidt, applied twice
    h = V.conj().T @ w
    w = w - V @ h
    h2 = V.conj().T @ w
    w = w - V @ h2
    return w, h + h2


class _Arnoldi:
    def __init__(self, op, n, ncv, rng):
        self.op = op
        self.n = n
        self.ncv = ncv
        self.rng = rng
        self.V = np.zeros((n, ncv + 1), dtype=complex)
        self.H = np.zeros((ncv + 1, ncv), dtype=complex)
        self.exhausted = False
        self.k = 0  # current length of the factorization

    def _fresh(self, j):
        """Random continuation vector in the range of T, orthogonal to V[:, :j]."""
        for _ in range(3):
            r = self.rng.standard_normal(self.n) + 1j * self.rng.standard_normal(self.n)
            w = self.op(self.op(r))
            w, _ = _orthogonalize(self.V[:, :j], w)
            nw = np.linalg.norm(w)
            if nw > 1e-8 * np.linalg.norm(r):
                return w / nw
        return None

    def start(self):
        v = self._fresh(0)
        if v is None:
            raise ConvergenceError("operator (K - sigma M)^-1 M is zero")
        self.V[:, 0] = v
        self.k = 0

    def extend(self, start, end):
        V, H = self.V, self.H
        for j in range(start, end):
            w = self.op(V[:, j])
            nw0 = np.linalg.norm(w)
            w, h = _orthogonalize(V[:, : j + 1], w)
            H[: j + 1, j] = h
            b = np.linalg.norm(w)
            if b > 1e-12 * max(nw0, np.abs(h).max(initial=0.0)):
                H[j + 1, j] = b
                V[:, j + 1] = w / b
                continue
            # invariant subspace found
            H[j + 1, j] = 0.0
            v = self._fresh(j + 1)
            if v is None:
                self.exhausted = True
                self.k = j + 1
                return
            V[:, j + 1] = v
        self.k = end


def _refine(X, op, K, M, sigma, tol, sweeps=3):
    """Rayleigh-Ritz refinement of a converged Ritz block.

    Each sweep applies the shift-invert operator once (damping directions
    from the infinite eigenvalues of a singular ``M`` and tightening the
    block) and projects the pencil onto the result.
    """
    nw = X.shape[1]
    out = []
    for _ in range(sweeps):
        W, _ = np.linalg.qr(np.column_stack([op(X[:, i]) for i in range(nw)]))
        KW = K @ W
        MW = M @ W
        mu, Z = sla.eig(W.conj().T @ KW, W.conj().T @ MW)
        order = np.argsort(np.abs(mu - sigma))
        out = []
        for i in order:
            if not np.isfinite(mu[i]):
                continue
            x = W @ Z[:, i]
            x /= np.linalg.norm(x)
            res = float(np.linalg.norm(K @ x - mu[i] * (M @ x)))
            out.append((complex(mu[i]), x, res))
        if len(out) == nw and all(r <= tol for _, _, r in out):
            break
        X = np.column_stack([x for _, x, _ in out]) if out else X
    return out


def shift_invert_arnoldi(K, M, cfg: SolverConfig, gauge=None, solver=None,
                         m: int | None = None) -> list[EigenPair]:
    """Eigenpairs of ``K x = Lambda M x`` nearest ``cfg.shift``.

    Returns up to ``cfg.nev`` pairs sorted by ``|Lambda - shift|``.  ``m``
    splits eigenvectors into field part ``xi = x[:m]`` and scalar part
    ``zeta = x[m:]`` (default: no scalar part).  Raises
    :class:`ConvergenceError` (with the converged subset attached) when
    ``max_restarts`` is exhausted.
    """
    K = sp.csr_matrix(K, dtype=complex)
    M = sp.csr_matrix(M, dtype=complex)
    N = K.shape[0]
    m = N if m is None else m
    sigma = cfg.shift
    if solver is None:
        solver = factorize(K, M, sigma, gauge)

    def op(x):
        return solver.solve(M @ x)

    rng = np.random.default_rng(cfg.seed)
    ncv = min(cfg.ncv, N)
    nev = min(cfg.nev, ncv - 1) if ncv > 1 else 1
    arn = _Arnoldi(op, N, ncv, rng)
    arn.start()
    arn.extend(0, ncv)

    def residual(lam, x):
        return float(np.linalg.norm(K @ x - lam * (M @ x)) / np.linalg.norm(x))

    accepted = {}
    restarts = 0
    # Ritz estimates live in operator scale; tightened whenever the true
    # residual of a Ritz-converged block still misses tol
    rtol = cfg.tol
    # single-vector Krylov spaces see one direction per eigenspace; after
    # convergence, a fresh direction is injected next to the locked block
    # until the accepted set stops changing
    previous = None
    checks = 0
    while True:
        k = arn.k
        Hk = arn.H[:k, :k]
        theta, Y = np.linalg.eig(Hk)
        Y = Y / np.linalg.norm(Y, axis=0)
        order = np.argsort(-np.abs(theta), kind="stable")
        tnorm = np.abs(theta).max(initial=0.0)
        finite = [i for i in order if np.abs(theta[i]) > INFINITE_THETA * tnorm]
        wanted = finite[:nev]
        fnorm = 0.0 if arn.exhausted else abs(arn.H[k, k - 1])
        est = fnorm * np.abs(Y[k - 1, wanted])
        ritz_ok = est <= rtol * np.abs(theta[wanted])

        accepted = {}
        if len(wanted) and np.all(ritz_ok):
            X = arn.V[:, :k] @ Y[:, wanted]
            for i, (lam, x, res) in enumerate(_refine(X, op, K, M, sigma, cfg.tol)):
                if res <= cfg.tol:
                    accepted[i] = (lam, x, res)
            if len(accepted) < len(wanted):
                rtol = max(rtol * 0.1, 1e-15)
        done = len(accepted) == len(wanted) and len(wanted) > 0
        inject = False
        if done and not arn.exhausted:
            current = np.sort_complex(np.array([a[0] for a in accepted.values()]))
            stable = previous is not None and np.allclose(
                current, previous, rtol=1e-8, atol=0.0
            )
            if stable or checks >= nev:
                break
            previous, checks, inject = current, checks + 1, True
        elif done or arn.exhausted or restarts >= cfg.max_restarts:
            break
        restarts += 1

        # Krylov-Schur restart: keep the Schur vectors of the p largest |theta|
        nconv = int(np.sum(ritz_ok))
        p = min(nev + min(nconv, (k - nev) // 2), k - 1)
        if inject:
            p = min(len(wanted), k - 1)
        cut = np.abs(theta[order[p - 1]])
        T, U, p = sla.schur(Hk, output="complex", sort=lambda z: abs(z) >= cut)
        p = min(max(p, 1), k - 1)
        b = arn.H[k, k - 1] * U[k - 1, :p]
        arn.V[:, :p] = arn.V[:, :k] @ U[:, :p]
        arn.V[:, p] = arn.V[:, k]
        arn.H[:] = 0.0
        arn.H[:p, :p] = T[:p, :p]
        arn.H[p, :p] = b
        if inject or arn.exhausted or not np.any(b):
            v = arn._fresh(p)
            if v is None:
                arn.exhausted = True
                arn.k = p
                continue
            arn.H[p, :p] = 0.0
            arn.V[:, p] = v
        arn.extend(p, ncv)

    pairs = []
    for lam, x, res in accepted.values():
        pairs.append(EigenPair(lam=complex(lam), xi=x[:m].copy(), zeta=x[m:].copy(),
                               residual=res))
    pairs.sort(key=lambda pr: abs(pr.lam - sigma))
    log.debug("arnoldi: %d restarts, %d/%d accepted", restarts, len(pairs), len(wanted))
    if len(pairs) < min(nev, len(finite)) and not arn.exhausted:
        raise ConvergenceError(
            f"{len(pairs)} of {nev} eigenpairs converged after {restarts} restarts",
            pairs,
        )
    return pairs


# ---------------------------------------------------------------------------
# dense oracle


def dense_qz_oracle(K, M, gauge=None, m: int | None = None, cap: int = 2000,
                    inf_tol: float = 1e-8) -> list[EigenPair]:
    """All finite eigenpairs of a small pencil via the QZ algorithm.

    A pair is declared infinite when ``||M x|| < inf_tol * ||M|| ||x||`` or
    when ``|Lambda|`` exceeds ``1e6 * ||K|| / ||M||``.
    """
    K = np.asarray(K.toarray() if sp.issparse(K) else K, dtype=complex)
    M = np.asarray(M.toarray() if sp.issparse(M) else M, dtype=complex)
    N = K.shape[0]
    if N > cap:
        raise OracleError(f"dense oracle limited to {cap} unknowns, got {N}")
    m = N if m is None else m
    Kb, Mb = K, M
    if gauge is not None:
        z = np.asarray(gauge, dtype=complex).reshape(-1, 1)
        Kb = np.block([[K, z], [z.T, np.zeros((1, 1))]])
        Mb = np.block([[M, np.zeros((N, 1))], [np.zeros((1, N + 1))]])
    ab, X = sla.eig(Kb, Mb, homogeneous_eigvals=True)
    alpha, beta = ab
    X = X[:N]
    nK = np.linalg.norm(K, 1)
    nM = np.linalg.norm(M, 1)
    if nM == 0:
        return []
    big = 1e6 * nK / nM
    pairs = []
    for a, b, x in zip(alpha, beta, X.T):
        nx = np.linalg.norm(x)
        if nx == 0 or np.linalg.norm(M @ x) < inf_tol * nM * nx:
            continue
        if abs(b) == 0 or abs(a) > big * abs(b):
            continue
        lam = a / b
        x = x / nx
        res = float(np.linalg.norm(K @ x - lam * (M @ x)))
        pairs.append(EigenPair(lam=complex(lam), xi=x[:m], zeta=x[m:], residual=res))
    pairs.sort(key=lambda pr: (abs(pr.lam), pr.lam.real))
    return pairs


def compute_residuals(pair: EigenPair, K, M, C=None) -> dict:
    """Relative residual ``||Kx - Lambda Mx|| / ||x||`` and ``||C xi|| / ||xi||``."""
    x = pair.vector
    nx = np.linalg.norm(x)
    res = float(np.linalg.norm(K @ x - pair.lam * (M @ x)) / nx) if nx else float("nan")
    out = {"residual": res, "constraint_residual": float("nan")}
    if C is not None and C.shape[0] > 0:
        nxi = np.linalg.norm(pair.xi)
        out["constraint_residual"] = float(np.linalg.norm(C @ pair.xi) / nxi)
    elif C is not None:
        out["constraint_residual"] = 0.0
    return out
