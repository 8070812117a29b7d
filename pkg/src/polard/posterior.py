"""Gaussian-process utility model: prior, MAP estimate, Laplace covariance.

The latent utility restricted to a finite action subset S gets a zero-mean
Gaussian prior with squared-exponential (ARD) covariance.  Feedback enters
through the negative log posterior

    S(U) = -ln P(D_p | U) - ln P(D_c | U) - ln P(D_o | U) + 0.5 U^T K^{-1} U,

minimized by a damped Newton method using the analytic gradient and Hessian
of every likelihood term.  The posterior is then approximated as
N(U_MAP, (K^{-1} + Lambda_MAP)^{-1}) where Lambda_MAP collects the
likelihood curvature at the optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from .actions import Action, ActionSet, ActionSpace
from .feedback import (
    FeedbackDataset,
    Link,
    NoiseParams,
    OrdinalScale,
    PROB_EPS,
    _g_with_derivs,
    _log_g,
    _ratio_d1,
    _ratio_d2,
)


@dataclass(frozen=True)
class KernelConfig:
    """Squared-exponential kernel with per-dimension lengthscales."""

    signal_variance: float = 1.0
    lengthscales: tuple[float, ...] = (1.0,)
    jitter: float = 1e-5

    def __post_init__(self) -> None:
        ls = self.lengthscales
        if isinstance(ls, (int, float)):
            ls = (float(ls),)
        object.__setattr__(self, "lengthscales", tuple(float(l) for l in ls))
        if self.signal_variance <= 0:
            raise ValueError(f"signal_variance must be > 0, got {self.signal_variance}")
        if any(l <= 0 for l in self.lengthscales):
            raise ValueError(f"lengthscales must all be > 0, got {self.lengthscales}")
        if self.jitter < 0:
            raise ValueError(f"jitter must be >= 0, got {self.jitter}")

    def lengthscale_vector(self, ndim: int) -> np.ndarray:
        if len(self.lengthscales) == ndim:
            return np.asarray(self.lengthscales, dtype=float)
        if len(self.lengthscales) == 1:
            return np.full(ndim, self.lengthscales[0])
        raise ValueError(
            f"kernel has {len(self.lengthscales)} lengthscales but the space has {ndim} dimensions"
        )


@dataclass(frozen=True)
class SolverConfig:
    max_newton_iters: int = 100
    grad_tol: float = 1e-6
    armijo_factor: float = 0.5
    armijo_c: float = 1e-4

    def __post_init__(self) -> None:
        if self.max_newton_iters < 1:
            raise ValueError("max_newton_iters must be >= 1")
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be > 0")


class Subset:
    """Action subset S with its flat-index -> position bijection."""

    def __init__(self, actions: ActionSet):
        self.actions = actions
        self.index_map: dict[int, int] = {a: i for i, a in enumerate(actions.indices)}

    @classmethod
    def of(cls, indices) -> "Subset":
        return cls(ActionSet.of(indices))

    def __len__(self) -> int:
        return len(self.actions)

    def __contains__(self, index: int) -> bool:
        return index in self.index_map

    def position(self, index: int) -> int:
        return self.index_map[index]

    def coords(self, space: ActionSpace) -> np.ndarray:
        return space.coords_matrix()[np.asarray(self.actions.indices, dtype=int)]


@dataclass
class MapDiagnostics:
    final_gradient_inf_norm: float
    newton_iterations: int
    converged: bool
    fallback_steps: int = 0

    def to_dict(self) -> dict:
        return {
            "final_gradient_inf_norm": self.final_gradient_inf_norm,
            "newton_iterations": self.newton_iterations,
            "converged": self.converged,
            "fallback_steps": self.fallback_steps,
        }


@dataclass
class PosteriorModel:
    """Gaussian approximation N(mean, covariance) of the utility over S."""

    subset: Subset
    mean: np.ndarray
    covariance: np.ndarray
    map_diagnostics: MapDiagnostics

    def std(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def to_json_dict(self, include_covariance: bool = False) -> dict:
        out = {
            "subset": list(self.subset.actions.indices),
            "mean": self.mean.tolist(),
            "variance": np.diag(self.covariance).tolist(),
            "std": self.std().tolist(),
            "diagnostics": self.map_diagnostics.to_dict(),
        }
        if include_covariance:
            out["covariance"] = self.covariance.tolist()  # row-major
        return out


def kernel_se(a: Action, b: Action, cfg: KernelConfig) -> float:
    """sigma^2 * exp(-0.5 * sum_i ((a_i - b_i) / l_i)^2)."""
    xa = np.asarray(a.coords, dtype=float)
    xb = np.asarray(b.coords, dtype=float)
    if xa.shape != xb.shape:
        raise ValueError("actions have mismatched dimensionality")
    ls = cfg.lengthscale_vector(xa.size)
    d2 = np.sum(((xa - xb) / ls) ** 2)
    return float(cfg.signal_variance * math.exp(-0.5 * d2))


def prior_covariance(subset: Subset, space: ActionSpace, cfg: KernelConfig) -> np.ndarray:
    """|S| x |S| squared-exponential kernel matrix plus jitter on the diagonal."""
    if len(subset) == 0:
        raise ValueError("subset must be nonempty")
    X = subset.coords(space) / cfg.lengthscale_vector(space.ndim)
    sq = cdist(X, X, "sqeuclidean")
    K = cfg.signal_variance * np.exp(-0.5 * sq)
    K[np.diag_indices_from(K)] += cfg.jitter
    return K


def _cholesky_with_escalation(M: np.ndarray, start: float, limit: float,
                              context: str) -> tuple[np.ndarray, float]:
    """Cholesky factor of M (+ extra jitter escalating x10 up to limit)."""
    extra = 0.0
    while True:
        try:
            A = M if extra == 0.0 else M + extra * np.eye(M.shape[0])
            return linalg.cholesky(A, lower=True), extra
        except linalg.LinAlgError:
            extra = start if extra == 0.0 else extra * 10.0
            if extra > limit:
                raise linalg.LinAlgError(
                    f"{context}: matrix not positive definite even with jitter {extra / 10.0:g}"
                )


class MapProblem:
    """Preprocessed solve instance: prior factorization plus feedback arrays.

    All operations are pure functions of the utility vector U (length |S|),
    so a single instance serves objective, gradient, Hessian, the Newton
    solve, and the Laplace covariance without re-deriving anything.
    """

    def __init__(self, subset: Subset, space: ActionSpace, data: FeedbackDataset,
                 kernel: KernelConfig, noise: NoiseParams, scale: OrdinalScale,
                 link: Link):
        missing = data.referenced_actions() - set(subset.index_map)
        if missing:
            raise KeyError(f"feedback references actions outside the subset: {sorted(missing)}")
        self.subset = subset
        self.link = link
        self.n = len(subset)

        self.prior = prior_covariance(subset, space, kernel)
        limit = 1e-2 * kernel.signal_variance
        start = kernel.jitter if kernel.jitter > 0 else 1e-12 * kernel.signal_variance
        L, extra = _cholesky_with_escalation(self.prior, start, limit, "prior covariance")
        if extra > 0.0:
            self.prior = self.prior + extra * np.eye(self.n)
        self._chol_prior = (L, True)
        self.prior_inv = linalg.cho_solve(self._chol_prior, np.eye(self.n))
        self.prior_inv = 0.5 * (self.prior_inv + self.prior_inv.T)

        # Pairwise comparisons: preferences (noise c_p) and coactive (c_c).
        win, lose, cs = [], [], []
        for rec in data.preferences:
            win.append(subset.position(rec.winner))
            lose.append(subset.position(rec.loser))
            cs.append(noise.c_p)
        for rec in data.coactive:
            win.append(subset.position(rec.suggested))
            lose.append(subset.position(rec.original))
            cs.append(noise.c_c)
        self.comp_win = np.asarray(win, dtype=int)
        self.comp_lose = np.asarray(lose, dtype=int)
        self.comp_c = np.asarray(cs, dtype=float)

        self.ord_pos = np.asarray([subset.position(r.action) for r in data.ordinal], dtype=int)
        self.ord_hi = np.asarray([scale.upper(r.label) for r in data.ordinal], dtype=float)
        self.ord_lo = np.asarray([scale.lower(r.label) for r in data.ordinal], dtype=float)
        self.c_o = noise.c_o

    def _comp_z(self, U: np.ndarray) -> np.ndarray:
        return (U[self.comp_win] - U[self.comp_lose]) / self.comp_c

    def _ord_terms(self, U: np.ndarray):
        """(P, dg1-dg2, ddg1-ddg2) for every ordinal record; P floored."""
        u = U[self.ord_pos]
        z1 = np.where(np.isfinite(self.ord_hi), (self.ord_hi - u) / self.c_o, np.inf)
        z2 = np.where(np.isfinite(self.ord_lo), (self.ord_lo - u) / self.c_o, -np.inf)
        g1, d1_1, d2_1 = _g_with_derivs(self.link, z1)
        g2, d1_2, d2_2 = _g_with_derivs(self.link, z2)
        prob = np.maximum(g1 - g2, PROB_EPS)
        return prob, d1_1 - d1_2, d2_1 - d2_2

    def objective(self, U: np.ndarray) -> float:
        U = np.asarray(U, dtype=float)
        total = 0.5 * float(U @ linalg.cho_solve(self._chol_prior, U))
        if self.comp_win.size:
            total -= float(np.sum(_log_g(self.link, self._comp_z(U))))
        if self.ord_pos.size:
            prob, _, _ = self._ord_terms(U)
            total -= float(np.sum(np.log(prob)))
        return total

    def gradient(self, U: np.ndarray) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        grad = linalg.cho_solve(self._chol_prior, U)
        if self.comp_win.size:
            coeff = _ratio_d1(self.link, self._comp_z(U)) / self.comp_c
            np.add.at(grad, self.comp_win, -coeff)
            np.add.at(grad, self.comp_lose, coeff)
        if self.ord_pos.size:
            prob, ddiff, _ = self._ord_terms(U)
            np.add.at(grad, self.ord_pos, ddiff / (prob * self.c_o))
        return grad

    def likelihood_hessian(self, U: np.ndarray) -> np.ndarray:
        """Lambda(U): curvature contributed by all feedback terms."""
        U = np.asarray(U, dtype=float)
        lam = np.zeros((self.n, self.n))
        if self.comp_win.size:
            z = self._comp_z(U)
            r1 = _ratio_d1(self.link, z)
            r2 = _ratio_d2(self.link, z)
            v = (r1 * r1 - r2) / (self.comp_c**2)
            np.add.at(lam, (self.comp_win, self.comp_win), v)
            np.add.at(lam, (self.comp_lose, self.comp_lose), v)
            np.add.at(lam, (self.comp_win, self.comp_lose), -v)
            np.add.at(lam, (self.comp_lose, self.comp_win), -v)
        if self.ord_pos.size:
            prob, ddiff, dddiff = self._ord_terms(U)
            q = ddiff / prob
            w = (q * q - dddiff / prob) / (self.c_o**2)
            np.add.at(lam, (self.ord_pos, self.ord_pos), w)
        return lam

    def hessian(self, U: np.ndarray) -> np.ndarray:
        return self.likelihood_hessian(U) + self.prior_inv


def solve_map(problem: MapProblem, cfg: SolverConfig = SolverConfig()) -> tuple[np.ndarray, MapDiagnostics]:
    """Minimize S(U) by Newton with Armijo backtracking from U = 0.

    Returns the best iterate and diagnostics; ``converged`` reports whether
    the gradient tolerance was met.  A Newton system that stays non-PD after
    jitter escalation falls back to a plain gradient step for that iteration.
    """
    U = np.zeros(problem.n)
    fallback = 0
    iterations = 0
    grad = problem.gradient(U)
    for _ in range(cfg.max_newton_iters):
        if np.max(np.abs(grad)) <= cfg.grad_tol:
            break
        H = problem.hessian(U)
        scale = max(float(np.mean(np.diag(H))), 1e-12)
        try:
            chol, _ = _cholesky_with_escalation(H, 1e-12 * scale, 1e-4 * scale, "newton system")
            step = -linalg.cho_solve((chol, True), grad)
        except linalg.LinAlgError:
            step = -grad
            fallback += 1
        slope = float(grad @ step)
        if slope >= 0:  # not a descent direction; fall back to steepest descent
            step = -grad
            slope = float(grad @ step)
            fallback += 1
        f0 = problem.objective(U)
        alpha = 1.0
        while alpha > 1e-14:
            trial = U + alpha * step
            if problem.objective(trial) <= f0 + cfg.armijo_c * alpha * slope:
                break
            alpha *= cfg.armijo_factor
        else:
            break  # no acceptable step; return best iterate
        U = U + alpha * step
        grad = problem.gradient(U)
        iterations += 1
    final_norm = float(np.max(np.abs(grad))) if grad.size else 0.0
    diag = MapDiagnostics(
        final_gradient_inf_norm=final_norm,
        newton_iterations=iterations,
        converged=bool(final_norm <= cfg.grad_tol),
        fallback_steps=fallback,
    )
    return U, diag


def laplace_covariance(problem: MapProblem, u_map: np.ndarray) -> np.ndarray:
    """(K^{-1} + Lambda_MAP)^{-1}, symmetrized; jitter-escalated if needed."""
    H = problem.hessian(u_map)
    scale = max(float(np.mean(np.diag(H))), 1e-12)
    chol, _ = _cholesky_with_escalation(H, 1e-12 * scale, 1e-2 * scale, "laplace covariance")
    cov = linalg.cho_solve((chol, True), np.eye(problem.n))
    return 0.5 * (cov + cov.T)


def update_posterior(subset: Subset, space: ActionSpace, data: FeedbackDataset,
                     kernel: KernelConfig, noise: NoiseParams, scale: OrdinalScale,
                     link: Link = Link.SIGMOID,
                     solver: SolverConfig = SolverConfig()) -> PosteriorModel:
    """MAP + Laplace posterior of the utility restricted to ``subset``.

    Every action referenced by ``data`` must belong to the subset; the
    caller (the session engine) constructs subsets so this always holds.
    """
    problem = MapProblem(subset, space, data, kernel, noise, scale, link)
    u_map, diag = solve_map(problem, solver)
    cov = laplace_covariance(problem, u_map)
    return PosteriorModel(subset=subset, mean=u_map, covariance=cov, map_diagnostics=diag)
