"""Truncated-Newton minimizer with a preconditioned CG inner loop.

Hessian information enters only through matrix-vector products obtained
by differencing the gradient, so the objective owner never forms second
derivatives.  Step acceptance is a strong-Wolfe test implemented by
halving; when the curvature half cannot be met the longest
sufficient-decrease step is taken and flagged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import LineSearchFailed

_BETA_MIN = 1e-12


@dataclass
class TncIteration:
    fun: float
    grad_norm: float
    step: float
    cg_iterations: int
    negative_curvature: bool
    wolfe: bool                  # False when only sufficient decrease held


@dataclass
class TncResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    iterations: int
    converged: bool
    status: str
    history: list[TncIteration] = field(default_factory=list)
    n_fun: int = 0
    n_grad: int = 0


def tnc_minimize(fun, grad, x0, tol: float = 1e-6, max_iter: int = 100,
                 cg_max_iter: int | None = None, hess_step: float = 1e-7,
                 armijo: float = 1e-4, curvature: float = 0.9,
                 precond=None, callback=None) -> TncResult:
    """Minimize `fun` from `x0` until the gradient 2-norm drops below `tol`.

    cg_max_iter defaults to twenty times the dimension.  `precond`, when
    given, must apply the inverse preconditioner to a residual vector.
    Raises LineSearchFailed only if not a single decreasing step exists;
    a Wolfe-curvature miss alone is tolerated and recorded.
    """
    x = np.asarray(x0, dtype=float).copy()
    dim = x.size
    # Floating point denies CG its finite-termination property on badly
    # conditioned systems, so the default cap is a multiple of the size.
    cg_cap = 20 * dim if cg_max_iter is None else cg_max_iter
    minv = (lambda r: r) if precond is None else precond

    counters = {"f": 0, "g": 0}

    def f(v):
        counters["f"] += 1
        return float(fun(v))

    def df(v):
        counters["g"] += 1
        return np.asarray(grad(v), dtype=float)

    fx = f(x)
    g = df(x)
    history: list[TncIteration] = []
    status = "converged"
    converged = True

    for k in range(1, max_iter + 1):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            break

        # Inner CG on the local quadratic model; products by differencing.
        # The residual target shrinks with the gradient so late outer
        # iterations get near-Newton steps without chasing FD noise.
        delta = hess_step * (1.0 + float(np.linalg.norm(x)))
        inner_tol = min(0.01, gnorm ** 0.5) * gnorm
        r = -g
        z = minv(r)
        p = z.copy()
        s = np.zeros_like(x)
        rho_old = float(r @ z)
        neg_curv = False
        cg_iters = 0
        while cg_iters < cg_cap and np.linalg.norm(r) > inner_tol:
            pnorm = float(np.linalg.norm(p))
            if pnorm == 0.0:
                break
            eps = delta / pnorm
            q = (df(x + eps * p) - g) / eps
            curv = float(p @ q)
            if curv <= 0.0:
                neg_curv = True
                if cg_iters == 0:
                    s = p.copy()
                break
            alpha = rho_old / curv
            s += alpha * p
            r -= alpha * q
            cg_iters += 1
            z = minv(r)
            rho_new = float(r @ z)
            p = z + (rho_new / rho_old) * p
            rho_old = rho_new
        if not s.any():
            s = z if z.any() else -g

        gs = float(g @ s)
        if gs >= 0.0:
            s = -g
            gs = -gnorm ** 2

        beta = 1.0
        accepted = None
        fallback = None
        while beta >= _BETA_MIN:
            xn = x + beta * s
            fn = f(xn)
            if fn <= fx + armijo * beta * gs:
                gn = df(xn)
                if abs(float(gn @ s)) <= curvature * abs(gs):
                    accepted = (xn, fn, gn, beta, True)
                    break
                if fallback is None:
                    fallback = (xn, fn, gn, beta, False)
            beta *= 0.5
        if accepted is None:
            accepted = fallback
        if accepted is None:
            if not history:
                raise LineSearchFailed(
                    "no decreasing step along the first search direction")
            status = "line_search_failed"
            converged = False
            break

        x, fx, g, beta, wolfe = accepted
        history.append(TncIteration(fun=fx, grad_norm=float(np.linalg.norm(g)),
                                    step=beta, cg_iterations=cg_iters,
                                    negative_curvature=neg_curv, wolfe=wolfe))
        if callback is not None:
            callback(x, fx, g)
    else:
        if float(np.linalg.norm(g)) > tol:
            status = "max_iterations"
            converged = False

    return TncResult(x=x, fun=fx, grad=g, iterations=len(history),
                     converged=converged, status=status, history=history,
                     n_fun=counters["f"], n_grad=counters["g"])
