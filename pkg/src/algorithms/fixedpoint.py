import logging

import numpy as np

logger = logging.getLogger(__name__)


def damped_iteration(step, x0, alpha=0.5, tol=1e-9, max_iter=1000):
    """
    Damped fixed-point iteration x_{k+1} = alpha * f(x_k) + (1 - alpha) * x_k.

    Args:
        step: Function mapping a vector to its image f(x)
        x0: Initial vector
        alpha: Damping factor in (0, 1]
        tol: Stop once the max-abs change drops below this
        max_iter: Iteration limit

    Returns:
        x: Last finite iterate
        results: Dictionary with iterations, residual and convergence flag
    """
    x = np.asarray(x0, dtype=float)
    residual = float("inf")
    iterations = 0
    converged = False

    while iterations < max_iter:
        image = np.asarray(step(x), dtype=float)
        x_next = alpha * image + (1 - alpha) * x
        iterations += 1

        if not np.all(np.isfinite(x_next)):
            # Diverged; keep the last finite iterate
            logger.warning("Fixed point diverged after %d iterations", iterations)
            break

        residual = float(np.max(np.abs(x_next - x))) if x.size else 0.0
        x = x_next
        if residual < tol:
            converged = True
            break

    if not converged:
        logger.warning("Fixed point did not converge: %d iterations, residual %.3g", iterations, residual)

    return x, {
        "iterations": iterations,
        "residual": residual,
        "converged": converged,
    }
