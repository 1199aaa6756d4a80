"""AdaDelta with per-parameter accumulators and optional L2 gradient term."""

import numpy as np

from .errors import TrainError

__all__ = ["AdaDeltaState", "adadelta_step"]


class AdaDeltaState:
    """Running E[g^2] and E[dx^2] accumulators, one pair per parameter.

    Keyed by parameter object, so shared tensors (a jointly trained encoder
    seen through several models) keep a single accumulator pair.
    """

    def __init__(self, rho=0.95, eps=1e-6):
        if not 0.0 < rho < 1.0:
            raise TrainError(f"adadelta: rho must be in (0,1), got {rho}")
        if eps <= 0.0:
            raise TrainError(f"adadelta: eps must be positive, got {eps}")
        self.rho = rho
        self.eps = eps
        self.sq_grad = {}
        self.sq_delta = {}

    def _slot(self, table, param):
        acc = table.get(param)
        if acc is None:
            acc = table[param] = np.zeros_like(param.value)
        return acc


def adadelta_step(params, grads, state, l2=0.0):
    """One in-place AdaDelta update over the given parameters.

    grads maps each Parameter to its gradient array. The L2 term l2 * theta
    is added to the gradient before the accumulator updates.
    """
    rho, eps = state.rho, state.eps
    for p in params:
        g = grads[p]
        if not np.all(np.isfinite(g)):
            raise TrainError(f"adadelta: non-finite gradient for parameter {p.name!r}")
        if l2 != 0.0:
            g = g + l2 * p.value
        sq_g = state._slot(state.sq_grad, p)
        sq_d = state._slot(state.sq_delta, p)
        sq_g *= rho
        sq_g += (1.0 - rho) * g * g
        delta = -np.sqrt((sq_d + eps) / (sq_g + eps)) * g
        sq_d *= rho
        sq_d += (1.0 - rho) * delta * delta
        p.value += delta
