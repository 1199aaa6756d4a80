"""LSTM cell, sequence runner, and the bidirectional encoder.

Single-layer, no peepholes, independent forget gate. Gate weights are stored
fused as [4n x l] / [4n x n] blocks in (input, forget, output, candidate)
order; the forget block of the bias starts at 1.0.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import DimensionError

__all__ = ["LSTMParams", "LSTMState", "init_lstm", "lstm_step", "run_sequence",
           "encode_bidirectional", "zero_state"]

INIT_SCALE = 0.1
FORGET_BIAS = 1.0


@dataclass
class LSTMState:
    h: ad.Node
    c: ad.Node


class LSTMParams:
    """Fused gate weights for one direction: W_x[4n,l], W_h[4n,n], b[4n]."""

    def __init__(self, name, W_x, W_h, b):
        self.name = name
        self.W_x = W_x
        self.W_h = W_h
        self.b = b
        self.hidden_size = W_h.value.shape[1]
        self.input_size = W_x.value.shape[1]
        if W_x.value.shape != (4 * self.hidden_size, self.input_size):
            raise DimensionError(f"lstm {name}: W_x has shape {W_x.value.shape}")
        if b.value.shape != (4 * self.hidden_size,):
            raise DimensionError(f"lstm {name}: b has shape {b.value.shape}")

    def parameters(self):
        return [self.W_x, self.W_h, self.b]


def init_lstm(rng, name, input_size, hidden_size):
    W_x = ad.Parameter(f"{name}.W_x", rng.uniform(-INIT_SCALE, INIT_SCALE,
                                                  (4 * hidden_size, input_size)))
    W_h = ad.Parameter(f"{name}.W_h", rng.uniform(-INIT_SCALE, INIT_SCALE,
                                                  (4 * hidden_size, hidden_size)))
    b = ad.Parameter(f"{name}.b", np.zeros(4 * hidden_size))
    b.value[hidden_size:2 * hidden_size] = FORGET_BIAS
    return LSTMParams(name, W_x, W_h, b)


def zero_state(hidden_size):
    return LSTMState(h=ad.constant(np.zeros(hidden_size)),
                     c=ad.constant(np.zeros(hidden_size)))


def lstm_step(tape, params, x, prev):
    """One cell update: i,f,o = sigmoid, g = tanh, c' = f*c + i*g, h' = o*tanh(c')."""
    n = params.hidden_size
    if x.value.shape[0] != params.input_size:
        raise DimensionError(
            f"lstm {params.name}: input {x.value.shape} vs expected ({params.input_size},)")
    z = ad.add(tape, ad.affine(tape, params.W_x, x, params.b),
               ad.matvec(tape, params.W_h, prev.h))
    i = ad.sigmoid(tape, _block(tape, z, 0, n))
    f = ad.sigmoid(tape, _block(tape, z, 1, n))
    o = ad.sigmoid(tape, _block(tape, z, 2, n))
    g = ad.tanh(tape, _block(tape, z, 3, n))
    c = ad.add(tape, ad.mul(tape, f, prev.c), ad.mul(tape, i, g))
    h = ad.mul(tape, o, ad.tanh(tape, c))
    return LSTMState(h=h, c=c)


def _block(tape, z, k, n):
    out = ad.Node(z.value[k * n:(k + 1) * n])
    if tape is not None:
        def backward_fn(g):
            ad._grad_buffer(z)[k * n:(k + 1) * n] += g
        tape.append(out, backward_fn)
    return out


def run_sequence(tape, params, xs, init=None):
    """States for every step of xs; init defaults to the zero state."""
    if not xs:
        raise DimensionError(f"lstm {params.name}: empty input sequence")
    state = init if init is not None else zero_state(params.hidden_size)
    states = []
    for x in xs:
        state = lstm_step(tape, params, x, state)
        states.append(state)
    return states


def encode_bidirectional(tape, fwd, bwd, xs):
    """Concatenated final states and per-position hidden vectors of both passes.

    Returns (e_raw, hidden_seq) with e_raw = [fwd h_T ; bwd h_1] of size 2n;
    hidden_seq[t] pairs the two directions at position t (attention input).
    """
    if not xs:
        raise DimensionError("encode_bidirectional: empty input sequence")
    fwd_states = run_sequence(tape, fwd, xs)
    bwd_states = run_sequence(tape, bwd, list(reversed(xs)))
    e_raw = ad.concat(tape, [fwd_states[-1].h, bwd_states[-1].h])
    hidden_seq = [ad.concat(tape, [f.h, b.h])
                  for f, b in zip(fwd_states, reversed(bwd_states))]
    return e_raw, hidden_seq
