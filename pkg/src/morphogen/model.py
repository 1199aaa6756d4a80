"""The inflection generation network and its comparison variants.

The main ("full") architecture encodes the source characters with a
bidirectional LSTM, affine-transforms the concatenated final states into e,
and feeds [e ; y_{t-1} ; x_t] to the decoder LSTM at every step, switching
x_t to the learned epsilon symbol once the source runs out. Variants:

  plain-encdec  e only initializes the decoder hidden state; no x_t feed
  attention     additive attention context replaces e; no x_t feed
  no-encoder    decoder sees [y_{t-1} ; x_t] only

Output logits go through a softmax with BOS and EPS masked out; training is
teacher-forced negative log-likelihood with EOS closing every target.
"""

import json

import numpy as np

from . import autodiff as ad
from . import lstm
from .errors import CheckpointError, DataError, DimensionError, MorphogenError
from .vocab import BOS, EOS, EPS, CharVocab

__all__ = [
    "VARIANTS",
    "MASKED_OUTPUT_IDS",
    "ModelParams",
    "init_model",
    "embed",
    "transform_encoding",
    "attention_context",
    "decoder_step",
    "decoder_step_count",
    "nll_loss",
    "forward_variant",
    "DecodeSession",
    "save_model",
    "load_model",
    "models_equal",
    "check_model_gradients",
]

VARIANTS = ("full", "plain-encdec", "attention", "no-encoder")
MASKED_OUTPUT_IDS = (BOS, EPS)

INIT_SCALE = 0.1


class ModelParams:
    def __init__(self, vocab, variant, hidden, embed_dim):
        if variant not in VARIANTS:
            raise MorphogenError(f"unknown model variant {variant!r}")
        self.vocab = vocab
        self.variant = variant
        self.hidden = hidden
        self.embed_dim = embed_dim
        self.embed = None       # Parameter [V x d]
        self.enc_fwd = None     # LSTMParams
        self.enc_bwd = None
        self.trans_W = None     # Parameter [n x 2n]
        self.trans_b = None
        self.attn_W_enc = None  # Parameter [n x 2n]
        self.attn_W_dec = None  # Parameter [n x n]
        self.attn_v = None
        self.dec = None         # LSTMParams
        self.out_W = None       # Parameter [V x n]
        self.out_b = None
        self.lm_lambda = None   # set by interpolated training

    @property
    def has_encoder(self):
        return self.variant != "no-encoder"

    def decoder_input_size(self):
        n, d = self.hidden, self.embed_dim
        return {"full": n + 2 * d,
                "plain-encdec": d,
                "attention": 2 * n + d,
                "no-encoder": 2 * d}[self.variant]

    def parameters(self):
        out = [self.embed]
        if self.has_encoder:
            out += self.enc_fwd.parameters() + self.enc_bwd.parameters()
        if self.variant in ("full", "plain-encdec"):
            out += [self.trans_W, self.trans_b]
        if self.variant == "attention":
            out += [self.attn_W_enc, self.attn_W_dec, self.attn_v]
        out += self.dec.parameters() + [self.out_W, self.out_b]
        return out

    def copy(self):
        m = ModelParams(self.vocab, self.variant, self.hidden, self.embed_dim)
        _build_empty_tensors(m)
        _assign_tensors(m, {p.name: p.value.copy() for p in self.parameters()})
        m.lm_lambda = self.lm_lambda
        return m

    def set_values(self, other):
        """Copy tensor values from another model with identical structure."""
        theirs = {p.name: p for p in other.parameters()}
        for p in self.parameters():
            p.value[...] = theirs[p.name].value
        self.lm_lambda = other.lm_lambda


def init_model(vocab, variant="full", hidden=100, embed_dim=None, seed=0,
               shared_encoder=None):
    """Seeded uniform [-0.1, 0.1] init; forget-gate biases start at 1.

    shared_encoder, if given, must be (embed, enc_fwd, enc_bwd) from another
    model; the new model aliases those Parameter objects (joint training).
    """
    d = embed_dim if embed_dim is not None else len(vocab)
    n = hidden
    m = ModelParams(vocab, variant, n, d)
    rng = np.random.default_rng(seed)
    m.embed = ad.Parameter("embed", rng.uniform(-INIT_SCALE, INIT_SCALE, (len(vocab), d)))
    if m.has_encoder:
        m.enc_fwd = lstm.init_lstm(rng, "enc_fwd", d, n)
        m.enc_bwd = lstm.init_lstm(rng, "enc_bwd", d, n)
    if variant in ("full", "plain-encdec"):
        m.trans_W = ad.Parameter("trans.W", rng.uniform(-INIT_SCALE, INIT_SCALE, (n, 2 * n)))
        m.trans_b = ad.Parameter("trans.b", np.zeros(n))
    if variant == "attention":
        m.attn_W_enc = ad.Parameter("attn.W_enc", rng.uniform(-INIT_SCALE, INIT_SCALE, (n, 2 * n)))
        m.attn_W_dec = ad.Parameter("attn.W_dec", rng.uniform(-INIT_SCALE, INIT_SCALE, (n, n)))
        m.attn_v = ad.Parameter("attn.v", rng.uniform(-INIT_SCALE, INIT_SCALE, n))
    m.dec = lstm.init_lstm(rng, "dec", m.decoder_input_size(), n)
    m.out_W = ad.Parameter("softmax.W", rng.uniform(-INIT_SCALE, INIT_SCALE, (len(vocab), n)))
    m.out_b = ad.Parameter("softmax.b", np.zeros(len(vocab)))
    if shared_encoder is not None:
        m.embed, m.enc_fwd, m.enc_bwd = shared_encoder
    return m


def embed(tape, params, char_id):
    return ad.row(tape, params.embed, char_id)


def transform_encoding(tape, params, e_raw):
    """e = W_trans @ e_raw + b_trans, mapping 2n down to n."""
    return ad.affine(tape, params.trans_W, e_raw, params.trans_b)


def attention_context(tape, params, hidden_seq, s_prev):
    """Additive attention over encoder states: softmax(v . tanh(W1 h + W2 s))."""
    if params.variant != "attention":
        raise MorphogenError(f"attention_context on variant {params.variant!r}")
    key = ad.matvec(tape, params.attn_W_dec, s_prev)
    scores = [ad.dot(tape, params.attn_v,
                     ad.tanh(tape, ad.add(tape, ad.matvec(tape, params.attn_W_enc, h), key)))
              for h in hidden_seq]
    weights = ad.softmax_op(tape, ad.concat(tape, scores))
    return ad.weighted_sum(tape, weights, hidden_seq)


def _encode(tape, params, x_ids):
    xs = [embed(tape, params, i) for i in x_ids]
    return lstm.encode_bidirectional(tape, params.enc_fwd, params.enc_bwd, xs)


def decoder_step_count(x_len, y_len):
    """Teacher-forced steps: all of x is consumed even past the last target."""
    return max(x_len, y_len + 1)


def _source_id(x_ids, t):
    return x_ids[t] if t < len(x_ids) else EPS


def _step_input(tape, params, e, hidden_seq, state, y_prev_id, x_t_id):
    y_emb = embed(tape, params, y_prev_id)
    variant = params.variant
    if variant == "full":
        return ad.concat(tape, [e, y_emb, embed(tape, params, x_t_id)])
    if variant == "plain-encdec":
        return y_emb
    if variant == "attention":
        context = attention_context(tape, params, hidden_seq, state.h)
        return ad.concat(tape, [context, y_emb])
    return ad.concat(tape, [y_emb, embed(tape, params, x_t_id)])


def _initial_state(tape, params, e):
    if params.variant == "plain-encdec":
        return lstm.LSTMState(h=e, c=ad.constant(np.zeros(params.hidden)))
    return lstm.zero_state(params.hidden)


def _logits(tape, params, state):
    return ad.affine(tape, params.out_W, state.h, params.out_b)


def forward_variant(tape, params, x_ids, y_ids, lm_logprobs=None, lam=None):
    """Teacher-forced NLL of y_ids + EOS given x_ids under the model's wiring.

    lm_logprobs/lam switch each step to the interpolated loss: the step
    distribution becomes p_model * p_lm**lam renormalized, with lam a scalar
    Node that also receives gradient.
    """
    if not x_ids:
        raise DataError("forward_variant: empty input sequence")
    consumes_source = params.variant in ("full", "no-encoder")
    e = hidden_seq = None
    if params.has_encoder:
        e_raw, hidden_seq = _encode(tape, params, x_ids)
        if params.variant != "attention":
            e = transform_encoding(tape, params, e_raw)
    targets = list(y_ids) + [EOS]
    n_steps = decoder_step_count(len(x_ids), len(y_ids)) if consumes_source else len(targets)
    state = _initial_state(tape, params, e)
    step_losses = []
    for t in range(n_steps):
        y_prev = BOS if t == 0 else targets[min(t - 1, len(targets) - 1)]
        x_in = _source_id(x_ids, t) if consumes_source else None
        inp = _step_input(tape, params, e, hidden_seq, state, y_prev, x_in)
        state = lstm.lstm_step(tape, params.dec, inp, state)
        if t < len(targets):
            logits = _logits(tape, params, state)
            if lm_logprobs is None:
                step_losses.append(ad.cross_entropy_logits(
                    tape, logits, targets[t], MASKED_OUTPUT_IDS))
            else:
                step_losses.append(ad.interpolated_cross_entropy(
                    tape, logits, targets[t], lm_logprobs[t], lam, MASKED_OUTPUT_IDS))
    total = step_losses[0]
    for piece in step_losses[1:]:
        total = ad.add(tape, total, piece)
    return total


def nll_loss(tape, params, x_ids, y_ids):
    """Eq-style supervised loss; identical to forward_variant on this model."""
    return forward_variant(tape, params, x_ids, y_ids)


def decoder_step(params, prev, e, y_prev_id, x_t_id):
    """One inference step of the source-consuming decoder.

    Returns the next state and the output distribution with BOS/EPS masked
    and the remainder renormalized.
    """
    if not 0 <= y_prev_id < len(params.vocab) or not 0 <= x_t_id < len(params.vocab):
        raise DimensionError(f"decoder_step: ids ({y_prev_id}, {x_t_id}) out of range")
    tape = None
    inp = _step_input(tape, params, e, None, prev, y_prev_id, x_t_id)
    state = lstm.lstm_step(tape, params.dec, inp, prev)
    dist = ad.masked_softmax(_logits(tape, params, state).value, MASKED_OUTPUT_IDS)
    return state, dist


class DecodeSession:
    """Per-input stepping interface used by greedy and beam search.

    Runs the encoder once; step(state, y_prev_id, t) advances the decoder one
    position and returns (state, masked distribution).
    """

    def __init__(self, params, x_ids):
        self.params = params
        self.x_ids = list(x_ids)
        tape = None
        self._e = self._hidden_seq = None
        if params.has_encoder:
            e_raw, self._hidden_seq = _encode(tape, params, self.x_ids)
            if params.variant != "attention":
                self._e = transform_encoding(tape, params, e_raw)

    def initial_state(self):
        return _initial_state(None, self.params, self._e)

    def step(self, state, y_prev_id, t):
        params = self.params
        x_in = _source_id(self.x_ids, t) if params.variant in ("full", "no-encoder") else None
        inp = _step_input(None, params, self._e, self._hidden_seq, state, y_prev_id, x_in)
        new_state = lstm.lstm_step(None, params.dec, inp, state)
        dist = ad.masked_softmax(_logits(None, params, new_state).value, MASKED_OUTPUT_IDS)
        return new_state, dist


# --- persistence -----------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_model(params, path):
    tensors = {p.name: {"shape": list(p.value.shape),
                        "data": [float(v) for v in p.value.reshape(-1)]}
               for p in params.parameters()}
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "variant": params.variant,
        "vocab": list(params.vocab.data_chars),
        "config": {"hidden": params.hidden, "embed_dim": params.embed_dim},
        "tensors": tensors,
    }
    if params.lm_lambda is not None:
        doc["config"]["lambda"] = float(params.lm_lambda)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, ensure_ascii=False, indent=1)
        f.write("\n")


def load_model(path):
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"checkpoint {path} is not valid JSON: {exc}") from exc
    version = doc.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint {path}: format_version {version!r}, expected {CHECKPOINT_VERSION}")
    try:
        vocab = CharVocab(doc["vocab"])
        config = doc["config"]
        m = ModelParams(vocab, doc["variant"], int(config["hidden"]), int(config["embed_dim"]))
        _build_empty_tensors(m)
        _assign_tensors(m, _parse_tensors(doc["tensors"], path))
        m.lm_lambda = config.get("lambda")
    except KeyError as exc:
        raise CheckpointError(f"checkpoint {path}: missing field {exc}") from exc
    return m


def _build_empty_tensors(m):
    filled = init_model(m.vocab, m.variant, m.hidden, m.embed_dim, seed=0)
    _adopt_structure(m, filled)


def _adopt_structure(m, src):
    m.embed = src.embed
    m.enc_fwd, m.enc_bwd = src.enc_fwd, src.enc_bwd
    m.trans_W, m.trans_b = src.trans_W, src.trans_b
    m.attn_W_enc, m.attn_W_dec, m.attn_v = src.attn_W_enc, src.attn_W_dec, src.attn_v
    m.dec = src.dec
    m.out_W, m.out_b = src.out_W, src.out_b


def _parse_tensors(raw, path):
    out = {}
    for name, spec in raw.items():
        shape = tuple(spec["shape"])
        data = spec["data"]
        if int(np.prod(shape)) != len(data):
            raise CheckpointError(
                f"checkpoint {path}: tensor {name!r} has {len(data)} values for shape {shape}")
        arr = np.array(data, dtype=np.float64).reshape(shape)
        if not np.all(np.isfinite(arr)):
            raise CheckpointError(f"checkpoint {path}: tensor {name!r} has non-finite values")
        out[name] = arr
    return out


def _assign_tensors(m, values):
    for p in m.parameters():
        if p.name not in values:
            raise CheckpointError(f"checkpoint is missing tensor {p.name!r}")
        arr = values[p.name]
        if arr.shape != p.value.shape:
            raise CheckpointError(
                f"checkpoint tensor {p.name!r}: shape {arr.shape}, expected {p.value.shape}")
        p.value[...] = arr


def models_equal(a, b):
    if (a.variant, a.hidden, a.embed_dim, a.vocab.data_chars) != \
            (b.variant, b.hidden, b.embed_dim, b.vocab.data_chars):
        return False
    bp = {p.name: p.value for p in b.parameters()}
    return all(np.array_equal(p.value, bp[p.name]) for p in a.parameters())


def check_model_gradients(params, x_ids, y_ids, h=1e-4):
    """Finite-difference verification of the full training gradient."""
    def loss_fn(tape):
        return forward_variant(tape, params, x_ids, y_ids)
    return ad.gradient_check(loss_fn, params.parameters(), h=h)
