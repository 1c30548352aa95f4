"""Character-level transformer encoder with three classification heads.

Pipeline per position: char embedding + learned position embedding ->
LayerNorm -> ``n_layers`` post-norm self-attention encoder layers (with
key-padding masking) -> a two-linear neck (linear, GELU, dropout, linear)
-> three parallel linear heads giving S/D/N logits.

Parameters are stored as named float32 arrays (the checkpoint container's
dtype); all computation upcasts to float64.  ``init`` is deterministic in
(config, seed), and prediction applies an applicability mask before the
per-position argmax, so predicted labels always compose cleanly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import nn
from .hebrew import LABELS, MarkedChar, MarkedText, decompose

PAD_ID = 0
UNK_ID = 1

_FFN_MULT = 4  # encoder feed-forward width, in units of d_model


class ModelError(Exception):
    pass


class InvalidConfig(ModelError):
    pass


class ShapeMismatch(ModelError):
    pass


class IdOutOfRange(ModelError):
    pass


class EmptyBatch(ModelError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters plus the character inventory.

    ``alphabet`` holds every real character the model knows, in a fixed
    order; ids 0 and 1 are reserved for padding and unknown characters.
    """

    alphabet: str
    d_model: int = 768
    n_layers: int = 6
    n_heads: int = 12
    attn_dropout: float = 0.1
    neck_hidden: int = 2048
    neck_dropout: float = 0.3
    max_len: int = 512

    def __post_init__(self):
        if not self.alphabet:
            raise InvalidConfig("alphabet is empty")
        if len(set(self.alphabet)) != len(self.alphabet):
            raise InvalidConfig("alphabet contains duplicate characters")
        for field in ("d_model", "n_layers", "n_heads", "neck_hidden", "max_len"):
            if getattr(self, field) <= 0:
                raise InvalidConfig(f"{field} must be positive")
        for field in ("attn_dropout", "neck_dropout"):
            if not 0.0 <= getattr(self, field) < 1.0:
                raise InvalidConfig(f"{field} must be in [0, 1)")
        if self.d_model % self.n_heads:
            raise InvalidConfig(
                f"d_model={self.d_model} not divisible by n_heads={self.n_heads}")

    @property
    def vocab(self) -> int:
        return len(self.alphabet) + 2

    def char_ids(self, text: str) -> np.ndarray:
        table = _char_table(self.alphabet)
        return np.array([table.get(ch, UNK_ID) for ch in text], dtype=np.int64)

    def as_dict(self) -> dict:
        return {
            "alphabet": self.alphabet,
            "d_model": self.d_model,
            "n_layers": self.n_layers,
            "n_heads": self.n_heads,
            "attn_dropout": self.attn_dropout,
            "neck_hidden": self.neck_hidden,
            "neck_dropout": self.neck_dropout,
            "max_len": self.max_len,
        }


_CHAR_TABLES: dict[str, dict[str, int]] = {}


def _char_table(alphabet: str) -> dict[str, int]:
    table = _CHAR_TABLES.get(alphabet)
    if table is None:
        table = {ch: i + 2 for i, ch in enumerate(alphabet)}
        _CHAR_TABLES[alphabet] = table
    return table


def alphabet_from_chunks(chunks) -> str:
    """Sorted inventory of every character seen in the given chunks."""
    seen = set()
    for chunk in chunks:
        seen.update(chunk.bases)
    return "".join(sorted(seen))


@dataclass(frozen=True)
class Batch:
    """Padded id grids plus label/applicability grids, shape (3, B, T)."""

    char_ids: np.ndarray     # (B, T) int64
    pad_mask: np.ndarray     # (B, T) bool, True at real positions
    labels: np.ndarray       # (3, B, T) int64, 0 where inapplicable/padded
    applicable: np.ndarray   # (3, B, T) bool

    def __post_init__(self):
        b, t = self.char_ids.shape
        if self.pad_mask.shape != (b, t) or self.labels.shape != (3, b, t) \
                or self.applicable.shape != (3, b, t):
            raise ShapeMismatch("batch grids disagree on shape")
        if ((self.labels != 0) & ~(self.applicable & self.pad_mask[None])).any():
            raise ShapeMismatch("nonzero label at inapplicable or padded position")


def make_batch(chunks, config: ModelConfig) -> Batch:
    """Pad a list of chunks to a common length and stack the grids."""
    if not chunks:
        raise EmptyBatch("no chunks to batch")
    b = len(chunks)
    t = max(len(c.bases) for c in chunks)
    char_ids = np.full((b, t), PAD_ID, dtype=np.int64)
    pad_mask = np.zeros((b, t), dtype=bool)
    labels = np.zeros((3, b, t), dtype=np.int64)
    applicable = np.zeros((3, b, t), dtype=bool)
    for i, chunk in enumerate(chunks):
        n = len(chunk.bases)
        char_ids[i, :n] = config.char_ids(chunk.bases)
        pad_mask[i, :n] = True
        labels[:, i, :n] = chunk.labels
        applicable[:, i, :n] = chunk.applicable
    return Batch(char_ids, pad_mask, labels, applicable)


@dataclass(frozen=True)
class HeadLogits:
    s: np.ndarray  # (B, T, 3)
    d: np.ndarray  # (B, T, 2)
    n: np.ndarray  # (B, T, 12)

    def category(self, c: int) -> np.ndarray:
        return (self.s, self.d, self.n)[c]


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Name -> shape for every parameter tensor, in canonical order."""
    d = config.d_model
    f = _FFN_MULT * d
    k_s, k_d, k_n = LABELS.sizes
    shapes: dict[str, tuple[int, ...]] = {
        "embed.char": (config.vocab, d),
        "embed.pos": (config.max_len, d),
        "embed.norm.g": (d,),
        "embed.norm.b": (d,),
    }
    for i in range(config.n_layers):
        p = f"enc{i}."
        for name in ("wq", "wk", "wv", "wo"):
            shapes[p + "attn." + name] = (d, d)
            shapes[p + "attn." + name.replace("w", "b")] = (d,)
        shapes[p + "attn.norm.g"] = (d,)
        shapes[p + "attn.norm.b"] = (d,)
        shapes[p + "ffn.w1"] = (d, f)
        shapes[p + "ffn.b1"] = (f,)
        shapes[p + "ffn.w2"] = (f, d)
        shapes[p + "ffn.b2"] = (d,)
        shapes[p + "ffn.norm.g"] = (d,)
        shapes[p + "ffn.norm.b"] = (d,)
    shapes["neck.w1"] = (d, config.neck_hidden)
    shapes["neck.b1"] = (config.neck_hidden,)
    shapes["neck.w2"] = (config.neck_hidden, d)
    shapes["neck.b2"] = (d,)
    for cat, k in zip("sdn", (k_s, k_d, k_n)):
        shapes[f"head.{cat}.w"] = (d, k)
        shapes[f"head.{cat}.b"] = (k,)
    return shapes


class Model:
    """A configured parameter set; immutable in eval, mutated by training."""

    def __init__(self, config: ModelConfig, params: dict[str, np.ndarray]):
        self.config = config
        self.params = params

    @classmethod
    def init(cls, config: ModelConfig, seed: int) -> "Model":
        """Fresh parameters: truncated normal (sigma 0.02, cut at 2 sigma)
        for weight matrices and embeddings, ones/zeros for norms and biases.
        Deterministic in (config, seed)."""
        rng = np.random.default_rng(seed)
        params: dict[str, np.ndarray] = {}
        for name, shape in param_shapes(config).items():
            if name.endswith("norm.g"):
                arr = np.ones(shape)
            elif name.endswith(".b") or len(shape) == 1:
                arr = np.zeros(shape)
            else:
                arr = stats.truncnorm.rvs(-2.0, 2.0, scale=0.02, size=shape,
                                          random_state=rng)
            params[name] = arr.astype(np.float32)
        return cls(config, params)

    def astype(self, dtype) -> "Model":
        return Model(self.config,
                     {k: v.astype(dtype) for k, v in self.params.items()})

    def copy(self) -> "Model":
        return Model(self.config, {k: v.copy() for k, v in self.params.items()})

    # -- forward ---------------------------------------------------------

    def _check_batch(self, batch: Batch):
        if batch.char_ids.shape[1] > self.config.max_len:
            raise ShapeMismatch(
                f"batch length {batch.char_ids.shape[1]} exceeds "
                f"max_len {self.config.max_len}")
        if batch.char_ids.min(initial=0) < 0 or \
                batch.char_ids.max(initial=0) >= self.config.vocab:
            raise IdOutOfRange("char id outside [0, vocab)")

    def _run(self, batch: Batch, rng=None):
        """Full forward pass; ``rng`` enables dropout (training mode)."""
        self._check_batch(batch)
        cfg = self.config
        p = {k: np.asarray(v, dtype=np.float64) for k, v in self.params.items()}
        ids, pad = batch.char_ids, batch.pad_mask
        t = ids.shape[1]
        cache: dict = {"p": p, "ids": ids, "pad": pad}

        h = p["embed.char"][ids] + p["embed.pos"][:t]
        h, cache["embed.norm"] = nn.layernorm_fwd(
            h, p["embed.norm.g"], p["embed.norm.b"])

        cache["enc"] = []
        for i in range(cfg.n_layers):
            pre = f"enc{i}."
            a, c_attn = nn.attention_fwd(h, p, pre + "attn.", cfg.n_heads,
                                         pad, cfg.attn_dropout, rng)
            h1, c_n1 = nn.layernorm_fwd(h + a, p[pre + "attn.norm.g"],
                                        p[pre + "attn.norm.b"])
            f1, c_l1 = nn.linear_fwd(h1, p[pre + "ffn.w1"], p[pre + "ffn.b1"])
            g1, c_g = nn.gelu_fwd(f1)
            f2, c_l2 = nn.linear_fwd(g1, p[pre + "ffn.w2"], p[pre + "ffn.b2"])
            h2, c_n2 = nn.layernorm_fwd(h1 + f2, p[pre + "ffn.norm.g"],
                                        p[pre + "ffn.norm.b"])
            cache["enc"].append((c_attn, c_n1, c_l1, c_g, c_l2, c_n2))
            h = h2
        cache["states"] = h

        z1, c_neck1 = nn.linear_fwd(h, p["neck.w1"], p["neck.b1"])
        z2, c_ng = nn.gelu_fwd(z1)
        z3, c_drop = nn.dropout_fwd(z2, cfg.neck_dropout, rng)
        u, c_neck2 = nn.linear_fwd(z3, p["neck.w2"], p["neck.b2"])
        cache["neck"] = (c_neck1, c_ng, c_drop, c_neck2)

        heads = {}
        cache["head"] = {}
        for cat in "sdn":
            heads[cat], cache["head"][cat] = nn.linear_fwd(
                u, p[f"head.{cat}.w"], p[f"head.{cat}.b"])
        return HeadLogits(heads["s"], heads["d"], heads["n"]), cache

    def forward(self, batch: Batch) -> HeadLogits:
        """Evaluation-mode logits: dropout off, deterministic."""
        logits, _ = self._run(batch, rng=None)
        return logits

    def encoder_states(self, batch: Batch) -> np.ndarray:
        """Final encoder-layer states (B, T, d_model), evaluation mode."""
        _, cache = self._run(batch, rng=None)
        return cache["states"]

    # -- backward --------------------------------------------------------

    def _backward(self, cache, dheads: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        grads: dict[str, np.ndarray] = {}
        du = None
        for cat in "sdn":
            dx, grads[f"head.{cat}.w"], grads[f"head.{cat}.b"] = nn.linear_bwd(
                dheads[cat], cache["head"][cat])
            du = dx if du is None else du + dx

        c_neck1, c_ng, c_drop, c_neck2 = cache["neck"]
        dz3, grads["neck.w2"], grads["neck.b2"] = nn.linear_bwd(du, c_neck2)
        dz2 = nn.dropout_bwd(dz3, c_drop)
        dz1 = nn.gelu_bwd(dz2, c_ng)
        dh, grads["neck.w1"], grads["neck.b1"] = nn.linear_bwd(dz1, c_neck1)
        self._backward_from_states(cache, dh, grads)
        return grads

    def _backward_from_states(self, cache, dh, grads) -> dict[str, np.ndarray]:
        """Backprop from final encoder states down to the embeddings."""
        cfg = self.config
        for i in reversed(range(cfg.n_layers)):
            pre = f"enc{i}."
            c_attn, c_n1, c_l1, c_g, c_l2, c_n2 = cache["enc"][i]
            dsum2, grads[pre + "ffn.norm.g"], grads[pre + "ffn.norm.b"] = \
                nn.layernorm_bwd(dh, c_n2)
            dg1, grads[pre + "ffn.w2"], grads[pre + "ffn.b2"] = \
                nn.linear_bwd(dsum2, c_l2)
            df1 = nn.gelu_bwd(dg1, c_g)
            dh1, grads[pre + "ffn.w1"], grads[pre + "ffn.b1"] = \
                nn.linear_bwd(df1, c_l1)
            dh1 = dh1 + dsum2
            dsum1, grads[pre + "attn.norm.g"], grads[pre + "attn.norm.b"] = \
                nn.layernorm_bwd(dh1, c_n1)
            da = nn.attention_bwd(dsum1, c_attn, grads, pre + "attn.")
            dh = dsum1 + da

        demb, grads["embed.norm.g"], grads["embed.norm.b"] = \
            nn.layernorm_bwd(dh, cache["embed.norm"])
        p = cache["p"]
        dchar = np.zeros_like(p["embed.char"])
        np.add.at(dchar, cache["ids"], demb)
        grads["embed.char"] = dchar
        dpos = np.zeros_like(p["embed.pos"])
        dpos[:demb.shape[1]] = demb.sum(axis=0)
        grads["embed.pos"] = dpos
        return grads

    def loss_and_grads(self, batch: Batch, class_weights=None, rng=None):
        """Total loss, per-category losses, and parameter gradients."""
        logits, cache = self._run(batch, rng=rng)
        total, per_cat, dheads = loss_with_logit_grads(logits, batch, class_weights)
        grads = self._backward(cache, dheads)
        return total, per_cat, grads

    # -- prediction ------------------------------------------------------

    def predict(self, text: str, batch_size: int = 32) -> MarkedText:
        """Dot arbitrary text: marks are stripped, labels predicted, and
        every non-Hebrew byte and base character preserved in place."""
        bases = decompose(text).bases
        if not bases:
            return MarkedText(())
        windows = _windows(bases, self.config.max_len)
        table = _char_table(self.config.alphabet)
        chars: list[MarkedChar] = []
        for start in range(0, len(windows), batch_size):
            group = windows[start:start + batch_size]
            b, t = len(group), max(len(w) for w in group)
            ids = np.full((b, t), PAD_ID, dtype=np.int64)
            pad = np.zeros((b, t), dtype=bool)
            app = np.zeros((3, b, t), dtype=bool)
            for i, w in enumerate(group):
                ids[i, :len(w)] = self.config.char_ids(w)
                pad[i, :len(w)] = True
                for j, ch in enumerate(w):
                    if ch in table:
                        app[:, i, j] = LABELS.applicability(ch)
            batch = Batch(ids, pad, np.zeros((3, b, t), dtype=np.int64), app)
            logits = self.forward(batch)
            picks = masked_argmax(logits, app)
            for i, w in enumerate(group):
                for j, ch in enumerate(w):
                    chars.append(MarkedChar(ch, int(picks[0, i, j]),
                                            int(picks[1, i, j]),
                                            int(picks[2, i, j])))
        return MarkedText(tuple(chars))


def _windows(bases: str, max_len: int) -> list[str]:
    """Partition text into <=max_len pieces, preferring whitespace cuts.

    The pieces concatenate back to the input exactly; a whitespace-free run
    longer than max_len is hard-split rather than rejected."""
    windows = []
    start = 0
    n = len(bases)
    while n - start > max_len:
        cut = start + max_len
        for j in range(cut, start, -1):
            if bases[j - 1].isspace() or bases[j].isspace():
                cut = j
                break
        windows.append(bases[start:cut])
        start = cut
    windows.append(bases[start:])
    return windows


def masked_argmax(logits: HeadLogits, applicable: np.ndarray) -> np.ndarray:
    """Per-category argmax with non-none labels forced off where the
    category is inapplicable; returns an int grid of shape (3, B, T)."""
    out = []
    for c in range(3):
        z = logits.category(c).copy()
        z[..., 1:] = np.where(applicable[c][..., None], z[..., 1:], -np.inf)
        out.append(z.argmax(axis=-1))
    return np.stack(out)


def _category_ce(z, y, mask, weights):
    """Weighted softmax cross-entropy over masked positions.

    Returns (mean loss, dlogits, active count); an empty mask yields
    (0.0, zeros, 0) so the category simply contributes nothing."""
    count = int(mask.sum())
    if count == 0:
        return 0.0, np.zeros_like(z), 0
    zmax = z.max(axis=-1, keepdims=True)
    ez = np.exp(z - zmax)
    sez = ez.sum(axis=-1, keepdims=True)
    logp = z - zmax - np.log(sez)
    nll = -np.take_along_axis(logp, y[..., None], axis=-1)[..., 0]
    if weights is not None:
        wy = np.asarray(weights, dtype=np.float64)[y]
    else:
        wy = np.ones_like(nll)
    wmask = wy * mask
    wsum = wmask.sum()
    loss = float((nll * wmask).sum() / wsum)
    onehot = np.zeros_like(z)
    np.put_along_axis(onehot, y[..., None], 1.0, axis=-1)
    dz = (ez / sez - onehot) * (wmask / wsum)[..., None]
    return loss, dz, count


def loss_with_logit_grads(logits: HeadLogits, batch: Batch, class_weights=None):
    """Three-category masked cross-entropy plus gradients w.r.t. logits.

    Each category is averaged over positions that are applicable and
    unpadded (weighted by class weight when given); the total is the sum
    of the three category means.  Raises EmptyBatch when no category has
    any applicable position."""
    per_cat = []
    dheads = {}
    active = 0
    for c, cat in enumerate("sdn"):
        z = np.asarray(logits.category(c), dtype=np.float64)
        if z.shape[:2] != batch.char_ids.shape or z.shape[-1] != LABELS.sizes[c]:
            raise ShapeMismatch(f"logit grid {c} has shape {z.shape}")
        mask = batch.applicable[c] & batch.pad_mask
        w = None if class_weights is None else class_weights[c]
        loss_c, dz, count = _category_ce(z, batch.labels[c], mask, w)
        per_cat.append(loss_c)
        dheads[cat] = dz
        active += count
    if active == 0:
        raise EmptyBatch("no applicable positions in any category")
    return float(sum(per_cat)), tuple(per_cat), dheads


def loss(logits: HeadLogits, batch: Batch, class_weights=None):
    """Total and per-category cross-entropy (see loss_with_logit_grads)."""
    total, per_cat, _ = loss_with_logit_grads(logits, batch, class_weights)
    return total, per_cat
