"""The trainable programmer-interpreter.

Encoder: bidirectional LSTM over [word embedding; POS embedding] per source
token. Edit decoder: LSTM whose step-t input concatenates the encoder state
under the edit pointer, a bilinear soft-attention context, the embedding of
the previous edit label, and the interpreter state over the produced prefix.
Output head: softmax(out_W @ tanh(proj_W @ h_edit)) over V+3 candidates
(one ADD slot per vocabulary word, then KEEP, DELETE, STOP).

Training is teacher-forced: the pointer trajectory and the produced prefix
come from the gold program, so all recurrences run as fused sequence kernels.
Inference is greedy and incremental, with masks that make termination a
structural guarantee.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import program as executor
from ..corpus import POS_VOCAB_SIZE, Sentence, Vocabulary, encode, encode_pos
from ..oracle import DELETE, EditLabel, EditProgram, KEEP, STOP, K_ADD, K_DEL, K_KEEP, K_STOP, add as add_label
from . import autodiff as ad
from .autodiff import Tensor
from .. import kernels


class ProgramMismatchError(ValueError):
    """The supplied program does not rewrite the pair's complex side into its simple side."""


class CheckpointError(Exception):
    pass


class CorruptCheckpoint(CheckpointError):
    pass


class ManifestMismatch(CheckpointError):
    pass


@dataclass
class ModelConfig:
    vocab_size: int
    d_word: int = 100
    d_pos: int = 30
    hidden: int = 200
    d_bottleneck: int = 200
    bidirectional: bool = True
    prev_edit_input: str = "label"  # "hidden" feeds h_edit_{t-1} back in instead
    dtype: str = "float32"

    def __post_init__(self):
        if self.bidirectional and self.hidden % 2:
            raise ValueError("bidirectional encoder needs an even hidden size")
        if self.prev_edit_input not in ("label", "hidden"):
            raise ValueError("prev_edit_input must be 'label' or 'hidden'")

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    @property
    def prev_slot_width(self) -> int:
        return self.d_word if self.prev_edit_input == "label" else self.hidden

    @property
    def edit_input_width(self) -> int:
        return 3 * self.hidden + self.prev_slot_width


@dataclass
class DecodeConfig:
    add_budget: int | None = None  # None: 2*|x| + 10
    pad_on_early_stop: bool = True

    def budget_for(self, n: int) -> int:
        return 2 * n + 10 if self.add_budget is None else self.add_budget


def _uniform(rng, shape, scale, dtype):
    return rng.uniform(-scale, scale, size=shape).astype(dtype)


def _glorot(rng, shape, dtype, fan_out=None):
    fan_in = shape[0]
    fan_out = shape[1] if fan_out is None else fan_out
    s = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=shape).astype(dtype)


def _lstm_bias(hidden, dtype):
    b = np.zeros(4 * hidden, dtype=dtype)
    b[hidden : 2 * hidden] = 1.0  # forget gate
    return b


class ModelParams:
    """Named parameter tensors in a fixed manifest order."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        self.config = config
        dt = config.np_dtype
        V, H = config.vocab_size, config.hidden
        d_in = config.d_word + config.d_pos
        self._tensors: dict[str, Tensor] = {}

        def param(name, data):
            t = Tensor(data, requires_grad=True, name=name)
            self._tensors[name] = t
            return t

        param("word_embed", _uniform(rng, (V, config.d_word), 0.1, dt))
        param("pos_embed", _uniform(rng, (POS_VOCAB_SIZE, config.d_pos), 0.1, dt))
        if config.prev_edit_input == "label":
            # dedicated KEEP/DELETE/STOP input embeddings; unused by the
            # ablation wiring that feeds the previous hidden state instead
            param("edit_embed", _uniform(rng, (3, config.d_word), 0.1, dt))
        param("sos_embed", _uniform(rng, (1, config.d_word), 0.1, dt))
        if config.bidirectional:
            h_dir = H // 2
            param("enc_fw_W", _glorot(rng, (d_in + h_dir, 4 * h_dir), dt, fan_out=h_dir))
            param("enc_fw_b", _lstm_bias(h_dir, dt))
            param("enc_bw_W", _glorot(rng, (d_in + h_dir, 4 * h_dir), dt, fan_out=h_dir))
            param("enc_bw_b", _lstm_bias(h_dir, dt))
        else:
            param("enc_fw_W", _glorot(rng, (d_in + H, 4 * H), dt, fan_out=H))
            param("enc_fw_b", _lstm_bias(H, dt))
        param("attn_W", _glorot(rng, (H, H), dt))
        param("edit_W", _glorot(rng, (config.edit_input_width + H, 4 * H), dt, fan_out=H))
        param("edit_b", _lstm_bias(H, dt))
        param("int_W", _glorot(rng, (config.d_word + H, 4 * H), dt, fan_out=H))
        param("int_b", _lstm_bias(H, dt))
        param("proj_W", _glorot(rng, (H, config.d_bottleneck), dt))
        param("proj_b", np.zeros(config.d_bottleneck, dtype=dt))
        param("out_W", _glorot(rng, (config.d_bottleneck, V + 3), dt))
        param("out_b", np.zeros(V + 3, dtype=dt))
        self.num_params = sum(t.data.size for t in self._tensors.values())

    def __getitem__(self, name) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name):
        return name in self._tensors

    def items(self):
        return self._tensors.items()

    def names(self):
        return list(self._tensors)

    def zero_grad(self):
        for t in self._tensors.values():
            t.grad = None

    def __repr__(self):
        return f"<ModelParams {self.num_params} parameters, {len(self._tensors)} tensors>"


def load_pretrained_embeddings(params: ModelParams, vocab: Vocabulary, path) -> int:
    """Optional hook: overwrite word-embedding rows from a text file of
    ``token v1 v2 ...`` lines. Returns the number of rows replaced."""
    E = params["word_embed"].data
    hits = 0
    with open(path, encoding="utf-8") as f:
        for line in f:
            parts = line.rstrip("\n").split(" ")
            if len(parts) != E.shape[1] + 1 or parts[0] not in vocab:
                continue
            E[vocab.id_of(parts[0])] = np.asarray(parts[1:], dtype=E.dtype)
            hits += 1
    return hits


@dataclass
class LossBreakdown:
    loss: Tensor
    per_step_nll: np.ndarray  # unweighted -log P(gold label) per step
    step_weights: np.ndarray
    targets: np.ndarray
    kinds: list[str]
    k_traj: list[int]  # pointer before each step
    j_traj: list[int]  # produced-prefix length before each step
    predicted: np.ndarray  # argmax label index per step

    @property
    def accuracy(self) -> float:
        return float((self.predicted == self.targets).mean())


class SimplifierModel:
    """Programmer-interpreter over a fixed vocabulary."""

    def __init__(self, config: ModelConfig, vocab: Vocabulary, params: ModelParams | None = None,
                 rng: np.random.Generator | None = None):
        if config.vocab_size != vocab.size:
            raise ValueError(f"config vocab_size {config.vocab_size} != vocabulary size {vocab.size}")
        self.config = config
        self.vocab = vocab
        self.params = params or ModelParams(config, rng or np.random.default_rng(0))
        # label-kind rows in edit_embed
        self._kind_row = {K_KEEP: 0, K_DEL: 1, K_STOP: 2}

    # -- label index layout: 0..V-1 => ADD(word id), then KEEP, DELETE, STOP --

    @property
    def n_labels(self) -> int:
        return self.vocab.size + 3

    def label_index(self, label: EditLabel) -> int:
        V = self.vocab.size
        if label.kind == K_ADD:
            return self.vocab.id_of(label.word)
        return V + (K_KEEP, K_DEL, K_STOP).index(label.kind)

    def label_of_index(self, idx: int) -> EditLabel:
        V = self.vocab.size
        if idx < V:
            return add_label(self.vocab.token_of(idx))
        return (KEEP, DELETE, STOP)[idx - V]

    # ------------------------------------------------------------------
    # tape (training) paths
    # ------------------------------------------------------------------

    def encode(self, x_ids, g_ids, dropout_rate=0.0, rng=None) -> Tensor:
        """Encoder states, one row of width ``hidden`` per source token."""
        if len(x_ids) != len(g_ids) or len(x_ids) == 0:
            raise ValueError("need equal, non-empty token and tag id lists")
        p = self.params
        X = ad.concat([ad.rows(p["word_embed"], x_ids), ad.rows(p["pos_embed"], g_ids)], axis=1)
        if self.config.bidirectional:
            rev = np.arange(len(x_ids))[::-1].copy()
            Hf = ad.lstm_seq(X, p["enc_fw_W"], p["enc_fw_b"])
            Hb = ad.rows(ad.lstm_seq(ad.rows(X, rev), p["enc_bw_W"], p["enc_bw_b"]), rev)
            H = ad.concat([Hf, Hb], axis=1)
        else:
            H = ad.lstm_seq(X, p["enc_fw_W"], p["enc_fw_b"])
        if dropout_rate > 0.0:
            if rng is None:
                raise ValueError("dropout needs an rng")
            H = ad.dropout(H, dropout_rate, rng)
        return H

    def attention_context(self, H: Tensor, k_idx) -> tuple[Tensor, Tensor]:
        """Bilinear attention for a batch of pointer queries.

        ``k_idx`` holds one source position per decoding step; a pointer that
        has consumed the whole source queries with the last encoder state.
        """
        n = H.data.shape[0]
        k_idx = np.minimum(np.asarray(k_idx, dtype=np.int64), n - 1)
        Q = ad.rows(H, k_idx)
        scores = ad.matmul(ad.matmul(Q, self.params["attn_W"]), ad.transpose(H))
        alpha = ad.softmax_rows(scores)
        return ad.matmul(alpha, H), alpha

    def _gold_trajectories(self, labels):
        k_traj, j_traj = [], []
        k = j = 0
        for lab in labels:
            k_traj.append(k)
            j_traj.append(j)
            if lab.kind in (K_KEEP, K_DEL):
                k += 1
            if lab.kind in (K_KEEP, K_ADD):
                j += 1
        return k_traj, j_traj

    def teacher_forced_loss(self, pair, prog: EditProgram, weights=None,
                            dropout_rate=0.0, rng=None, check_round_trip=True) -> LossBreakdown:
        """Weighted negative log-likelihood of the gold program (Sum over steps).

        Pointers and the interpreter prefix are derived from the gold labels,
        never from model predictions.
        """
        xs = pair.complex.tokens
        if check_round_trip:
            produced = executor.execute(xs, prog, pad_on_early_stop=False)
            if tuple(produced) != tuple(pair.simple.tokens):
                raise ProgramMismatchError(
                    f"program produces {produced!r}, pair expects {list(pair.simple.tokens)!r}"
                )
        p = self.params
        V = self.vocab.size
        x_ids = np.asarray(encode(pair.complex, self.vocab), dtype=np.int64)
        g_ids = np.asarray(encode_pos(pair.complex), dtype=np.int64)
        labels = list(prog)
        T = len(labels)
        k_traj, j_traj = self._gold_trajectories(labels)

        H = self.encode(x_ids, g_ids, dropout_rate, rng)
        ctx, _ = self.attention_context(H, k_traj)
        h_slots = ad.rows(H, np.minimum(np.asarray(k_traj), len(xs) - 1))

        # interpreter over [start] + gold produced tokens
        y_ids = np.asarray(encode(pair.simple, self.vocab), dtype=np.int64)
        int_table = ad.concat([p["word_embed"], p["sos_embed"]], axis=0)
        int_in = ad.rows(int_table, np.concatenate([[V], y_ids]))
        int_states = ad.lstm_seq(int_in, p["int_W"], p["int_b"])
        int_sel = ad.rows(int_states, np.asarray(j_traj, dtype=np.int64))

        targets = np.array([self.label_index(lab) for lab in labels], dtype=np.int64)
        kinds = [lab.kind for lab in labels]
        if weights is None:
            step_w = np.ones(T, dtype=self.config.np_dtype)
        else:
            step_w = np.array([weights[k] for k in kinds], dtype=self.config.np_dtype)

        if self.config.prev_edit_input == "label":
            # previous-label embedding: ADD(w) rows come from the word table,
            # KEEP/DELETE/STOP from the edit table, step 0 from the start row
            prev_table = ad.concat([p["word_embed"], p["edit_embed"], p["sos_embed"]], axis=0)
            prev_ids = np.empty(T, dtype=np.int64)
            prev_ids[0] = V + 3
            for t in range(1, T):
                lab = labels[t - 1]
                prev_ids[t] = targets[t - 1] if lab.kind == K_ADD else V + self._kind_row[lab.kind]
            prev_emb = ad.rows(prev_table, prev_ids)
            X_edit = ad.concat([h_slots, ctx, prev_emb, int_sel], axis=1)
            H_edit = ad.lstm_seq(X_edit, p["edit_W"], p["edit_b"])
        else:
            H_edit = self._edit_stepwise_hidden_input(h_slots, ctx, int_sel, T)

        logits = ad.add(
            ad.matmul(ad.tanh(ad.add(ad.matmul(H_edit, p["proj_W"]), p["proj_b"])), p["out_W"]),
            p["out_b"],
        )
        loss, per_step = ad.weighted_nll(logits, targets, step_w)
        return LossBreakdown(
            loss=loss,
            per_step_nll=per_step,
            step_weights=step_w,
            targets=targets,
            kinds=kinds,
            k_traj=k_traj,
            j_traj=j_traj,
            predicted=logits.data.argmax(axis=1),
        )

    def _edit_stepwise_hidden_input(self, h_slots, ctx, int_sel, T):
        """Ablation wiring: the previous-input slot carries h_edit_{t-1} itself."""
        p = self.params
        H = self.config.hidden
        dt = self.config.np_dtype
        h_prev = Tensor(np.zeros((1, H), dtype=dt))
        c_prev = Tensor(np.zeros((1, H), dtype=dt))
        outs = []
        for t in range(T):
            parts = [
                ad.rows(h_slots, [t]),
                ad.rows(ctx, [t]),
                h_prev,
                ad.rows(int_sel, [t]),
            ]
            x_row = ad.concat(parts, axis=1)
            z = ad.add(ad.matmul(ad.concat([x_row, h_prev], axis=1), p["edit_W"]), p["edit_b"])
            i = ad.sigmoid(ad.slice_vec(z, 0, H))
            f = ad.sigmoid(ad.slice_vec(z, H, 2 * H))
            g = ad.tanh(ad.slice_vec(z, 2 * H, 3 * H))
            o = ad.sigmoid(ad.slice_vec(z, 3 * H, 4 * H))
            c_prev = ad.add(ad.mul(f, c_prev), ad.mul(i, g))
            h_prev = ad.mul(o, ad.tanh(c_prev))
            outs.append(h_prev)
        return ad.concat(outs, axis=0)

    # ------------------------------------------------------------------
    # forward-only (inference) paths: raw numpy on the same kernels
    # ------------------------------------------------------------------

    def _encode_np(self, x_ids, g_ids) -> np.ndarray:
        p = self.params
        X = np.concatenate(
            [p["word_embed"].data[x_ids], p["pos_embed"].data[g_ids]], axis=1
        )
        if self.config.bidirectional:
            h_dir = self.config.hidden // 2
            z = np.zeros(h_dir, dtype=X.dtype)
            Hf, _, _ = kernels.lstm_seq_forward(X, p["enc_fw_W"].data, p["enc_fw_b"].data, z, z)
            Hb, _, _ = kernels.lstm_seq_forward(X[::-1].copy(), p["enc_bw_W"].data, p["enc_bw_b"].data, z, z)
            return np.concatenate([Hf, Hb[::-1]], axis=1)
        z = np.zeros(self.config.hidden, dtype=X.dtype)
        Hf, _, _ = kernels.lstm_seq_forward(X, p["enc_fw_W"].data, p["enc_fw_b"].data, z, z)
        return Hf

    def _cell_np(self, x_row, h, c, W, b):
        Hh, Ch, _ = kernels.lstm_seq_forward(x_row[None, :], W, b, h, c)
        return Hh[0], Ch[0]

    def _attention_np(self, H, k):
        q = H[min(k, H.shape[0] - 1)]
        scores = (q @ self.params["attn_W"].data) @ H.T
        scores = scores - scores.max()
        e = np.exp(scores)
        alpha = e / e.sum()
        return alpha @ H, alpha

    def decode_step(self, H, k, prev_slot, edit_state, int_h):
        """One programmer step: probability over the V+3 labels plus the new
        edit-cell state. ``prev_slot`` is the previous-label embedding (or the
        previous hidden state under the ablation wiring)."""
        p = self.params
        h_slot = H[min(k, H.shape[0] - 1)]
        ctx, _ = self._attention_np(H, k)
        x_in = np.concatenate([h_slot, ctx, prev_slot, int_h])
        h, c = self._cell_np(x_in, edit_state[0], edit_state[1], p["edit_W"].data, p["edit_b"].data)
        logits = np.tanh(h @ p["proj_W"].data + p["proj_b"].data) @ p["out_W"].data + p["out_b"].data
        z = logits - logits.max()
        e = np.exp(z)
        return e / e.sum(), (h, c), logits

    def infer(self, sentence, decode: DecodeConfig | None = None) -> tuple[EditProgram, list[str]]:
        """Greedy constrained decoding; always returns a valid program."""
        decode = decode or DecodeConfig()
        sent = sentence if isinstance(sentence, Sentence) else Sentence(tuple(sentence))
        xs = sent.tokens
        x_ids = np.asarray(encode(sent, self.vocab), dtype=np.int64)
        g_ids = np.asarray(encode_pos(sent), dtype=np.int64)
        p = self.params
        V = self.vocab.size
        n = len(xs)
        dt = self.config.np_dtype
        H = self._encode_np(x_ids, g_ids)
        budget = decode.budget_for(n)

        zeros = np.zeros(self.config.hidden, dtype=dt)
        int_h, int_c = self._cell_np(
            p["sos_embed"].data[0], zeros, zeros, p["int_W"].data, p["int_b"].data
        )
        edit_state = (zeros.copy(), zeros.copy())
        if self.config.prev_edit_input == "label":
            prev_slot = p["sos_embed"].data[0]
        else:
            prev_slot = zeros.copy()

        state = executor.ExecState()
        labels: list[EditLabel] = []
        adds = 0
        for _ in range(n + budget + 1):
            probs, edit_state, logits = self.decode_step(H, state.k, prev_slot, edit_state, int_h)
            masked = logits.copy()
            if state.k >= n:
                masked[V] = -np.inf      # KEEP
                masked[V + 1] = -np.inf  # DELETE
            if adds >= budget:
                masked[:V] = -np.inf
            label = self.label_of_index(int(masked.argmax()))
            labels.append(label)
            prev_token_pos = state.k
            state = executor.step(state, xs, label)
            if label.kind == K_STOP:
                break
            emitted = None
            if label.kind == K_KEEP:
                emitted = xs[prev_token_pos]
            elif label.kind == K_ADD:
                emitted = label.word
                adds += 1
            if emitted is not None:
                int_h, int_c = self._cell_np(
                    p["word_embed"].data[self.vocab.id_of(emitted)],
                    int_h, int_c, p["int_W"].data, p["int_b"].data,
                )
            if self.config.prev_edit_input == "label":
                if label.kind == K_ADD:
                    prev_slot = p["word_embed"].data[self.vocab.id_of(label.word)]
                else:
                    prev_slot = p["edit_embed"].data[self._kind_row[label.kind]]
            else:
                prev_slot = edit_state[0]
        prog = EditProgram(tuple(labels))
        output = executor.execute(xs, prog, pad_on_early_stop=decode.pad_on_early_stop)
        return prog, output


# ---------------------------------------------------------------------------
# checkpoint format: magic, version, JSON manifest, raw little-endian tensors
# ---------------------------------------------------------------------------

_MAGIC = b"ESCP"
_VERSION = 1


def save_params(params: ModelParams, path):
    manifest = {
        "version": _VERSION,
        "dtype": params.config.dtype,
        "config": asdict(params.config),
        "tensors": [{"name": n, "shape": list(t.data.shape)} for n, t in params.items()],
    }
    blob = json.dumps(manifest).encode("utf-8")
    dt = "<f4" if params.config.dtype == "float32" else "<f8"
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<II", _VERSION, len(blob)))
        f.write(blob)
        for _, t in params.items():
            f.write(np.ascontiguousarray(t.data, dtype=dt).tobytes())


def load_params(path, expected_vocab_size: int | None = None) -> ModelParams:
    with open(path, "rb") as f:
        head = f.read(12)
        if len(head) != 12 or head[:4] != _MAGIC:
            raise CorruptCheckpoint(f"{path}: not a checkpoint file")
        version, mlen = struct.unpack("<II", head[4:])
        if version != _VERSION:
            raise ManifestMismatch(f"{path}: unsupported version {version}")
        blob = f.read(mlen)
        if len(blob) != mlen:
            raise CorruptCheckpoint(f"{path}: truncated manifest")
        try:
            manifest = json.loads(blob.decode("utf-8"))
        except ValueError as e:
            raise CorruptCheckpoint(f"{path}: bad manifest: {e}") from None
        config = ModelConfig(**manifest["config"])
        if expected_vocab_size is not None and config.vocab_size != expected_vocab_size:
            raise ManifestMismatch(
                f"{path}: checkpoint vocab size {config.vocab_size}, expected {expected_vocab_size}"
            )
        params = ModelParams(config, np.random.default_rng(0))
        names = params.names()
        listed = [t["name"] for t in manifest["tensors"]]
        if listed != names:
            raise ManifestMismatch(f"{path}: tensor list {listed} != expected {names}")
        dt = "<f4" if config.dtype == "float32" else "<f8"
        itemsize = 4 if config.dtype == "float32" else 8
        for entry in manifest["tensors"]:
            t = params[entry["name"]]
            if list(t.data.shape) != entry["shape"]:
                raise ManifestMismatch(
                    f"{path}: tensor {entry['name']} shape {entry['shape']} != {list(t.data.shape)}"
                )
            raw = f.read(t.data.size * itemsize)
            if len(raw) != t.data.size * itemsize:
                raise CorruptCheckpoint(f"{path}: truncated tensor {entry['name']}")
            t.data = np.frombuffer(raw, dtype=dt).reshape(t.data.shape).astype(config.np_dtype)
        if f.read(1):
            raise CorruptCheckpoint(f"{path}: trailing bytes")
    return params
