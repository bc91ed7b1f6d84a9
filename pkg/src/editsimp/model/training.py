"""Training loop: Adam with decoupled weight decay, global-norm clipping,
teacher forcing, per-epoch checkpoints and an append-only log."""

from __future__ import annotations

import logging
import shutil
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import program as executor
from ..oracle import EditProgram
from .network import ModelConfig, ModelParams, ProgramMismatchError, SimplifierModel, save_params

log = logging.getLogger("editsimp.train")


class NumericError(RuntimeError):
    """Loss went NaN/Inf; training aborted."""


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    weight_decay: float = 1e-6
    grad_clip: float = 1.0
    dropout: float = 0.3
    batch_size: int = 64
    epochs: int = 1
    seed: int = 0
    dev_fraction: float = 0.1
    label_weights: dict[str, float] | None = None
    shuffle: bool = True

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size >= 1 and epochs >= 0 required")
        if self.learning_rate < 0 or self.weight_decay < 0 or self.grad_clip <= 0:
            raise ValueError("negative hyperparameters")


class Adam:
    """Adam with decoupled weight decay: the decay multiplier applies to the
    raw parameters each step, independent of the learning rate."""

    def __init__(self, params: ModelParams, lr=1e-3, betas=(0.9, 0.999), eps=1e-8,
                 weight_decay=0.0):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {n: np.zeros_like(t.data) for n, t in params.items()}
        self.v = {n: np.zeros_like(t.data) for n, t in params.items()}

    def step(self):
        self.t += 1
        for name, tensor in self.params.items():
            if self.weight_decay:
                tensor.data *= 1.0 - self.weight_decay
            g = tensor.grad
            if g is None:
                continue
            m = self.m[name]
            v = self.v[name]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            mhat = m / (1.0 - self.b1 ** self.t)
            vhat = v / (1.0 - self.b2 ** self.t)
            tensor.data -= (self.lr * mhat / (np.sqrt(vhat) + self.eps)).astype(tensor.data.dtype)


def clip_global_norm(params: ModelParams, max_norm: float) -> float:
    total = 0.0
    for _, t in params.items():
        if t.grad is not None:
            total += float((t.grad.astype(np.float64) ** 2).sum())
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0:
        scale = max_norm / norm
        for _, t in params.items():
            if t.grad is not None:
                t.grad = t.grad * scale
    return norm


def validate_programs(pairs, programs) -> None:
    """Round-trip check: every program must rewrite its pair exactly."""
    if len(pairs) != len(programs):
        raise ProgramMismatchError(
            f"{len(pairs)} pairs but {len(programs)} programs"
        )
    for i, (pair, prog) in enumerate(zip(pairs, programs)):
        out = executor.execute(pair.complex.tokens, prog, pad_on_early_stop=False)
        if tuple(out) != tuple(pair.simple.tokens):
            raise ProgramMismatchError(f"pair {i}: program does not reproduce the simple side")


def edit_accuracy(model: SimplifierModel, pairs, programs) -> float:
    """Token-level teacher-forced accuracy of the argmax edit label."""
    hits = total = 0
    for pair, prog in zip(pairs, programs):
        bd = model.teacher_forced_loss(pair, prog, check_round_trip=False)
        hits += int((bd.predicted == bd.targets).sum())
        total += len(bd.targets)
    return hits / total if total else 0.0


@dataclass
class TrainResult:
    model: SimplifierModel
    log_rows: list[dict] = field(default_factory=list)
    checkpoints: list[Path] = field(default_factory=list)


def train(pairs, programs: list[EditProgram], vocab, model_config: ModelConfig,
          config: TrainConfig, out_dir=None, params: ModelParams | None = None,
          start_epoch: int = 0) -> TrainResult:
    """Teacher-forced training over (pair, program) examples.

    All randomness (init, shuffling, dropout) flows from one generator seeded
    with ``config.seed``; two runs with the same inputs and seed are bitwise
    identical. Raises NumericError on a non-finite loss.
    """
    pairs = list(pairs)
    programs = list(programs)
    if not pairs:
        raise ValueError("empty training set")
    validate_programs(pairs, programs)

    rng = np.random.default_rng(config.seed)
    model = SimplifierModel(model_config, vocab, params=params, rng=rng)
    log.info("model: %d parameters in %d tensors", model.params.num_params,
             len(model.params.names()))

    idx = np.arange(len(pairs))
    n_dev = int(round(config.dev_fraction * len(pairs)))
    if n_dev:
        perm = rng.permutation(len(pairs))
        dev_idx, train_idx = perm[:n_dev], perm[n_dev:]
    else:
        dev_idx, train_idx = np.array([], dtype=int), idx

    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    result = TrainResult(model=model)

    opt = Adam(model.params, lr=config.learning_rate,
               weight_decay=config.weight_decay)
    weights = config.label_weights

    for epoch in range(start_epoch + 1, start_epoch + config.epochs + 1):
        order = rng.permutation(train_idx) if config.shuffle else train_idx
        epoch_loss = 0.0
        for lo in range(0, len(order), config.batch_size):
            batch = order[lo : lo + config.batch_size]
            model.params.zero_grad()
            batch_loss = 0.0
            for i in batch:
                bd = model.teacher_forced_loss(
                    pairs[i], programs[i], weights=weights,
                    dropout_rate=config.dropout, rng=rng, check_round_trip=False,
                )
                bd.loss.backward()
                batch_loss += bd.loss.item()
            if not np.isfinite(batch_loss):
                raise NumericError(
                    f"non-finite loss {batch_loss} at epoch {epoch}, batch starting {lo}"
                )
            inv = 1.0 / len(batch)
            for _, t in model.params.items():
                if t.grad is not None:
                    t.grad = t.grad * inv
            clip_global_norm(model.params, config.grad_clip)
            opt.step()
            epoch_loss += batch_loss
        mean_loss = epoch_loss / max(1, len(order))
        dev_acc = (
            edit_accuracy(model, [pairs[i] for i in dev_idx], [programs[i] for i in dev_idx])
            if len(dev_idx)
            else edit_accuracy(model, [pairs[i] for i in order[: min(len(order), 256)]],
                               [programs[i] for i in order[: min(len(order), 256)]])
        )
        row = {
            "epoch": epoch,
            "loss": mean_loss,
            "dev_edit_accuracy": dev_acc,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
        }
        result.log_rows.append(row)
        log.info("epoch %d: loss %.4f dev_acc %.4f", epoch, mean_loss, dev_acc)
        if out_dir is not None:
            ckpt = out_dir / f"epoch_{epoch:03d}.ckpt"
            save_params(model.params, ckpt)
            shutil.copyfile(ckpt, out_dir / "latest.ckpt")
            result.checkpoints.append(ckpt)
            with open(out_dir / "train_log.tsv", "a", encoding="utf-8") as f:
                f.write(f"{epoch}\t{mean_loss:.6f}\t{dev_acc:.6f}\t{row['timestamp']}\n")
    return result
