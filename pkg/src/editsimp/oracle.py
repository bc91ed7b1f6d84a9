"""Expert edit-program construction from complex-simple sentence pairs.

A program is the unique shortest insert/delete edit script (no substitutions)
that rewrites the complex token sequence into the simple one, canonicalized so
that wherever the shortest-path table ties, insertion wins over deletion, and a
matching token is always kept. A terminal STOP closes every program.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .corpus import Sentence
from .kernels import edit_dp_table

K_KEEP = "KEEP"
K_DEL = "DEL"
K_ADD = "ADD"
K_STOP = "STOP"
KINDS = (K_KEEP, K_DEL, K_ADD, K_STOP)


@dataclass(frozen=True)
class EditLabel:
    kind: str
    word: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown edit label kind: {self.kind!r}")
        if (self.kind == K_ADD) != (self.word is not None):
            raise ValueError("ADD labels carry a word; KEEP/DEL/STOP do not")

    def render(self) -> str:
        return f"ADD|{self.word}" if self.kind == K_ADD else self.kind

    def __repr__(self):
        return self.render()


KEEP = EditLabel(K_KEEP)
DELETE = EditLabel(K_DEL)
STOP = EditLabel(K_STOP)


def add(word: str) -> EditLabel:
    return EditLabel(K_ADD, word)


class ProgramFormatError(ValueError):
    pass


@dataclass(frozen=True)
class EditProgram:
    """An ordered sequence of edit labels.

    Arbitrary sequences are representable (parsed files, model output before
    checking); structural guarantees are asserted by the executor's
    ``validate`` rather than here.
    """

    labels: tuple[EditLabel, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))

    def __iter__(self):
        return iter(self.labels)

    def __len__(self):
        return len(self.labels)

    def counts(self) -> Counter:
        c = Counter({k: 0 for k in KINDS})
        c.update(lab.kind for lab in self.labels)
        return c

    def render(self) -> str:
        return " ".join(lab.render() for lab in self.labels)

    @classmethod
    def parse(cls, text: str, line: int | None = None) -> "EditProgram":
        labels = []
        for field in text.split():
            if field in (K_KEEP, K_DEL, K_STOP):
                labels.append(EditLabel(field))
            elif field.startswith("ADD|") and len(field) > 4:
                labels.append(EditLabel(K_ADD, field[4:]))
            else:
                where = f" (line {line})" if line is not None else ""
                raise ProgramFormatError(f"bad edit label {field!r}{where}")
        return cls(tuple(labels))


def _tokens(x) -> tuple[str, ...]:
    return x.tokens if isinstance(x, Sentence) else tuple(x)


def construct_program(x, y, tie_break: str = "add_first", rng=None) -> EditProgram:
    """Build the canonical expert program rewriting ``x`` into ``y``.

    The shortest-path table has unit insert/delete costs and no substitution
    move. The walk keeps a token whenever the current source and target tokens
    match (a match is always on a shortest path) and otherwise prefers ADD
    over DELETE at cost ties. ``tie_break`` exists only for ablation
    ("del_first", "random"); the supported path is the default.
    """
    xs, ys = _tokens(x), _tokens(y)
    if not xs or not ys:
        raise ValueError("both sentences must be non-empty")

    ids = {}
    xi = np.array([ids.setdefault(t, len(ids)) for t in xs], dtype=np.int64)
    yi = np.array([ids.setdefault(t, len(ids)) for t in ys], dtype=np.int64)
    dist = edit_dp_table(xi, yi)

    n, m = len(xs), len(ys)
    labels = []
    i = j = 0
    while i < n or j < m:
        if i < n and j < m and xs[i] == ys[j]:
            labels.append(KEEP)
            i += 1
            j += 1
            continue
        can_add = j < m and dist[i, j] == dist[i, j + 1] + 1
        can_del = i < n and dist[i, j] == dist[i + 1, j] + 1
        if can_add and can_del:
            if tie_break == "add_first":
                can_del = False
            elif tie_break == "del_first":
                can_add = False
            elif tie_break == "random":
                if (rng or np.random.default_rng()).random() < 0.5:
                    can_del = False
                else:
                    can_add = False
            else:
                raise ValueError(f"unknown tie_break: {tie_break!r}")
        if can_add:
            labels.append(add(ys[j]))
            j += 1
        else:
            labels.append(DELETE)
            i += 1
    labels.append(STOP)
    return EditProgram(tuple(labels))


@dataclass
class LabelStats:
    """Per-kind label counts and the inverse-frequency loss weights."""

    counts: dict[str, int]
    weights: dict[str, float]

    def format_table(self) -> str:
        header = " | ".join(f"{k:>7}" for k in KINDS)
        counts = " | ".join(f"{self.counts[k]:>7}" for k in KINDS)
        weights = " | ".join(f"{self.weights[k]:>7.4f}" for k in KINDS)
        return "\n".join(
            [header, counts, f"weights (mean 1): {weights}"]
        )


def label_statistics(programs) -> LabelStats:
    """Count labels per kind and derive mean-normalized inverse-frequency weights.

    Kinds that never occur get the largest weight observed among occurring
    kinds (there is nothing to balance, but the loss needs a finite weight).
    """
    programs = list(programs)
    if not programs:
        raise ValueError("no programs given")
    counts = Counter({k: 0 for k in KINDS})
    for prog in programs:
        counts.update(lab.kind for lab in prog)
    raw = {k: (1.0 / c if c > 0 else 0.0) for k, c in counts.items()}
    top = max(raw.values())
    if top == 0.0:
        raise ValueError("programs contain no labels")
    for k in KINDS:
        if counts[k] == 0:
            raw[k] = top
    mean = sum(raw.values()) / len(KINDS)
    weights = {k: v / mean for k, v in raw.items()}
    return LabelStats(dict(counts), weights)


def weights_with_ratio(stats: LabelStats, ratio: tuple[float, float, float]) -> dict[str, float]:
    """Scale the ADD/KEEP/DELETE weights by a ratio triple (STOP untouched)."""
    a, k, d = ratio
    w = dict(stats.weights)
    w[K_ADD] *= a
    w[K_KEEP] *= k
    w[K_DEL] *= d
    return w


def save_programs(programs, path):
    with open(path, "w", encoding="utf-8") as f:
        for prog in programs:
            f.write(prog.render() + "\n")


def load_programs(path) -> list[EditProgram]:
    progs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if line.strip():
                progs.append(EditProgram.parse(line, line=lineno))
    return progs
