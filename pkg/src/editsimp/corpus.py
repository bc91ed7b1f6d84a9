"""Corpus ingestion: parallel complex-simple sentence pairs, POS tags, vocabulary.

Corpora arrive pre-tokenized (tokens are space-separated, typically lowercase
with conventions like ``-lrb-``); the loader never re-tokenizes or case-folds.
POS tags are read from the corpus file, never computed here.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path

# Penn Treebank tag set: 36 word-level tags plus 9 punctuation/symbol tags.
POS_TAGS = (
    "CC", "CD", "DT", "EX", "FW", "IN", "JJ", "JJR", "JJS", "LS", "MD",
    "NN", "NNP", "NNPS", "NNS", "PDT", "POS", "PRP", "PRP$", "RB", "RBR",
    "RBS", "RP", "SYM", "TO", "UH", "VB", "VBD", "VBG", "VBN", "VBP",
    "VBZ", "WDT", "WP", "WP$", "WRB",
    "$", "''", "(", ")", ",", "--", ".", ":", "``",
)
assert len(POS_TAGS) == 45

# Fallback tag for untagged corpora (--dummy-pos) and the reserved unknown slot.
UNKNOWN_TAG = "<unk-pos>"

_POS_TO_ID = {tag: i for i, tag in enumerate(POS_TAGS)}
UNKNOWN_TAG_ID = len(POS_TAGS)
POS_VOCAB_SIZE = len(POS_TAGS) + 1  # 45 tags + unknown slot

# Reserved vocabulary block. Order is fixed: ids 0..4.
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
KEEP_TOKEN = "<keep>"
DEL_TOKEN = "<del>"
STOP_TOKEN = "<stop>"
RESERVED_TOKENS = (PAD_TOKEN, UNK_TOKEN, KEEP_TOKEN, DEL_TOKEN, STOP_TOKEN)
PAD_ID, UNK_ID, KEEP_ID, DEL_ID, STOP_ID = range(5)


class CorpusError(ValueError):
    """Malformed corpus content (bad row, tag mismatch, empty sentence)."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Sentence:
    """A tokenized sentence with optional parallel POS tags."""

    tokens: tuple[str, ...]
    pos: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens:
            raise CorpusError("empty sentence")
        for tok in self.tokens:
            if not tok or any(c.isspace() for c in tok):
                raise CorpusError(f"token contains whitespace or is empty: {tok!r}")
        if self.pos is not None:
            object.__setattr__(self, "pos", tuple(self.pos))
            if len(self.pos) != len(self.tokens):
                raise CorpusError(
                    f"POS length mismatch: {len(self.pos)} tags for {len(self.tokens)} tokens"
                )
            for tag in self.pos:
                if tag not in _POS_TO_ID and tag != UNKNOWN_TAG:
                    raise CorpusError(f"unknown POS tag: {tag!r}")

    def __len__(self):
        return len(self.tokens)

    def with_dummy_pos(self) -> "Sentence":
        """Assign the unknown tag to every token (for untagged corpora)."""
        return Sentence(self.tokens, (UNKNOWN_TAG,) * len(self.tokens))


@dataclass(frozen=True)
class SentencePair:
    complex: Sentence
    simple: Sentence

    @property
    def is_identical(self) -> bool:
        return self.complex.tokens == self.simple.tokens


@dataclass
class CorpusLoadResult:
    pairs: list[SentencePair]
    errors: list[CorpusError]

    @property
    def identical_count(self) -> int:
        return sum(p.is_identical for p in self.pairs)


def _parse_tsv_row(line: str, lineno: int) -> SentencePair:
    cols = line.rstrip("\n").split("\t")
    if len(cols) not in (2, 4):
        raise CorpusError(f"expected 2 or 4 tab-separated columns, got {len(cols)}", lineno)
    try:
        if len(cols) == 2:
            return SentencePair(
                Sentence(cols[0].split()), Sentence(cols[1].split())
            )
        return SentencePair(
            Sentence(cols[0].split(), cols[2].split()),
            Sentence(cols[1].split(), cols[3].split()),
        )
    except CorpusError as e:
        raise CorpusError(str(e), lineno) from None


def load_corpus(path, fmt: str = "tsv", dummy_pos: bool = False) -> CorpusLoadResult:
    """Load a parallel corpus.

    ``fmt="tsv"``: one pair per line, ``complex<TAB>simple`` with optional
    third/fourth columns carrying space-separated POS tags for each side.

    ``fmt="parallel_files"``: ``path`` is a base path; ``<path>.complex`` and
    ``<path>.simple`` hold one sentence per line, with optional
    ``<path>.complex.pos`` / ``<path>.simple.pos`` files alongside.

    Malformed rows are collected as positioned errors instead of aborting, so
    callers can decide between strict and lenient handling. Identical
    complex-simple pairs are kept and flagged via ``SentencePair.is_identical``.
    """
    path = Path(path)
    pairs: list[SentencePair] = []
    errors: list[CorpusError] = []

    if fmt == "tsv":
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    pairs.append(_parse_tsv_row(line, lineno))
                except CorpusError as e:
                    errors.append(e)
    elif fmt == "parallel_files":
        comp_lines = Path(str(path) + ".complex").read_text(encoding="utf-8").splitlines()
        simp_lines = Path(str(path) + ".simple").read_text(encoding="utf-8").splitlines()
        if len(comp_lines) != len(simp_lines):
            raise CorpusError(
                f"side length mismatch: {len(comp_lines)} complex vs {len(simp_lines)} simple lines"
            )
        comp_pos = _maybe_read_lines(Path(str(path) + ".complex.pos"))
        simp_pos = _maybe_read_lines(Path(str(path) + ".simple.pos"))
        for i, (c, s) in enumerate(zip(comp_lines, simp_lines)):
            lineno = i + 1
            try:
                cs = Sentence(c.split(), comp_pos[i].split() if comp_pos else None)
                ss = Sentence(s.split(), simp_pos[i].split() if simp_pos else None)
                pairs.append(SentencePair(cs, ss))
            except CorpusError as e:
                errors.append(CorpusError(str(e), lineno))
    else:
        raise ValueError(f"unknown corpus format: {fmt!r}")

    if dummy_pos:
        pairs = [
            SentencePair(p.complex.with_dummy_pos(), p.simple.with_dummy_pos())
            for p in pairs
        ]
    return CorpusLoadResult(pairs, errors)


def _maybe_read_lines(path: Path):
    if path.exists():
        return path.read_text(encoding="utf-8").splitlines()
    return None


def save_corpus(pairs, path):
    """Write pairs back out as TSV (inverse of load_corpus for valid rows)."""
    with open(path, "w", encoding="utf-8") as f:
        for p in pairs:
            cols = [" ".join(p.complex.tokens), " ".join(p.simple.tokens)]
            if p.complex.pos is not None and p.simple.pos is not None:
                cols += [" ".join(p.complex.pos), " ".join(p.simple.pos)]
            f.write("\t".join(cols) + "\n")


class Vocabulary:
    """Bidirectional token<->id map with a fixed reserved block.

    Ids 0..4 are reserved (PAD, UNK, KEEP, DELETE, STOP in that order); real
    tokens start at id 5. ``size`` counts reserved entries too.
    """

    def __init__(self, tokens):
        self.id_to_token = list(RESERVED_TOKENS) + list(tokens)
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("duplicate tokens in vocabulary")

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def __len__(self):
        return len(self.id_to_token)

    def __contains__(self, token):
        return token in self.token_to_id

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def token_of(self, idx: int) -> str:
        return self.id_to_token[idx]

    def save(self, path):
        """One non-reserved token per line; line number + 5 gives the id."""
        with open(path, "w", encoding="utf-8") as f:
            for tok in self.id_to_token[len(RESERVED_TOKENS):]:
                f.write(tok + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as f:
            return cls([line.rstrip("\n") for line in f if line.rstrip("\n")])


def build_vocab(pairs, limit: int = 30000) -> Vocabulary:
    """Keep the ``limit`` most frequent tokens over both corpus sides.

    Frequency ties break by first occurrence in corpus order, so the result is
    deterministic for a fixed input ordering.
    """
    if limit < 1:
        raise ValueError("vocabulary limit must be >= 1")
    if not pairs:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    counts: Counter[str] = Counter()
    first_seen: dict[str, int] = {}
    order = 0
    for pair in pairs:
        for tok in pair.complex.tokens + pair.simple.tokens:
            counts[tok] += 1
            if tok not in first_seen:
                first_seen[tok] = order
                order += 1
    ranked = sorted(counts, key=lambda t: (-counts[t], first_seen[t]))
    return Vocabulary(ranked[:limit])


def encode(sentence, vocab: Vocabulary) -> list[int]:
    """Map tokens to vocabulary ids; out-of-vocabulary tokens become UNK."""
    tokens = sentence.tokens if isinstance(sentence, Sentence) else sentence
    if not tokens:
        raise CorpusError("empty sentence")
    return [vocab.id_of(t) for t in tokens]


def encode_pos(sentence: Sentence) -> list[int]:
    """Map POS tags to ids; missing tags all map to the unknown slot."""
    if sentence.pos is None:
        return [UNKNOWN_TAG_ID] * len(sentence.tokens)
    return [_POS_TO_ID.get(tag, UNKNOWN_TAG_ID) for tag in sentence.pos]
