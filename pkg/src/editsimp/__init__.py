"""Edit-operation sentence simplification.

A deterministic oracle turns complex-simple sentence pairs into edit programs
(ADD/KEEP/DELETE/STOP); a parameter-free executor applies programs to source
tokens; a programmer-interpreter model learns to predict programs; SARI/FKGL
metrics score system outputs. See the CLI (``editsimp --help``) for the
end-to-end pipeline.
"""

from .corpus import (
    CorpusError,
    Sentence,
    SentencePair,
    Vocabulary,
    build_vocab,
    encode,
    encode_pos,
    load_corpus,
)
from .oracle import (
    DELETE,
    EditLabel,
    EditProgram,
    KEEP,
    STOP,
    add,
    construct_program,
    label_statistics,
    load_programs,
    save_programs,
)
from .program import ExecState, HaltedError, PointerOverflow, execute, step, trace, validate
from .metrics import EvalInstance, EvalReport, evaluate, fkgl, pct_unchanged, sari_corpus

__version__ = "0.1.0"
