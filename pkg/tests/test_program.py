import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from editsimp.oracle import DELETE, EditProgram, KEEP, STOP, add
from editsimp.program import (
    ExecState,
    HaltedError,
    PointerOverflow,
    execute,
    step,
    trace,
    validate,
)

from helpers import naive_execute

TABLE2_X = "the line between combat is getting blurry".split()
TABLE2_PROGRAM = EditProgram(
    (add("war"), DELETE, DELETE, DELETE, DELETE, KEEP, add("changing"), DELETE, DELETE, STOP)
)

tokens = st.lists(st.sampled_from(["a", "b", "c", "d"]), min_size=1, max_size=6)


def random_program(rng, n):
    """A structurally valid random program for a length-n source."""
    labels = []
    k = 0
    while True:
        roll = rng.random()
        if k < n and roll < 0.4:
            labels.append(KEEP)
            k += 1
        elif k < n and roll < 0.7:
            labels.append(DELETE)
            k += 1
        elif roll < 0.85:
            labels.append(add(str(rng.integers(0, 5))))
        else:
            labels.append(STOP)
            return EditProgram(tuple(labels))
        if len(labels) > 3 * n + 5:
            labels.append(STOP)
            return EditProgram(tuple(labels))


class TestStep:
    def test_keep(self):
        s = step(ExecState(), ["a"], KEEP)
        assert (s.k, s.output) == (1, ("a",))

    def test_add_leaves_pointer(self):
        s = step(ExecState(), ["a"], add("b"))
        assert (s.k, s.output) == (0, ("b",))

    def test_delete(self):
        s = step(ExecState(), ["a"], DELETE)
        assert (s.k, s.output) == (1, ())

    def test_overflow(self):
        s = step(ExecState(), ["a"], KEEP)
        with pytest.raises(PointerOverflow):
            step(s, ["a"], KEEP)

    def test_halted(self):
        s = step(ExecState(), ["a"], STOP)
        assert s.halted
        with pytest.raises(HaltedError):
            step(s, ["a"], KEEP)

    def test_pointer_counts_keep_and_delete(self):
        s = ExecState()
        x = ["a", "b", "c"]
        for lab, expect_k in [(KEEP, 1), (add("z"), 1), (DELETE, 2), (KEEP, 3)]:
            s = step(s, x, lab)
            assert s.k == expect_k
        assert s.output == ("a", "z", "c")


class TestExecute:
    def test_table2(self):
        assert execute(TABLE2_X, TABLE2_PROGRAM) == ["war", "is", "changing"]

    def test_identity(self):
        x = ["p", "q"]
        assert execute(x, EditProgram((KEEP, KEEP, STOP))) == x

    def test_early_stop_padding(self):
        x = ["a", "b", "c"]
        prog = EditProgram((KEEP, STOP))
        assert execute(x, prog, pad_on_early_stop=True) == ["a", "b", "c"]
        assert execute(x, prog, pad_on_early_stop=False) == ["a"]

    def test_exhausted_labels_pad(self):
        x = ["a", "b"]
        prog = EditProgram((DELETE,))
        assert execute(x, prog, pad_on_early_stop=True) == ["b"]
        assert execute(x, prog, pad_on_early_stop=False) == []

    def test_oov_transparency(self):
        x = ["Zyzzogeton-77", "&&&"]
        assert execute(x, EditProgram((KEEP, KEEP, STOP))) == x

    def test_label_after_stop_rejected(self):
        with pytest.raises(HaltedError):
            execute(["a"], EditProgram((STOP, KEEP)))

    @given(tokens, st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=100, deadline=None)
    def test_matches_naive_interpreter(self, x, seed):
        prog = random_program(np.random.default_rng(seed), len(x))
        coded = []
        for lab in prog:
            coded.append(("ADD", lab.word) if lab.kind == "ADD" else lab.kind)
        for pad in (True, False):
            assert execute(x, prog, pad) == naive_execute(x, coded, pad)

    @given(tokens, st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=100, deadline=None)
    def test_conservation(self, x, seed):
        prog = random_program(np.random.default_rng(seed), len(x))
        c = prog.counts()
        out = execute(x, prog, pad_on_early_stop=False)
        assert len(out) == c["KEEP"] + c["ADD"]
        k_final = c["KEEP"] + c["DEL"]
        assert len(execute(x, prog, True)) == len(out) + len(x) - k_final

    @given(tokens, st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=100, deadline=None)
    def test_subsequence_property(self, x, seed):
        # dropping ADD-produced tokens from the output leaves a subsequence of x
        prog = random_program(np.random.default_rng(seed), len(x))
        survivors = [t for t, src in zip_execution(x, prog) if src == "KEEP"]
        it = iter(x)
        assert all(t in it for t in survivors)


def zip_execution(x, prog):
    """Replay a program, tagging each output token with its producing label."""
    out = []
    k = 0
    for lab in prog:
        if lab.kind == "KEEP":
            out.append((x[k], "KEEP"))
            k += 1
        elif lab.kind == "DEL":
            k += 1
        elif lab.kind == "ADD":
            out.append((lab.word, "ADD"))
        else:
            break
    return out


class TestValidate:
    def test_table2_valid(self):
        assert validate(TABLE2_X, TABLE2_PROGRAM).ok

    def test_overflow_position(self):
        d = validate(["a"], EditProgram((DELETE, DELETE)))
        assert not d.ok
        assert d.overflow_at == 1
        assert d.missing_stop

    def test_nonterminal_stop(self):
        d = validate(["a"], EditProgram((STOP, KEEP)))
        assert not d.ok
        assert d.nonterminal_stop_at == 0

    def test_missing_stop_only(self):
        d = validate(["a"], EditProgram((KEEP,)))
        assert not d.ok and d.missing_stop and d.overflow_at is None

    def test_no_side_effects(self):
        prog = EditProgram((DELETE, DELETE, DELETE))
        x = ["a"]
        validate(x, prog)  # must not raise even though execution would


class TestTrace:
    def test_rows(self):
        rows = list(trace(["a", "b"], EditProgram((KEEP, add("z"), STOP)), pad_on_early_stop=False))
        assert rows == [(1, "KEEP", 1, 1), (2, "ADD|z", 1, 2), (3, "STOP", 1, 2)]

    def test_synthetic_keep_padding(self):
        rows = list(trace(["a", "b", "c"], EditProgram((KEEP, STOP))))
        assert [r[1] for r in rows] == ["KEEP", "STOP", "KEEP*", "KEEP*"]
        assert rows[-1][2] == 3  # pointer walked to the end
