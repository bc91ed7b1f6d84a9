"""Parameter-free executor for edit programs.

State semantics: the pointer ``k`` counts KEEP and DELETE operations executed
so far (the index of the first unedited source token, 0-based); the output
holds one token per KEEP or ADD executed. Early STOP with padding enabled
appends the untouched source suffix, which is equivalent to KEEP-padding the
program to the end of the sentence.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .corpus import Sentence
from .oracle import EditProgram, K_ADD, K_DEL, K_KEEP, K_STOP


class PointerOverflow(Exception):
    """KEEP or DELETE attempted with every source token already consumed."""


class HaltedError(Exception):
    """A label arrived after STOP."""


@dataclass(frozen=True)
class ExecState:
    k: int = 0
    output: tuple[str, ...] = ()
    t: int = 0
    halted: bool = False


def _tokens(x) -> tuple[str, ...]:
    return x.tokens if isinstance(x, Sentence) else tuple(x)


def step(state: ExecState, x, label) -> ExecState:
    """Apply one edit label and return the successor state."""
    if state.halted:
        raise HaltedError(f"label {label.render()} after STOP (step {state.t})")
    xs = _tokens(x)
    kind = label.kind
    if kind in (K_KEEP, K_DEL) and state.k >= len(xs):
        raise PointerOverflow(
            f"{kind} at step {state.t} but all {len(xs)} source tokens consumed"
        )
    if kind == K_KEEP:
        return replace(state, k=state.k + 1, output=state.output + (xs[state.k],), t=state.t + 1)
    if kind == K_DEL:
        return replace(state, k=state.k + 1, t=state.t + 1)
    if kind == K_ADD:
        return replace(state, output=state.output + (label.word,), t=state.t + 1)
    return replace(state, halted=True, t=state.t + 1)


def execute(x, program: EditProgram, pad_on_early_stop: bool = True) -> list[str]:
    """Fold ``step`` over the program; return the produced token list.

    With padding enabled, a STOP (or label exhaustion) before the pointer
    reaches the end of the source appends the untouched suffix. With padding
    disabled the output may be empty; the caller decides what that means.
    """
    xs = _tokens(x)
    state = ExecState()
    for label in program:
        state = step(state, xs, label)  # raises HaltedError on labels after STOP
    out = list(state.output)
    if pad_on_early_stop and state.k < len(xs):
        out.extend(xs[state.k:])
    return out


def trace(x, program: EditProgram, pad_on_early_stop: bool = True):
    """Yield one ``(t, label, k, output_len)`` row per executed step.

    Padded positions appear as synthetic ``KEEP*`` rows so per-label statistics
    line up with the KEEP-padding view of early stops.
    """
    xs = _tokens(x)
    state = ExecState()
    for label in program:
        state = step(state, xs, label)
        yield (state.t, label.render(), state.k, len(state.output))
        if state.halted:
            break
    if pad_on_early_stop:
        k, out_len, t = state.k, len(state.output), state.t
        while k < len(xs):
            k += 1
            out_len += 1
            t += 1
            yield (t, "KEEP*", k, out_len)


@dataclass
class Diagnosis:
    ok: bool
    issues: list[str] = field(default_factory=list)
    overflow_at: int | None = None
    nonterminal_stop_at: int | None = None
    missing_stop: bool = False


def validate(x, program: EditProgram) -> Diagnosis:
    """Check a program against a source without executing side effects."""
    xs = _tokens(x)
    diag = Diagnosis(ok=True)
    k = 0
    stop_seen_at = None
    for idx, label in enumerate(program):
        if stop_seen_at is not None and diag.nonterminal_stop_at is None:
            diag.nonterminal_stop_at = stop_seen_at
            diag.issues.append(f"label after STOP: STOP at index {stop_seen_at} is not terminal")
        if label.kind == K_STOP:
            if stop_seen_at is None:
                stop_seen_at = idx
            continue
        if label.kind in (K_KEEP, K_DEL):
            if k >= len(xs) and diag.overflow_at is None:
                diag.overflow_at = idx
                diag.issues.append(
                    f"pointer overflow: {label.kind} at label index {idx} beyond |x|={len(xs)}"
                )
            k += 1
    if stop_seen_at is None:
        diag.missing_stop = True
        diag.issues.append("missing terminal STOP")
    diag.ok = not diag.issues
    return diag
