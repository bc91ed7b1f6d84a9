"""Independent reference implementations used as test oracles.

Everything here is deliberately written with different algorithms and data
representations than the package (prefix-table LCS instead of suffix-table
distances, recursive enumeration, tuple-coded labels) so agreement is
meaningful.
"""

from functools import lru_cache

# tuple-coded labels: "KEEP", "DEL", ("ADD", word), "STOP"
_RANK = {"KEEP": 0, "ADD": 1, "DEL": 2}


def lcs_length(a, b) -> int:
    """Textbook prefix-table longest common subsequence length."""
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            if x == y:
                table[i + 1][j + 1] = table[i][j] + 1
            else:
                table[i + 1][j + 1] = max(table[i][j + 1], table[i + 1][j])
    return table[len(a)][len(b)]


def naive_execute(x, labels, pad=True):
    """Direct interpretation of a tuple-coded edit script."""
    out, k = [], 0
    for lab in labels:
        kind = lab[0] if isinstance(lab, tuple) else lab
        if kind == "KEEP":
            out.append(x[k])
            k += 1
        elif kind == "DEL":
            k += 1
        elif kind == "ADD":
            out.append(lab[1])
        elif kind == "STOP":
            break
        else:
            raise ValueError(kind)
    if pad:
        out.extend(x[k:])
    return out


def make_minimal_script_enumerator(x, y):
    """Lazily yield every minimal insert/delete edit script for x -> y,
    in lexicographic order under the preference KEEP < ADD < DEL."""
    x, y = tuple(x), tuple(y)

    @lru_cache(maxsize=None)
    def dist(i, j):
        if i == len(x):
            return len(y) - j
        if j == len(y):
            return len(x) - i
        best = min(dist(i, j + 1), dist(i + 1, j)) + 1
        if x[i] == y[j]:
            best = min(best, dist(i + 1, j + 1))
        return best

    def expand(i, j):
        if i == len(x) and j == len(y):
            yield ()
            return
        d = dist(i, j)
        if i < len(x) and j < len(y) and x[i] == y[j] and dist(i + 1, j + 1) == d:
            for rest in expand(i + 1, j + 1):
                yield ("KEEP",) + rest
        if j < len(y) and dist(i, j + 1) + 1 == d:
            for rest in expand(i, j + 1):
                yield (("ADD", y[j]),) + rest
        if i < len(x) and dist(i + 1, j) + 1 == d:
            for rest in expand(i + 1, j):
                yield ("DEL",) + rest

    return expand(0, 0)


def all_minimal_scripts(x, y):
    return list(make_minimal_script_enumerator(x, y))


def canonical_minimal_script(x, y):
    """First script from the preference-ordered enumeration = lexicographic
    minimum under KEEP < ADD < DEL."""
    return next(make_minimal_script_enumerator(x, y))


def kind_sequence(script):
    return tuple(lab[0] if isinstance(lab, tuple) else lab for lab in script)


def lex_key(script):
    return tuple(_RANK[k] for k in kind_sequence(script))


def program_to_tuples(program):
    """Convert package EditLabel sequences to tuple coding (STOP dropped)."""
    out = []
    for lab in program:
        if lab.kind == "STOP":
            continue
        out.append(("ADD", lab.word) if lab.kind == "ADD" else lab.kind)
    return tuple(out)


def adds_precede_deletes_within_runs(script) -> bool:
    """Between consecutive KEEPs, no ADD may follow a DEL."""
    seen_del = False
    for kind in kind_sequence(script):
        if kind == "KEEP":
            seen_del = False
        elif kind == "DEL":
            seen_del = True
        elif kind == "ADD" and seen_del:
            return False
    return True
