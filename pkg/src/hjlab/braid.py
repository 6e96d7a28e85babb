"""Three-strand positive braid monoid: equivalence, reduction, certificates.

Words are strings over the alphabet {X, Y}; the empty string is the
trivial braid I.  Artin equivalence is the congruence generated by the
single relation XYX = YXY applied to any three-letter window.  A simple
parabolic reduction deletes one adjacent XX or YY pair from any member of
the equivalence class (the factor may only become adjacent after Artin
moves, so deletions are searched across the whole class).  Reachability
A => B is the reflexive-transitive closure of {Artin moves, simple
reductions}: the paper-style relation requires at least one reduction
step, so certifying *unreachability* in the permissive closure is
strictly stronger, and every certificate records this convention.

Decision procedures are exhaustive breadth-first searches over
equivalence classes, keyed by the lexicographically least class member;
length drops by exactly 2 per reduction, so the search terminates and an
exhausted frontier is a proof of unreachability at the configured length
bound.

Three word families from the intersection-comparison arguments are built
in (`lemma_families`): the GBU pair (tilde), the RBC pair (hat) and the
auxiliary pair (plain), e.g. tilde A_{2k} = (X Y^2 X)^k Y^{2k} versus
tilde B_{2k} = X^2 Y^{2k} X Y^{2k} X.

`encode` turns three sampled curves into the positive word read off their
crossing sequence: scanning left to right with strands ordered by value,
a crossing of the bottom pair emits X and of the top pair emits Y.  The
convention is the module-level GENERATOR_ORDER config.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

DEFAULT_LENGTH_BOUND = 18

# encode() convention: which adjacent pair (by increasing value) maps to
# which generator.  The figures fix this only implicitly; every emitted
# word records the convention in use.
GENERATOR_ORDER = {"bottom_pair": "X", "top_pair": "Y"}

ARTIN_L, ARTIN_R = "XYX", "YXY"


def _check_word(w: str, bound: int = DEFAULT_LENGTH_BOUND) -> str:
    if any(ch not in "XY" for ch in w):
        raise ValueError(f"word must be over {{X, Y}}, got {w!r}")
    if len(w) > bound:
        raise ValueError(f"word length {len(w)} exceeds bound {bound}")
    return w


def artin_members(w: str) -> frozenset[str]:
    """Closure of w under XYX <-> YXY substring flips (breadth-first)."""
    seen = {w}
    frontier = [w]
    while frontier:
        nxt = []
        for u in frontier:
            for i in range(len(u) - 2):
                tri = u[i:i + 3]
                if tri == ARTIN_L:
                    v = u[:i] + ARTIN_R + u[i + 3:]
                elif tri == ARTIN_R:
                    v = u[:i] + ARTIN_L + u[i + 3:]
                else:
                    continue
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
    return frozenset(seen)


@dataclass(frozen=True)
class EquivClass:
    canonical: str
    size: int
    length: int
    members: frozenset[str] = field(repr=False)


_class_cache: dict[str, EquivClass] = {}
_canon_cache: dict[str, str] = {}


def artin_class(w: str, bound: int = DEFAULT_LENGTH_BOUND) -> EquivClass:
    w = _check_word(w, bound)
    if w in _canon_cache:
        return _class_cache[_canon_cache[w]]
    members = artin_members(w)
    canonical = min(members)
    cls = EquivClass(canonical=canonical, size=len(members),
                     length=len(w), members=members)
    _class_cache[canonical] = cls
    for m in members:
        _canon_cache[m] = canonical
    return cls


def canonical(w: str, bound: int = DEFAULT_LENGTH_BOUND) -> str:
    return artin_class(w, bound).canonical


def equiv(w1: str, w2: str, bound: int = DEFAULT_LENGTH_BOUND) -> bool:
    """True iff the words are Artin-equivalent (lengths must agree)."""
    _check_word(w1, bound), _check_word(w2, bound)
    if len(w1) != len(w2):
        return False
    return canonical(w1, bound) == canonical(w2, bound)


def _deletions(u: str):
    for i in range(len(u) - 1):
        if u[i] == u[i + 1]:
            yield i, u[:i] + u[i + 2:]


@dataclass(frozen=True)
class ReductionCertificate:
    """Replayable evidence for a reachability verdict.

    reachable: `trace` is a list of steps, each an Artin chain from the
    parent class canonical to the member where a doubled letter is
    deleted.  unreachable: `frontier_stats` lists (length, classes
    explored) for the exhausted search; `mechanism` names what closed the
    case (length parity/monotonicity or exhausted class search).
    closure = "reflexive-transitive" records that A => A is allowed, which
    only strengthens unreachable verdicts.
    """

    source: str
    target: str
    verdict: str                       # "reachable" | "unreachable"
    mechanism: str
    trace: tuple = ()
    frontier_stats: tuple = ()
    closure: str = "reflexive-transitive"

    def to_dict(self) -> dict:
        return {
            "source": self.source, "target": self.target,
            "verdict": self.verdict, "mechanism": self.mechanism,
            "closure": self.closure,
            "trace": [dict(s) for s in self.trace],
            "frontier_stats": [list(t) for t in self.frontier_stats],
            "generator_order": dict(GENERATOR_ORDER),
        }


def _artin_path(start: str, goal: str) -> list[str]:
    """Shortest chain of single Artin flips from start to goal."""
    if start == goal:
        return [start]
    parent = {start: None}
    frontier = [start]
    while frontier:
        nxt = []
        for u in frontier:
            for i in range(len(u) - 2):
                tri = u[i:i + 3]
                if tri == ARTIN_L:
                    v = u[:i] + ARTIN_R + u[i + 3:]
                elif tri == ARTIN_R:
                    v = u[:i] + ARTIN_L + u[i + 3:]
                else:
                    continue
                if v not in parent:
                    parent[v] = u
                    if v == goal:
                        path = [v]
                        while parent[path[-1]] is not None:
                            path.append(parent[path[-1]])
                        return path[::-1]
                    nxt.append(v)
        frontier = nxt
    raise AssertionError("goal not in the Artin class of start")


def reduce_reachable(A: str, B: str, bound: int = DEFAULT_LENGTH_BOUND,
                     with_trace: bool = True) -> ReductionCertificate:
    """Decide A => B exhaustively; sound and complete within the bound."""
    A, B = _check_word(A, bound), _check_word(B, bound)
    if len(B) > len(A) or (len(A) - len(B)) % 2 != 0:
        return ReductionCertificate(
            source=A, target=B, verdict="unreachable",
            mechanism="length-obstruction (reductions shorten by exactly 2)")
    target = canonical(B, bound)
    start = canonical(A, bound)
    # parent bookkeeping: child canonical -> (parent canonical, member, pos)
    parent: dict[str, tuple] = {start: None}
    level = {start}
    stats = [(len(A), 1)]
    while level:
        if target in parent:
            break
        if len(next(iter(level))) <= len(B):
            break  # reductions only shorten; deeper levels cannot hold B
        nxt = set()
        for c in level:
            for member in artin_class(c, bound).members:
                for pos, shorter in _deletions(member):
                    sc = canonical(shorter, bound)
                    if sc not in parent:
                        parent[sc] = (c, member, pos)
                        nxt.add(sc)
        level = nxt
        if nxt:
            stats.append((len(next(iter(nxt))), len(nxt)))
    if target not in parent:
        return ReductionCertificate(
            source=A, target=B, verdict="unreachable",
            mechanism="exhausted-class-search (all levels of length >= target)",
            frontier_stats=tuple(stats))
    trace = []
    if with_trace:
        chain = []
        node = target
        while parent[node] is not None:
            chain.append((node, parent[node]))
            node = parent[node][0]
        for node, (par, member, pos) in reversed(chain):
            trace.append({
                "from_class": par,
                "artin_path": tuple(_artin_path(par, member)),
                "delete_at": pos,
                "result_class": node,
            })
    mechanism = "empty-reduction (A equivalent to B)" if start == target \
        else "replayable-reduction-sequence"
    return ReductionCertificate(source=A, target=B, verdict="reachable",
                                mechanism=mechanism, trace=tuple(trace),
                                frontier_stats=tuple(stats))


def replay_certificate(cert: ReductionCertificate,
                       bound: int = DEFAULT_LENGTH_BOUND) -> bool:
    """Re-execute a reachable trace step by step; True iff it checks out."""
    if cert.verdict != "reachable":
        raise ValueError("only reachable certificates can be replayed")
    current = canonical(cert.source, bound)
    for step in cert.trace:
        if step["from_class"] != current:
            return False
        path = step["artin_path"]
        if path[0] != current:
            return False
        for a, b in zip(path, path[1:]):
            if not equiv(a, b, bound) or len(a) != len(b):
                return False
        member = path[-1]
        pos = step["delete_at"]
        if member[pos] != member[pos + 1]:
            return False
        shorter = member[:pos] + member[pos + 2:]
        if canonical(shorter, bound) != step["result_class"]:
            return False
        current = step["result_class"]
    return current == canonical(cert.target, bound)


# ---------------------------------------------------------------------------
# built-in identities and word families


def _pow(w: str, k: int) -> str:
    return w * k


def verify_identities(kmax: int = 3, a_len_max: int = 6) -> dict:
    """Machine-check the closed-form identities; failure raises.

    Covers the eight-member coincidence of degree-6 words, the shuffle
    Y^{2k} X Y = X Y X^{2k} (and its mirror), centrality of X^2 Y X^2 Y
    against all short positive words, and (Y X^2 Y)^k X^{2k} =
    (Y X^2 Y X^2)^k = X^{2k} (Y X^2 Y)^k.
    """
    report = {"checked": 0, "failures": []}

    def check(a, b, tag):
        report["checked"] += 1
        if not equiv(a, b, bound=max(len(a), len(b), DEFAULT_LENGTH_BOUND)):
            report["failures"].append((tag, a, b))

    basic = ["XYYXYY", "YXXYXX", "XYXXYX", "YXYYXY",
             "XXYXXY", "YYXYYX", "XYXYXY", "YXYXYX"]
    for b in basic[1:]:
        check(basic[0], b, "degree-6 coincidence")

    for k in range(1, kmax + 1):
        check("Y" * 2 * k + "XY", "XY" + "X" * 2 * k, f"shuffle k={k}")
        check("X" * 2 * k + "YX", "YX" + "Y" * 2 * k, f"shuffle-mirror k={k}")

    core = "XXYXXY"
    for n in range(0, a_len_max + 1):
        for letters in itertools.product("XY", repeat=n):
            A = "".join(letters)
            check(core + A, A + core, f"centrality |A|={n}")

    for k in range(1, kmax + 1):
        lhs = _pow("YXXY", k) + "X" * 2 * k
        mid = _pow("YXXYXX", k)
        rhs = "X" * 2 * k + _pow("YXXY", k)
        check(lhs, mid, f"telescoping k={k}")
        check(mid, rhs, f"telescoping-right k={k}")

    if report["failures"]:
        raise AssertionError(f"identity check failed: {report['failures']}")
    return report


def lemma_families(n: int, family: str) -> tuple[str, str]:
    """The built-in word pairs (A_n, B_n) for family in {tilde, hat, plain}.

    tilde/hat are indexed by n >= 2 (n = 2k or 2k+1, k >= 1); plain is the
    auxiliary even-index pair, n = 2k.
    """
    if family not in ("tilde", "hat", "plain"):
        raise ValueError(f"unknown family {family!r}")
    if n < 2:
        raise ValueError("families are defined for n >= 2")
    k, odd = divmod(n, 2)
    if family == "tilde":
        if odd:
            A = _pow("XYYX", k) + "XY" + "X" * (2 * k + 1)
            B = "XX" + "Y" * (2 * k + 1) + "X" * (2 * k + 1) + "Y"
        else:
            A = _pow("XYYX", k) + "Y" * 2 * k
            B = "XX" + "Y" * 2 * k + "X" + "Y" * 2 * k + "X"
        return A, B
    if family == "hat":
        if odd:
            A = _pow("YXXY", k) + "YX" + "Y" * (2 * k + 1)
            B = "YY" + "X" * (2 * k + 1) + "Y" * (2 * k + 1) + "X"
        else:
            A = _pow("YXXY", k) + "X" * 2 * k
            B = "YY" + "X" * 2 * k + "Y" + "X" * 2 * k + "Y"
        return A, B
    if odd:
        raise ValueError("plain family is defined for even n = 2k only")
    A = _pow("YXXY", k) + "X" * (2 * k + 1)
    B = "YY" + "X" * (2 * k + 1) + "Y" * 2 * k
    return A, B


def verify_nonreductions(n_max: int = 5, bound: int = DEFAULT_LENGTH_BOUND) -> list:
    """Certify A_n =/=> B_n for the built-in families up to n_max.

    tilde and hat run over n in {2..n_max}; plain over even n.  Any
    reachable verdict raises (it would falsify the engine).
    """
    certs = []
    for family in ("tilde", "hat", "plain"):
        ns = range(2, n_max + 1) if family != "plain" \
            else range(2, n_max + 1, 2)
        for n in ns:
            A, B = lemma_families(n, family)
            if max(len(A), len(B)) > bound:
                raise ValueError(
                    f"{family} n={n} exceeds length bound {bound}")
            cert = reduce_reachable(A, B, bound, with_trace=False)
            if cert.verdict != "unreachable":
                raise AssertionError(
                    f"engine claims {family} A_{n} => B_{n}: {cert}")
            certs.append((family, n, cert))
    return certs


def random_word(rng, max_len: int, min_len: int = 0) -> str:
    n = int(rng.integers(min_len, max_len + 1))
    return "".join(rng.choice(["X", "Y"], size=n))


def cancellation_test(trials: int, bound: int = 12, seed: int = 0) -> dict:
    """Sample (H, A, B): whenever HA => HB holds, check A => B (both sides).

    A counterexample would falsify the engine, not the cancellation lemma.
    Half the samples construct B by actually reducing A so the premise
    often holds; the rest are uniform.
    """
    rng = np.random.default_rng(seed)
    stats = {"trials": trials, "premise_held": 0, "violations": []}
    for _ in range(trials):
        H = random_word(rng, 3)
        A = random_word(rng, max(0, bound - len(H)))
        if rng.random() < 0.5 and len(A) >= 2:
            B = A
            for _ in range(int(rng.integers(1, 3))):
                opts = [(m, i) for m in artin_class(B).members
                        for i, _ in _deletions(m)]
                if not opts:
                    break
                m, i = opts[int(rng.integers(len(opts)))]
                B = m[:i] + m[i + 2:]
        else:
            B = random_word(rng, len(A))
        if (len(A) - len(B)) % 2 != 0 or len(B) > len(A):
            continue
        for left in (True, False):
            ha = H + A if left else A + H
            hb = H + B if left else B + H
            if reduce_reachable(ha, hb, bound + 3, with_trace=False).verdict == "reachable":
                stats["premise_held"] += 1
                if reduce_reachable(A, B, bound + 3, with_trace=False).verdict != "reachable":
                    stats["violations"].append((H, A, B, "left" if left else "right"))
    return stats


# ---------------------------------------------------------------------------
# curve-to-braid encoding


def encode(curves, slope_tol: float = 1e-6, x_sep_tol: float = 1e-9) -> str:
    """Positive word read off three sampled curves on a common interval.

    curves: three GridFunctions (or (x, values) pairs) on one grid.
    Preconditions checked numerically: pairwise distinct at both ends,
    transversal isolated pairwise crossings, no triple points.  Scanning
    left to right with strands ranked by value, a crossing of the strands
    in ranks (1,2) emits GENERATOR_ORDER['bottom_pair'] and in ranks
    (2,3) GENERATOR_ORDER['top_pair'].
    """
    xs, vals = _as_arrays(curves)
    n = len(xs)
    for a in range(3):
        for b in range(a + 1, 3):
            for end in (0, n - 1):
                if vals[a][end] == vals[b][end]:
                    raise ValueError("curves must be pairwise distinct at endpoints")
    crossings = []  # (x_cross, pair=(a,b), slope_gap)
    for a in range(3):
        for b in range(a + 1, 3):
            d = vals[a] - vals[b]
            sgn = np.sign(d)
            for i in np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]:
                frac = d[i] / (d[i] - d[i + 1])
                xc = xs[i] + frac * (xs[i + 1] - xs[i])
                gap = (d[i + 1] - d[i]) / (xs[i + 1] - xs[i])
                crossings.append((float(xc), (a, b), float(gap)))
            if np.any(d == 0.0):
                raise ValueError("tangential or sampled-exact intersection; refine or perturb")
    scale = max(float(np.max(np.abs(v))) for v in vals) or 1.0
    for xc, pair, gap in crossings:
        if abs(gap) < slope_tol * scale:
            raise ValueError(f"tangential crossing of pair {pair} near x={xc}")
    crossings.sort(key=lambda c: c[0])
    for (x1, p1, _), (x2, p2, _) in zip(crossings, crossings[1:]):
        if p1 != p2 and abs(x2 - x1) < x_sep_tol * (xs[-1] - xs[0]):
            raise ValueError(f"triple point near x={x1}")
    order = list(np.argsort([v[0] for v in vals], kind="stable"))  # rank -> strand
    word = []
    for xc, (a, b), _ in crossings:
        ra, rb = order.index(a), order.index(b)
        if abs(ra - rb) != 1:
            raise ValueError(
                f"non-adjacent crossing of {a, b} at x={xc}: sampling too coarse")
        lo = min(ra, rb)
        word.append(GENERATOR_ORDER["bottom_pair"] if lo == 0
                    else GENERATOR_ORDER["top_pair"])
        order[lo], order[lo + 1] = order[lo + 1], order[lo]
    return "".join(word)


def _as_arrays(curves):
    if len(curves) != 3:
        raise ValueError("encode expects exactly three curves")
    xs = None
    vals = []
    for c in curves:
        if hasattr(c, "x") and hasattr(c, "values"):
            cx, cv = np.asarray(c.x, float), np.asarray(c.values, float)
        else:
            cx, cv = (np.asarray(c[0], float), np.asarray(c[1], float))
        if xs is None:
            xs = cx
        elif not np.array_equal(xs, cx):
            raise ValueError("curves must share one grid")
        vals.append(cv)
    return xs, vals
