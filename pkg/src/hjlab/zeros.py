"""Sturm diagnostics: sign changes, intersection tracking, vanishing count.

The comparison arguments all run through the zero number z(f : [a,b]) =
number of sign changes, which is finite and nonincreasing in time along
differences of solutions.  Here we count sign changes with a tolerance
(values inside the band are transparent), locate the zeros of u - U per
snapshot by linear interpolation, stitch them into labeled curves across
snapshots by nearest-position matching, and classify how each curve ends:
still alive, vanished into the boundary x = 0, or collapsed with
neighboring curves.

The vanishing-intersection number n of a run is the highest label whose
curve dips below the vanish threshold inside the terminal window; the
threshold defaults to the second interior node (below one cell a discrete
zero location means nothing) and both threshold and window are exposed,
since the continuous-time liminf has no canonical discrete counterpart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grids import GridFunction


def sign_changes(f: GridFunction | np.ndarray, interval=None, tol: float = 0.0) -> int:
    """Count strict sign alternations; |values| <= tol are transparent."""
    vals = f.values if isinstance(f, GridFunction) else np.asarray(f, dtype=float)
    if interval is not None:
        if not isinstance(f, GridFunction):
            raise ValueError("interval selection needs a GridFunction")
        lo, hi = interval
        mask = (f.x >= lo) & (f.x <= hi)
        vals = vals[mask]
    sig = vals[np.abs(vals) > tol]
    if sig.size < 2:
        return 0
    s = np.sign(sig)
    return int(np.count_nonzero(s[:-1] * s[1:] < 0))


def zero_positions(f: GridFunction, tol: float = 0.0) -> np.ndarray:
    """Linear-interpolation zeros of a snapshot, tolerance-transparent.

    Runs of near-zero samples are skipped; a sign flip across such a run
    is located at the run's midpoint.
    """
    v = f.values
    x = f.x
    idx = np.nonzero(np.abs(v) > tol)[0]
    if idx.size < 2:
        return np.array([])
    zeros = []
    for a, b in zip(idx[:-1], idx[1:]):
        if v[a] * v[b] < 0:
            if b == a + 1:
                frac = v[a] / (v[a] - v[b])
                zeros.append(x[a] + frac * (x[b] - x[a]))
            else:
                zeros.append(0.5 * (x[a] + x[b]))
    return np.asarray(zeros)


@dataclass
class IntersectionTrack:
    label: int
    times: list = field(default_factory=list)
    positions: list = field(default_factory=list)
    event: str = "alive"          # vanished-at-0 | collapsed-with | reached-final-time
    event_time: float | None = None
    collapsed_with: tuple = ()

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.times)

    @property
    def x(self) -> np.ndarray:
        return np.asarray(self.positions)


class AmbiguousTrackingError(RuntimeError):
    """More curves appeared than existed before: scheme noise; run rejected."""


def track_intersections(snapshots, reference=None, tol: float | None = None,
                        vanish_threshold: float | None = None,
                        wall_noise_floor: float | None = None,
                        disp_c: float | None = None) -> list[IntersectionTrack]:
    """Match per-snapshot zeros of u - reference into labeled curves.

    snapshots: time-ordered GridFunctions on one grid.  reference: array
    or callable evaluated on the grid (None = track zeros of u itself).
    tol: transparency band; default 1e-9 * max|u - ref| per snapshot.
    vanish_threshold defaults to the second interior node (below one cell
    a discrete zero location means nothing); wall_noise_floor (default
    4x threshold) makes *surplus* zeros that pop up inside the wall layer
    transparent -- truncated runs grow such an artifact crossing right
    before a vanishing pair collapses into the boundary.  Any other
    increase of the zero count raises AmbiguousTrackingError.

    Nearest-position matching is only trusted while curves move less than
    the parabolic displacement heuristic disp_c * sqrt(dt) plus two local
    cells between snapshots (disp_c defaults to 5 * (1 + R)); larger
    jumps also raise AmbiguousTrackingError.

    A lost curve collapses with neighbors found within two local cells;
    an isolated lost curve that was lowest and driving monotonically
    toward the wall vanished into x = 0.
    """
    if not snapshots:
        return []
    grid = snapshots[0].grid
    x = grid.nodes
    if reference is None:
        ref = np.zeros_like(x)
    elif callable(reference):
        ref = np.asarray([reference(xx) for xx in x])
    else:
        ref = np.asarray(reference, dtype=float)
    if vanish_threshold is None:
        vanish_threshold = x[2] if grid.n > 2 else x[1]
    if wall_noise_floor is None:
        wall_noise_floor = 4.0 * vanish_threshold
    if disp_c is None:
        disp_c = 5.0 * (1.0 + float(x[-1]))

    tracks: list[IntersectionTrack] = []
    active: list[IntersectionTrack] = []
    first = True
    prev_t = None
    for snap in snapshots:
        if snap.grid is not grid and not np.array_equal(snap.x, x):
            raise ValueError("snapshots must share one grid")
        diff = GridFunction(grid, snap.values - ref, t=snap.t)
        band = tol if tol is not None else 1e-9 * max(np.max(np.abs(diff.values)), 1e-300)
        pos = list(zero_positions(diff, tol=band))
        t = snap.t
        if first:
            for lbl, p in enumerate(pos, start=1):
                tr = IntersectionTrack(label=lbl)
                tr.times.append(t)
                tr.positions.append(float(p))
                tracks.append(tr)
                active.append(tr)
            first = False
            prev_t = t
            continue
        if len(pos) > len(active):
            # Surplus zeros entering inside the wall-noise band are
            # regularization bookkeeping (truncated runs grow a crossing
            # pair there while an intersection vanishes); drop them,
            # lowest-first, provided they sit below the lowest real curve.
            raw_count = len(pos)
            surplus = len(pos) - len(active)
            lowest_active = active[0].positions[-1] if active else np.inf
            while surplus and pos and (pos[0] <= wall_noise_floor
                                       and pos[0] < lowest_active):
                pos.pop(0)
                surplus -= 1
            if surplus:
                raise AmbiguousTrackingError(
                    f"zero count rose from {len(active)} to {raw_count} at t={t} "
                    f"({surplus} surplus above the wall-noise floor)")
        # nearest-position assignment; both lists are sorted
        dt_gap = abs(t - prev_t) if prev_t is not None else 0.0
        used = set()
        assignment = {}
        for i, p in enumerate(pos):
            best, best_d = None, np.inf
            for jj, tr in enumerate(active):
                if jj in used:
                    continue
                dd = abs(tr.positions[-1] - p)
                if dd < best_d:
                    best, best_d = jj, dd
            bound = disp_c * math.sqrt(dt_gap) + 2.0 * _local_cell(x, p)
            if best_d > bound:
                raise AmbiguousTrackingError(
                    f"curve jump {best_d:.3e} beyond the displacement bound "
                    f"{bound:.3e} at t={t}")
            assignment[i] = best
            used.add(best)
        order = [assignment[i] for i in range(len(pos))]
        if any(a >= b for a, b in zip(order, order[1:])):
            raise AmbiguousTrackingError(
                f"matching would reorder curve labels at t={t}")
        lost = [jj for jj in range(len(active)) if jj not in used]
        for jj in lost:
            tr = active[jj]
            last = tr.positions[-1]
            near = [active[m].label for m in range(len(active))
                    if m != jj and abs(active[m].positions[-1] - last)
                    <= 2.0 * _local_cell(x, last)]
            if near:
                tr.event = "collapsed-with"
                tr.collapsed_with = tuple(near)
            elif last <= max(4.0 * vanish_threshold, 4.0 * _local_cell(x, last)) or (
                    jj == 0 and _descending(tr)):
                tr.event = "vanished-at-0"
            else:
                tr.event = "collapsed-with"
            tr.event_time = t
        active = [active[assignment[i]] for i in range(len(pos))]
        for i, p in enumerate(pos):
            active[i].times.append(t)
            active[i].positions.append(float(p))
        prev_t = t
    for tr in active:
        tr.event = "reached-final-time" if tr.event == "alive" else tr.event
    return tracks


def _descending(tr: IntersectionTrack, k: int = 4, drop: float = 0.2) -> bool:
    """Was the curve driving monotonically toward the wall at the end?"""
    p = tr.positions
    if len(p) < 2:
        return False
    tail = p[-min(k, len(p)):]
    return all(b < a for a, b in zip(tail, tail[1:])) and tail[-1] < (1 - drop) * p[0]


def _local_cell(x: np.ndarray, p: float) -> float:
    i = int(np.clip(np.searchsorted(x, p) - 1, 0, len(x) - 2))
    return float(x[i + 1] - x[i])


def vanishing_count(tracks: list[IntersectionTrack], T_est: float,
                    window: float, vanish_threshold: float | None = None,
                    warn=print) -> int:
    """n = highest label whose curve heads into the wall during the window.

    A curve counts if its position dips below vanish_threshold inside
    (T_est - window, T_est], or if its recorded terminal event is
    vanished-at-0 there (the discrete pair-collapse that stands in for a
    vanishing intersection).  Returns 0 with a warning when nothing
    approaches the boundary.
    """
    n = 0
    t_lo = T_est - window
    for tr in tracks:
        in_win = tr.t > t_lo
        dipped = (np.any(in_win) and vanish_threshold is not None
                  and np.min(tr.x[in_win]) <= vanish_threshold)
        ended = (tr.event == "vanished-at-0" and tr.event_time is not None
                 and tr.event_time > t_lo)
        if dipped or ended:
            n = max(n, tr.label)
    if n == 0 and warn is not None:
        warn("vanishing_count: no intersection curve approaches the boundary "
             "(no singular event resolved in the window)")
    return n
