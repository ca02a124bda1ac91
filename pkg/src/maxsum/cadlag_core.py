"""Exact step-plus-drift paths and the functionals used on them.

A path is right-continuous: the value at a jump time already includes the
jump.  Every coordinate is ``initial + drift * t + (sum of jumps at times <= t)``.
The post-jump levels are stored alongside the jump sizes so that builders
can supply exact levels (a running maximum, for instance) instead of relying
on a floating-point cumulative sum.
"""
from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import optimize

NONDECREASING = "nondecreasing"
RUNNING_MAX = "running-max"
_FLAGS = ("", NONDECREASING, RUNNING_MAX)


class PathDomainError(ValueError):
    """Time or level outside the domain of a path operation."""


class PathContractError(ValueError):
    """A path does not satisfy the structural contract of an operation."""


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True, eq=False)
class CadlagPath:
    initial_value: NDArray[np.float64]
    jump_times: NDArray[np.float64]
    jump_sizes: NDArray[np.float64]
    drift: NDArray[np.float64]
    horizon: float
    flags: tuple[str, ...] = ()
    levels: NDArray[np.float64] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        init = np.atleast_1d(np.asarray(self.initial_value, dtype=float)).copy()
        dim = init.shape[0]
        times = np.asarray(self.jump_times, dtype=float).reshape(-1).copy()
        sizes = np.asarray(self.jump_sizes, dtype=float).reshape(times.shape[0], dim).copy()
        drift = np.zeros(dim) if self.drift is None else np.asarray(self.drift, dtype=float).reshape(dim).copy()
        horizon = float(self.horizon)
        flags = tuple(self.flags) if self.flags else ("",) * dim

        if horizon <= 0:
            raise PathContractError("horizon must be positive")
        if len(flags) != dim or any(f not in _FLAGS for f in flags):
            raise PathContractError(f"flags must be {dim} entries from {_FLAGS}")
        if times.size:
            if times[0] < 0 or times[-1] > horizon:
                raise PathContractError("jump times must lie in [0, horizon]")
            if np.any(np.diff(times) <= 0):
                raise PathContractError("jump times must be strictly increasing (merge ties first)")
        for j, flag in enumerate(flags):
            if flag and np.any(sizes[:, j] < 0):
                raise PathContractError(f"coordinate {j} is {flag} but has a negative jump")
            if flag == NONDECREASING and drift[j] < 0:
                raise PathContractError(f"coordinate {j} is nondecreasing but has negative drift")
            if flag == RUNNING_MAX and drift[j] != 0:
                raise PathContractError(f"coordinate {j} is running-max but has nonzero drift")

        if self.levels is None:
            levels = np.vstack([init, init + np.cumsum(sizes, axis=0)])
        else:
            levels = np.asarray(self.levels, dtype=float).reshape(times.shape[0] + 1, dim).copy()
            if not np.array_equal(levels[0], init):
                raise PathContractError("levels[0] must equal the initial value")
        for arr in (init, times, sizes, drift, levels):
            arr.setflags(write=False)
        object.__setattr__(self, "initial_value", init)
        object.__setattr__(self, "jump_times", times)
        object.__setattr__(self, "jump_sizes", sizes)
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "horizon", horizon)
        object.__setattr__(self, "flags", flags)
        object.__setattr__(self, "levels", levels)

    @property
    def dim(self) -> int:
        return self.initial_value.shape[0]

    @property
    def n_jumps(self) -> int:
        return self.jump_times.shape[0]

    def has_drift(self) -> bool:
        return bool(np.any(self.drift != 0))

    def coordinate(self, coord: int) -> "CadlagPath":
        """One-coordinate view of the path."""
        return CadlagPath(
            self.initial_value[[coord]], self.jump_times, self.jump_sizes[:, [coord]],
            self.drift[[coord]], self.horizon, (self.flags[coord],), self.levels[:, [coord]],
        )

    def __call__(self, t: ArrayLike) -> NDArray[np.float64]:
        return evaluate(self, t)


def step_path(times: ArrayLike, sizes: ArrayLike, horizon: float, initial: ArrayLike | None = None,
              drift: ArrayLike | None = None, flags: Sequence[str] | None = None) -> CadlagPath:
    """Build a path from possibly unsorted events, merging coincident times.

    Coincident jumps are summed; this is the builder-side merge that the
    path type itself refuses to do.
    """
    times = np.asarray(times, dtype=float).reshape(-1)
    sizes = np.asarray(sizes, dtype=float)
    if sizes.ndim == 1:
        sizes = sizes.reshape(times.shape[0], -1) if times.size else sizes.reshape(0, 1)
    dim = sizes.shape[1] if sizes.size else (len(np.atleast_1d(initial)) if initial is not None else 1)
    sizes = sizes.reshape(times.shape[0], dim)
    order = np.argsort(times, kind="stable")
    times, sizes = times[order], sizes[order]
    uniq, inverse = np.unique(times, return_inverse=True)
    if uniq.shape[0] != times.shape[0]:
        merged = np.zeros((uniq.shape[0], dim))
        np.add.at(merged, inverse, sizes)
        times, sizes = uniq, merged
    init = np.zeros(dim) if initial is None else initial
    return CadlagPath(init, times, sizes, drift, horizon, tuple(flags) if flags else ())


def _check_time(path: CadlagPath, t: NDArray[np.float64], lower_open: bool = False) -> None:
    if lower_open:
        bad = (t <= 0) | (t > path.horizon)
    else:
        bad = (t < 0) | (t > path.horizon)
    if np.any(bad) or np.any(np.isnan(t)):
        raise PathDomainError(f"time outside the domain of a path with horizon {path.horizon}")


def evaluate(path: CadlagPath, t: ArrayLike) -> NDArray[np.float64]:
    """Right-continuous value; shape ``(dim,)`` for scalar t, ``(len(t), dim)`` otherwise."""
    ts = np.asarray(t, dtype=float)
    _check_time(path, ts)
    idx = np.searchsorted(path.jump_times, ts, side="right")
    val = path.levels[idx]
    if path.has_drift():
        val = val + np.multiply.outer(ts, path.drift)
    return val


def evaluate_left(path: CadlagPath, t: ArrayLike) -> NDArray[np.float64]:
    """Left limit x(t-); at t = 0 this is the initial value (a jump at 0 is excluded)."""
    ts = np.asarray(t, dtype=float)
    _check_time(path, ts)
    idx = np.searchsorted(path.jump_times, ts, side="left")
    val = path.levels[idx]
    if path.has_drift():
        val = val + np.multiply.outer(ts, path.drift)
    return val


def jump_at(path: CadlagPath, s: float) -> NDArray[np.float64]:
    s = float(s)
    _check_time(path, np.asarray(s), lower_open=True)
    i = int(np.searchsorted(path.jump_times, s, side="left"))
    if i < path.n_jumps and path.jump_times[i] == s:
        return path.jump_sizes[i].copy()
    return np.zeros(path.dim)


def max_jump(path: CadlagPath, t: float, coord: int = 0) -> float:
    """Largest recorded jump of one coordinate over (0, t]; 0 if none was recorded.

    Every recorded jump epoch counts, including epochs whose size is zero or
    negative, so the prelimit identity max_k xi_k = max_k gamma_k holds for
    real-valued marks and not only nonnegative ones.
    """
    t = float(t)
    _check_time(path, np.asarray(t), lower_open=True)
    if not 0 <= coord < path.dim:
        raise PathDomainError(f"coordinate {coord} does not exist")
    lo = int(np.searchsorted(path.jump_times, 0.0, side="right"))
    hi = int(np.searchsorted(path.jump_times, t, side="right"))
    if hi <= lo:
        return 0.0
    return float(path.jump_sizes[lo:hi, coord].max())


@dataclass(frozen=True)
class InverseResult:
    """Generalized inverse values with per-level status flags."""

    time: NDArray[np.float64]
    empty: NDArray[np.bool_]
    truncated: NDArray[np.bool_]

    def scalar(self) -> tuple[float, bool, bool]:
        return float(self.time.reshape(-1)[0]), bool(self.empty.reshape(-1)[0]), bool(self.truncated.reshape(-1)[0])


def _segments(path: CadlagPath, coord: int):
    """Breakpoints, base levels and start values of a coordinate, without a jump at 0."""
    times = path.jump_times
    base = path.levels[:, coord]
    if times.size and times[0] == 0:
        times, base = times[1:], base[1:]
    starts = np.concatenate([[0.0], times])
    ends = np.concatenate([times, [path.horizon]])
    return starts, ends, base


def generalized_inverse(path: CadlagPath, t: ArrayLike, coord: int = 0) -> InverseResult:
    """sup{s in [0, horizon] : x(s) <= t} for a nondecreasing coordinate.

    A level below x(0) gives time 0 with the ``empty`` flag; a level never
    exceeded gives the horizon with the ``truncated`` flag.
    """
    if path.flags[coord] not in (NONDECREASING, RUNNING_MAX):
        raise PathContractError(f"coordinate {coord} is not flagged nondecreasing")
    level = np.asarray(t, dtype=float)
    starts, ends, base = _segments(path, coord)
    slope = path.drift[coord]
    start_val = base + slope * starts
    k = np.searchsorted(start_val, level, side="right") - 1
    empty = k < 0
    kk = np.clip(k, 0, None)
    out = ends[kk].copy() if np.ndim(kk) else np.asarray(ends[kk], dtype=float)
    if slope > 0:
        cross = (level - base[kk]) / slope
        out = np.minimum(out, cross)
    last = start_val.shape[0] - 1
    truncated = (kk == last) & ~empty
    if slope > 0:
        truncated &= (level - base[kk]) / slope >= path.horizon
    out = np.where(empty, 0.0, np.minimum(out, path.horizon))
    return InverseResult(np.asarray(out, dtype=float), np.asarray(empty), np.asarray(truncated))


def compose(outer: CadlagPath, stopping: CadlagPath) -> CadlagPath:
    """The path t -> outer(stopping(t)) on the stopping path's horizon.

    Jumps come from two sources: jumps of the stopping path and, when the
    stopping path has positive drift, the moments it passes a jump time of
    the outer path.
    """
    if stopping.dim != 1 or stopping.flags[0] not in (NONDECREASING, RUNNING_MAX):
        raise PathContractError("stopping path must be one nondecreasing coordinate")
    lo_val = float(evaluate(stopping, 0.0)[0])
    hi_val = float(evaluate(stopping, stopping.horizon)[0])
    if lo_val < 0 or hi_val > outer.horizon:
        raise PathDomainError("stopping path leaves the domain of the outer path")

    slope = float(stopping.drift[0])
    s_times = stopping.jump_times[stopping.jump_times > 0]
    cand_t = [s_times]
    cand_arg = [evaluate(stopping, s_times)[:, 0]]
    cand_cross = [np.zeros(s_times.shape[0], dtype=bool)]
    if slope > 0 and outer.n_jumps:
        starts, ends, base = _segments(stopping, 0)
        seg_lo = base + slope * starts
        seg_hi = base + slope * ends
        first = np.searchsorted(outer.jump_times, seg_lo, side="right")
        last = np.searchsorted(outer.jump_times, seg_hi, side="left")
        last[-1] = np.searchsorted(outer.jump_times, seg_hi[-1], side="right")
        counts = np.clip(last - first, 0, None)
        if counts.sum():
            seg = np.repeat(np.arange(counts.shape[0]), counts)
            offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
            j = first[seg] + offs
            tj = outer.jump_times[j]
            tc = (tj - base[seg]) / slope
            keep = (tc > starts[seg]) & ((tc < ends[seg]) | (seg == counts.shape[0] - 1)) & (tc > 0)
            keep &= tc <= stopping.horizon
            cand_t.append(tc[keep])
            cand_arg.append(tj[keep])
            cand_cross.append(np.ones(int(keep.sum()), dtype=bool))
    t_all = np.concatenate(cand_t)
    arg_all = np.concatenate(cand_arg)
    cross_all = np.concatenate(cand_cross)
    order = np.argsort(t_all, kind="stable")
    t_all, arg_all, cross_all = t_all[order], arg_all[order], cross_all[order]
    if t_all.size:
        uniq = np.concatenate([[True], np.diff(t_all) > 0])
        t_all, arg_all, cross_all = t_all[uniq], arg_all[uniq], cross_all[uniq]

    value = evaluate(outer, arg_all) if t_all.size else np.zeros((0, outer.dim))
    arg_left = evaluate_left(stopping, t_all)[:, 0] if t_all.size else np.zeros(0)
    arg_left = np.where(cross_all, arg_all, arg_left)
    left = evaluate_left(outer, arg_left) if slope > 0 else evaluate(outer, arg_left)
    if t_all.size:
        left = left.reshape(-1, outer.dim)
    drift = outer.drift * slope
    sizes = value - left
    keep = np.any(sizes != 0, axis=1) if t_all.size else np.zeros(0, dtype=bool)
    init = evaluate(outer, lo_val)
    levels = np.vstack([init, value[keep] - np.multiply.outer(t_all[keep], drift)])
    flags = []
    for j, f in enumerate(outer.flags):
        if f == RUNNING_MAX and drift[j] == 0:
            flags.append(RUNNING_MAX)
        elif f:
            flags.append(NONDECREASING)
        else:
            flags.append("")
    return CadlagPath(init, t_all[keep], sizes[keep], drift, stopping.horizon, tuple(flags), levels)


def _window_segments(path: CadlagPath, T: float, T2: float, coords: Sequence[int]):
    inside = (path.jump_times > T) & (path.jump_times <= T2)
    starts = np.concatenate([[T], path.jump_times[inside]])
    ends = np.concatenate([starts[1:], [T2]])
    k0 = int(np.searchsorted(path.jump_times, T, side="right"))
    levels = path.levels[k0:k0 + starts.shape[0]][:, list(coords)]
    return starts, ends, levels


def _check_window(path: CadlagPath, c: float, T: float, T2: float) -> None:
    if not (0 < T < T2 <= path.horizon) or c <= 0:
        raise PathDomainError("need 0 < T < T2 <= horizon and c > 0")


def modulus_U(path: CadlagPath, c: float, T: float, T2: float, coord_set: Sequence[int] | None = None) -> float:
    """sup |x(t') - x(t'')| over T <= t' <= t'' <= T2 with t'' - t' <= c.

    Exact for step-plus-drift paths: for a fixed pair of constancy
    intervals the increment is affine in the lag, so its norm peaks at an
    end of the feasible lag range.
    """
    _check_window(path, c, T, T2)
    coords = list(range(path.dim)) if coord_set is None else list(coord_set)
    starts, ends, lv = _window_segments(path, T, T2, coords)
    drift = path.drift[coords]
    k = starts.shape[0]
    best = float(np.linalg.norm(drift) * min(c, (ends - starts).max()))
    for d in range(1, k):
        gap = starts[d:] - ends[:k - d]
        ok = gap < c
        if not ok.any():
            break
        diff = lv[d:][ok] - lv[:k - d][ok]
        hmin = gap[ok]
        hmax = np.minimum(c, ends[d:][ok] - starts[:k - d][ok])
        a = np.linalg.norm(diff + np.multiply.outer(hmin, drift), axis=1)
        b = np.linalg.norm(diff + np.multiply.outer(hmax, drift), axis=1)
        best = max(best, float(a.max()), float(b.max()))
    return best


def _sparse_table(x: NDArray[np.float64], op) -> list[NDArray[np.float64]]:
    table = [x]
    width = 1
    while 2 * width <= x.shape[0]:
        prev = table[-1]
        table.append(op(prev[:-width], prev[width:]))
        width *= 2
    return table


def _range_query(table, lo: NDArray[np.intp], hi: NDArray[np.intp], op) -> NDArray[np.float64]:
    span = hi - lo + 1
    lev = np.floor(np.log2(span)).astype(int)
    out = np.empty(lo.shape[0])
    for L in np.unique(lev):
        m = lev == L
        t = table[L]
        out[m] = op(t[lo[m]], t[hi[m] - (1 << L) + 1])
    return out


def _range_far(levels: NDArray[np.float64], lo, hi, centre) -> NDArray[np.float64]:
    """Exact max_j |levels[j] - levels[centre]| over lo <= j <= hi, vectorized by offset."""
    out = np.zeros(lo.shape[0])
    width = int((hi - lo).max()) if lo.size else 0
    for d in range(width + 1):
        j = lo + d
        m = j <= hi
        if not m.any():
            break
        dist = np.linalg.norm(levels[j[m]] - levels[centre[m]], axis=1)
        out[m] = np.maximum(out[m], dist)
    return out


def modulus_J(path: CadlagPath, c: float, T: float, T2: float, coord_set: Sequence[int] | None = None,
              stop_at: float | None = None) -> float:
    """Two-sided oscillation modulus with the Euclidean norm over ``coord_set``.

    For pure step paths the objective is piecewise constant in the middle
    time, with breakpoints at jump times and jump times shifted by +-c, so
    evaluating those candidates is exact.  Drift paths use the same
    candidates plus a refinement grid of spacing c/64.

    With ``stop_at`` the result is only guaranteed to be on the correct side
    of that threshold, which lets cheap bounds settle most step paths.
    """
    _check_window(path, c, T, T2)
    coords = list(range(path.dim)) if coord_set is None else list(coord_set)
    jt = path.jump_times
    near = jt[(jt > T - c) & (jt <= T2 + c)]
    cand = np.concatenate([[T], near, near - c, near + c])
    cand = np.unique(cand[(cand >= T) & (cand <= T2)])
    if np.any(path.drift[coords] != 0):
        grid = np.linspace(T, T2, int(np.ceil((T2 - T) / (c / 64))) + 1)
        return _modulus_J_drift(path, c, T, T2, coords, np.unique(np.concatenate([cand, grid])))

    levels = path.levels[:, coords]
    k = np.searchsorted(jt, cand, side="right")
    jl = np.searchsorted(jt, np.maximum(T, cand - c), side="right")
    jr = np.searchsorted(jt, np.minimum(T2, cand + c), side="right")
    if np.all(jl == k) or np.all(jr == k):
        return 0.0
    lower = np.zeros(cand.shape[0])
    upper = np.zeros(cand.shape[0])
    lo_l = np.zeros(cand.shape[0])
    lo_r = np.zeros(cand.shape[0])
    up_l = np.zeros(cand.shape[0])
    up_r = np.zeros(cand.shape[0])
    for j in range(levels.shape[1]):
        col = levels[:, j]
        tmax = _sparse_table(col, np.maximum)
        tmin = _sparse_table(col, np.minimum)
        ctr = col[k]
        left = np.maximum(_range_query(tmax, jl, k, np.maximum) - ctr, ctr - _range_query(tmin, jl, k, np.minimum))
        right = np.maximum(_range_query(tmax, k, jr, np.maximum) - ctr, ctr - _range_query(tmin, k, jr, np.minimum))
        lo_l = np.maximum(lo_l, left)
        lo_r = np.maximum(lo_r, right)
        up_l += left ** 2
        up_r += right ** 2
    lower = np.minimum(lo_l, lo_r)
    upper = np.minimum(np.sqrt(up_l), np.sqrt(up_r))
    best = float(lower.max())
    live = upper > best
    if levels.shape[1] == 1 or not live.any():
        return best
    if stop_at is not None:
        if best >= stop_at:
            return best
        live &= upper >= stop_at
        if not live.any():
            return best
    idx = np.flatnonzero(live)
    left = _range_far(levels, jl[idx], k[idx], k[idx])
    right = _range_far(levels, k[idx], jr[idx], k[idx])
    return max(best, float(np.minimum(left, right).max()))


def _modulus_J_drift(path, c, T, T2, coords, cand) -> float:
    jt = path.jump_times

    def two_sided(t: float) -> float:
        # for fixed t each side is a max of norms of affine pieces, attained at piece ends
        xt = evaluate(path, t)[coords]
        a, b = max(T, t - c), min(T2, t + c)
        inner_l = jt[(jt > a) & (jt <= t)]
        pts_l = np.concatenate([[a], inner_l])
        vals_l = np.vstack([evaluate(path, pts_l)[:, coords],
                            evaluate_left(path, inner_l)[:, coords].reshape(-1, len(coords))])
        inner_r = jt[(jt > t) & (jt <= b)]
        pts_r = np.concatenate([inner_r, [b]])
        vals_r = np.vstack([evaluate(path, pts_r)[:, coords], evaluate_left(path, pts_r)[:, coords]])
        return float(min(np.linalg.norm(vals_l - xt, axis=1).max(), np.linalg.norm(vals_r - xt, axis=1).max()))

    vals = np.array([two_sided(t) for t in cand])
    best = float(vals.max(initial=0.0))
    # the grid only brackets interior optima; polish the best few cells
    breaks = np.unique(np.concatenate([jt, jt - c, jt + c, [T, T2]]))
    for i in np.argsort(vals)[::-1][:4]:
        for lo, hi in ((cand[max(i - 1, 0)], cand[i]), (cand[i], cand[min(i + 1, len(cand) - 1)])):
            if hi <= lo:
                continue
            inside = breaks[(breaks > lo) & (breaks < hi)]
            edges = np.concatenate([[lo], inside, [hi]])
            for l2, h2 in zip(edges[:-1], edges[1:]):
                res = optimize.minimize_scalar(lambda t: -two_sided(t), bounds=(l2, h2), method="bounded",
                                               options={"xatol": 1e-13})
                best = max(best, -float(res.fun), two_sided(np.nextafter(h2, l2)))
    return best


def min_jump_gap(path: CadlagPath, T: float, T2: float) -> float:
    """Smallest gap between consecutive nonzero jumps inside [T, T2]; T2 - T if fewer than two."""
    if not (0 <= T < T2):
        raise PathDomainError("need 0 <= T < T2")
    jt = path.jump_times
    real = np.any(path.jump_sizes != 0, axis=1)
    pts = jt[real & (jt >= T) & (jt <= T2)]
    if pts.shape[0] < 2:
        return float(T2 - T)
    return float(np.diff(pts).min())


# serialization -------------------------------------------------------------

def path_to_text(path: CadlagPath) -> str:
    """JSON header line (prefixed with '#') followed by one CSV row per jump.

    Rows carry the post-jump levels as well as the sizes so that exact
    levels (running maxima) survive the round trip bit for bit.
    """
    header = {
        "dim": path.dim,
        "initial": [_fmt(v) for v in path.initial_value],
        "drift": [_fmt(v) for v in path.drift],
        "horizon": _fmt(path.horizon),
        "flags": list(path.flags),
    }
    buf = io.StringIO()
    buf.write("# " + json.dumps(header, sort_keys=True) + "\n")
    cols = ["time"] + [f"size_{j + 1}" for j in range(path.dim)] + [f"level_{j + 1}" for j in range(path.dim)]
    buf.write(",".join(cols) + "\n")
    for i in range(path.n_jumps):
        row = [path.jump_times[i], *path.jump_sizes[i], *path.levels[i + 1]]
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def path_from_text(text: str) -> CadlagPath:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError("missing JSON header line")
    header = json.loads(lines[0][1:])
    dim = int(header["dim"])
    init = np.array([float(v) for v in header["initial"]])
    rows = [ln for ln in lines[2:] if ln.strip()]
    data = np.array([[float(v) for v in ln.split(",")] for ln in rows]).reshape(len(rows), 1 + 2 * dim)
    levels = np.vstack([init, data[:, 1 + dim:]])
    return CadlagPath(init, data[:, 0], data[:, 1:1 + dim], np.array([float(v) for v in header["drift"]]),
                      float(header["horizon"]), tuple(header["flags"]), levels)


def save_path(path: CadlagPath, filename) -> None:
    with open(filename, "w", newline="\n") as fh:
        fh.write(path_to_text(path))


def load_path(filename) -> CadlagPath:
    with open(filename) as fh:
        return path_from_text(fh.read())
