"""Maximize F_q over interaction time and sweep environment parameters.

F_q(t) oscillates at the per-class frequencies 2 eta_n, so the maximum is
located on a dense grid first and only then polished by golden-section
search inside the bracket around the best grid sample.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .model import ClassArrays, ModelSpec, enumerate_classes
from .qfi import ParamSelector, qfi_curve

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
CROSSOVER_RESOLUTION = 1e-3
PIPELINES = {"corr": True, "unc": False}


class OptimizationError(ArithmeticError):
    """Too many grid points were undefined to trust the time optimum."""


@dataclass(frozen=True)
class TimeWindow:
    t_min: float = 1e-3
    t_max: float = 20.0
    n_grid: int = 512

    def __post_init__(self):
        if not (self.t_min > 0):
            raise ValueError(f"t_min: must be > 0, got {self.t_min}")
        if not (self.t_max > self.t_min):
            raise ValueError(f"t_max: must exceed t_min ({self.t_min}), got {self.t_max}")
        if int(self.n_grid) != self.n_grid or self.n_grid < 16:
            raise ValueError(f"n_grid: must be an integer >= 16, got {self.n_grid}")

    def grid(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, int(self.n_grid))


@dataclass(frozen=True)
class TimeOptimum:
    t_star: float
    fq_star: float
    monotone: bool = False
    n_excluded: int = 0


def golden_section_max(func: Callable[[float], float], a: float, b: float, tol: float):
    """Maximize a unimodal ``func`` on [a, b]; returns the best (t, f) seen.

    The final bracket midpoint is always evaluated, so the returned point lies
    within tol/2 of the maximizer of a unimodal function.
    """
    best_t, best_f = a, -math.inf

    def probe(x):
        nonlocal best_t, best_f
        fx = func(x)
        if not math.isfinite(fx):
            fx = -math.inf
        if fx > best_f or (fx == best_f and x < best_t):
            best_t, best_f = x, fx
        return fx

    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = probe(c), probe(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = probe(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = probe(d)
    probe(0.5 * (a + b))
    return best_t, best_f


def maximize_on_window(objective: Callable[[np.ndarray], np.ndarray], window: TimeWindow) -> TimeOptimum:
    """Grid scan followed by golden-section refinement around the best sample.

    ``objective`` maps an array of times to values; NaN marks an excluded
    time.  Ties go to the earliest time.  A non-decreasing grid whose
    maximum sits at ``t_max`` is reported as a boundary optimum with
    ``monotone=True``.
    """
    grid = window.grid()
    values = np.asarray(objective(grid), dtype=float)
    finite = np.isfinite(values)
    n_excluded = int(np.count_nonzero(~finite))
    if n_excluded > 0.5 * len(grid):
        raise OptimizationError(
            f"{n_excluded} of {len(grid)} time points undefined (coherence collapse)"
        )
    scan = np.where(finite, values, -np.inf)
    i = int(np.argmax(scan))
    best_t, best_f = float(grid[i]), float(scan[i])

    last = len(grid) - 1
    if i == last and np.all(np.diff(values[finite]) >= 0):
        return TimeOptimum(float(grid[last]), best_f, monotone=True, n_excluded=n_excluded)

    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, last)]
    t_ref, f_ref = golden_section_max(
        lambda t: float(objective(np.array([t]))[0]), float(lo), float(hi), 1e-6 * window.t_max
    )
    if f_ref > best_f:
        best_t, best_f = t_ref, f_ref
    return TimeOptimum(best_t, best_f, monotone=False, n_excluded=n_excluded)


def optimize_over_time(
    spec: ModelSpec,
    sel: ParamSelector,
    window: TimeWindow = TimeWindow(),
    correlated: bool = True,
    classes=None,
    derivative: str = "finite_difference",
) -> TimeOptimum:
    """Optimal interaction time and the QFI reached there."""
    if classes is None:
        classes = enumerate_classes(spec)
    arrays = classes if isinstance(classes, ClassArrays) else ClassArrays.from_classes(classes)
    return maximize_on_window(
        lambda times: qfi_curve(spec, sel, times, correlated, arrays, derivative=derivative),
        window,
    )


@dataclass
class SweepRow:
    value: float
    optima: dict = field(default_factory=dict)  # pipeline name -> TimeOptimum
    error: str | None = None


@dataclass
class SweepResult:
    parameter: str
    rows: list
    crossovers: list
    pipelines: tuple

    def column(self, pipeline: str, attr: str) -> np.ndarray:
        return np.array(
            [getattr(r.optima[pipeline], attr) if pipeline in r.optima else np.nan for r in self.rows]
        )

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.rows])


def _optimal_gap(spec, which, value, window, arrays, derivative):
    sel = ParamSelector(which, value)
    point = sel.apply(spec)
    fc = optimize_over_time(point, sel, window, True, arrays, derivative).fq_star
    fu = optimize_over_time(point, sel, window, False, arrays, derivative).fq_star
    return fc - fu


def locate_crossover(spec, which, lo, hi, window, arrays=None, derivative="finite_difference",
                     resolution=CROSSOVER_RESOLUTION, gap_lo=None, gap_hi=None):
    """Bisect a sign change of F_opt(corr) - F_opt(unc) between lo and hi."""
    if arrays is None:
        arrays = ClassArrays.from_classes(enumerate_classes(spec))
    if gap_lo is None:
        gap_lo = _optimal_gap(spec, which, lo, window, arrays, derivative)
    if gap_hi is None:
        gap_hi = _optimal_gap(spec, which, hi, window, arrays, derivative)
    if gap_lo == 0.0:
        return lo
    if gap_hi == 0.0:
        return hi
    if np.sign(gap_lo) == np.sign(gap_hi):
        raise ValueError(f"no sign change of the optimal-QFI gap on [{lo}, {hi}]")
    while hi - lo >= resolution:
        mid = 0.5 * (lo + hi)
        gap_mid = _optimal_gap(spec, which, mid, window, arrays, derivative)
        if gap_mid == 0.0:
            return mid
        if np.sign(gap_mid) == np.sign(gap_lo):
            lo, gap_lo = mid, gap_mid
        else:
            hi, gap_hi = mid, gap_mid
    return 0.5 * (lo + hi)


def sweep(
    spec_template: ModelSpec,
    which: str,
    values: Sequence[float],
    window: TimeWindow = TimeWindow(),
    pipelines: Sequence[str] = ("corr", "unc"),
    threads: int = 1,
    derivative: str = "finite_difference",
) -> SweepResult:
    """Time-optimal QFI for every parameter value and both preparations.

    Failures at one value are recorded on its row and the sweep carries on.
    Crossovers are reported only when both pipelines ran.
    """
    if len(values) < 2:
        raise ValueError("sweep values: need at least 2")
    for name in pipelines:
        if name not in PIPELINES:
            raise ValueError(f"pipeline: must be one of {tuple(PIPELINES)}, got {name!r}")
    arrays = ClassArrays.from_classes(enumerate_classes(spec_template))

    def one(value):
        row = SweepRow(value=float(value))
        try:
            sel = ParamSelector(which, float(value))
            point = sel.apply(spec_template)
            for name in pipelines:
                row.optima[name] = optimize_over_time(
                    point, sel, window, PIPELINES[name], arrays, derivative
                )
        except (ArithmeticError, ValueError) as exc:
            row.error = f"{type(exc).__name__}: {exc}"
        return row

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, values))
    else:
        rows = [one(v) for v in values]

    crossovers = []
    if "corr" in pipelines and "unc" in pipelines:
        for left, right in zip(rows, rows[1:]):
            if left.error or right.error:
                continue
            g_left = left.optima["corr"].fq_star - left.optima["unc"].fq_star
            g_right = right.optima["corr"].fq_star - right.optima["unc"].fq_star
            if g_left == 0.0:
                crossovers.append(left.value)
            elif g_left * g_right < 0:
                crossovers.append(
                    locate_crossover(
                        spec_template, which, left.value, right.value, window, arrays,
                        derivative, gap_lo=g_left, gap_hi=g_right,
                    )
                )
    return SweepResult(parameter=which, rows=rows, crossovers=crossovers, pipelines=tuple(pipelines))
