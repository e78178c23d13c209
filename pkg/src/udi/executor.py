"""Plan execution over the store, restricted to the current visibility.

Execution is pure: the same plan, store, and visibility always produce the
same ResultTable. Aggregates ignore missing cells (an empty group yields a
missing cell, never an error) and bins are computed over the unfiltered
extent of a field so brushing never moves the axis it draws on.
"""

from __future__ import annotations

from dataclasses import dataclass

from .filters import VisibilityMap
from .grammar import (
    AggregateStep,
    BinStep,
    FilterStep,
    JoinStep,
    LimitStep,
    OrderStep,
    Plan,
)
from .store import DatasetStore, FieldSummary, summary_for


@dataclass(frozen=True)
class ResultTable:
    """Render-ready output of one plan execution."""

    columns: tuple[tuple[str, str], ...]  # (name, kind)
    rows: tuple[tuple, ...]
    total_row_count: int
    filter_version: int

    def to_wire(self) -> dict:
        return {
            "columns": [{"name": n, "kind": k} for n, k in self.columns],
            "rows": [list(r) for r in self.rows],
            "total_row_count": self.total_row_count,
            "filter_version": self.filter_version,
        }


def _fmt(v: float) -> str:
    return format(v, "g")


def bin_bounds(summary: FieldSummary, bin_count: int) -> list[tuple[float, float]]:
    """Equal-width bins over the unfiltered observed extent.

    All bins are half-open [lo, hi) except the last, which is closed so the
    maximum lands in a bin. A degenerate extent yields one [min, min] bin.
    """
    lo, hi = summary.min, summary.max
    if lo is None or hi is None or lo == hi:
        v = 0 if lo is None else lo
        return [(v, v)]
    width = (hi - lo) / bin_count
    bounds = []
    for i in range(bin_count):
        b_lo = lo + i * width
        b_hi = hi if i == bin_count - 1 else lo + (i + 1) * width
        bounds.append((b_lo, b_hi))
    return bounds


def bin_label(bounds: list[tuple[float, float]], index: int) -> str:
    lo, hi = bounds[index]
    close = "]" if index == len(bounds) - 1 else ")"
    return f"[{_fmt(lo)},{_fmt(hi)}{close}"


def _bin_index(value: float, bounds: list[tuple[float, float]]) -> int:
    n = len(bounds)
    if n == 1:
        return 0
    lo = bounds[0][0]
    hi = bounds[-1][1]
    idx = int((value - lo) * n / (hi - lo))
    idx = max(0, min(n - 1, idx))
    while idx > 0 and value < bounds[idx][0]:
        idx -= 1
    while idx < n - 1 and value >= bounds[idx][1]:
        idx += 1
    return idx


class _Frame:
    """Mutable column-major working set during plan execution."""

    def __init__(self, names: list[str], columns: dict[str, list]):
        self.names = names
        self.columns = columns
        # per-column explicit value order (bin labels sort by bin, not text)
        self.orderings: dict[str, dict] = {}

    @property
    def nrows(self) -> int:
        return len(self.columns[self.names[0]]) if self.names else 0

    def take(self, indexes: list[int]) -> None:
        for name in self.names:
            col = self.columns[name]
            self.columns[name] = [col[i] for i in indexes]


def _base_frame(plan: Plan, store: DatasetStore, visibility: VisibilityMap) -> _Frame:
    table = store.table(plan.base_entity)
    visible = visibility.visible[plan.base_entity]
    indexes = [i for i, key in enumerate(table.row_keys) if key in visible]
    names = list(table.entity.field_names())
    columns = {name: [table.columns[name][i] for i in indexes] for name in names}
    return _Frame(names, columns)


def _run_filter(frame: _Frame, step: FilterStep) -> None:
    col = frame.columns[step.column]
    if step.op == "eq":
        keep = [i for i, v in enumerate(col) if v is not None and v == step.operand]
    elif step.op == "in":
        allowed = set(step.operand)
        keep = [i for i, v in enumerate(col) if v is not None and v in allowed]
    else:
        lo, hi = step.operand
        keep = [i for i, v in enumerate(col) if v is not None and lo <= v <= hi]
    frame.take(keep)


def _run_join(frame: _Frame, step: JoinStep, store: DatasetStore,
              visibility: VisibilityMap) -> _Frame:
    for old, new in step.renames:
        frame.columns[new] = frame.columns.pop(old)
        frame.names[frame.names.index(old)] = new
        if old in frame.orderings:
            frame.orderings[new] = frame.orderings.pop(old)

    table = store.table(step.incoming_entity)
    visible = visibility.visible[step.incoming_entity]
    in_rows = [i for i, key in enumerate(table.row_keys) if key in visible]

    if step.incoming_is_child:
        by_key: dict = {}
        fk_col = table.columns[step.foreign_key]
        for i in in_rows:
            fk = fk_col[i]
            if fk is not None:
                by_key.setdefault(fk, []).append(i)
    else:
        key_col = table.row_keys
        by_key = {key_col[i]: [i] for i in in_rows}

    pipe_col = frame.columns[step.pipeline_key_column]
    left_idx: list[int] = []
    right_idx: list[int] = []
    for i, v in enumerate(pipe_col):
        if v is None:
            continue
        for j in by_key.get(v, ()):
            left_idx.append(i)
            right_idx.append(j)

    names = list(frame.names)
    columns = {name: [frame.columns[name][i] for i in left_idx] for name in names}
    for col_name, field in step.incoming_columns:
        src = table.columns[field]
        columns[col_name] = [src[j] for j in right_idx]
        names.append(col_name)
    out = _Frame(names, columns)
    out.orderings = dict(frame.orderings)
    return out


def _run_bin(frame: _Frame, step: BinStep, store: DatasetStore) -> None:
    summary = summary_for(store, step.entity, step.field, cardinality_cap=0)
    bounds = bin_bounds(summary, step.bin_count)
    labels = [bin_label(bounds, i) for i in range(len(bounds))]
    col = frame.columns[step.column]
    frame.columns[step.output] = [
        None if v is None else labels[_bin_index(v, bounds)] for v in col
    ]
    frame.names.append(step.output)
    frame.orderings[step.output] = {label: i for i, label in enumerate(labels)}


def _aggregate(values: list, op: str):
    present = [v for v in values if v is not None]
    if op == "count":
        return len(values)
    if not present:
        return None
    if op == "sum":
        return sum(present)
    if op == "mean":
        return sum(present) / len(present)
    if op == "min":
        return min(present)
    return max(present)


def _run_aggregate(frame: _Frame, step: AggregateStep) -> _Frame:
    group_cols = [frame.columns[name] for name in step.group_columns]
    groups: dict[tuple, list[int]] = {}
    if step.group_columns:
        for i in range(frame.nrows):
            key = tuple(col[i] for col in group_cols)
            if any(v is None for v in key):
                continue
            groups.setdefault(key, []).append(i)
        ranks = [frame.orderings.get(name) for name in step.group_columns]
        ordered = sorted(
            groups,
            key=lambda key: tuple(
                rank[v] if rank is not None else v for rank, v in zip(ranks, key)
            ),
        )
    else:
        groups[()] = list(range(frame.nrows))
        ordered = [()]

    names = list(step.group_columns) + [name for name, _, _ in step.outputs]
    columns: dict[str, list] = {name: [] for name in names}
    for key in ordered:
        rows = groups[key]
        for name, value in zip(step.group_columns, key):
            columns[name].append(value)
        for name, op, source in step.outputs:
            values = [frame.columns[source][i] for i in rows] if source else rows
            columns[name].append(_aggregate(values, op))
    out = _Frame(names, columns)
    out.orderings = {
        name: frame.orderings[name]
        for name in step.group_columns if name in frame.orderings
    }
    return out


def _run_order(frame: _Frame, step: OrderStep) -> None:
    col = frame.columns[step.column]
    rank = frame.orderings.get(step.column)

    def key(i: int):
        v = col[i]
        if v is None:
            return (1, 0)
        return (0, rank[v] if rank is not None else v)

    indexes = sorted(range(frame.nrows), key=key, reverse=step.descending)
    if step.descending:
        # keep missing values last under either direction
        indexes = [i for i in indexes if col[i] is not None] + \
                  [i for i in indexes if col[i] is None]
    frame.take(indexes)


def execute(plan: Plan, store: DatasetStore, visibility: VisibilityMap) -> ResultTable:
    """Run a compiled plan over the visible rows of its entities."""
    frame = _base_frame(plan, store, visibility)
    pre_limit = frame.nrows
    last_was_limit = False
    for step in plan.steps:
        if isinstance(step, FilterStep):
            _run_filter(frame, step)
        elif isinstance(step, JoinStep):
            frame = _run_join(frame, step, store, visibility)
        elif isinstance(step, BinStep):
            _run_bin(frame, step, store)
        elif isinstance(step, AggregateStep):
            frame = _run_aggregate(frame, step)
        elif isinstance(step, OrderStep):
            _run_order(frame, step)
        elif isinstance(step, LimitStep):
            if not last_was_limit:
                pre_limit = frame.nrows
            if frame.nrows > step.n:
                frame.take(list(range(step.n)))
            last_was_limit = True
            continue
        last_was_limit = False

    total = pre_limit if last_was_limit else frame.nrows
    rows = tuple(
        tuple(frame.columns[name][i] for name in plan.project)
        for i in range(frame.nrows)
    )
    return ResultTable(plan.output_columns, rows, total, visibility.version)
