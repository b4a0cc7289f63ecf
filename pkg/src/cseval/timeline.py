"""Integer-millisecond interval algebra.

Every span is half-open ``[start, end)``.  A :class:`SpanSet` is kept in
canonical form: sorted, pairwise disjoint, with touching spans merged, so two
sets describing the same instants always compare equal.
"""

from __future__ import annotations

import bisect
import heapq
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping


class MalformedIntervalError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Interval:
    start: int
    end: int

    def __post_init__(self):
        if not isinstance(self.start, int) or not isinstance(self.end, int):
            raise MalformedIntervalError(f"interval bounds must be integers: {self!r}")
        if self.start < 0:
            raise MalformedIntervalError(f"negative start: {self!r}")
        if self.end < self.start:
            raise MalformedIntervalError(f"end before start: {self!r}")

    @property
    def duration(self) -> int:
        return self.end - self.start

    def __contains__(self, t: int) -> bool:
        return self.start <= t < self.end


def _as_interval(x) -> Interval:
    if isinstance(x, Interval):
        return x
    start, end = x
    return Interval(start, end)


@dataclass(frozen=True)
class SpanSet:
    """Canonical union of intervals.  Build through :func:`normalize`."""

    spans: tuple[Interval, ...] = ()

    @classmethod
    def of(cls, *spans) -> "SpanSet":
        return normalize(spans)

    @property
    def total_duration(self) -> int:
        return sum(s.end - s.start for s in self.spans)

    @property
    def starts(self) -> list[int]:
        return [s.start for s in self.spans]

    def __iter__(self) -> Iterator[Interval]:
        return iter(self.spans)

    def __len__(self) -> int:
        return len(self.spans)

    def __bool__(self) -> bool:
        return bool(self.spans)

    def __contains__(self, t: int) -> bool:
        i = bisect.bisect_right(self.starts, t) - 1
        return i >= 0 and t < self.spans[i].end

    def __and__(self, other: "SpanSet") -> "SpanSet":
        return intersect(self, other)

    def __or__(self, other: "SpanSet") -> "SpanSet":
        return union(self, other)

    def __sub__(self, other: "SpanSet") -> "SpanSet":
        return subtract(self, other)

    def as_tuples(self) -> list[tuple[int, int]]:
        return [(s.start, s.end) for s in self.spans]

    def boundaries(self) -> list[int]:
        out = []
        for s in self.spans:
            out.extend((s.start, s.end))
        return out


EMPTY = SpanSet()


def normalize(spans: Iterable) -> SpanSet:
    """Sort, merge overlapping and touching spans, drop empty ones.

    Accepts :class:`Interval` objects or ``(start, end)`` pairs.
    """
    items = sorted(_as_interval(s) for s in spans)
    merged: list[list[int]] = []
    for iv in items:
        if iv.start == iv.end:
            continue
        if merged and iv.start <= merged[-1][1]:
            if iv.end > merged[-1][1]:
                merged[-1][1] = iv.end
        else:
            merged.append([iv.start, iv.end])
    return SpanSet(tuple(Interval(s, e) for s, e in merged))


def union(a: SpanSet, b: SpanSet) -> SpanSet:
    return normalize(heapq.merge(a.spans, b.spans))


def intersect(a: SpanSet, b: SpanSet) -> SpanSet:
    out = []
    i = j = 0
    sa, sb = a.spans, b.spans
    while i < len(sa) and j < len(sb):
        lo = max(sa[i].start, sb[j].start)
        hi = min(sa[i].end, sb[j].end)
        if lo < hi:
            out.append(Interval(lo, hi))
        if sa[i].end < sb[j].end:
            i += 1
        else:
            j += 1
    return SpanSet(tuple(out))


def subtract(a: SpanSet, b: SpanSet) -> SpanSet:
    out = []
    j = 0
    sb = b.spans
    for span in a.spans:
        cur = span.start
        while j < len(sb) and sb[j].end <= cur:
            j += 1
        k = j
        while k < len(sb) and sb[k].start < span.end:
            if sb[k].start > cur:
                out.append(Interval(cur, sb[k].start))
            cur = max(cur, sb[k].end)
            k += 1
        if cur < span.end:
            out.append(Interval(cur, span.end))
    return SpanSet(tuple(out))


def dilate(a: SpanSet, left: int, right: int | None = None) -> SpanSet:
    """Grow every span outwards, clamping at zero."""
    right = left if right is None else right
    return normalize((max(0, s.start - left), s.end + right) for s in a.spans)


def active_labels_at(t: int, labeled: Mapping[str, SpanSet]) -> set[str]:
    return {label for label, spans in labeled.items() if t in spans}


def partition(labeled: Mapping[str, SpanSet]) -> Iterator[tuple[Interval, frozenset]]:
    """Split the covered time into elementary pieces with constant label sets.

    Yields ``(piece, labels)`` in time order for every piece where at least one
    label is active.  Adjacent pieces always differ in their label set.
    """
    events: dict[int, list[tuple[str, int]]] = {}
    for label, spans in labeled.items():
        for s in spans:
            events.setdefault(s.start, []).append((label, 1))
            events.setdefault(s.end, []).append((label, -1))
    active: dict[str, int] = {}
    prev_t = None
    for t in sorted(events):
        if prev_t is not None and active:
            yield Interval(prev_t, t), frozenset(active)
        for label, delta in events[t]:
            n = active.get(label, 0) + delta
            if n:
                active[label] = n
            else:
                active.pop(label, None)
        prev_t = t
