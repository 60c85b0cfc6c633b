"""Sample sources with a one-pass ``read(n)`` interface.

A stream hands out consecutive samples and never rewinds.  ``read(n)`` returns
at most ``n`` samples; a shorter (possibly empty) result means the source is
exhausted.  Real-valued sources return ``numpy`` arrays, lifted sources
return lists of :class:`~kstester.reference.LiftedValue`.
"""

from __future__ import annotations

from typing import Iterable, Iterator

import numpy as np

__all__ = ["ModelStream", "ArrayStream", "IterStream", "InstrumentedStream", "as_stream"]


class ModelStream:
    """Endless i.i.d. samples from a model, driven by one owned generator."""

    def __init__(self, model, rng: np.random.Generator | int | None = None):
        self.model = model
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self.position = 0

    def read(self, n: int):
        out = self.model.sample(self.rng, size=n)
        self.position += n
        return out


class ArrayStream:
    """A finite, already materialised sequence of samples."""

    def __init__(self, values):
        if isinstance(values, list) and values and isinstance(values[0], tuple):
            self._values = values
        else:
            self._values = np.asarray(values, dtype=float)
        self.position = 0

    def read(self, n: int):
        out = self._values[self.position : self.position + n]
        self.position += len(out)
        return out


class IterStream:
    """Adapt any iterator of real samples; values are pulled lazily."""

    def __init__(self, iterable: Iterable[float]):
        self._it: Iterator[float] = iter(iterable)
        self.position = 0

    def read(self, n: int):
        buf = []
        for x in self._it:
            buf.append(x)
            if len(buf) == n:
                break
        self.position += len(buf)
        if buf and isinstance(buf[0], tuple):
            return buf
        return np.asarray(buf, dtype=float)


class InstrumentedStream:
    """Wraps a stream and records every fetch by absolute sample index.

    Indices come from the wrapped stream's ``position`` before each read, so
    a consumer that rewound the source would show up as a count above one.
    """

    def __init__(self, inner):
        self.inner = inner
        self.fetched = 0
        self.reads = 0
        self._counts = np.zeros(0, dtype=np.int64)
        self._extent = 0  # one past the highest index fetched

    def read(self, n: int):
        start = getattr(self.inner, "position", self.fetched)
        out = self.inner.read(n)
        k = len(out)
        if start + k > self._counts.size:
            grown = np.zeros(max(start + k, 2 * self._counts.size), dtype=np.int64)
            grown[: self._counts.size] = self._counts
            self._counts = grown
        self._counts[start : start + k] += 1
        self._extent = max(self._extent, start + k)
        self.fetched += k
        self.reads += 1
        return out

    @property
    def fetch_counts(self) -> np.ndarray:
        """Fetch count per absolute index, up to the highest index seen."""
        return self._counts[: self._extent]

    @property
    def distinct_fetched(self) -> int:
        return int(np.count_nonzero(self.fetch_counts))

    @property
    def rereads(self) -> int:
        return int(np.sum(np.maximum(self.fetch_counts - 1, 0)))


def as_stream(source):
    """Coerce arrays, lists and iterators to an object with ``read(n)``."""
    if hasattr(source, "read") and callable(source.read):
        return source
    if isinstance(source, (np.ndarray, list, tuple)):
        return ArrayStream(list(source) if isinstance(source, tuple) else source)
    return IterStream(source)
