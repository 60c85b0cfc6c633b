"""Parsing of model descriptions and sample stream files."""

from __future__ import annotations

import json
import math
import os
import sys
from typing import Iterator, TextIO

import numpy as np

from ..reference import model_from_dict, uniform_unit, wedge_perturb


class ParseError(ValueError):
    def __init__(self, line: int, text: str, reason: str = "not a decimal number"):
        self.line = line
        self.text = text
        super().__init__(f"ParseError at line {line}: {reason}: {text!r}")


def parse_model_spec(spec: str):
    """Resolve a model from a JSON file path, inline JSON, or a shorthand.

    Shorthands: ``uniform-unit`` and ``wedge-perturbed:EPS[:CENTER]``.
    """
    spec = spec.strip()
    if spec.startswith("{"):
        return model_from_dict(json.loads(spec))
    if os.path.exists(spec):
        with open(spec, encoding="utf-8") as fh:
            return model_from_dict(json.load(fh))
    head, _, rest = spec.partition(":")
    if head == "uniform-unit" and not rest:
        return uniform_unit()
    if head in ("wedge-perturbed", "wedge") and rest:
        fields = rest.split(":")
        center = float(fields[1]) if len(fields) > 1 else 0.5
        return wedge_perturb(uniform_unit(), float(fields[0]), center)
    raise ValueError(f"unrecognised model spec {spec!r}")


def iter_samples(fh: TextIO) -> Iterator[float]:
    """Yield one float per non-blank line; ``#`` starts a comment."""
    for lineno, raw in enumerate(fh, start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        try:
            x = float(text)
        except ValueError:
            raise ParseError(lineno, text) from None
        if math.isnan(x):
            raise ParseError(lineno, text, "NaN is not an ordered value")
        yield x


class FileStream:
    """One-pass stream over a sample file (``-`` reads standard input)."""

    def __init__(self, path: str):
        self.path = path
        self._fh = sys.stdin if path == "-" else open(path, encoding="utf-8")
        self._it = iter_samples(self._fh)
        self.position = 0

    def read(self, n: int) -> np.ndarray:
        buf = []
        for x in self._it:
            buf.append(x)
            if len(buf) == n:
                break
        self.position += len(buf)
        return np.asarray(buf, dtype=float)

    def read_all(self) -> np.ndarray:
        out = np.fromiter(self._it, dtype=float)
        self.position += out.size
        return out

    def close(self) -> None:
        if self._fh is not sys.stdin:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
