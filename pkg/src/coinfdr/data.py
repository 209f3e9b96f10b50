"""Containers for summary-level and individual-level data."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class SummaryStat(NamedTuple):
    id: object
    x: float
    s2: float


@dataclass(eq=False)
class SummaryData:
    """Paired statistics (X_i, S_i^2) sharing ``nu`` degrees of freedom."""

    x: np.ndarray
    s2: np.ndarray
    nu: int
    ids: np.ndarray | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).ravel()
        self.s2 = np.asarray(self.s2, dtype=float).ravel()
        if self.x.shape != self.s2.shape:
            raise ValueError("x and s2 must have the same length")
        if int(self.nu) != self.nu or self.nu < 1:
            raise ValueError(f"nu must be a positive integer, got {self.nu}")
        self.nu = int(self.nu)
        if self.ids is None:
            self.ids = np.arange(self.x.size)
        else:
            self.ids = np.asarray(self.ids)
            if self.ids.shape != self.x.shape:
                raise ValueError("ids must match the data length")

    @classmethod
    def from_records(cls, records, nu) -> "SummaryData":
        records = list(records)
        return cls(
            np.array([r.x for r in records], dtype=float),
            np.array([r.s2 for r in records], dtype=float),
            nu,
            np.array([r.id for r in records]),
        )

    def records(self) -> list[SummaryStat]:
        return [SummaryStat(i, float(a), float(b)) for i, a, b in zip(self.ids, self.x, self.s2)]

    def subset(self, index) -> "SummaryData":
        return SummaryData(self.x[index], self.s2[index], self.nu, self.ids[index])

    def __len__(self) -> int:
        return self.x.size


@dataclass(eq=False)
class RawMatrix:
    """m x n individual-level data; rows are features, columns samples.

    For the two-group design the first ``group_sizes[0]`` columns belong to
    group A (treatment) and the rest to group B (control).
    """

    values: np.ndarray
    design: str = "two-group"
    group_sizes: tuple | None = None
    ids: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        m, n = self.values.shape
        if m < 1:
            raise ValueError("raw matrix needs at least one row")
        if self.design not in ("one-group", "two-group"):
            raise ValueError(f"unknown design {self.design!r}")
        if self.design == "two-group":
            if self.group_sizes is None or len(self.group_sizes) != 2:
                raise ValueError("two-group design requires group_sizes=(n1, n2)")
            n1, n2 = map(int, self.group_sizes)
            if n1 + n2 != n or n1 < 0 or n2 < 0:
                raise ValueError(f"group sizes {n1}+{n2} do not match {n} columns")
            self.group_sizes = (n1, n2)
        else:
            self.group_sizes = (n,)
        if self.ids is None:
            self.ids = np.arange(m)
        else:
            self.ids = np.asarray(self.ids)

    @property
    def shape(self):
        return self.values.shape
