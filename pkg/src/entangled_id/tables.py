"""Dense tables over named discrete variables.

A :class:`Table` is a numpy array whose axes carry variable names.  Products
and ratios align axes by name and broadcast over the union of variables, so
factor algebra reads like the formulas it implements.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = ["Table"]


class Table:
    """Array with one named axis per variable.

    Parameters
    ----------
    variables:
        Axis names, one per array dimension, without repeats.
    values:
        Array whose ``ndim`` equals ``len(variables)``.
    """

    __slots__ = ("variables", "values")

    def __init__(self, variables: Sequence[str], values: np.ndarray):
        variables = tuple(variables)
        values = np.asarray(values, dtype=float)
        if values.ndim != len(variables):
            raise ValueError(f"{len(variables)} names for an array with {values.ndim} axes")
        if len(set(variables)) != len(variables):
            raise ValueError(f"repeated variable names in {variables}")
        self.variables = variables
        self.values = values

    # construction ----------------------------------------------------------

    @classmethod
    def scalar(cls, value: float) -> "Table":
        return cls((), np.asarray(float(value)))

    @classmethod
    def ones(cls, variables: Sequence[str], cards: Mapping[str, int]) -> "Table":
        return cls(variables, np.ones([cards[v] for v in variables]))

    # inspection ------------------------------------------------------------

    @property
    def cards(self) -> dict[str, int]:
        return dict(zip(self.variables, self.values.shape))

    def __repr__(self) -> str:
        return f"Table({self.variables}, shape={self.values.shape})"

    def item(self) -> float:
        if self.variables:
            raise ValueError("table is not a scalar")
        return float(self.values)

    def total(self) -> float:
        return float(self.values.sum())

    # axis handling ---------------------------------------------------------

    def transpose(self, order: Sequence[str]) -> "Table":
        order = tuple(order)
        if set(order) != set(self.variables) or len(order) != len(self.variables):
            raise ValueError(f"cannot reorder {self.variables} as {order}")
        perm = [self.variables.index(v) for v in order]
        return Table(order, np.transpose(self.values, perm))

    def expand(self, order: Sequence[str], cards: Mapping[str, int]) -> np.ndarray:
        """Values broadcast to the axes ``order`` (a superset of our variables)."""
        order = tuple(order)
        missing = [v for v in self.variables if v not in order]
        if missing:
            raise ValueError(f"cannot expand {self.variables} to {order}")
        mine = [v for v in order if v in self.variables]
        arr = self.transpose(mine).values
        shape = [cards[v] if v in self.variables else 1 for v in order]
        arr = arr.reshape(shape)
        return np.broadcast_to(arr, [cards[v] for v in order])

    def rename(self, mapping: Mapping[str, str]) -> "Table":
        return Table([mapping.get(v, v) for v in self.variables], self.values)

    # algebra ---------------------------------------------------------------

    def _aligned(self, other: "Table") -> tuple[tuple[str, ...], np.ndarray, np.ndarray]:
        order = self.variables + tuple(v for v in other.variables if v not in self.variables)
        cards = self.cards
        for v, c in other.cards.items():
            if cards.setdefault(v, c) != c:
                raise ValueError(f"variable {v} has cardinality {cards[v]} and {c}")
        return order, self.expand(order, cards), other.expand(order, cards)

    def __mul__(self, other: "Table | float") -> "Table":
        if not isinstance(other, Table):
            return Table(self.variables, self.values * other)
        order, a, b = self._aligned(other)
        return Table(order, a * b)

    __rmul__ = __mul__

    def __truediv__(self, other: "Table | float") -> "Table":
        """Ratio with 0/0 = 0; a positive number over zero gives ``inf``."""
        if not isinstance(other, Table):
            return Table(self.variables, self.values / other)
        order, a, b = self._aligned(other)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(b != 0, a / np.where(b != 0, b, 1.0), np.where(a == 0, 0.0, np.inf))
        return Table(order, out)

    def __add__(self, other: "Table") -> "Table":
        order, a, b = self._aligned(other)
        return Table(order, a + b)

    def __sub__(self, other: "Table") -> "Table":
        order, a, b = self._aligned(other)
        return Table(order, a - b)

    def map(self, fn) -> "Table":
        return Table(self.variables, fn(self.values))

    # reductions ------------------------------------------------------------

    def sum_out(self, variables: Iterable[str]) -> "Table":
        drop = [v for v in variables if v in self.variables]
        if not drop:
            return self
        axes = tuple(self.variables.index(v) for v in drop)
        keep = tuple(v for v in self.variables if v not in drop)
        return Table(keep, self.values.sum(axis=axes))

    def marginal(self, keep: Iterable[str]) -> "Table":
        keep = set(keep)
        unknown = keep - set(self.variables)
        if unknown:
            raise KeyError(f"variables {sorted(unknown)} not in table")
        return self.sum_out([v for v in self.variables if v not in keep])

    def slice(self, assignment: Mapping[str, int]) -> "Table":
        """Fix some variables at values and drop their axes; unknown names are ignored."""
        index: list[object] = []
        keep: list[str] = []
        for v in self.variables:
            if v in assignment:
                index.append(int(assignment[v]))
            else:
                index.append(slice(None))
                keep.append(v)
        return Table(keep, self.values[tuple(index)])

    def take(self, variable: str, states: Sequence[int]) -> "Table":
        """Keep only some states of one variable (used to drop a missing marker)."""
        ax = self.variables.index(variable)
        return Table(self.variables, np.take(self.values, list(states), axis=ax))

    def conditional(self, child: Iterable[str], parents: Iterable[str]) -> "Table":
        """``p(child | parents)`` from a table proportional to a joint."""
        child, parents = list(child), list(parents)
        joint = self.marginal(child + parents)
        return joint / joint.marginal(parents)

    def max_abs_diff(self, other: "Table") -> float:
        order, a, b = self._aligned(other)
        return float(np.max(np.abs(a - b))) if a.size else 0.0

    def allclose(self, other: "Table", atol: float = 1e-10) -> bool:
        return self.max_abs_diff(other) <= atol
