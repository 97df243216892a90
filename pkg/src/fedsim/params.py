"""Flat parameter vectors: the common currency of aggregation and attacks.

A :class:`ParamVector` is a dense float64 vector tagged with a ``shape_id``
that ties it to one model architecture. Two vectors may only be combined
(added, scaled, measured against each other) when their shape ids match, so
an update produced for one architecture can never be aggregated into another.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError


@dataclass
class ParamVector:
    """A flat float64 parameter (or update) vector plus its shape id.

    Every constructed instance is validated: the values must form a finite
    1-D float64 array, so NaN/Inf can never propagate silently through
    vector arithmetic.
    """

    values: np.ndarray
    shape_id: str

    def __post_init__(self) -> None:
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ShapeMismatchError(
                f"parameter vector must be 1-D, got shape {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ShapeMismatchError(
                f"parameter vector for {self.shape_id!r} contains NaN/Inf entries"
            )

    def __len__(self) -> int:
        return self.values.shape[0]

    def _check_combinable(self, other: "ParamVector") -> None:
        if self.shape_id != other.shape_id:
            raise ShapeMismatchError(
                f"cannot combine vectors with shape ids "
                f"{self.shape_id!r} and {other.shape_id!r}"
            )
        if self.values.shape[0] != other.values.shape[0]:
            raise ShapeMismatchError(
                f"vectors for {self.shape_id!r} have lengths "
                f"{self.values.shape[0]} and {other.values.shape[0]}"
            )

    def __add__(self, other: "ParamVector") -> "ParamVector":
        self._check_combinable(other)
        return ParamVector(self.values + other.values, self.shape_id)

    def __sub__(self, other: "ParamVector") -> "ParamVector":
        self._check_combinable(other)
        return ParamVector(self.values - other.values, self.shape_id)

    def __mul__(self, factor: float) -> "ParamVector":
        return ParamVector(self.values * float(factor), self.shape_id)

    __rmul__ = __mul__

    def __neg__(self) -> "ParamVector":
        return ParamVector(-self.values, self.shape_id)

    def copy(self) -> "ParamVector":
        return ParamVector(self.values.copy(), self.shape_id)

    def norm(self) -> float:
        """Euclidean norm of the vector."""
        return float(np.linalg.norm(self.values))

    def distance(self, other: "ParamVector") -> float:
        """Euclidean distance to another vector with the same shape id."""
        self._check_combinable(other)
        return float(np.linalg.norm(self.values - other.values))


def zeros_like(vec: ParamVector) -> ParamVector:
    return ParamVector(np.zeros(len(vec)), vec.shape_id)


def stack(vectors: list[ParamVector]) -> np.ndarray:
    """Stack vectors into an ``(n, dim)`` matrix, enforcing one shape id.

    Raises:
        ShapeMismatchError: the list is empty or the shape ids differ.
    """
    if not vectors:
        raise ShapeMismatchError("cannot stack an empty list of parameter vectors")
    shape_id = vectors[0].shape_id
    for v in vectors[1:]:
        if v.shape_id != shape_id:
            raise ShapeMismatchError(
                f"mixed shape ids in vector list: {shape_id!r} vs {v.shape_id!r}"
            )
    return np.stack([v.values for v in vectors])


def mean_of(vectors: list[ParamVector]) -> ParamVector:
    """Unweighted coordinate-wise mean of a nonempty list of vectors."""
    matrix = stack(vectors)
    return ParamVector(matrix.mean(axis=0), vectors[0].shape_id)
