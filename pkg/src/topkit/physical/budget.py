"""Search budget shared by all backends."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SearchBudget:
    """How much to retrieve: result depth k, plus beam width for HNSW.

    ef_search left unset resolves to max(k, 100), honoring the default of
    100 while keeping the ef_search >= k constraint satisfiable for deep k.
    """

    k: int
    ef_search: int | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.ef_search is not None and self.ef_search < self.k:
            raise ValueError(
                f"ef_search must be >= k, got ef_search={self.ef_search} with k={self.k}"
            )

    @property
    def ef(self) -> int:
        return self.ef_search if self.ef_search is not None else max(self.k, 100)
