"""Physical retrieval models: the arg-top-k execution layer.

Three interchangeable backends over the same logical scoring models:
exact brute force (the oracle), a compressed inverted index with DAAT and
MaxScore traversal, and an HNSW graph for approximate dense search.
"""
from .brute import BruteForceIndex
from .budget import SearchBudget
from .cross import cross_execute
from .hnsw import HnswIndex, HnswParams
from .inverted import InvertedIndex, SearchCounters
from .storage import load_index, persist_index

__all__ = [
    "BruteForceIndex",
    "SearchBudget",
    "cross_execute",
    "HnswIndex",
    "HnswParams",
    "InvertedIndex",
    "SearchCounters",
    "load_index",
    "persist_index",
]
