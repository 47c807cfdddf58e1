"""topkit: a top-k text retrieval engine with interchangeable scoring
models and retrieval backends.

A scoring model is a query encoder, a document encoder, and a comparison
function; a backend (brute force, inverted index, HNSW graph) merely
executes the induced top-k search. Any model whose comparison a backend
supports can run on it unchanged.
"""

__version__ = "0.1.0"
