"""Aspect-grounded recommendation carousels from session logs and reviews.

The pipeline trains DistMult base embeddings over catalog knowledge-graph
triples, learns per-edge-type node embeddings on the co-bought /
co-add-to-cart multiplex graph, retrieves exact nearest-neighbor recall
sets over aspect-bearing items, and selects the best explanatory carousel
header per anchor item.
"""

__version__ = "0.1.0"

from .errors import ConfigError, DataError, DtsError, MissingArtifactError

__all__ = ["ConfigError", "DataError", "DtsError", "MissingArtifactError",
           "__version__"]
