"""tracefield: decomposition and extension of functional fields on finite grids.

The package models selfadjoint linear maps from a block-matrix algebra into
the functions on a finite metric grid.  Every map is stored nodewise through
trace pairing, which turns the two central constructions into plain linear
algebra plus convex optimization:

* splitting a map field into its positive and negative parts with additive
  pointwise norms (``tracefield.jordan``), and
* extending a dominated linear map from a subspace, direction by direction,
  with explicit envelopes and a total-variation-minimal continuous selection
  (``tracefield.extension``).

Supporting machinery lives in ``algebra`` (block algebras and functionals),
``grids`` (finite metric grids and scalar fields), ``fields`` (map fields),
``seminorms`` (grid-valued gauges and their quotient/inf-convolution
constructions), ``statespace`` (state sampling and linear-programming
envelopes), and ``cli`` (batch commands over JSON instance files).
"""

from .config import Tolerances, DEFAULT_TOLS

__version__ = "0.1.0"

__all__ = ["Tolerances", "DEFAULT_TOLS", "__version__"]
