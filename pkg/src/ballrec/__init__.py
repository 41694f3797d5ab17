"""Ball-recycling games: simulation, exact analysis, bounds, and a B-tree
insertion-buffer model.

m balls sit in n bins; each step a strategy empties one non-empty bin and
its balls are re-thrown i.i.d. according to a weight vector p. The recycle
rate (mean balls moved per step in the long run) is the speed-up an
insertion or update buffer gets from batching writes, which is what this
package measures, bounds and reproduces.
"""

__version__ = "0.1.0"

from ._kernel import BACKEND

__all__ = ["BACKEND", "__version__"]
