"""Operator learning on adaptively redistributed grids.

Predicts solution operators of transport-dominated PDEs by learning the
graph of the solution over an equidistributed moving mesh instead of the
raw solution values on a fixed grid.
"""

__version__ = "0.1.0"
