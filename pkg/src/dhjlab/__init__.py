"""dhjlab: an exact desk-scale laboratory for density increments on [3]^n.

The package implements, with exact rational arithmetic wherever a claim is
exact, the combinatorial machinery behind a density-increment argument for
combinatorial lines in the 3-letter cube:

- ``cube_core``    points, dense subsets, combinatorial lines, projections
- ``dist_core``    exact joint distributions, duplication, chains
- ``connect``      support-connectivity checks with certificates
- ``restrict``     random restrictions and equality collapses
- ``corr``         correlations, product-function maximization, pseudorandomness
- ``increment``    structured triples, partition index, uniformization, driver
- ``verify``       the exact verification suite over the transcribed tables
- ``extremal``     maximum line-free subsets by branch and bound
- ``cli``          command-line interface over all of the above
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
