"""Pure-numpy conclique sweep kernel, bit-compatible with haarfield._car.

Sites within a conclique have no edges between them, so the vectorized
simultaneous update below and the compiled sequential update visit the same
neighbor values; both accumulate the four neighbor deviations in index
order, which keeps the two kernels bit-identical.
"""

import numpy as np


def conclique_update(state, nbr, sites, eta, alpha, innov):
    """Redraw one conclique in place; see haarfield._car.conclique_update."""
    rows = nbr[sites]
    acc = state[rows[:, 0]] - alpha
    for k in range(1, 4):
        acc = acc + (state[rows[:, k]] - alpha)
    state[sites] = (alpha + eta * acc) + innov[sites]
