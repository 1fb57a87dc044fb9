# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled conclique sweep kernel for the Gaussian CAR sampler.

Matches haarfield._car_np bit for bit: neighbor deviations are accumulated
in fixed index order and innovations are indexed by absolute site, so the
result does not depend on the order sites are visited within a conclique.
"""

from libc.stdint cimport int64_t


def conclique_update(double[:, ::1] state, int64_t[:, ::1] nbr,
                     int64_t[::1] sites, double eta, double alpha,
                     double[:, ::1] innov):
    """Redraw one conclique in place.

    state is (V+1, p) with the padding row V fixed at alpha; nbr is (V, 4)
    with missing neighbors pointing at the padding row; innov is (V, p).
    """
    cdef Py_ssize_t i, c, k, site
    cdef Py_ssize_t m = sites.shape[0]
    cdef Py_ssize_t p = state.shape[1]
    cdef double acc
    for i in range(m):
        site = sites[i]
        for c in range(p):
            acc = state[nbr[site, 0], c] - alpha
            for k in range(1, 4):
                acc = acc + (state[nbr[site, k], c] - alpha)
            state[site, c] = (alpha + eta * acc) + innov[site, c]
