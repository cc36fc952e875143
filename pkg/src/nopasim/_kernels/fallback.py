"""Pure-numpy shot loop, vectorized across shots.

Implements the same contract as the compiled kernel: sequential homodyne
conditioning of the mean vector per shot, followed by outcome-proportional
displacements of the output quadratures.  Normal deviates come from the
same PCG64 stream in the same (shot-major) order as the compiled kernel,
so both backends produce matching outcome sequences.
"""

import numpy as np
from numpy.random import Generator


def run_shots_impl(mean0, q_idx, var, sd, cvec, out_idx, ff, signs, n_shots, bit_generator):
    m = q_idx.shape[0]
    Z = Generator(bit_generator).standard_normal((n_shots, m))
    M = np.repeat(mean0[None, :], n_shots, axis=0)
    outcomes = np.empty((n_shots, m))
    for k in range(m):
        mq = M[:, q_idx[k]]
        o = mq + sd[k] * Z[:, k]
        outcomes[:, k] = o
        t = (o - mq) / var[k]
        M += t[:, None] * cvec[k][None, :]
    out_means = (M[:, out_idx] + outcomes @ ff.T) * signs[None, :]
    return outcomes, out_means
