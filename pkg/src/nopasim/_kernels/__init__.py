"""Monte Carlo shot kernels: compiled core with a pure-numpy fallback.

The backend is selected at import time: if the Cython extension built, it
is used; otherwise everything runs through the numpy implementation.  Both
backends draw from the same seeded PCG64 stream in the same order and
implement identical arithmetic, so results agree to the last few ulp.
"""

import numpy as np
from numpy.random import PCG64

from . import fallback

try:
    from . import _shots as _compiled

    DEFAULT_BACKEND = "cython"
except ImportError:  # extension not built; pure-Python install
    _compiled = None
    DEFAULT_BACKEND = "python"


def available_backends():
    return ("python",) if _compiled is None else ("python", "cython")


def shot_plan(mean0, cov0, measure_idx):
    """Precompute the conditioning chain for a fixed measurement sequence.

    The covariance recursion of sequential homodyne conditioning does not
    depend on the outcomes, so it is hoisted out of the shot loop: for each
    measured quadrature q we record its pre-measurement variance and the
    covariance column used to update the mean, then condition the full-space
    covariance in place.  Returns (q_idx, var, sd, cvec, cond_cov) where
    cond_cov is the post-measurement covariance in the full index space.
    """
    V = np.array(cov0, dtype=float)
    q_idx = np.asarray(measure_idx, dtype=np.intp)
    m = q_idx.shape[0]
    var = np.empty(m)
    sd = np.empty(m)
    cvec = np.empty((m, V.shape[0]))
    for k, q in enumerate(q_idx):
        v = V[q, q]
        if not v > 0.0:
            raise ValueError(
                f"measured quadrature {q} has non-positive variance {v}; state is corrupted"
            )
        c = V[:, q].copy()
        var[k] = v
        sd[k] = np.sqrt(v)
        cvec[k] = c
        V = V - np.outer(c, c) / v
        # Conditioning makes every covariance with q exactly zero; clear the
        # floating-point dust so a re-measurement of q is caught as v = 0.
        V[q, :] = 0.0
        V[:, q] = 0.0
    return q_idx, var, sd, cvec, V


def simulate_shots(mean0, cov0, measure_idx, out_idx, ff, signs, n_shots, seed, backend=None):
    """Run n_shots of homodyne-plus-feedforward on a Gaussian state.

    Per shot: each quadrature in measure_idx is measured in order (the
    outcome is drawn from its conditional marginal, then the remaining
    means are conditioned on it); afterwards output quadrature j receives
    sum_k ff[j,k]·outcome_k and is multiplied by signs[j].

    Returns (outcomes (n_shots, m), out_means (n_shots, k), cond_cov (k, k))
    where cond_cov is the conditional covariance of the signed outputs.
    """
    mean0 = np.ascontiguousarray(mean0, dtype=float)
    out_idx = np.asarray(out_idx, dtype=np.intp)
    ff = np.ascontiguousarray(ff, dtype=float)
    signs = np.ascontiguousarray(signs, dtype=float)
    q_idx, var, sd, cvec, V = shot_plan(mean0, cov0, measure_idx)

    if backend is None:
        backend = DEFAULT_BACKEND
    if backend == "cython" and _compiled is None:
        raise ValueError("compiled kernel is not available in this install")
    if backend not in ("python", "cython"):
        raise ValueError(f"unknown backend {backend!r}")
    impl = _compiled if backend == "cython" else fallback

    outcomes, out_means = impl.run_shots_impl(
        mean0, q_idx, var, sd, np.ascontiguousarray(cvec), out_idx, ff, signs,
        int(n_shots), PCG64(seed),
    )
    cond = V[np.ix_(out_idx, out_idx)] * np.outer(signs, signs)
    return outcomes, out_means, 0.5 * (cond + cond.T)
