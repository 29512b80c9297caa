"""Independent reference implementations used by several test modules."""

import math

import numpy as np


def nl_probabilities(costs, nests, mu, theta0):
    """Textbook two-level nested logit: ``nests`` lists route indices per nest,
    ``mu`` the nest scale ratios."""
    v = -np.asarray(costs, dtype=float) / theta0
    incl = [m * math.log(sum(math.exp(v[k] / m) for k in nest)) for nest, m in zip(nests, mu)]
    denom = sum(math.exp(x) for x in incl)
    p = np.zeros(len(v))
    for nest, m, iv in zip(nests, mu, incl):
        inner = sum(math.exp(v[k] / m) for k in nest)
        for k in nest:
            p[k] = math.exp(iv) / denom * math.exp(v[k] / m) / inner
    return p
