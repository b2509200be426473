import math

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def wilson_lower(successes: int, n: int, z: float = 1.645) -> float:
    """Lower 95% (one-sided) Wilson score bound on a binomial proportion."""
    if n == 0:
        return 0.0
    p = successes / n
    denom = 1.0 + z * z / n
    center = p + z * z / (2 * n)
    rad = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return (center - rad) / denom


def planted_symmetric(d, spectrum, rng):
    """Q diag(spectrum) Q' with random orthogonal Q; dense ground truth."""
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))
    A = (q * np.asarray(spectrum, float)) @ q.T
    return 0.5 * (A + A.T)
