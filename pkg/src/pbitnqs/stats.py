"""Error bars for correlated Monte Carlo series."""
import math

import numpy as np


def blocking_se(samples, bins=50):
    """Standard error from ``bins`` equal bins (remainder truncated): std(bin means)/sqrt(bins)."""
    x = np.asarray(samples, np.float64).ravel()
    if bins < 2:
        raise ValueError("need at least two bins")
    if len(x) < bins:
        raise ValueError(f"{len(x)} samples cannot fill {bins} bins")
    m = len(x) // bins
    means = x[:m * bins].reshape(bins, m).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(bins))
