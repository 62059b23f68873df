"""Shared independent oracles for the test suite: a direct simulation of the
quantized tracker on the standardized AR(1) process, plus batch-mean standard
errors that respect autocorrelation."""

import math

import numpy as np

from contilab.rng import RngStream


def simulate_tracker(alpha, eta, sigma, delta, n, seed, burn=20_000):
    gen = RngStream(seed).child("oracle").generator()
    zeta = math.sqrt(max(0.0, 1.0 - eta * eta))
    total = burn + n
    V = gen.standard_normal(total) * zeta
    W = gen.standard_normal(total) * sigma
    Q = gen.standard_normal(total) * delta
    theta = gen.standard_normal()
    u = gen.standard_normal()
    ys = np.empty(total)
    us = np.empty(total)
    ac = 1.0 - alpha
    for i in range(total):
        theta = eta * theta + V[i]
        y = theta + W[i]
        u = ac * u + alpha * y + Q[i]
        ys[i] = y
        us[i] = u
    return ys[burn:], us[burn:]


def batch_stderr(x, n_batches=100):
    means = np.array([b.mean() for b in np.array_split(x, n_batches)])
    return means.std(ddof=1) / math.sqrt(n_batches)
