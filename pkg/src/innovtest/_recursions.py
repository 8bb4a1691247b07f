"""Sequential filtering recursions, JIT-compiled.

Presample convention used throughout: observations and residuals before the
sample are zero, conditional variances before the sample equal ``h_init``,
and all presample derivative states are zero (the derivatives are exact for
the filter map with the presample held fixed).
"""

import numpy as np
from numba import njit


@njit(cache=True)
def garch_filter(y, alpha0, alpha, beta, h_init):
    n = y.shape[0]
    p1 = alpha.shape[0]
    p2 = beta.shape[0]
    h = np.empty(n)
    for i in range(n):
        v = alpha0
        for j in range(p1):
            k = i - j - 1
            if k >= 0:
                v += alpha[j] * (y[k] * y[k])
        for j in range(p2):
            k = i - j - 1
            v += beta[j] * (h[k] if k >= 0 else h_init)
        h[i] = v
    return h


@njit(cache=True)
def garch_gradients(y, h, alpha0, alpha, beta, h_init):
    n = y.shape[0]
    p1 = alpha.shape[0]
    p2 = beta.shape[0]
    m = 1 + p1 + p2
    dh = np.zeros((n, m))
    for i in range(n):
        dh[i, 0] = 1.0
        for c in range(p1):
            k = i - c - 1
            if k >= 0:
                dh[i, 1 + c] = y[k] * y[k]
        for c in range(p2):
            k = i - c - 1
            dh[i, 1 + p1 + c] = h[k] if k >= 0 else h_init
        for j in range(p2):
            k = i - j - 1
            if k >= 0:
                for c in range(m):
                    dh[i, c] += beta[j] * dh[k, c]
    return dh


@njit(cache=True)
def garch_simulate(eta, alpha0, alpha, beta, h_init):
    n = eta.shape[0]
    p1 = alpha.shape[0]
    p2 = beta.shape[0]
    y = np.empty(n)
    h = np.empty(n)
    for i in range(n):
        v = alpha0
        for j in range(p1):
            k = i - j - 1
            if k >= 0:
                v += alpha[j] * (y[k] * y[k])
        for j in range(p2):
            k = i - j - 1
            v += beta[j] * (h[k] if k >= 0 else h_init)
        h[i] = v
        y[i] = eta[i] * np.sqrt(v)
    return y, h


@njit(cache=True)
def armagarch_filter(y, a, b, alpha0, alpha, beta, h_init):
    n = y.shape[0]
    eps = np.empty(n)
    h = np.empty(n)
    e_prev = 0.0
    y_prev = 0.0
    h_prev = h_init
    for i in range(n):
        e = y[i] - a * y_prev - b * e_prev
        v = alpha0 + alpha * (e_prev * e_prev) + beta * h_prev
        eps[i] = e
        h[i] = v
        e_prev = e
        y_prev = y[i]
        h_prev = v
    return eps, h


@njit(cache=True)
def armagarch_gradients(y, eps, h, a, b, alpha0, alpha, beta, h_init):
    n = y.shape[0]
    deps = np.zeros((n, 2))
    dh = np.zeros((n, 5))
    de_a = 0.0
    de_b = 0.0
    dh_prev = np.zeros(5)
    e_prev = 0.0
    y_prev = 0.0
    h_prev = h_init
    for i in range(n):
        da = -y_prev - b * de_a
        db = -e_prev - b * de_b
        deps[i, 0] = da
        deps[i, 1] = db
        dh[i, 0] = 2.0 * alpha * e_prev * de_a + beta * dh_prev[0]
        dh[i, 1] = 2.0 * alpha * e_prev * de_b + beta * dh_prev[1]
        dh[i, 2] = 1.0 + beta * dh_prev[2]
        dh[i, 3] = (e_prev * e_prev) + beta * dh_prev[3]
        dh[i, 4] = h_prev + beta * dh_prev[4]
        de_a = da
        de_b = db
        for c in range(5):
            dh_prev[c] = dh[i, c]
        e_prev = eps[i]
        y_prev = y[i]
        h_prev = h[i]
    return deps, dh


@njit(cache=True)
def armagarch_simulate(eta, a, b, alpha0, alpha, beta, h_init):
    n = eta.shape[0]
    y = np.empty(n)
    eps = np.empty(n)
    h = np.empty(n)
    e_prev = 0.0
    y_prev = 0.0
    h_prev = h_init
    for i in range(n):
        v = alpha0 + alpha * (e_prev * e_prev) + beta * h_prev
        e = eta[i] * np.sqrt(v)
        y[i] = a * y_prev + b * e_prev + e
        eps[i] = e
        h[i] = v
        e_prev = e
        y_prev = y[i]
        h_prev = v
    return y, eps, h
