import numpy as np


def central_diff(f, x, step=1e-5):
    """Central finite-difference gradient of scalar f at flat vector x."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for k in range(x.size):
        xp = x.copy(); xp[k] += step
        xm = x.copy(); xm[k] -= step
        g[k] = (f(xp) - f(xm)) / (2.0 * step)
    return g


def rel_err(a, b, floor=1e-8):
    a = np.asarray(a); b = np.asarray(b)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def cosine(a, b):
    na = np.linalg.norm(a); nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))
