"""Amplitude-invariant Park transform and its inverse.

A balanced set ``cos(theta), cos(theta - 2pi/3), cos(theta + 2pi/3)`` with the
transform angle equal to the set's angle maps to (1, 0); the round trip
``inverse_park(park(x, theta), theta)`` is the identity for any 3-phase set
with zero common mode.
"""

import numpy as np

TWO_THIRDS_PI = 2.0 * np.pi / 3.0


def park(v_abc, theta):
    """(d, q) of per-phase instantaneous values. Accepts (3,) or (n, 3) with
    matching scalar or (n,) theta."""
    v = np.asarray(v_abc, dtype=float)
    th = np.asarray(theta, dtype=float)
    angles = np.stack([th, th - TWO_THIRDS_PI, th + TWO_THIRDS_PI], axis=-1)
    d = (2.0 / 3.0) * np.sum(v * np.cos(angles), axis=-1)
    q = -(2.0 / 3.0) * np.sum(v * np.sin(angles), axis=-1)
    if d.ndim == 0:
        return float(d), float(q)
    return d, q


def inverse_park(v_dq, theta):
    """Per-phase instantaneous values of a (d, q) pair (zero common mode)."""
    d, q = v_dq
    d = np.asarray(d, dtype=float)
    q = np.asarray(q, dtype=float)
    th = np.asarray(theta, dtype=float)
    angles = np.stack([th, th - TWO_THIRDS_PI, th + TWO_THIRDS_PI], axis=-1)
    out = d[..., None] * np.cos(angles) - q[..., None] * np.sin(angles)
    if out.ndim == 1:
        return out
    return out
