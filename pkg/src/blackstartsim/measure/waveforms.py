"""Waveform post-processing: one-cycle RMS, instantaneous p/q, zero-crossing
frequency estimation and THD."""

import numpy as np

from ..errors import BlackstartError

F0_DEFAULT = 50.0


class MeasureError(BlackstartError):
    """Invalid measurement window or signal."""


def rms_one_cycle(samples, base=1.0, samples_per_cycle=None):
    """Root-mean-square of exactly one fundamental period, normalized to ``base``.

    ``samples_per_cycle`` (``round(1/(f0*dt))``), when given, guards the window
    length contract.
    """
    x = np.asarray(samples, dtype=float)
    if samples_per_cycle is not None and len(x) < samples_per_cycle:
        raise MeasureError(
            f"window of {len(x)} samples is shorter than one cycle ({samples_per_cycle})"
        )
    if len(x) == 0:
        raise MeasureError("empty window")
    return float(np.sqrt(np.mean(x * x)) / base)


def sliding_rms(signal, window):
    """Causal one-window sliding RMS; the first ``window-1`` samples average
    over what has been seen so far."""
    x = np.asarray(signal, dtype=float)
    if window < 1 or window > len(x):
        raise MeasureError(f"window {window} invalid for {len(x)} samples")
    c = np.concatenate(([0.0], np.cumsum(x * x)))
    n = np.arange(1, len(x) + 1, dtype=float)
    counts = np.minimum(n, window)
    starts = (n - counts).astype(int)
    sums = c[1:] - c[starts]
    return np.sqrt(sums / counts)


def _moving_average(x, window):
    c = np.concatenate(([0.0], np.cumsum(x)))
    n = np.arange(1, len(x) + 1, dtype=float)
    counts = np.minimum(n, window)
    starts = (n - counts).astype(int)
    return (c[1:] - c[starts]) / counts


def instantaneous_pq(v_abc, i_abc, avg_window=None):
    """Instantaneous three-phase power: p = sum(v*i), q from the classic
    three-wire construction. ``avg_window`` applies a one-cycle moving average
    before reporting. Accepts (3,) samples or (n, 3) series."""
    v = np.atleast_2d(np.asarray(v_abc, dtype=float))
    i = np.atleast_2d(np.asarray(i_abc, dtype=float))
    if v.shape != i.shape or v.shape[-1] != 3:
        raise MeasureError("v and i must be aligned (n, 3) arrays")
    p = np.sum(v * i, axis=-1)
    va, vb, vc = v[:, 0], v[:, 1], v[:, 2]
    q = ((vb - vc) * i[:, 0] + (vc - va) * i[:, 1] + (va - vb) * i[:, 2]) / np.sqrt(3.0)
    if avg_window:
        p = _moving_average(p, avg_window)
        q = _moving_average(q, avg_window)
    if np.ndim(v_abc) == 1:
        return float(p[-1]), float(q[-1])
    return p, q


def estimate_frequency(signal, dt, f_nominal=F0_DEFAULT):
    """Frequency from linear-interpolated rising zero crossings, averaged over
    the full span. The signal must cover at least two cycles."""
    x = np.asarray(signal, dtype=float)
    if len(x) * dt * f_nominal < 2.0:
        raise MeasureError("signal spans less than two nominal cycles")
    x = x - np.mean(x)
    s = np.signbit(x)
    rising = np.nonzero(s[:-1] & ~s[1:])[0]
    if len(rising) < 2:
        raise MeasureError("no zero crossings found")
    # linear interpolation of the crossing instant inside each step
    frac = x[rising] / (x[rising] - x[rising + 1])
    t_cross = (rising + frac) * dt
    return float((len(t_cross) - 1) / (t_cross[-1] - t_cross[0]))


def thd(signal, dt, fundamental=F0_DEFAULT, max_harmonic=50):
    """Total harmonic distortion up to ``max_harmonic`` via discrete Fourier
    analysis over an integer number of fundamental cycles."""
    x = np.asarray(signal, dtype=float)
    n = len(x)
    cycles = n * dt * fundamental
    if abs(cycles - round(cycles)) > 1e-6 or round(cycles) < 1:
        raise MeasureError(
            f"window covers {cycles:.6f} cycles; an integer number is required"
        )
    spec = np.fft.rfft(x)
    k1 = round(cycles)
    if k1 >= len(spec):
        raise MeasureError("fundamental above Nyquist")
    fund = np.abs(spec[k1])
    if fund == 0.0:
        raise MeasureError("no fundamental content")
    acc = 0.0
    for h in range(2, max_harmonic + 1):
        k = h * k1
        if k >= len(spec):
            break
        acc += np.abs(spec[k]) ** 2
    return float(np.sqrt(acc) / fund)
