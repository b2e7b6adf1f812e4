"""Small numerical helpers used by several models."""

from __future__ import annotations

import warnings

import numpy as np
from scipy import integrate

from qmarket.errors import EigenError, QuadratureError

SERIES_THRESHOLD = 1e-8


def expm1_over(z, t):
    """Return ``(exp(z t) - 1) / z`` with the removable singularity at z = 0.

    Works elementwise on complex arrays; below ``SERIES_THRESHOLD`` in
    ``|z|`` a three-term Taylor series replaces the quotient.
    """
    z = np.asarray(z, dtype=complex)
    t = np.asarray(t, dtype=float)
    small = np.abs(z) < SERIES_THRESHOLD
    zs = np.where(small, 1.0, z)
    exact = np.expm1(zs * t) / zs
    series = t + z * t**2 / 2 + z**2 * t**3 / 6
    return np.where(small, series, exact)


def d_expm1_over(z, t):
    """Derivative in ``z`` of :func:`expm1_over`, i.e. the integral of s*exp(z s) on [0, t]."""
    z = np.asarray(z, dtype=complex)
    t = np.asarray(t, dtype=float)
    small = np.abs(z) < SERIES_THRESHOLD
    zs = np.where(small, 1.0, z)
    exact = (t * np.exp(zs * t) - np.expm1(zs * t) / zs) / zs
    series = t**2 / 2 + z * t**3 / 3
    return np.where(small, series, exact)


def eigh_checked(h, tol=1e-8):
    """Hermitian eigendecomposition with a residual check ``||H Q - Q diag(e)||``."""
    h = np.asarray(h)
    evals, evecs = np.linalg.eigh(h)
    scale = max(1.0, float(np.max(np.abs(h))) if h.size else 1.0)
    resid = np.max(np.abs(h @ evecs - evecs * evals)) / scale if h.size else 0.0
    if resid > tol:
        raise EigenError(f"eigendecomposition residual {resid:.3e} exceeds {tol:.1e}")
    ortho = np.max(np.abs(evecs.conj().T @ evecs - np.eye(len(evals)))) if h.size else 0.0
    if ortho > tol:
        raise EigenError(f"eigenvector orthogonality residual {ortho:.3e} exceeds {tol:.1e}")
    return evals, evecs


def _smooth_tail(g, edge, upper, kw):
    """Integral of a decaying ``g`` over a half line via ``k = edge +- s (1 - u) / u``.

    QUADPACK's own infinite-range map loses a 1/k^2 tail that starts far
    from the origin; scaling by ``s = max(1, |edge|)`` keeps the mapped
    integrand of order one on ``(0, 1]``.
    """
    s = max(1.0, abs(edge))
    sign = 1.0 if upper else -1.0

    def mapped(u):
        if u < 1e-150:
            # k beyond 1e150 * s; nothing integrable is left out there
            return 0.0
        return g(edge + sign * s * (1 - u) / u) * (s / u) / u

    return integrate.quad(mapped, 0.0, 1.0, **kw)


def _fourier_tail(g, edge, freq, phase, upper, kw):
    """Integral of ``g(k) cos(freq k + phase)`` over ``[edge, inf)`` or ``(-inf, edge]``."""
    if freq == 0:
        return _smooth_tail(g, edge, upper, kw)
    if freq < 0:
        freq, phase = -freq, -phase
    c, s = np.cos(phase), np.sin(phase)
    # cos(f k + p) = cos(f k) cos p - sin(f k) sin p; mirror k -> -k for the lower tail
    if upper:
        h, sign, a = g, -1.0, edge
    else:
        h, sign, a = (lambda u: g(-u)), 1.0, -edge
    vc, ec = integrate.quad(h, a, np.inf, weight="cos", wvar=freq, limlst=200, **kw) if c else (0.0, 0.0)
    vs, es = integrate.quad(h, a, np.inf, weight="sin", wvar=freq, limlst=200, **kw) if s else (0.0, 0.0)
    return c * vc + sign * s * vs, abs(c) * ec + abs(s) * es


def _fourier_window(g, lo, hi, freq, phase, pts, kw):
    """Integral of ``g(k) cos(freq k + phase)`` over ``[lo, hi]``, split at ``pts``."""
    edges = [lo, *pts, hi]
    value = err = 0.0
    c, s = np.cos(phase), np.sin(phase)
    for a, b in zip(edges[:-1], edges[1:]):
        if freq == 0:
            v, e = integrate.quad(g, a, b, **kw)
        else:
            vc, ec = integrate.quad(g, a, b, weight="cos", wvar=freq, maxp1=200, **kw) if c else (0.0, 0.0)
            vs, es = integrate.quad(g, a, b, weight="sin", wvar=freq, maxp1=200, **kw) if s else (0.0, 0.0)
            v, e = c * vc - s * vs, abs(c) * ec + abs(s) * es
        value += v
        err += e
    return value, err


def integrate_line(func, lo, hi, points=(), terms=None, terms_in_window=False,
                   rtol=1e-8, atol=1e-14, limit=2000):
    """Integrate ``func`` over the whole real line.

    The finite window ``[lo, hi]`` holds the peaks (``points`` are break
    points there). The two tails are integrated separately on half-infinite
    intervals. When the integrand oscillates, ``terms`` lists
    ``(g, freq, phase)`` triples with ``func(k) = sum g(k) cos(freq k + phase)``
    and each term goes to a QUADPACK Fourier routine: always in the tails,
    and also inside the window when ``terms_in_window`` is set (only valid
    when every ``g`` is regular there). Raises :class:`QuadratureError` when
    the summed error estimate exceeds ``rtol * |value| + atol``.
    """
    pts = sorted(p for p in points if lo < p < hi)
    kw = dict(limit=limit, epsabs=atol / 3, epsrel=rtol / 10)
    terms = terms if terms is not None else [(func, 0.0, 0.0)]
    value = err = 0.0
    with warnings.catch_warnings():
        # convergence is judged below from the returned error estimates
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if terms_in_window:
            for g, freq, phase in terms:
                v, e = _fourier_window(g, lo, hi, freq, phase, pts, kw)
                value += v
                err += e
        else:
            value, err = integrate.quad(func, lo, hi, points=pts or None, **kw)
        for g, freq, phase in terms:
            for edge, upper in ((lo, False), (hi, True)):
                v, e = _fourier_tail(g, edge, freq, phase, upper, kw)
                value += v
                err += e
    if not np.isfinite(value) or err > rtol * abs(value) + atol:
        raise QuadratureError(
            f"quadrature error estimate {err:.3e} above tolerance for value {value:.6e}"
        )
    return value
