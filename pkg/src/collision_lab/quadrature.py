"""Adaptive quadrature on finite intervals and on the half line.

Thin wrapper over QUADPACK's adaptive Gauss-Kronrod rule (``scipy.integrate.quad``)
that turns non-convergence into :class:`NumericError`.  Half-line integrals are
mapped to ``[0, 1)`` with ``t = -scale * log(1 - u)``.
"""
from __future__ import annotations

import math
import warnings

from scipy import integrate as _integrate

from .errors import NumericError

__all__ = ["integrate", "integrate_half_line"]


def integrate(f, a: float, b: float, tol: float = 1e-10, points=None, limit: int = 500):
    """``(value, abserr)`` of ``int_a^b f``.

    ``tol`` is used both as absolute and relative target.  Raises
    :class:`NumericError` when the error estimate stays above ``tol`` times
    ``max(1, |value|)`` (times a safety factor of 10).
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = _integrate.quad(f, a, b, epsabs=tol, epsrel=tol, limit=limit,
                              points=points, full_output=1)
    value, err = res[0], res[1]
    ier = 0 if len(res) == 3 else 1
    if not math.isfinite(value) or (ier and err > 10 * tol * max(1.0, abs(value))):
        msg = res[3] if len(res) > 3 else "non-finite result"
        raise NumericError(f"quadrature did not converge (estimate {value!r}, "
                           f"error {err:.3g}): {msg}", estimate=value, error=err)
    return value, err


def integrate_half_line(f, scale: float = 1.0, tol: float = 1e-10, points=None):
    """``(value, abserr)`` of ``int_0^inf f(t) dt``.

    ``scale`` should be the width of the bulk of ``f``; ``points`` are
    breakpoints given in the original ``t`` variable.
    """
    scale = float(scale)

    def g(u):
        if u >= 1.0:
            return 0.0
        t = -scale * math.log1p(-u)
        val = f(t)
        return val * scale / (1.0 - u) if val else 0.0

    mapped = None
    if points:
        mapped = [-math.expm1(-p / scale) for p in points if p > 0]
        mapped = [u for u in mapped if 0.0 < u < 1.0] or None
    return integrate(g, 0.0, 1.0, tol=tol, points=mapped)
