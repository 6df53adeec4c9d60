"""Adaptive Simpson quadrature.

Endpoint policy: the integrand is evaluated at the interval endpoints, so
callers must pass functions whose endpoint values are the continuous
limits, never a raw 0/0 quotient.  The field evaluators in this package
follow that convention.
"""

__all__ = ["adaptive_simpson"]


def _simpson(f, a, fa, b, fb, m, fm):
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def _recurse(f, a, fa, b, fb, m, fm, whole, tol, depth):
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = f(lm)
    frm = f(rm)
    left = _simpson(f, a, fa, m, fm, lm, flm)
    right = _simpson(f, m, fm, b, fb, rm, frm)
    err = left + right - whole
    if depth <= 0:
        raise RuntimeError("adaptive Simpson: max depth reached without convergence")
    if abs(err) <= 15.0 * tol:
        return left + right + err / 15.0
    return _recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) + _recurse(
        f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1
    )


def adaptive_simpson(f, a, b, tol=1e-10, max_depth=48):
    """Integrate f over [a, b] to absolute tolerance tol."""
    if a == b:
        return 0.0
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = _simpson(f, a, fa, b, fb, m, fm)
    return _recurse(f, a, fa, b, fb, m, fm, whole, tol, max_depth)
