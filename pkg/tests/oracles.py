"""Independent reference values.

Suprema of s^alpha (a1 - f(s)) for f = lam log(1+s) - mu are taken at the
root of the analytic derivative (brentq), not by scanning, and then frozen.
The running-maximum level of 3 + s + 2 sin s comes from its closed-form
critical point 2 pi / 3.
"""
import numpy as np
from scipy.optimize import brentq

# frozen outputs of the functions below
BETA1_LOG = 0.33036612476168054          # sup s (1 - log(1+s)), at s = 0.76322...
B1_LOG_ALPHA2 = 0.3122832667838621       # sup s^2 (1 - log(1+s))
B1_LOG_A1_2 = 1.8695860194296963         # sup s (2 - log(1+s))
BETA1_2LOG = 0.1426161499135405          # sup s (1 - 2 log(1+s))
BETA1_2LOG_MU2 = 1.7515993577473352      # sup s (3 - 2 log(1+s))
SSTAR_AFFINE_25 = 5.387598242887767      # gamma = 3 + s + 2 sin s, lower bound 2.5


def sup_log_gap(a1: float, alpha: float, lam: float = 1.0, mu: float = 0.0) -> float:
    """sup_s s^alpha (a1 + mu - lam log(1+s)) via the root of its derivative."""
    c = a1 + mu

    def val(s):
        return s**alpha * (c - lam * np.log1p(s))

    def dval(s):
        return alpha * (c - lam * np.log1p(s)) - lam * s / (1 + s)

    r = brentq(dval, 1e-9, np.expm1(c / lam), xtol=1e-15, rtol=1e-15)
    return float(val(r))


def sstar_affine(a: float, b: float, lower: float) -> float:
    """First level >= lower where a + s + b sin s regains its running maximum (needs lower in (2pi/3, 4pi/3))."""
    g = lambda s: a + s + b * np.sin(s)
    peak = g(2 * np.pi / 3)
    return float(brentq(lambda s: g(s) - peak, 4 * np.pi / 3, 2 * np.pi, xtol=1e-15))
