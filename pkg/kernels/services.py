import logging

import numpy as np

from core.exceptions import InvalidParameter
from .models import CouplingConstants, Kernel, KernelFamily

logger = logging.getLogger(__name__)


def make_kernel(family, radius=1.0, epsilon=1.0):
    if family not in KernelFamily.values:
        raise InvalidParameter(
            f"unknown kernel family '{family}' (expected one of {', '.join(KernelFamily.values)})"
        )
    radius = float(radius)
    epsilon = float(epsilon)
    if not radius > 0:
        raise InvalidParameter(f"kernel radius must be positive, got {radius}")
    if not epsilon > 0:
        raise InvalidParameter(f"kernel epsilon must be positive, got {epsilon}")
    return Kernel(family=str(family), radius=radius, epsilon=epsilon)


def second_moment(kernel):
    """M(J) of the unscaled family, in closed form."""
    R2 = kernel.radius**2
    if kernel.family == KernelFamily.UNIFORM:
        return R2 / 3.0
    if kernel.family == KernelFamily.TRIANGLE:
        return R2 / 6.0
    return R2 / 5.0


def coupling_constants(kernel, c1=None, c2=None):
    """C_{J,1} = 2/M(J) and C_{J,2} = 1, fixed once for the unscaled kernel."""
    m_j = second_moment(kernel)
    c1 = 2.0 / m_j if c1 is None else float(c1)
    c2 = 1.0 if c2 is None else float(c2)
    if not (c1 > 0 and c2 > 0):
        raise InvalidParameter(f"coupling constants must be positive, got c1={c1}, c2={c2}")
    return CouplingConstants(c1=c1, c2=c2, m_j=m_j)


def kernel_cdf(kernel, t):
    """Integral of the unscaled J over (-inf, t]."""
    R = kernel.radius
    s = np.clip(np.asarray(t, dtype=float) / R, -1.0, 1.0)
    if kernel.family == KernelFamily.UNIFORM:
        return 0.5 * (s + 1.0)
    if kernel.family == KernelFamily.TRIANGLE:
        return np.where(s <= 0.0, 0.5 * (1.0 + s) ** 2, 1.0 - 0.5 * (1.0 - s) ** 2)
    return 0.5 + 0.75 * (s - s**3 / 3.0)


def interval_integral(kernel, a, b):
    """Integral of J^eps over [a, b] (arrays broadcast)."""
    eps = kernel.epsilon
    return (kernel_cdf(kernel, np.asarray(b) / eps) - kernel_cdf(kernel, np.asarray(a) / eps)) / eps**2


def coupling_profile(kernel, y):
    """q(y) = int_{-1}^{0} J^eps(y - s) ds for an array of y in (0, 1)."""
    y = np.asarray(y, dtype=float)
    # y - s runs over [y, y + 1] as s runs over [-1, 0]
    return interval_integral(kernel, y, y + 1.0)


def coupling_profile_analytic(kernel, y):
    y = float(y)
    if not 0.0 < y < 1.0:
        raise InvalidParameter(f"coupling profile is defined on (0, 1), got y={y}")
    return float(coupling_profile(kernel, y))


def kernel_quadrature(kernel, n_points=10_000, power=0):
    """Midpoint rule for int z**power * J^eps(z) dz over the support."""
    a = kernel.support
    h = 2.0 * a / n_points
    z = -a + (np.arange(n_points) + 0.5) * h
    return float(np.sum(kernel(z) * z**power) * h)
