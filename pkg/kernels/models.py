from dataclasses import dataclass

import numpy as np
from django.db import models


class KernelFamily(models.TextChoices):
    UNIFORM = 'uniform', 'Uniform'
    TRIANGLE = 'triangle', 'Triangle'
    EPANECHNIKOV = 'epanechnikov', 'Epanechnikov'


@dataclass(frozen=True)
class Kernel:
    """Symmetric, compactly supported, unit-mass kernel J and its rescaling.

    Point evaluation is J^eps(z) = eps^-3 * J(z / eps), where J is the unit
    mass family on [-radius, radius]. With epsilon = 1 this is J itself.
    """
    family: str
    radius: float
    epsilon: float = 1.0

    @property
    def support(self):
        return self.radius * self.epsilon

    @property
    def is_continuous(self):
        # The uniform family jumps at |z| = R.
        return self.family != KernelFamily.UNIFORM

    def base(self, z):
        """Unscaled J on [-R, R]."""
        z = np.abs(np.asarray(z, dtype=float))
        R = self.radius
        inside = z <= R
        if self.family == KernelFamily.UNIFORM:
            values = np.full_like(z, 1.0 / (2.0 * R))
        elif self.family == KernelFamily.TRIANGLE:
            values = (R - z) / R**2
        else:
            values = 0.75 / R * (1.0 - (z / R) ** 2)
        return np.where(inside, values, 0.0)

    def __call__(self, z):
        eps = self.epsilon
        return self.base(np.asarray(z, dtype=float) / eps) / eps**3

    def __str__(self):
        return f"{self.family}(R={self.radius:g}, eps={self.epsilon:g})"


@dataclass(frozen=True)
class CouplingConstants:
    c1: float
    c2: float
    m_j: float

    @property
    def picard_window_bound(self):
        """Windows shorter than this make the nonlocal fixed-point map contract."""
        return 1.0 / (2.0 * self.c1 + self.c2)
