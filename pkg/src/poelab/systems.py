"""Shipped test systems.

Every system pairs a base potential ``psi`` with a cocycle. ``sys_a`` is a
scalar cocycle where everything is explicit, ``sys_b`` a diagonal one whose
fiber dynamics contract toward the coordinate axes, and ``golden_b`` the same
matrices over the golden-mean shift.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cocycle import CocycleSystem, PotentialFamily
from .poe import CombinedPotential
from .shift import ShiftSpec
from .transfer import Potential

LOG2 = float(np.log(2.0))


@dataclass(frozen=True, eq=False)
class ShippedSystem:
    name: str
    psi: Potential
    cocycle: CocycleSystem

    @property
    def spec(self) -> ShiftSpec:
        return self.cocycle.spec

    @property
    def family(self) -> PotentialFamily:
        return PotentialFamily(self.cocycle)

    def combined(self, coefficient: float) -> CombinedPotential:
        """``psi + coefficient * phi_t``."""
        return CombinedPotential(self.psi, self.family, coefficient)

    def family_only(self, coefficient: float = 1.0) -> CombinedPotential:
        """``coefficient * phi_t`` with zero base potential."""
        return CombinedPotential(Potential.constant(self.spec.alphabet_size, 0.0), self.family, coefficient)


def sys_a() -> ShippedSystem:
    """Full 2-shift, ``psi = -log 2``, ``A_0 = A_1 = 2 I``."""
    spec = ShiftSpec.full(2)
    mats = np.array([2 * np.eye(2), 2 * np.eye(2)])
    return ShippedSystem("SYS-A", Potential.constant(2, -LOG2), CocycleSystem.one_sided(spec, mats))


def sys_b() -> ShippedSystem:
    """Full 2-shift, ``psi = -log 2``, ``A_0 = diag(2, 1)``, ``A_1 = diag(1, 2)``."""
    spec = ShiftSpec.full(2)
    mats = np.array([np.diag([2.0, 1.0]), np.diag([1.0, 2.0])])
    return ShippedSystem("SYS-B", Potential.constant(2, -LOG2), CocycleSystem.one_sided(spec, mats))


def golden_b() -> ShippedSystem:
    """The SYS-B matrices over the golden-mean shift with ``psi = 0``."""
    spec = ShiftSpec.golden_mean()
    mats = np.array([np.diag([2.0, 1.0]), np.diag([1.0, 2.0])])
    return ShippedSystem("GOLDEN-B", Potential.constant(2, 0.0), CocycleSystem.one_sided(spec, mats))


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def past_twist(angles=(0.3, -0.2)) -> CocycleSystem:
    """Two-sided system with window (1, 0): ``A_(w_-1, w_0) = R(angles[w_-1]) diag_(w_0)``.

    The rotation reads the past symbol, so the cocycle is not one-sided.
    """
    spec = ShiftSpec.full(2)
    diag = [np.diag([2.0, 1.0]), np.diag([1.0, 2.0])]
    mats = np.empty((2, 2, 2, 2))
    for p in range(2):
        for a in range(2):
            mats[p, a] = rotation(angles[p]) @ diag[a]
    return CocycleSystem(spec, (1, 0), mats)


def contracting() -> ShippedSystem:
    """A system with no uniform expansion: ``A_0 = A_1 = diag(2, 1/2)``."""
    spec = ShiftSpec.full(2)
    mats = np.array([np.diag([2.0, 0.5]), np.diag([2.0, 0.5])])
    return ShippedSystem("CONTRACTING", Potential.constant(2, -LOG2), CocycleSystem.one_sided(spec, mats))


SYSTEMS = {"SYS-A": sys_a, "SYS-B": sys_b, "GOLDEN-B": golden_b}
