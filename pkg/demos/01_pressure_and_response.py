"""Pressure, Gibbs measures and linear response on the shipped systems.

Run with ``python3 demos/01_pressure_and_response.py``.
"""

import math

import numpy as np

from poelab import Potential, ShiftSpec, gibbs_model, pressure
from poelab.systems import LOG2, sys_b
from poelab.transfer import pressure_derivative, pressure_second_derivative

# The golden-mean shift forbids "11"; with zero potential its pressure is
# the log of the golden ratio, and the equilibrium state is the Parry measure.
golden = ShiftSpec.golden_mean()
zero = Potential.constant(2, 0.0)
print("golden-mean pressure      ", pressure(golden, zero))
print("log golden ratio          ", math.log((1 + math.sqrt(5)) / 2))
parry = gibbs_model(golden, zero)
print("Parry transition matrix\n", parry.chain.transition)

# SYS-B: full 2-shift, psi = -log 2, A_0 = diag(2, 1), A_1 = diag(1, 2).
# Along the first axis, phi = (log 2, 0) and P(psi - beta*phi) = log((1 + 2^-beta)/2).
s = sys_b()
phi = s.family.potential(0.0)
for beta in (0.1, 0.5, 1.0):
    print(f"beta={beta}: P = {pressure(s.spec, s.psi - beta * phi):+.12f}  closed form {math.log((1 + 2**-beta) / 2):+.12f}")

# First and second derivatives at beta = 0: minus the mean, then the
# Green-Kubo variance. The observable is i.i.d. here, so no covariances survive.
print("P'(0)  =", pressure_derivative(s.spec, s.psi, phi), " expected", -LOG2 / 2)
print("P''(0) =", pressure_second_derivative(s.spec, s.psi, phi), " expected", LOG2**2 / 4)

# A memory-2 potential on the golden-mean shift has a genuine Markov
# equilibrium state; the certified Gibbs constant bounds mu[w] / exp(S_n psi).
psi = Potential(np.array([[0.2, -0.3], [0.5, 0.0]]))
model = gibbs_model(golden, psi)
print("Gibbs constant (memory 2) ", model.gibbs_constant)
