import numpy as np
import pytest

from vfax import Field3, GridSpec


def random_smooth_unit(g: GridSpec, rng, nmodes: int = 2, amp: float = 0.1) -> Field3:
    """Random low-wavenumber unit-norm field (P, Q, sqrt(1 - P^2 - Q^2))."""
    s, L = g.nodes, g.length
    P = np.zeros_like(s)
    Q = np.zeros_like(s)
    for m in range(1, nmodes + 1):
        cP, cQ = amp * rng.random(2) / nmodes
        phP, phQ = 2 * np.pi * rng.random(2)
        P += cP * np.sin(2 * np.pi * m * s / L + phP)
        Q += cQ * np.cos(2 * np.pi * m * s / L + phQ)
    return Field3(np.stack([P, Q, np.sqrt(1.0 - P * P - Q * Q)], axis=1))


def gaussian_bump_unit(g: GridSpec, amp: float = 0.15, width: float = 4.0,
                       skew: float = 2.0) -> Field3:
    """Analytic interior bump riding on e3; exactly unit norm."""
    s = g.nodes
    c = 0.5 * g.length
    P = amp * np.exp(-(((s - c) / width) ** 2))
    Q = 0.6 * amp * np.exp(-(((s - c - skew) / width) ** 2))
    return Field3(np.stack([P, Q, np.sqrt(1.0 - P * P - Q * Q)], axis=1))


def modulated_helix_unit(g: GridSpec, a0: float = 0.5, eps: float = 0.1,
                         k: float = 1.0) -> Field3:
    """Helix with slowly varying cone angle; unit norm, periodic-friendly."""
    s = g.nodes
    a = a0 + eps * np.sin(2 * np.pi * s / g.length)
    th = k * s
    return Field3(np.stack([a * np.cos(th), a * np.sin(th), np.sqrt(1.0 - a * a)], axis=1))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
