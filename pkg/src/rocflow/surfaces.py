"""Initial support functions: spheres, harmonic perturbations, snapshots."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import lpmv

from .geometry import compute_roc
from .grid import SupportField


@dataclass(frozen=True)
class Harmonic:
    """Real spherical harmonic term ``amp * P_l^m(z) * trig(m phi)``.

    ``m >= 0`` uses cos(m phi), ``m < 0`` uses sin(|m| phi).
    """

    l: int
    m: int
    amp: float

    def __call__(self, n: np.ndarray) -> np.ndarray:
        z = np.clip(n[..., 2], -1.0, 1.0)
        phi = np.arctan2(n[..., 1], n[..., 0])
        m = abs(self.m)
        if m > self.l:
            raise ValueError(f"|m| must not exceed l, got l={self.l}, m={self.m}")
        trig = np.cos(m * phi) if self.m >= 0 else np.sin(m * phi)
        return self.amp * lpmv(m, self.l, z) * trig


def harmonic_support(terms, radius: float = 1.0):
    """Function n -> radius * (1 + sum of terms)."""
    terms = [t if isinstance(t, Harmonic) else Harmonic(*t) for t in terms]

    def r(n):
        return radius * (1.0 + sum(t(n) for t in terms))

    return r


def perturbed_sphere(n_core: int, eps: float = 0.05, l: int = 2, m: int = 0,
                     radius: float = 1.0) -> SupportField:
    """Support field of ``radius * (1 + eps * P_l^m(z) cos(m phi))``."""
    return SupportField.from_function(harmonic_support([Harmonic(l, m, eps)], radius), n_core)


def random_surface(n_core: int, seed: int, amplitude: float = 0.05, l_max: int = 4,
                   radius: float = 1.0) -> SupportField:
    """Seeded random harmonic perturbation with sup-norm ``amplitude``.

    Degrees 2..l_max are used (degree 1 is a translation).
    """
    rng = np.random.default_rng(seed)
    terms = []
    for l in range(2, l_max + 1):
        for m in range(-l, l + 1):
            # normalise the associated Legendre growth so high m does not dominate
            norm = math.sqrt(math.factorial(l - abs(m)) / math.factorial(l + abs(m)))
            terms.append(Harmonic(l, m, float(rng.normal()) * norm))
    base = harmonic_support(terms, 1.0)
    probe = np.random.default_rng(seed + 1).normal(size=(4000, 3))
    probe /= np.linalg.norm(probe, axis=1, keepdims=True)
    peak = float(np.abs(base(probe) - 1.0).max())
    scale = amplitude / peak

    def r(n):
        return radius * (1.0 + scale * (base(n) - 1.0))

    field = SupportField.from_function(r, n_core)
    compute_roc(field)  # raise early if the draw is not convex
    return field


def save_snapshot(path, field: SupportField, **meta) -> None:
    north, south = field.arrays()
    np.savez_compressed(path, north=north, south=south, t=field.t, n_core=field.n_core,
                        **{k: np.asarray(v) for k, v in meta.items()})


def load_snapshot(path) -> SupportField:
    with np.load(path) as data:
        return SupportField.from_arrays(data["north"], data["south"], t=float(data["t"]))
