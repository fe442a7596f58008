"""Antenna array geometries and their steering (response) vectors.

Supports uniform linear arrays (ULA, azimuth-only response) and uniform
planar arrays (UPA, response factorizes as horizontal-kron-vertical).
All steering vectors are normalized to unit Euclidean norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def _wrap_angle(x: float) -> float:
    """Wrap a finite angle to the canonical range [-pi, pi)."""
    if not math.isfinite(x):
        raise ValueError(f"angle must be finite, got {x!r}")
    return (x + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True)
class AngleOfPropagation:
    """Azimuth/elevation pair in radians, wrapped to [-pi, pi)."""

    azimuth: float
    elevation: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "azimuth", _wrap_angle(self.azimuth))
        object.__setattr__(self, "elevation", _wrap_angle(self.elevation))


@dataclass(frozen=True)
class ArrayGeometry:
    """Element counts and normalized spacings of a ULA or UPA.

    For a ULA, ``n`` is the element count and ``spacing`` the inter-element
    spacing in wavelengths (d/lambda).  For a UPA, ``n`` is ``(n_h, n_v)``
    and ``spacing`` is ``(d_h/lambda, d_v/lambda)``.
    """

    kind: str  # "ULA" | "UPA"
    n: int | tuple[int, int]
    spacing: float | tuple[float, float] = 0.5

    def __post_init__(self):
        if self.kind == "ULA":
            if not (isinstance(self.n, int) and self.n >= 1):
                raise ValueError(f"ULA element count must be a positive int, got {self.n!r}")
            if not (isinstance(self.spacing, (int, float)) and self.spacing > 0):
                raise ValueError(f"ULA spacing must be > 0, got {self.spacing!r}")
        elif self.kind == "UPA":
            n = self.n
            if not (isinstance(n, tuple) and len(n) == 2 and all(isinstance(k, int) and k >= 1 for k in n)):
                raise ValueError(f"UPA element counts must be a (n_h, n_v) pair of positive ints, got {n!r}")
            s = self.spacing
            if isinstance(s, (int, float)):
                s = (float(s), float(s))
                object.__setattr__(self, "spacing", s)
            if not (isinstance(s, tuple) and len(s) == 2 and all(v > 0 for v in s)):
                raise ValueError(f"UPA spacings must be a positive (d_h, d_v) pair, got {self.spacing!r}")
        else:
            raise ValueError(f"kind must be 'ULA' or 'UPA', got {self.kind!r}")

    @property
    def size(self) -> int:
        """Total element count."""
        if self.kind == "ULA":
            return self.n
        return self.n[0] * self.n[1]

    @staticmethod
    def ula(n: int, spacing: float = 0.5) -> "ArrayGeometry":
        return ArrayGeometry("ULA", n, spacing)

    @staticmethod
    def upa(n_h: int, n_v: int, spacing: float | tuple[float, float] = 0.5) -> "ArrayGeometry":
        return ArrayGeometry("UPA", (n_h, n_v), spacing)


def _ula_response(n: int, spacing: float, sin_angle: np.ndarray) -> np.ndarray:
    """Phase ramp exp(j*2*pi*spacing*m*sin_angle)/sqrt(n) over elements m.

    ``sin_angle`` may have any leading shape; the element axis is appended
    last.
    """
    sin_angle = np.asarray(sin_angle, dtype=float)
    m = np.arange(n)
    phase = TWO_PI * spacing * sin_angle[..., None] * m
    return np.exp(1j * phase) / math.sqrt(n)


def steering_matrix(geom: ArrayGeometry, azimuth, elevation=None) -> np.ndarray:
    """Steering vectors for a batch of angles, shape ``(..., geom.size)``.

    ``azimuth``/``elevation`` broadcast together.  Elevation is ignored for
    ULAs (their response has no vertical dependence); for UPAs the response
    is the Kronecker product of the horizontal (azimuth) and vertical
    (elevation) phase ramps.
    """
    az = np.asarray(azimuth, dtype=float)
    if geom.kind == "ULA":
        return _ula_response(geom.n, geom.spacing, np.sin(az))
    if elevation is None:
        raise ValueError("UPA steering requires an elevation angle")
    el = np.asarray(elevation, dtype=float)
    az, el = np.broadcast_arrays(az, el)
    n_h, n_v = geom.n
    d_h, d_v = geom.spacing
    a_h = _ula_response(n_h, d_h, np.sin(az))
    a_v = _ula_response(n_v, d_v, np.sin(el))
    # kron(a_h, a_v) per angle: element (p, q) -> index p*n_v + q
    out = a_h[..., :, None] * a_v[..., None, :]
    return out.reshape(az.shape + (n_h * n_v,))


def steering_vector(geom: ArrayGeometry, angle: AngleOfPropagation) -> np.ndarray:
    """Unit-norm array response vector for one propagation angle."""
    return steering_matrix(geom, angle.azimuth, angle.elevation)


def sample_angles(rng: np.random.Generator, size) -> tuple[np.ndarray, np.ndarray]:
    """Draw (azimuth, elevation) pairs with sines uniform on (-1, 1).

    Propagation angles live on (-pi/2, pi/2), where sin(.) is injective, so
    independently drawn angles give asymptotically orthogonal steering
    vectors.  Sampling uniformly in the sine (the array's natural spatial
    frequency) rather than in the angle avoids piling mass onto endfire
    sines, which at finite array sizes depresses the smallest channel
    singular values and with them the observable diversity slopes.
    """
    az = np.arcsin(rng.uniform(-1.0, 1.0, size))
    el = np.arcsin(rng.uniform(-1.0, 1.0, size))
    return az, el
