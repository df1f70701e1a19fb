"""Multi-scale Gabor wavelet bank and ridge-regression image coding.

The bank places, for each scale of s cycles per image, an s x s uniform grid
of wavelets, crossed with every orientation and quadrature phase, so the
wavelet count is sum_s s^2 * n_orientations * n_phases (1328 for the default
scales (3, 6, 11) with 4 orientations and 2 phases). Each wavelet is a cosine
grating under an isotropic Gaussian envelope, truncated by rasterization to
the image borders (no renormalization).

Envelope size follows from the octave-bandwidth constraint. With center
frequency f (cycles/pixel) and bandwidth b octaves we use the closed form

    sigma_freq    = f * (2**b - 1) / (2**b + 1) * sqrt(ln 2 / 2)
    sigma_spatial = 1 / (2 * pi * sigma_freq)

The recorded orientation bandwidth is metadata: with an isotropic envelope it
is tied to the frequency bandwidth rather than independently adjustable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import InvalidInput, InvalidSpec
from .validation import as_image_batch

DEFAULT_SCALES = (3, 6, 11)
DEFAULT_ORIENTATIONS = (0.0, 45.0, 90.0, 135.0)
DEFAULT_PHASES = (0.0, 90.0)


@dataclass(frozen=True)
class GaborBankSpec:
    """Parameters that fully determine a wavelet bank."""

    side: int = 128
    scales: tuple[int, ...] = DEFAULT_SCALES
    orientations_deg: tuple[float, ...] = DEFAULT_ORIENTATIONS
    phases_deg: tuple[float, ...] = DEFAULT_PHASES
    bandwidth_octaves: float = 1.0
    orientation_bandwidth_deg: float = 41.0

    def __post_init__(self):
        object.__setattr__(self, "scales", tuple(int(s) for s in self.scales))
        object.__setattr__(self, "orientations_deg", tuple(float(o) for o in self.orientations_deg))
        object.__setattr__(self, "phases_deg", tuple(float(p) for p in self.phases_deg))
        if self.side < 2:
            raise InvalidSpec("side must be >= 2")
        if not self.scales or any(s < 1 for s in self.scales):
            raise InvalidSpec("scales must be positive cycle counts")
        if not self.orientations_deg or not self.phases_deg:
            raise InvalidSpec("need at least one orientation and one phase")
        if self.bandwidth_octaves <= 0:
            raise InvalidSpec("bandwidth_octaves must be positive")

    def to_dict(self) -> dict:
        return {
            "side": self.side,
            "scales": list(self.scales),
            "orientations_deg": list(self.orientations_deg),
            "phases_deg": list(self.phases_deg),
            "bandwidth_octaves": self.bandwidth_octaves,
            "orientation_bandwidth_deg": self.orientation_bandwidth_deg,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GaborBankSpec":
        return cls(
            side=int(d["side"]),
            scales=tuple(d["scales"]),
            orientations_deg=tuple(d["orientations_deg"]),
            phases_deg=tuple(d["phases_deg"]),
            bandwidth_octaves=float(d["bandwidth_octaves"]),
            orientation_bandwidth_deg=float(d["orientation_bandwidth_deg"]),
        )


def bank_size(spec: GaborBankSpec) -> int:
    """Wavelet count: sum over scales of s^2 * n_phases * n_orientations."""
    per_position = len(spec.phases_deg) * len(spec.orientations_deg)
    return sum(s * s * per_position for s in spec.scales)


def envelope_sigma(frequency: float, octaves: float) -> float:
    """Spatial envelope std (pixels) for a grating of ``frequency`` c/px."""
    sigma_freq = frequency * (2.0**octaves - 1.0) / (2.0**octaves + 1.0) * np.sqrt(np.log(2.0) / 2.0)
    return 1.0 / (2.0 * np.pi * sigma_freq)


def gaussian_envelope(side: int, cx: float, cy: float, sigma: float) -> np.ndarray:
    """Isotropic Gaussian mask rasterized on the image grid."""
    ys, xs = np.mgrid[0:side, 0:side].astype(np.float64)
    return np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2.0 * sigma * sigma))


@dataclass
class GaborBank:
    """Rasterized bank plus cached solver state for ridge encoding."""

    spec: GaborBankSpec
    basis: np.ndarray  # (side*side, n_wavelets), one column per wavelet
    # per-column parameters, aligned with basis columns
    scales_px: np.ndarray = field(repr=False, default=None)
    centers: np.ndarray = field(repr=False, default=None)  # (n, 2) as (cx, cy)
    orientations: np.ndarray = field(repr=False, default=None)
    phases: np.ndarray = field(repr=False, default=None)
    sigmas: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        self._gram = None
        self._factors = {}

    @property
    def n_wavelets(self) -> int:
        return self.basis.shape[1]

    @property
    def side(self) -> int:
        return self.spec.side

    @property
    def gram(self) -> np.ndarray:
        if self._gram is None:
            self._gram = self.basis.T @ self.basis
        return self._gram

    def default_penalty(self) -> float:
        """Mild scale-invariant ridge penalty: 1e-4 * trace(G'G) / n_wavelets."""
        return 1e-4 * float(np.trace(self.gram)) / self.n_wavelets

    def _factor(self, penalty: float):
        key = float(penalty)
        if key not in self._factors:
            m = self.n_wavelets
            self._factors[key] = cho_factor(self.gram + key * np.eye(m), lower=True)
        return self._factors[key]

    def encode(self, images, penalty: float | None = None, mean=0.0) -> np.ndarray:
        """Ridge-regression weights for one image or a batch.

        Solves argmin_w ||G w - x||^2 + penalty ||w||^2 on the mean-removed
        pixel vector x, via a Cholesky factorization of (G'G + penalty I)
        shared across images, followed by one iterative-refinement step to
        wash out normal-equation conditioning error.
        """
        arr = np.asarray(images)
        single = arr.ndim == 2 and arr.shape == (self.side, self.side)
        X = as_image_batch(images, side=self.side).reshape(-1, self.side * self.side)
        X = X - _flat_mean(mean)
        if penalty is None:
            penalty = self.default_penalty()
        if penalty < 0:
            raise InvalidInput("ridge penalty must be >= 0")
        factor = self._factor(penalty)
        G = self.basis
        W = cho_solve(factor, G.T @ X.T).T
        residual = X - W @ G.T
        W = W + cho_solve(factor, G.T @ residual.T - penalty * W.T).T
        return W[0] if single else W

    def render(self, weights, mean=0.0) -> np.ndarray:
        """Pixels G w plus ``mean``; not clipped (clipping happens at export)."""
        W = np.atleast_2d(np.asarray(weights, dtype=np.float64))
        if W.shape[1] != self.n_wavelets:
            raise InvalidInput(f"expected weight length {self.n_wavelets}, got {W.shape[1]}")
        if not np.all(np.isfinite(W)):
            raise InvalidInput("weights contain non-finite values")
        pixels = W @ self.basis.T + _flat_mean(mean)
        out = pixels.reshape(-1, self.side, self.side)
        return out[0] if np.asarray(weights).ndim == 1 else out


def _flat_mean(mean):
    """A scalar or a flattened (1, n_pixels) reference image."""
    if np.ndim(mean) == 0:
        return float(mean)
    return np.asarray(mean, dtype=np.float64).reshape(1, -1)


def build_bank(spec: GaborBankSpec) -> GaborBank:
    """Rasterize every wavelet of ``spec`` into the basis matrix.

    Column order: scale-major, then grid row, grid column, orientation,
    phase. Grid cell centers sit at ((g + 0.5) * side/s - 0.5) in pixel
    coordinates, so odd scales place one wavelet exactly at the image center.
    """
    side = spec.side
    if side < 2 * max(spec.scales):
        raise InvalidSpec(
            f"side {side} too small for finest scale {max(spec.scales)} (need side >= 2*scale)"
        )
    ys, xs = np.mgrid[0:side, 0:side].astype(np.float64)
    n = bank_size(spec)
    basis = np.empty((side * side, n))
    scales_px = np.empty(n)
    centers = np.empty((n, 2))
    orientations = np.empty(n)
    phases = np.empty(n)
    sigmas = np.empty(n)

    j = 0
    for s in spec.scales:
        freq = s / side  # cycles per pixel
        sigma = envelope_sigma(freq, spec.bandwidth_octaves)
        spacing = side / s
        for gy in range(s):
            cy = (gy + 0.5) * spacing - 0.5
            for gx in range(s):
                cx = (gx + 0.5) * spacing - 0.5
                dx, dy = xs - cx, ys - cy
                env = np.exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma))
                for theta_deg in spec.orientations_deg:
                    theta = np.deg2rad(theta_deg)
                    u = dx * np.cos(theta) + dy * np.sin(theta)
                    carrier = 2.0 * np.pi * freq * u
                    for phase_deg in spec.phases_deg:
                        basis[:, j] = (env * np.cos(carrier + np.deg2rad(phase_deg))).ravel()
                        scales_px[j] = s
                        centers[j] = (cx, cy)
                        orientations[j] = theta_deg
                        phases[j] = phase_deg
                        sigmas[j] = sigma
                        j += 1
    bank = GaborBank(spec, basis, scales_px, centers, orientations, phases, sigmas)
    if np.any(np.max(np.abs(basis), axis=0) == 0.0):
        raise InvalidSpec("bank construction produced an all-zero wavelet")
    return bank


__all__ = [
    "GaborBankSpec",
    "GaborBank",
    "bank_size",
    "build_bank",
    "envelope_sigma",
    "gaussian_envelope",
]
