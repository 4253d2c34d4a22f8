"""Keypoint mask encodings and the focal keypoint loss, as pure math.

No network code lives here: masks are plain grids and the loss is an
explicit per-cell sum, so every value can be checked against hand
computations and finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .errors import InvalidProbability, InvalidSigma, OutOfBounds
from .geometry import Point2D

# Probabilities are clamped this far inside (0, 1) before any log.
PROB_CLAMP = 1e-7


@dataclass(frozen=True)
class KeypointMask:
    """H x W grid in [0, 1]; binary masks carry exactly one 1-cell."""

    width: int
    height: int
    values: np.ndarray
    kind: str  # "binary" or "heatmap"
    sigma: Optional[float] = None


def _rounded_cell(location: Point2D, width: int, height: int):
    # round-half-up keeps .5 ties deterministic across platforms
    col = math.floor(location.x + 0.5)
    row = math.floor(location.y + 0.5)
    if not (0 <= col < width and 0 <= row < height):
        raise OutOfBounds(
            f"location ({location.x}, {location.y}) rounds to cell "
            f"({row}, {col}) outside {height}x{width}"
        )
    return row, col


def binary_mask(location: Point2D, width: int, height: int) -> KeypointMask:
    """One-hot mask with a single 1 at the rounded keypoint cell."""
    row, col = _rounded_cell(location, width, height)
    values = np.zeros((height, width), dtype=np.float64)
    values[row, col] = 1.0
    return KeypointMask(width=width, height=height, values=values, kind="binary")


def heatmap_mask(location: Point2D, width: int, height: int, sigma: float) -> KeypointMask:
    """Unnormalized Gaussian bump with peak exactly 1 at the keypoint cell."""
    if not (sigma > 0.0 and math.isfinite(sigma)):
        raise InvalidSigma(f"sigma must be positive and finite, got {sigma!r}")
    row, col = _rounded_cell(location, width, height)
    ii = np.arange(height, dtype=np.float64)[:, None]
    jj = np.arange(width, dtype=np.float64)[None, :]
    values = np.exp(-((ii - row) ** 2 + (jj - col) ** 2) / (2.0 * sigma * sigma))
    return KeypointMask(width=width, height=height, values=values, kind="heatmap", sigma=sigma)


@dataclass
class FocalLossInput:
    """Predicted probability grids, binary targets, and the focusing power.

    probs and targets are (K, H, W); the normalizer defaults to K, one unit
    per keypoint instance.
    """

    probs: np.ndarray
    targets: np.ndarray
    gamma: float = 2.0
    normalizer: Optional[float] = None

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.int64)
        if self.probs.shape != self.targets.shape:
            raise ValueError(
                f"probs shape {self.probs.shape} != targets shape {self.targets.shape}"
            )
        if self.probs.ndim == 2:
            self.probs = self.probs[None, ...]
            self.targets = self.targets[None, ...]
        if self.probs.ndim != 3:
            raise ValueError(f"expected (K, H, W) grids, got ndim={self.probs.ndim}")
        if not np.all((self.probs > 0.0) & (self.probs < 1.0)):
            raise InvalidProbability("probabilities must be strictly inside (0, 1)")
        if not (self.gamma >= 0.0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma!r}")
        if self.normalizer is None:
            self.normalizer = float(self.probs.shape[0])
        if not self.normalizer > 0:
            raise ValueError(f"normalizer must be positive, got {self.normalizer!r}")

    def clamped_probs(self) -> np.ndarray:
        return np.clip(self.probs, PROB_CLAMP, 1.0 - PROB_CLAMP)


def focal_keypoint_loss(inp: FocalLossInput) -> float:
    """Modulated cross-entropy over every cell, scaled by -1/N.

    Positive cells contribute (1-p)^gamma * log(p); all others contribute
    p^gamma * log(1-p). gamma=0 reduces to plain cross-entropy / N.
    """
    p = inp.clamped_probs().ravel()
    y = inp.targets.ravel()
    return -_kernels.focal_terms_sum(p, y, float(inp.gamma)) / inp.normalizer


def focal_loss_gradient(inp: FocalLossInput) -> np.ndarray:
    """Per-cell d(loss)/d(p), analytic; matches central finite differences."""
    p = inp.clamped_probs().ravel()
    y = inp.targets.ravel()
    grad = _kernels.focal_terms_grad(p, y, float(inp.gamma))
    return np.asarray(grad).reshape(inp.probs.shape) * (-1.0 / inp.normalizer)


def cross_entropy_loss(inp: FocalLossInput) -> float:
    """Plain cross-entropy / N, kept separate as the gamma=0 reference."""
    p = inp.clamped_probs()
    terms = np.where(inp.targets == 1, np.log(p), np.log1p(-p))
    return -float(terms.sum()) / inp.normalizer
