# -*- coding: utf-8 -*-
"""Structural similarity and Frechet distance of image sets."""

# Import python modules.
from dataclasses import dataclass

import numpy as np
import torch
from scipy import linalg, signal

# Import local stuff
from .errors import FeatureError, NumericalError, ShapeMismatch, WindowTooLarge

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
LUMA_WEIGHTS = (0.299, 0.587, 0.114)
EIGENVALUE_TOLERANCE = 1e-8


def _as_numpy(image):
    if isinstance(image, torch.Tensor):
        image = image.detach().cpu().numpy()
    return np.asarray(image, dtype=np.float64)


def rgb_to_gray(image) -> np.ndarray:
    """Luma of an image (BT.601 weights).

    Accepts H x W, H x W x 3, 3 x H x W and 1 x H x W images.
    """

    image = _as_numpy(image)
    if image.ndim == 2:
        return image
    if image.ndim == 3:
        if image.shape[-1] == 3:
            return image @ np.array(LUMA_WEIGHTS)
        if image.shape[0] == 3:
            return np.tensordot(np.array(LUMA_WEIGHTS), image, axes=1)
        if image.shape[0] == 1:
            return image[0]
        if image.shape[-1] == 1:
            return image[..., 0]
    raise ShapeMismatch(f"Can not convert an image of shape {image.shape} to gray")


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized 2D Gaussian window"""
    x = np.arange(size) - (size - 1) / 2.0
    kernel = np.exp(-(x**2) / (2.0 * sigma**2))
    kernel /= kernel.sum()
    return np.outer(kernel, kernel)


def ssim_map(a, b, *, window_size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA):
    """Local SSIM values of all fully contained windows of two gray images"""

    if a.shape != b.shape:
        raise ShapeMismatch(f"Images of shapes {a.shape} and {b.shape} can not be compared")
    if min(a.shape) < window_size:
        raise WindowTooLarge(
            f"Images of shape {a.shape} are smaller than the SSIM window {window_size}"
        )

    window = gaussian_window(window_size, sigma)
    c1 = SSIM_K1**2
    c2 = SSIM_K2**2

    def filtered(image):
        return signal.convolve2d(image, window, mode="valid")

    mu_a = filtered(a)
    mu_b = filtered(b)
    sigma_a = filtered(a * a) - mu_a**2
    sigma_b = filtered(b * b) - mu_b**2
    sigma_ab = filtered(a * b) - mu_a * mu_b

    return ((2.0 * mu_a * mu_b + c1) * (2.0 * sigma_ab + c2)) / (
        (mu_a**2 + mu_b**2 + c1) * (sigma_a + sigma_b + c2)
    )


def ssim(a, b) -> float:
    """Mean structural similarity of two images with dynamic range 1.

    Color images are converted to gray first. The local statistics are weighted with
    an 11 x 11 Gaussian window with sigma 1.5, only windows fully inside the image
    contribute.
    """

    a = _as_numpy(a)
    b = _as_numpy(b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"Images of shapes {a.shape} and {b.shape} can not be compared")
    return float(np.mean(ssim_map(rgb_to_gray(a), rgb_to_gray(b))))


@dataclass(frozen=True, eq=False)
class FeatureStats:
    """Mean and (symmetrized) covariance of image features"""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=np.float64))
        if cov.shape != (len(mean), len(mean)):
            raise ShapeMismatch(
                f"Covariance of shape {cov.shape} does not match the mean of size "
                f"{len(mean)}"
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))

    @classmethod
    def from_features(cls, features):
        """Statistics of an N x F feature array"""
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or len(features) < 2:
            raise FeatureError(
                f"Feature statistics need at least 2 feature vectors, got shape "
                f"{features.shape}"
            )
        if not np.all(np.isfinite(features)):
            raise FeatureError("The extracted features are not finite")
        return cls(features.mean(axis=0), np.cov(features, rowvar=False))


def extract_features(images, extractor, *, batch_size: int = 64) -> np.ndarray:
    """Globally average pooled activations of the last tap of the extractor

    Args
    ----
    images:
        N x 3 x H x W tensor or sequence of 3 x H x W images
    """

    if not isinstance(images, torch.Tensor):
        images = torch.stack([torch.as_tensor(np.asarray(image)) for image in images])
    images = images.float()
    features = []
    with torch.no_grad():
        for start in range(0, len(images), batch_size):
            activation = extractor.activations(images[start : start + batch_size])[-1]
            features.append(activation.mean(dim=(2, 3)).double().cpu().numpy())
    return np.concatenate(features, axis=0)


def feature_stats(images, extractor, *, batch_size: int = 64) -> FeatureStats:
    return FeatureStats.from_features(
        extract_features(images, extractor, batch_size=batch_size)
    )


def _psd_eigenvalues(matrix, name):
    """Eigen decomposition of a symmetric matrix with small negative eigenvalues
    clipped to zero"""
    eigenvalues, eigenvectors = linalg.eigh(0.5 * (matrix + matrix.T))
    tolerance = EIGENVALUE_TOLERANCE * max(1.0, np.abs(eigenvalues).max())
    if eigenvalues.min() < -tolerance:
        raise NumericalError(
            f"The {name} has the negative eigenvalue {eigenvalues.min()}"
        )
    return np.clip(eigenvalues, 0.0, None), eigenvectors


def frechet_distance(stats_1: FeatureStats, stats_2: FeatureStats) -> float:
    """Frechet distance of two Gaussians.

    The trace of (cov_1 cov_2)^(1/2) is evaluated as the trace of the square root of
    the symmetric matrix cov_1^(1/2) cov_2 cov_1^(1/2), which has the same
    eigenvalues.
    """

    if stats_1.mean.shape != stats_2.mean.shape:
        raise ShapeMismatch(
            f"Feature dimensions {stats_1.mean.shape} and {stats_2.mean.shape} differ"
        )

    values, vectors = _psd_eigenvalues(stats_1.cov, "first covariance")
    sqrt_cov_1 = (vectors * np.sqrt(values)) @ vectors.T
    product, _ = _psd_eigenvalues(
        sqrt_cov_1 @ stats_2.cov @ sqrt_cov_1, "covariance product"
    )
    trace_sqrt = np.sum(np.sqrt(product))

    diff = stats_1.mean - stats_2.mean
    distance = (
        diff @ diff + np.trace(stats_1.cov) + np.trace(stats_2.cov) - 2.0 * trace_sqrt
    )
    return float(max(distance, 0.0))


def fid_from_images(real_images, fake_images, extractor) -> float:
    """Frechet distance of the extractor features of two image sets"""
    return frechet_distance(
        feature_stats(real_images, extractor), feature_stats(fake_images, extractor)
    )
