"""Closed-form distortion powers for MR combining over i.i.d. Rayleigh fading.

All quantities are in linear units and normalized by ``E{||h||^2} = M``
(unit-variance channel entries). Conversion to dB belongs to the reporting
layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ClosedFormInputs",
    "bs_distortion_mr_corr",
    "bs_distortion_mr_uncorr",
    "distortion_ratio",
    "ue_distortion_mr",
    "asymptotic_se_gap",
    "moment_oracle",
    "to_db",
]


@dataclass(frozen=True)
class ClosedFormInputs:
    """System parameters for the i.i.d. Rayleigh closed forms.

    ``backoff`` is linear (7 dB is ``10**0.7``); ``p`` is the per-UE transmit
    power and ``noise_power`` is carried along for normalizations done by
    callers.
    """

    M: int
    K: int
    alpha: float = 1.0 / 3.0
    backoff: float = 10 ** 0.7
    p: float = 1.0
    noise_power: float = 1.0
    kappa: float = 1.0

    def __post_init__(self):
        if self.M < 1 or self.K < 1:
            raise ValueError(f"M and K must be >= 1, got M={self.M}, K={self.K}")
        if not 0 <= self.alpha <= 1.0 / 3.0 + 1e-12:
            raise ValueError(f"alpha must lie in [0, 1/3], got {self.alpha}")
        if self.backoff < 1:
            raise ValueError(f"back-off must be >= 1, got {self.backoff}")
        if not 0 <= self.kappa <= 1:
            raise ValueError(f"kappa must lie in [0, 1], got {self.kappa}")
        if self.p <= 0 or self.noise_power <= 0:
            raise ValueError("powers must be > 0")

    @property
    def scale(self):
        return 2 * self.alpha**2 * self.p / self.backoff**2


def bs_distortion_mr_corr(x: ClosedFormInputs):
    """``E{h^H C_etaeta h} / E{||h||^2}`` with the full distortion correlation."""
    M, K = x.M, x.K
    return x.scale * (K + 6 + 9 / K + 4 / K**2 + 2 * M * (K + 1) / K**2)


def bs_distortion_mr_uncorr(x: ClosedFormInputs):
    """Same quantity with ``C_etaeta`` replaced by its diagonal; independent of ``M``."""
    K = x.K
    return x.scale * (K + 6 + 11 / K + 6 / K**2)


def distortion_ratio(M, K):
    """Ratio of correlated to uncorrelated BS distortion, ``1 + 2(M-1)/((K+2)(K+3))``."""
    if M < 1 or K < 1:
        raise ValueError(f"M and K must be >= 1, got M={M}, K={K}")
    return 1 + 2 * (M - 1) / ((K + 2) * (K + 3))


def ue_distortion_mr(x: ClosedFormInputs):
    """``E{|h^H D h|^2} / E{||h||^2}``: effective channel gain seen by UE distortion."""
    M, K = x.M, x.K
    c = x.alpha / x.backoff
    return ((M + 1)
            - 4 * c * (M * K + K + M + 3) / K
            + 4 * c**2 * (M * K**2 + 8 * K + 11 + 2 * M * K + K**2 + M) / K**2)


def asymptotic_se_gap(kappa):
    """Large-array SE overestimation ``log2(1 / (1 - kappa/2))`` from neglecting correlation."""
    kappa = np.asarray(kappa, dtype=float)
    if np.any((kappa <= 0) | (kappa >= 1)):
        raise ValueError("kappa must lie in (0, 1)")
    out = -np.log2(1 - kappa / 2)
    return float(out) if out.ndim == 0 else out


def moment_oracle(p):
    """``E{|h|^(2p)} = p!`` for a unit-variance circular complex Gaussian."""
    if int(p) != p or p < 1:
        raise ValueError(f"p must be a positive integer, got {p}")
    return math.factorial(int(p))


def to_db(x):
    return 10 * np.log10(x)
