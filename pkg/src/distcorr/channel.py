"""Channel realizations for the single-cell uplink.

Three fading models are supported: i.i.d. Rayleigh, spatially correlated
Rayleigh from the Gaussian local scattering model of a uniform linear array,
and far-field free-space propagation along the same array. Channel gains are
folded into ``H`` so that ``snr_k = p * E{||h_k||^2} / (M * noise_power)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import dft, toeplitz

__all__ = [
    "KINDS",
    "ChannelModel",
    "ChannelRealization",
    "steering_vector",
    "spatial_correlation_matrix",
    "psd_sqrt",
    "draw_channel",
    "signal_correlation",
    "dft_pilots",
    "pilot_observations",
    "ls_estimate",
]

KINDS = ("iid-rayleigh", "correlated-rayleigh", "free-space-ula")

# Gauss-Hermite nodes for the angular integral
_GH_NODES = 64
_ANGLE_LIMIT = 60.0


def steering_vector(M, angle_deg, spacing=0.5):
    """Unit-modulus ULA response ``exp(2j*pi*spacing*m*sin(angle))``."""
    m = np.arange(M)
    return np.exp(2j * np.pi * spacing * m * np.sin(np.deg2rad(angle_deg)))


def spatial_correlation_matrix(M, angle_deg, std_deg, spacing=0.5):
    """Local scattering correlation matrix of a uniform linear array.

    The angle of arrival is ``angle_deg + delta`` with ``delta`` Gaussian with
    standard deviation ``std_deg``. The first column of the Toeplitz matrix is
    integrated with Gauss-Hermite quadrature; the diagonal is one, so the
    trace equals ``M``.

    Parameters
    ----------
    M : int
        Number of antennas.
    angle_deg : float
        Nominal angle of arrival in degrees.
    std_deg : float
        Angular standard deviation in degrees. Zero gives a rank-one matrix.
    spacing : float
        Antenna spacing in wavelengths.

    Returns
    -------
    R : ndarray, shape (M, M)
        Hermitian positive semi-definite correlation matrix.
    """
    if M < 1:
        raise ValueError(f"M must be a positive integer, got {M}")
    if std_deg < 0:
        raise ValueError(f"angular standard deviation must be >= 0, got {std_deg}")
    if spacing <= 0:
        raise ValueError(f"antenna spacing must be > 0, got {spacing}")

    if std_deg == 0:
        a = steering_vector(M, angle_deg, spacing)
        return np.outer(a, a.conj())

    x, w = np.polynomial.hermite.hermgauss(_GH_NODES)
    angles = np.deg2rad(angle_deg) + np.sqrt(2.0) * np.deg2rad(std_deg) * x
    lags = np.arange(M)[:, None]
    col = (np.exp(2j * np.pi * spacing * lags * np.sin(angles)) * w).sum(axis=1)
    col /= np.sqrt(np.pi)
    col[0] = 1.0
    R = toeplitz(col)
    return (R + R.conj().T) / 2


def psd_sqrt(R, rtol=1e-12):
    """Return ``F`` with ``F @ F^H == R`` for Hermitian PSD ``R``.

    Eigenvalues below ``rtol * trace(R)`` are treated as zero and their
    eigenvectors dropped, so ``F`` has ``rank(R)`` columns.
    """
    lam, U = np.linalg.eigh(R)
    tr = float(np.real(np.trace(R)))
    keep = lam > rtol * max(tr, np.finfo(float).tiny)
    return U[:, keep] * np.sqrt(lam[keep])


@dataclass(frozen=True)
class ChannelModel:
    """Fading model description for ``K`` single-antenna users and ``M`` antennas.

    ``ue_snrs`` are linear ``p_k / noise_power`` ratios; ``ue_angles`` are in
    degrees and only used by the array models.
    """

    kind: str
    M: int
    K: int
    ue_snrs: tuple = None
    ue_angles: tuple = None
    angular_std: float = 10.0
    antenna_spacing: float = 0.5
    p: float = 1.0
    noise_power: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}; expected one of {KINDS}")
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M}")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"K must be a positive integer, got {self.K}")
        snrs = (1.0,) * self.K if self.ue_snrs is None else tuple(float(s) for s in self.ue_snrs)
        if len(snrs) != self.K:
            raise ValueError(f"expected {self.K} SNR values, got {len(snrs)}")
        if any(not s > 0 for s in snrs):
            raise ValueError("all UE SNRs must be > 0")
        object.__setattr__(self, "ue_snrs", snrs)
        if self.p <= 0 or self.noise_power <= 0:
            raise ValueError("transmit power and noise power must be > 0")

        if self.kind != "iid-rayleigh":
            if self.ue_angles is None:
                raise ValueError(f"{self.kind} requires ue_angles")
            angles = tuple(float(a) for a in self.ue_angles)
            if len(angles) != self.K:
                raise ValueError(f"expected {self.K} UE angles, got {len(angles)}")
            if any(abs(a) > _ANGLE_LIMIT for a in angles):
                raise ValueError(f"UE angles must lie in [-{_ANGLE_LIMIT}, {_ANGLE_LIMIT}] degrees")
            object.__setattr__(self, "ue_angles", angles)
            if self.antenna_spacing <= 0:
                raise ValueError("antenna spacing must be > 0")
        if self.kind == "correlated-rayleigh" and self.angular_std < 0:
            raise ValueError("angular standard deviation must be >= 0")

    @property
    def gains(self):
        """Per-UE average channel gain ``E{|h_km|^2}``."""
        return np.asarray(self.ue_snrs) * self.noise_power / self.p

    def average_power(self):
        """Statistical per-antenna received power ``E{|u_m|^2} = p * sum_k gain_k``.

        Every model here has unit-diagonal spatial correlation, so the value
        is the same at all antennas.
        """
        return np.full(self.M, self.p * self.gains.sum())

    @cached_property
    def correlation_factors(self):
        # square-root factors of R_k, correlated-rayleigh only
        return [
            psd_sqrt(spatial_correlation_matrix(self.M, a, self.angular_std, self.antenna_spacing))
            for a in self.ue_angles
        ]

    def correlation_matrices(self):
        """Normalized spatial correlation ``R_k`` of every UE (trace ``M``)."""
        if self.kind == "iid-rayleigh":
            return [np.eye(self.M, dtype=complex) for _ in range(self.K)]
        if self.kind == "correlated-rayleigh":
            return [
                spatial_correlation_matrix(self.M, a, self.angular_std, self.antenna_spacing)
                for a in self.ue_angles
            ]
        out = []
        for a in self.ue_angles:
            v = steering_vector(self.M, a, self.antenna_spacing)
            out.append(np.outer(v, v.conj()))
        return out


@dataclass(frozen=True)
class ChannelRealization:
    """One ``M x K`` channel draw; column ``k`` is ``h_k``."""

    H: np.ndarray
    model: ChannelModel = field(repr=False)

    def __post_init__(self):
        if self.H.shape != (self.model.M, self.model.K):
            raise ValueError(f"H has shape {self.H.shape}, expected {(self.model.M, self.model.K)}")


def _crandn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def draw_channel(model: ChannelModel, rng: np.random.Generator) -> ChannelRealization:
    """Draw one channel matrix from ``model`` using the generator ``rng``."""
    M, K = model.M, model.K
    amp = np.sqrt(model.gains)
    if model.kind == "iid-rayleigh":
        H = _crandn(rng, (M, K)) * amp
    elif model.kind == "correlated-rayleigh":
        H = np.empty((M, K), dtype=complex)
        for k, F in enumerate(model.correlation_factors):
            H[:, k] = amp[k] * (F @ _crandn(rng, F.shape[1]))
    else:
        phases = np.exp(2j * np.pi * rng.random(K))
        H = np.stack(
            [steering_vector(M, a, model.antenna_spacing) for a in model.ue_angles], axis=1
        )
        H = H * (amp * phases)
    return ChannelRealization(H, model)


def signal_correlation(H, p=1.0):
    """Correlation ``C_uu = p H H^H`` of the noise-free received signal."""
    if isinstance(H, ChannelRealization):
        H = H.H
    if p <= 0:
        raise ValueError(f"transmit power must be > 0, got {p}")
    C = p * (H @ H.conj().T)
    return (C + C.conj().T) / 2


def dft_pilots(K):
    """Unitary ``K x K`` DFT matrix; row ``k`` is the pilot of UE ``k``."""
    return dft(K, scale="sqrtn")


def _check_unitary(F, atol=1e-10):
    F = np.asarray(F)
    if F.ndim != 2 or F.shape[0] != F.shape[1]:
        raise ValueError(f"pilot matrix must be square, got shape {F.shape}")
    if not np.allclose(F @ F.conj().T, np.eye(F.shape[0]), atol=atol):
        raise ValueError("pilot matrix must be unitary")
    return F


def pilot_observations(H, pilots, p, noise_power, rng, distort=None, kappa=1.0):
    """Received pilot block ``Y`` (``M x K``) after hardware and noise.

    UE ``k`` sends ``sqrt(K p)`` times row ``k`` of the unitary ``pilots``
    over ``K`` symbols, each symbol carrying UE distortion of power
    ``(1 - kappa) p``. The noise-free block is passed sample-wise through
    ``distort`` (a callable on ``M x K`` arrays) before thermal noise is
    added.
    """
    F = _check_unitary(pilots)
    M, K = H.shape
    S = np.sqrt(kappa * p * K) * F
    if kappa < 1:
        S = S + np.sqrt((1 - kappa) * p) * _crandn(rng, (K, K))
    U = H @ S
    Z = U if distort is None else distort(U)
    return Z + np.sqrt(noise_power) * _crandn(rng, (M, K))


def ls_estimate(Y, pilots, p):
    """Least-squares channel estimate from orthogonal pilots.

    ``Y`` is the ``M x K`` pilot observation and ``pilots`` the unitary DFT
    matrix. With ``Phi = sqrt(K) * pilots`` the estimate is
    ``Y Phi^H / (sqrt(p) K)``.
    """
    F = _check_unitary(pilots)
    K = F.shape[0]
    if Y.shape[1] != K:
        raise ValueError(f"observation has {Y.shape[1]} columns but {K} pilots")
    Phi = np.sqrt(K) * F
    return Y @ Phi.conj().T / (np.sqrt(p) * K)
