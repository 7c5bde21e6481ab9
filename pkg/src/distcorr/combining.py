"""Receive combiners, SINR evaluation and ergodic spectral efficiency.

After the Bussgang decomposition the received signal is
``y = D H s + eta + n``, so UE ``k`` sees the effective channel
``g_k = D h_k``. With UE hardware quality ``kappa`` a fraction ``1 - kappa``
of every transmit power is distortion that travels through the same channel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, orth

from .channel import (
    ChannelModel,
    draw_channel,
    dft_pilots,
    ls_estimate,
    pilot_observations,
    signal_correlation,
)
from .hardware import Identity, NumericalError, decompose

__all__ = [
    "SCHEMES",
    "MODES",
    "NullingError",
    "CombinerSet",
    "SinrBreakdown",
    "build_combiner",
    "sinr",
    "sinr_all",
    "Scenario",
    "realization_breakdowns",
    "ergodic_se",
    "sinr_imperfect_csi",
]

SCHEMES = ("mr", "da-mr", "da-zf", "da-mmse")
MODES = ("corr", "uncorr")
NULL_RTOL = 1e-10
# residual norm below this fraction of ||g_k|| counts as a vanished projection
ZF_RTOL = 1e-8
ANGLE_LIMIT = 60.0


class NullingError(NumericalError):
    """The desired effective channel lies inside the nulled subspace."""


@dataclass
class CombinerSet:
    """Combining vectors of one scheme; column ``k`` serves UE ``k``."""

    scheme: str
    V: np.ndarray


@dataclass
class SinrBreakdown:
    """Received power terms of the SINR; scalars or per-UE arrays."""

    signal: np.ndarray
    interference: np.ndarray
    ue_distortion: np.ndarray
    bs_distortion: np.ndarray
    noise: np.ndarray

    @property
    def denominator(self):
        return self.interference + self.ue_distortion + self.bs_distortion + self.noise

    @property
    def sinr(self):
        return self.signal / self.denominator

    @property
    def se(self):
        return np.log2(1 + self.sinr)


def _gain_vector(D, M):
    D = np.asarray(D)
    d = np.diagonal(D) if D.ndim == 2 else D
    d = np.broadcast_to(d, (M,)).astype(complex)
    return d


def _check_inputs(H, C_etaeta, p, noise_power):
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2:
        raise ValueError(f"H must be an M x K matrix, got shape {H.shape}")
    M = H.shape[0]
    C = np.zeros((M, M), complex) if C_etaeta is None else np.asarray(C_etaeta, dtype=complex)
    if C.shape != (M, M):
        raise ValueError(f"C_etaeta has shape {C.shape}, expected {(M, M)}")
    if p <= 0:
        raise ValueError(f"transmit power must be > 0, got {p}")
    if noise_power < 0:
        raise ValueError(f"noise power must be >= 0, got {noise_power}")
    return H, C


def _mmse(G, C, p, noise_power, form):
    M, K = G.shape
    V = np.empty((M, K), complex)
    if form == "interference":
        for k in range(K):
            Gi = np.delete(G, k, axis=1)
            B = p * Gi @ Gi.conj().T + C + noise_power * np.eye(M)
            V[:, k] = p * np.linalg.solve(B, G[:, k])
        return V
    if form != "czz":
        raise ValueError(f"unknown DA-MMSE form {form!r}")
    # total correlation C_zz + sigma^2 I, then remove UE k by Sherman-Morrison
    T = p * G @ G.conj().T + C + noise_power * np.eye(M)
    W = cho_solve(cho_factor((T + T.conj().T) / 2), G)
    q = np.real(np.einsum("mk,mk->k", G.conj(), W))
    return p * W / (1 - p * q)


def _zero_forcing(G, C):
    M, K = G.shape
    tr = float(np.real(np.trace(C)))
    if tr > 0:
        lam, U = np.linalg.eigh(C)
        E = U[:, lam > NULL_RTOL * tr]
    else:
        E = np.zeros((M, 0), complex)
    V = np.empty((M, K), complex)
    for k in range(K):
        span = np.hstack([E, np.delete(G, k, axis=1)])
        Q = orth(span) if span.shape[1] else span
        g = G[:, k]
        v = g - Q @ (Q.conj().T @ g)
        nv = np.linalg.norm(v)
        if nv <= ZF_RTOL * np.linalg.norm(g):
            raise NullingError(f"DA-ZF: effective channel of UE {k} lies in the nulled subspace")
        V[:, k] = v / nv
    return V


def build_combiner(scheme, H, D, C_etaeta, p, noise_power, form="czz", mean_norm2=None):
    """Combining vectors for all UEs.

    Parameters
    ----------
    scheme : {"mr", "da-mr", "da-zf", "da-mmse"}
    H : ndarray, shape (M, K)
        Channel (or channel estimate) used to design the combiner.
    D : ndarray
        Bussgang gains, as a vector or diagonal matrix.
    C_etaeta : ndarray, shape (M, M) or None
        Distortion correlation the combiner is designed for.
    p, noise_power : float
    form : {"czz", "interference"}
        DA-MMSE evaluation: invert ``C_zz + sigma^2 I`` once and remove each
        UE with a rank-one update, or invert the interference-plus-noise
        matrix of every UE explicitly. Both give the same vectors.
    mean_norm2 : array_like, optional
        ``E{||h_k||^2}`` used to normalize MR; defaults to ``M``.

    Returns
    -------
    CombinerSet
        MR is ``h_k / sqrt(E{||h_k||^2})``, DA-MR is ``D h_k / ||D h_k||``,
        DA-ZF has unit-norm columns orthogonal to the other UEs' effective
        channels and to the range of ``C_etaeta``, and DA-MMSE is
        ``p (sum_{i != k} p g_i g_i^H + C_etaeta + sigma^2 I)^{-1} g_k``.

    Raises
    ------
    NullingError
        If a DA-ZF projection vanishes.
    """
    H, C = _check_inputs(H, C_etaeta, p, noise_power)
    M, K = H.shape
    G = _gain_vector(D, M)[:, None] * H
    if scheme == "mr":
        norm2 = np.full(K, float(M)) if mean_norm2 is None else np.broadcast_to(mean_norm2, (K,))
        V = H / np.sqrt(norm2)
    elif scheme == "da-mr":
        V = G / np.linalg.norm(G, axis=0)
    elif scheme == "da-zf":
        V = _zero_forcing(G, C)
    elif scheme == "da-mmse":
        if noise_power <= 0 and np.linalg.matrix_rank(C) < M:
            raise ValueError("DA-MMSE needs a positive noise power or full-rank distortion")
        V = _mmse(G, C, p, noise_power, form)
    else:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    return CombinerSet(scheme, V)


def sinr_all(V, H, D, C_etaeta, p, noise_power, kappa=1.0):
    """SINR terms of every UE ``k`` served by column ``k`` of ``V``."""
    if not 0 <= kappa <= 1:
        raise ValueError(f"kappa must lie in [0, 1], got {kappa}")
    H, C = _check_inputs(H, C_etaeta, p, noise_power)
    M, K = H.shape
    V = np.asarray(V, dtype=complex).reshape(M, -1)
    G = _gain_vector(D, M)[:, None] * H
    A = np.abs(V.conj().T @ G) ** 2
    own = np.diagonal(A).copy() if A.shape[0] == K else None
    if own is None:
        raise ValueError("V must have one column per UE")
    return SinrBreakdown(
        signal=kappa * p * own,
        interference=p * (A.sum(axis=1) - own),
        ue_distortion=(1 - kappa) * p * own,
        bs_distortion=np.maximum(np.real(np.einsum("mk,mn,nk->k", V.conj(), C, V)), 0.0),
        noise=noise_power * np.real(np.einsum("mk,mk->k", V.conj(), V)),
    )


def sinr(v, k, H, D, C_etaeta, p, noise_power, kappa=1.0):
    """SINR terms of UE ``k`` with combining vector ``v``."""
    H, C = _check_inputs(H, C_etaeta, p, noise_power)
    if not 0 <= kappa <= 1:
        raise ValueError(f"kappa must lie in [0, 1], got {kappa}")
    M, K = H.shape
    v = np.asarray(v, dtype=complex).reshape(M)
    g = _gain_vector(D, M)[:, None] * H
    a = np.abs(v.conj() @ g) ** 2
    return SinrBreakdown(
        signal=kappa * p * a[k],
        interference=p * (a.sum() - a[k]),
        ue_distortion=(1 - kappa) * p * a[k],
        bs_distortion=max(float(np.real(v.conj() @ C @ v)), 0.0),
        noise=noise_power * float(np.real(v.conj() @ v)),
    )


# --------------------------------------------------------------------------
# Monte-Carlo over channel realizations

@dataclass(frozen=True)
class Scenario:
    """Everything needed to simulate one operating point.

    ``snr_range_db`` (low, high) replaces the model's UE SNRs with
    independent draws, uniform in dB, in every realization. With
    ``random_angles`` the UE angles of the array models are redrawn
    uniformly in [-60, 60] degrees in every realization.
    """

    model: ChannelModel
    front_end: object = field(default_factory=Identity)
    kappa: float = 1.0
    mc_samples: int = 100_000
    snr_range_db: tuple | None = None
    random_angles: bool = False

    def __post_init__(self):
        if not 0 <= self.kappa <= 1:
            raise ValueError(f"kappa must lie in [0, 1], got {self.kappa}")
        if self.snr_range_db is not None and not self.snr_range_db[0] <= self.snr_range_db[1]:
            raise ValueError("snr range must be (low, high) with low <= high")


def _realization_model(scenario, rng):
    model = scenario.model
    snrs, angles = model.ue_snrs, model.ue_angles
    if scenario.snr_range_db is not None:
        lo, hi = scenario.snr_range_db
        snrs = tuple(10 ** (rng.uniform(lo, hi, model.K) / 10))
    if scenario.random_angles and model.kind != "iid-rayleigh":
        angles = tuple(rng.uniform(-ANGLE_LIMIT, ANGLE_LIMIT, model.K))
    if snrs is model.ue_snrs and angles is model.ue_angles:
        return model
    return ChannelModel(
        model.kind, model.M, model.K, snrs, angles, model.angular_std,
        model.antenna_spacing, model.p, model.noise_power,
    )


def realization_breakdowns(scenario, rng, schemes, modes=("corr",), imperfect_csi=False, info=None):
    """SINR terms for one channel realization.

    Random numbers are consumed in a fixed order (SNR draw, channel, pilots,
    Bussgang sampling) so that scenarios differing only in hardware or
    combiner share the same channel.

    Returns
    -------
    dict
        Keys ``(scheme, mode, csi)`` with ``csi`` in {"perfect", "imperfect"}
        (the latter only when ``imperfect_csi``); values are per-UE
        :class:`SinrBreakdown` objects. Channel estimates are evaluated
        against the true channel and distortion statistics. If ``info`` is a
        dict it receives the realized ``model``, ``H`` and decomposition.
    """
    model = _realization_model(scenario, rng)
    p, s2 = model.p, model.noise_power
    H = draw_channel(model, rng).H
    C_uu = signal_correlation(H, p)
    ref = model.average_power()
    fe = scenario.front_end

    H_hat = None
    if imperfect_csi:
        rho = np.real(np.diag(C_uu))
        pilots = dft_pilots(model.K)
        distort = None if isinstance(fe, Identity) else (lambda U: fe.apply(U, rho, ref))
        Y = pilot_observations(H, pilots, p, s2, rng, distort, scenario.kappa)
        H_hat = ls_estimate(Y, pilots, p)

    base = decompose(fe, C_uu, ref, rng=rng, n_samples=scenario.mc_samples)
    if info is not None:
        info.update(model=model, H=H, decomposition=base)
    out = {}
    for mode in modes:
        if mode not in MODES:
            raise ValueError(f"unknown correlation mode {mode!r}")
        dec = base if mode == "corr" else base.uncorrelated()
        csis = [("perfect", H)] + ([("imperfect", H_hat)] if imperfect_csi else [])
        for scheme in schemes:
            mean_norm2 = model.M * model.gains
            for csi, Hd in csis:
                V = build_combiner(scheme, Hd, dec.d, dec.C_etaeta, p, s2, mean_norm2=mean_norm2).V
                out[scheme, mode, csi] = sinr_all(V, H, dec.d, dec.C_etaeta, p, s2, scenario.kappa)
    return out


@dataclass
class SEEstimate:
    """Per-UE ergodic SE and its Monte-Carlo standard error (bit/s/Hz)."""

    mean: np.ndarray
    stderr: np.ndarray
    samples: np.ndarray = field(repr=False)


def ergodic_se(scenario, scheme, realizations, rng, mode="corr"):
    """Ergodic SE ``E{log2(1 + SINR_k)}`` of every UE.

    The Bussgang decomposition is recomputed for each channel realization.
    Each realization uses its own generator spawned from ``rng``.
    """
    if realizations < 1:
        raise ValueError("realizations must be >= 1")
    children = rng.spawn(realizations)
    se = np.array([
        realization_breakdowns(scenario, g, [scheme], [mode])[scheme, mode, "perfect"].se
        for g in children
    ])
    n = se.shape[0]
    err = se.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.full(se.shape[1], np.nan)
    return SEEstimate(se.mean(axis=0), err, se)


@dataclass
class CsiSinr:
    """Averaged SINR (mean numerator over mean denominator) per UE."""

    imperfect: np.ndarray
    perfect: np.ndarray


def sinr_imperfect_csi(scenario, scheme, realizations, rng, mode="corr"):
    """Averaged SINR with least-squares channel estimates and with perfect CSI.

    Numerator and denominator of the SINR are averaged separately over the
    realizations. Only MR and DA-MR are supported.
    """
    if scheme not in ("mr", "da-mr"):
        raise ValueError(f"imperfect CSI is supported for mr and da-mr only, got {scheme!r}")
    if realizations < 1:
        raise ValueError("realizations must be >= 1")
    num = {"perfect": 0.0, "imperfect": 0.0}
    den = {"perfect": 0.0, "imperfect": 0.0}
    for g in rng.spawn(realizations):
        res = realization_breakdowns(scenario, g, [scheme], [mode], imperfect_csi=True)
        for csi in num:
            b = res[scheme, mode, csi]
            num[csi] = num[csi] + b.signal
            den[csi] = den[csi] + b.denominator
    return CsiSinr(num["imperfect"] / den["imperfect"], num["perfect"] / den["perfect"])
