"""Per-antenna receiver front-ends and their Bussgang decomposition.

A front-end maps the noise-free received vector ``u`` element-wise to
``z = g(u) = D u + eta`` where ``D`` is diagonal and ``eta`` is uncorrelated
with ``u``. Third-order amplifiers have a closed-form decomposition; ADC
quantizers have closed-form diagonal statistics and everything else is
estimated by Monte-Carlo sampling of ``u ~ CN(0, C_uu)``.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.linalg import blas, solve_banded
from scipy.special import erf, ndtr, ndtri

from .channel import psd_sqrt

__all__ = [
    "NumericalError",
    "ConvergenceError",
    "Identity",
    "ThirdOrder",
    "Quantizer",
    "Composite",
    "BussgangDecomposition",
    "third_order_apply",
    "third_order_coefficients",
    "bussgang_third_order",
    "distortion_correlation_coeff",
    "correlation_coefficients",
    "lloyd_quantizer",
    "quantizer_apply",
    "quantizer_bussgang_diag",
    "bussgang_monte_carlo",
    "decompose",
    "project_psd",
]

PSD_RTOL = 1e-8
RANK_RTOL = 1e-12
MIN_MC_SAMPLES = 10_000
CHUNK = 1 << 15


class NumericalError(RuntimeError):
    """A numerical procedure failed (non-convergence, singular projection, ...)."""


class ConvergenceError(NumericalError):
    pass


def _per_antenna(x, u):
    # align a per-antenna vector with u of shape (M,) or (M, N)
    x = np.asarray(x)
    return x.reshape(x.shape + (1,) * (np.ndim(u) - 1))


def _check_hermitian(C, name="C_uu"):
    C = np.asarray(C)
    if C.ndim < 2 or C.shape[-1] != C.shape[-2]:
        raise ValueError(f"{name} must be square, got shape {C.shape}")
    scale = max(np.max(np.abs(C)), 1.0)
    if np.max(np.abs(C - np.swapaxes(C.conj(), -1, -2))) > 1e-9 * scale:
        raise ValueError(f"{name} is not Hermitian")
    return C


def _diag_power(C):
    return np.real(np.diagonal(C, axis1=-2, axis2=-1)).copy()


# --------------------------------------------------------------------------
# front-ends

@dataclass(frozen=True)
class Identity:
    """Ideal receiver hardware."""

    kind = "identity"

    def apply(self, u, power=None, ref_power=None):
        return np.array(u, dtype=complex, copy=True)


def third_order_apply(u, a):
    """Memoryless AM-AM model ``z_m = u_m - a_m |u_m|^2 u_m``."""
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise ValueError("third-order coefficients must be >= 0")
    u = np.asarray(u, dtype=complex)
    return u - _per_antenna(a, u) * (u.real**2 + u.imag**2) * u


def third_order_coefficients(alpha, backoff, avg_power):
    """Per-antenna coefficients ``a_m = alpha / (backoff * E{|u_m|^2})``."""
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    if not backoff >= 1:
        raise ValueError(f"back-off must be >= 1 (linear), got {backoff}")
    avg_power = np.asarray(avg_power, dtype=float)
    if np.any(avg_power <= 0):
        raise ValueError("average powers must be > 0")
    return alpha / (backoff * avg_power)


@dataclass(frozen=True)
class ThirdOrder:
    """Third-order amplifier with strength ``alpha`` and linear back-off.

    ``alpha = 1/3`` saturates at unit normalized amplitude (worst case).
    """

    alpha: float = 1.0 / 3.0
    backoff: float = 10 ** 0.7
    kind = "third-order"

    def __post_init__(self):
        if not 0 < self.alpha <= 1.0 / 3.0 + 1e-12:
            raise ValueError(f"alpha must lie in (0, 1/3], got {self.alpha}")
        if not self.backoff >= 1:
            raise ValueError(f"back-off must be >= 1 (linear), got {self.backoff}")

    def coefficients(self, ref_power):
        return third_order_coefficients(self.alpha, self.backoff, ref_power)

    def apply(self, u, power=None, ref_power=None):
        # ref_power: statistical E{|u_m|^2}; falls back to the conditional power
        ref = power if ref_power is None else ref_power
        return third_order_apply(u, self.coefficients(ref))


@dataclass(frozen=True, eq=False)
class Quantizer:
    """Symmetric scalar quantizer designed for a unit-variance real Gaussian.

    ``thresholds`` has ``L + 1`` entries starting at ``-inf`` and ending at
    ``+inf``; ``Q(x) = levels[n]`` for ``thresholds[n] <= x < thresholds[n+1]``.
    Real and imaginary parts are quantized independently after scaling by
    ``sqrt(power / 2)`` (ideal per-antenna gain control).
    """

    levels: np.ndarray
    thresholds: np.ndarray
    kind = "quantizer"

    def __post_init__(self):
        lv = np.array(self.levels, dtype=float)
        th = np.array(self.thresholds, dtype=float)
        L = lv.size
        if L < 2 or L & (L - 1):
            raise ValueError(f"number of levels must be a power of two >= 2, got {L}")
        if th.size != L + 1:
            raise ValueError(f"expected {L + 1} thresholds, got {th.size}")
        if not (th[0] == -np.inf and th[-1] == np.inf):
            raise ValueError("outer thresholds must be -inf and +inf")
        if np.any(np.diff(th) <= 0):
            raise ValueError("thresholds must be strictly increasing")
        if not np.allclose(lv, -lv[::-1], rtol=0, atol=1e-12):
            raise ValueError("levels must be symmetric around the origin")
        lv.setflags(write=False)
        th.setflags(write=False)
        object.__setattr__(self, "levels", lv)
        object.__setattr__(self, "thresholds", th)
        object.__setattr__(self, "_grid", _threshold_grid(th))

    @property
    def bits(self):
        return int(round(math.log2(self.levels.size)))

    def index(self, x):
        """Cell index ``n`` with ``thresholds[n] <= x < thresholds[n+1]``."""
        x = np.asarray(x, dtype=float)
        if self.levels.size == 2:
            return (x >= self.thresholds[1]).astype(np.intp)
        x0, inv_h, base = self._grid
        cell = np.clip((x - x0) * inv_h, 0, base.size - 1).astype(np.intp)
        n = base[cell]
        # a cell holds at most one threshold; correct off-by-one rounding on both sides
        th = self.thresholds
        return n + (x >= th[n + 1]) - (x < th[n])

    def quantize_real(self, x):
        """Quantize real samples of the unit-variance design."""
        return self.levels[self.index(x)]

    def apply(self, u, power, ref_power=None):
        u = np.asarray(u, dtype=complex)
        power = np.asarray(power, dtype=float)
        if np.any(power <= 0):
            raise ValueError("quantizer input power must be > 0")
        scale = _per_antenna(np.sqrt(power / 2), u)
        x = np.ascontiguousarray(u / scale)
        y = self.quantize_real(x.view(float)).view(complex)
        return y * scale

    def mse(self):
        """Mean-squared error for a unit-variance real Gaussian input."""
        lo, hi = self.thresholds[:-1], self.thresholds[1:]
        prob = ndtr(hi) - ndtr(lo)
        first = _gauss_pdf(lo) - _gauss_pdf(hi)
        return float(1.0 - 2 * np.sum(self.levels * first) + np.sum(self.levels**2 * prob))

    def to_dict(self):
        th = self.thresholds[1:-1].tolist()
        return {"bits": self.bits, "levels": self.levels.tolist(), "thresholds": th}

    def to_json(self, **kwargs):
        """JSON export; the infinite outer thresholds are implied and omitted."""
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data):
        th = [-np.inf, *data["thresholds"], np.inf]
        return cls(np.asarray(data["levels"], dtype=float), np.asarray(th, dtype=float))


def _threshold_grid(th):
    # uniform grid over the inner thresholds, finer than their smallest spacing;
    # base[c] counts the inner thresholds at or below the start of cell c
    inner = th[1:-1]
    if inner.size < 2:
        return None
    h = np.min(np.diff(inner)) / 2
    x0 = inner[0] - h
    n_cells = int(np.ceil((inner[-1] + h - x0) / h)) + 2
    starts = x0 + h * np.arange(n_cells)
    base = np.searchsorted(inner, starts, side="right").astype(np.intp)
    base = np.minimum(base, inner.size)
    return x0, 1.0 / h, base


@dataclass(frozen=True, eq=False)
class Composite:
    """Third-order amplifier followed by a quantizer (LNA then ADC)."""

    nonlinearity: ThirdOrder
    quantizer: Quantizer
    kind = "composite"

    def quantizer_power(self, power, ref_power=None):
        # conditional output power of the amplifier, [C_zz]_mm of the third-order stage
        power = np.asarray(power, dtype=float)
        ref = power if ref_power is None else ref_power
        a = self.nonlinearity.coefficients(ref)
        return (1 - 2 * a * power) ** 2 * power + 2 * a**2 * power**3

    def apply(self, u, power, ref_power=None):
        z = self.nonlinearity.apply(u, power, ref_power)
        return self.quantizer.apply(z, self.quantizer_power(power, ref_power))


# --------------------------------------------------------------------------
# decomposition container

@dataclass
class BussgangDecomposition:
    """Bussgang gains and correlation matrices for one input correlation ``C_uu``.

    ``C_zu = D C_uu`` is implied and not stored. Monte-Carlo estimates carry
    per-entry standard errors; complex entries report the standard error of
    the real part in ``.real`` and of the imaginary part in ``.imag``.
    """

    d: np.ndarray
    C_etaeta: np.ndarray
    C_zz: np.ndarray
    C_uu: np.ndarray
    d_stderr: np.ndarray | None = field(default=None, repr=False)
    C_etaeta_stderr: np.ndarray | None = field(default=None, repr=False)
    eta_u: np.ndarray | None = field(default=None, repr=False)
    eta_u_stderr: np.ndarray | None = field(default=None, repr=False)
    n_samples: int = 0

    @property
    def D(self):
        return np.diag(self.d)

    def uncorrelated(self):
        """Copy with the distortion correlation neglected (``C_etaeta * I``)."""
        C = np.diag(np.real(np.diag(self.C_etaeta))).astype(complex)
        Czz = _dcd(self.d, self.C_uu) + C
        return replace(self, C_etaeta=C, C_zz=Czz)


def _dcd(d, C):
    return d[..., :, None] * C * np.conj(d[..., None, :])


# --------------------------------------------------------------------------
# third-order closed form

def bussgang_third_order(C_uu, a):
    """Closed-form decomposition of the third-order front-end.

    ``d_m = 1 - 2 a_m rho_mm`` and
    ``[C_etaeta]_ij = 2 a_i a_j |rho_ij|^2 rho_ij``, i.e.
    ``2 A (C_uu .* conj(C_uu) .* C_uu) A``. ``C_uu`` may carry leading batch
    dimensions.
    """
    C = _check_hermitian(np.asarray(C_uu, dtype=complex))
    a = np.broadcast_to(np.asarray(a, dtype=float), C.shape[:-1])
    if a.shape[-1] != C.shape[-1]:
        raise ValueError("coefficient vector does not match C_uu")
    rho = _diag_power(C)
    d = (1 - 2 * a * rho).astype(complex)
    Cee = 2 * a[..., :, None] * a[..., None, :] * (C.real**2 + C.imag**2) * C
    Czz = _dcd(d, C) + Cee
    return BussgangDecomposition(d=d, C_etaeta=Cee, C_zz=Czz, C_uu=C)


def distortion_correlation_coeff(C, i, j):
    """Correlation coefficient ``C_ij / sqrt(C_ii C_jj)``."""
    cii, cjj = np.real(C[i, i]), np.real(C[j, j])
    if cii <= 0 or cjj <= 0:
        raise ValueError(f"diagonal entries ({i},{i}) and ({j},{j}) must be positive")
    return C[i, j] / np.sqrt(cii * cjj)


def correlation_coefficients(C):
    """Matrix of all correlation coefficients of ``C``."""
    p = _diag_power(C)
    if np.any(p <= 0):
        raise ValueError("correlation coefficients need a positive diagonal")
    s = np.sqrt(p)
    return C / (s[..., :, None] * s[..., None, :])


# --------------------------------------------------------------------------
# Lloyd quantizer design

def _gauss_pdf(x):
    return np.exp(-0.5 * np.square(x)) / math.sqrt(2 * math.pi)


def _lloyd_map(lev):
    # centroids of the positive-half cells induced by midpoint thresholds
    t = np.concatenate(([0.0], (lev[1:] + lev[:-1]) / 2, [np.inf]))
    lo, hi = t[:-1], t[1:]
    prob = ndtr(-lo) - ndtr(-hi)
    cent = (_gauss_pdf(lo) - _gauss_pdf(hi)) / prob
    return cent, lo, hi, prob


def _lloyd_jacobian_banded(lev, cent, lo, hi, prob):
    # d(centroid_n)/d(level) is tridiagonal: each threshold is a midpoint
    n = lev.size
    dlo = _gauss_pdf(lo) * (cent - lo) / prob
    finite = np.isfinite(hi)
    hf = np.where(finite, hi, 0.0)
    dhi = np.where(finite, _gauss_pdf(hf) * (hf - cent) / prob, 0.0)
    dlo[0] = 0.0  # the threshold at the origin is fixed
    ab = np.zeros((3, n))
    ab[1] = 0.5 * dlo + 0.5 * dhi - 1.0
    ab[0, 1:] = 0.5 * dhi[:-1]
    ab[2, :-1] = 0.5 * dlo[1:]
    return ab


@lru_cache(maxsize=None)
def lloyd_quantizer(bits, tol=1e-10, max_iter=10_000):
    """MSE-optimal ``2**bits``-level quantizer for a unit-variance real Gaussian.

    Solves the Lloyd fixed point (thresholds at midpoints of adjacent levels,
    levels at the conditional means of their cells) on the positive half
    line and mirrors it. Each iteration takes a Newton step on the fixed-point
    residual, falling back to the plain Lloyd update whenever that does not
    reduce the residual; the plain update alone needs far more than
    ``max_iter`` sweeps beyond 6 bits.

    Raises
    ------
    ConvergenceError
        If the largest level movement is still above ``tol`` after
        ``max_iter`` iterations.
    """
    if int(bits) != bits or not 1 <= bits <= 12:
        raise ValueError(f"bits must be an integer in [1, 12], got {bits}")
    half = 2 ** (bits - 1)
    # point density of the high-resolution optimum is ~ pdf^(1/3), a Gaussian of std sqrt(3)
    lev = math.sqrt(3.0) * ndtri(0.5 + (np.arange(half) + 0.5) / (2 * half))

    for _ in range(max_iter):
        cent, lo, hi, prob = _lloyd_map(lev)
        resid = cent - lev
        new = cent
        if half > 1:
            ab = _lloyd_jacobian_banded(lev, cent, lo, hi, prob)
            try:
                trial = lev - solve_banded((1, 1), ab, resid)
            except (np.linalg.LinAlgError, ValueError):
                trial = None
            if trial is not None and trial[0] > 0 and np.all(np.diff(trial) > 0):
                if np.max(np.abs(_lloyd_map(trial)[0] - trial)) < np.max(np.abs(resid)):
                    new = trial
        step = np.max(np.abs(new - lev))
        lev = new
        if step < tol:
            break
    else:
        raise ConvergenceError(f"Lloyd iteration for {bits} bits did not converge in {max_iter} iterations")

    lev = _lloyd_map(lev)[0]
    levels = np.concatenate((-lev[::-1], lev))
    inner = (levels[1:] + levels[:-1]) / 2
    inner[half - 1] = 0.0
    return Quantizer(levels, np.concatenate(([-np.inf], inner, [np.inf])))


def quantizer_apply(u, q: Quantizer, power):
    """Quantize real and imaginary parts of ``u`` with per-antenna gain control."""
    return q.apply(u, power)


def quantizer_bussgang_diag(q: Quantizer, power):
    """Bussgang gain ``d_m`` and output power ``[C_zz]_mm`` of a quantizer.

    Evaluates the erf/exp sums with levels and thresholds scaled by
    ``sqrt(power / 2)``. Returns arrays shaped like ``power``.
    """
    rho = np.asarray(power, dtype=float)
    if np.any(rho <= 0):
        raise ValueError("quantizer input power must be > 0")
    r = rho[..., None]
    scale = np.sqrt(r / 2)
    lv = q.levels * scale
    t_lo = q.thresholds[:-1] * scale
    t_hi = q.thresholds[1:] * scale
    d = np.sum(lv / np.sqrt(np.pi * r) * (np.exp(-t_lo**2 / r) - np.exp(-t_hi**2 / r)), axis=-1)
    czz = np.sum(lv**2 * (erf(t_hi / np.sqrt(r)) - erf(t_lo / np.sqrt(r))), axis=-1)
    return d, czz


# --------------------------------------------------------------------------
# Monte-Carlo estimation

def _check_psd(C):
    C = _check_hermitian(np.asarray(C, dtype=complex))
    lam = np.linalg.eigvalsh(C)
    tr = float(np.real(np.trace(C)))
    if lam.min() < -PSD_RTOL * max(tr, np.finfo(float).tiny):
        raise ValueError(f"C_uu is indefinite (min eigenvalue {lam.min():.3e})")
    return C


def _crandn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def _herk(X):
    # X X^H for an (M, N) complex array, Hermitian-completed
    if X.shape[0] == 0 or X.shape[1] == 0:
        return np.zeros((X.shape[0], X.shape[0]), dtype=complex)
    up = blas.zherk(1.0, np.asfortranarray(X))
    out = np.triu(up) + np.triu(up, 1).conj().T
    np.fill_diagonal(out, np.real(np.diag(up)))
    return out


def _chunks(n, size):
    sizes = [size] * (n // size)
    if n % size:
        sizes.append(n % size)
    return sizes


def _se(s1, s2, n):
    var = np.maximum(s2 - s1**2 / n, 0.0) / (n - 1)
    return np.sqrt(var / n)


def _complex_se(s1, s2re, s2im, n):
    return _se(s1.real, s2re, n) + 1j * _se(s1.imag, s2im, n)


def bussgang_monte_carlo(front_end, C_uu, n_samples, rng, ref_power=None,
                         stderr=True, chunk_size=CHUNK, workers=1):
    """Sample-based Bussgang decomposition of an arbitrary front-end.

    Draws ``n_samples`` vectors ``u ~ CN(0, C_uu)`` through a square-root
    factor of ``C_uu``, estimates ``d_m = E{g(u_m) u_m^*} / E{|u_m|^2}`` as a
    ratio of sample means and the distortion correlation from the sample
    distortion ``eta = z - D u``; ``C_zz`` is then ``C_etaeta + D C_uu D^H``.
    The empirical cross correlation ``E{eta u^H}`` is returned as well, for
    orthogonality checks. The ratio form makes its diagonal vanish and is
    exact for linear front-ends; the standard error of ``d`` follows from the
    delta method.

    Samples are processed in chunks, each with its own substream derived from
    ``rng``, and merged in chunk order, so the result does not depend on
    ``workers``.
    """
    if n_samples < MIN_MC_SAMPLES:
        raise ValueError(f"need at least {MIN_MC_SAMPLES} samples, got {n_samples}")
    C = _check_psd(C_uu)
    rho = _diag_power(C)
    if np.any(rho <= 0):
        raise ValueError("C_uu must have a positive diagonal")
    ref = rho if ref_power is None else np.asarray(ref_power, dtype=float)
    F = psd_sqrt(C, RANK_RTOL)
    M = C.shape[0]
    sizes = _chunks(int(n_samples), chunk_size)
    seeds = rng.integers(0, 2**63 - 1, size=len(sizes))

    def draw(i):
        g = np.random.default_rng(seeds[i])
        u = F @ _crandn(g, (F.shape[1], sizes[i]))
        return u, front_end.apply(u, rho, ref)

    def first_pass(i):
        u, z = draw(i)
        return (z * u.conj()).sum(axis=1), (np.abs(u) ** 2).sum(axis=1)

    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    mapper = pool.map if pool else map
    try:
        s1 = np.zeros(M, complex)
        pw = np.zeros(M)
        for a, b in mapper(first_pass, range(len(sizes))):
            s1 += a
            pw += b
        n = float(n_samples)
        d = s1 / pw

        def second_pass(i):
            u, z = draw(i)
            eta = z - d[:, None] * u
            out = [_herk(eta), eta @ u.conj().T]
            if stderr:
                pe = eta[:, None, :] * eta.conj()[None, :, :]
                pu = eta[:, None, :] * u.conj()[None, :, :]
                out += [(pe.real**2).sum(-1), (pe.imag**2).sum(-1),
                        (pu.real**2).sum(-1), (pu.imag**2).sum(-1)]
            return out

        acc = None
        for part in mapper(second_pass, range(len(sizes))):
            acc = part if acc is None else [x + y for x, y in zip(acc, part)]
    finally:
        if pool:
            pool.shutdown()

    Cee = acc[0] / n
    eta_u = acc[1] / n
    Czz = Cee + _dcd(d, C)
    out = BussgangDecomposition(d=d, C_etaeta=Cee, C_zz=Czz, C_uu=C, eta_u=eta_u,
                                n_samples=int(n_samples))
    if stderr:
        out.C_etaeta_stderr = _complex_se(acc[0], acc[2], acc[3], n)
        out.eta_u_stderr = _complex_se(acc[1], acc[4], acc[5], n)
        # linearized ratio: d_hat - d ~ mean(eta_m u_m^*) / rho_mm
        out.d_stderr = np.diag(out.eta_u_stderr) * (n / pw)
    return out


def project_psd(C):
    """Nearest Hermitian PSD matrix (negative eigenvalues clipped to zero)."""
    C = (C + C.conj().T) / 2
    lam, U = np.linalg.eigh(C)
    if lam.min() >= 0:
        return C
    return (U * np.maximum(lam, 0)) @ U.conj().T


def decompose(front_end, C_uu, ref_power=None, rng=None, n_samples=100_000, chunk_size=CHUNK):
    """Bussgang decomposition for simulations, closed form wherever possible.

    * identity and third-order front-ends are exact;
    * a quantizer uses its exact gains and diagonal, with the off-diagonal
      distortion correlation estimated from ``eta = z - D u`` samples;
    * a composite uses the third-order closed form as a control variate: only
      the change caused by the quantizer is estimated from samples.

    Sample-based results are projected onto the PSD cone. ``ref_power`` is the
    statistical per-antenna power used to set the amplifier coefficients; it
    defaults to the diagonal of ``C_uu``.
    """
    C = _check_hermitian(np.asarray(C_uu, dtype=complex))
    M = C.shape[0]
    rho = _diag_power(C)
    ref = rho if ref_power is None else np.broadcast_to(np.asarray(ref_power, float), (M,))

    if isinstance(front_end, Identity):
        d = np.ones(M, complex)
        Z = np.zeros((M, M), complex)
        return BussgangDecomposition(d=d, C_etaeta=Z, C_zz=C.copy(), C_uu=C)
    if isinstance(front_end, ThirdOrder):
        return bussgang_third_order(C, front_end.coefficients(ref))
    if not isinstance(front_end, (Quantizer, Composite)):
        raise TypeError(f"unsupported front-end {front_end!r}")

    if rng is None:
        raise ValueError("a random generator is required for sample-based decompositions")
    if np.any(rho <= 0):
        raise ValueError("C_uu must have a positive diagonal")
    F = psd_sqrt(C, RANK_RTOL)
    n = int(n_samples)

    if isinstance(front_end, Quantizer):
        d = quantizer_bussgang_diag(front_end, rho)[0].astype(complex)
        S = np.zeros((M, M), complex)
        for size in _chunks(n, chunk_size):
            u = F @ _crandn(rng, (F.shape[1], size))
            eta = front_end.apply(u, rho) - d[:, None] * u
            S += _herk(eta)
        Cee = S / n
        czz = quantizer_bussgang_diag(front_end, rho)[1]
        np.fill_diagonal(Cee, czz - np.abs(d) ** 2 * rho)
    else:
        third = bussgang_third_order(C, front_end.nonlinearity.coefficients(ref))
        d3 = np.real(third.d)
        a = front_end.nonlinearity.coefficients(ref)
        qpow = front_end.quantizer_power(rho, ref)
        S_yy = np.zeros((M, M), complex)
        S_33 = np.zeros((M, M), complex)
        s_eu = np.zeros(M, complex)
        for size in _chunks(n, chunk_size):
            u = F @ _crandn(rng, (F.shape[1], size))
            z3 = third_order_apply(u, a)
            zc = front_end.quantizer.apply(z3, qpow)
            eta3 = z3 - d3[:, None] * u
            S_yy += _herk(zc - d3[:, None] * u)
            S_33 += _herk(eta3)
            s_eu += np.sum((zc - z3) * u.conj(), axis=1)
        dd = s_eu / (n * rho)
        d = third.d + dd
        Cee = third.C_etaeta + (S_yy - S_33) / n - _dcd(dd, C)

    Cee = project_psd(Cee)
    return BussgangDecomposition(d=d, C_etaeta=Cee, C_zz=Cee + _dcd(d, C), C_uu=C, n_samples=n)
