"""Named scenario presets for the numerical figures."""

from __future__ import annotations

from dataclasses import replace

from .config import ChannelSpec, ConfigError, FrontEndSpec, ScenarioConfig, Sweep

__all__ = ["PRESETS", "figure_preset"]

DEFAULT_SEED = 20190101

# values not fixed by the reference setup; reported in result metadata
_COMMON_DEFAULTS = (
    "antenna-spacing=0.5 wavelengths",
    "ue-angles drawn uniformly in [-60, 60] degrees per realization",
    "I/Q demodulation ideal",
    "quantizer gain control ideal (thresholds scaled by sqrt(rho_mm/2))",
    "third-order coefficients use the statistical power p*sum(snr_k)*noise/p",
)


def _fig3():
    return ScenarioConfig(
        name="fig3", metric="distortion",
        channel=ChannelSpec("iid-rayleigh", M=200, K=1),
        front_end=FrontEndSpec("third-order", alpha=1 / 3, backoff_db=7.0),
        kappa=0.99, snr_db=0.0, schemes=("mr",), correlation_mode="both",
        sweep=Sweep("K", tuple(range(1, 21))), realizations=2, seed=DEFAULT_SEED,
        defaults=("K range 1..20", "powers normalized by the noise power"),
    )


def _fig4():
    return ScenarioConfig(
        name="fig4", metric="directivity",
        channel=ChannelSpec("iid-rayleigh", M=100, K=1),
        front_end=FrontEndSpec("third-order", alpha=1 / 3, backoff_db=7.0),
        kappa=0.99, snr_db=0.0, schemes=("da-mr", "da-zf"), correlation_mode="corr",
        sweep=Sweep("M", (10, 20, 50, 100, 200, 500)), realizations=1000, seed=DEFAULT_SEED,
        defaults=("M grid 10..500",),
    )


def _fig5():
    return ScenarioConfig(
        name="fig5", metric="eigenvalues",
        channel=ChannelSpec("iid-rayleigh", M=200, K=5),
        front_end=FrontEndSpec("third-order", alpha=1 / 3, backoff_db=7.0),
        kappa=0.99, snr_db=0.0, schemes=("da-mmse",), correlation_mode="corr",
        sweep=Sweep("K", (5, 10, 15)), realizations=100, seed=DEFAULT_SEED,
        defaults=("100 realizations",),
    )


def _fig6():
    return ScenarioConfig(
        name="fig6", metric="se",
        channel=ChannelSpec("iid-rayleigh", M=100, K=1),
        front_end=FrontEndSpec("composite", alpha=1 / 3, backoff_db=7.0, bits=6),
        kappa=0.99, snr_db=0.0, schemes=("da-mmse", "da-mr"), correlation_mode="both",
        sweep=Sweep("K", tuple(range(1, 11))), realizations=1000, seed=DEFAULT_SEED,
    )


def _fig7():
    return ScenarioConfig(
        name="fig7", metric="se",
        channel=ChannelSpec("iid-rayleigh", M=10, K=1),
        front_end=FrontEndSpec("third-order", alpha=1 / 3, backoff_db=7.0),
        kappa=0.99, snr_db=0.0, schemes=("da-mmse", "da-mr"), correlation_mode="corr",
        sweep=Sweep("M", (10, 20, 50, 100, 200, 500, 1000)), realizations=1000,
        hardware_cases=("ideal", "ue-only", "bs-only", "ue+bs"), seed=DEFAULT_SEED,
        defaults=("M grid 10, 20, 50, 100, 200, 500, 1000", "quantization neglected"),
    )


def _fig8():
    return ScenarioConfig(
        name="fig8", metric="se-cdf",
        channel=ChannelSpec("iid-rayleigh", M=100, K=5),
        front_end=FrontEndSpec("composite", alpha=1 / 3, backoff_db=7.0, bits=6),
        kappa=0.99, snr_db=(-10.0, 10.0), schemes=("da-mmse", "da-mr"), correlation_mode="both",
        sweep=Sweep("channel", ("iid-rayleigh", "correlated-rayleigh", "free-space-ula")),
        realizations=500, seed=DEFAULT_SEED,
        defaults=("500 SNR draws", "angular-std=10 degrees"),
    )


def _fig9():
    return ScenarioConfig(
        name="fig9", metric="se",
        channel=ChannelSpec("iid-rayleigh", M=100, K=5),
        front_end=FrontEndSpec("composite", alpha=1 / 3, backoff_db=7.0, bits=6),
        kappa=0.99, snr_db=0.0, schemes=("da-mmse", "da-mr"), correlation_mode="both",
        sweep=Sweep("b", tuple(range(1, 11))), realizations=1000, seed=DEFAULT_SEED,
    )


def _fig10():
    return ScenarioConfig(
        name="fig10", metric="csi-sinr",
        channel=ChannelSpec("iid-rayleigh", M=100, K=5),
        front_end=FrontEndSpec("composite", alpha=1 / 3, backoff_db=7.0, bits=6),
        kappa=0.99, snr_db=0.0, schemes=("da-mr",), correlation_mode="both",
        sweep=Sweep("snr-db", (-10.0, -5.0, 0.0, 5.0, 10.0)), realizations=500, seed=DEFAULT_SEED,
        defaults=("SNR grid -10..10 dB in 5 dB steps", "pilots pass through the BS front-end"),
    )


def _quantcorr():
    return ScenarioConfig(
        name="quantcorr", metric="quant-correlation",
        channel=ChannelSpec("iid-rayleigh", M=100, K=1),
        front_end=FrontEndSpec("quantizer", bits=6),
        kappa=1.0, snr_db=0.0, schemes=("da-mr",), correlation_mode="corr",
        sweep=Sweep("b", tuple(range(1, 9))), realizations=100, seed=DEFAULT_SEED,
        defaults=("100 realizations",),
    )


PRESETS = {
    "fig3": _fig3, "fig4": _fig4, "fig5": _fig5, "fig6": _fig6, "fig7": _fig7,
    "fig8": _fig8, "fig9": _fig9, "fig10": _fig10, "quantcorr": _quantcorr,
}


def figure_preset(name):
    """Scenario of a named figure; unknown names raise :class:`ConfigError`."""
    try:
        cfg = PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}") from None
    return replace(cfg, defaults=_COMMON_DEFAULTS + cfg.defaults)
