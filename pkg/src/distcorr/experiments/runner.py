"""Execute a :class:`ScenarioConfig` and collect a :class:`ResultTable`.

Realization ``r`` always draws from ``SeedSequence(seed, spawn_key=(r,))``,
whatever the sweep point, hardware case or worker, so sweep points and
correlation modes are compared on common random numbers and the table is
independent of the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from importlib import metadata as importlib_metadata

import numpy as np

from .. import __version__
from ..analysis import (
    ClosedFormInputs,
    bs_distortion_mr_corr,
    bs_distortion_mr_uncorr,
    distortion_ratio,
    to_db,
    ue_distortion_mr,
)
from ..channel import ChannelModel
from ..combining import Scenario, realization_breakdowns
from ..hardware import Composite, Identity, ThirdOrder, correlation_coefficients, lloyd_quantizer
from .config import ScenarioConfig
from .results import ResultTable

__all__ = ["run_scenario", "build_front_end", "realization_rng", "point_scenario"]

EIG_RTOL = 1e-10
# dB columns of zero powers are floored here to stay finite
DB_FLOOR = -400.0


def build_front_end(spec, bits=None):
    """Front-end object described by a :class:`FrontEndSpec`."""
    bits = spec.bits if bits is None else bits
    if spec.kind == "identity":
        return Identity()
    third = ThirdOrder(spec.alpha, 10 ** (spec.backoff_db / 10))
    if spec.kind == "third-order":
        return third
    q = lloyd_quantizer(int(bits))
    return q if spec.kind == "quantizer" else Composite(third, q)


def realization_rng(seed, r):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(r,)))


def _point(cfg, value):
    """Resolve the sweep value into concrete channel/front-end parameters."""
    ch = cfg.channel
    out = {"kind": ch.kind, "M": ch.M, "K": ch.K, "bits": cfg.front_end.bits, "snr_db": cfg.snr_db}
    key = {"K": "K", "M": "M", "b": "bits", "snr-db": "snr_db", "channel": "kind"}[cfg.sweep.variable]
    out[key] = value
    return out


def point_scenario(cfg: ScenarioConfig, value, case=None):
    """:class:`Scenario` for one sweep value and hardware case."""
    pt = _point(cfg, value)
    ch = cfg.channel
    K = int(pt["K"])
    snr = pt["snr_db"]
    snr_range = tuple(snr) if isinstance(snr, tuple) else None
    snrs = (1.0,) * K if snr_range else (10 ** (float(snr) / 10),) * K
    random_angles = ch.ue_angles == "random"
    angles = (0.0,) * K if random_angles else ch.ue_angles
    model = ChannelModel(pt["kind"], int(pt["M"]), K, snrs, angles, ch.angular_std, ch.antenna_spacing)
    fe = build_front_end(cfg.front_end, pt["bits"])
    kappa = cfg.kappa
    if case is not None:
        if case in ("ideal", "ue-only"):
            fe = Identity()
        if case in ("ideal", "bs-only"):
            kappa = 1.0
    return Scenario(model, fe, kappa, cfg.mc_samples, snr_range, random_angles)


def _cases(cfg):
    return cfg.hardware_cases or (None,)


def _modes(cfg):
    return ("corr", "uncorr") if cfg.correlation_mode == "both" else (cfg.correlation_mode,)


def _suffix(case):
    return "" if case is None else f"_{case}"


# --------------------------------------------------------------------------
# per-realization evaluation; each returns a flat float vector

def _eval_se(cfg, value, r):
    out = []
    for case in _cases(cfg):
        res = realization_breakdowns(point_scenario(cfg, value, case), realization_rng(cfg.seed, r),
                                     cfg.schemes, _modes(cfg))
        for scheme in cfg.schemes:
            for mode in _modes(cfg):
                out.append(res[scheme, mode, "perfect"].se.mean())
    return np.array(out)


def _eval_se_cdf(cfg, value, r):
    sc = point_scenario(cfg, value)
    info = {}
    res = realization_breakdowns(sc, realization_rng(cfg.seed, r), cfg.schemes, _modes(cfg), info=info)
    cols = [10 * np.log10(np.asarray(info["model"].ue_snrs))]
    for scheme in cfg.schemes:
        for mode in _modes(cfg):
            cols.append(res[scheme, mode, "perfect"].se)
    return np.stack(cols, axis=1).ravel()


def _eval_csi(cfg, value, r):
    res = realization_breakdowns(point_scenario(cfg, value), realization_rng(cfg.seed, r),
                                 cfg.schemes, _modes(cfg), imperfect_csi=True)
    out = []
    for scheme in cfg.schemes:
        for mode in _modes(cfg):
            for csi in ("perfect", "imperfect"):
                b = res[scheme, mode, csi]
                out += [b.signal.mean(), b.denominator.mean()]
    return np.array(out)


def _eval_directivity(cfg, value, r):
    sc = point_scenario(cfg, value)
    res = realization_breakdowns(sc, realization_rng(cfg.seed, r), cfg.schemes, ("corr",))
    s2 = sc.model.noise_power
    out = []
    for scheme in cfg.schemes:
        b = res[scheme, "corr", "perfect"]
        out += [b.signal.mean() / s2, b.bs_distortion.mean() / s2]
    return np.array(out)


def _eval_eigenvalues(cfg, value, r):
    info = {}
    realization_breakdowns(point_scenario(cfg, value), realization_rng(cfg.seed, r), (), ("corr",), info=info)
    C = info["decomposition"].C_etaeta
    tr = float(np.real(np.trace(C)))
    lam = np.sort(np.linalg.eigvalsh(C))[::-1] / tr
    return np.concatenate([lam, [np.count_nonzero(lam > EIG_RTOL)]])


def _eval_quantcorr(cfg, value, r):
    info = {}
    realization_breakdowns(point_scenario(cfg, value), realization_rng(cfg.seed, r), (), ("corr",), info=info)
    dec = info["decomposition"]
    iu = np.triu_indices(dec.C_uu.shape[0], 1)
    xu = np.abs(correlation_coefficients(dec.C_uu)[iu]).mean()
    xe = np.abs(correlation_coefficients(dec.C_etaeta)[iu]).mean()
    return np.array([xu, xe])


_EVALUATORS = {
    "se": _eval_se,
    "se-cdf": _eval_se_cdf,
    "csi-sinr": _eval_csi,
    "directivity": _eval_directivity,
    "eigenvalues": _eval_eigenvalues,
    "quant-correlation": _eval_quantcorr,
}


def _eval_block(args):
    cfg, value, indices = args
    f = _EVALUATORS[cfg.metric]
    return np.stack([f(cfg, value, r) for r in indices])


# --------------------------------------------------------------------------
# reductions

def _mean_se(x):
    n = x.shape[0]
    return x.mean(axis=0), x.std(axis=0, ddof=1) / math.sqrt(n)


def _ratio_se(num, den):
    # ratio of means with a delta-method standard error
    n = num.shape[0]
    R = num.mean(axis=0) / den.mean(axis=0)
    resid = num - R * den
    return R, resid.std(axis=0, ddof=1) / (math.sqrt(n) * np.abs(den.mean(axis=0)))


def _table_se(cfg, values, samples):
    modes = _modes(cfg)
    names = [f"se_{s}_{m}{_suffix(c)}" for c in _cases(cfg) for s in cfg.schemes for m in modes]
    cols = [cfg.sweep.variable]
    for n in names:
        cols += [n, f"{n}_stderr"]
    gaps = []
    if len(modes) == 2:
        for c in _cases(cfg):
            for s in cfg.schemes:
                gaps.append((f"gap_{s}{_suffix(c)}", names.index(f"se_{s}_corr{_suffix(c)}"),
                             names.index(f"se_{s}_uncorr{_suffix(c)}")))
        for g in gaps:
            cols += [g[0], f"{g[0]}_stderr"]
    table = ResultTable(cols)
    for v, x in zip(values, samples):
        mean, err = _mean_se(x)
        row = [_numeric(cfg, v)]
        for m, e in zip(mean, err):
            row += [m, e]
        for _, ic, iu in gaps:
            g, ge = _ratio_se(x[:, iu] - x[:, ic], x[:, ic])
            row += [g, ge]
        table.append(row)
    return table


def _table_se_cdf(cfg, values, samples):
    modes = _modes(cfg)
    names = [f"se_{s}_{m}" for s in cfg.schemes for m in modes]
    table = ResultTable([cfg.sweep.variable, "realization", "ue", "snr_db"] + names)
    for v, x in zip(values, samples):
        k_count = int(_point(cfg, v)["K"])
        per = x.reshape(x.shape[0], k_count, 1 + len(names))
        for r in range(per.shape[0]):
            for k in range(k_count):
                table.append([_numeric(cfg, v), r, k, *per[r, k]])
    return table


def _table_csi(cfg, values, samples):
    keys = [(s, m, c) for s in cfg.schemes for m in _modes(cfg) for c in ("perfect", "imperfect")]
    cols = [cfg.sweep.variable]
    for s, m, c in keys:
        n = f"sinr_{s}_{m}_{c}"
        cols += [n, f"{n}_stderr"]
    table = ResultTable(cols)
    for v, x in zip(values, samples):
        row = [_numeric(cfg, v)]
        for i in range(len(keys)):
            R, e = _ratio_se(x[:, 2 * i], x[:, 2 * i + 1])
            row += [R, e]
        table.append(row)
    return table


def _table_directivity(cfg, values, samples):
    cols = [cfg.sweep.variable]
    for s in cfg.schemes:
        for t in ("signal", "bs_distortion"):
            cols += [f"{t}_{s}", f"{t}_{s}_stderr"]
    table = ResultTable(cols)
    for v, x in zip(values, samples):
        mean, err = _mean_se(x)
        table.append([_numeric(cfg, v), *np.column_stack([mean, err]).ravel()])
    return table


def _table_eigenvalues(cfg, values, samples):
    table = ResultTable([cfg.sweep.variable, "index", "eigenvalue", "eigenvalue_stderr",
                         "rank", "rank_stderr"])
    for v, x in zip(values, samples):
        mean, err = _mean_se(x)
        for i in range(mean.size - 1):
            table.append([_numeric(cfg, v), i + 1, mean[i], err[i], mean[-1], err[-1]])
    return table


def _table_quantcorr(cfg, values, samples):
    table = ResultTable([cfg.sweep.variable, "xi_u", "xi_u_stderr", "xi_eta", "xi_eta_stderr"])
    for v, x in zip(values, samples):
        mean, err = _mean_se(x)
        table.append([_numeric(cfg, v), mean[0], err[0], mean[1], err[1]])
    return table


def _table_distortion(cfg):
    table = ResultTable([cfg.sweep.variable, "bs_corr", "bs_uncorr", "ue", "ratio",
                         "bs_corr_db", "bs_uncorr_db", "ue_db", "ratio_db"])
    fe = cfg.front_end
    for v in cfg.sweep.values:
        pt = _point(cfg, v)
        noise = 1.0
        p = 10 ** (float(pt["snr_db"]) / 10) * noise
        x = ClosedFormInputs(int(pt["M"]), int(pt["K"]), fe.alpha, 10 ** (fe.backoff_db / 10), p, noise, cfg.kappa)
        bc = bs_distortion_mr_corr(x) / noise
        bu = bs_distortion_mr_uncorr(x) / noise
        ue = (1 - cfg.kappa) * p * ue_distortion_mr(x) / noise
        ratio = distortion_ratio(x.M, x.K)
        dbs = [max(to_db(t), DB_FLOOR) if t > 0 else DB_FLOOR for t in (bc, bu, ue)]
        table.append([v, bc, bu, ue, ratio, *dbs, to_db(ratio)])
    return table


_TABLES = {
    "se": _table_se,
    "se-cdf": _table_se_cdf,
    "csi-sinr": _table_csi,
    "directivity": _table_directivity,
    "eigenvalues": _table_eigenvalues,
    "quant-correlation": _table_quantcorr,
}


def _numeric(cfg, value):
    if cfg.sweep.variable == "channel":
        return float(cfg.sweep.values.index(value))
    return float(value)


def _version():
    try:
        return "v" + importlib_metadata.version("artifact")
    except importlib_metadata.PackageNotFoundError:
        return "v" + __version__


def _metadata(cfg):
    meta = {
        "name": cfg.name,
        "metric": cfg.metric,
        "config-hash": cfg.config_hash(),
        "seed": cfg.seed,
        "version": _version(),
        "realizations": cfg.realizations,
        "mc-samples": cfg.mc_samples,
        "sweep-variable": cfg.sweep.variable,
        "config": cfg.to_dict(),
        "assumed-defaults": list(cfg.defaults),
    }
    if cfg.sweep.variable == "channel":
        meta["channel-labels"] = list(cfg.sweep.values)
    return meta


def _blocks(n, workers):
    size = max(1, math.ceil(n / (4 * workers)))
    return [range(i, min(i + size, n)) for i in range(0, n, size)]


def run_scenario(cfg: ScenarioConfig, workers=1) -> ResultTable:
    """Run every sweep point of ``cfg``.

    Realizations are split into blocks evaluated by ``workers`` processes and
    reassembled in index order; the table is bit-identical for any worker
    count.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    values = list(cfg.sweep.values)
    if cfg.metric == "distortion":
        table = _table_distortion(cfg)
    else:
        tasks = [(cfg, v, blk) for v in values for blk in _blocks(cfg.realizations, workers)]
        if workers == 1:
            parts = [_eval_block(t) for t in tasks]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(_eval_block, tasks))
        per_value = len(parts) // len(values)
        samples = [np.concatenate(parts[i * per_value:(i + 1) * per_value]) for i in range(len(values))]
        table = _TABLES[cfg.metric](cfg, values, samples)
    table.metadata = _metadata(cfg)
    return table
