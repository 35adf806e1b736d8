"""Experiment pipelines that turn an :class:`ExperimentSpec` into CSV rows.

Each trial draws from its own generator seeded by
``seed_derivation(master_seed, trial)``. Trials can be spread over a
process pool; results are merged in trial order, so the output does not
depend on ``workers``. Every CSV starts with a ``# cfisac-csv <schema> v<N>``
line followed by one header line.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import detection, manifold, metrics, pilots, sensing, sysmodel
from .config import ExperimentSpec
from .seeding import derive, seed_derivation

SCHEMAS = {
    "rates": (1, ("trial", "user", "scheme", "rate_bits", "net_bps")),
    "rates_sweep": (1, ("sweep", "value", "trial", "user", "scheme", "rate_bits", "net_bps")),
    "ber": (1, ("snr_db", "scheme", "ber", "bits_counted")),
    "ber_ratio": (1, ("K", "tau", "ratio", "scheme", "ber", "bits_counted")),
    "acf": (1, ("lag", "scheme", "level_db")),
    "range": (1, ("range_m", "scheme", "magnitude_db")),
    "design": (1, ("iteration", "objective_bits")),
}

KIND_SCHEMA = {
    "design": "design", "rates_cdf": "rates", "median_vs_tau": "rates_sweep",
    "median_vs_K": "rates_sweep", "ber_sweep": "ber", "ber_vs_ratio": "ber_ratio",
    "acf_profile": "acf", "range_profile": "range",
}


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def design_config(spec: ExperimentSpec) -> manifold.DesignConfig:
    stage = manifold.OptimizerConfig(eps=spec.stage_eps, i_max=spec.stage_i_max,
                                     step_rule=spec.step_rule)
    return manifold.DesignConfig(snr_schedule=tuple(spec.snr_schedule),
                                 n_starts=spec.n_starts, stage=stage)


def make_pilots(scheme: str, beta, cfg: sysmodel.SystemConfig, spec: ExperimentSpec,
                seed: int) -> pilots.PilotMatrix:
    """Pilot matrix for one drop under a named scheme.

    Assignment schemes share one random orthogonal basis per drop; the
    proposed design starts from random phases.
    """
    basis = pilots.make_basis(cfg.tau, rng=_rng(derive(seed, 0)))
    if scheme == "random":
        return pilots.assign_random(basis, cfg.K, _rng(derive(seed, 1)))
    if scheme == "greedy":
        return pilots.assign_greedy(basis, beta, cfg)
    if scheme == "tabu":
        tc = pilots.TabuConfig(max_iter=spec.tabu_max_iter or None, seed=derive(seed, 2) & 0xFFFFFFFF)
        return pilots.assign_tabu(basis, beta, cfg, tc)
    if scheme == "proposed":
        res = manifold.design_pilots(beta, cfg.rho_sinr, cfg.tau, _rng(derive(seed, 3)),
                                     design_config(spec), rho_p=cfg.rho_p)
        return pilots.unimodular(res.F)
    raise ValueError(f"unknown pilot scheme {scheme!r}")


def _rate_rows(args):
    spec, cfg, trial, prefix = args
    seed = seed_derivation(spec.master_seed, trial)
    beta = sysmodel.drop_network(cfg, _rng(derive(seed, 0)))
    rows = []
    for scheme in spec.active_schemes:
        F = make_pilots(scheme, beta, cfg, spec, derive(seed, 1))
        rep = metrics.rates(F, beta, cfg)
        for k in range(cfg.K):
            rows.append(prefix + (trial, k, scheme, rep.rate_bits[k], rep.net_bps[k]))
    return rows


def _pool_map(fn, jobs, workers: int):
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


def run_rates(spec: ExperimentSpec) -> list:
    jobs = [(spec, spec.system, t, ()) for t in range(spec.trials)]
    return [r for rows in _pool_map(_rate_rows, jobs, spec.workers) for r in rows]


def run_rate_sweep(spec: ExperimentSpec) -> list:
    name = "tau" if spec.kind == "median_vs_tau" else "K"
    grid = spec.tau_grid if name == "tau" else spec.K_grid
    jobs = []
    for value in grid:
        cfg = spec.system.replace(**{name: int(value)}, eta=None)
        jobs += [(spec, cfg, t, (name, int(value))) for t in range(spec.trials)]
    return [r for rows in _pool_map(_rate_rows, jobs, spec.workers) for r in rows]


def _ber_scenario(spec, cfg, snr_db, seed):
    return detection.BerScenario(
        system=cfg, snr_db=tuple(snr_db), csi=spec.csi, n_drops=spec.trials,
        symbols_per_drop=spec.symbols_per_drop, master_seed=seed,
        ep=detection.EPConfig(t_max=spec.ep_t_max, damping=spec.ep_damping),
        gabp=detection.GaBPConfig(i_max=spec.gabp_i_max, damping=spec.gabp_damping))


def run_ber(spec: ExperimentSpec) -> list:
    scen = _ber_scenario(spec, spec.system, spec.snr_db, spec.master_seed)
    recs = detection.ber_experiment(spec.active_schemes, scen)
    return [(r.snr_db, r.scheme, r.ber, r.bits_counted) for r in recs]


def run_ber_ratio(spec: ExperimentSpec) -> list:
    rows = []
    for i, K in enumerate(spec.K_grid):
        cfg = spec.system.replace(K=int(K), eta=None)
        scen = _ber_scenario(spec, cfg, (spec.ratio_snr_db,), seed_derivation(spec.master_seed, i))
        for r in detection.ber_experiment(spec.active_schemes, scen):
            rows.append((int(K), cfg.tau, int(K) / cfg.tau, r.scheme, r.ber, r.bits_counted))
    return rows


def sequence_source(scheme: str, spec: ExperimentSpec, cfg=None):
    """Time-domain pilot sequences for sensing, as a list.

    Proposed sequences are all K columns of the designs of successive drops;
    the baseline draws one column of a fresh random orthogonal basis per
    sequence.
    """
    cfg = cfg or spec.system
    n = spec.n_sequences
    seqs = []
    if scheme == "proposed":
        drop = 0
        while len(seqs) < n:
            seed = seed_derivation(spec.master_seed, drop)
            beta = sysmodel.drop_network(cfg, _rng(derive(seed, 0)))
            F = make_pilots("proposed", beta, cfg, spec, derive(seed, 1))
            seqs += [sensing.time_domain_pilot(F, k) for k in range(cfg.K)]
            drop += 1
        return seqs[:n]
    if scheme == "random":
        rng = _rng(derive(spec.master_seed, 1 << 32))
        for _ in range(n):
            basis = pilots.make_basis(cfg.tau, rng=rng)
            seqs.append(basis.B[:, rng.integers(cfg.tau)].copy())
        return seqs
    raise ValueError(f"sensing supports 'proposed' and 'random', not {scheme!r}")


def run_acf(spec: ExperimentSpec) -> list:
    rows = []
    for scheme in spec.active_schemes:
        seqs = sequence_source(scheme, spec)
        lags, level = sensing.sidelobe_profile_dB(np.array(seqs), len(seqs), spec.acf_mode)
        rows += [(int(k), scheme, v) for k, v in zip(lags, level)]
    return rows


def range_pilot(scheme: str, spec: ExperimentSpec) -> np.ndarray:
    cfg = spec.system
    seed = seed_derivation(spec.master_seed, 0)
    beta = sysmodel.drop_network(cfg, _rng(derive(seed, 0)))
    return sensing.time_domain_pilot(make_pilots(scheme, beta, cfg, spec, derive(seed, 1)), 0)


def run_range(spec: ExperimentSpec) -> list:
    """Magnitude profile averaged (linear) over ``trials`` noise draws."""
    rows = []
    for scheme in spec.active_schemes:
        p = range_pilot(scheme, spec)
        scene = sensing.RangeScene(list(spec.targets_m), spec.range_snr_db, p, spec.system.B_Hz)
        acc = None
        for t in range(spec.trials):
            prof = sensing.range_profile(scene, _rng(seed_derivation(spec.master_seed, 1000 + t)))
            acc = np.abs(prof.raw) if acc is None else acc + np.abs(prof.raw)
        with np.errstate(divide="ignore"):
            db = 20.0 * np.log10(acc / acc.max())
        rows += [(r, scheme, v) for r, v in zip(prof.range_m, db)]
    return rows


def run_design(spec: ExperimentSpec) -> list:
    cfg = spec.system
    seed = seed_derivation(spec.master_seed, 0)
    beta = sysmodel.drop_network(cfg, _rng(derive(seed, 0)))
    res = manifold.design_pilots(beta, cfg.rho_sinr, cfg.tau, _rng(derive(derive(seed, 1), 3)),
                                 design_config(spec), rho_p=cfg.rho_p)
    return [(i, v) for i, v in enumerate(res.trace)]


RUNNERS = {
    "design": run_design, "rates_cdf": run_rates, "median_vs_tau": run_rate_sweep,
    "median_vs_K": run_rate_sweep, "ber_sweep": run_ber, "ber_vs_ratio": run_ber_ratio,
    "acf_profile": run_acf, "range_profile": run_range,
}


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "-inf" if v < 0 else "inf"
        return repr(v)
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def to_csv(schema: str, rows) -> str:
    version, header = SCHEMAS[schema]
    buf = io.StringIO()
    buf.write(f"# cfisac-csv {schema} v{version}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def run_experiment(spec: ExperimentSpec, out=None) -> Path:
    """Run the pipeline for ``spec.kind`` and write its CSV; returns the path."""
    spec.validate()
    rows = RUNNERS[spec.kind](spec)
    path = Path(out or spec.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(to_csv(KIND_SCHEMA[spec.kind], rows))
    return path
