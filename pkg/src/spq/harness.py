"""Experiment orchestration: the classical outer loop over the first-stage
decision, the three benchmark experiments, and structured CSV
and JSON output.

Every run is fully determined by (spec, master_seed); per-run RNG streams
are derived from the master seed and the run coordinates, and result CSVs
are byte-identical on rerun.  Wall times go only to the JSON metadata
sidecar, which is excluded from that guarantee.
"""

from __future__ import annotations

import csv
import json
import os
import time
import zlib
from dataclasses import asdict, dataclass, field
from multiprocessing import get_context
from pathlib import Path
from statistics import median_low

import numpy as np

from .dqa import (
    AnnealSchedule,
    RegisterLayout,
    build_dqa,
    expectation_HQ,
    prepare_per_scenario_optimal,
    run_dqa,
    run_dqa_fast,
)
from .model import (
    DiscreteDistribution,
    UnitCommitmentModel,
    bounds_for,
    expected_value_exact,
    generate_instance,
    model_from_instance,
    objective_exact,
)
from .oracle import OracleKind, build_oracle, sin_oracle_readback
from .qae import QaeConfig, build_A, mc_estimate_batch, qpe_state, run_qae
from .statevector import sample_register


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


_FIG5_DEFAULT_CONFIGS = ((4, 6, 10), (5, 6, 15), (6, 5, 20))


@dataclass
class ExperimentSpec:
    """Declarative description of one experiment; mirrors the config JSON."""

    kind: str
    master_seed: int = 0
    # fig3 sweep
    n_y_values: tuple[int, ...] = (4, 6, 8, 10)
    n_instances: int = 30
    # fig4 estimator density
    n_y: int = 3
    x: int = 1
    m_values: tuple[int, ...] = (5, 6, 7, 8)
    n_estimates: int = 10000
    # fig5 full pipeline
    configs: tuple[tuple[int, int, int], ...] = _FIG5_DEFAULT_CONFIGS
    n_repetitions: int = 10
    oracle: str = "sin"
    angle_mode: str = "normalized"
    amplify: int = 1
    instance_file: str | None = None

    _FIELDS = ("kind", "master_seed", "n_y_values", "n_instances", "n_y", "x",
               "m_values", "n_estimates", "configs", "n_repetitions", "oracle",
               "angle_mode", "amplify", "instance_file")

    def __post_init__(self):
        if self.kind not in ("fig3", "fig4", "fig5"):
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.oracle not in ("exact", "sin"):
            raise ConfigError(f"oracle must be 'exact' or 'sin', got {self.oracle!r}")
        if self.angle_mode not in ("normalized", "literal"):
            raise ConfigError(f"angle_mode must be 'normalized' or 'literal'")
        if self.amplify < 1 or self.n_instances < 1 or self.n_repetitions < 1:
            raise ConfigError("counts must be positive")
        self.n_y_values = tuple(int(v) for v in self.n_y_values)
        self.m_values = tuple(int(v) for v in self.m_values)
        self.configs = tuple((int(a), int(b), int(c)) for a, b, c in self.configs)

    @classmethod
    def from_json(cls, path) -> "ExperimentSpec":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        unknown = set(raw) - set(cls._FIELDS)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if "kind" not in raw:
            raise ConfigError("config is missing 'kind'")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def derive_seed(master_seed: int, *parts) -> int:
    """Stable per-run seed from the master seed and run coordinates."""
    ints = [int(master_seed) & 0xFFFFFFFF]
    for p in parts:
        if isinstance(p, str):
            ints.append(zlib.crc32(p.encode()))
        else:
            ints.append(int(p) & 0xFFFFFFFF)
    state = np.random.SeedSequence(ints).generate_state(2)
    return int(state[0]) << 32 | int(state[1])


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.12g}"
    if value is None:
        return ""
    return str(value)


def write_csv(path, fieldnames, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_fmt(row[k]) for k in fieldnames])


def _write_meta(out_dir: Path, spec: ExperimentSpec, started: float) -> None:
    meta = {"spec": asdict(spec), "wall_time_s": time.time() - started}
    with open(out_dir / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=list)
        fh.write("\n")


# -- outer loop -------------------------------------------------------------

@dataclass
class OuterLoopResult:
    rows: list[dict] = field(default_factory=list)
    x_star: int = 0        # argmin of the true objective
    x_est: int = 0         # argmin of the estimated objective

    @property
    def rel_error_sum(self) -> float:
        return sum(abs(r["o_est"] - r["o_exact"]) / r["o_exact"] for r in self.rows)

    @property
    def minima_rel_error(self) -> float:
        o = {r["x"]: r["o_exact"] for r in self.rows}
        return abs(o[self.x_est] - o[self.x_star]) / o[self.x_star]

    def pearson(self) -> float:
        o = np.array([r["o_exact"] for r in self.rows])
        est = np.array([r["o_est"] for r in self.rows])
        return float(np.corrcoef(est, o)[0, 1])


def _qae_estimate_for_x(model, dist, x, T, m, oracle, angle_mode, amplify, seed):
    """One full-pipeline point: DQA, oracle, QAE, readback."""
    layout = RegisterLayout.standard(model.n_y, dist.n_xi,
                                     include_ancilla=True, m_estimate=m)
    schedule = AnnealSchedule.linear(T)
    dqa_seq = build_dqa(model, x, dist, schedule, layout)
    bounds = bounds_for(model, x)
    if oracle == "exact":
        kind = OracleKind.exact(bounds)
    else:
        kind = OracleKind.sin_approx(bounds, literal_pi=(angle_mode == "literal"))
    oracle_seq = build_oracle(kind, model, x, layout)
    A = build_A(dqa_seq, oracle_seq, layout)

    state = run_dqa_fast(model, x, dist, schedule)
    exp_hq = expectation_HQ(state, model)
    a_true = (exp_hq - bounds.q_l) / bounds.width if oracle == "exact" else None

    config = QaeConfig(m=m, repetitions=amplify, rng_seed=seed)
    results = run_qae(A, config, layout, bounds, a_true=a_true)
    med = median_low([r.phi_hat for r in results])
    picked = next(r for r in results if r.phi_hat == med)
    if oracle == "sin":
        phi_est = sin_oracle_readback(picked.a_hat, kind)
    else:
        phi_est = picked.phi_hat
    return picked, phi_est, exp_hq


def outer_loop(model: UnitCommitmentModel, dist: DiscreteDistribution, T: int,
               mode: str = "expectation", *, m: int | None = None,
               oracle: str = "exact", angle_mode: str = "normalized",
               amplify: int = 1, master_seed: int = 0,
               seed_tag: tuple = ()) -> OuterLoopResult:
    """Objective table over x in {0..d}.

    Modes: "expectation" evaluates <H_Q> on the DQA statevector (no shot
    noise), "qae" runs the full estimation pipeline, and "exact" uses the
    brute-force per-scenario optimal state as a converged surrogate.
    """
    if mode not in ("expectation", "qae", "exact"):
        raise ConfigError(f"unknown outer-loop mode {mode!r}")
    if mode == "qae" and m is None:
        raise ConfigError("qae mode requires the estimate width m")
    result = OuterLoopResult()
    for x in range(model.d + 1):
        phi = expected_value_exact(model, x, dist)
        o_exact = model.c_x * x + phi
        row = {"x": x, "T": T, "phi_exact": phi, "o_exact": o_exact,
               "a_hat": None, "b": None, "within_bound": None, "m": m}
        if mode == "expectation":
            state = run_dqa_fast(model, x, dist, AnnealSchedule.linear(T))
            exp_hq = expectation_HQ(state, model)
            phi_est = exp_hq
        elif mode == "exact":
            layout = RegisterLayout.standard(model.n_y, dist.n_xi)
            state = run_dqa(prepare_per_scenario_optimal(model, x, dist), layout)
            exp_hq = expectation_HQ(state, model)
            phi_est = exp_hq
        else:
            seed = derive_seed(master_seed, *seed_tag, x)
            picked, phi_est, exp_hq = _qae_estimate_for_x(
                model, dist, x, T, m, oracle, angle_mode, amplify, seed)
            row.update(a_hat=picked.a_hat, b=picked.b,
                       within_bound=picked.within_bound)
        row.update(exp_hq=exp_hq, delta=exp_hq - phi, phi_est=phi_est,
                   o_est=model.c_x * x + phi_est)
        result.rows.append(row)
    o_exact = [r["o_exact"] for r in result.rows]
    o_est = [r["o_est"] for r in result.rows]
    result.x_star = int(np.argmin(o_exact))
    result.x_est = int(np.argmin(o_est))
    return result


# -- fig3: annealing-time sweep ----------------------------------------------

def _fig3_task(payload: tuple) -> list[dict]:
    n_y, index, instance_seed = payload
    inst = generate_instance(n_y, instance_seed)
    model, dist = model_from_instance(inst)
    rows = []
    for t_rule, T in (("linear", n_y), ("quadratic", n_y * n_y)):
        res = outer_loop(model, dist, T, mode="expectation")
        rows.append({
            "n_y": n_y, "instance_index": index, "instance_seed": instance_seed,
            "t_rule": t_rule, "T": T,
            "rel_error_sum": res.rel_error_sum,
            "minima_rel_error": res.minima_rel_error,
            "x_star": res.x_star, "x_est": res.x_est,
        })
    return rows


def experiment_fig3(spec: ExperimentSpec, out_dir, workers: int | None = None) -> dict:
    """Relative objective error and minima quality over seeded instances,
    for the linear and quadratic annealing-time rules."""
    started = time.time()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [(n_y, i, derive_seed(spec.master_seed, "fig3", n_y, i))
             for n_y in spec.n_y_values for i in range(spec.n_instances)]
    if workers is None:
        workers = min(os.cpu_count() or 1, len(tasks))
    if workers > 1:
        with get_context("fork").Pool(workers) as pool:
            chunks = pool.map(_fig3_task, tasks)
    else:
        chunks = [_fig3_task(t) for t in tasks]
    rows = [row for chunk in chunks for row in chunk]

    summary = []
    for n_y in spec.n_y_values:
        for t_rule in ("linear", "quadratic"):
            sel = [r for r in rows if r["n_y"] == n_y and r["t_rule"] == t_rule]
            for metric in ("rel_error_sum", "minima_rel_error"):
                vals = np.array([r[metric] for r in sel])
                summary.append({
                    "n_y": n_y, "t_rule": t_rule, "metric": metric,
                    "min": float(vals.min()), "median": float(np.median(vals)),
                    "max": float(vals.max()),
                })
    write_csv(out_dir / "fig3_runs.csv",
              ["n_y", "instance_index", "instance_seed", "t_rule", "T",
               "rel_error_sum", "minima_rel_error", "x_star", "x_est"], rows)
    write_csv(out_dir / "fig3_summary.csv",
              ["n_y", "t_rule", "metric", "min", "median", "max"], summary)
    _write_meta(out_dir, spec, started)
    return {"rows": rows, "summary": summary}


# -- fig4: estimator density ---------------------------------------------------

_FIG4_BIN_WIDTH = 0.02237  # histogram bin width used for figure parity


def experiment_fig4(spec: ExperimentSpec, out_dir) -> dict:
    """QAE versus Monte Carlo at equal sample budget on a perfectly
    converged state (brute-force construction, zero residual temperature)."""
    started = time.time()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if spec.instance_file:
        with open(spec.instance_file) as fh:
            inst = json.load(fh)
    else:
        inst = generate_instance(spec.n_y, derive_seed(spec.master_seed, "fig4"))
    model, dist = model_from_instance(inst)
    x = spec.x
    if not 0 <= x <= model.d:
        raise ConfigError(f"x={x} outside [0, {model.d}]")
    bounds = bounds_for(model, x)
    phi = expected_value_exact(model, x, dist)
    a_true = (phi - bounds.q_l) / bounds.width
    prep = prepare_per_scenario_optimal(model, x, dist)

    estimates, summary = [], []
    for m in spec.m_values:
        layout = RegisterLayout.standard(model.n_y, dist.n_xi,
                                         include_ancilla=True, m_estimate=m)
        oracle_seq = build_oracle(OracleKind.exact(bounds), model, x, layout)
        A = build_A(prep, oracle_seq, layout)
        config = QaeConfig(m=m, repetitions=spec.n_estimates,
                           rng_seed=derive_seed(spec.master_seed, "fig4", m, "qae"))
        state = qpe_state(A, config, layout)
        est_qubits = list(range(layout.num_system_qubits,
                                layout.num_system_qubits + m))
        bs = sample_register(state, est_qubits, spec.n_estimates,
                             np.random.default_rng(config.rng_seed))
        a_qae = np.sin(np.pi * bs / config.M) ** 2
        shots = 2 ** (m + 1)
        a_mc = mc_estimate_batch(A, shots, layout,
                                 np.random.default_rng(
                                     derive_seed(spec.master_seed, "fig4", m, "mc")),
                                 spec.n_estimates)
        for method, arr in (("qae", a_qae), ("mc", a_mc)):
            for v in arr:
                estimates.append({"m": m, "method": method, "a_hat": float(v),
                                  "phi_hat": float(v * bounds.width + bounds.q_l)})
        bound = np.pi / config.M + np.pi ** 2 / config.M ** 2
        summary.append({
            "m": m, "method": "qae", "shots": config.a_applications,
            "rmse": float(np.sqrt(np.mean((a_qae - a_true) ** 2))),
            "within_bound_rate": float(np.mean(np.abs(a_qae - a_true) <= bound)),
            "a_true": a_true, "phi_true": phi,
        })
        summary.append({
            "m": m, "method": "mc", "shots": shots,
            "rmse": float(np.sqrt(np.mean((a_mc - a_true) ** 2))),
            "within_bound_rate": float(np.mean(np.abs(a_mc - a_true) <= bound)),
            "a_true": a_true, "phi_true": phi,
        })

    hist_rows = []
    edges = np.arange(bounds.q_l, bounds.q_u + 2 * _FIG4_BIN_WIDTH, _FIG4_BIN_WIDTH)
    for m in spec.m_values:
        for method in ("qae", "mc"):
            vals = [e["phi_hat"] for e in estimates
                    if e["m"] == m and e["method"] == method]
            counts, _ = np.histogram(vals, bins=edges)
            for lo, cnt in zip(edges[:-1], counts):
                if cnt:
                    hist_rows.append({"m": m, "method": method,
                                      "bin_left": float(lo),
                                      "bin_width": _FIG4_BIN_WIDTH,
                                      "mass": float(cnt) / len(vals)})
    write_csv(out_dir / "fig4_estimates.csv",
              ["m", "method", "a_hat", "phi_hat"], estimates)
    write_csv(out_dir / "fig4_histogram.csv",
              ["m", "method", "bin_left", "bin_width", "mass"], hist_rows)
    write_csv(out_dir / "fig4_summary.csv",
              ["m", "method", "shots", "rmse", "within_bound_rate",
               "a_true", "phi_true"], summary)
    _write_meta(out_dir, spec, started)
    return {"estimates": estimates, "summary": summary, "a_true": a_true}


# -- fig5: full pipeline --------------------------------------------------------

def experiment_fig5(spec: ExperimentSpec, out_dir) -> dict:
    """Objective surfaces from the entire algorithm, one measurement per
    first-stage point."""
    started = time.time()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    surface, summary = [], []
    for ci, (n_y, m, T) in enumerate(spec.configs):
        inst = generate_instance(n_y, derive_seed(spec.master_seed, "fig5", ci))
        model, dist = model_from_instance(inst)
        for rep in range(spec.n_repetitions):
            res = outer_loop(model, dist, T, mode="qae", m=m,
                             oracle=spec.oracle, angle_mode=spec.angle_mode,
                             amplify=spec.amplify, master_seed=spec.master_seed,
                             seed_tag=("fig5", ci, rep))
            for r in res.rows:
                surface.append({"config": ci, "n_y": n_y, "m": m, "rep": rep, **r})
            summary.append({
                "config": ci, "n_y": n_y, "m": m, "T": T, "rep": rep,
                "x_star": res.x_star, "x_est": res.x_est,
                "found_minimum": res.x_star == res.x_est,
                "pearson": res.pearson(),
                "rel_error_sum": res.rel_error_sum,
            })
    write_csv(out_dir / "fig5_surface.csv",
              ["config", "n_y", "m", "rep", "x", "T", "phi_exact", "o_exact",
               "exp_hq", "delta", "phi_est", "o_est", "a_hat", "b",
               "within_bound"], surface)
    write_csv(out_dir / "fig5_summary.csv",
              ["config", "n_y", "m", "T", "rep", "x_star", "x_est",
               "found_minimum", "pearson", "rel_error_sum"], summary)
    _write_meta(out_dir, spec, started)
    return {"surface": surface, "summary": summary}


# -- single runs (CLI) ----------------------------------------------------------

def single_run(inst: dict, x: int, T: int, oracle: str, m: int, seed: int,
               amplify: int = 1, angle_mode: str = "normalized") -> dict:
    """One full-pipeline run; returns the run record."""
    model, dist = model_from_instance(inst)
    if not 0 <= x <= model.d:
        raise ConfigError(f"x={x} outside [0, {model.d}]")
    started = time.time()
    picked, phi_est, exp_hq = _qae_estimate_for_x(
        model, dist, x, T, m, oracle, angle_mode, amplify,
        derive_seed(seed, "run", x))
    phi = expected_value_exact(model, x, dist)
    return {
        "instance_seed": inst.get("seed"), "n_y": model.n_y, "x": x, "T": T,
        "m": m, "oracle": oracle, "amplify": amplify, "seed": seed,
        "phi_exact": phi, "exp_hq": exp_hq, "delta": exp_hq - phi,
        "b": picked.b, "a_hat": picked.a_hat, "phi_est": phi_est,
        "o_est": model.c_x * x + phi_est,
        "o_exact": objective_exact(model, x, dist),
        "within_bound": picked.within_bound,
        "wall_time_s": time.time() - started,
    }


def exact_table(inst: dict) -> list[dict]:
    """Classical oracles only: phi(x) and o(x) over the whole domain."""
    model, dist = model_from_instance(inst)
    rows = []
    for x in range(model.d + 1):
        phi = expected_value_exact(model, x, dist)
        rows.append({"x": x, "phi": phi, "o": model.c_x * x + phi})
    return rows
