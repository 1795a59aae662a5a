"""Experiment orchestration: sweep grids, deterministic CSV/JSON tables, SVG plots.

Grid points are isolated: a module error (say an empty microcanonical window)
becomes an error row and the sweep continues.  Outputs are written by a single
collector in grid order, so reruns with an identical config are byte-identical
for results.csv and results.json (the manifest carries wall-clock times and is
exempt).
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .berry_esseen import kolmogorov_distance, spectral_cdf
from .config import ExperimentConfig
from .correlations import correlation, fit_profile
from .equivalence import (
    check_microcanonical_equivalence,
    check_state_equivalence,
    check_window_states,
    micro_relent_bound,
)
from .errors import ConfigError, EnsembleKitError
from .operators import build_model, diagonalize
from .quantinfo import trace_distance
from .states import gibbs, microcanonical, restricted_partition

WORKERS_ENV = "ENSEMBLEKIT_WORKERS"


@dataclass
class RunManifest:
    config_hash: str
    tool_version: str
    seeds: dict
    wall_clock: dict
    outputs: list[str]
    num_points: int
    num_failed: int
    output_dir: str = ""

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "tool_version": self.tool_version,
            "seeds": self.seeds,
            "wall_clock_seconds": self.wall_clock,
            "outputs": self.outputs,
            "num_points": self.num_points,
            "num_failed": self.num_failed,
        }


# CSV column catalog: (name, description).  Extraction happens in _flat_row;
# the catalog also generates the data dictionary shipped with every run.
CSV_COLUMNS = [
    ("index", "grid point index in deterministic sweep order"),
    ("status", "ok | error"),
    ("error", "error message when status=error, else empty"),
    ("family", "model family"),
    ("n", "lattice edge length"),
    ("d", "lattice dimension"),
    ("N", "total number of sites n^d"),
    ("T", "temperature (k_B = 1)"),
    ("l", "hypercube edge length for the local average"),
    ("e", "microcanonical target energy density"),
    ("delta", "microcanonical spread parameter (half width delta sqrt(N))"),
    ("eps", "epsilon in the equivalence conditions and bounds"),
    ("C_d", "Berry-Esseen dimensional constant"),
    ("Z", "canonical partition function"),
    ("log_Z", "natural log of the partition function"),
    ("u", "energy density of the Gibbs state"),
    ("c", "specific heat capacity density"),
    ("s", "entropy density in nats"),
    ("xi", "certified correlation length of the decay envelope"),
    ("z_exponent", "certified polynomial exponent of the decay envelope"),
    ("envelope_ok", "True iff the envelope dominates every correlation sample"),
    ("window_dim", "number of eigenstates in the microcanonical window"),
    ("Z_restricted", "Boltzmann weight summed over the window"),
    ("kolmogorov", "sup-distance between the Gibbs spectral CDF and its Gaussian"),
    ("be_delta", "Berry-Esseen prefactor Delta for the Gibbs state"),
    ("be_bound", "Berry-Esseen bound Delta ln^{2d}(N)/sqrt(N)"),
    ("energy_offset_margin", "margin of |e - u| <= sqrt(c T^2 / N)"),
    ("spread_lower_margin", "margin of the lower spread condition on delta"),
    ("spread_upper_margin", "margin of delta <= sqrt(c T^2)"),
    ("spread_window_feasible", "True iff the spread window is nonempty for some delta"),
    ("size_condition_margin", "margin of the epsilon-N-l size condition"),
    ("micro_lambert_condition_margin", "margin of the Lambert-W microcanonical condition"),
    ("preconditions_ok", "True iff every recorded hypothesis holds"),
    ("bound_7sqrt_eps", "the 7 sqrt(eps) conclusion bound"),
    ("measured_avg", "mean local trace distance over all cubes"),
    ("measured_max", "max local trace distance over all cubes"),
    ("global_trace_distance", "trace distance between the full states"),
    ("conclusion_holds", "True iff measured_avg <= bound + 1e-9"),
    ("strong_bound", "the (sqrt2+2+sqrt(ln2)) sqrt(2 eps) bound"),
    ("s_bundle", "exponent bundle of the microcanonical Lambert-W condition"),
    ("srel_bits", "relative entropy S(tau||rho_T) in bits"),
    ("lambert_condition_margin", "margin of the Lambert-W size condition"),
    ("simple_condition_margin", "margin of the simplified size condition"),
    ("window_relent_lhs", "S(tau||rho_T) in bits (window-state bound check)"),
    ("window_relent_rhs", "the log(window)/Berry-Esseen bound on the relative entropy"),
    ("window_relent_delta0", "minimal admissible spread implied by the CDF comparison"),
    ("window_relent_holds", "True iff window_relent_lhs <= window_relent_rhs + 1e-9"),
    ("window_check_part", "1 or 2; which window-state check ran"),
    ("window_check_bound", "window-state conclusion bound for this grid point"),
    ("window_check_measured", "measured value (part 1) or sample mean (part 2)"),
    ("haar_fraction_ok", "fraction of Haar samples within the bound (part 2)"),
    ("eta", "Haar concentration scale eta (part 2)"),
]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    return obj


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (np.floating,)):
        v = float(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _resolve_workers(workers: int | None) -> int:
    if workers is not None:
        return max(1, workers)
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}")
    return 1


class _Prepared:
    """Per-(n, T) shared data: spectrum, thermal record, profile, CDF distance."""

    def __init__(self, ham, spec):
        self.ham = ham
        self.spec = spec
        self.thermal = {}
        self.profile = {}
        self.kolmogorov = {}


def _prepare(cfg: ExperimentConfig):
    prepared = {}
    for n in cfg.lattice_sizes:
        ham = build_model(cfg.model_spec(n))
        spec = diagonalize(ham)
        prep = _Prepared(ham, spec)
        lat = ham.lattice
        origin = tuple([1] * lat.d)
        usable = [r for r in cfg.correlation["distances"] if r <= lat.n - 1]
        if len(usable) < 2:
            raise ConfigError(
                f"correlation.distances leaves fewer than two usable separations "
                f"for n={lat.n}", field_path="correlation.distances")
        for T in cfg.temperatures:
            rho, td = gibbs(spec, T, num_sites=lat.num_sites)
            prep.thermal[T] = (rho, td)
            samples = []
            for dist in usable:
                site = list(origin)
                site[0] += dist
                est = correlation(rho, lat.region([origin]), lat.region([tuple(site)]),
                                  ham.local_dim, restarts=cfg.correlation["restarts"],
                                  seed=cfg.correlation["seed"])
                samples.append((float(dist), est.upper))
            prep.profile[T] = fit_profile(samples, lat.num_sites)
            prep.kolmogorov[T] = kolmogorov_distance(spectral_cdf(rho, spec))
        prepared[n] = prep
    return prepared


def _grid(cfg: ExperimentConfig):
    points = []
    for n in cfg.lattice_sizes:
        for T in cfg.temperatures:
            for l in cfg.cube_lengths:
                e_list = cfg.energy_targets if isinstance(cfg.energy_targets, list) \
                    else [cfg.energy_targets]
                d_list = cfg.deltas if isinstance(cfg.deltas, list) else [cfg.deltas]
                for e_spec in e_list:
                    for delta_spec in d_list:
                        for eps in cfg.epsilons:
                            points.append({"n": n, "T": T, "l": l, "e_spec": e_spec,
                                           "delta_spec": delta_spec, "eps": eps})
    return points


def _evaluate_point(cfg: ExperimentConfig, prep: _Prepared, point: dict) -> dict:
    ham, spec = prep.ham, prep.spec
    lat = ham.lattice
    T, l, eps = point["T"], point["l"], point["eps"]
    rho, td = prep.thermal[T]
    profile = prep.profile[T]
    e = td.energy_density if point["e_spec"] == "u(T)" else float(point["e_spec"])
    delta = math.sqrt(td.specific_heat) * T if point["delta_spec"] == "paper-window" \
        else float(point["delta_spec"])

    out = {
        "params": {"family": cfg.model["family"], "n": lat.n, "d": lat.d,
                   "N": lat.num_sites, "T": T, "l": l, "e": e, "delta": delta,
                   "eps": eps, "C_d": cfg.c_d},
        "thermal": {"Z": td.partition_function, "log_Z": td.log_partition_function,
                    "u": td.energy_density, "c": td.specific_heat,
                    "s": td.entropy_density},
        "profile": {"xi": profile.xi, "z": profile.z,
                    "envelope_ok": profile.envelope_ok,
                    "samples": list(profile.samples)},
        "kolmogorov": prep.kolmogorov[T],
        "status": "ok",
    }

    tau, window = microcanonical(spec, e, delta, num_sites=lat.num_sites)
    out["Z_restricted"] = restricted_partition(spec, T, e, delta,
                                               num_sites=lat.num_sites)
    thm1 = check_microcanonical_equivalence(ham, T, e, delta, l, eps, profile, cfg.c_d, spec=spec)
    out["equivalence"] = thm1.to_dict()
    out["state_equivalence"] = check_state_equivalence(tau, rho, l, eps, profile,
                                           lattice=lat, local_dim=ham.local_dim).to_dict()
    out["window_relent"] = micro_relent_bound(ham, T, tau, e, delta, profile,
                                       cfg.c_d, spec=spec).to_dict()
    if cfg.haar:
        rep = check_window_states(ham, T, e, delta, cfg.haar["seed"], 2, l, eps,
                              profile, cfg.c_d, spec=spec,
                              haar_samples=cfg.haar["samples"])
    else:
        rep = check_window_states(ham, T, e, delta, None, 1, l, eps,
                              profile, cfg.c_d, spec=spec)
    out["window_states"] = rep.to_dict()
    return out


def _flat_row(index: int, point: dict, cfg: ExperimentConfig, result: dict) -> dict:
    row = {name: None for name, _ in CSV_COLUMNS}
    row.update({
        "index": index,
        "status": result.get("status", "error"),
        "error": result.get("error", ""),
        "family": cfg.model["family"],
        "n": point["n"],
        "d": cfg.model["d"],
        "N": point["n"] ** cfg.model["d"],
        "T": point["T"],
        "l": point["l"],
        "eps": point["eps"],
        "C_d": cfg.c_d,
    })
    if result.get("status") != "ok":
        row["e"] = result.get("params", {}).get("e")
        row["delta"] = result.get("params", {}).get("delta")
        return row

    params = result["params"]
    thermal = result["thermal"]
    profile = result["profile"]
    thm1 = result["equivalence"]
    pre = {p["name"]: p for p in thm1["preconditions"]}
    strong_pre = {p["name"]: p for p in result["state_equivalence"]["preconditions"]}
    wrel = result["window_relent"]
    cor = result["window_states"]
    row.update({
        "e": params["e"], "delta": params["delta"],
        "Z": thermal["Z"], "log_Z": thermal["log_Z"], "u": thermal["u"],
        "c": thermal["c"], "s": thermal["s"],
        "xi": profile["xi"], "z_exponent": profile["z"],
        "envelope_ok": profile["envelope_ok"],
        "window_dim": thm1["extras"]["window_dim"],
        "Z_restricted": result["Z_restricted"],
        "kolmogorov": result["kolmogorov"],
        "be_delta": thm1["extras"]["be_delta"],
        "be_bound": thm1["extras"]["be_kolmogorov_bound"],
        "energy_offset_margin": pre["energy_offset"]["margin"],
        "spread_lower_margin": pre["spread_lower"]["margin"],
        "spread_upper_margin": pre["spread_upper"]["margin"],
        "spread_window_feasible": pre["spread_window_feasible"]["satisfied"],
        "size_condition_margin": pre["size_condition"]["margin"],
        "micro_lambert_condition_margin": pre["micro_lambert_condition"]["margin"],
        "preconditions_ok": thm1["preconditions_satisfied"],
        "bound_7sqrt_eps": thm1["claimed_bound"],
        "measured_avg": thm1["measured"],
        "measured_max": thm1["measured_max"],
        "global_trace_distance": thm1["extras"]["global_trace_distance"],
        "conclusion_holds": thm1["conclusion_holds"],
        "strong_bound": thm1["extras"]["strong_bound"],
        "s_bundle": thm1["extras"]["s_bundle"],
        "srel_bits": result["state_equivalence"]["extras"]["s_rel_bits"],
        "lambert_condition_margin": strong_pre["lambert_condition"]["margin"],
        "simple_condition_margin": strong_pre["simple_condition"]["margin"],
        "window_relent_lhs": wrel["lhs_bits"],
        "window_relent_rhs": wrel["rhs_bits"],
        "window_relent_delta0": wrel["delta0"],
        "window_relent_holds": wrel["holds"],
        "window_check_part": cor["params"]["part"],
        "window_check_bound": cor["claimed_bound"],
        "window_check_measured": cor["measured"],
        "haar_fraction_ok": cor["extras"].get("fraction_within_bound"),
        "eta": cor["extras"].get("eta"),
    })
    return row


def run(cfg: ExperimentConfig, out_dir=None, workers: int | None = None) -> RunManifest:
    """Execute the sweep and write results.csv, results.json, the data
    dictionary, the SVG plots, and run_manifest.json into the output directory."""
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = _resolve_workers(workers)
    wall = {}

    t0 = time.perf_counter()
    prepared = _prepare(cfg)
    wall["prepare"] = time.perf_counter() - t0

    points = _grid(cfg)
    results = [None] * len(points)

    def job(i):
        point = points[i]
        try:
            return _evaluate_point(cfg, prepared[point["n"]], point)
        except EnsembleKitError as exc:
            return {"status": "error", "error": str(exc),
                    "error_type": type(exc).__name__}

    t0 = time.perf_counter()
    if workers == 1:
        for i in range(len(points)):
            results[i] = job(i)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for i, res in enumerate(pool.map(job, range(len(points)))):
                results[i] = res
    wall["grid"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    outputs = _write_outputs(cfg, points, results, prepared, out)
    wall["outputs"] = time.perf_counter() - t0

    failed = sum(1 for r in results if r.get("status") != "ok")
    manifest = RunManifest(
        config_hash=cfg.config_hash(),
        tool_version=__version__,
        seeds={"model": cfg.model["seed"],
               "correlation": cfg.correlation["seed"],
               "haar": cfg.haar["seed"] if cfg.haar else None},
        wall_clock={k: round(v, 3) for k, v in wall.items()},
        outputs=outputs,
        num_points=len(points),
        num_failed=failed,
        output_dir=str(out),
    )
    (out / "run_manifest.json").write_text(
        json.dumps(_jsonable(manifest.to_dict()), sort_keys=True, indent=2) + "\n")
    return manifest


def _write_outputs(cfg, points, results, prepared, out: Path) -> list[str]:
    from .plots import plot_cdf_vs_gaussian, plot_distance_vs_n, plot_margin_table

    rows = [_flat_row(i, p, cfg, r) for i, (p, r) in enumerate(zip(points, results))]

    csv_path = out / "results.csv"
    header = ",".join(name for name, _ in CSV_COLUMNS)
    lines = [header]
    for row in rows:
        lines.append(",".join(_csv_cell(row[name]) for name, _ in CSV_COLUMNS))
    csv_path.write_text("\n".join(lines) + "\n")

    json_path = out / "results.json"
    payload = {
        "config": cfg.normalized,
        "config_hash": cfg.config_hash(),
        "tool_version": __version__,
        "grid": [{"index": i, "point": p, **_jsonable(r)}
                 for i, (p, r) in enumerate(zip(points, results))],
    }
    json_path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")

    dict_path = out / "results_columns.md"
    doc = ["# results.csv column dictionary", ""]
    for name, desc in CSV_COLUMNS:
        doc.append(f"- `{name}`: {desc}")
    dict_path.write_text("\n".join(doc) + "\n")

    # plots: representative CDF, distance vs N, margins table
    first_n = cfg.lattice_sizes[0]
    first_t = cfg.temperatures[0]
    prep = prepared[first_n]
    rho, _ = prep.thermal[first_t]
    cdf = spectral_cdf(rho, prep.spec)
    cdf_path = out / "cdf_vs_gaussian.svg"
    plot_cdf_vs_gaussian(cdf, cdf_path,
                         title=f"n={first_n}, T={first_t}: spectral CDF vs Gaussian")

    series = {}
    seen = set()
    for p, row in zip(points, rows):
        if row["status"] != "ok":
            continue
        key = (p["T"], p["l"])
        tag = (p["n"],) + key
        if tag in seen:
            continue
        seen.add(tag)
        series.setdefault(f"T={p['T']}, l={p['l']}", []).append(
            (p["n"] ** cfg.model["d"], row["measured_avg"]))
    dist_path = out / "distance_vs_N.svg"
    plot_distance_vs_n(series, dist_path)

    margin_rows = []
    for row in rows:
        margin_rows.append({
            "idx": row["index"], "n": row["n"], "T": row["T"], "l": row["l"],
            "eps": row["eps"], "status": row["status"],
            "e_off": row["energy_offset_margin"],
            "spr_lo": row["spread_lower_margin"],
            "spr_hi": row["spread_upper_margin"],
            "size": row["size_condition_margin"],
            "micro_lambert": row["micro_lambert_condition_margin"],
            "measured": row["measured_avg"], "bound": row["bound_7sqrt_eps"],
        })
    margin_path = out / "margin_table.svg"
    plot_margin_table(margin_rows, margin_path)

    return [p.name for p in (csv_path, json_path, dict_path, cdf_path,
                             dist_path, margin_path)]
