"""Command-line interface: config-driven sweeps plus thin per-module subcommands.

Exit codes: 0 success, 1 computation failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .berry_esseen import kolmogorov_distance, spectral_cdf
from .config import ExperimentConfig, validate_config
from .correlations import correlation, fit_profile
from .equivalence import check_window_states
from .errors import ConfigError, EnsembleKitError, SubstateConstructionFailure
from .operators import build_model, diagonalize
from .quantinfo import max_relative_entropy, relative_entropy
from .runner import _jsonable, run
from .states import gibbs, microcanonical, restricted_partition
from .substate import datta_renner_transfer, substate_smooth

logger = logging.getLogger("ensemblekit")


def _add_common(parser, needs_config=True):
    parser.add_argument("--config", required=needs_config,
                        help="experiment config JSON")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    parser.add_argument("--format", choices=("csv", "json"), default="csv",
                        dest="fmt", help="table format for emitted results")


def _emit(rows: list[dict], columns: list[str], args, stem: str) -> None:
    """Write rows to --out/<stem>.<fmt> or print them to stdout."""
    if args.fmt == "json":
        text = json.dumps(_jsonable(rows), sort_keys=True, indent=2) + "\n"
    else:
        lines = [",".join(columns)]
        for row in rows:
            lines.append(",".join(_cell(row.get(c)) for c in columns))
        text = "\n".join(lines) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{stem}.{args.fmt}"
        path.write_text(text)
        print(f"wrote {path}")
    else:
        sys.stdout.write(text)


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (np.floating,)):
        v = float(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _load(args) -> ExperimentConfig:
    return validate_config(args.config)


def _for_each_model(cfg):
    for n in cfg.lattice_sizes:
        ham = build_model(cfg.model_spec(n))
        yield n, ham, diagonalize(ham)


def cmd_run(args) -> int:
    cfg = _load(args)
    manifest = run(cfg, out_dir=args.out)
    print(f"run complete: {manifest.num_points} grid points, "
          f"{manifest.num_failed} failed, outputs in {manifest.output_dir}")
    for name in manifest.outputs:
        print(f"  {name}")
    return 0 if manifest.num_failed < manifest.num_points else 1


def cmd_spectrum(args) -> int:
    cfg = _load(args)
    rows = []
    for n, ham, spec in _for_each_model(cfg):
        for i, energy in enumerate(spec.energies):
            rows.append({"n": n, "index": i, "energy": float(energy)})
    _emit(rows, ["n", "index", "energy"], args, "spectrum")
    return 0


def cmd_thermal(args) -> int:
    cfg = _load(args)
    rows = []
    for n, ham, spec in _for_each_model(cfg):
        for T in cfg.temperatures:
            _, td = gibbs(spec, T, num_sites=ham.lattice.num_sites)
            rows.append({"n": n, "T": T, "Z": td.partition_function,
                         "log_Z": td.log_partition_function,
                         "u": td.energy_density, "c": td.specific_heat,
                         "s": td.entropy_density})
    _emit(rows, ["n", "T", "Z", "log_Z", "u", "c", "s"], args, "thermal")
    return 0


def cmd_micro(args) -> int:
    cfg = _load(args)
    rows = []
    for n, ham, spec in _for_each_model(cfg):
        N = ham.lattice.num_sites
        for T in cfg.temperatures:
            _, td = gibbs(spec, T, num_sites=N)
            e_list = cfg.energy_targets if isinstance(cfg.energy_targets, list) \
                else [td.energy_density]
            d_list = cfg.deltas if isinstance(cfg.deltas, list) \
                else [math.sqrt(td.specific_heat) * T]
            for e in e_list:
                for delta in d_list:
                    row = {"n": n, "T": T, "e": e, "delta": delta}
                    try:
                        _, window = microcanonical(spec, e, delta, num_sites=N)
                        row.update({
                            "window_dim": window.dim,
                            "mean_energy": window.mean_energy,
                            "min_energy": float(window.member_energies.min()),
                            "max_energy": float(window.member_energies.max()),
                            "Z_restricted": restricted_partition(
                                spec, T, e, delta, num_sites=N),
                        })
                    except EnsembleKitError as exc:
                        row["error"] = str(exc)
                    rows.append(row)
    _emit(rows, ["n", "T", "e", "delta", "window_dim", "mean_energy",
                 "min_energy", "max_energy", "Z_restricted", "error"],
          args, "micro")
    return 0


def cmd_correlations(args) -> int:
    cfg = _load(args)
    seed = args.seed if args.seed is not None else cfg.correlation["seed"]
    rows = []
    for n, ham, spec in _for_each_model(cfg):
        lat = ham.lattice
        origin = tuple([1] * lat.d)
        usable = [r for r in cfg.correlation["distances"] if r <= lat.n - 1]
        for T in cfg.temperatures:
            rho, _ = gibbs(spec, T, num_sites=lat.num_sites)
            samples = []
            for dist in usable:
                site = list(origin)
                site[0] += dist
                est = correlation(rho, lat.region([origin]),
                                  lat.region([tuple(site)]), ham.local_dim,
                                  restarts=cfg.correlation["restarts"], seed=seed)
                samples.append((dist, est))
            profile = fit_profile([(d, e.upper) for d, e in samples], lat.num_sites)
            for dist, est in samples:
                rows.append({"n": n, "T": T, "distance": dist,
                             "cor_lower": est.lower, "cor_upper": est.upper,
                             "xi": profile.xi, "z": profile.z,
                             "envelope_ok": profile.envelope_ok})
    _emit(rows, ["n", "T", "distance", "cor_lower", "cor_upper", "xi", "z",
                 "envelope_ok"], args, "correlations")
    return 0


def cmd_berry_esseen(args) -> int:
    cfg = _load(args)
    summary, jumps = [], []
    for n, ham, spec in _for_each_model(cfg):
        N = ham.lattice.num_sites
        for T in cfg.temperatures:
            rho, td = gibbs(spec, T, num_sites=N)
            cdf = spectral_cdf(rho, spec)
            dist = kolmogorov_distance(cdf)
            summary.append({"n": n, "T": T, "kolmogorov": dist,
                            "mu": cdf.mu, "sigma2": cdf.sigma2,
                            "num_jumps": len(cdf.jump_points)})
            f = 0.0
            for x, m in zip(cdf.jump_points, cdf.masses):
                f += m
                jumps.append({"n": n, "T": T, "energy": float(x),
                              "mass": float(m), "F": f,
                              "G": float(cdf.gaussian(x))})
    _emit(summary, ["n", "T", "kolmogorov", "mu", "sigma2", "num_jumps"],
          args, "berry_esseen_summary")
    if args.out:
        _emit(jumps, ["n", "T", "energy", "mass", "F", "G"], args,
              "berry_esseen_jumps")
    return 0


def cmd_equivalence(args) -> int:
    from .runner import _evaluate_point, _flat_row, _grid, _prepare

    cfg = _load(args)
    prepared = _prepare(cfg)
    points = _grid(cfg)
    rows = []
    failed = 0
    for i, point in enumerate(points):
        try:
            result = _evaluate_point(cfg, prepared[point["n"]], point)
        except EnsembleKitError as exc:
            result = {"status": "error", "error": str(exc)}
            failed += 1
        rows.append(_flat_row(i, point, cfg, result))
    from .runner import CSV_COLUMNS

    _emit(rows, [name for name, _ in CSV_COLUMNS], args, "equivalence")
    return 0 if failed < len(points) else 1


def cmd_substate_check(args) -> int:
    seed = args.seed if args.seed is not None else 7
    rng = np.random.default_rng(seed)
    failures = 0
    rows = []
    eps_grid = [float(x) for x in args.eps.split(",")]
    for i in range(args.samples):
        dim = int(rng.integers(2, 9))
        eps = eps_grid[i % len(eps_grid)]
        tau = _random_density(rng, dim)
        rho = _random_density(rng, dim)
        row = {"sample": i, "dim": dim, "eps": eps}
        try:
            w = substate_smooth(tau, rho, eps)
            s = relative_entropy(tau, rho, unit="bits").value
            lam = (s + 1.0) / eps + math.log2(1.0 / (1.0 - eps))
            row.update({"smooth_distance": w.distance,
                        "smooth_distance_bound": 2 * math.sqrt(eps),
                        "smooth_smax": w.achieved_smax, "smooth_lambda": lam,
                        "smooth_ok": w.distance <= 2 * math.sqrt(eps) + 1e-9
                        and w.achieved_smax <= lam + 1e-9})
            sigma = _random_density(rng, dim)
            lam_t = max_relative_entropy(tau, rho).value + 1e-9
            swap = float(np.abs(np.linalg.eigvalsh(sigma - rho)).sum())
            t = min(rng.uniform(0.05, 0.85) / (2.0 ** lam_t * swap), 1.0)
            rho_tilde = (1 - t) * rho + t * sigma
            wt = datta_renner_transfer(tau, rho, rho_tilde, lam_t)
            row.update({"transfer_kappa": wt.kappa,
                        "transfer_distance": wt.distance,
                        "transfer_bound": math.sqrt(8 * wt.kappa),
                        "transfer_smax": wt.achieved_smax,
                        "transfer_ok": wt.achieved_smax <= wt.lambda_out + 1e-9
                        and wt.distance <= math.sqrt(8 * wt.kappa) + 1e-9})
            if not (row["smooth_ok"] and row["transfer_ok"]):
                failures += 1
        except SubstateConstructionFailure as exc:
            row["error"] = str(exc)
            failures += 1
        rows.append(row)
    _emit(rows, ["sample", "dim", "eps", "smooth_distance",
                 "smooth_distance_bound", "smooth_smax", "smooth_lambda",
                 "smooth_ok", "transfer_kappa", "transfer_distance",
                 "transfer_bound", "transfer_smax", "transfer_ok", "error"],
          args, "substate_check")
    print(f"substate-check: {args.samples} samples, {failures} failures")
    return 0 if failures == 0 else 1


def _random_density(rng, dim):
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    m = g @ g.conj().T
    return m / np.trace(m).real


def cmd_haar(args) -> int:
    cfg = _load(args)
    samples = args.samples if args.samples else (cfg.haar or {}).get("samples", 100)
    seed = args.seed if args.seed is not None else (cfg.haar or {}).get("seed", 0)
    rows = []
    for n, ham, spec in _for_each_model(cfg):
        lat = ham.lattice
        N = lat.num_sites
        origin = tuple([1] * lat.d)
        usable = [r for r in cfg.correlation["distances"] if r <= lat.n - 1]
        for T in cfg.temperatures:
            rho, td = gibbs(spec, T, num_sites=N)
            e = td.energy_density
            delta = math.sqrt(td.specific_heat) * T
            sam = []
            for dist in usable:
                site = list(origin)
                site[0] += dist
                est = correlation(rho, lat.region([origin]),
                                  lat.region([tuple(site)]), ham.local_dim,
                                  restarts=cfg.correlation["restarts"],
                                  seed=cfg.correlation["seed"])
                sam.append((dist, est.upper))
            profile = fit_profile(sam, N)
            for l in cfg.cube_lengths:
                for eps in cfg.epsilons:
                    rep = check_window_states(ham, T, e, delta, seed, 2, l, eps,
                                          profile, cfg.c_d, spec=spec,
                                          haar_samples=samples)
                    rows.append({"n": n, "T": T, "l": l, "eps": eps,
                                 "samples": samples,
                                 "mean": rep.extras["sample_mean"],
                                 "stderr": rep.extras["sample_stderr"],
                                 "micro_reference":
                                     rep.extras["microcanonical_reference"],
                                 "bound": rep.claimed_bound,
                                 "fraction_ok":
                                     rep.extras["fraction_within_bound"],
                                 "eta": rep.extras["eta"],
                                 "window_dim": rep.extras["window_dim"]})
    _emit(rows, ["n", "T", "l", "eps", "samples", "mean", "stderr",
                 "micro_reference", "bound", "fraction_ok", "eta",
                 "window_dim"], args, "haar")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ensemblekit",
        description="Numerical canonical/microcanonical ensemble equivalence "
                    "checks for k-local lattice Hamiltonians.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    handlers = {
        "run": cmd_run,
        "spectrum": cmd_spectrum,
        "thermal": cmd_thermal,
        "micro": cmd_micro,
        "correlations": cmd_correlations,
        "berry-esseen": cmd_berry_esseen,
        "equivalence": cmd_equivalence,
        "haar": cmd_haar,
    }
    helps = {
        "run": "full sweep: tables, reports, and plots",
        "spectrum": "eigenvalues of the configured model(s)",
        "thermal": "T, Z, u, c, s rows per temperature",
        "micro": "microcanonical window statistics",
        "correlations": "correlation brackets and the decay-envelope fit",
        "berry-esseen": "spectral CDF jump table and Kolmogorov distance",
        "equivalence": "equivalence-condition margin reports",
        "haar": "Haar-sample local distances vs the microcanonical value",
    }
    for name, fn in handlers.items():
        p = sub.add_parser(name, help=helps[name])
        _add_common(p)
        if name == "haar":
            p.add_argument("--samples", type=int, default=None)
        p.set_defaults(handler=fn)

    p = sub.add_parser("substate-check",
                       help="random-instance verification of the smoothing and "
                            "reference-swap witnesses")
    _add_common(p, needs_config=False)
    p.add_argument("--samples", type=int, default=300)
    p.add_argument("--eps", default="0.1,0.3,0.5",
                   help="comma-separated epsilon grid")
    p.set_defaults(handler=cmd_substate_check)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except EnsembleKitError as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
