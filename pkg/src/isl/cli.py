"""Reproducible experiment runner.

Grammar: ``isl <experiment> [--config FILE] [--seed N] [--out DIR] [flags]``.
Config files are JSON; explicit flags win over config values, which win
over the built-in defaults.  Every run writes its artifact files plus a
``manifest.json`` with the config echo and content digests.  ``isl report
MANIFEST...`` digest-verifies earlier runs and grades their headline
metrics against the expected ranges.

Exit codes: 0 success, 1 experiment or verification failure, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, cantor, dynamics, geometry, liouville, qstrings, symbolic
from .rng import substream_seed

EXPERIMENTS = (
    "attractor",
    "dimension",
    "cantor",
    "symbolic",
    "qstrings",
    "liouville",
    "embed",
    "classicality",
)

DEFAULTS: dict[str, dict] = {
    "attractor": {
        "system": "lorenz",
        "x0": [1.0, 1.0, 1.0],
        "dt": 0.005,
        "steps": 600_000,
        "transient": 10_000,
        "csv_steps": 5_000,
    },
    "dimension": {
        "cantor_depth": 10,
        "n_points": 10_000,
        "lorenz_points": 40_000,
        "lorenz_stride": 12,
        "dt": 0.005,
        "transient": 10_000,
    },
    "cantor": {
        "depth": 10,
        "trials": 100_000,
        "gradients": 1_000,
        "points": 1_000,
    },
    "symbolic": {
        "system": "lorenz",
        "p": [0.0, 0.0, 20.0],
        "radii": [1e-1, 1e-2, 1e-3, 1e-4],
        "n_traj": 1_000,
        "horizon": 2.0,
        "dt": 0.005,
    },
    "qstrings": {"verify": True},
    "liouville": {
        "grid": 128,
        "expansion_grid": 256,
        "comoving_t": 0.5,
        "comoving_side": 1e-3,
    },
    "embed": {
        "n_samples": 200_000,
        "m": 3,
        "dt": 0.005,
        "transient": 10_000,
        "stride": 12,
        "embed_stride": 10,
    },
    "classicality": {
        "n_samples": 200_000,
        "window": 2_000,
        "dt": 0.005,
        "transient": 10_000,
        "control_samples": 1_000_000,
        "control_window": 100,
    },
}

# headline checks applied by `isl report`; ranges follow the package's
# canonical verification targets and assume default experiment parameters
CHECKS: dict[str, list] = {
    "attractor": [
        ("lambda1", "0.906 +- 0.05", lambda s: abs(s["lambda1"] - 0.906) <= 0.05),
        ("spectrum_sum", "-13.67 +- 0.3", lambda s: abs(s["spectrum_sum"] + 13.67) <= 0.3),
    ],
    "dimension": [
        ("cantor_box_dim", "0.6309 +- 0.03", lambda s: abs(s["cantor_box_dim"] - 0.6309) <= 0.03),
        ("segment_box_dim", "1.0 +- 0.05", lambda s: abs(s["segment_box_dim"] - 1.0) <= 0.05),
        ("square_box_dim", "2.0 +- 0.1", lambda s: abs(s["square_box_dim"] - 2.0) <= 0.1),
        ("lorenz_corr_dim", "2.05 +- 0.1", lambda s: abs(s["lorenz_corr_dim"] - 2.05) <= 0.1),
    ],
    "cantor": [
        ("depth1_fraction", "2/3 +- 0.01", lambda s: abs(s["depth1_fraction"] - 2.0 / 3.0) <= 0.01),
        ("intersection_fraction", "< 0.03", lambda s: s["intersection_fraction"] < 0.03),
        ("axis_fraction", "= 1.0", lambda s: s["axis_fraction"] == 1.0),
    ],
    "symbolic": [
        ("min_minority", ">= 0.05", lambda s: s["min_minority"] >= 0.05),
    ],
    "qstrings": [
        ("order", "= 8", lambda s: s["order"] == 8),
        ("failures", "none", lambda s: not s["failures"]),
    ],
    "liouville": [
        ("mass_error", "<= 1e-6", lambda s: s["mass_error"] <= 1e-6),
        ("linearity_rel", "< 1e-12", lambda s: s["linearity_rel"] < 1e-12),
        ("comoving_rel_err", "<= 0.05", lambda s: s["comoving_rel_err"] <= 0.05),
    ],
    "embed": [
        ("dim_rel_diff", "<= 0.10", lambda s: s["dim_rel_diff"] <= 0.10),
    ],
    "classicality": [
        ("kurtosis_reduced", "|k_w| < |k_1|", lambda s: s["kurtosis_reduced"]),
        ("control_skew", "|skew| < 0.1", lambda s: abs(s["control_skewness"]) < 0.1),
        ("control_kurt", "|exkurt| < 0.2", lambda s: abs(s["control_excess_kurtosis"]) < 0.2),
    ],
}


def _write_json(payload: dict, path: Path) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# experiment implementations; each returns the headline summary dict and
# writes its artifact files under outdir
# ---------------------------------------------------------------------------


def _run_attractor(params: dict, seed: int, outdir: Path) -> dict:
    system = dynamics.make_system(params["system"])
    spectrum = dynamics.lyapunov_spectrum(
        system, params["x0"], params["dt"], params["steps"], params["transient"]
    )
    settled = dynamics.integrate(
        system, params["x0"], params["dt"], params["transient"]
    ).points[-1]
    traj = dynamics.integrate(system, settled, params["dt"], params["csv_steps"])
    dynamics.write_trajectory_csv(traj, outdir / "trajectory.csv")
    summary = {
        "system": system.name,
        "lambda1": float(spectrum[0]),
        "spectrum": [float(v) for v in spectrum],
        "spectrum_sum": float(spectrum.sum()),
        "divergence": dynamics.divergence(system, settled),
        "dt": params["dt"],
        "steps": params["steps"],
        "seed": seed,
    }
    _write_json(summary, outdir / "attractor.json")
    return summary


def _lorenz_cloud(n_points: int, stride: int, dt: float, transient: int) -> np.ndarray:
    system = dynamics.make_system("lorenz")
    settled = dynamics.integrate(system, [1.0, 1.0, 1.0], dt, transient).points[-1]
    traj = dynamics.integrate(system, settled, dt, n_points * stride)
    return traj.points[::stride][:n_points]


def _run_dimension(params: dict, seed: int, outdir: Path) -> dict:
    rng = np.random.default_rng(substream_seed(seed, "dimension.square"))
    n = params["n_points"]
    segment = geometry.PointCloud(1, np.linspace(0.0, 1.0, n)[:, None])
    square = geometry.PointCloud(2, rng.random((n, 2)))
    cantor_cloud = geometry.PointCloud(
        1, cantor.cantor_endpoints(params["cantor_depth"])[:, None]
    )
    lorenz_cloud = geometry.PointCloud(
        3,
        _lorenz_cloud(
            params["lorenz_points"], params["lorenz_stride"], params["dt"], params["transient"]
        ),
    )

    seg_box = geometry.box_counting_dimension(segment, 1 / 256, 1 / 4, 7)
    sq_box = geometry.box_counting_dimension(square, 1 / 64, 1 / 4, 5)
    depth = params["cantor_depth"]
    can_box = geometry.box_counting_dimension(
        cantor_cloud, 3.0 ** -(depth - 2), 3.0**-2, depth - 3
    )
    lor_box = geometry.box_counting_dimension(lorenz_cloud, 0.5, 8.0, 9)
    seg_corr = geometry.correlation_dimension(segment, np.geomspace(0.005, 0.05, 8))
    sq_corr = geometry.correlation_dimension(square, np.geomspace(0.01, 0.1, 8))
    lor_corr = geometry.correlation_dimension(lorenz_cloud, np.geomspace(0.5, 6.0, 10))

    summary = {
        "segment_box_dim": seg_box.value,
        "square_box_dim": sq_box.value,
        "cantor_box_dim": can_box.value,
        "lorenz_box_dim": lor_box.value,
        "segment_corr_dim": seg_corr.value,
        "square_corr_dim": sq_corr.value,
        "lorenz_corr_dim": lor_corr.value,
        "seed": seed,
    }
    _write_json(summary, outdir / "dimension.json")
    estimates = {
        "segment_box": seg_box.to_record(),
        "square_box": sq_box.to_record(),
        "cantor_box": can_box.to_record(),
        "lorenz_box": lor_box.to_record(),
        "segment_corr": seg_corr.to_record(),
        "square_corr": sq_corr.to_record(),
        "lorenz_corr": lor_corr.to_record(),
    }
    _write_json(estimates, outdir / "estimates.json")
    return summary


def _run_cantor(params: dict, seed: int, outdir: Path) -> dict:
    depth = params["depth"]
    trials = params["trials"]
    depth1 = cantor.perturbation_experiment(1, trials, substream_seed(seed, "cantor.depth1"))
    depth_mid = cantor.perturbation_experiment(
        max(depth // 2, 2), trials, substream_seed(seed, "cantor.mid")
    )
    depth_full = cantor.perturbation_experiment(
        depth, trials, substream_seed(seed, "cantor.full")
    )
    lines = cantor.line_intersection_experiment(
        depth, params["gradients"], params["points"], substream_seed(seed, "cantor.lines")
    )
    axis = cantor.axis_direction_counterexample(
        depth, params["points"], substream_seed(seed, "cantor.axis")
    )
    cantor.write_gradient_csv(lines, outdir / "gradients.csv")
    summary = {
        "depth": depth,
        "depth1_fraction": depth1,
        "mid_depth_fraction": depth_mid,
        "full_depth_fraction": depth_full,
        "intersection_fraction": lines.intersection_fraction,
        "empty_set_rate": lines.empty_set_rate,
        "axis_fraction": axis.intersection_fraction,
        "axis_empty_set_rate": axis.empty_set_rate,
        "seed": seed,
    }
    _write_json(summary, outdir / "cantor.json")
    return summary


def _run_symbolic(params: dict, seed: int, outdir: Path) -> dict:
    system = dynamics.make_system(params["system"])
    partition = symbolic.lorenz_lobe_partition()
    radii = [float(r) for r in params["radii"]]
    minorities = symbolic.intertwining_profile(
        system,
        partition,
        params["p"],
        radii,
        params["n_traj"],
        params["horizon"],
        substream_seed(seed, "symbolic.profile"),
        dt=params["dt"],
    )
    space = symbolic.neighborhood_sample_space(
        system,
        partition,
        params["p"],
        radii[-1],
        params["n_traj"],
        params["horizon"],
        substream_seed(seed, "symbolic.space"),
        dt=params["dt"],
    )
    symbolic.write_sample_space_csv(space, outdir / "sample_space.csv")
    symbolic.write_sample_space_summary(space, outdir / "sample_space.json")
    summary = {
        "p": [float(v) for v in params["p"]],
        "radii": radii,
        "minority_fractions": [float(m) for m in minorities],
        "min_minority": float(np.min(minorities)),
        "horizon": params["horizon"],
        "n_traj": params["n_traj"],
        "seed": seed,
    }
    _write_json(summary, outdir / "symbolic.json")
    return summary


def _run_qstrings(params: dict, seed: int, outdir: Path) -> dict:
    report = qstrings.verify_q8()
    qstrings.write_group_table_csv(report, outdir / "group_table.csv")
    mean_i_corr = float(
        np.mean(
            [qstrings.correlation(s, qstrings.apply_i(s)) for s in qstrings.enumerate_strings(4)]
        )
    )
    summary = {
        "order": report["order"],
        "center": report["center"],
        "relations_checked": report["relations_checked"],
        "failures": report["failures"],
        "mean_i_correlation": mean_i_corr,
        "seed": seed,
    }
    _write_json(summary, outdir / "qstrings.json")
    return summary


def _run_liouville(params: dict, seed: int, outdir: Path) -> dict:
    grid = params["grid"]

    # solid rotation: one full revolution of a normalized blob
    rotation = dynamics.make_system("rigid_rotation")
    blob = liouville.gaussian_blob(
        ([-1.0, -1.0], [1.0, 1.0]), (grid, grid), (0.5, 0.0), 0.08
    )
    dt = 0.45 * (2.0 / grid) / np.sqrt(2.0)
    steps = round(2.0 * np.pi / dt)
    rotated = liouville.evolve_density(rotation, blob, dt, steps)
    mass_error = abs(liouville.total_mass(rotated) - liouville.total_mass(blob))

    # expansion flow: co-moving peak decay at the divergence rate
    expansion = dynamics.make_system("uniform_divergence")
    egrid = params["expansion_grid"]
    blob2 = liouville.gaussian_blob(
        ([-1.0, -1.0], [1.0, 1.0]), (egrid, egrid), (0.0, 0.0), 0.1
    )
    dt2 = 0.45 * (2.0 / egrid)
    t2 = 0.5
    steps2 = round(t2 / dt2)
    expanded = liouville.evolve_density(expansion, blob2, dt2, steps2)
    decay_rate = float(
        (np.log(blob2.values.max()) - np.log(expanded.values.max())) / (steps2 * dt2)
    )

    # linearity on a strongly nonlinear flow
    cubic = dynamics.FlowSystem(
        name="cubic_shear",
        dim=2,
        params={},
        rhs=lambda s: np.stack([s[..., 0] * s[..., 1], -s[..., 0] ** 3], axis=-1),
        vectorized=True,
    )
    rng = np.random.default_rng(substream_seed(seed, "liouville.linearity"))
    shape = (64, 64)
    r1 = liouville.gaussian_blob(([-1.0, -1.0], [1.0, 1.0]), shape, (0.3, -0.2), 0.15)
    r2 = liouville.gaussian_blob(([-1.0, -1.0], [1.0, 1.0]), shape, (-0.4, 0.3), 0.2)
    alpha, beta = (float(v) for v in rng.uniform(-2.0, 2.0, size=2))
    dt3 = 0.45 * (2.0 / shape[0])
    deviation = liouville.linearity_check(cubic, r1, r2, alpha, beta, dt3, 40)
    ref1 = liouville.evolve_density(cubic, r1, dt3, 40)
    ref2 = liouville.evolve_density(cubic, r2, dt3, 40)
    scale = float(np.max(np.abs(alpha * ref1.values + beta * ref2.values)))
    linearity_rel = deviation / scale if scale > 0 else deviation

    # Lorenz co-moving contraction against the constant-divergence solution
    lorenz_sys = dynamics.make_system("lorenz")
    anchor = dynamics.integrate(lorenz_sys, [1.0, 1.0, 1.0], 0.005, 10_000).points[-1]
    side = params["comoving_side"]
    t = params["comoving_t"]
    ratio = liouville.comoving_volume(
        lorenz_sys, (anchor - side / 2, anchor + side / 2), t, 0.005
    )
    expected = float(np.exp(-41.0 / 3.0 * t))
    comoving_rel_err = abs(ratio - expected) / expected

    liouville.write_density_csv(rotated, outdir / "rotation_final.csv")
    summary = {
        "mass_initial": liouville.total_mass(blob),
        "mass_final": liouville.total_mass(rotated),
        "leaked_mass": rotated.leaked_mass,
        "cfl": liouville.courant_number(rotation, blob, dt),
        "steps": steps,
        "mass_error": mass_error,
        "peak_decay_rate": decay_rate,
        "linearity_deviation": deviation,
        "linearity_rel": linearity_rel,
        "comoving_ratio": ratio,
        "comoving_expected": expected,
        "comoving_rel_err": comoving_rel_err,
        "seed": seed,
    }
    _write_json(summary, outdir / "liouville.json")
    return summary


def _lorenz_xseries(n_samples: int, dt: float, transient: int) -> geometry.TimeSeries:
    system = dynamics.make_system("lorenz")
    settled = dynamics.integrate(system, [1.0, 1.0, 1.0], dt, transient).points[-1]
    traj = dynamics.integrate(system, settled, dt, n_samples - 1)
    return geometry.TimeSeries(dt, traj.points[:, 0]), traj


def _run_embed(params: dict, seed: int, outdir: Path) -> dict:
    series, traj = _lorenz_xseries(params["n_samples"], params["dt"], params["transient"])
    tau = geometry.select_delay(series)
    embedded = geometry.delay_embed(series, tau, params["m"])
    emb_cloud = geometry.PointCloud(
        params["m"], embedded.points[:: params["embed_stride"]]
    )
    full_cloud = geometry.PointCloud(3, traj.points[:: params["stride"]])
    radii = np.geomspace(0.5, 6.0, 10)
    dim_emb = geometry.correlation_dimension(emb_cloud, radii)
    dim_full = geometry.correlation_dimension(full_cloud, radii)
    rel_diff = abs(dim_emb.value - dim_full.value) / dim_full.value
    summary = {
        "tau": tau,
        "m": params["m"],
        "embedded_corr_dim": dim_emb.value,
        "full_state_corr_dim": dim_full.value,
        "dim_rel_diff": rel_diff,
        "seed": seed,
    }
    _write_json(summary, outdir / "embed.json")
    return summary


def _run_classicality(params: dict, seed: int, outdir: Path) -> dict:
    series, _ = _lorenz_xseries(params["n_samples"], params["dt"], params["transient"])
    raw = geometry.time_average_distribution(series, 1)
    averaged = geometry.time_average_distribution(series, params["window"])
    rng = np.random.default_rng(substream_seed(seed, "classicality.control"))
    control_series = geometry.TimeSeries(1.0, rng.random(params["control_samples"]))
    control = geometry.time_average_distribution(control_series, params["control_window"])
    summary = {
        "raw": raw.to_record(),
        "averaged": averaged.to_record(),
        "control": control.to_record(),
        "kurtosis_reduced": bool(
            abs(averaged.excess_kurtosis) < abs(raw.excess_kurtosis)
        ),
        "control_skewness": control.skewness,
        "control_excess_kurtosis": control.excess_kurtosis,
        "seed": seed,
    }
    _write_json(summary, outdir / "classicality.json")
    return summary


_RUNNERS = {
    "attractor": _run_attractor,
    "dimension": _run_dimension,
    "cantor": _run_cantor,
    "symbolic": _run_symbolic,
    "qstrings": _run_qstrings,
    "liouville": _run_liouville,
    "embed": _run_embed,
    "classicality": _run_classicality,
}


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isl", description="invariant-set laboratory experiment runner"
    )
    parser.add_argument("--version", action="version", version=f"isl {__version__}")
    sub = parser.add_subparsers(dest="command")

    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", type=Path, help="JSON config file")
        p.add_argument("--seed", type=int, help="master seed (fallback: ISL_SEED, then 0)")
        p.add_argument("--out", type=Path, help="output directory")
        for key, default in DEFAULTS[name].items():
            flag = "--" + key.replace("_", "-")
            if isinstance(default, bool):
                p.add_argument(flag, action="store_true", default=None)
            elif isinstance(default, list):
                p.add_argument(flag, type=float, nargs="+", default=None)
            elif isinstance(default, int):
                p.add_argument(flag, type=int, default=None)
            else:
                p.add_argument(flag, type=float, default=None)

    rep = sub.add_parser("report", help="digest-verify runs and grade headline metrics")
    rep.add_argument("manifests", nargs="*", type=Path)
    rep.add_argument("--out", type=Path, help="directory for the consolidated report.json")
    return parser


def _resolve_config(name: str, args: argparse.Namespace) -> tuple[dict, int, Path]:
    params = dict(DEFAULTS[name])
    file_seed = None
    file_out = None
    if args.config is not None:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        file_seed = loaded.pop("seed", None)
        file_out = loaded.pop("output_dir", loaded.pop("out", None))
        loaded.pop("experiment", None)
        unknown = set(loaded) - set(params)
        if unknown:
            raise ConfigError(f"unknown config keys for {name}: {sorted(unknown)}")
        params.update(loaded)
    for key in params:
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value

    if args.seed is not None:
        seed = args.seed
    elif file_seed is not None:
        seed = int(file_seed)
    elif os.environ.get("ISL_SEED"):
        try:
            seed = int(os.environ["ISL_SEED"])
        except ValueError:
            raise ConfigError("ISL_SEED must be an integer") from None
    else:
        seed = 0

    out = args.out or (Path(file_out) if file_out else Path("runs") / name)
    return params, seed, Path(out)


class ConfigError(ValueError):
    pass


def run(argv) -> int:
    """Entry point taking an argv sequence and returning the exit code."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    if args.command == "report":
        return _report(args.manifests, args.out)

    name = args.command
    try:
        params, seed, outdir = _resolve_config(name, args)
        outdir.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        print(f"isl: configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"isl: cannot create output directory: {exc}", file=sys.stderr)
        return 2

    start = time.monotonic()
    try:
        summary = _RUNNERS[name](params, seed, outdir)
    except Exception as exc:
        print(f"isl: {name} failed: {exc}", file=sys.stderr)
        return 1
    duration = time.monotonic() - start

    files = sorted(p for p in outdir.iterdir() if p.is_file() and p.name != "manifest.json")
    manifest = {
        "experiment": name,
        "config": {"params": params, "seed": seed, "output_dir": str(outdir)},
        "version": __version__,
        "duration_s": duration,
        "files": [
            {"name": p.name, "sha256": _sha256(p), "bytes": p.stat().st_size}
            for p in files
        ],
    }
    _write_json(manifest, outdir / "manifest.json")
    headline = {k: v for k, v in summary.items() if isinstance(v, (int, float, bool))}
    print(f"{name}: ok ({duration:.1f}s) {json.dumps(headline, sort_keys=True)}")
    return 0


def _report(manifest_paths, out: Path | None) -> int:
    rows = []
    exit_code = 0
    for mpath in manifest_paths:
        try:
            with open(mpath) as fh:
                manifest = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"isl: cannot read manifest {mpath}: {exc}", file=sys.stderr)
            return 1
        base = Path(mpath).parent
        for entry in manifest.get("files", []):
            fpath = base / entry["name"]
            if not fpath.exists() or _sha256(fpath) != entry["sha256"]:
                print(f"isl: digest mismatch for {fpath}", file=sys.stderr)
                return 1
        name = manifest["experiment"]
        summary_path = base / f"{name}.json"
        with open(summary_path) as fh:
            summary = json.load(fh)
        for metric, expected, check in CHECKS.get(name, []):
            ok = bool(check(summary))
            if not ok:
                exit_code = 1
            value = summary.get(metric, summary)
            rows.append(
                {
                    "experiment": name,
                    "metric": metric,
                    "value": value,
                    "expected": expected,
                    "status": "PASS" if ok else "FAIL",
                }
            )

    widths = (14, 24, 24, 18, 6)
    header = ("experiment", "metric", "value", "expected", "status")
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for row in rows:
        value = row["value"]
        text = f"{value:.6g}" if isinstance(value, float) else str(value)
        cells = (row["experiment"], row["metric"], text, row["expected"], row["status"])
        print("  ".join(str(c).ljust(w) for c, w in zip(cells, widths)))

    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        _write_json({"rows": rows}, out / "report.json")
    return exit_code


def main() -> int:
    return run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
