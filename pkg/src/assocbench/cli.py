"""Command-line front end: experiment runs, benchmark tables, distance
curves, and hypothesis utilities.

Every file output starts with comment lines embedding the hash of its run
manifest; the manifest is written alongside, and `simulate --from-manifest`
reproduces the exact bytes.  Exit codes: 0 success, 2 usage or configuration
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .distance import DistanceKind
from .dynamics import MeasurementModel, RiccatiNonConvergenceError
from .gaussian import GaussianDensity
from .hypothesis import (
    ColumnKind,
    HypothesisParams,
    count_hypotheses,
    enumerate_hypotheses,
    score_hypothesis,
)
from .simulation import (
    CovarianceRegime,
    MeasurementPolicy,
    ScenarioConfig,
    run_paired_batches,
)

TOOL_NAME = "assoc-bench"
SEED_ENV_VAR = "ASSOC_BENCH_SEED"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    pass


# Published correct-assignment rates shipped for side-by-side comparison in
# the table outputs.  Labeled "paper_reference" in the CSVs; never used as a
# test oracle (the generating noise ranges were not published).
_TABLE_SPECS = {
    "steady_h1h2": {
        "title": "steady state, 2-D measurements",
        "regime": CovarianceRegime.STEADY_STATE,
        "cells": [(n, p) for n in (10, 30, 50) for p in (MeasurementPolicy.ALL_H1, MeasurementPolicy.ALL_H2)],
        "distances": [DistanceKind.MAHALANOBIS, DistanceKind.ASSOCIATION_LOG_LIKELIHOOD],
        "reference": {
            DistanceKind.MAHALANOBIS: (79.3, 79.8, 49.8, 50.9, 34.5, 35.6),
            DistanceKind.ASSOCIATION_LOG_LIKELIHOOD: (81.9, 82.3, 55.0, 56.0, 40.5, 41.5),
        },
    },
    "arbitrary_h1h2": {
        "title": "arbitrary covariance shape, 2-D measurements",
        "regime": CovarianceRegime.ARBITRARY_SHAPE,
        "cells": [(n, p) for n in (10, 30, 50) for p in (MeasurementPolicy.ALL_H1, MeasurementPolicy.ALL_H2)],
        "distances": [DistanceKind.MAHALANOBIS, DistanceKind.ASSOCIATION_LOG_LIKELIHOOD],
        "reference": {
            DistanceKind.MAHALANOBIS: (72.3, 70.8, 39.2, 37.6, 25.9, 24.7),
            DistanceKind.ASSOCIATION_LOG_LIKELIHOOD: (72.4, 70.8, 39.4, 37.8, 26.2, 24.9),
        },
    },
    "steady_mixed": {
        "title": "steady state, mixed 1-D/2-D measurements",
        "regime": CovarianceRegime.STEADY_STATE,
        "cells": [(n, MeasurementPolicy.MIXED_H1_H11) for n in (10, 30, 50)],
        "distances": [
            DistanceKind.MAHALANOBIS,
            DistanceKind.ASSOCIATION_LOG_LIKELIHOOD,
            DistanceKind.ASSOCIATION_LOG_LIKELIHOOD_NO_DIM_TERM,
        ],
        "reference": {
            DistanceKind.MAHALANOBIS: (72.1, 40.2, 27.4),
            DistanceKind.ASSOCIATION_LOG_LIKELIHOOD: (79.8, 53.4, 40.9),
            DistanceKind.ASSOCIATION_LOG_LIKELIHOOD_NO_DIM_TERM: (79.0, 51.7, 39.2),
        },
    },
    "arbitrary_mixed": {
        "title": "arbitrary covariance shape, mixed 1-D/2-D measurements",
        "regime": CovarianceRegime.ARBITRARY_SHAPE,
        "cells": [(n, MeasurementPolicy.MIXED_H1_H11) for n in (10, 30, 50)],
        "distances": [
            DistanceKind.MAHALANOBIS,
            DistanceKind.ASSOCIATION_LOG_LIKELIHOOD,
            DistanceKind.ASSOCIATION_LOG_LIKELIHOOD_NO_DIM_TERM,
        ],
        "reference": {
            DistanceKind.MAHALANOBIS: (65.7, 32.6, 21.4),
            DistanceKind.ASSOCIATION_LOG_LIKELIHOOD: (73.2, 42.3, 29.4),
            DistanceKind.ASSOCIATION_LOG_LIKELIHOOD_NO_DIM_TERM: (72.2, 40.7, 28.2),
        },
    },
}


def manifest_hash(manifest: dict) -> str:
    """SHA-256 of the manifest's scientific payload (output paths excluded)."""
    payload = {k: v for k, v in manifest.items() if k != "outputs"}
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _csv_header_lines(command: str, digest: str) -> list:
    return [
        f"# {TOOL_NAME} {__version__} {command}",
        f"# manifest_sha256: {digest}",
    ]


def _config_to_dict(cfg: ScenarioConfig, distances) -> dict:
    return {
        "n_tracks": cfg.n_tracks,
        "regime": cfg.covariance_regime.value,
        "model_policy": cfg.measurement_model_policy.value,
        "distances": [d.value for d in distances],
        "dt": cfg.dt,
        "detection_probability": cfg.detection_probability,
        "state_volume": [list(b) for b in cfg.state_volume],
        "process_noise_range": list(cfg.process_noise_range),
        "measurement_noise_range": list(cfg.measurement_noise_range),
        "arbitrary_position_range": list(cfg.arbitrary_position_range),
        "arbitrary_velocity_range": list(cfg.arbitrary_velocity_range),
        "seed": cfg.seed,
    }


def _config_from_dict(data: dict) -> tuple:
    cfg = ScenarioConfig(
        n_tracks=int(data["n_tracks"]),
        state_volume=tuple(tuple(b) for b in data["state_volume"]),
        covariance_regime=CovarianceRegime(data["regime"]),
        measurement_model_policy=MeasurementPolicy(data["model_policy"]),
        distance=DistanceKind(data["distances"][0]),
        dt=float(data["dt"]),
        process_noise_range=tuple(data["process_noise_range"]),
        measurement_noise_range=tuple(data["measurement_noise_range"]),
        arbitrary_position_range=tuple(data["arbitrary_position_range"]),
        arbitrary_velocity_range=tuple(data["arbitrary_velocity_range"]),
        detection_probability=float(data["detection_probability"]),
        seed=int(data["seed"]),
    )
    distances = [DistanceKind(v) for v in data["distances"]]
    return cfg, distances


def _parse_enum(enum_cls, raw: str, field: str):
    try:
        return enum_cls(raw)
    except ValueError:
        choices = ", ".join(e.value for e in enum_cls)
        raise ConfigError(f"invalid value {raw!r} for field '{field}' (choices: {choices})")


def _parse_distances(raw: str) -> list:
    kinds = []
    for token in raw.split(","):
        token = token.strip()
        if token:
            kinds.append(_parse_enum(DistanceKind, token, "distance"))
    if not kinds:
        raise ConfigError("field 'distance' must name at least one distance")
    return kinds


_CONFIG_KEYS = {
    "n_tracks", "regime", "model", "distance", "batches", "per_batch",
    "seed", "dt", "detection_probability", "workers",
}


def _load_config_file(path: str) -> dict:
    """Flat key = value configuration grouped under arbitrary [sections]."""
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_string("[__top__]\n" + fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}")
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file: {exc}")
    flat = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            if key in flat:
                raise ConfigError(f"duplicate config field '{key}'")
            flat[key] = value
    unknown = sorted(set(flat) - _CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config field '{unknown[0]}'")
    return flat


def _resolve_seed(flag_value, file_value) -> int:
    if flag_value is not None:
        return int(flag_value)
    if file_value is not None:
        return int(file_value)
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"environment variable {SEED_ENV_VAR} is not an integer")
    return 0


def _int_field(raw, field: str, minimum: int = 1) -> int:
    try:
        value = int(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"field '{field}' must be an integer, got {raw!r}")
    if value < minimum:
        raise ConfigError(f"field '{field}' must be >= {minimum}, got {value}")
    return value


def _simulate_manifest(cfg: ScenarioConfig, distances, n_batches, per_batch, outputs) -> dict:
    return {
        "tool_version": __version__,
        "command": "simulate",
        "seed": cfg.seed,
        "n_batches": n_batches,
        "scenarios_per_batch": per_batch,
        "configs": [_config_to_dict(cfg, distances)],
        "outputs": outputs,
    }


def _run_simulate(cfg, distances, n_batches, per_batch, workers, out_dir, prefix) -> int:
    os.makedirs(out_dir, exist_ok=True)
    csv_name = f"{prefix}.csv"
    json_name = f"{prefix}.json"
    manifest_name = f"{prefix}.manifest.json"
    manifest = _simulate_manifest(
        cfg, distances, n_batches, per_batch,
        {"csv": csv_name, "json": json_name, "manifest": manifest_name},
    )
    digest = manifest_hash(manifest)

    summaries = run_paired_batches(cfg, distances, n_batches, per_batch, workers=workers)

    lines = _csv_header_lines("simulate", digest)
    lines.append("regime,model_policy,distance,n_tracks,batch,rate_percent")
    regime = cfg.covariance_regime.value
    policy = cfg.measurement_model_policy.value
    for kind in distances:
        summary = summaries[kind]
        for batch, rate in enumerate(summary.rates):
            lines.append(
                f"{regime},{policy},{kind.value},{cfg.n_tracks},{batch},{rate:.1f}"
            )
        lines.append(
            f"{regime},{policy},{kind.value},{cfg.n_tracks},mean,{summary.mean_rate:.1f}"
        )
    _write_text(os.path.join(out_dir, csv_name), "\n".join(lines) + "\n")

    payload = {
        "tool_version": __version__,
        "manifest_sha256": digest,
        "manifest": manifest,
        "results": [
            {
                "regime": regime,
                "model_policy": policy,
                "distance": kind.value,
                "n_tracks": cfg.n_tracks,
                "rates": list(summaries[kind].rates),
                "mean_rate": summaries[kind].mean_rate,
                "max_abs_deviation_from_mean": summaries[kind].max_abs_deviation_from_mean,
            }
            for kind in distances
        ],
    }
    _write_text(
        os.path.join(out_dir, json_name),
        json.dumps(payload, indent=2, sort_keys=True) + "\n",
    )
    _write_text(
        os.path.join(out_dir, manifest_name),
        json.dumps(manifest, indent=2, sort_keys=True) + "\n",
    )
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.from_manifest:
        try:
            with open(args.from_manifest, encoding="utf-8") as fh:
                manifest = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read manifest: {exc}")
        cfg, distances = _config_from_dict(manifest["configs"][0])
        return _run_simulate(
            cfg, distances, int(manifest["n_batches"]),
            int(manifest["scenarios_per_batch"]), args.workers,
            args.output_dir, args.prefix,
        )

    file_cfg = _load_config_file(args.config) if args.config else {}

    def pick(flag_value, key):
        return flag_value if flag_value is not None else file_cfg.get(key)

    n_tracks = _int_field(pick(args.n_tracks, "n_tracks") or 10, "n_tracks")
    regime = _parse_enum(CovarianceRegime, pick(args.regime, "regime") or "steady", "regime")
    policy = _parse_enum(MeasurementPolicy, pick(args.model, "model") or "h1", "model")
    distances = _parse_distances(pick(args.distance, "distance") or "asso-ll")
    n_batches = _int_field(pick(args.batches, "batches") or 10, "batches")
    per_batch = _int_field(pick(args.per_batch, "per_batch") or 10000, "per_batch")
    workers = _int_field(pick(args.workers, "workers") or 1, "workers")
    seed = _resolve_seed(args.seed, file_cfg.get("seed"))
    try:
        dt = float(pick(args.dt, "dt") or 1.0)
        p_d = float(pick(args.detection_probability, "detection_probability") or 1.0)
    except ValueError as exc:
        raise ConfigError(f"field 'dt'/'detection_probability': {exc}")

    try:
        cfg = ScenarioConfig(
            n_tracks=n_tracks,
            covariance_regime=regime,
            measurement_model_policy=policy,
            distance=distances[0],
            dt=dt,
            detection_probability=p_d,
            seed=seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc))
    return _run_simulate(
        cfg, distances, n_batches, per_batch, workers, args.output_dir, args.prefix
    )


def cmd_tables(args) -> int:
    out_dir = args.output_dir
    os.makedirs(out_dir, exist_ok=True)
    seed = _resolve_seed(args.seed, None)
    n_batches = args.batches
    per_batch = args.per_batch

    manifest = {
        "tool_version": __version__,
        "command": "tables",
        "seed": seed,
        "n_batches": n_batches,
        "scenarios_per_batch": per_batch,
        "configs": [],
        "outputs": {},
    }
    results = {}
    for name, spec in _TABLE_SPECS.items():
        cell_rates = {}
        for n, policy in spec["cells"]:
            cfg = ScenarioConfig(
                n_tracks=n,
                covariance_regime=spec["regime"],
                measurement_model_policy=policy,
                distance=spec["distances"][0],
                seed=seed,
            )
            manifest["configs"].append(_config_to_dict(cfg, spec["distances"]))
            summaries = run_paired_batches(
                cfg, spec["distances"], n_batches, per_batch, workers=args.workers
            )
            for kind in spec["distances"]:
                cell_rates[(n, policy, kind)] = summaries[kind]
        results[name] = cell_rates
        manifest["outputs"][name] = f"table_{name}.csv"
    digest = manifest_hash(manifest)

    def cell_name(n, policy):
        models = {"h1": "H1", "h2": "H2", "h1-h11": "H1/H11"}[policy.value]
        return f"N={n} {models}"

    for name, spec in _TABLE_SPECS.items():
        lines = _csv_header_lines("tables", digest)
        lines.append(f"# table: {spec['title']}")
        header = ["distance", "source"] + [cell_name(n, p) for n, p in spec["cells"]]
        lines.append(",".join(header))
        for kind in spec["distances"]:
            measured = [
                f"{results[name][(n, p, kind)].mean_rate:.1f}" for n, p in spec["cells"]
            ]
            lines.append(",".join([kind.value, "measured"] + measured))
            reference = [f"{v:.1f}" for v in spec["reference"][kind]]
            lines.append(",".join([kind.value, "paper_reference"] + reference))
        _write_text(os.path.join(out_dir, f"table_{name}.csv"), "\n".join(lines) + "\n")

    _write_text(
        os.path.join(out_dir, "tables.manifest.json"),
        json.dumps(manifest, indent=2, sort_keys=True) + "\n",
    )
    return EXIT_OK


def cmd_curve(args) -> int:
    if args.var_min <= 0 or args.var_max <= args.var_min or args.var_step <= 0:
        raise ConfigError(
            "fields 'var-min'/'var-max'/'var-step' must define a positive grid"
        )
    delta = args.delta_z
    manifest = {
        "tool_version": __version__,
        "command": "curve",
        "delta_z": delta,
        "var_min": args.var_min,
        "var_max": args.var_max,
        "var_step": args.var_step,
        "outputs": {"csv": os.path.basename(args.output)},
    }
    digest = manifest_hash(manifest)
    lines = _csv_header_lines("curve", digest)
    lines.append("variance,d2_maha,d2_asso_ll")
    n_steps = int(round((args.var_max - args.var_min) / args.var_step))
    ln_2pi = math.log(2.0 * math.pi)
    for k in range(n_steps + 1):
        var = args.var_min + k * args.var_step
        maha = delta * delta / var
        asso = maha + math.log(var) + ln_2pi
        lines.append(f"{var!r},{maha!r},{asso!r}")
    out_dir = os.path.dirname(os.path.abspath(args.output))
    os.makedirs(out_dir, exist_ok=True)
    _write_text(args.output, "\n".join(lines) + "\n")
    return EXIT_OK


def _load_instance(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read instance file: {exc}")
    try:
        params = HypothesisParams(
            detection_probability=data.get("detection_probability", 1.0),
            beta_fd=data["beta_fd"],
            beta_nt=data["beta_nt"],
            measurement_volume=data.get("measurement_volume", 1.0),
        )
        tracks = [
            GaussianDensity(np.array(t["mean"]), np.array(t["covariance"]))
            for t in data["tracks"]
        ]
        models = [MeasurementModel.by_label(label) for label in data["models"]]
        measurements = [
            (np.array(m["z"]), np.array(m["noise"])) for m in data["measurements"]
        ]
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid instance file: {exc}")
    return params, tracks, models, measurements


def _label_text(label) -> str:
    if label.kind is ColumnKind.ESTABLISHED_TRACK:
        return f"track{label.index}"
    return "false" if label.kind is ColumnKind.FALSE_TRACK else "new"


def cmd_hypotheses(args) -> int:
    if args.n_tracks < 0 or args.n_detections < 0:
        raise ConfigError("track and detection counts must be non-negative")
    print(count_hypotheses(args.n_tracks, args.n_detections))
    if not args.enumerate:
        return EXIT_OK
    if args.n_tracks + args.n_detections > 8:
        raise ConfigError("enumeration is limited to n_tracks + n_detections <= 8")
    if not args.instance:
        raise ConfigError("--enumerate needs --instance FILE with the toy problem")
    params, tracks, models, measurements = _load_instance(args.instance)
    if len(tracks) != args.n_tracks or len(measurements) != args.n_detections:
        raise ConfigError(
            "instance file sizes do not match the requested n_tracks/n_detections"
        )

    def scorer(labels):
        return score_hypothesis(labels, params, tracks, models, measurements)

    for rank, hyp in enumerate(
        enumerate_hypotheses(args.n_tracks, args.n_detections, scorer), start=1
    ):
        rendered = " ".join(
            f"z{j}->{_label_text(label)}" for j, label in enumerate(hyp.assignment)
        )
        print(f"{rank}\t{hyp.log_score!r}\t{rendered}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=TOOL_NAME,
        description="Measurement-to-track association distance benchmark",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one Monte-Carlo configuration")
    sim.add_argument("--config", help="key = value configuration file")
    sim.add_argument("--n-tracks", dest="n_tracks", type=int)
    sim.add_argument("--regime", choices=[r.value for r in CovarianceRegime])
    sim.add_argument("--model", choices=[p.value for p in MeasurementPolicy])
    sim.add_argument("--distance", help="comma-separated distance kinds")
    sim.add_argument("--batches", type=int)
    sim.add_argument("--per-batch", dest="per_batch", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--dt", type=float)
    sim.add_argument("--detection-probability", dest="detection_probability", type=float)
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--output-dir", dest="output_dir", default=".")
    sim.add_argument("--prefix", default="simulate")
    sim.add_argument("--from-manifest", dest="from_manifest")
    sim.set_defaults(func=cmd_simulate)

    tab = sub.add_parser("tables", help="reproduce the benchmark table grid")
    tab.add_argument("--batches", type=int, default=10)
    tab.add_argument("--per-batch", dest="per_batch", type=int, default=10000)
    tab.add_argument("--seed", type=int)
    tab.add_argument("--workers", type=int, default=1)
    tab.add_argument("--output-dir", dest="output_dir", default=".")
    tab.set_defaults(func=cmd_tables)

    cur = sub.add_parser("curve", help="emit 1-D distance-vs-variance curve data")
    cur.add_argument("--delta-z", dest="delta_z", type=float, default=0.7)
    cur.add_argument("--var-min", dest="var_min", type=float, default=0.05)
    cur.add_argument("--var-max", dest="var_max", type=float, default=2.0)
    cur.add_argument("--var-step", dest="var_step", type=float, default=1e-3)
    cur.add_argument("--output", "-o", default="curve.csv")
    cur.set_defaults(func=cmd_curve)

    hyp = sub.add_parser("hypotheses", help="count or enumerate joint hypotheses")
    hyp.add_argument("n_tracks", type=int)
    hyp.add_argument("n_detections", type=int)
    hyp.add_argument("--enumerate", action="store_true")
    hyp.add_argument("--instance", help="JSON toy instance for scoring")
    hyp.set_defaults(func=cmd_hypotheses)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"{TOOL_NAME}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RiccatiNonConvergenceError as exc:
        print(f"{TOOL_NAME}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
