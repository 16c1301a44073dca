"""Command-line front end: extract, train, auth, simulate, sweep, transfer-eval.

Every command takes an output directory (``--out``), writes a run manifest
there before any other output, and never mutates its inputs. Report paths
render matplotlib figures next to the CSV/JSON outputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .distance import Verdict, calibrate_threshold
from .environment import compensated_distance, estimate_transform, plain_distance
from .errors import EnvAuthError, InvalidInput
from .features import extract_features, read_signal_binary, read_signal_csv
from .fingerprint import (
    ReferenceFingerprint,
    load_fingerprints,
    save_fingerprints,
    select_reference,
)
from .graph import SimilarityGraph, build_graph, load_graph_csv, save_graph_csv
from .simulate import (
    SCHEMA_VERSION,
    load_scenario_config,
    load_transfer_eval_config,
    run_scenario,
    run_transfer_eval,
    sweep_threshold,
    write_report,
    write_transfer_eval,
)
from . import plotting

STATE_META = "meta.json"
STATE_REFERENCES = "references.csv"
STATE_GRAPH = "graph.csv"


def _write_manifest(out_dir: Path, command: str, config: str | None, seed: int | None) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "output_dir": str(out_dir),
        "tool_version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _read_signal(path: Path):
    if path.suffix.lower() == ".csv":
        return read_signal_csv(path)
    return read_signal_binary(path)


def cmd_extract(args) -> int:
    out_dir = Path(args.out)
    _write_manifest(out_dir, "extract", None, None)
    template = _read_signal(Path(args.template))
    rows = []
    names = None
    for index, raw_path in enumerate(args.signals):
        path = Path(raw_path)
        signal = _read_signal(path)
        vector = extract_features(signal, template)
        names = vector.feature_names
        if args.object_id:
            key = (args.object_id, 0, index)
        else:
            key = (path.stem, 0, 0)
        rows.append((*key, vector.values))
    out_path = out_dir / "fingerprints.csv"
    with out_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["object_id", "window_index", "row_index", *names])
        for object_id, window, row_index, values in rows:
            writer.writerow([object_id, window, row_index, *[repr(float(v)) for v in values]])
    print(f"wrote {len(rows)} fingerprint rows to {out_path}")
    return 0


def _group_windows(matrices):
    grouped: dict[str, list] = {}
    for matrix in matrices:
        grouped.setdefault(matrix.object_id, []).append(matrix)
    for windows in grouped.values():
        windows.sort(key=lambda m: m.window_index)
    return grouped


def cmd_train(args) -> int:
    out_dir = Path(args.out)
    _write_manifest(out_dir, "train", args.fingerprints, None)
    matrices = load_fingerprints(args.fingerprints)
    grouped = _group_windows(matrices)
    window_indices = None
    for object_id, windows in grouped.items():
        indices = [m.window_index for m in windows]
        if window_indices is None:
            window_indices = indices
        elif indices != window_indices:
            raise InvalidInput(
                f"object {object_id!r} has windows {indices}, expected {window_indices}"
            )
    references = {
        object_id: select_reference(windows) for object_id, windows in grouped.items()
    }
    if len(grouped) >= 2:
        histories = {
            object_id: [
                estimate_transform(window, references[object_id]) for window in windows
            ]
            for object_id, windows in grouped.items()
        }
        graph = build_graph(histories, args.beta_min)
    else:
        graph = SimilarityGraph(
            nodes=tuple(grouped), weights={}, beta_min=args.beta_min
        )
    plain = []
    env = []
    for object_id, windows in grouped.items():
        for window in windows:
            plain.append(plain_distance(window, references[object_id]))
    for position in range(len(window_indices)):
        submissions = {
            object_id: grouped[object_id][position] for object_id in grouped
        }
        for object_id, window in submissions.items():
            env.append(
                compensated_distance(object_id, window, references, submissions, graph)
            )
    tau_prime = calibrate_threshold(plain, margin=args.margin)
    tau = calibrate_threshold(env, margin=args.margin)
    save_fingerprints(
        [references[object_id].matrix for object_id in sorted(references)],
        out_dir / STATE_REFERENCES,
    )
    save_graph_csv(graph, out_dir / STATE_GRAPH)
    from .fingerprint import EPSILON_SCALE

    meta = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "tau": tau,
        "tau_prime": tau_prime,
        "epsilon_scale": EPSILON_SCALE,
        "feature_names": list(matrices[0].feature_names),
        "beta_min": args.beta_min,
        "margin": args.margin,
        "objects": sorted(grouped),
    }
    (out_dir / STATE_META).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"trained {len(grouped)} objects: tau={tau:.6g} tau_prime={tau_prime:.6g}")
    return 0


def _load_state(state_dir: Path):
    meta = json.loads((state_dir / STATE_META).read_text())
    reference_matrices = load_fingerprints(state_dir / STATE_REFERENCES)
    references = {
        matrix.object_id: ReferenceFingerprint(matrix=matrix)
        for matrix in reference_matrices
    }
    graph = load_graph_csv(
        state_dir / STATE_GRAPH, nodes=meta["objects"], beta_min=meta["beta_min"]
    )
    return meta, references, graph


def cmd_auth(args) -> int:
    out_dir = Path(args.out)
    _write_manifest(out_dir, "auth", args.fingerprints, None)
    meta, references, graph = _load_state(Path(args.state))
    matrices = load_fingerprints(args.fingerprints)
    for matrix in matrices:
        if matrix.object_id not in references:
            raise InvalidInput(f"no trained reference for object {matrix.object_id!r}")
    by_window: dict[int, dict[str, object]] = {}
    for matrix in matrices:
        by_window.setdefault(matrix.window_index, {})[matrix.object_id] = matrix
    tau = float(meta["tau"])
    tau_prime = float(meta["tau_prime"])
    out_path = out_dir / "decisions.csv"
    with out_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["object_id", "window", "delta", "delta_hat", "verdict_base", "verdict_env"]
        )
        for window_index in sorted(by_window):
            submissions = by_window[window_index]
            for object_id in sorted(submissions):
                window = submissions[object_id]
                delta = plain_distance(window, references[object_id])
                delta_hat = compensated_distance(
                    object_id, window, references, submissions, graph
                )
                writer.writerow(
                    [
                        object_id,
                        window_index,
                        repr(delta),
                        repr(delta_hat),
                        (Verdict.LEGITIMATE if delta <= tau_prime else Verdict.ATTACKER).value,
                        (Verdict.LEGITIMATE if delta_hat <= tau else Verdict.ATTACKER).value,
                    ]
                )
    print(f"wrote decisions to {out_path}")
    return 0


def _apply_seed_override(config, seed):
    if seed is None:
        return config
    from dataclasses import replace

    return replace(config, seed=seed)


def cmd_simulate(args) -> int:
    out_dir = Path(args.out)
    _write_manifest(out_dir, "simulate", args.config, args.seed)
    config = _apply_seed_override(load_scenario_config(args.config), args.seed)
    report = run_scenario(config)
    paths = write_report(report, out_dir)
    plotting.save_distance_figure(report, out_dir / "distances.png")
    plotting.save_sweep_figure(report.sweep, out_dir / "sweep.png")
    summary = {
        "detection_rate": report.detection_rate_env,
        "false_positive_rate": report.false_positive_rate_env,
    }
    print(f"wrote {', '.join(p.name for p in paths)} and figures to {out_dir}")
    print(f"env pipeline: {json.dumps(summary)}")
    return 0


def cmd_sweep(args) -> int:
    out_dir = Path(args.out)
    _write_manifest(out_dir, "sweep", args.config, args.seed)
    config = _apply_seed_override(load_scenario_config(args.config), args.seed)
    if args.taus:
        try:
            taus = [float(part) for part in args.taus.split(",") if part.strip()]
        except ValueError as exc:
            raise InvalidInput(f"--taus: {exc}") from exc
    else:
        taus = list(np.linspace(0.0, args.tau_max, args.points))
    curve = sweep_threshold(config, taus)
    out_path = out_dir / "sweep.csv"
    with out_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tau", "accuracy_base", "accuracy_env"])
        for tau, acc_base, acc_env in curve:
            writer.writerow([repr(tau), repr(acc_base), repr(acc_env)])
    plotting.save_sweep_figure(curve, out_dir / "sweep.png")
    print(f"wrote {out_path} and sweep.png")
    return 0


def cmd_transfer_eval(args) -> int:
    out_dir = Path(args.out)
    _write_manifest(out_dir, "transfer-eval", args.config, args.seed)
    config = _apply_seed_override(load_transfer_eval_config(args.config), args.seed)
    rows = run_transfer_eval(config)
    out_path = write_transfer_eval(rows, out_dir)
    plotting.save_transfer_figure(rows, out_dir / "transfer_classes.png")
    print(f"wrote {out_path} and transfer_classes.png")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="envauth",
        description="Fingerprint authentication with environment-effect estimation.",
    )
    parser.add_argument("--version", action="version", version=f"envauth {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract feature rows from signal recordings")
    p.add_argument("signals", nargs="+", help="signal files (.csv or binary)")
    p.add_argument("--template", required=True, help="training-time template recording")
    p.add_argument("--object-id", help="emit all rows under this object id")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="select references, build graph, calibrate thresholds")
    p.add_argument("fingerprints", help="labeled fingerprint CSV")
    p.add_argument("--out", required=True, help="trained-state directory")
    p.add_argument("--beta-min", type=float, default=0.05)
    p.add_argument("--margin", type=float, default=0.1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("auth", help="score a fingerprint CSV against trained state")
    p.add_argument("fingerprints", help="fingerprint CSV to score")
    p.add_argument("--state", required=True, help="trained-state directory")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_auth)

    p = sub.add_parser("simulate", help="run a synthetic scenario and report metrics")
    p.add_argument("--config", required=True, help="scenario config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="verdict accuracy across thresholds")
    p.add_argument("--config", required=True, help="scenario config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--taus", help="comma-separated threshold list")
    p.add_argument("--tau-max", type=float, default=50.0)
    p.add_argument("--points", type=int, default=64)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser(
        "transfer-eval", help="transfer-learning evaluation over relatedness classes"
    )
    p.add_argument("--config", required=True, help="transfer-eval config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.set_defaults(func=cmd_transfer_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (EnvAuthError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
