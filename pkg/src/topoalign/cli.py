"""Command-line interface.

Subcommands: diagram, distance, align, gum, score, train, report.
Exit codes: 0 success, 1 user error (bad input or files), 2 internal error.
"""

import argparse
import json
import sys

import numpy as np

from . import persistence, trainer
from .alignment import structure_discrepancy
from .diagram_metrics import bottleneck_distance, wasserstein_distance
from .pointcloud import PointCloudError, load_point_cloud, pairwise_distances
from .sde import score_samples


class UserError(Exception):
    """Invalid user input; reported on stderr with exit code 1."""


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topoalign",
        description="Topological structure alignment toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("diagram", help="compute a persistence diagram from a cloud CSV")
    p.add_argument("cloud", help="point-cloud CSV file")
    p.add_argument("--max-dim", type=int, default=0,
                   help="highest homology dimension (0 uses the union-find route)")
    p.add_argument("--max-scale", type=float, default=float("inf"),
                   help="largest simplex diameter for dimensions >= 1")
    p.add_argument("--budget", type=int, default=5_000_000,
                   help="simplex budget for dimensions >= 1")
    p.add_argument("--out", default=None, help="output file (default: stdout)")

    p = sub.add_parser("distance", help="distance between two diagram files")
    p.add_argument("d1")
    p.add_argument("d2")
    p.add_argument("--metric", choices=["bottleneck", "wasserstein"],
                   default="bottleneck")
    p.add_argument("--p", type=float, default=1.0, help="Wasserstein order")
    p.add_argument("--dim", type=int, default=0, help="homology dimension to compare")

    p = sub.add_parser("align", help="structure discrepancy between two cloud CSVs")
    p.add_argument("x", help="input-space cloud CSV")
    p.add_argument("z", help="latent-space cloud CSV")

    p = sub.add_parser("gum", help="fit the entropy mixture from a list of entropies")
    p.add_argument("entropies", help="file with one entropy value per line")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=100)

    p = sub.add_parser("score", help="damage scores for prediction rows (label,p1..pK)")
    p.add_argument("predictions", help="CSV with one 'label,p_1,...,p_K' row per sample")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0,
                   help="score temperature")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--out", default=None, help="output CSV (default: stdout)")

    p = sub.add_parser("train", help="run a training experiment and emit a report CSV")
    p.add_argument("dataset", help="CSV with 'label,x_1,...,x_d' rows")
    p.add_argument("config", help="key=value config file")
    p.add_argument("--mode", choices=["baseline", "topo"], default="topo")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--no-perturb", action="store_true", help="disable perturbation")
    p.add_argument("--no-align", action="store_true", help="disable the alignment term")
    p.add_argument("--no-uncertainty", action="store_true",
                   help="disable the uncertainty score factor")
    p.add_argument("--no-focal", action="store_true",
                   help="disable the probability score factor")
    p.add_argument("--out", default=None, help="report CSV (default: stdout)")

    p = sub.add_parser("report", help="render figures and a summary from report CSVs")
    p.add_argument("reports", nargs="+", help="one or more report CSV files")
    p.add_argument("--labels", default=None,
                   help="comma-separated curve labels (default: file stems)")
    p.add_argument("--out-dir", required=True, help="directory for figures and summary")
    return parser


def _open_out(path):
    return open(path, "w", encoding="utf-8") if path else sys.stdout


def _cmd_diagram(args) -> int:
    cloud = load_point_cloud(args.cloud)
    m = pairwise_distances(cloud)
    if args.max_dim <= 0:
        diagram, _ = persistence.h0_persistence(m)
    else:
        diagram = persistence.rips_persistence(
            m, args.max_dim, args.max_scale, budget=args.budget
        )
    out = _open_out(args.out)
    try:
        persistence.write_diagram(diagram, out)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_distance(args) -> int:
    d1 = persistence.read_diagram(args.d1)
    d2 = persistence.read_diagram(args.d2)
    if args.metric == "bottleneck":
        value = bottleneck_distance(d1, d2, dim=args.dim)
    else:
        value = wasserstein_distance(d1, d2, p=args.p, dim=args.dim)
    print(format(value, ".12g"))
    return 0


def _cmd_align(args) -> int:
    x = load_point_cloud(args.x)
    z = load_point_cloud(args.z)
    if x.n != z.n:
        raise UserError(f"clouds disagree on point count: {x.n} vs {z.n}")
    print(format(structure_discrepancy(x, z), ".12g"))
    return 0


def _read_entropies(path):
    values = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                try:
                    values.append(float(stripped))
                except ValueError:
                    raise UserError(
                        f"{path}: line {lineno}: invalid entropy {stripped!r}"
                    ) from None
    except OSError as exc:
        raise UserError(f"cannot read {path}: {exc}") from exc
    if not values:
        raise UserError(f"{path}: no entropy values")
    return values


def _cmd_gum(args) -> int:
    from .sde import gum_fit

    values = _read_entropies(args.entropies)
    params = gum_fit(values, max_iter=args.max_iter, tol=args.tol)
    payload = {
        "pi": params.pi,
        "sigma": params.sigma,
        "omega": params.omega,
        "log_likelihood": params.log_likelihood,
        "iterations": params.iterations,
        "degenerate": params.degenerate,
    }
    print(json.dumps(payload, sort_keys=True))
    return 0


def _read_predictions(path):
    labels = []
    rows = []
    width = None
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                fields = stripped.split(",")
                if width is None:
                    width = len(fields)
                    if width < 3:
                        raise UserError(
                            f"{path}: line {lineno}: need a label and >= 2 probabilities"
                        )
                elif len(fields) != width:
                    raise UserError(f"{path}: ragged row at line {lineno}")
                try:
                    labels.append(int(fields[0]))
                    rows.append([float(f) for f in fields[1:]])
                except ValueError:
                    raise UserError(f"{path}: line {lineno}: non-numeric field") from None
    except OSError as exc:
        raise UserError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise UserError(f"{path}: no prediction rows")
    return np.array(rows), np.array(labels)


def _cmd_score(args) -> int:
    probs, labels = _read_predictions(args.predictions)
    params, records, scores = score_samples(
        probs, labels, lam=args.lam, max_iter=args.max_iter, tol=args.tol
    )
    out = _open_out(args.out)
    try:
        out.write(
            "# pi={:.12g} sigma={:.12g} omega={:.12g}\n".format(
                params.pi, params.sigma, params.omega
            )
        )
        out.write("entropy,posterior,gt_prob,sds\n")
        for rec, sc in zip(records, scores):
            out.write(
                ",".join(
                    format(v, ".12g")
                    for v in (rec.entropy, sc.h, rec.gt_prob, sc.sds)
                )
                + "\n"
            )
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_train(args) -> int:
    points, labels = trainer.load_labeled_dataset(args.dataset)
    cfg = trainer.load_config(args.config)
    if args.seed is not None:
        import dataclasses

        cfg = dataclasses.replace(cfg, rng_seed=args.seed)
    if args.mode == "baseline":
        mode = trainer.Mode.baseline()
    else:
        mode = trainer.Mode(
            perturb=not args.no_perturb,
            align=not args.no_align,
            uncertainty_weight=not args.no_uncertainty,
            focal_weight=not args.no_focal,
        )

    def progress(row):
        print(
            "epoch {epoch}: L_cls={L_cls:.6g} L_sa={L_sa:.6g} "
            "disc={discrepancy_heldout:.6g} acc={accuracy:.4f}".format(**row),
            file=sys.stderr,
        )

    rows = trainer.run_experiment(points, labels, cfg, mode, progress=progress)
    out = _open_out(args.out)
    try:
        trainer.write_report(rows, out)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_report(args) -> int:
    from . import plots

    if args.labels is not None:
        labels = [s.strip() for s in args.labels.split(",")]
        if len(labels) != len(args.reports):
            raise UserError(
                f"got {len(labels)} labels for {len(args.reports)} report files"
            )
    else:
        import os

        labels = [os.path.splitext(os.path.basename(p))[0] for p in args.reports]
    named = []
    for label, path in zip(labels, args.reports):
        named.append((label, trainer.read_report(path)))
    written = plots.render_report(named, args.out_dir)
    for path in written:
        print(path)
    return 0


_HANDLERS = {
    "diagram": _cmd_diagram,
    "distance": _cmd_distance,
    "align": _cmd_align,
    "gum": _cmd_gum,
    "score": _cmd_score,
    "train": _cmd_train,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad flags; map to the user-error code
        return 1 if exc.code not in (0, None) else 0
    try:
        return _HANDLERS[args.command](args)
    except (UserError, PointCloudError, trainer.ConfigError,
            persistence.SimplexBudgetError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - internal invariant violations
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
