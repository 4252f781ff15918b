"""Command-line interface: ``rankreveal <command> [options]``.

Every command writes its outputs and a ``manifest.txt`` into ``--out-dir``;
``rankreveal replay manifest.txt`` reruns it and checks that all numeric
outputs match bit for bit.

Exit codes: 0 success, 1 failed check (bound violation or replay mismatch),
2 input or format error, 3 threshold not reached, 4 RPCA did not converge.
"""
from __future__ import annotations

import argparse
import csv
import os
import shlex
import sys
import tempfile
import time

import numpy as np

from . import apps
from .io import FormatError, read_matrix, read_pnm, write_matrix, write_pnm
from .linalg import RngStream, spectral_norm
from .manifest import RunManifest, compare_outputs
from .randomized import RankRevealConfig, sblarank
from .rpca import TRACE_COLUMNS, RpcaConfig

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT = 2
EXIT_THRESHOLD = 3
EXIT_NOT_CONVERGED = 4

MANIFEST_NAME = "manifest.txt"


class Run:
    """Collects outputs and metrics of one command invocation."""

    def __init__(self, args, argv):
        self.args = args
        self.argv = argv
        self.out_dir = os.path.abspath(args.out_dir)
        os.makedirs(self.out_dir, exist_ok=True)
        self.outputs, self.metrics, self.timings = {}, {}, {}

    def path(self, key, name):
        full = os.path.join(self.out_dir, name)
        os.makedirs(os.path.dirname(full), exist_ok=True)
        self.outputs[key] = full
        return full

    def write_csv(self, key, name, columns, rows):
        with open(self.path(key, name), "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_cell(row[c]) for c in columns])

    def finish(self):
        config = {k: _config_value(v) for k, v in vars(self.args).items()
                  if k not in ("func", "out_dir")}
        man = RunManifest(command=self.args.command, argv=shlex.join(_strip_out_dir(self.argv)),
                          cwd=os.getcwd(), seed=self.args.seed, config=config,
                          outputs=self.outputs, metrics=self.metrics, timings=self.timings)
        man.write(os.path.join(self.out_dir, MANIFEST_NAME))
        return man


def _cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    return value


def _config_value(value):
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return value


def _strip_out_dir(argv):
    out, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok == "--out-dir":
            skip = True
            continue
        if tok.startswith("--out-dir="):
            continue
        out.append(tok)
    return out


def _fraction(text):
    value = float(text)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {text}")
    return value


def _positive(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def _add_common(p):
    p.add_argument("--seed", type=int, default=0, help="seed for all randomness (default 0)")
    p.add_argument("--out-dir", default=".", help="directory for outputs and manifest.txt")


def _add_rank_options(p, power_iters=2):
    p.add_argument("--block-size", type=int, default=10)
    p.add_argument("--power-iters", type=int, default=power_iters)


def cmd_bench_synthetic(run):
    a = run.args
    start = time.perf_counter()
    rows = apps.bench_synthetic(a.type, a.block_size, a.power_iters, a.threshold, a.seeds,
                                a.seed, a.algorithms)
    run.timings["total"] = time.perf_counter() - start
    summary = apps.aggregate_bench(rows)
    run.write_csv("table", "bench.csv", apps.BENCH_COLUMNS, rows + summary)
    spec, default_theta = apps.SYNTHETIC_TYPES[a.type]
    theta = a.threshold if a.threshold is not None else default_theta
    k = int(np.count_nonzero(spec.spectrum() > theta))
    for algorithm in a.algorithms:
        for b in a.block_size:
            for q in a.power_iters:
                group = [r for r in rows if (r["algorithm"], r["b"], r["q"]) == (algorithm, b, q)]
                key = f"{algorithm}.b{b}.q{q}"
                hits = sum(r["crank"] == k for r in group)
                run.metrics[f"{key}.crank_hits"] = hits
                run.metrics[f"{key}.crank_max"] = max(r["crank"] for r in group)
                run.metrics[f"{key}.orth_loss_max"] = max(r["orth_loss"] for r in group)
                run.metrics[f"{key}.approx_error_median"] = float(
                    np.median([r["approx_error"] for r in group]))
                print(f"{algorithm} b={b} q={q}: crank == {k} in {hits}/{len(group)} seeds, "
                      f"max crank {run.metrics[f'{key}.crank_max']}")
    return EXIT_OK


def cmd_singular_accuracy(run):
    a = run.args
    rows = apps.singular_accuracy(a.block_size, a.power_iters, a.seeds, a.seed, a.algorithm)
    run.write_csv("table", "accuracy.csv", apps.ACCURACY_COLUMNS, rows)
    head = [r["rel_error"] for r in rows if r["index"] <= 5]
    run.metrics["head5_rel_error_max"] = max(head) if head else 0.0
    run.metrics["crank_max"] = max((r["index"] for r in rows), default=0)
    print(f"max relative error over indices 1..5: {run.metrics['head5_rel_error_max']:.3e}")
    return EXIT_OK


def cmd_verify_bounds(run):
    a = run.args
    rows = [row for b in a.block_size for q in a.power_iters
            for row in apps.verify_bounds(a.type, b, q, a.seeds, a.seed, a.threshold)]
    run.write_csv("table", "bounds.csv", apps.BOUND_COLUMNS, rows)
    counts = {s: sum(r["status"] == s for r in rows)
              for s in ("holds", "FAILS", "assumption violated")}
    run.metrics["holds"] = counts["holds"]
    run.metrics["fails"] = counts["FAILS"]
    run.metrics["excluded"] = counts["assumption violated"]
    print(f"{counts['holds']} hold, {counts['FAILS']} fail, "
          f"{counts['assumption violated']} excluded")
    return EXIT_CHECK_FAILED if counts["FAILS"] else EXIT_OK


def cmd_compress_image(run):
    a = run.args
    img = read_pnm(a.input)
    start = time.perf_counter()
    comp = apps.compress_image(img, a.theta_fraction, a.block_size, a.power_iters,
                               RngStream(a.seed))
    elapsed = time.perf_counter() - start
    run.timings["compress"] = elapsed
    write_matrix(run.path("Q", "Q.f64"), comp.Q, "raw")
    write_matrix(run.path("B", "B.f64"), comp.B, "raw")
    ext = "ppm" if comp.color else "pgm"
    write_pnm(run.path("image", f"reconstructed.{ext}"), comp.reconstruct())
    stats = {"crank": comp.crank, "cratio": comp.cratio, "relerror": comp.relerror,
             "time": elapsed}
    run.write_csv("stats", "stats.csv", ("crank", "cratio", "relerror", "time"), [stats])
    run.metrics.update(crank=comp.crank, cratio=comp.cratio, relerror=comp.relerror)
    print(f"crank {comp.crank}, cratio {comp.cratio:.3f}, relerror {comp.relerror:.3e}")
    return EXIT_OK if comp.result.threshold_reached else EXIT_THRESHOLD


def cmd_decompress_image(run):
    a = run.args
    Q = read_matrix(a.q_factor)
    B = read_matrix(a.b_factor)
    if Q.shape[1] != B.shape[0]:
        raise FormatError(a.b_factor, f"factor shapes {Q.shape} and {B.shape} do not chain")
    img = apps.decompress_image(Q, B, a.color)
    write_pnm(run.path("image", a.name), img)
    run.metrics.update(rows=img.shape[0], cols=img.shape[1])
    return EXIT_OK


def cmd_lsi(run):
    a = run.args
    A = read_matrix(a.termdoc, "mm")
    rng = RngStream(a.seed)
    if a.rank is not None:
        theta = a.threshold if a.threshold is not None else 1e-12 * max(spectral_norm(A), 1.0)
        cfg = RankRevealConfig(threshold=theta, block_size=a.block_size,
                               power_iters=a.power_iters, max_rank=min(a.rank, min(A.shape)))
    else:
        cfg = RankRevealConfig(threshold=a.threshold, block_size=a.block_size,
                               power_iters=a.power_iters)
    res = sblarank(A, cfg, rng)
    order, scores = apps.lsi_scores(A, a.query, res.Q)
    top = order if a.top is None else order[:a.top]
    rows = [{"rank": i + 1, "document": int(d), "score": float(scores[d])}
            for i, d in enumerate(top)]
    run.write_csv("scores", "scores.csv", apps.LSI_COLUMNS, rows)
    run.metrics.update(crank=res.rank, best_document=int(order[0]),
                       best_score=float(scores[order[0]]))
    print(f"crank {res.rank}; best document {order[0]} (score {scores[order[0]]:.4f})")
    if a.rank is None and not res.threshold_reached:
        return EXIT_THRESHOLD
    return EXIT_OK


def cmd_rpca(run):
    a = run.args
    names = sorted(f for f in os.listdir(a.frames) if f.lower().endswith(".pgm"))
    if not names:
        raise FormatError(a.frames, "no .pgm frames found")
    frames = [read_pnm(os.path.join(a.frames, f)) for f in names]
    if any(f.ndim != 2 for f in frames):
        raise FormatError(a.frames, "frames must be gray PGM images")
    cfg = RpcaConfig(lam=a.lam, mu0=a.mu0, rho=a.rho, max_iters=a.max_iters, tol=a.tol,
                     backend=a.backend, block_size=a.block_size, power_iters=a.power_iters,
                     paper_literal_step2=a.paper_literal_step2)
    start = time.perf_counter()
    state, back, fore = apps.rpca_frames(frames, cfg, RngStream(a.seed))
    run.timings["solve"] = time.perf_counter() - start
    for name, bg, fg in zip(names, back, fore):
        write_pnm(run.path(f"background.{name}", os.path.join("background", name)), bg)
        write_pnm(run.path(f"foreground.{name}", os.path.join("foreground", name)), fg)
    rows = [dict(zip(TRACE_COLUMNS, t)) for t in state.trace]
    run.write_csv("trace", "trace.csv", TRACE_COLUMNS, rows)
    run.metrics.update(iterations=state.iter, converged=state.converged,
                       relerror=float(state.relerror_trace[-1]),
                       rank_L=int(state.trace[-1][2]))
    print(f"{state.iter} iterations, relerror {state.relerror_trace[-1]:.3e}, "
          f"{'converged' if state.converged else 'NOT converged'}")
    return EXIT_OK if state.converged else EXIT_NOT_CONVERGED


def cmd_convert(run):
    a = run.args
    A = read_matrix(a.source, a.source_format)
    write_matrix(run.path("matrix", a.name), A, a.format)
    run.metrics.update(rows=A.shape[0], cols=A.shape[1], fro_norm=float(np.linalg.norm(A)))
    return EXIT_OK


def cmd_replay(args):
    man = RunManifest.read(args.manifest)
    out_dir = os.path.abspath(args.out_dir) if args.out_dir else tempfile.mkdtemp(prefix="replay-")
    argv = shlex.split(man.argv) + ["--out-dir", out_dir]
    here = os.getcwd()
    os.chdir(man.cwd)
    try:
        code = main(argv)
    finally:
        os.chdir(here)
    again = RunManifest.read(os.path.join(out_dir, MANIFEST_NAME))
    diffs = compare_outputs(man, again)
    for d in diffs:
        print(d)
    if diffs:
        print(f"replay differs in {len(diffs)} item(s)")
        return EXIT_CHECK_FAILED
    print(f"replay identical ({len(man.metrics)} metrics, {len(man.outputs)} outputs; exit {code})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rankreveal",
                                     description="Adaptive randomized rank-revealing approximation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench-synthetic", help="benchmark on Type I/II synthetic matrices")
    p.add_argument("--type", choices=sorted(apps.SYNTHETIC_TYPES), default="I")
    p.add_argument("--block-size", type=int, nargs="+", default=[10])
    p.add_argument("--power-iters", type=int, nargs="+", default=[1])
    p.add_argument("--threshold", type=_positive, default=None,
                   help="default 1e-5 (Type I) or 1e-9 (Type II)")
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--algorithms", nargs="+", choices=sorted(apps.ALGORITHMS),
                   default=["blarank", "sblarank"])
    _add_common(p)
    p.set_defaults(func=cmd_bench_synthetic)

    p = sub.add_parser("singular-accuracy", help="relative errors of estimated singular values")
    p.add_argument("--block-size", type=int, nargs="+", default=[10, 20])
    p.add_argument("--power-iters", type=int, nargs="+", default=[1, 2, 3])
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--algorithm", choices=sorted(apps.ALGORITHMS), default="sblarank")
    _add_common(p)
    p.set_defaults(func=cmd_singular_accuracy)

    p = sub.add_parser("verify-bounds", help="evaluate the per-instance error bounds")
    p.add_argument("--type", choices=sorted(apps.SYNTHETIC_TYPES), default="I")
    p.add_argument("--block-size", type=int, nargs="+", default=[10])
    p.add_argument("--power-iters", type=int, nargs="+", default=[1])
    p.add_argument("--threshold", type=_positive, default=None)
    p.add_argument("--seeds", type=int, default=10)
    _add_common(p)
    p.set_defaults(func=cmd_verify_bounds)

    p = sub.add_parser("compress-image", help="low-rank compression of a PGM/PPM image")
    p.add_argument("input")
    p.add_argument("--theta-fraction", type=_fraction, default=0.05)
    _add_rank_options(p)
    _add_common(p)
    p.set_defaults(func=cmd_compress_image)

    p = sub.add_parser("decompress-image", help="rebuild an image from stored Q and B factors")
    p.add_argument("q_factor")
    p.add_argument("b_factor")
    p.add_argument("--color", action="store_true", help="factors describe a stacked RGB image")
    p.add_argument("--name", default="decompressed.pgm")
    _add_common(p)
    p.set_defaults(func=cmd_decompress_image)

    p = sub.add_parser("lsi", help="latent semantic indexing query scores")
    p.add_argument("termdoc", help="terms x documents MatrixMarket file")
    p.add_argument("--query", type=int, nargs="+", required=True,
                   help="0-based term indices forming a binary query vector")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--threshold", type=_positive)
    g.add_argument("--rank", type=int)
    _add_rank_options(p)
    p.add_argument("--top", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_lsi)

    p = sub.add_parser("rpca", help="robust PCA background estimation on PGM frames")
    p.add_argument("frames", help="directory of equally sized .pgm frames")
    p.add_argument("--lam", type=_positive, default=None)
    p.add_argument("--mu0", type=_positive, default=1e-3)
    p.add_argument("--rho", type=float, default=1.1)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--tol", type=_positive, default=9e-5)
    p.add_argument("--backend", choices=["exact", "approximate"], default="exact")
    _add_rank_options(p, power_iters=0)
    p.add_argument("--paper-literal-step2", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_rpca)

    p = sub.add_parser("convert", help="convert between matrix file formats")
    p.add_argument("source")
    p.add_argument("name", help="output file name inside --out-dir")
    p.add_argument("--source-format", choices=["mm", "raw"], default=None)
    p.add_argument("--format", choices=["mm-array", "mm-coordinate", "raw"], default=None)
    _add_common(p)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("replay", help="rerun a manifest and compare outputs")
    p.add_argument("manifest")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=None)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        if args.command == "replay":
            return cmd_replay(args)
        run = Run(args, argv)
        code = args.func(run)
        run.finish()
        return code
    except (FormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
