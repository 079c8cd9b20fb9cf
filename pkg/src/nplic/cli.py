"""``nplic`` command line: gen-data, train, eval, bench, reconstruct.

Exit codes: 0 success, 1 usage error, 2 runtime failure. Every run prints its
resolved configuration as one JSON line on stderr.

All randomness derives from ``--seed``: the seed for a role (``split``,
``init:<k>``, ``bench`` ...) is the first 8 bytes, little endian, of
``blake2b(f"{seed}:{role}")``.
"""

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from nplic import bench, dataset, model, reconstruct
from nplic.geometry import MeshType

log = logging.getLogger("nplic")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def derive_seed(seed, role):
    digest = hashlib.blake2b(f"{seed}:{role}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _log_config(args):
    cfg = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "func"}
    print("config " + json.dumps(cfg, sort_keys=True), file=sys.stderr)


def cmd_gen_data(args):
    ds = dataset.generate(args.config, args.n_n, args.n_alpha)
    out = args.out or Path(f"{args.config}_{args.n_n}_{args.n_alpha}.csv")
    dataset.write_dataset(ds, out)
    print(f"records={len(ds)} path={out}")


def _train_config(args, seed):
    return model.TrainConfig(
        learning_rate=args.lr, batch_size=args.batch_size, max_epochs=args.max_epochs,
        val_tolerance=args.tol, seed=seed,
    )


def _write_history(hist, path):
    with open(path, "w") as fh:
        fh.write(f"epoch,train_mse,val_mse stop_reason={hist.stop_reason}\n")
        for k, (t, v) in enumerate(zip(hist.train_mse, hist.val_mse)):
            fh.write(f"{k},{t:.17g},{v:.17g}\n")


def cmd_train(args):
    ds = dataset.read_dataset(args.dataset)
    split = dataset.split_dataset(ds, derive_seed(args.seed, "split") % (1 << 63))
    meshes = tuple(sorted({MeshType(m) for m in ds.mesh}, key=lambda m: not m.is_simplex))
    config = model.NetworkConfig.for_meshes(meshes, args.hidden)
    out = Path(args.out)
    metrics = []
    for k in range(args.seeds):
        seed = derive_seed(args.seed, f"init:{k}") % (1 << 63)
        mdl, hist = model.train(model.init_model(config, seed), split, _train_config(args, seed))
        path = out if args.seeds == 1 else out.with_name(f"{out.stem}_s{k}{out.suffix}")
        model.save_model(mdl, path)
        _write_history(hist, path.with_name(path.name + ".history.csv"))
        mse, mae = model.evaluate(mdl, split.test)
        metrics.append((mse, mae))
        print(f"run={k} stop_reason={hist.stop_reason} epochs={len(hist)} "
              f"val_mse={mdl.provenance['final_val_mse']:.6g} test_mse={mse:.6g} test_mae={mae:.6g} path={path}")
    mse, mae = np.mean(metrics, axis=0)
    print(f"mean_test_mse={mse:.6g} mean_test_mae={mae:.6g} runs={args.seeds}")


def cmd_eval(args):
    mdl = model.load_model(args.model)
    ds = dataset.read_dataset(args.dataset)
    mse, mae = model.evaluate(mdl, ds)
    print(f"mse={mse:.6g} mae={mae:.6g}")
    scatter = args.scatter or Path(str(args.model) + ".scatter.csv")
    pairs = model.predict_scatter(mdl, ds, n_points=args.points, seed=derive_seed(args.seed, "scatter") % (1 << 63))
    with open(scatter, "w") as fh:
        fh.write("c_predicted,c_true\n")
        for p, t in pairs:
            fh.write(f"{p:.17g},{t:.17g}\n")
    print(f"scatter={scatter}")


def cmd_bench(args):
    sizes = args.sizes or (bench.HUGE_SIZES if args.huge else bench.DEFAULT_SIZES)
    mdl = model.load_model(args.model)
    meshes = args.mesh or [m.value for m in mdl.config.meshes]
    report = bench.BenchReport(mode="serial" if args.threads <= 1 else f"parallel-{args.threads}", repeats=args.repeats)
    for mesh in meshes:
        part = bench.run_bench(mesh, mdl, sizes, args.repeats, derive_seed(args.seed, "bench") % (1 << 63), args.threads)
        report.rows.extend(part.rows)
    text = report.to_csv()
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    print(f"# analytic_flops_per_query={bench.analytic_flops(mdl)}")


def cmd_reconstruct(args):
    grid = reconstruct.demo_field(args.n, args.h)
    solvers = ["exact", "nplic"] if args.solver == "both" else [args.solver]
    if "nplic" in solvers and args.model is None:
        raise UsageError("--model is required for the nplic solver")
    mdl = model.load_model(args.model) if "nplic" in solvers else None
    cells = []
    for s in solvers:
        cells += reconstruct.reconstruct_field(grid, s, mdl)
    fmt = args.format or (Path(args.out).suffix.lstrip(".") or "svg")
    reconstruct.emit_segments(cells, fmt, args.out, grid=grid)
    print(f"segments={len(cells)} path={args.out}")


def build_parser():
    p = _Parser(prog="nplic", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-data", help="generate a labelled dataset")
    g.add_argument("config", choices=[m.value for m in MeshType] + sorted(dataset.COMBINED))
    g.add_argument("n_n", type=int)
    g.add_argument("n_alpha", type=int)
    g.add_argument("-o", "--out", type=Path)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train NPLIC on a dataset")
    t.add_argument("dataset", type=Path)
    t.add_argument("-o", "--out", type=Path, required=True)
    t.add_argument("-N", "--hidden", type=int, default=48)
    t.add_argument("--seeds", type=int, default=1)
    t.add_argument("--lr", type=float, default=1e-4)
    t.add_argument("--batch-size", type=int, default=8192)
    t.add_argument("--max-epochs", type=int, default=100_000)
    t.add_argument("--tol", type=float, default=5e-5)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="test-set MSE/MAE and a scatter sample")
    e.add_argument("model", type=Path)
    e.add_argument("dataset", type=Path)
    e.add_argument("--scatter", type=Path)
    e.add_argument("--points", type=int, default=100)
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="time exact vs NPLIC solves")
    b.add_argument("model", type=Path)
    b.add_argument("--mesh", action="append", choices=[m.value for m in MeshType])
    b.add_argument("--sizes", type=int, nargs="+")
    b.add_argument("--huge", action="store_true", help="include the 10^7 batch")
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("-o", "--out", type=Path)
    b.set_defaults(func=cmd_bench)

    r = sub.add_parser("reconstruct", help="reconstruct the circular-bubble demo field")
    r.add_argument("--solver", choices=["exact", "nplic", "both"], default="exact")
    r.add_argument("--model", type=Path)
    r.add_argument("--n", type=int, default=8)
    r.add_argument("--h", type=float, default=1.0)
    r.add_argument("--format", choices=["csv", "svg"])
    r.add_argument("-o", "--out", type=Path, required=True)
    r.set_defaults(func=cmd_reconstruct)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    _log_config(args)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"nplic: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.debug("failure", exc_info=True)
        print(f"nplic: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
