"""Batch command-line front end.

Subcommands: synth | build | rom | rogl | cluster | distances | sweep.
All parameters can come from a JSON config file (--config) with individual
flags overriding it; every run is reproducible byte-for-byte from the same
config and seed (output files carry no timestamps).

Exit codes: 0 success, 2 usage error, 3 numerical-assumption failure,
4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .clustering import (
    partitions_equal,
    roglc,
    rvsc,
    rwnsc_full,
)
from .errors import AssumptionError, GraphValidationError
from .graphs import (
    GraphLaplacian,
    Normalization,
    TargetSubset,
    connected_components,
    components_touching,
    heat_kernel_laplacian,
    laplacian_from_edges,
    load_edge_list,
    load_points,
    random_walk_normalization,
    save_edge_list,
    save_points,
    scale_symmetric,
    stability_step,
    two_circle_cloud,
    two_cloud_targets,
)
from .metrics import distance_report
from .reduced import build_rogl, extract_optimal_grid, save_rogl
from .rom import build_rom, load_rom, save_rom, transfer_full, transfer_rom
from .seeds import substream

USAGE_ERROR = 2
ASSUMPTION_ERROR = 3
IO_ERROR = 4

DEFAULTS = {
    "n_points": 100,
    "tau": 0.6,
    "k1": 20,
    "k2": 4,
    "eps": 1e-8,
    "n0": 2,
    "n_c": 2,
    "n_s": None,
    "seed": 1,
    "tau_step": "rw",       # "rw" fixes the step to 1; "auto" estimates 2/||A||
    "restarts": 8,
    "p_values": [10, 50, 100],
}


class CliError(Exception):
    def __init__(self, message, code=USAGE_ERROR):
        super().__init__(message)
        self.code = code


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read config: {exc}", IO_ERROR) from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"bad config JSON: {exc}") from exc


def _settings(args):
    cfg = dict(DEFAULTS)
    cfg.update(_load_config(getattr(args, "config", None)))
    for key in cfg:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    for key in ("k1", "k2", "n0", "n_c", "n_points"):
        if int(cfg[key]) <= 0:
            raise CliError(f"{key} must be positive")
    if cfg["eps"] <= 0 or cfg["tau"] <= 0:
        raise CliError("eps and tau must be positive")
    if int(cfg["k2"]) > int(cfg["k1"]):
        raise CliError("k2 must not exceed k1")
    return cfg


def _load_graph(args, cfg):
    if getattr(args, "edges", None):
        try:
            return load_edge_list(args.edges)
        except OSError as exc:
            raise CliError(f"cannot read edge list: {exc}", IO_ERROR) from exc
    if getattr(args, "points", None):
        try:
            cloud = load_points(args.points, tau=float(cfg["tau"]))
        except OSError as exc:
            raise CliError(f"cannot read points: {exc}", IO_ERROR) from exc
        return heat_kernel_laplacian(cloud)
    raise CliError("no input graph: pass --edges or --points")


def _subset(args, cfg, L):
    spec = getattr(args, "targets", None)
    if spec is None:
        raise CliError("missing target subset: pass --targets id,id,...")
    if spec == "synth-default":
        return two_cloud_targets(int(cfg["n_points"]))
    if spec.startswith("random:"):
        # random:<r>:<labels.json> draws r vertices per reference cluster
        try:
            _, r, labels_path = spec.split(":", 2)
            r = int(r)
        except ValueError as exc:
            raise CliError("random subset spec is random:<r>:<labels.json>") from exc
        try:
            with open(labels_path) as fh:
                label_map = json.load(fh)
        except OSError as exc:
            raise CliError(f"cannot read labels: {exc}", IO_ERROR) from exc
        rng = substream(int(cfg["seed"]), "subset-sampling")
        by_cluster = {}
        for vid, lab in label_map.items():
            by_cluster.setdefault(lab, []).append(int(vid))
        chosen = []
        for lab in sorted(by_cluster):
            members = sorted(by_cluster[lab])
            take = min(r, len(members))
            chosen += [members[i] for i in rng.choice(len(members), take, replace=False)]
        return TargetSubset(L.internal_index(chosen))
    try:
        ids = [int(tok) for tok in spec.split(",") if tok.strip()]
    except ValueError as exc:
        raise CliError(f"bad target list {spec!r}") from exc
    if not ids:
        raise CliError("empty target list")
    return TargetSubset(L.internal_index(ids))


def _pipeline(args, cfg, L, reorth="selective"):
    subset = _subset(args, cfg, L)
    weights, a = random_walk_normalization(L)
    expected = len(components_touching(connected_components(L), subset))
    rom = build_rom(a, weights, subset, int(cfg["k1"]), int(cfg["k2"]),
                    float(cfg["eps"]), reorth_stage1=reorth,
                    expected_m0=expected)
    return subset, weights, a, rom


def _tau(cfg, a):
    if cfg["tau_step"] == "rw":
        return 1.0
    return stability_step(a)


def cmd_synth(args):
    cfg = _settings(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cloud = two_circle_cloud(int(cfg["n_points"]), seed=int(cfg["seed"]),
                             tau=float(cfg["tau"]))
    L = heat_kernel_laplacian(cloud)
    save_points(out / "points.txt", cloud)
    save_edge_list(out / "edges.txt", L)
    targets = two_cloud_targets(int(cfg["n_points"]))
    _write_json(out / "synth.json", {
        "n_points": int(cfg["n_points"]),
        "tau": float(cfg["tau"]),
        "seed": int(cfg["seed"]),
        "suggested_targets": [int(i) for i in targets.indices],
    })
    print(f"wrote {out}/points.txt, {out}/edges.txt (N={L.n}, tau={cfg['tau']})")
    return 0


def cmd_build(args):
    cfg = _settings(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    L = _load_graph(args, cfg)
    labels = connected_components(L)
    _write_json(out / "graph.json", {
        "n_vertices": L.n,
        "n_edges": int((L.matrix.nnz - L.n) // 2),
        "n_components": int(labels.max()) + 1,
        "dropped_self_loops": L.dropped_self_loops,
        "removed_isolated": list(L.removed_isolated),
        "vertex_ids": [int(v) for v in L.vertex_ids],
    })
    print(f"graph: N={L.n}, components={int(labels.max()) + 1}")
    return 0


def cmd_rom(args):
    cfg = _settings(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    L = _load_graph(args, cfg)
    subset, weights, a, rom = _pipeline(args, cfg, L)
    save_rom(out / "rom.npz", rom)
    tau = _tau(cfg, a)
    p_late = max(int(p) for p in cfg["p_values"])
    table = {"k1_sweep": [], "k2_sweep": []}
    full = transfer_full(L, weights, subset, tau, [p_late])
    k1, k2 = int(cfg["k1"]), int(cfg["k2"])
    for k1_try in sorted({max(2, k1 // 4), max(3, k1 // 2), k1}):
        r = build_rom(a, weights, subset, k1_try, min(k2, k1_try), float(cfg["eps"]))
        err = _rel_err(transfer_rom(r, r.d_hat, tau, [p_late]).matrices[0],
                       full.matrices[0])
        table["k1_sweep"].append({"k1": k1_try, "rel_err": err})
    for k2_try in range(1, k2 + 1):
        r = build_rom(a, weights, subset, k1, k2_try, float(cfg["eps"]))
        err = _rel_err(transfer_rom(r, r.d_hat, tau, [p_late]).matrices[0],
                       full.matrices[0])
        table["k2_sweep"].append({"k2": k2_try, "rel_err": err})
    _write_json(out / "rom_report.json", {
        "n1": rom.n1, "n2": rom.n2, "order": rom.order, "m0": rom.m0,
        "p_late": p_late, "convergence": table,
    })
    print(f"rom: n1={rom.n1} n2={rom.n2} order={rom.order} m0={rom.m0}")
    return 0


def _rel_err(approx, exact):
    scale = max(np.abs(exact).max(), 1e-300)
    return float(np.abs(approx - exact).max() / scale)


def cmd_rogl(args):
    cfg = _settings(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    L = _load_graph(args, cfg)
    subset, weights, a, rom = _pipeline(args, cfg, L)
    rogl = build_rogl(rom)
    save_rogl(out / "rogl.json", rogl,
              vertex_ids=[int(L.vertex_ids[i]) for i in subset.indices])
    if subset.m == 1:
        grid = extract_optimal_grid(rogl.l_tilde, rogl.d_tilde)
        _write_json(out / "grid.json", {
            "h": [float(x) for x in grid.h],
            "h_hat": [float(x) for x in grid.h_hat],
        })
    print(
        f"rogl: n={rogl.order} rowsum_residual={rogl.row_sum_residual():.3e} "
        f"scaling_margin={rogl.assumption2_margin():.3e}"
    )
    return 0


def cmd_cluster(args):
    cfg = _settings(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    L = _load_graph(args, cfg)
    n_c, n0 = int(cfg["n_c"]), int(cfg["n0"])
    seed, restarts = int(cfg["seed"]), int(cfg["restarts"])
    if args.method == "rwnsc":
        weights, a = random_walk_normalization(L)
        assignment = rwnsc_full(a, weights, n_c, n0, seed=seed, restarts=restarts)
        labels = {int(L.vertex_ids[i]): int(lab)
                  for i, lab in enumerate(assignment.labels)}
        summary = [f"method rwnsc", f"n_clusters {n_c}",
                   f"inertia {assignment.inertia!r}"]
    else:
        subset, weights, a, rom = _pipeline(args, cfg, L)
        ids = [int(L.vertex_ids[i]) for i in subset.indices]
        if args.method == "rvsc":
            n_s = cfg["n_s"] and int(cfg["n_s"])
            result = rvsc(L, rom, n_c, n0, seed=seed, n_samples=n_s,
                          restarts=restarts)
            labels = {vid: int(lab) for vid, lab in zip(ids, result.target_labels)}
            summary = [f"method rvsc", f"n_clusters {n_c}",
                       f"samples {len(result.sample_vertices)}"]
        else:
            rogl_state = build_rogl(rom)
            result = roglc(rogl_state, n_c, n0, seed=seed, restarts=restarts)
            labels = {vid: int(lab) for vid, lab in zip(ids, result.target_labels)}
            summary = [
                "method roglc",
                f"n_t_star {result.n_t_star}",
                f"n_g_star {result.n_g_star}",
                "n_t n_g",
            ] + [f"{nt} {ng}" for nt, ng in result.plateau.table]
    _write_json(out / "labels.json", labels)
    (out / "summary.txt").write_text("\n".join(summary) + "\n")
    if getattr(args, "reference", None):
        try:
            with open(args.reference) as fh:
                ref = {int(k): v for k, v in json.load(fh).items()}
        except OSError as exc:
            raise CliError(f"cannot read reference labels: {exc}", IO_ERROR) from exc
        common = sorted(set(ref) & set(labels))
        ours = [labels[v] for v in common]
        theirs = [ref[v] for v in common]
        agree = partitions_equal(ours, theirs)
        pairs = _pair_agreement(ours, theirs)
        _write_json(out / "consistency.json", {
            "n_common": len(common),
            "partitions_equal": bool(agree),
            "pair_agreement": pairs,
        })
    print("\n".join(summary))
    return 0


def _pair_agreement(a, b):
    same_same = same_split = split_same = split_split = 0
    n = len(a)
    for i in range(n):
        for j in range(i + 1, n):
            sa, sb = a[i] == a[j], b[i] == b[j]
            if sa and sb:
                same_same += 1
            elif sa:
                same_split += 1
            elif sb:
                split_same += 1
            else:
                split_split += 1
    return {"same_same": same_same, "same_split": same_split,
            "split_same": split_same, "split_split": split_split}


def cmd_distances(args):
    cfg = _settings(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    L = _load_graph(args, cfg)
    subset, weights, a, rom = _pipeline(args, cfg, L)
    rogl = build_rogl(rom)
    reports = [distance_report(L, weights, subset, rogl, "commute")]
    for p in cfg["p_values"]:
        reports.append(distance_report(L, weights, subset, rogl, "diffusion", p=int(p)))
    _write_json(out / "distances.json", [r.to_json() for r in reports])
    (out / "distances.txt").write_text(
        "\n\n".join(r.to_text() for r in reports) + "\n"
    )
    worst = max(r.max_rel_err for r in reports)
    print(f"distances: {len(reports)} tables, max_rel_err={worst:.3e}")
    return 0


def cmd_sweep(args):
    cfg = _settings(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    L = _load_graph(args, cfg)
    subset = _subset(args, cfg, L)
    weights, a = random_walk_normalization(L)
    tau = _tau(cfg, a)
    p_late = max(int(p) for p in cfg["p_values"])
    full = transfer_full(L, weights, subset, tau, [p_late])
    rows = []
    for k2_try in range(1, int(cfg["k2"]) + 1):
        rom = build_rom(a, weights, subset, int(cfg["k1"]), k2_try, float(cfg["eps"]))
        rogl = build_rogl(rom)
        t_err = _rel_err(transfer_rom(rom, rom.d_hat, tau, [p_late]).matrices[0],
                         full.matrices[0])
        d_err = distance_report(L, weights, subset, rogl, "diffusion",
                                p=max(1, p_late // 2)).max_rel_err
        c_err = distance_report(L, weights, subset, rogl, "commute").max_rel_err
        rows.append({"k2": k2_try, "transfer_rel_err": t_err,
                     "diffusion_rel_err": d_err, "commute_rel_err": c_err})
    _write_json(out / "sweep.json", {"p_late": p_late, "rows": rows})
    for row in rows:
        print(f"k2={row['k2']} transfer={row['transfer_rel_err']:.3e} "
              f"diffusion={row['diffusion_rel_err']:.3e} "
              f"commute={row['commute_rel_err']:.3e}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rogl",
        description="Reduced-order graph-Laplacian toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, graph_input=True, targets=True):
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--tau", type=float, help="heat-kernel width")
        if graph_input:
            p.add_argument("--edges", help="edge list file (u v [w] per line)")
            p.add_argument("--points", help="2-d point file (x y per line)")
        if targets:
            p.add_argument("--targets",
                           help="comma-separated external vertex ids, "
                                "'synth-default', or random:<r>:<labels.json>")
            p.add_argument("--k1", type=int)
            p.add_argument("--k2", type=int)
            p.add_argument("--eps", type=float)

    p_synth = sub.add_parser("synth", help="generate the two-cloud benchmark data")
    common(p_synth, graph_input=False, targets=False)
    p_synth.add_argument("--n-points", dest="n_points", type=int)
    p_synth.set_defaults(func=cmd_synth)

    p_build = sub.add_parser("build", help="ingest a graph and report structure")
    common(p_build, targets=False)
    p_build.set_defaults(func=cmd_build)

    p_rom = sub.add_parser("rom", help="run the two-stage reduction")
    common(p_rom)
    p_rom.set_defaults(func=cmd_rom)

    p_rogl = sub.add_parser("rogl", help="build the reduced-order graph-Laplacian")
    common(p_rogl)
    p_rogl.set_defaults(func=cmd_rogl)

    p_cluster = sub.add_parser("cluster", help="cluster the target subset")
    common(p_cluster)
    p_cluster.add_argument("--method", choices=("rvsc", "roglc", "rwnsc"),
                           required=True)
    p_cluster.add_argument("--n-clusters", dest="n_c", type=int)
    p_cluster.add_argument("--embed-dim", dest="n0", type=int)
    p_cluster.add_argument("--n-samples", dest="n_s", type=int)
    p_cluster.add_argument("--restarts", type=int)
    p_cluster.add_argument("--reference", help="reference labels.json to compare")
    p_cluster.set_defaults(func=cmd_cluster)

    p_dist = sub.add_parser("distances", help="full vs reduced distance tables")
    common(p_dist)
    p_dist.add_argument("--p-values", dest="p_values", type=int, nargs="+")
    p_dist.set_defaults(func=cmd_distances)

    p_sweep = sub.add_parser("sweep", help="error vs k2 sweep")
    common(p_sweep)
    p_sweep.add_argument("--p-values", dest="p_values", type=int, nargs="+")
    p_sweep.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except AssumptionError as exc:
        print(f"assumption failure: {exc}", file=sys.stderr)
        return ASSUMPTION_ERROR
    except GraphValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return IO_ERROR


if __name__ == "__main__":
    sys.exit(main())
