"""Command-line interface: generate, simulate, sweep, ingest, verify."""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import ingest as ingest_mod
from . import runner
from .config import ConfigError, ExperimentConfig


def _add_config_flags(parser):
    parser.add_argument("--config", help="JSON config file; flags override its fields")
    parser.add_argument("--n-users", type=int)
    parser.add_argument("--n-creators", type=int)
    parser.add_argument("--n-topics", type=int)
    parser.add_argument("--horizon", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--d", type=int, help="recommender hop depth (0 = greedy)")
    parser.add_argument("--k", type=int, help="candidate set size")
    parser.add_argument("--temperature", type=float)
    parser.add_argument("--score-basis", choices=("distance_to_user", "distance_to_reference"))
    parser.add_argument("--delta", type=float, help="homophily connectivity parameter")
    parser.add_argument("--edges", help="edge-list path (switches to the edge_list source)")
    parser.add_argument("--communities", type=int, help="spectral community count")
    parser.add_argument("--sigma", type=float, help="community opinion noise std")
    parser.add_argument("--parameter-mode", choices=("table1", "table4"))
    parser.add_argument("--metrics-every", type=int)
    parser.add_argument("--snapshot-times", help="comma-separated list of t values")


def _config_from_args(args):
    config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()

    updates = {}
    for flag, field in (
        ("n_users", "n_users"), ("n_creators", "n_creators"), ("n_topics", "n_topics"),
        ("horizon", "horizon"), ("seed", "seed"),
        ("parameter_mode", "parameter_mode"), ("metrics_every", "metrics_every"),
    ):
        value = getattr(args, flag)
        if value is not None:
            updates[field] = value
    if args.snapshot_times is not None:
        updates["snapshot_times"] = tuple(
            int(tok) for tok in args.snapshot_times.split(",") if tok.strip()
        )

    rs_updates = {}
    for flag, field in (("d", "d"), ("k", "k"), ("temperature", "temperature"),
                        ("score_basis", "score_basis")):
        value = getattr(args, flag)
        if value is not None:
            rs_updates[field] = value
    if rs_updates:
        updates["rs"] = dataclasses.replace(config.rs, **rs_updates)

    gs_updates = {}
    if args.edges is not None:
        gs_updates.update(kind="edge_list", path=args.edges)
        if args.parameter_mode is None and args.config is None:
            updates["parameter_mode"] = "table4"  # real-data sampling default
    if args.delta is not None:
        gs_updates["delta"] = args.delta
    if args.communities is not None:
        gs_updates["n_communities"] = args.communities
    if args.sigma is not None:
        gs_updates["sigma"] = args.sigma
    if gs_updates:
        updates["graph_source"] = dataclasses.replace(config.graph_source, **gs_updates)

    return config.replace(**updates) if updates else config


def _parse_values(text):
    return [int(tok) for tok in text.split(",") if tok.strip()]


def cmd_generate(args):
    config = _config_from_args(args)
    world = runner.build_world(config)
    os.makedirs(args.out, exist_ok=True)

    coord = tuple(f"x{i}" for i in range(world.users.n_topics))
    runner._write_csv(
        os.path.join(args.out, "user_opinions.csv"), ("user_id", *coord),
        ((i, *row) for i, row in enumerate(world.users.opinions)),
    )
    runner._write_csv(
        os.path.join(args.out, "creator_opinions.csv"), ("creator_id", *coord),
        ((j, *row) for j, row in enumerate(world.creators.opinions)),
    )
    runner._write_csv(
        os.path.join(args.out, "user_params.csv"),
        ("user_id", "stubbornness", "self_influence", "recommender_influence"),
        ((i, world.users.stubbornness[i], world.graph.self_weights[i],
          world.users.recommender_influence[i]) for i in range(world.users.n_users)),
    )
    runner._write_csv(
        os.path.join(args.out, "creator_params.csv"),
        ("creator_id", "stubbornness", "self_influence", "audience_influence"),
        ((j, world.creators.stubbornness[j], world.creators.self_influence[j],
          world.creators.audience_influence[j]) for j in range(world.creators.n_creators)),
    )
    runner._write_csv(
        os.path.join(args.out, "edges.csv"), ("source", "target", "weight"),
        zip(world.graph.edge_src, world.graph.edge_dst, world.graph.edge_weights),
    )
    with open(os.path.join(args.out, "config.json"), "w") as fh:
        fh.write(config.to_json())
    print(f"population written to {args.out} "
          f"(N={world.users.n_users}, M={world.creators.n_creators}, "
          f"mean in-degree {world.graph.average_in_degree():.2f})")
    return 0


def cmd_simulate(args):
    config = _config_from_args(args)
    outdir = runner.run(config, args.out)
    print(f"run written to {outdir}")
    return 0


def cmd_sweep(args):
    config = _config_from_args(args)
    seeds = _parse_values(args.seeds)
    if args.k_values:
        result = runner.sweep_k(config, _parse_values(args.k_values), seeds, args.out)
    else:
        result = runner.sweep_d(config, _parse_values(args.d_values), seeds, args.out)
    print(f"sweep written to {result['sweep']}, summary to {result['summary']}")
    return 0


def cmd_ingest(args):
    graph, id_map = ingest_mod.load_edge_list(args.edges)
    os.makedirs(args.out, exist_ok=True)
    runner._write_csv(
        os.path.join(args.out, "id_map.csv"), ("original_id", "dense_index"),
        sorted(id_map.items(), key=lambda kv: kv[1]),
    )
    stats = {
        "n_users": graph.n_users,
        "n_directed_edges": graph.n_edges,
        "average_degree": graph.average_in_degree(),
    }
    communities = None
    if args.communities:
        communities = ingest_mod.spectral_communities(graph, args.communities, seed=args.seed)
        runner._write_csv(
            os.path.join(args.out, "communities.csv"), ("user_id", "community"),
            enumerate(communities.labels),
        )
        sizes = np.bincount(communities.labels, minlength=args.communities)
        stats["communities"] = args.communities
        stats["nonempty_communities"] = int((sizes > 0).sum())
        centers = ingest_mod.sample_community_centers(
            args.communities, args.n_topics,
            np.random.default_rng(np.random.SeedSequence((args.seed, 15))),
        )
        communities.centers = centers
        opinions = ingest_mod.init_opinions_from_communities(
            communities, np.random.default_rng(np.random.SeedSequence((args.seed, 16))),
            sigma=args.sigma,
        )
        coord = tuple(f"x{i}" for i in range(args.n_topics))
        runner._write_csv(
            os.path.join(args.out, "user_opinions.csv"), ("user_id", *coord),
            ((i, *row) for i, row in enumerate(opinions)),
        )
    with open(os.path.join(args.out, "stats.json"), "w") as fh:
        json.dump(stats, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(stats, indent=2, sort_keys=True))
    return 0


def cmd_verify(args):
    try:
        report = runner.verify(args.suite, seed=args.seed)
    except runner.RunnerError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    text = json.dumps(report, indent=2, sort_keys=True, default=_json_default)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0 if report["passed"] else 1


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="socialrec",
        description="Closed-loop simulator of users, content creators and a recommender",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="emit a synthetic population to files")
    _add_config_flags(p_gen)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=cmd_generate)

    p_sim = sub.add_parser("simulate", help="run one experiment")
    _add_config_flags(p_sim)
    p_sim.add_argument("--out", required=True)
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="trade-off sweep over d or k")
    _add_config_flags(p_sweep)
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--d-values", default="0,3,6")
    p_sweep.add_argument("--k-values", help="sweep k instead of d")
    p_sweep.add_argument("--seeds", default="0,1,2,3,4")
    p_sweep.set_defaults(func=cmd_sweep)

    p_ing = sub.add_parser("ingest", help="load an edge list and seed opinions")
    p_ing.add_argument("--edges", required=True)
    p_ing.add_argument("--out", required=True)
    p_ing.add_argument("--communities", type=int, default=0)
    p_ing.add_argument("--n-topics", type=int, default=3)
    p_ing.add_argument("--sigma", type=float, default=0.15)
    p_ing.add_argument("--seed", type=int, default=0)
    p_ing.set_defaults(func=cmd_ingest)

    p_ver = sub.add_parser("verify", help="run the numerical oracle suites")
    p_ver.add_argument("--suite", default="all")
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument("--out", help="also write the JSON report here")
    p_ver.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
