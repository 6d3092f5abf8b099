"""Experiment orchestration and on-disk serialization.

Every output file is a pure function of (config, seed): no timestamps, no
machine identifiers, floats written with shortest round-trip repr. The run
manifest records SHA-256 hashes of all emitted files so reruns can be
checked byte for byte.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import hashlib
import json
import os
import statistics
from dataclasses import dataclass

import numpy as np

from . import dynamics as dyn
from . import ingest as ingest_mod
from . import metrics as metrics_mod
from . import synthgen
from . import theory
from .config import ExperimentConfig

WORKERS_ENV = "SOCIALREC_WORKERS"

# seed-stream tags for world construction; dynamics owns tags 1 and 2
_GRAPH_STREAM = 11
_USER_OPINION_STREAM = 12
_CREATOR_OPINION_STREAM = 13
_PARAM_STREAM = 14
_CENTER_STREAM = 15
_COMMUNITY_STREAM = 16


class RunnerError(RuntimeError):
    pass


def _stream(seed, tag):
    return np.random.default_rng(np.random.SeedSequence((seed, tag)))


@dataclass
class World:
    graph: object
    users: dyn.UserPopulation
    creators: dyn.CreatorPopulation
    id_map: dict | None = None
    communities: object | None = None


def build_world(config: ExperimentConfig) -> World:
    """Construct graph, populations and parameters from a config."""
    seed = config.seed
    source = config.graph_source
    id_map = None
    communities = None

    if source.kind == "homophily":
        u0 = synthgen.init_opinions_uniform(
            config.n_users, config.n_topics, _stream(seed, _USER_OPINION_STREAM)
        )
        graph = synthgen.generate_homophily_graph(u0, source.delta, _stream(seed, _GRAPH_STREAM))
    else:
        graph, id_map = ingest_mod.load_edge_list(source.path)
        communities = ingest_mod.spectral_communities(
            graph, source.n_communities, seed=seed
        )
        communities.centers = ingest_mod.sample_community_centers(
            source.n_communities, config.n_topics, _stream(seed, _CENTER_STREAM)
        )
        u0 = ingest_mod.init_opinions_from_communities(
            communities, _stream(seed, _COMMUNITY_STREAM), sigma=source.sigma
        )

    user_params, creator_params, graph = synthgen.sample_params(
        graph, config.n_creators, _stream(seed, _PARAM_STREAM), mode=config.sampling_mode
    )
    c0 = synthgen.init_opinions_uniform(
        config.n_creators, config.n_topics, _stream(seed, _CREATOR_OPINION_STREAM)
    )

    users = dyn.UserPopulation(
        opinions=u0, prejudices=u0.copy(),
        stubbornness=user_params.stubbornness,
        recommender_influence=user_params.recommender_influence,
    )
    creators = dyn.CreatorPopulation(
        opinions=c0, prejudices=c0.copy(),
        stubbornness=creator_params.stubbornness,
        self_influence=creator_params.self_influence,
        audience_influence=creator_params.audience_influence,
    )
    return World(graph=graph, users=users, creators=creators,
                 id_map=id_map, communities=communities)


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


METRICS_HEADER = (
    "t", "sat_running", "sat_instant", "neg_clusterization",
    "chosen_k", "sat_variance", "sil_variance",
)


def _metrics_rows(series):
    for row in series:
        yield (row.t, row.sat_running, row.sat_instant, -row.clusterization,
               row.chosen_k, row.sat_variance, row.sil_variance)


def _snapshot_rows(traj, times):
    for t in times:
        for i, point in enumerate(traj.user_opinions[t]):
            yield (t, "user", i, *point)
        for j, point in enumerate(traj.creator_opinions[t]):
            yield (t, "creator", j, *point)


def run(config: ExperimentConfig, outdir) -> str:
    """Execute one simulation and write all artifacts into outdir."""
    os.makedirs(outdir, exist_ok=True)
    world = build_world(config)
    traj = dyn.simulate(
        world.graph, world.users, world.creators, config.rs,
        config.horizon, config.seed, metrics_every=config.metrics_every,
    )

    files = {}

    config_path = os.path.join(outdir, "config.json")
    with open(config_path, "w") as fh:
        fh.write(config.to_json())
    files["config.json"] = config_path

    metrics_path = os.path.join(outdir, "metrics.csv")
    _write_csv(metrics_path, METRICS_HEADER, _metrics_rows(traj.metrics))
    files["metrics.csv"] = metrics_path

    coord_cols = tuple(f"x{i}" for i in range(config.n_topics))
    snapshot_path = os.path.join(outdir, "snapshots.csv")
    _write_csv(
        snapshot_path, ("t", "agent_kind", "agent_id", *coord_cols),
        _snapshot_rows(traj, config.snapshot_times),
    )
    files["snapshots.csv"] = snapshot_path

    cluster_path = os.path.join(outdir, "clusters.csv")
    cluster_rows = []
    for t in config.snapshot_times:
        cl = metrics_mod.global_clusterization(
            traj.user_opinions[t], dyn.metrics_seed(config.seed, t)
        )
        for i in range(world.users.n_users):
            cluster_rows.append(
                (t, i, int(cl.model.labels[i]), cl.silhouettes[i], cl.value, cl.chosen_k)
            )
    _write_csv(
        cluster_path,
        ("t", "user_id", "cluster", "silhouette", "global_clusterization", "chosen_k"),
        cluster_rows,
    )
    files["clusters.csv"] = cluster_path

    consumption_path = os.path.join(outdir, "consumption.csv")
    _write_csv(
        consumption_path, ("t", "user_id", "creator_id", "distance"),
        traj.consumption_records(),
    )
    files["consumption.csv"] = consumption_path

    if world.id_map is not None:
        map_path = os.path.join(outdir, "id_map.csv")
        _write_csv(
            map_path, ("original_id", "dense_index"),
            sorted(world.id_map.items(), key=lambda kv: kv[1]),
        )
        files["id_map.csv"] = map_path

    manifest = {
        "schema": 1,
        "seed": config.seed,
        "effective": {
            "n_users": world.users.n_users,
            "n_creators": world.creators.n_creators,
            "n_topics": world.users.n_topics,
            "horizon": config.horizon,
            "n_edges": world.graph.n_edges,
            "average_in_degree": world.graph.average_in_degree(),
        },
        "hashes": {name: _sha256(path) for name, path in sorted(files.items())},
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return outdir


def _worker_count():
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def _final_metrics(config: ExperimentConfig):
    """Run one cell in memory and return its final metrics row."""
    world = build_world(config)
    traj = dyn.simulate(
        world.graph, world.users, world.creators, config.rs,
        config.horizon, config.seed,
        metrics_every=max(1, config.horizon),
    )
    return traj.metrics.rows[-1]


def _sweep(config, field, values, seeds, outdir):
    """Shared machinery for d- and k-sweeps: one run per (value, seed)."""
    os.makedirs(outdir, exist_ok=True)
    cells = [(v, s) for v in values for s in seeds]

    def cell_config(value, seed):
        return config.replace(rs=dataclasses.replace(config.rs, **{field: value}), seed=seed)

    results = {}
    workers = _worker_count()
    if workers == 1:
        for v, s in cells:
            results[(v, s)] = _final_metrics(cell_config(v, s))
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_final_metrics, cell_config(v, s)): (v, s) for v, s in cells}
            for fut in concurrent.futures.as_completed(futures):
                results[futures[fut]] = fut.result()

    long_rows = []
    for v in values:
        for s in seeds:
            row = results[(v, s)]
            long_rows.append((
                v, s, row.sat_running, -row.clusterization,
                row.chosen_k, row.sat_variance, row.sil_variance,
            ))
    long_path = os.path.join(outdir, "sweep.csv")
    _write_csv(
        long_path,
        (field, "seed", "sat_running", "neg_clusterization",
         "chosen_k", "sat_variance", "sil_variance"),
        long_rows,
    )

    summary_rows = []
    for v in values:
        sats = [results[(v, s)].sat_running for s in seeds]
        cls_ = [results[(v, s)].clusterization for s in seeds]
        summary_rows.append((
            v,
            statistics.median(sats),
            statistics.pvariance(sats) if len(sats) > 1 else 0.0,
            statistics.median([-c for c in cls_]),
            statistics.pvariance(cls_) if len(cls_) > 1 else 0.0,
        ))
    summary_path = os.path.join(outdir, "summary.csv")
    _write_csv(
        summary_path,
        (field, "sat_median", "sat_seed_variance",
         "neg_clusterization_median", "clusterization_seed_variance"),
        summary_rows,
    )
    return {"sweep": long_path, "summary": summary_path,
            "results": {key: results[key] for key in sorted(results)}}


def sweep_d(config, d_values, seeds, outdir):
    """Final satisfaction/clusterization per (d, seed) plus per-d summary."""
    return _sweep(config, "d", list(d_values), list(seeds), outdir)


def sweep_k(config, k_values, seeds, outdir):
    """Same trade-off table with the candidate set size varied instead."""
    return _sweep(config, "k", list(k_values), list(seeds), outdir)


VERIFY_SUITES = ("theorem1", "lemma1", "alpha", "complementarity")


def verify(suite, seed=0):
    """Run the selected oracle suites; returns a JSON-serializable report."""
    suites = VERIFY_SUITES if suite == "all" else (suite,)
    unknown = [s for s in suites if s not in VERIFY_SUITES]
    if unknown:
        raise RunnerError(f"unknown verify suite {unknown[0]!r}; "
                          f"choose from {VERIFY_SUITES + ('all',)}")

    report = {"suites": {}, "passed": True}
    for name in suites:
        if name == "theorem1":
            checks = [theory.frozen_equilibrium_check(seed=seed + i) for i in range(20)]
            passed = all(c["passed"] for c in checks)
            detail = {"max_gap": max(c["max_gap"] for c in checks), "instances": len(checks)}
        elif name == "lemma1":
            checks = [theory.lemma1_scenario_check(seed=seed + i) for i in range(5)]
            passed = all(c["passed"] for c in checks)
            detail = {"runs": checks}
        elif name == "alpha":
            passed = True
            worst_drop = 0.0
            for eta in np.arange(0.1, 0.95, 0.1):
                eta = round(float(eta), 10)
                for alpha0 in np.linspace(eta, 1.0, 100):
                    trace = theory.alpha_recursion(eta, float(alpha0), 200)
                    drops = np.diff(trace.values).min()
                    worst_drop = min(worst_drop, float(drops))
                    if drops < 0:
                        passed = False
                fixed_lo = theory.alpha_recursion(eta, eta, 50)
                fixed_hi = theory.alpha_recursion(eta, 1.0, 50)
                if not (np.all(fixed_lo.values == eta) and np.all(fixed_hi.values == 1.0)):
                    passed = False
            detail = {"worst_increment": worst_drop}
        else:  # complementarity
            graph, users, creators, partition = theory.random_frozen_instance(
                3, 2, 2, seed, edge_prob=0.9
            )
            baseline = theory.complementarity_check(graph, users, creators, partition, 0.0)
            shifted = theory.complementarity_check(graph, users, creators, partition, 0.05)
            passed = baseline["passed"] and shifted["passed"]
            detail = {"epsilon_zero": baseline, "epsilon_0.05": shifted}
        report["suites"][name] = {"passed": bool(passed), "detail": detail}
        report["passed"] = report["passed"] and bool(passed)
    return report
