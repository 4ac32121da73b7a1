"""Command-line entry points.

Subcommands: offline-ablation, online-run, workload-gen, diagnose-distances,
oracle-check. Each takes --config <file> (TOML or JSON), --out <dir>, and
--seed-offset <int>. Exit codes: 0 success, 2 config error, 3 run failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover - py310 path
    import tomli as tomllib

from . import harness, workload
from .cache_core import DiscreteInstance, brute_force_oracle, reverse_greedy
from .cost_model import MismatchFn
from .embfile import load_embedding_file, write_embedding_file
from .geometry import distance_diagnostics, normalize
from .harness import ExperimentSpec, SpecError
from .workload import SyntheticSpec, TraceSource, TraceSpec

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUN = 3


def load_config(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise SpecError(f"config file not found: {path}")
    if path.suffix.lower() == ".json":
        return json.loads(path.read_text())
    with open(path, "rb") as f:
        return tomllib.load(f)


def _workload_from_config(cfg: dict) -> tuple[SyntheticSpec | None, TraceSpec | None]:
    w = cfg.get("workload", {})
    kind = w.get("kind", "synthetic")
    if kind == "synthetic":
        dim = int(w.get("dim", 384))
        jitter = w.get("jitter_sigma")
        if jitter is None:
            jitter = workload.JITTER_SIGMA_BY_DIM.get(dim)
            if jitter is None:
                raise SpecError(
                    f"no pinned jitter for dim={dim}; set workload.jitter_sigma explicitly"
                )
        spec = SyntheticSpec(
            universe_size_m=int(w.get("universe_size", 50)),
            d_e=dim,
            jitter_sigma=float(jitter),
            token_low_range=tuple(w.get("token_low_range", (3, 15))),
            token_high_range=tuple(w.get("token_high_range", (25, 40))),
            token_mix=float(w.get("token_mix", 0.5)),
            universe_seed=int(w.get("universe_seed", 7)),
            stream_seed=int(w.get("stream_seed", 0)),
        )
        return spec, None
    if kind == "trace":
        sources = []
        for i, src in enumerate(w.get("sources", [])):
            emb = load_embedding_file(src["embedding_file"])
            sources.append(
                TraceSource(
                    pool=emb.coords,
                    popularity_seed=int(src.get("popularity_seed", 1000 + i)),
                    name=src.get("name", f"source{i}"),
                    token_lengths=emb.token_lengths,
                )
            )
        burst = tuple(w.get("burst_length_law", (20, 100)))
        return None, TraceSpec(sources=sources, burst_length_law=burst)
    raise SpecError(f"unknown workload kind {kind!r}")


def _experiment_spec(cfg: dict, setting: str) -> ExperimentSpec:
    syn, trace = _workload_from_config(cfg)
    run = cfg.get("run", {})
    kernel = cfg.get("kernel", {})
    cost = cfg.get("cost", {})
    conf = cfg.get("confidence", {})
    ev = cfg.get("eval", {})
    off = cfg.get("offline", {})
    fr = cfg.get("frozen", {})
    bl_cfg = cfg.get("baselines", {})
    delta = conf.get("delta")
    return ExperimentSpec(
        setting=setting,
        policies=list(run.get("policies", ["cucb_cont"] if setting == harness.OFFLINE else ["clcb_ls_cont"])),
        seeds=list(run.get("seeds", [0])),
        workload=syn,
        trace=trace,
        eps_grid=[float(e) for e in run.get("eps_grid", [run.get("eps", 0.4)])],
        n_grid=[int(n) for n in run.get("n_grid", [run.get("n", 1000)])],
        k_grid=[int(k) for k in run.get("k_grid", [run.get("k", 5)])],
        horizon_T=int(run.get("T", 5000)),
        alpha=float(run.get("alpha", 1.0)),
        zeta=float(cost.get("zeta", 1.0)),
        noise_r=float(cost.get("noise_r", 0.1)),
        noise_clip=bool(cost.get("clip", True)),
        kernel_length_scale=float(kernel.get("length_scale", 0.5)),
        ridge_lambda=float(kernel.get("ridge_lambda", 1.0)),
        rkhs_bound=float(conf.get("rkhs_bound", 1.0)),
        delta=float(delta) if delta is not None else None,
        nu_propensity=float(off.get("nu", 0.5)),
        logging_policy=str(off.get("logging_policy", "bernoulli")),
        logging_cache_size=int(off.get("logging_cache_size", 25)),
        logging_serve_radius=off.get("logging_serve_radius"),
        eps_eval=float(ev.get("eps_eval", 0.15)),
        weight_samples=int(ev.get("weight_samples", 100_000)),
        epsilon_explore=float(bl_cfg.get("epsilon_explore", 0.1)),
        recompute_period=int(bl_cfg.get("recompute_period", 1)),
        frozen_Lg=float(fr.get("lipschitz_Lg", 1.0)),
        frozen_Cp=float(fr.get("pool_Cp", 1.0)),
        write_series=bool(run.get("write_series", False)),
        write_traces=bool(run.get("write_traces", False)),
    )


def cmd_offline_ablation(cfg: dict, out: Path, seed_offset: int) -> int:
    spec = _experiment_spec(cfg, harness.OFFLINE)
    _, failures = harness.run_experiment(spec, out, seed_offset)
    if failures:
        print(f"{len(failures)} cell(s) failed:", file=sys.stderr)
        for f in failures:
            print(f"  {f}", file=sys.stderr)
        return EXIT_RUN
    return EXIT_OK


def cmd_online_run(cfg: dict, out: Path, seed_offset: int) -> int:
    spec = _experiment_spec(cfg, harness.ONLINE)
    _, failures = harness.run_experiment(spec, out, seed_offset)
    if failures:
        print(f"{len(failures)} cell(s) failed:", file=sys.stderr)
        for f in failures:
            print(f"  {f}", file=sys.stderr)
        return EXIT_RUN
    return EXIT_OK


def cmd_workload_gen(cfg: dict, out: Path, seed_offset: int) -> int:
    syn, trace = _workload_from_config(cfg)
    out.mkdir(parents=True, exist_ok=True)
    run = cfg.get("run", {})
    length = int(run.get("T", run.get("n", 1000)))
    if syn is not None:
        syn = SyntheticSpec(**{**syn.__dict__, "stream_seed": syn.stream_seed + seed_offset})
        universe, lens = workload.gen_synthetic_universe(syn)
        write_embedding_file(out / "universe.semc", universe, lens)
        rng = np.random.default_rng(syn.stream_seed)
        queries, idx = workload.synthetic_stream(syn, universe, rng, length)
        np.save(out / "stream_queries.npy", queries)
        manifest = {
            "kind": "synthetic",
            "spec": {k: (list(v) if isinstance(v, tuple) else v) for k, v in syn.__dict__.items()},
            "length": length,
            "universe_file": "universe.semc",
            "universe_index_counts": np.bincount(idx, minlength=syn.universe_size_m).tolist(),
        }
    else:
        rng = np.random.default_rng(seed_offset)
        queries, srcs, idx = workload.trace_stream(trace, rng, length)
        np.save(out / "stream_queries.npy", queries)
        manifest = {
            "kind": "trace",
            "length": length,
            "burst_length_law": list(trace.burst_length_law),
            "sources": [s.name for s in trace.sources],
            "source_counts": np.bincount(srcs, minlength=len(trace.sources)).tolist(),
        }
    with open(out / "stream_manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return EXIT_OK


def cmd_diagnose_distances(cfg: dict, out: Path, seed_offset: int) -> int:
    syn, trace = _workload_from_config(cfg)
    out.mkdir(parents=True, exist_ok=True)
    run = cfg.get("run", {})
    length = int(run.get("sample_size", 1000))
    if syn is not None:
        syn = SyntheticSpec(**{**syn.__dict__, "stream_seed": syn.stream_seed + seed_offset})
        universe, _ = workload.gen_synthetic_universe(syn)
        rng = np.random.default_rng(syn.stream_seed)
        queries, _ = workload.synthetic_stream(syn, universe, rng, length)
        stats = distance_diagnostics(queries, universe)
        stats_u = distance_diagnostics(universe)
        payload = {"stream": stats.as_dict(), "universe": stats_u.as_dict()}
    else:
        rng = np.random.default_rng(seed_offset)
        queries, _, _ = workload.trace_stream(trace, rng, length)
        pool = np.vstack([s.pool for s in trace.sources])
        stats = distance_diagnostics(queries, pool)
        payload = {"stream": stats.as_dict()}
    with open(out / "distance_stats.json", "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
    print(json.dumps(payload["stream"]["nearest_neighbor"]))
    return EXIT_OK


def cmd_oracle_check(cfg: dict, out: Path, seed_offset: int) -> int:
    run = cfg.get("run", {})
    n_instances = int(run.get("instances", 100))
    max_m = int(run.get("max_m", 8))
    max_k = int(run.get("max_k", 3))
    rng = np.random.default_rng(int(run.get("seed", 0)) + seed_offset)
    out.mkdir(parents=True, exist_ok=True)
    worst = 1.0
    rows = []
    for i in range(n_instances):
        m = int(rng.integers(2, max_m + 1))
        k = int(rng.integers(1, min(max_k, m) + 1))
        cand = normalize(rng.standard_normal((m, int(run.get("dim", 4)))))
        w = rng.dirichlet(np.ones(m))
        c = rng.uniform(0.05, 1.0, size=m)
        inst = DiscreteInstance(cand, w, c, MismatchFn(float(rng.choice([0.5, 1.0, 2.0]))))
        rg = reverse_greedy(inst, k)
        bf = brute_force_oracle(inst, k)
        ratio = rg.loss / bf.loss if bf.loss > 0 else 1.0
        worst = max(worst, ratio)
        rows.append({"instance": i, "m": m, "k": k, "ratio": ratio})
    with open(out / "oracle_check.json", "w") as f:
        json.dump({"instances": rows, "worst_ratio": worst}, f, indent=2)
    print(f"worst reverse-greedy/brute-force ratio over {n_instances} instances: {worst:.6f}")
    return EXIT_OK


COMMANDS = {
    "offline-ablation": cmd_offline_ablation,
    "online-run": cmd_online_run,
    "workload-gen": cmd_workload_gen,
    "diagnose-distances": cmd_diagnose_distances,
    "oracle-check": cmd_oracle_check,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="semcache", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--seed-offset", type=int, default=0)
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except (SpecError, json.JSONDecodeError, tomllib.TOMLDecodeError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg, Path(args.out), args.seed_offset)
    except (SpecError, ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"run failure: {exc}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
