"""Command-line harness: build, query, sweep, optimize."""

from __future__ import annotations

import json
import sys
from collections import Counter
from pathlib import Path

import click
import numpy as np

from . import bench
from .errors import TieredAnnError
from .hnsw import HnswIndex, SearchParams
from .ingest import TextStore, ingest_stream, load_index, save_index
from .store import DiskBackend, TieredVectorStore

UNBOUNDED = 2 ** 62


def _load_snapshot(snapshot: str, tier1: int, tier2: int, split_ratio: float,
                   t_tx_ms: float, t_item_ms: float):
    index, vector_ref = load_index(snapshot)
    payload_path = Path(snapshot).parent / vector_ref
    ids, mat = bench.load_payload_file(payload_path)
    store = bench.simulated_store_from_payloads(
        ids, mat, tier1, tier2, t_tx_ms=t_tx_ms, t_item_ms=t_item_ms,
        split_ratio=split_ratio)
    return index, store, ids, mat


@click.group()
def main():
    """Storage-aware ANN search over a tiered cache hierarchy."""


@main.command()
@click.argument("input_jsonl", type=click.Path(exists=True, dir_okay=False))
@click.argument("snapshot", type=click.Path(dir_okay=False))
@click.option("--m", default=16, show_default=True)
@click.option("--ef-construction", default=100, show_default=True)
@click.option("--metric", type=click.Choice(["cosine", "euclidean"]),
              default="cosine", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--chunk-size", default=1000, show_default=True)
@click.option("--dimension", default=None, type=int,
              help="Embedding dimension; inferred from the first record if omitted.")
def build(input_jsonl, snapshot, m, ef_construction, metric, seed, chunk_size,
          dimension):
    """Ingest a JSONL corpus and write an index snapshot."""
    snapshot = Path(snapshot)
    if dimension is None:
        with open(input_jsonl) as fh:
            for line in fh:
                if line.strip():
                    dimension = len(json.loads(line)["embedding"])
                    break
        if dimension is None:
            raise click.ClickException("input file is empty; pass --dimension")
    index = HnswIndex(dimension, m=m, ef_construction=ef_construction,
                      metric=metric, seed=seed)
    vec_path = snapshot.with_suffix(snapshot.suffix + ".vec")
    txt_path = snapshot.with_suffix(snapshot.suffix + ".txt")
    backend = DiskBackend(vec_path, dimension, create=True)
    store = TieredVectorStore(backend, UNBOUNDED, 0)
    text_store = TextStore(txt_path)
    with open(input_jsonl) as fh:
        count = ingest_stream(fh, index, store, text_store,
                              chunk_size=chunk_size)
    backend.close()
    text_store.close()
    save_index(index, snapshot, vector_ref=vec_path.name)
    hist = Counter(index.node_level.values())
    click.echo(json.dumps({
        "ingested": count,
        "max_level": index.max_level,
        "level_histogram": {str(k): hist[k] for k in sorted(hist)},
        "snapshot": str(snapshot),
    }, indent=2))


@main.command()
@click.argument("snapshot", type=click.Path(exists=True, dir_okay=False))
@click.argument("queries_jsonl", type=click.Path(exists=True, dir_okay=False))
@click.option("--k", default=10, show_default=True)
@click.option("--ef", default=64, show_default=True)
@click.option("--tier1", default=None, type=int)
@click.option("--tier2", default=None, type=int)
@click.option("--split-ratio", default=0.5, show_default=True)
@click.option("--t-tx-ms", default=10.0, show_default=True)
@click.option("--t-item-ms", default=0.01, show_default=True)
@click.option("--policy", type=click.Choice(bench.POLICIES), default="lazy",
              show_default=True)
def query(snapshot, queries_jsonl, k, ef, tier1, tier2, split_ratio,
          t_tx_ms, t_item_ms, policy):
    """Run queries from a JSONL file of {"embedding": [...]} records."""
    index, store, _, _ = _load_snapshot(
        snapshot, tier1 if tier1 is not None else UNBOUNDED,
        tier2 or 0, split_ratio, t_tx_ms, t_item_ms)
    txt_path = Path(snapshot).with_suffix(Path(snapshot).suffix + ".txt")
    text_store = TextStore.open(txt_path) if txt_path.exists() else None
    params = SearchParams(k=k, ef=ef)
    out = []
    with open(queries_jsonl) as fh:
        for line in fh:
            if not line.strip():
                continue
            q = np.asarray(json.loads(line)["embedding"], dtype=np.float32)
            results, stats = bench.run_query(index, q, params, store, policy,
                                             text_store=text_store)
            out.append({
                "results": [
                    {"id": r.vector_id, "distance": r.distance,
                     **({"text": r.text} if r.text is not None else {})}
                    for r in results
                ],
                "stats": {
                    "n_q": stats.n_q, "n_db": stats.n_db,
                    "items_fetched": stats.items_fetched,
                    "storage_ms": stats.storage_ms,
                    "compute_ms": stats.compute_ms,
                    "distance_ms": stats.distance_ms,
                    "t_query_ms": stats.t_query_ms,
                },
            })
    click.echo(json.dumps(out, indent=2))


@main.command()
@click.argument("snapshot", type=click.Path(exists=True, dir_okay=False))
@click.option("--ratios", default="0.2,0.5,0.9,0.96,1.0", show_default=True)
@click.option("--queries", default=100, show_default=True)
@click.option("--ef", default=64, show_default=True)
@click.option("--k", default=10, show_default=True)
@click.option("--policy", type=click.Choice(bench.POLICIES), default="lazy",
              show_default=True)
@click.option("--prefetch-size", default=64, show_default=True)
@click.option("--split-ratio", default=0.5, show_default=True)
@click.option("--t-tx-ms", default=10.0, show_default=True)
@click.option("--t-item-ms", default=0.01, show_default=True)
@click.option("--seed", default=1, show_default=True)
@click.option("--query-mode", type=click.Choice(["perturb", "gaussian"]),
              default="perturb", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]),
              default="csv", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write the report here instead of stdout.")
def sweep(snapshot, ratios, queries, ef, k, policy, prefetch_size,
          split_ratio, t_tx_ms, t_item_ms, seed, query_mode, fmt, out):
    """Memory-data ratio sweep on the simulated backend."""
    try:
        ratio_list = [float(r) for r in ratios.split(",") if r]
    except ValueError:
        raise click.ClickException(f"invalid --ratios value: {ratios!r}")
    index, store, ids, mat = _load_snapshot(snapshot, 1, 0, split_ratio,
                                            t_tx_ms, t_item_ms)
    config = bench.SweepConfig(ratios=ratio_list, queries=queries, ef=ef, k=k,
                               policy=policy, prefetch_size=prefetch_size,
                               split_ratio=split_ratio, seed=seed,
                               query_mode=query_mode)
    qs = bench.make_queries(mat, queries, seed=seed, mode=query_mode)
    report = bench.run_sweep(index, store, qs, config)
    text = report.to_csv() if fmt == "csv" else report.to_json()
    if out:
        Path(out).write_text(text)
        click.echo(f"wrote {out}")
    else:
        click.echo(text, nl=False)


@main.command()
@click.argument("snapshot", type=click.Path(exists=True, dir_okay=False))
@click.option("--p", default=0.8, show_default=True)
@click.option("--t-theta-ms", default=100.0, show_default=True)
@click.option("--queries", default=32, show_default=True,
              help="Probe workload size per optimizer step.")
@click.option("--ef", default=64, show_default=True)
@click.option("--k", default=10, show_default=True)
@click.option("--split-ratio", default=0.5, show_default=True)
@click.option("--t-tx-ms", default=10.0, show_default=True)
@click.option("--t-item-ms", default=0.01, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--max-probes", default=10, show_default=True)
def optimize(snapshot, p, t_theta_ms, queries, ef, k, split_ratio,
             t_tx_ms, t_item_ms, seed, max_probes):
    """Find the minimum cache budget preserving query latency."""
    index, store, ids, mat = _load_snapshot(snapshot, 1, 0,
                                            split_ratio, t_tx_ms, t_item_ms)
    store.set_budget(len(index), split_ratio)
    probe_queries = bench.make_queries(mat, queries, seed=seed)
    result = bench.run_optimize(index, store, probe_queries, p=p,
                                t_theta_ms=t_theta_ms, ef=ef, k=k,
                                max_probes=max_probes)
    click.echo(bench.optimizer_report_json(result))


def entry() -> int:
    try:
        main(standalone_mode=False)
    except TieredAnnError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.Abort:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(entry())
