"""``nlbi`` command line: gen, build, query, bench, verify.

Exit codes: 0 success, 1 verification failure, 2 usage or input error.
"""

import csv
import hashlib
import json
import sys

import click

from .distributions import CorpusSpec, DatasetError, generate_synthetic, load_dataset, write_dataset
from .index import IndexFormatError, NormalIndex, describe
from .oracle import oracle_knn
from .query import batch_query
from .verification import verify_file


class InputError(click.ClickException):
    exit_code = 2


def _int_list(text):
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise click.BadParameter("values must be positive integers")
    return vals


def _load_index(path):
    try:
        return NormalIndex.load(path)
    except (OSError, IndexFormatError) as exc:
        raise InputError(f"cannot read index {path}: {exc}") from None


def _load_queries(path, index, renormalize):
    try:
        queries = load_dataset(path, renormalize=renormalize)
    except (OSError, DatasetError) as exc:
        raise InputError(f"cannot read queries {path}: {exc}") from None
    if not queries:
        raise InputError("query file holds no distributions")
    if queries[0].d != index.d:
        raise InputError(f"queries have d={queries[0].d}, index has d={index.d}")
    return queries


def _check_k(k, index):
    if k > len(index):
        raise InputError(f"k={k} exceeds the number of indexed objects ({len(index)})")


@click.group()
def main():
    """Exact EMD k-NN search with normal lower bounds."""


@main.command()
@click.option("--n-dists", type=int, required=True)
@click.option("--bins", type=int, default=16, show_default=True)
@click.option("--dim", type=int, default=2, show_default=True)
@click.option("--layout", type=click.Choice(["grid", "scatter"]), default="grid", show_default=True)
@click.option("--clusters", type=int, default=1, show_default=True)
@click.option("--spread", type=float, default=0.15, show_default=True)
@click.option("--blobs", type=int, default=2, show_default=True)
@click.option("--shapes", default="round", show_default=True,
              help="comma list of cluster shapes: round, elongated")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("-o", "--out", type=click.Path(dir_okay=False), required=True)
def gen(n_dists, bins, dim, layout, clusters, spread, blobs, shapes, seed, out):
    """Write a synthetic clustered corpus."""
    for name, val in (("--n-dists", n_dists), ("--bins", bins), ("--dim", dim),
                      ("--clusters", clusters), ("--blobs", blobs)):
        if val < 1:
            raise click.UsageError(f"{name} must be positive")
    shape_list = tuple(s.strip() for s in shapes.split(",") if s.strip())
    if not shape_list or any(s not in ("round", "elongated") for s in shape_list):
        raise click.UsageError(f"unknown shape list {shapes!r}")
    spec = CorpusSpec(n_dists, bins=bins, dim=dim, layout=layout, clusters=clusters,
                      spread=spread, blobs=blobs, shapes=shape_list)
    write_dataset(out, generate_synthetic(spec, seed))
    click.echo(f"wrote {n_dists} distributions to {out}")


@main.command()
@click.argument("dataset", type=click.Path(dir_okay=False))
@click.option("-o", "--out", type=click.Path(dir_okay=False), required=True)
@click.option("--projections", type=int, default=None, help="default 2 when d >= 2, else 1")
@click.option("--sub-intervals", type=int, default=None, help="default round(ln n)")
@click.option("--node-capacity", type=int, default=100, show_default=True)
@click.option("--renormalize", is_flag=True, help="rescale weights that do not sum to 1")
def build(dataset, out, projections, sub_intervals, node_capacity, renormalize):
    """Build an index file from a dataset."""
    try:
        data = load_dataset(dataset, renormalize=renormalize)
    except (OSError, DatasetError) as exc:
        raise InputError(f"cannot read dataset {dataset}: {exc}") from None
    if not data:
        raise InputError("dataset holds no distributions")
    d = data[0].d
    if projections is not None and not 1 <= projections <= d:
        raise click.UsageError(f"--projections must be in [1, {d}] for {d}-dimensional bins")
    if sub_intervals is not None and sub_intervals < 1:
        raise click.UsageError("--sub-intervals must be positive")
    if node_capacity < 1:
        raise click.UsageError("--node-capacity must be positive")
    index = NormalIndex.build(data, projections, sub_intervals, node_capacity)
    index.save(out)
    click.echo(describe(index))
    click.echo(f"wrote {out}")


def _result_lines(pairs):
    return [line for res, _ in pairs for line in res.lines()]


@main.command()
@click.argument("index_path", metavar="INDEX", type=click.Path(dir_okay=False))
@click.argument("queries_path", metavar="QUERIES", type=click.Path(dir_okay=False))
@click.option("--k", "k", type=click.IntRange(min=1), default=4, show_default=True)
@click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("-o", "--out", type=click.Path(dir_okay=False), default=None,
              help="results file (default stdout)")
@click.option("--stats", "stats_path", type=click.Path(dir_okay=False), default=None,
              help="write per-query stats and the aggregate report as JSON")
@click.option("--oracle", is_flag=True, help="cross-check every query against a linear scan")
@click.option("--renormalize", is_flag=True)
def query(index_path, queries_path, k, threads, out, stats_path, oracle, renormalize):
    """Exact k-NN for every distribution in QUERIES."""
    index = _load_index(index_path)
    queries = _load_queries(queries_path, index, renormalize)
    _check_k(k, index)
    pairs, report = batch_query(index, queries, k, threads)
    text = "".join(line + "\n" for line in _result_lines(pairs))
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)
    if stats_path:
        doc = {"report": report.as_dict(),
               "queries": [dict(query_id=r.query_id, **s.as_dict()) for r, s in pairs]}
        with open(stats_path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
    click.echo(f"{len(queries)} queries, mean {report.mean_seconds * 1e3:.2f} ms, "
               f"mean exact EMDs {report.mean_exact_emds:.1f} of {len(index)}", err=True)
    if oracle:
        mismatches = 0
        for q, (res, _) in zip(queries, pairs):
            if res.neighbors != oracle_knn(index.dataset, q, k):
                mismatches += 1
                click.echo(f"oracle mismatch for query {q.id}", err=True)
        click.echo(f"oracle check: {len(queries) - mismatches}/{len(queries)} agree", err=True)
        if mismatches:
            sys.exit(1)


BENCH_FIELDS = ["k", "sub_intervals", "node_capacity", "queries", "mean_seconds",
                "median_seconds", "mean_exact_emds", "mean_index_survivors",
                "mean_projection_survivors", "mean_nodes_visited", "results_sha256"]


@main.command()
@click.argument("index_path", metavar="INDEX", type=click.Path(dir_okay=False))
@click.argument("queries_path", metavar="QUERIES", type=click.Path(dir_okay=False))
@click.option("--k", "k_list", default="4", show_default=True, help="comma list of k values")
@click.option("--sub-intervals", "s_list", default=None,
              help="comma list; default keeps the index's grid")
@click.option("--node-capacity", "cap_list", default=None,
              help="comma list; default keeps the index's capacity")
@click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("-o", "--out", type=click.Path(dir_okay=False), default=None,
              help="CSV file (default stdout)")
@click.option("--renormalize", is_flag=True)
def bench(index_path, queries_path, k_list, s_list, cap_list, threads, out, renormalize):
    """Sweep k, sub-interval count and node capacity; report pruning as CSV."""
    index = _load_index(index_path)
    queries = _load_queries(queries_path, index, renormalize)
    ks = _int_list(k_list)
    ss = _int_list(s_list) if s_list else [index.s]
    caps = _int_list(cap_list) if cap_list else [index.node_capacity]
    for k in ks:
        _check_k(k, index)
    axes = [pj.axis for pj in index.projections]
    rows = []
    for s in ss:
        base = index if s == index.s else NormalIndex.build(
            index.dataset, sub_intervals=s, node_capacity=index.node_capacity, axes=axes)
        for cap in caps:
            idx = base if cap == base.node_capacity else base.with_node_capacity(cap)
            for k in ks:
                pairs, rep = batch_query(idx, queries, k, threads)
                digest = hashlib.sha256("\n".join(_result_lines(pairs)).encode()).hexdigest()
                rows.append({
                    "k": k, "sub_intervals": s, "node_capacity": cap, "queries": rep.queries,
                    "mean_seconds": f"{rep.mean_seconds:.6f}",
                    "median_seconds": f"{rep.median_seconds:.6f}",
                    "mean_exact_emds": rep.mean_exact_emds,
                    "mean_index_survivors": rep.mean_index_survivors,
                    "mean_projection_survivors": rep.mean_projection_survivors,
                    "mean_nodes_visited": rep.mean_nodes_visited,
                    "results_sha256": digest[:16],
                })
    fh = open(out, "w", newline="", encoding="utf-8") if out else sys.stdout
    try:
        writer = csv.DictWriter(fh, fieldnames=BENCH_FIELDS)
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if out:
            fh.close()


@main.command()
@click.argument("index_path", metavar="INDEX", type=click.Path(dir_okay=False))
@click.option("--pairs", type=click.IntRange(min=0), default=200, show_default=True,
              help="random pairs for the bound-chain check")
@click.option("--oracle-queries", type=click.IntRange(min=0), default=None,
              help="k-NN linear-scan comparisons (default 2, or 0 above 10,000 objects)")
@click.option("--seed", type=int, default=0, show_default=True)
def verify(index_path, pairs, oracle_queries, seed):
    """Re-audit an index file: structure, sizes, bound soundness, oracles."""
    try:
        open(index_path, "rb").close()
    except OSError as exc:
        raise InputError(str(exc)) from None
    checks = verify_file(index_path, pairs=pairs, oracle_queries=oracle_queries, seed=seed)
    for c in checks:
        click.echo(c.line())
    if not all(c.ok for c in checks):
        click.echo("verification FAILED", err=True)
        sys.exit(1)
    click.echo("verification passed")


if __name__ == "__main__":
    main()
