"""Command-line surface: descriptor aggregation, retrieval evaluation,
ablation sweeps, invariance sweeps, and geo-coordinate manifest building.

All outputs are written atomically; every command exits nonzero on any
error. RIA_THREADS caps the worker pool used for per-image aggregation.
"""

import csv
import io as _stdio
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import click
import numpy as np

import ria
from ria import invariance, linalg, retrieval
from ria.aggregation import (
    FIRST_ORDER_AGGREGATORS,
    PipelineConfig,
    aggregate_baseline,
    compute_descriptor,
    isometric_vectorize,
    project,
    spd_from_projected,
)
from ria.errors import RiaError
from ria.io import atomic_write, read_descriptor_archive, read_feature_file, write_descriptor_archive
from ria.metrics import MetricSpec

EARTH_RADIUS_M = 6371000.0

_BACKEND_NAMES = {"newton-schulz": "newton_schulz", "eig": "eig_oracle"}


def _worker_count():
    env = os.environ.get("RIA_THREADS", "")
    if env.strip():
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def _parse_ks(text):
    return [int(k) for k in str(text).replace(",", " ").split()]


def pipeline_options(fn):
    opts = [
        click.option("--dim", default=64, show_default=True, help="Projected dimension d."),
        click.option("--tau", default=0.0, show_default=True, help="Off-diagonal threshold."),
        click.option("--epsilon", default=1e-4, show_default=True, help="Spectrum shift."),
        click.option("--ns-iters", default=3, show_default=True, help="Square-root iterations."),
        click.option("--alpha", default=0.5, show_default=True, help="Power in (0, 1]."),
        click.option("--seed", default=0, show_default=True, help="Projection/generator seed."),
        click.option(
            "--backend",
            type=click.Choice(sorted(_BACKEND_NAMES)),
            default="newton-schulz",
            show_default=True,
            help="Matrix square-root backend.",
        ),
        click.option(
            "--aggregator",
            default="ria",
            show_default=True,
            help="ria, euclidean_cov, log_euclidean_cov, mean, or gem.",
        ),
        click.option("--gem-power", default=3.0, show_default=True, help="GeM power p."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _build_config(dim, tau, epsilon, ns_iters, alpha, seed, backend, aggregator, gem_power):
    return PipelineConfig(
        dim=dim,
        tau=tau,
        epsilon=epsilon,
        ns_iterations=ns_iters,
        alpha=alpha,
        seed=seed,
        sqrt_backend=_BACKEND_NAMES[backend],
        aggregator=aggregator,
        gem_power=gem_power,
    ).validated()


def _fail(message):
    raise click.ClickException(str(message))


def _load_feature_dir(features_dir):
    files = sorted(Path(features_dir).glob("*.riaf"))
    if not files:
        _fail(f"no .riaf files found in {features_dir}")
    loaded = []
    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        for path, arr in zip(files, pool.map(read_feature_file, files)):
            loaded.append((path.stem, arr))
    dims = {arr.shape[1] for _stem, arr in loaded}
    if len(dims) != 1:
        _fail(f"inconsistent feature dimensions across files: {sorted(dims)}")
    return loaded


def _check_rank(loaded, cfg):
    if cfg.aggregator in FIRST_ORDER_AGGREGATORS:
        return
    shallow = [stem for stem, arr in loaded if arr.shape[0] <= cfg.dim]
    if shallow:
        _fail(
            f"projected dim d={cfg.dim} must be smaller than the patch count "
            f"of every image; offending files: {', '.join(shallow)}"
        )


def _archive_metadata(cfg):
    return {
        "config": asdict(cfg),
        "seed": cfg.seed,
        "version": ria.__version__,
    }


def _compute_archive(loaded, cfg):
    _check_rank(loaded, cfg)
    basis = None
    if cfg.aggregator not in FIRST_ORDER_AGGREGATORS:
        dim_in = loaded[0][1].shape[1]
        basis = linalg.random_orthonormal_basis(dim_in, cfg.dim, cfg.seed)
    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        descriptors = list(
            pool.map(lambda item: compute_descriptor(item[1], basis, cfg), loaded)
        )
    ids = [stem for stem, _arr in loaded]
    return ids, np.vstack(descriptors)


@click.group()
@click.version_option(version=ria.__version__)
def main():
    """Second-order global descriptors for place retrieval."""


@main.command("aggregate")
@click.option("--features", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@pipeline_options
def cmd_aggregate(features, out, **kwargs):
    """Aggregate a directory of RIAF feature files into a descriptor archive."""
    cfg = _build_config(**kwargs)
    try:
        loaded = _load_feature_dir(features)
        ids, matrix = _compute_archive(loaded, cfg)
        write_descriptor_archive(out, ids, matrix, _archive_metadata(cfg))
    except RiaError as exc:
        _fail(exc)
    click.echo(f"wrote {len(ids)} descriptors (dim {matrix.shape[1]}) to {out}")


def _load_archive_entries(path):
    ids, matrix, _meta = read_descriptor_archive(path)
    return list(zip(ids, matrix))


def _recall_csv_text(table):
    buf = _stdio.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["k", "recall"])
    for k in sorted(table.rows):
        writer.writerow([k, repr(table.rows[k])])
    return buf.getvalue()


@main.command("eval")
@click.option("--database", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--queries", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--ks", default="1,5", show_default=True, help="Comma-separated K values.")
@click.option("--out", type=click.Path(dir_okay=False), help="Optional recall CSV path.")
def cmd_eval(database, queries, manifest, ks, out):
    """Evaluate Recall@K for query descriptors against a database archive."""
    try:
        db_entries = _load_archive_entries(database)
        query_entries = _load_archive_entries(queries)
        mani = retrieval.load_manifest(manifest)
        index = retrieval.build_index(db_entries)
        table = retrieval.evaluate_recall(index, query_entries, mani, _parse_ks(ks))
    except RiaError as exc:
        _fail(exc)
    for k in sorted(table.rows):
        click.echo(f"R@{k} = {table.rows[k]:.4f}")
    if out:
        atomic_write(out, _recall_csv_text(table).encode("utf-8"))


def _cached_second_order(loaded, cfg):
    """Per image: raw features, regularized covariance, and its eigensystem,
    shared by every second-order ablation variant."""
    dim_in = loaded[0][1].shape[1]
    basis = linalg.random_orthonormal_basis(dim_in, cfg.dim, cfg.seed)

    def one(item):
        stem, arr = item
        projected = project(arr, basis)
        spd = spd_from_projected(projected, cfg)
        return stem, arr, spd.matrix, linalg.sym_eig(spd.matrix)

    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        return list(pool.map(one, loaded))


def _variant_descriptor(cache_row, variant, cfg):
    stem, raw, c, eig = cache_row
    if variant[0] == "mean":
        return aggregate_baseline(raw, cfg.with_(aggregator="mean"))
    if variant[0] == "gem":
        return aggregate_baseline(raw, cfg.with_(aggregator="gem", gem_power=variant[1]))
    if variant[0] == "log_euclidean_cov":
        w = eig.eigenvalues
        m = (eig.eigenvectors * np.log(w)) @ eig.eigenvectors.T
    elif variant[0] == "euclidean_cov":
        m = c
    else:  # ("ria", alpha)
        alpha = variant[1]
        m = c if alpha == 1.0 else (eig.eigenvectors * eig.eigenvalues**alpha) @ eig.eigenvectors.T
    v = isometric_vectorize(m)
    return v / np.linalg.norm(v)


ABLATION_ALPHAS = (1.0, 0.75, 0.5, 0.25, 0.1)


def _ablation_variants(gem_power):
    variants = [("mean", None), ("gem", gem_power), ("euclidean_cov", None), ("log_euclidean_cov", None)]
    variants += [("ria", alpha) for alpha in ABLATION_ALPHAS]
    return variants


def _variant_label(variant):
    kind, param = variant
    if kind == "gem":
        return f"gem(p={param:g})"
    if kind == "ria":
        return f"ria(alpha={param:g})"
    return kind


@main.command("ablate")
@click.option("--features", required=True, type=click.Path(exists=True, file_okay=False),
              help="Database RIAF directory.")
@click.option("--query-features", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--ks", default="1,5", show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@pipeline_options
def cmd_ablate(features, query_features, manifest, ks, out, **kwargs):
    """Sweep aggregators and power values, reusing cached covariances."""
    cfg = _build_config(**kwargs)
    k_list = _parse_ks(ks)
    try:
        db_loaded = _load_feature_dir(features)
        q_loaded = _load_feature_dir(query_features)
        _check_rank(db_loaded, cfg)
        _check_rank(q_loaded, cfg)
        mani = retrieval.load_manifest(manifest)
        db_cache = _cached_second_order(db_loaded, cfg)
        q_cache = _cached_second_order(q_loaded, cfg)

        rows = []
        for variant in _ablation_variants(cfg.gem_power):
            db_entries = [(row[0], _variant_descriptor(row, variant, cfg)) for row in db_cache]
            q_entries = [(row[0], _variant_descriptor(row, variant, cfg)) for row in q_cache]
            index = retrieval.build_index(db_entries)
            table = retrieval.evaluate_recall(index, q_entries, mani, k_list)
            rows.append((_variant_label(variant), table))
    except RiaError as exc:
        _fail(exc)

    buf = _stdio.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["variant"] + [f"r@{k}" for k in sorted(set(k_list))])
    for label, table in rows:
        writer.writerow([label] + [repr(table.rows[k]) for k in sorted(table.rows)])
    atomic_write(out, buf.getvalue().encode("utf-8"))
    for label, table in rows:
        cells = "  ".join(f"R@{k}={table.rows[k]:.4f}" for k in sorted(table.rows))
        click.echo(f"{label:24s} {cells}")


DEFAULT_SCALES = (0.25, 0.5, 2.0, 7.3)
DEFAULT_SIGMAS = (0.01, 0.05, 0.1)
DEFAULT_OFFSETS = (0.1, 0.5, 1.0)
DEFAULT_LAB_AGGREGATORS = ("ria", "euclidean_cov", "mean", "gem")


def _parse_floats(text, default):
    if not text:
        return list(default)
    return [float(v) for v in str(text).replace(",", " ").split()]


@main.command("invariance")
@click.option("--features", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--scales", default="", help="Intensity scale factors.")
@click.option("--sigmas", default="", help="Additive noise sigmas.")
@click.option("--offsets", default="", help="Brightness offsets (scale fixed at 1).")
@click.option("--aggregators", default=",".join(DEFAULT_LAB_AGGREGATORS), show_default=True)
@pipeline_options
def cmd_invariance(features, out, scales, sigmas, offsets, aggregators, **kwargs):
    """Run perturbation sweeps and emit a drift CSV
    (perturbation_kind, magnitude, aggregator, drift)."""
    cfg = _build_config(**kwargs)
    agg_names = [a.strip() for a in aggregators.split(",") if a.strip()]
    try:
        loaded = _load_feature_dir(features)
        _check_rank(loaded, cfg)
        dim_in = loaded[0][1].shape[1]
        basis = linalg.random_orthonormal_basis(dim_in, cfg.dim, cfg.seed)
        projected = [project(arr, basis) for _stem, arr in loaded]

        perturbations = [
            invariance.Perturbation(kind="intensity_scale", scale=s)
            for s in _parse_floats(scales, DEFAULT_SCALES)
        ]
        perturbations += [
            invariance.Perturbation(kind="additive_noise", sigma=s, seed=cfg.seed + 1)
            for s in _parse_floats(sigmas, DEFAULT_SIGMAS)
        ]
        perturbations += [
            invariance.Perturbation(kind="affine_brightness", scale=1.0, offset=b)
            for b in _parse_floats(offsets, DEFAULT_OFFSETS)
        ]
        conjugation = invariance.Perturbation(kind="orthogonal_conjugation", seed=cfg.seed + 2)

        reports = []
        for p in perturbations + [conjugation]:
            sums = {name: 0.0 for name in agg_names}
            for x in projected:
                rep = invariance.measure_drift(x, p, agg_names, cfg)
                for name, value in rep.per_aggregator.items():
                    sums[name] += value
            reports.append(
                invariance.DriftReport(
                    perturbation=p,
                    per_aggregator={n: s / len(projected) for n, s in sums.items()},
                )
            )
        if len(projected) >= 2:
            pairs = list(zip(projected[:-1], projected[1:]))
            sums = {name: 0.0 for name in agg_names}
            for xa, xb in pairs:
                rep = invariance.measure_distance_drift(xa, xb, conjugation, agg_names, cfg)
                for name, value in rep.per_aggregator.items():
                    sums[name] += value
            reports.append(
                invariance.DriftReport(
                    perturbation=conjugation,
                    per_aggregator={n: s / len(pairs) for n, s in sums.items()},
                    mode="pairwise_distance",
                )
            )
    except RiaError as exc:
        _fail(exc)

    tmp = _stdio.StringIO()
    writer = csv.writer(tmp)
    writer.writerow(["perturbation_kind", "magnitude", "aggregator", "drift"])
    for report in reports:
        kind = report.perturbation.kind
        if report.mode == "pairwise_distance":
            kind += "_pairwise"
        for name, value in report.per_aggregator.items():
            writer.writerow([kind, repr(report.perturbation.magnitude), name, repr(value)])
    atomic_write(out, tmp.getvalue().encode("utf-8"))
    click.echo(f"wrote {sum(len(r.per_aggregator) for r in reports)} drift cells to {out}")


def haversine_m(lat1, lon1, lat2, lon2):
    """Great-circle distance in meters."""
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = phi2 - phi1
    dlmb = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


def _read_coords_csv(path):
    rows = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or not "".join(row).strip():
                continue
            if i == 0 and row[0].strip().lower() in ("id", "item_id", "name"):
                continue
            if len(row) < 3:
                _fail(f"{path}: row {i + 1} needs id,lat,lon")
            try:
                rows.append((row[0].strip(), float(row[1]), float(row[2])))
            except ValueError as exc:
                _fail(f"{path}: row {i + 1}: {exc}")
    if not rows:
        _fail(f"{path}: no coordinate rows")
    return rows


@main.command("geo-manifest")
@click.option("--database", "database_csv", required=True, type=click.Path(exists=True, dir_okay=False),
              help="CSV of id,lat,lon for database items.")
@click.option("--queries", "queries_csv", required=True, type=click.Path(exists=True, dir_okay=False),
              help="CSV of id,lat,lon for queries.")
@click.option("--radius-m", default=25.0, show_default=True,
              help="Positive-match great-circle radius in meters (community convention; "
                   "tune per benchmark).")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def cmd_geo_manifest(database_csv, queries_csv, radius_m, out):
    """Convert geo-tagged splits into a ground-truth manifest JSON.

    Queries with no database item inside the radius are excluded and
    reported in the manifest's warnings block."""
    db = _read_coords_csv(database_csv)
    qs = _read_coords_csv(queries_csv)
    queries = []
    warnings = []
    for qid, qlat, qlon in qs:
        positives = [
            did for did, dlat, dlon in db if haversine_m(qlat, qlon, dlat, dlon) <= radius_m
        ]
        if positives:
            queries.append({"id": qid, "positives": positives})
        else:
            warnings.append(qid)
    doc = {"database": [did for did, _lat, _lon in db], "queries": queries}
    if warnings:
        doc["warnings"] = {"queries_without_positives": warnings}
        click.echo(
            f"warning: {len(warnings)} queries had no positives within "
            f"{radius_m} m and were excluded",
            err=True,
        )
    atomic_write(out, json.dumps(doc, indent=2, sort_keys=True).encode("utf-8"))
    click.echo(f"wrote manifest with {len(queries)} queries to {out}")


if __name__ == "__main__":
    sys.exit(main())
