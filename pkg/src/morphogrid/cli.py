"""Command-line pipeline: ingest -> grid -> render -> classify -> indices
-> vitality -> fit -> analyze, plus `run` (everything) and `train`.

Stages communicate through files in the artifact directory so any stage
can be rerun or replaced (e.g. probabilities from an external model).
Every run writes a manifest with input digests and the seed; reruns with
identical inputs are byte-identical.

Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, classifier, cnn, crhd, gbm, geodata, morphoindex, synth, vitality
from .categories import PROB_COLUMNS, RoadCategory, assign_category
from .geodata import GridCell
from .roadgraph import RoadTier, build_graph, polygonize_blocks

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


# -- configuration ----------------------------------------------------------

_SOURCE_KEYS = ("osm", "geojson", "ntl", "population", "probs", "checkpoint")


def parse_config(text: str) -> dict:
    """Flat `key = value` configuration; '#' starts a comment."""
    cfg: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        cfg[key.strip()] = value.strip()
    return cfg


def load_config(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    cfg = parse_config(text)
    cfg["_dir"] = str(Path(path).resolve().parent)
    return cfg


def config_seed(cfg: dict) -> int:
    env = os.environ.get("MORPHOGRID_SEED")
    if env is not None:
        return int(env)
    return int(cfg.get("seed", "0"))


def _cities(cfg: dict) -> list[str]:
    if "cities" in cfg:
        return [c.strip() for c in cfg["cities"].split(",") if c.strip()]
    return [cfg.get("city", "city")]


def _city_key(cfg: dict, city: str, key: str):
    if "cities" in cfg:
        return cfg.get(f"{city}.{key}")
    return cfg.get(key)


def _resolve(cfg: dict, value: str) -> Path:
    p = Path(value)
    if not p.is_absolute():
        p = Path(cfg.get("_dir", ".")) / p
    return p


def _require_path(cfg: dict, city: str, key: str) -> Path:
    value = _city_key(cfg, city, key)
    if value is None:
        full = f"{city}.{key}" if "cities" in cfg else key
        raise ConfigError(f"missing required config key: {full}")
    path = _resolve(cfg, value)
    if not path.exists():
        raise ConfigError(f"config key {key}: path does not exist: {path}")
    return path


def _optional_path(cfg: dict, city: str, key: str):
    value = _city_key(cfg, city, key)
    if value is None:
        return None
    path = _resolve(cfg, value)
    if not path.exists():
        raise ConfigError(f"config key {key}: path does not exist: {path}")
    return path


def gbm_params(cfg: dict, seed: int) -> gbm.GbmParams:
    goss = None
    if "gbm.goss_top" in cfg:
        goss = gbm.GossParams(float(cfg["gbm.goss_top"]),
                              float(cfg.get("gbm.goss_other", "0.1")))
    return gbm.GbmParams(
        num_iterations=int(cfg.get("gbm.num_iterations", "200")),
        learning_rate=float(cfg.get("gbm.learning_rate", "0.05")),
        num_leaves=int(cfg.get("gbm.num_leaves", "15")),
        min_samples_leaf=int(cfg.get("gbm.min_samples_leaf", "5")),
        max_bins=int(cfg.get("gbm.max_bins", "255")),
        goss=goss, seed=seed)


# -- small helpers ----------------------------------------------------------

def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _fmt(v: float) -> str:
    return repr(float(v))


def _load_extract(outdir: Path, city: str) -> geodata.UrbanExtract:
    path = outdir / f"extract_{city}.geojson"
    if not path.exists():
        raise DataError(f"missing stage file {path}; run `ingest` first")
    return geodata.parse_extract(path.read_text(encoding="utf-8"))


def _load_cells(outdir: Path, city: str, built_only: bool = True) -> list[GridCell]:
    path = outdir / f"cells_{city}.csv"
    if not path.exists():
        raise DataError(f"missing stage file {path}; run `grid` first")
    lines = path.read_text(encoding="utf-8").splitlines()
    if lines[0] != "cell_col,cell_row,built":
        raise DataError(f"schema mismatch in {path}: expected column header "
                        "cell_col,cell_row,built")
    cells = []
    for line in lines[1:]:
        col, row, built = line.split(",")
        if not built_only or built == "1":
            cells.append(GridCell(col=int(col), row=int(row)))
    return cells


def _read_csv_table(path: Path, expected_prefix: list[str]) -> tuple[list[str], list[list[str]]]:
    if not path.exists():
        raise DataError(f"missing stage file {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    for col in expected_prefix:
        if col not in header:
            raise DataError(f"schema mismatch in {path}: missing column {col}")
    return header, [line.split(",") for line in lines[1:]]


# -- stages -----------------------------------------------------------------

def stage_ingest(cfg: dict, outdir: Path) -> list[Path]:
    written = []
    for city in _cities(cfg):
        source = _require_path(cfg, city, "osm")
        bbox = _bbox(cfg, city)
        extract = geodata.parse_extract(source.read_text(encoding="utf-8"), bbox)
        extra = _optional_path(cfg, city, "geojson")
        if extra is not None:
            more = geodata.parse_extract(extra.read_text(encoding="utf-8"), bbox)
            extract.roads += more.roads
            extract.buildings += more.buildings
            extract.landuse += more.landuse
            for kind, pts in more.points.items():
                extract.points.setdefault(kind, []).extend(pts)
        path = outdir / f"extract_{city}.geojson"
        _write(path, geodata.serialize_extract(extract))
        written.append(path)
    return written


def _bbox(cfg: dict, city: str):
    value = _city_key(cfg, city, "bbox")
    if value is None:
        raise ConfigError(f"missing required config key: "
                          f"{city + '.bbox' if 'cities' in cfg else 'bbox'}")
    parts = [float(v) for v in value.split(",")]
    if len(parts) != 4:
        raise ConfigError("bbox must be west,south,east,north")
    return tuple(parts)


def stage_grid(cfg: dict, outdir: Path) -> list[Path]:
    written = []
    for city in _cities(cfg):
        bbox = _bbox(cfg, city)
        extract = _load_extract(outdir, city)
        cells = geodata.make_grid(bbox)
        built = {(c.col, c.row) for c in geodata.filter_built(cells, extract.buildings)}
        lines = ["cell_col,cell_row,built"]
        for c in cells:
            lines.append(f"{c.col},{c.row},{1 if (c.col, c.row) in built else 0}")
        path = outdir / f"cells_{city}.csv"
        _write(path, "\n".join(lines) + "\n")
        written.append(path)
    return written


def stage_render(cfg: dict, outdir: Path, only_cell=None) -> list[Path]:
    size_px = int(cfg.get("size_px", "256"))
    written = []
    for city in _cities(cfg):
        extract = _load_extract(outdir, city)
        graph = build_graph(extract.roads)
        for cell in _load_cells(outdir, city):
            if only_cell is not None and (cell.col, cell.row) != only_cell:
                continue
            image = crhd.render_for_cell(graph, cell, size_px=size_px)
            path = outdir / f"crhd_{city}_{cell.col}_{cell.row}.png"
            path.parent.mkdir(parents=True, exist_ok=True)
            crhd.save_png(image, path)
            written.append(path)
    return written


def stage_classify(cfg: dict, outdir: Path, backend=None, probs_path=None) -> list[Path]:
    backend = backend or cfg.get("backend", "heuristic")
    if backend not in ("cnn", "heuristic", "external"):
        raise ConfigError(f"unknown classifier backend: {backend}")
    written = []
    for city in _cities(cfg):
        rows = []
        cells = _load_cells(outdir, city)
        if backend == "external":
            src = Path(probs_path) if probs_path else _require_path(cfg, city, "probs")
            table, rejected = classifier.load_external_probs(
                src.read_text(encoding="utf-8"))
            if rejected:
                print(f"[classify] {city}: rejected {rejected} probability rows",
                      file=sys.stderr)
            for cell in cells:
                key = (cell.col, cell.row)
                if key not in table:
                    raise DataError(f"no external probabilities for cell {key}")
                rows.append((cell, table[key]))
        else:
            extract = _load_extract(outdir, city)
            graph = build_graph(extract.roads)
            model = None
            if backend == "cnn":
                ckpt = _require_path(cfg, city, "checkpoint")
                model = cnn.load_checkpoint(ckpt)
            for cell in cells:
                if backend == "cnn":
                    image = crhd.render_for_cell(graph, cell,
                                                 size_px=int(cfg.get("size_px", "256")))
                    probs = classifier.cnn_forward(model, image)
                else:
                    probs = classifier.classify_heuristic(
                        _cell_subgraph(extract, cell),
                        4.0 * crhd.cell_half_width_m(cell))
                rows.append((cell, probs))
        lines = ["cell_col,cell_row," + ",".join(PROB_COLUMNS) + ",category"]
        for cell, probs in rows:
            cat = assign_category(probs)
            lines.append(f"{cell.col},{cell.row},"
                         + ",".join(_fmt(p) for p in probs) + f",{cat}")
        path = outdir / f"probs_{city}.csv"
        _write(path, "\n".join(lines) + "\n")
        written.append(path)
    return written


def _cell_subgraph(extract: geodata.UrbanExtract, cell: GridCell):
    """Graph of the roads near a cell (doubled window, as rendered)."""
    west, south, east, north = cell.bbox
    dx, dy = (east - west) / 2.0, (north - south) / 2.0
    window = (west - dx, south - dy, east + dx, north + dy)
    near = [r for r in extract.roads
            if geodata._intersects(geodata._bbox_of(r[0]), window)]
    return build_graph(near)


def _load_probs_stage(outdir: Path, city: str):
    path = outdir / f"probs_{city}.csv"
    header, rows = _read_csv_table(path, ["cell_col", "cell_row", *PROB_COLUMNS,
                                          "category"])
    idx = {c: header.index(c) for c in header}
    out = {}
    for row in rows:
        key = (int(row[idx["cell_col"]]), int(row[idx["cell_row"]]))
        probs = np.array([float(row[idx[c]]) for c in PROB_COLUMNS])
        out[key] = (probs, RoadCategory.from_name(row[idx["category"]]))
    return out


def stage_indices(cfg: dict, outdir: Path, min_tier=None) -> list[Path]:
    written = []
    tier = RoadTier[min_tier.upper()] if min_tier else None
    for city in _cities(cfg):
        extract = _load_extract(outdir, city)
        graph = build_graph(extract.roads)
        blocks = polygonize_blocks(graph)
        probs = _load_probs_stage(outdir, city)
        lines = ["city,cell_col,cell_row," + ",".join(morphoindex.CSV_COLUMNS)]
        for cell in _load_cells(outdir, city):
            key = (cell.col, cell.row)
            if key not in probs:
                raise DataError(f"no probabilities for cell {key}; rerun classify")
            vec = morphoindex.compute_indices(cell, extract, graph, probs[key][0],
                                              blocks=blocks,
                                              intersection_min_tier=tier)
            lines.append(f"{city},{cell.col},{cell.row},"
                         + ",".join(_fmt(vec.get(c)) for c in morphoindex.CSV_COLUMNS))
        path = outdir / f"features_{city}.csv"
        _write(path, "\n".join(lines) + "\n")
        written.append(path)
    return written


def stage_vitality(cfg: dict, outdir: Path, bandwidth_m=None, std_strategy=None,
                   include_tweets=None) -> list[Path]:
    bandwidth = float(bandwidth_m if bandwidth_m is not None
                      else cfg.get("bandwidth_m", vitality.DEFAULT_BANDWIDTH_M))
    strategy = vitality.StandardizationStrategy.parse(
        std_strategy or cfg.get("std_strategy", "before"))
    if include_tweets is None:
        include_tweets = cfg.get("include_tweets", "false").lower() in ("true", "1", "yes")
    exclude = frozenset() if include_tweets else vitality.DEFAULT_EXCLUDE

    records = []
    for city in _cities(cfg):
        extract = _load_extract(outdir, city)
        sources: dict = {}
        for kind in ("poi", "tweet", "airbnb"):
            if kind in extract.points:
                sources[kind] = extract.points[kind]
        ntl_path = _optional_path(cfg, city, "ntl")
        if ntl_path is not None:
            sources["ntl"] = geodata.read_asc(ntl_path.read_text(encoding="utf-8"))
        pop_path = _optional_path(cfg, city, "population")
        if pop_path is not None:
            sources["population"] = geodata.read_cell_csv(
                pop_path.read_text(encoding="utf-8"))
        for cell in _load_cells(outdir, city):
            records.append(vitality.indicators_for_cell(cell, sources, city=city,
                                                        bandwidth_m=bandwidth))
    vitality.vitality_score(records, strategy, exclude)
    by_city: dict = {}
    for rec in records:
        by_city.setdefault(rec.city, []).append(rec)
    written = []
    for city, recs in by_city.items():
        lines = ["city,cell_col,cell_row,poi_kde,tweet_count,ntl,population,"
                 "airbnb_kde,score"]
        for rec in recs:
            vals = [rec.poi_kde, rec.tweet_count, rec.ntl, rec.population,
                    rec.airbnb_kde, rec.score]
            lines.append(f"{city},{rec.cell[0]},{rec.cell[1]},"
                         + ",".join("" if v is None else _fmt(v) for v in vals))
        path = outdir / f"vitality_{city}.csv"
        _write(path, "\n".join(lines) + "\n")
        written.append(path)
    return written


def _load_features_and_scores(cfg: dict, outdir: Path):
    """Join the features and vitality stage files on (city, cell)."""
    rows = []
    for city in _cities(cfg):
        fheader, frows = _read_csv_table(outdir / f"features_{city}.csv",
                                         ["city", "cell_col", "cell_row",
                                          *morphoindex.CSV_COLUMNS])
        vheader, vrows = _read_csv_table(outdir / f"vitality_{city}.csv",
                                         ["city", "cell_col", "cell_row", "score"])
        fidx = {c: fheader.index(c) for c in fheader}
        vidx = {c: vheader.index(c) for c in vheader}
        scores = {(r[vidx["cell_col"]], r[vidx["cell_row"]]):
                  float(r[vidx["score"]]) for r in vrows if r[vidx["score"]] != ""}
        for r in frows:
            key = (r[fidx["cell_col"]], r[fidx["cell_row"]])
            if key not in scores:
                continue
            vec = {c: float(r[fidx[c]]) for c in morphoindex.CSV_COLUMNS}
            rows.append((city, key, vec, scores[key]))
    if not rows:
        raise DataError("no joined feature/vitality rows; run earlier stages")
    return rows


def _matrices(rows):
    X_base = np.array([[r[2][c] for c in morphoindex.BASELINE_COLUMNS]
                       for r in rows])
    X_aug = np.array([[r[2][c] for c in morphoindex.AUGMENTED_COLUMNS]
                      for r in rows])
    y = np.array([r[3] for r in rows])
    return X_base, X_aug, y


def _safe_compare(X_base, X_aug, y, params, seed) -> analysis.ModelComparison:
    """Holdout comparison, or train-set metrics when there are too few rows
    for a meaningful split."""
    if len(y) >= 10:
        return analysis.compare_models(X_base, X_aug, y, params, seed=seed)
    mb = gbm.fit(X_base, y, params)
    ma = gbm.fit(X_aug, y, params)
    base_m = gbm.metrics(y, gbm.predict(mb, X_base))
    aug_m = gbm.metrics(y, gbm.predict(ma, X_aug))
    return analysis.ModelComparison(
        baseline=base_m, augmented=aug_m,
        delta_r2=(aug_m.r2 or 0.0) - (base_m.r2 or 0.0),
        delta_rmse=aug_m.rmse - base_m.rmse,
        delta_mae=aug_m.mae - base_m.mae,
        baseline_importance=mb.split_counts.copy(),
        augmented_importance=ma.split_counts.copy())


def stage_fit(cfg: dict, outdir: Path) -> list[Path]:
    seed = config_seed(cfg)
    rows = _load_features_and_scores(cfg, outdir)
    X_base, X_aug, y = _matrices(rows)
    params = gbm_params(cfg, seed)
    comparison = _safe_compare(X_base, X_aug, y, params, seed)
    model = gbm.fit(X_aug, y, params)
    model_path = outdir / "model_gbm.txt"
    gbm.save_model(model, model_path)
    report = {
        "baseline": _metrics_dict(comparison.baseline),
        "augmented": _metrics_dict(comparison.augmented),
        "delta": {"r2": comparison.delta_r2, "rmse": comparison.delta_rmse,
                  "mae": comparison.delta_mae},
        "feature_importance": dict(zip(morphoindex.AUGMENTED_COLUMNS,
                                       model.split_counts.tolist())),
        "params": {"num_iterations": params.num_iterations,
                   "learning_rate": params.learning_rate,
                   "num_leaves": params.num_leaves,
                   "min_samples_leaf": params.min_samples_leaf,
                   "seed": seed},
    }
    report_path = outdir / "fit_report.json"
    _write(report_path, json.dumps(report, sort_keys=True, indent=1) + "\n")
    return [model_path, report_path]


def _metrics_dict(m: gbm.Metrics) -> dict:
    return {"r2": m.r2, "rmse": m.rmse, "mae": m.mae,
            "r2_level": gbm.r2_level(m.r2)}


def stage_analyze(cfg: dict, outdir: Path, group_by=None) -> list[Path]:
    seed = config_seed(cfg)
    rows = _load_features_and_scores(cfg, outdir)
    cities = [r[0] for r in rows]
    scores = [r[3] for r in rows]
    categories = []
    probs_list = []
    cells = []
    by_city_probs = {city: _load_probs_stage(outdir, city) for city in _cities(cfg)}
    for city, key, vec, score in rows:
        cell = GridCell(col=int(key[0]), row=int(key[1]))
        cells.append(cell)
        p, cat = by_city_probs[city][(cell.col, cell.row)]
        probs_list.append(p)
        categories.append(cat)

    shares = analysis.category_shares(categories, cities)
    k = min(int(cfg.get("clusters", "4")), max(len(shares), 1))
    clusters = analysis.cluster_cities(shares, k=k, seed=seed) if shares else {}

    stats = analysis.stats_by_category(scores, categories)
    proportions = analysis.proportion_by_range(scores, categories)

    curves = {}
    for cat in RoadCategory:
        vals = [s for s, c in zip(scores, categories) if c == cat]
        if len(vals) >= 2:
            xs, dens = analysis.kde_curve(vals)
            curves[str(cat)] = {"x": xs.tolist(), "density": dens.tolist()}

    vectors = [morphoindex.MorphoVector(**{
        "prob_g": vec["prob_g"], "prob_o": vec["prob_o"],
        "prob_r": vec["prob_r"], "prob_n": vec["prob_n"],
        **{c: vec[c] for c in morphoindex.BASELINE_COLUMNS}})
        for _, _, vec, _ in rows]
    top = analysis.top_n_table(vectors, scores, categories, n=10)

    X_base, X_aug, y = _matrices(rows)
    params = gbm_params(cfg, seed)
    result = {
        "cluster_labels": clusters,
        "category_shares": {s.city: {"gridiron": s.gridiron, "organic": s.organic,
                                     "radial": s.radial} for s in shares},
        "stats_by_category": {str(c): {"mean": st.mean, "median": st.median,
                                       "std": st.std, "n": st.n}
                              for c, st in stats.items()},
        "proportion_by_range": [
            {"range": list(p["range"]), "count": p["count"],
             "proportions": None if p["proportions"] is None else
             {str(c): v for c, v in p["proportions"].items()}}
            for p in proportions],
        "top10": {str(c): v for c, v in top.items()},
    }
    if group_by == "cluster":
        groups: dict = {}
        for i, city in enumerate(cities):
            label = clusters.get(city)
            if label is not None:
                groups.setdefault(label, []).append(i)
        per_group = {}
        for label, idxs in sorted(groups.items()):
            if len(idxs) < 4:
                per_group[str(label)] = {"skipped": "too few cells"}
                continue
            comp = _safe_compare(X_base[idxs], X_aug[idxs], y[idxs],
                                 params, seed)
            per_group[str(label)] = {"baseline": _metrics_dict(comp.baseline),
                                     "augmented": _metrics_dict(comp.augmented)}
        result["by_cluster"] = per_group
    else:
        comp = _safe_compare(X_base, X_aug, y, params, seed)
        result["comparison"] = {"baseline": _metrics_dict(comp.baseline),
                                "augmented": _metrics_dict(comp.augmented)}

    report_path = outdir / "analysis.json"
    _write(report_path, json.dumps(result, sort_keys=True, indent=1) + "\n")
    map_path = outdir / "map.geojson"
    _write(map_path, analysis.export_categorical_map(cells, categories,
                                                     probs_list, scores))
    curves_path = outdir / "kde_curves.csv"
    lines = ["category,x,density"]
    for cat, data in sorted(curves.items()):
        for xv, dv in zip(data["x"], data["density"]):
            lines.append(f"{cat},{_fmt(xv)},{_fmt(dv)}")
    _write(curves_path, "\n".join(lines) + "\n")
    return [report_path, map_path, curves_path]


STAGES = ("ingest", "grid", "render", "classify", "indices", "vitality",
          "fit", "analyze")


def cmd_run(cfg: dict, outdir: Path) -> list[Path]:
    outdir.mkdir(parents=True, exist_ok=True)
    partial = outdir / ".partial"
    _write(partial, "run in progress\n")
    artifacts = []
    try:
        artifacts += stage_ingest(cfg, outdir)
        artifacts += stage_grid(cfg, outdir)
        artifacts += stage_render(cfg, outdir)
        artifacts += stage_classify(cfg, outdir)
        artifacts += stage_indices(cfg, outdir)
        artifacts += stage_vitality(cfg, outdir)
        artifacts += stage_fit(cfg, outdir)
        artifacts += stage_analyze(cfg, outdir)
    except Exception:
        raise
    else:
        partial.unlink()
    manifest = {
        "seed": config_seed(cfg),
        "inputs": {},
        "artifacts": {},
    }
    for city in _cities(cfg):
        for key in _SOURCE_KEYS:
            path = _optional_path(cfg, city, key)
            if path is not None:
                manifest["inputs"][f"{city}:{key}"] = _digest(path)
    for path in sorted(set(artifacts)):
        manifest["artifacts"][path.name] = _digest(path)
    manifest_path = outdir / "manifest.json"
    _write(manifest_path, json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    return artifacts + [manifest_path]


def cmd_train(cfg: dict, outdir: Path) -> Path:
    outdir.mkdir(parents=True, exist_ok=True)
    seed = config_seed(cfg)
    n_per_class = int(cfg.get("train.n_per_class", "50"))
    items = synth.gen_dataset(n_per_class, seed=seed)
    tcfg = cnn.TrainConfig(
        learning_rate=float(cfg.get("train.learning_rate", "0.0005")),
        batch_size=int(cfg.get("train.batch_size", "2")),
        epochs=int(cfg.get("train.epochs", "30")),
        seed=seed)

    def arrays(split):
        xs = np.stack([cnn.preprocess(i.image.pixels) for i in items
                       if i.split == split])
        ys = np.array([int(i.label) for i in items if i.split == split])
        return xs, ys

    train_x, train_y = arrays("train")
    val_x, val_y = arrays("val")
    test_x, test_y = arrays("test")
    result = cnn.cnn_train(train_x, train_y, tcfg, val_x, val_y,
                           verbose=cfg.get("verbose", "0") == "1")
    probs = [result.model.forward(test_x[i:i + 1])[0] for i in range(len(test_y))]
    report = classifier.evaluate(probs, [RoadCategory(y) for y in test_y])
    print(report.format())
    ckpt = outdir / "model_cnn.bin"
    cnn.save_checkpoint(result.model, ckpt)
    print(f"checkpoint written: {ckpt}")
    return ckpt


# -- entry point ------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="morphogrid",
        description="Road-network morphology and urban-vitality pipeline")
    parser.add_argument("--config", "-c", required=True, help="key = value config file")
    parser.add_argument("--out", "-o", default="artifacts", help="artifact directory")
    parser.add_argument("--jobs", type=int, default=1,
                        help="parallelism cap (stages currently run sequentially)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "train", "ingest", "grid", "vitality", "fit"):
        sub.add_parser(name)
    p_render = sub.add_parser("render")
    p_render.add_argument("--cell", help="render a single cell, as col,row")
    p_classify = sub.add_parser("classify")
    p_classify.add_argument("--backend", choices=("cnn", "heuristic", "external"))
    p_classify.add_argument("--probs", help="external probability CSV")
    p_indices = sub.add_parser("indices")
    p_indices.add_argument("--min-tier", choices=[t.name.lower() for t in RoadTier])
    p_vit = sub.choices["vitality"]
    p_vit.add_argument("--bandwidth-m", type=float)
    p_vit.add_argument("--std-strategy", choices=("before", "after"))
    p_vit.add_argument("--include-tweets", action="store_true", default=None)
    p_analyze = sub.add_parser("analyze")
    p_analyze.add_argument("--group-by", choices=("cluster",))

    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        if args.command == "run":
            artifacts = cmd_run(cfg, outdir)
            print(f"wrote {len(artifacts)} artifacts to {outdir}")
        elif args.command == "train":
            cmd_train(cfg, outdir)
        elif args.command == "ingest":
            stage_ingest(cfg, outdir)
        elif args.command == "grid":
            stage_grid(cfg, outdir)
        elif args.command == "render":
            only = None
            if args.cell:
                col, row = args.cell.split(",")
                only = (int(col), int(row))
            stage_render(cfg, outdir, only_cell=only)
        elif args.command == "classify":
            stage_classify(cfg, outdir, backend=args.backend, probs_path=args.probs)
        elif args.command == "indices":
            stage_indices(cfg, outdir, min_tier=args.min_tier)
        elif args.command == "vitality":
            stage_vitality(cfg, outdir, bandwidth_m=args.bandwidth_m,
                           std_strategy=args.std_strategy,
                           include_tweets=args.include_tweets)
        elif args.command == "fit":
            stage_fit(cfg, outdir)
        elif args.command == "analyze":
            stage_analyze(cfg, outdir, group_by=args.group_by)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, geodata.ParseError, geodata.FormatError,
            classifier.ProbsFormatError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
