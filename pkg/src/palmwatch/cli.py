"""palmwatch command-line interface and the composed pipeline.

Subcommands cover each stage (index, tile, augment, synth, train,
predict, detect, eval) plus ``pipeline``, which chains
mask -> tile -> predict -> stitch -> detect -> classify and, when ground
truth is supplied, match -> confusion matrix -> metrics. Every tunable
constant is a documented flag, and a JSON run manifest capturing all of
them is written next to the outputs; rerunning from the same manifest
reproduces every output byte for byte.

Exit codes: 0 success, 2 configuration error, 3 data/format error,
4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .annotations import CLASS_LABELS, AnnotationSet, load_annotations, save_annotations
from .augment import apply_spec, load_spec as load_augment_spec
from .crown_detect import (
    DetectorConfig,
    classify_detections,
    detect_crowns,
    load_geojson,
    match_detections,
    write_csv,
    write_geojson,
)
from .errors import ConfigurationError, DataError, PalmwatchError
from .evaluate import (
    confusion_matrix,
    metrics,
    report_to_dict,
    write_metrics_csv,
    write_metrics_json,
)
from .indices import (
    DEFAULT_VEGETATION_THRESHOLD,
    compute_index,
    index_stats_by_class,
    vegetation_mask,
)
from .pixel_model import (
    ModelParams,
    ProbabilityMap,
    TrainConfig,
    build_training_set,
    load_params,
    predict_map,
    save_params,
    train,
)
from .raster_core import Band, Mask, Raster, load_raster, save_raster
from .synth_scene import SceneSpec, generate_scene, load_spec as load_scene_spec, spec_to_json
from .tiling import extract_tile, stitch, tile_plan

@dataclass
class PipelineConfig:
    """Every knob of the composed pipeline; serialized as the run manifest."""

    scene_path: str
    model_path: str
    out_dir: str
    truth_path: str | None = None
    veg_index: str = "ndvi"
    veg_threshold: float = DEFAULT_VEGETATION_THRESHOLD
    veg_gate: bool = False
    tile_size: int = 1024
    overlap: int = 128
    jobs: int = 1
    prob_threshold: float = 0.5
    min_area: int = 20
    max_area: int = 4000
    split_min_distance: float = 8.0
    smallish_diameter_px: float = 12.0
    dead_ndvi_max: float = 0.15
    match_max_dist: float = 10.0
    averaging: str = "macro"

    def detector_config(self) -> DetectorConfig:
        return DetectorConfig(
            prob_threshold=self.prob_threshold,
            min_area=self.min_area,
            max_area=self.max_area,
            split_min_distance=self.split_min_distance,
            smallish_diameter_px=self.smallish_diameter_px,
            dead_ndvi_max=self.dead_ndvi_max,
        )

    def to_manifest(self) -> dict:
        return {"palmwatch_version": __version__, "config": asdict(self)}

    @classmethod
    def from_manifest(cls, payload: dict) -> "PipelineConfig":
        config = payload.get("config")
        if not isinstance(config, dict):
            raise ConfigurationError("manifest must carry a 'config' object")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(config) - known
        if unknown:
            raise ConfigurationError(f"manifest has unknown config fields: {sorted(unknown)}")
        missing = {"scene_path", "model_path", "out_dir"} - set(config)
        if missing:
            raise ConfigurationError(f"manifest config is missing fields: {sorted(missing)}")
        return cls(**config)


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"{what} not found: {p}")
    return p


def _mask_to_raster(mask: Mask, name: str, origin=(0, 0)) -> Raster:
    return Raster(
        bands=(Band(name=name, samples=mask.bits.astype(np.float32)),),
        nodata_value=None,
        origin=origin,
    )


def predict_tiled(
    scene: Raster,
    prediction_mask: Mask,
    params: ModelParams,
    tile_size: int,
    overlap: int,
    jobs: int = 1,
) -> ProbabilityMap:
    """Tile the scene, predict per tile (optionally in parallel), stitch.

    Outputs are collected in plan order, so the result is independent of
    the number of workers.
    """
    plan = tile_plan(scene.width, scene.height, tile_size, overlap)
    bits = prediction_mask.bits

    def predict_window(window):
        tile = extract_tile(scene, window)
        tile_bits = np.zeros((window.tile_height, window.tile_width), dtype=bool)
        tile_bits[: window.height, : window.width] = bits[
            window.y : window.y + window.height, window.x : window.x + window.width
        ]
        return window, predict_map(tile, Mask(tile_bits), params)

    if jobs <= 1:
        outputs = [predict_window(w) for w in plan.windows]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(predict_window, plan.windows))
    return stitch(plan, outputs)


def run_pipeline(config: PipelineConfig) -> dict:
    """Execute the composed pipeline and return a result summary.

    Writes into ``config.out_dir``: manifest.json, veg_mask raster,
    probability raster, detections.geojson/.csv, and (with truth)
    metrics.csv/.json plus an eval.json holding detection-level counts
    and the confusion matrix.
    """
    scene_path = _require_file(config.scene_path, "scene")
    model_path = _require_file(config.model_path, "model")
    truth = None
    if config.truth_path is not None:
        truth_path = _require_file(config.truth_path, "truth annotations")
    if config.jobs < 1:
        raise ConfigurationError(f"jobs must be >= 1, got {config.jobs}")
    if config.averaging not in ("macro", "micro", "weighted"):
        raise ConfigurationError(f"averaging must be macro, micro or weighted, got {config.averaging!r}")
    detector = config.detector_config()

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    scene = load_raster(scene_path)
    params = load_params(model_path)
    if config.truth_path is not None:
        truth = load_annotations(truth_path)

    valid = scene.valid_mask()
    index = compute_index(scene, valid, config.veg_index)
    veg = vegetation_mask(index, config.veg_threshold)
    save_raster(_mask_to_raster(veg, "veg_mask", scene.origin), out_dir / "veg_mask")
    veg_fraction = veg.count() / max(valid.count(), 1)

    prediction_mask = Mask(valid.bits & veg.bits) if config.veg_gate else valid
    prob = predict_tiled(
        scene, prediction_mask, params, config.tile_size, config.overlap, config.jobs
    )
    save_raster(prob.to_raster(origin=scene.origin), out_dir / "probability")

    detections = detect_crowns(prob, detector)
    classify_detections(detections, scene, detector)
    write_geojson(detections, out_dir / "detections.geojson", origin=scene.origin)
    write_csv(detections, out_dir / "detections.csv", origin=scene.origin)

    summary = {
        "scene": str(scene_path),
        "scene_size": [scene.width, scene.height],
        "vegetation_fraction": veg_fraction,
        "detections": len(detections),
        "outputs": {
            "veg_mask": str(out_dir / "veg_mask.rhdr"),
            "probability": str(out_dir / "probability.rhdr"),
            "geojson": str(out_dir / "detections.geojson"),
            "csv": str(out_dir / "detections.csv"),
        },
    }

    if truth is not None:
        result = match_detections(detections, truth, config.match_max_dist)
        n_matched = len(result.matches)
        detection_precision = n_matched / len(detections) if detections else 0.0
        detection_recall = n_matched / len(truth) if len(truth) else 0.0
        actual = [crown.class_label for _, crown in result.matches]
        predicted = [det.class_label for det, _ in result.matches]
        eval_payload = {
            "detection": {
                "truth_crowns": len(truth),
                "detections": len(detections),
                "matched": n_matched,
                "false_positives": len(result.false_positives),
                "false_negatives": len(result.false_negatives),
                "precision": detection_precision,
                "recall": detection_recall,
                "max_centroid_dist": config.match_max_dist,
            }
        }
        if n_matched:
            cm = confusion_matrix(actual, predicted, CLASS_LABELS)
            report = metrics(cm, averaging=config.averaging)
            write_metrics_csv(report, out_dir / "metrics.csv")
            write_metrics_json(report, out_dir / "metrics.json")
            eval_payload["confusion"] = {
                "classes": list(cm.classes),
                "counts": cm.counts.tolist(),
            }
            eval_payload["classification"] = report_to_dict(report)
            summary["outputs"]["metrics_csv"] = str(out_dir / "metrics.csv")
            summary["outputs"]["metrics_json"] = str(out_dir / "metrics.json")
        (out_dir / "eval.json").write_text(json.dumps(eval_payload, indent=2) + "\n")
        summary["outputs"]["eval"] = str(out_dir / "eval.json")
        summary["evaluation"] = eval_payload

    (out_dir / "manifest.json").write_text(
        json.dumps(config.to_manifest(), indent=2, sort_keys=True) + "\n"
    )
    summary["outputs"]["manifest"] = str(out_dir / "manifest.json")
    return summary


# ---------------------------------------------------------------------------
# subcommand implementations


def _cmd_index(args) -> int:
    scene = load_raster(_require_file(args.scene, "scene"))
    valid = scene.valid_mask()
    index = compute_index(scene, valid, args.index)
    save_raster(index.to_raster(origin=scene.origin), args.out)
    print(f"wrote {args.index} map to {args.out}.rhdr")
    if args.veg_mask is not None:
        veg = vegetation_mask(index, args.veg_threshold)
        save_raster(_mask_to_raster(veg, "veg_mask", scene.origin), args.veg_mask)
        print(
            f"vegetation (> {args.veg_threshold}): {veg.count()} px "
            f"({veg.count() / max(valid.count(), 1):.1%} of valid); wrote {args.veg_mask}.rhdr"
        )
    if args.annotations is not None:
        ann = load_annotations(_require_file(args.annotations, "annotations"))
        stats = index_stats_by_class(index, ann)
        rows = ["class,index,count,mean,std_dev,min,q1,median,q3,max"]
        for s in stats:
            if s.count == 0:
                rows.append(f"{s.class_label},{s.index_name},0,,,,,,,")
            else:
                rows.append(
                    f"{s.class_label},{s.index_name},{s.count},{s.mean!r},{s.std_dev!r},"
                    f"{s.min!r},{s.q1!r},{s.median!r},{s.q3!r},{s.max!r}"
                )
        text = "\n".join(rows) + "\n"
        if args.stats_out is not None:
            Path(args.stats_out).write_text(text)
            print(f"wrote per-class stats to {args.stats_out}")
        else:
            print(text, end="")
    return 0


def _cmd_tile(args) -> int:
    scene = load_raster(_require_file(args.scene, "scene"))
    plan = tile_plan(scene.width, scene.height, args.tile_size, args.overlap)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, window in enumerate(plan.windows):
        row, col = divmod(i, plan.n_cols)
        save_raster(extract_tile(scene, window), out_dir / f"tile_{row}_{col}")
    print(f"wrote {len(plan.windows)} tiles ({plan.n_rows}x{plan.n_cols}) to {out_dir}")
    return 0


def _cmd_augment(args) -> int:
    spec = load_augment_spec(_require_file(args.spec, "augment spec"))
    if args.seed is not None:
        spec = type(spec)(operations=spec.operations, seed=args.seed)
    in_dir = Path(args.in_dir)
    if not in_dir.is_dir():
        raise ConfigurationError(f"input directory not found: {in_dir}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    headers = sorted(in_dir.glob("*.rhdr"))
    if not headers:
        raise ConfigurationError(f"no .rhdr tiles in {in_dir}")
    for header in headers:
        tile = load_raster(header)
        ann_path = header.with_suffix(".json")
        ann = load_annotations(ann_path) if ann_path.is_file() else AnnotationSet(())
        # tile id from the file stem keeps streams stable when the
        # directory gains or loses other tiles
        tile_id = zlib.crc32(header.stem.encode())
        out_tile, out_ann = apply_spec(tile, ann, spec, tile_id)
        save_raster(out_tile, out_dir / header.stem)
        save_annotations(out_ann, out_dir / (header.stem + ".json"))
    print(f"augmented {len(headers)} tiles into {out_dir}")
    return 0


def _cmd_synth(args) -> int:
    spec = load_scene_spec(_require_file(args.spec, "scene spec")) if args.spec else SceneSpec()
    if args.seed is not None:
        spec.seed = args.seed
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    raster, ann = generate_scene(spec)
    save_raster(raster, out_dir / args.name)
    save_annotations(ann, out_dir / (args.name + ".json"))
    (out_dir / (args.name + "_spec.json")).write_text(spec_to_json(spec))
    print(
        f"wrote {raster.width}x{raster.height} scene with {len(ann)} crowns "
        f"to {out_dir / args.name}.rhdr"
    )
    return 0


def _cmd_train(args) -> int:
    pairs = []
    for scene_path in args.scenes:
        header = _require_file(scene_path, "scene")
        ann_path = header.with_suffix(".json")
        _require_file(ann_path, f"annotations for {header.name}")
        pairs.append((load_raster(header), load_annotations(ann_path)))
    X, y, names = build_training_set(
        pairs, negative_ratio=args.neg_ratio, seed=args.seed
    )
    config = TrainConfig(
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        l2=args.l2,
    )
    params = train(X, y, names, config)
    save_params(params, args.out)
    print(
        f"trained on {len(y)} rows ({int(y.sum())} palm) from {len(pairs)} scenes; "
        f"final loss {params.final_loss:.6f}; wrote {args.out}"
    )
    return 0


def _cmd_predict(args) -> int:
    scene = load_raster(_require_file(args.scene, "scene"))
    params = load_params(_require_file(args.model, "model"))
    prob = predict_tiled(
        scene, scene.valid_mask(), params, args.tile_size, args.overlap, args.jobs
    )
    save_raster(prob.to_raster(origin=scene.origin), args.out)
    print(f"wrote probability map to {args.out}.rhdr")
    return 0


def _detector_from_args(args) -> DetectorConfig:
    return DetectorConfig(
        prob_threshold=args.prob_threshold,
        min_area=args.min_area,
        max_area=args.max_area,
        split_min_distance=args.split_min_distance,
        smallish_diameter_px=args.smallish_diameter,
        dead_ndvi_max=args.dead_ndvi_max,
    )


def _cmd_detect(args) -> int:
    prob_raster = load_raster(_require_file(args.prob, "probability map"))
    scene = load_raster(_require_file(args.scene, "scene"))
    prob = ProbabilityMap.from_raster(prob_raster)
    cfg = _detector_from_args(args)
    detections = detect_crowns(prob, cfg)
    classify_detections(detections, scene, cfg)
    write_geojson(detections, args.out + ".geojson", origin=scene.origin)
    write_csv(detections, args.out + ".csv", origin=scene.origin)
    by_class = {}
    for det in detections:
        by_class[det.class_label] = by_class.get(det.class_label, 0) + 1
    print(f"{len(detections)} crowns: " + ", ".join(f"{k}={v}" for k, v in sorted(by_class.items())))
    print(f"wrote {args.out}.geojson and {args.out}.csv")
    return 0


def _cmd_eval(args) -> int:
    detections = load_geojson(_require_file(args.detections, "detections"))
    truth = load_annotations(_require_file(args.truth, "truth annotations"))
    result = match_detections(detections, truth, args.max_dist)
    n_matched = len(result.matches)
    precision = n_matched / len(detections) if detections else 0.0
    recall = n_matched / len(truth) if len(truth) else 0.0
    print(
        f"detection: {n_matched} matched, {len(result.false_positives)} FP, "
        f"{len(result.false_negatives)} FN "
        f"(precision {precision:.4f}, recall {recall:.4f})"
    )
    if n_matched == 0:
        print("no matches; classification metrics skipped")
        return 0
    actual = [crown.class_label for _, crown in result.matches]
    predicted = [det.class_label for det, _ in result.matches]
    cm = confusion_matrix(actual, predicted, CLASS_LABELS)
    report = metrics(cm, averaging=args.averaging)
    print(cm.format())
    p, r, f = report.headline()
    print(
        f"accuracy {report.accuracy:.4f}; {args.averaging}: "
        f"precision {p:.4f}, recall {r:.4f}, F1 {f:.4f}"
    )
    if args.out is not None:
        write_metrics_csv(report, args.out + "_metrics.csv")
        write_metrics_json(report, args.out + "_metrics.json")
        print(f"wrote {args.out}_metrics.csv and {args.out}_metrics.json")
    return 0


def _cmd_pipeline(args) -> int:
    if args.config is not None:
        if args.scene or args.model or args.out:
            raise ConfigurationError("--config replaces --scene/--model/--out; do not mix them")
        path = _require_file(args.config, "pipeline manifest")
        try:
            payload = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"manifest {path} is not valid JSON: {exc}") from exc
        config = PipelineConfig.from_manifest(payload)
    else:
        if not (args.scene and args.model and args.out):
            raise ConfigurationError("pipeline needs --scene, --model and --out (or --config)")
        config = PipelineConfig(
            scene_path=args.scene,
            model_path=args.model,
            out_dir=args.out,
            truth_path=args.truth,
            veg_index=args.veg_index,
            veg_threshold=args.veg_threshold,
            veg_gate=args.veg_gate,
            tile_size=args.tile_size,
            overlap=args.overlap,
            jobs=args.jobs,
            prob_threshold=args.prob_threshold,
            min_area=args.min_area,
            max_area=args.max_area,
            split_min_distance=args.split_min_distance,
            smallish_diameter_px=args.smallish_diameter,
            dead_ndvi_max=args.dead_ndvi_max,
            match_max_dist=args.max_dist,
            averaging=args.averaging,
        )
    summary = run_pipeline(config)
    print(f"scene {summary['scene']} ({summary['scene_size'][0]}x{summary['scene_size'][1]})")
    print(f"vegetation fraction {summary['vegetation_fraction']:.3f}")
    print(f"detections: {summary['detections']}")
    if "evaluation" in summary:
        det = summary["evaluation"]["detection"]
        print(
            f"detection precision {det['precision']:.4f}, recall {det['recall']:.4f} "
            f"({det['matched']}/{det['truth_crowns']} matched)"
        )
        cls = summary["evaluation"].get("classification")
        if cls:
            mode = cls["averaging"]
            agg = cls[mode]
            print(
                f"classification accuracy {cls['accuracy']:.4f}; {mode} F1 {agg['f1']:.4f}"
            )
    print(f"outputs in {config.out_dir}")
    return 0


def _add_detector_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--prob-threshold", type=float, default=0.5, help="crown probability threshold (default 0.5)")
    parser.add_argument("--min-area", type=int, default=20, help="minimum crown area in px (default 20)")
    parser.add_argument("--max-area", type=int, default=4000, help="area above which components are split (default 4000)")
    parser.add_argument("--split-min-distance", type=float, default=8.0, help="minimum distance between split seeds (default 8)")
    parser.add_argument("--smallish-diameter", type=float, default=12.0, help="diameter cutoff for the smallish class (default 12)")
    parser.add_argument("--dead-ndvi-max", type=float, default=0.15, help="mean NDVI at or below which a crown is dead (default 0.15)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="palmwatch",
        description="Detect and classify palm crowns in multiband imagery.",
    )
    parser.add_argument("--version", action="version", version=f"palmwatch {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="compute a vegetation index (and optional mask/stats)")
    p.add_argument("scene", help="scene .rhdr path")
    p.add_argument("out", help="output prefix for the index raster")
    p.add_argument("--index", default="ndvi", choices=["ndvi", "gndvi"], help="index to compute")
    p.add_argument("--veg-mask", default=None, help="also write a vegetation mask raster to this prefix")
    p.add_argument(
        "--veg-threshold",
        type=float,
        default=DEFAULT_VEGETATION_THRESHOLD,
        help="strict lower bound for vegetation (default 0.2)",
    )
    p.add_argument("--annotations", default=None, help="crown annotations for per-class stats")
    p.add_argument("--stats-out", default=None, help="write per-class stats CSV here instead of stdout")
    p.set_defaults(func=_cmd_index)

    p = sub.add_parser("tile", help="split a scene into fixed-size tiles")
    p.add_argument("scene", help="scene .rhdr path")
    p.add_argument("out_dir", help="directory for tile_{row}_{col} containers")
    p.add_argument("--tile-size", type=int, default=1024, help="tile edge in px (default 1024)")
    p.add_argument("--overlap", type=int, default=0, help="overlap between tiles in px (default 0)")
    p.set_defaults(func=_cmd_tile)

    p = sub.add_parser("augment", help="apply a seeded augmentation spec to a tile directory")
    p.add_argument("in_dir", help="directory of .rhdr tiles (+ optional sibling .json annotations)")
    p.add_argument("out_dir", help="output directory")
    p.add_argument("--spec", required=True, help="augmentation spec JSON")
    p.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("synth", help="generate a synthetic annotated scene")
    p.add_argument("out_dir", help="output directory")
    p.add_argument("--spec", default=None, help="scene spec JSON (defaults are used otherwise)")
    p.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p.add_argument("--name", default="scene", help="output file stem (default 'scene')")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train the pixel model on annotated scenes")
    p.add_argument("scenes", nargs="+", help=".rhdr scenes; annotations expected at <stem>.json")
    p.add_argument("--out", required=True, help="output model JSON path")
    p.add_argument("--learning-rate", type=float, default=0.1, help="descent step (default 0.1)")
    p.add_argument("--epochs", type=int, default=300, help="training epochs (default 300)")
    p.add_argument("--batch-size", type=int, default=4096, help="mini-batch size (default 4096)")
    p.add_argument("--l2", type=float, default=1e-4, help="L2 penalty (default 1e-4)")
    p.add_argument("--seed", type=int, default=0, help="shuffle/subsample seed (default 0)")
    p.add_argument(
        "--neg-ratio",
        type=float,
        default=5.0,
        help="background rows sampled per palm row (default 5)",
    )
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="predict a palm-probability map for a scene")
    p.add_argument("scene", help="scene .rhdr path")
    p.add_argument("--model", required=True, help="model JSON path")
    p.add_argument("--out", required=True, help="output prefix for the probability raster")
    p.add_argument("--tile-size", type=int, default=1024, help="tile edge in px (default 1024)")
    p.add_argument("--overlap", type=int, default=128, help="tile overlap in px (default 128)")
    p.add_argument("--jobs", type=int, default=1, help="parallel tile workers (default 1)")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("detect", help="detect and classify crowns in a probability map")
    p.add_argument("prob", help="probability raster .rhdr path")
    p.add_argument("scene", help="source scene .rhdr path (for spectra)")
    p.add_argument("--out", required=True, help="output prefix for .geojson/.csv")
    _add_detector_flags(p)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("eval", help="score detections against truth annotations")
    p.add_argument("detections", help="detections GeoJSON path")
    p.add_argument("truth", help="truth annotations JSON path")
    p.add_argument("--max-dist", type=float, default=10.0, help="match radius in px (default 10)")
    p.add_argument(
        "--averaging",
        default="macro",
        choices=["macro", "micro", "weighted"],
        help="headline averaging mode (default macro)",
    )
    p.add_argument("--out", default=None, help="output prefix for metrics files")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("pipeline", help="run mask -> predict -> detect -> (eval) end to end")
    p.add_argument("--scene", default=None, help="scene .rhdr path")
    p.add_argument("--model", default=None, help="model JSON path")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--truth", default=None, help="truth annotations JSON (enables metrics)")
    p.add_argument("--config", default=None, help="rerun from a manifest.json (replaces other path flags)")
    p.add_argument("--veg-index", default="ndvi", choices=["ndvi", "gndvi"], help="index for the vegetation mask")
    p.add_argument(
        "--veg-threshold",
        type=float,
        default=DEFAULT_VEGETATION_THRESHOLD,
        help="strict lower bound for vegetation (default 0.2)",
    )
    p.add_argument(
        "--veg-gate",
        action="store_true",
        help="restrict prediction to vegetation pixels (off by default: the mask is advisory)",
    )
    p.add_argument("--tile-size", type=int, default=1024, help="tile edge in px (default 1024)")
    p.add_argument("--overlap", type=int, default=128, help="tile overlap for prediction (default 128)")
    p.add_argument("--jobs", type=int, default=1, help="parallel tile workers (default 1)")
    _add_detector_flags(p)
    p.add_argument("--max-dist", type=float, default=10.0, help="truth match radius in px (default 10)")
    p.add_argument(
        "--averaging",
        default="macro",
        choices=["macro", "micro", "weighted"],
        help="headline averaging mode (default macro)",
    )
    p.set_defaults(func=_cmd_pipeline)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except PalmwatchError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
