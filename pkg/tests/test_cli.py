import json

import numpy as np
import pytest

from palmwatch.annotations import load_annotations
from palmwatch.augment import AugmentSpec, FlipHOp, GaussianNoiseOp, spec_to_json
from palmwatch.cli import main
from palmwatch.raster_core import load_raster
from palmwatch.synth_scene import SceneSpec, spec_to_json as scene_spec_to_json


def small_scene_spec(seed):
    return SceneSpec(
        width=220,
        height=220,
        counts={"healthy": 5, "smallish": 3, "dead": 3},
        seed=seed,
    )


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Synth scenes, a trained model, and pipeline outputs shared by tests."""
    root = tmp_path_factory.mktemp("cli")
    spec_path = root / "scene_spec.json"
    spec_path.write_text(scene_spec_to_json(small_scene_spec(0)))
    scene_paths = []
    for i in range(3):
        out = root / f"s{i}"
        assert main(["synth", str(out), "--spec", str(spec_path), "--seed", str(100 + i)]) == 0
        scene_paths.append(out / "scene.rhdr")
    model = root / "model.json"
    code = main(
        ["train", str(scene_paths[0]), str(scene_paths[1]), "--out", str(model), "--epochs", "60"]
    )
    assert code == 0
    return {"root": root, "scenes": scene_paths, "model": model, "spec": spec_path}


class TestSynth:
    def test_outputs_exist(self, workspace):
        scene_dir = workspace["scenes"][0].parent
        assert (scene_dir / "scene.rhdr").is_file()
        assert (scene_dir / "scene.rbin").is_file()
        ann = load_annotations(scene_dir / "scene.json")
        assert len(ann) == 11

    def test_seed_changes_scene(self, workspace, tmp_path):
        assert main(["synth", str(tmp_path), "--spec", str(workspace["spec"]), "--seed", "100"]) == 0
        a = load_raster(workspace["scenes"][0])
        b = load_raster(tmp_path / "scene.rhdr")
        np.testing.assert_array_equal(a.band("nir").samples, b.band("nir").samples)


class TestIndexCommand:
    def test_index_and_stats(self, workspace, tmp_path, capsys):
        scene = workspace["scenes"][0]
        ann = scene.parent / "scene.json"
        stats_out = tmp_path / "stats.csv"
        code = main(
            [
                "index",
                str(scene),
                str(tmp_path / "ndvi"),
                "--veg-mask",
                str(tmp_path / "veg"),
                "--annotations",
                str(ann),
                "--stats-out",
                str(stats_out),
            ]
        )
        assert code == 0
        assert (tmp_path / "ndvi.rhdr").is_file()
        veg = load_raster(tmp_path / "veg")
        assert set(np.unique(veg.band("veg_mask").samples)) <= {0.0, 1.0}
        lines = stats_out.read_text().strip().splitlines()
        assert lines[0].startswith("class,index,count")
        assert len(lines) == 4  # header + 3 classes


class TestTileCommand:
    def test_tiles_written(self, workspace, tmp_path):
        code = main(
            ["tile", str(workspace["scenes"][0]), str(tmp_path), "--tile-size", "128"]
        )
        assert code == 0
        names = sorted(p.name for p in tmp_path.glob("*.rhdr"))
        assert names == ["tile_0_0.rhdr", "tile_0_1.rhdr", "tile_1_0.rhdr", "tile_1_1.rhdr"]
        tile = load_raster(tmp_path / "tile_1_1.rhdr")
        assert tile.origin == (128, 128)


class TestAugmentCommand:
    def test_augments_directory(self, workspace, tmp_path):
        in_dir = tmp_path / "in"
        out_dir = tmp_path / "out"
        in_dir.mkdir()
        code = main(["tile", str(workspace["scenes"][0]), str(in_dir), "--tile-size", "128"])
        assert code == 0
        # give one tile annotations to carry along
        ann_src = workspace["scenes"][0].parent / "scene.json"
        (in_dir / "tile_0_0.json").write_text(ann_src.read_text())
        spec = AugmentSpec(operations=(FlipHOp(), GaussianNoiseOp(sigma=0.01)), seed=3)
        spec_path = tmp_path / "aug.json"
        spec_path.write_text(spec_to_json(spec))
        assert main(["augment", str(in_dir), str(out_dir), "--spec", str(spec_path)]) == 0
        assert len(list(out_dir.glob("*.rhdr"))) == 4
        assert (out_dir / "tile_0_0.json").is_file()

    def test_augment_deterministic(self, workspace, tmp_path):
        in_dir = tmp_path / "in"
        in_dir.mkdir()
        main(["tile", str(workspace["scenes"][0]), str(in_dir), "--tile-size", "220"])
        spec_path = tmp_path / "aug.json"
        spec_path.write_text(spec_to_json(AugmentSpec(operations=(GaussianNoiseOp(0.02),), seed=9)))
        for name in ("a", "b"):
            assert main(["augment", str(in_dir), str(tmp_path / name), "--spec", str(spec_path)]) == 0
        assert (tmp_path / "a" / "tile_0_0.rbin").read_bytes() == (
            tmp_path / "b" / "tile_0_0.rbin"
        ).read_bytes()


class TestPredictDetectEval:
    def test_stage_by_stage(self, workspace, tmp_path, capsys):
        scene = workspace["scenes"][2]
        truth = scene.parent / "scene.json"
        prob = tmp_path / "prob"
        code = main(
            ["predict", str(scene), "--model", str(workspace["model"]), "--out", str(prob)]
        )
        assert code == 0
        dets = tmp_path / "dets"
        code = main(["detect", str(prob) + ".rhdr", str(scene), "--out", str(dets)])
        assert code == 0
        assert (tmp_path / "dets.geojson").is_file()
        assert (tmp_path / "dets.csv").is_file()
        code = main(
            [
                "eval",
                str(tmp_path / "dets.geojson"),
                str(truth),
                "--out",
                str(tmp_path / "run"),
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "precision" in out
        assert (tmp_path / "run_metrics.csv").is_file()
        payload = json.loads((tmp_path / "run_metrics.json").read_text())
        assert payload["accuracy"] > 0.8


class TestPipeline:
    def run(self, workspace, out_dir, extra=()):
        scene = workspace["scenes"][2]
        truth = scene.parent / "scene.json"
        return main(
            [
                "pipeline",
                "--scene",
                str(scene),
                "--model",
                str(workspace["model"]),
                "--truth",
                str(truth),
                "--out",
                str(out_dir),
                "--tile-size",
                "128",
                "--overlap",
                "32",
                *extra,
            ]
        )

    def test_writes_all_outputs(self, workspace, tmp_path):
        assert self.run(workspace, tmp_path / "run") == 0
        out = tmp_path / "run"
        for name in (
            "manifest.json",
            "veg_mask.rhdr",
            "probability.rhdr",
            "detections.geojson",
            "detections.csv",
            "metrics.csv",
            "metrics.json",
            "eval.json",
        ):
            assert (out / name).is_file(), name
        evaluation = json.loads((out / "eval.json").read_text())
        assert evaluation["detection"]["recall"] > 0.9
        metrics = json.loads((out / "metrics.json").read_text())
        assert "macro" in metrics
        csv_rows = (out / "metrics.csv").read_text().splitlines()
        macro_row = [r for r in csv_rows if r.startswith("macro,")]
        assert len(macro_row) == 1 and len(macro_row[0].split(",")) >= 4

    def test_rerun_byte_identical(self, workspace, tmp_path):
        assert self.run(workspace, tmp_path / "one") == 0
        assert self.run(workspace, tmp_path / "two") == 0
        for name in ("detections.geojson", "detections.csv", "metrics.csv", "probability.rbin"):
            assert (tmp_path / "one" / name).read_bytes() == (
                tmp_path / "two" / name
            ).read_bytes(), name

    def test_jobs_do_not_change_outputs(self, workspace, tmp_path):
        assert self.run(workspace, tmp_path / "j1", ("--jobs", "1")) == 0
        assert self.run(workspace, tmp_path / "j4", ("--jobs", "4")) == 0
        for name in ("detections.geojson", "detections.csv", "probability.rbin"):
            assert (tmp_path / "j1" / name).read_bytes() == (
                tmp_path / "j4" / name
            ).read_bytes(), name

    def test_config_rerun_identical(self, workspace, tmp_path):
        assert self.run(workspace, tmp_path / "orig") == 0
        manifest = tmp_path / "orig" / "manifest.json"
        payload = json.loads(manifest.read_text())
        payload["config"]["out_dir"] = str(tmp_path / "replay")
        replay_manifest = tmp_path / "replay_manifest.json"
        replay_manifest.write_text(json.dumps(payload))
        assert main(["pipeline", "--config", str(replay_manifest)]) == 0
        assert (tmp_path / "orig" / "detections.geojson").read_bytes() == (
            tmp_path / "replay" / "detections.geojson"
        ).read_bytes()

    def test_missing_model_is_config_error(self, workspace, tmp_path, capsys):
        code = main(
            [
                "pipeline",
                "--scene",
                str(workspace["scenes"][0]),
                "--model",
                str(tmp_path / "missing.json"),
                "--out",
                str(tmp_path / "x"),
            ]
        )
        assert code == 2
        assert "model" in capsys.readouterr().err
        assert not (tmp_path / "x" / "probability.rhdr").exists()

    def test_config_conflicts_with_flags(self, workspace, tmp_path):
        code = main(
            [
                "pipeline",
                "--config",
                "whatever.json",
                "--scene",
                str(workspace["scenes"][0]),
            ]
        )
        assert code == 2


class TestExitCodes:
    def test_corrupt_scene_is_data_error(self, tmp_path, workspace):
        bad = tmp_path / "bad.rhdr"
        bad.write_text("{\"width\": 2}")
        (tmp_path / "bad.rbin").write_bytes(b"")
        code = main(["index", str(bad), str(tmp_path / "out")])
        assert code == 3

    def test_truncated_payload_is_data_error(self, tmp_path, workspace):
        scene = workspace["scenes"][0]
        header = (tmp_path / "trunc.rhdr")
        header.write_text(scene.read_text())
        payload = scene.with_suffix(".rbin").read_bytes()
        (tmp_path / "trunc.rbin").write_bytes(payload[:-4])
        assert main(["index", str(header), str(tmp_path / "out")]) == 3

    def test_bad_parameter_is_config_error(self, workspace, tmp_path):
        code = main(
            ["tile", str(workspace["scenes"][0]), str(tmp_path), "--tile-size", "64", "--overlap", "64"]
        )
        assert code == 2

    def test_argparse_unknown_flag(self):
        with pytest.raises(SystemExit) as err:
            main(["synth", "out", "--bogus"])
        assert err.value.code == 2

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as err:
            main(["--version"])
        assert err.value.code == 0
