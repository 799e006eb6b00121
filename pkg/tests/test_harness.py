import numpy as np
import pytest

from vidstereo.config import EngineConfig
from vidstereo.dataio import default_rig, generate_sequence, write_dataset, write_pfm
from vidstereo.harness import (EvaluationError, ablate, bench, eval_sequence, evaluate_frames, fit_affine,
                               load_config_set, read_csv, write_bench, write_csv, write_report)
from vidstereo.harness.metrics import epe
from vidstereo.harness.report import prediction_name


@pytest.fixture(scope="module")
def small():
    return generate_sequence(3, 8, default_rig(128, 96))


def gt_copies(m):
    return [m.gt(i) for i in range(len(m))]


class TestReport:
    def test_perfect_predictions(self, small):
        rep = evaluate_frames(gt_copies(small), small)
        assert len(rep.frame_rows()) == len(small)
        assert rep.epe == 0 and rep.d1 == 0
        assert all(r["epe"] == 0 for r in rep.rows)

    def test_aggregate_is_pixel_weighted(self, small):
        rng = np.random.default_rng(0)
        preds = [g + rng.normal(0, 1, g.shape) for g in gt_copies(small)]
        rep = evaluate_frames(preds, small)
        rows = rep.frame_rows()
        weighted = sum(r["epe"] * r["n"] for r in rows) / sum(r["n"] for r in rows)
        # second path: one pooled array of errors over every valid pixel
        pooled = np.concatenate([np.abs(p - small.gt(i))[small.gt(i) > 0] for i, p in enumerate(preds)])
        assert rep.epe == pytest.approx(weighted, rel=1e-12)
        assert rep.epe == pytest.approx(pooled.mean(), rel=1e-12)
        assert rep.n == pooled.size

    def test_occlusion_split(self, small):
        rng = np.random.default_rng(1)
        preds = [g + rng.normal(0, 1, g.shape) for g in gt_copies(small)]
        rep = evaluate_frames(preds, small, split_occlusion=True)
        n_all, n_non, n_occ = (rep.metric("n", s) for s in ("all", "nonocc", "occ"))
        assert n_non + n_occ == n_all and n_occ > 0
        assert rep.metric("epe", "all") == pytest.approx(
            (rep.metric("epe", "nonocc") * n_non + rep.metric("epe", "occ") * n_occ) / n_all)

    def test_missing_prediction(self, small):
        preds = dict(enumerate(gt_copies(small)))
        del preds[3]
        with pytest.raises(EvaluationError, match=r"\[3\]"):
            evaluate_frames(preds, small)

    def test_directory_round_trip(self, small, tmp_path):
        for i, g in enumerate(gt_copies(small)):
            write_pfm(tmp_path / prediction_name(i), g + 0.5)
        rep = eval_sequence(tmp_path, small)
        assert rep.epe == pytest.approx(0.5)
        path = write_report(tmp_path / "metrics.csv", rep)
        lines = path.read_text().splitlines()
        assert lines[0] == "#schema=v1" and lines[1].startswith("# bad_p")
        rows = read_csv(path)
        assert len(rows) == len(small) + 1 and rows[-1]["frame"] == "all"
        assert float(rows[-1]["epe"]) == pytest.approx(0.5)

    def test_directory_missing_frame(self, small, tmp_path):
        for i, g in enumerate(gt_copies(small)):
            if i != 5:
                write_pfm(tmp_path / prediction_name(i), g)
        with pytest.raises(EvaluationError, match=r"missing predictions for frames \[5\]"):
            eval_sequence(tmp_path, small)

    def test_csv_format(self, tmp_path):
        p = write_csv(tmp_path / "x.csv", ("a", "b", "c"), [{"a": 1, "b": 0.5, "c": "z"}, {"a": 2, "b": float("nan"), "c": True}])
        assert p.read_text() == "#schema=v1\na,b,c\n1,0.500000,z\n2,nan,1\n"


class TestBench:
    def test_rows_and_determinism(self, small, tmp_path):
        configs = {"full-1": EngineConfig(), "cold-2": EngineConfig(mode="cold", iters=2)}
        rows = bench(small, configs, warmup=1, repeats=3)
        assert [r.label for r in rows] == ["full-1", "cold-2"]
        assert rows[1].mode == "cold" and rows[1].iters == 2
        assert all(r.latency_ms > 0 and r.fps == pytest.approx(1000 / r.latency_ms) for r in rows)
        again = bench(small, configs, warmup=1, repeats=3)
        assert [r.epe for r in rows] == [r.epe for r in again]
        # the EPE column agrees with a separate evaluation
        from vidstereo.engine import run_sequence
        outs = run_sequence(small, configs["full-1"])
        assert rows[0].epe == evaluate_frames([o.disparity.values for o in outs], small).epe
        csv_rows = read_csv(write_bench(tmp_path / "b.csv", rows))
        assert list(csv_rows[0]) == ["label", "mode", "iters", "latency_ms", "fps", "epe"]

    def test_list_configs_use_labels(self, small):
        rows = bench(small, [EngineConfig(mode="fast", iters=3)], warmup=0, repeats=3)
        assert rows[0].label == EngineConfig(mode="fast", iters=3).label

    def test_preconditions(self, small):
        with pytest.raises(ValueError):
            bench(small, [EngineConfig()], repeats=2)
        with pytest.raises(ValueError):
            bench(small, [EngineConfig()], warmup=len(small))

    def test_fit_affine(self):
        x = np.array([1, 2, 5, 10, 20.0])
        a, b, r2 = fit_affine(x, 3 * x + 2)
        assert a == pytest.approx(3) and b == pytest.approx(2) and r2 == pytest.approx(1)
        *_, r2 = fit_affine(x, np.array([1, 5, 2, 8, 3.0]))
        assert r2 < 0.5

    def test_config_sets(self, tmp_path):
        (tmp_path / "one.cfg").write_text("mode=cold\niters=4\n")
        assert list(load_config_set(tmp_path / "one.cfg").values()) == [EngineConfig(mode="cold", iters=4)]
        (tmp_path / "many.cfg").write_text("radius=3\n[a]\nmode=full\n[b]\nmode=cold\niters=7\n")
        sets = load_config_set(tmp_path / "many.cfg")
        assert list(sets) == ["a", "b"]
        assert sets["b"] == EngineConfig(mode="cold", iters=7, radius=3)
        (tmp_path / "bad.cfg").write_text("[a]\nmode=sideways\n")
        with pytest.raises(ValueError):
            load_config_set(tmp_path / "bad.cfg")


class TestAblate:
    def test_noise_rows(self, small):
        cols, rows = ablate("noise", small)
        assert cols == ("level", "epe", "d1") and [r["level"] for r in rows] == list(range(11))
        assert all(np.isfinite(r["epe"]) for r in rows)

    def test_warp_grid(self, small):
        cols, rows = ablate("warp", small)
        assert len(rows) == 4
        assert {(r["warp"], r["skip"]) for r in rows} == {(0, 1), (0, 6), (1, 1), (1, 6)}

    def test_speed_and_init(self, small):
        _, rows = ablate("speed", small, sweep=[1, 4])
        assert [(r["skip"], r["frames"]) for r in rows] == [(1, 8), (4, 2)]
        _, rows = ablate("init", small)
        assert [r["frame"] for r in rows] == list(range(1, 9))

    def test_level_zero_matches_plain_run(self, small):
        _, rows = ablate("noise", small, sweep=[0])
        from vidstereo.engine import run_sequence
        outs = run_sequence(small, EngineConfig())
        assert rows[0]["epe"] == evaluate_frames([o.disparity.values for o in outs], small).epe

    def test_invalid(self, small):
        with pytest.raises(ValueError):
            ablate("colour", small)
        with pytest.raises(ValueError):
            ablate("noise", small, sweep=[-1])
        with pytest.raises(ValueError):
            ablate("speed", small, sweep=[0])
        with pytest.raises(ValueError):
            ablate("warp", small, sweep=[1, 2, 3])


def test_written_dataset_evaluates_like_memory(small, tmp_path):
    from vidstereo.dataio import read_manifest
    path = write_dataset(small, tmp_path / "ds")
    back = read_manifest(path)
    preds = [g + 0.25 for g in gt_copies(small)]
    assert evaluate_frames(preds, back).epe == evaluate_frames(preds, small).epe
    assert epe(preds[0], back.gt(0), back.gt(0) > 0) == pytest.approx(0.25)
