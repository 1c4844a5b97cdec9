import json

import pytest

from snapscore.config import Config
from snapscore.evaluate import (aggregate, evaluate_dataset, interval_metrics,
                                load_annotations)
from snapscore.synthetic import write_dataset


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("dataset")
    return write_dataset(out, n_scores=2, seed=3)


def test_evaluate_dataset_report(dataset):
    report = evaluate_dataset(dataset["annotations"], dataset["midi_dir"],
                              dataset["image_dir"], Config(), baseline=True)
    assert report["numQueries"] == 2
    assert report["aggregate"]["micro"]["fMeasure"] >= 0.9
    assert report["missingFiles"] == []
    assert set(report["stageTimings"]) >= {"preprocess", "staff_features",
                                           "dtw", "cost_matrix"}
    assert report["baseline"]["aggregate"]["micro"]["fMeasure"] < \
        report["aggregate"]["micro"]["fMeasure"]
    ids = [q["imageId"] for q in report["queries"]]
    assert ids == sorted(ids)


def test_evaluate_dataset_deterministic(dataset):
    kwargs = dict(cfg=Config(), baseline=True)
    a = evaluate_dataset(dataset["annotations"], dataset["midi_dir"],
                         dataset["image_dir"], **kwargs)
    b = evaluate_dataset(dataset["annotations"], dataset["midi_dir"],
                         dataset["image_dir"], **kwargs)
    assert _strip_timings(a) == _strip_timings(b)


def _strip_timings(report):
    report = json.loads(json.dumps(report))
    report.pop("stageTimings")
    for q in report["queries"]:
        q.pop("timings")
    return report


def test_missing_midi_becomes_zero_duration_row(dataset, tmp_path):
    ann = json.loads(dataset["annotations"].read_text())
    ann["queries"].append({"imageId": "ghost.png", "scoreId": "nope",
                           "measures": [1, 2]})
    path = tmp_path / "annotations.json"
    path.write_text(json.dumps(ann))
    report = evaluate_dataset(path, dataset["midi_dir"],
                              dataset["image_dir"], Config())
    assert len(report["missingFiles"]) == 1
    ghost = [q for q in report["queries"] if q["imageId"] == "ghost.png"][0]
    assert ghost["fMeasure"] == 0.0
    assert ghost["error"]
    assert "ghost.png" in report["failures"]


def test_broken_image_becomes_zero_duration_row(dataset, tmp_path):
    bad = dataset["image_dir"] / "broken.png"
    bad.write_bytes(b"this is not a png")
    ann = json.loads(dataset["annotations"].read_text())
    score_id = ann["queries"][0]["scoreId"]
    ann["queries"].append({"imageId": "broken.png", "scoreId": score_id,
                           "measures": [1, 2]})
    path = tmp_path / "annotations.json"
    path.write_text(json.dumps(ann))
    report = evaluate_dataset(path, dataset["midi_dir"],
                              dataset["image_dir"], Config())
    row = [q for q in report["queries"] if q["imageId"] == "broken.png"][0]
    assert row["hypothesis"] == [0.0, 0.0]
    assert row["fMeasure"] == 0.0


def test_harness_self_check_truth_as_hypothesis(dataset):
    annotations = load_annotations(dataset["annotations"])
    triples = []
    for ann, score in zip(annotations, dataset["scores"]):
        mm_dict = score.measure_map_dict()
        from snapscore.evaluate import MeasureMap
        mm = MeasureMap.from_dict(mm_dict)
        truth = ann.acceptable_intervals(mm)
        metrics, overlap, best = interval_metrics(truth[0], truth)
        assert metrics.f_measure == 1.0
        triples.append((truth[0][1] - truth[0][0], best[1] - best[0], overlap))
    micro, macro = aggregate(triples)
    assert micro.f_measure == 1.0
    assert macro.f_measure == 1.0


def test_parallel_workers_match_serial(dataset):
    serial = evaluate_dataset(dataset["annotations"], dataset["midi_dir"],
                              dataset["image_dir"], Config(), workers=1)
    parallel = evaluate_dataset(dataset["annotations"], dataset["midi_dir"],
                                dataset["image_dir"], Config(), workers=2)
    assert _strip_timings(serial) == _strip_timings(parallel)


def test_split_tag_filters_queries(dataset, tmp_path):
    ann = json.loads(dataset["annotations"].read_text())
    ann["queries"][0]["split"] = "train"
    ann["queries"][1]["split"] = "test"
    path = tmp_path / "annotations.json"
    path.write_text(json.dumps(ann))
    report = evaluate_dataset(path, dataset["midi_dir"],
                              dataset["image_dir"], Config(), split="test")
    assert report["numQueries"] == 1
    assert report["queries"][0]["imageId"] == ann["queries"][1]["imageId"]
    with pytest.raises(ValueError, match="split"):
        evaluate_dataset(path, dataset["midi_dir"], dataset["image_dir"],
                         Config(), split="validation")


def test_worker_count_env_var(dataset, monkeypatch):
    from snapscore.evaluate import WORKERS_ENV_VAR
    monkeypatch.setenv(WORKERS_ENV_VAR, "2")
    report = evaluate_dataset(dataset["annotations"], dataset["midi_dir"],
                              dataset["image_dir"], Config())
    assert report["aggregate"]["micro"]["fMeasure"] >= 0.9
