import csv

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from kernelboost.boosting import BoostedEnsemble
from kernelboost.descriptors import pairwise_distances
from kernelboost.harness import cli
from kernelboost.harness.config import ConfigError, default_config, load_config, parse_config
from kernelboost.harness.evaluation import (
    EvaluationReport,
    crossval,
    emit_report,
    evaluate,
    format_reports,
    read_report_csv,
    report_from_predictions,
    stratified_kfold,
)
from kernelboost.harness.persistence import (
    SchemaError,
    VersionError,
    dumps_model,
    load_model,
    loads_model,
    save_model,
)
from kernelboost.harness.pipeline import (
    METHODS,
    PipelineError,
    extract_raw,
    fit_codebook,
    predict_images,
    predict_rows,
    prepare_fold,
    train_method,
    train_on_dataset,
)
from kernelboost.harness.synthetic import CLASSES, make_dataset, render
from kernelboost.kernels import default_gamma, upper_distances
from kernelboost.neighbors import NeighborQueryStats
from kernelboost.svm import smo_train, train_multiclass


class TestConfig:
    def test_defaults(self):
        cfg = default_config()
        assert cfg.canonical_size == 128
        assert (cfg.phog.levels, cfg.phog.bins, cfg.phog.signed) == (2, 8, False)
        assert (cfg.siftbow.step, cfg.siftbow.patch, cfg.siftbow.words) == (8, 16, 64)
        assert (cfg.svm_c, cfg.svm_tol, cfg.knn_k) == (10.0, 1e-3, 5)
        assert (cfg.svmknn_k, cfg.svmknn_shortlist, cfg.boost_rounds) == (10, 30, 8)
        assert cfg.gamma["phog"] is None

    def test_parse_overrides(self):
        cfg = parse_config("# comment\n\nphog.levels=1\nsvm.c = 2.5\nkernel.phog.gamma=0.75\n")
        assert cfg.phog.levels == 1 and cfg.svm_c == 2.5 and cfg.gamma["phog"] == 0.75

    @pytest.mark.parametrize(
        "text",
        [
            "phog.levels=1\nphog.levels=2\n",
            "nonsense.key=3\n",
            "svm.c=-1\n",
            "knn.k=abc\n",
            "phog.signed=maybe\n",
            "svm.strategy=ranked\n",
            "svm.kernel=tiny\n",
            "channels=phog\n",
            "folds=1\n",
            "svmknn.k=10\nsvmknn.shortlist=5\n",
            "no equals sign\n",
            "siftbow.patch=10\n",
        ],
    )
    def test_rejects(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_text_round_trip(self, tmp_path):
        cfg = default_config().replace({"boost.rounds": "3", "channels": "phog,tiny", "boost.pool": "phog,tiny"})
        path = tmp_path / "c.cfg"
        path.write_text(cfg.to_text())
        assert load_config(path) == cfg


class TestStratifiedKfold:
    def test_balanced_folds(self):
        labels = [0] * 10 + [1] * 10
        folds = stratified_kfold(labels, 5, seed=3)
        for train, test in folds:
            assert np.bincount(np.asarray(labels)[test]).tolist() == [2, 2]
            assert np.intersect1d(train, test).size == 0
            assert train.size + test.size == 20
        assert_array_equal(np.sort(np.concatenate([t for _, t in folds])), np.arange(20))

    def test_deterministic_and_seeded(self):
        labels = np.repeat(np.arange(3), 7)
        a, b = stratified_kfold(labels, 3, 11), stratified_kfold(labels, 3, 11)
        assert all(np.array_equal(x[1], y[1]) for x, y in zip(a, b))
        c = stratified_kfold(labels, 3, 12)
        assert any(not np.array_equal(x[1], y[1]) for x, y in zip(a, c))

    def test_errors(self):
        with pytest.raises(ValueError):
            stratified_kfold([0, 1, 0, 1], 1)
        with pytest.raises(ValueError, match="fewer"):
            stratified_kfold([0, 0, 0, 1, 1], 3)


class TestReports:
    def test_perfect_and_constant(self):
        names = [f"q{i}" for i in range(10)]
        true = np.repeat(np.arange(5), 2)
        stats = [NeighborQueryStats() for _ in names]
        perfect = report_from_predictions("SVM", list("abcde"), names, true, true, stats)
        assert_array_equal(perfect.confusion, 2 * np.eye(5, dtype=int))
        assert perfect.accuracy == 1.0
        constant = report_from_predictions("SVM", list("abcde"), names, true, np.zeros(10, int), stats)
        assert constant.accuracy == 0.2
        assert constant.total == 10

    def test_csv_layout(self, tmp_path):
        stats = [NeighborQueryStats(1, 2, 0) for _ in range(6)]
        rep = report_from_predictions("KNN", ["x", "y"], list("abcdef"), [0, 0, 0, 1, 1, 1], [0, 0, 0, 1, 1, 1], stats, 1.25)
        emit_report(rep, tmp_path / "r.csv")
        rows = list(csv.reader(open(tmp_path / "r.csv", newline="")))
        assert rows[:5] == [["x", "y"], ["3", "0"], ["0", "3"], ["method", "accuracy", "wall_time"], ["KNN", "1.000000", "1.250"]]
        assert rows[5] == ["query", "true", "predicted", "cheap_evals", "costly_evals", "svm_invocations"]
        assert rows[6] == ["a", "x", "x", "1", "2", "0"]

    def test_six_decimals_and_recompute(self, tmp_path):
        true = [0] * 50
        pred = [0] * 39 + [1] * 11
        rep = report_from_predictions("NN", ["a", "b"], [str(i) for i in range(50)], true, pred, [NeighborQueryStats()] * 50)
        emit_report(rep, tmp_path / "r.csv", timing=False)
        (block,) = read_report_csv(tmp_path / "r.csv")
        assert block["accuracy"] == "0.780000"
        assert block["wall_time"] == "-"
        assert np.trace(block["confusion"]) / block["confusion"].sum() == rep.accuracy

    def test_empty_rejected(self, tmp_path):
        rep = EvaluationReport("NN", ["a", "b"], np.zeros((2, 2), dtype=np.int64))
        with pytest.raises(ValueError):
            emit_report(rep, tmp_path / "r.csv")

    def test_unwritable_path(self, tmp_path):
        rep = report_from_predictions("NN", ["a", "b"], ["q"], [0], [0], [NeighborQueryStats()])
        with pytest.raises(OSError):
            emit_report(rep, tmp_path / "missing" / "r.csv")

    def test_deterministic_bytes(self):
        rep = report_from_predictions("NN", ["a", "b"], ["q", "r"], [0, 1], [1, 1], [NeighborQueryStats()] * 2, 0.5)
        assert format_reports([rep, rep]) == format_reports([rep, rep])
        assert format_reports([rep, rep]).count("\n\n") == 1


class TestSynthetic:
    def test_polarity_pair_shares_distribution(self):
        # holes images are rendered as the complement of a studs-style image
        a = render(2, np.random.default_rng(5), 32)
        b = render(3, np.random.default_rng(5), 32)
        assert_array_equal(b.pixels, 1.0 - a.pixels)

    def test_dataset_shape(self):
        ds = make_dataset(per_class=2, size=32, seed=1)
        assert ds.classes == list(CLASSES)
        assert ds.labels == [0, 0, 1, 1, 2, 2, 3, 3]
        assert all((im.width, im.height) == (32, 32) for im in ds.images)


class TestEvaluate:
    def test_unknown_method(self, small_config, small_dataset):
        with pytest.raises(PipelineError):
            evaluate("RANDOMFOREST", small_config, small_dataset, [0, 1], [2])

    def test_no_leakage(self, small_config, small_dataset):
        labels = np.asarray(small_dataset.labels)
        train, test = stratified_kfold(labels, 3, 0)[0]
        rep = evaluate("ADABOOST", small_config, small_dataset, train, test)
        fold = rep.fold
        # the codebook only saw training images, and equals a codebook built from them alone
        assert fold.codebook_sources.size > 0
        assert np.isin(fold.codebook_sources, train).all()
        raw = extract_raw(small_dataset.images, small_config, ("phog", "siftbow"))
        alone, _ = fit_codebook([raw.locals_[i] for i in train], small_config)
        assert_array_equal(fold.codebook.words, alone.words)
        # kernel widths come from training rows only
        model = rep.model
        assert model.gamma_sources == train.size
        for ch, bk in model.kernels.items():
            d = pairwise_distances(fold.rows[ch][train], bk.distance_kind)
            assert bk.gamma == default_gamma(upper_distances(d))
        assert rep.total == test.size

    @pytest.mark.parametrize("method", METHODS)
    def test_repeatable(self, method, small_config, small_dataset):
        train, test = stratified_kfold(small_dataset.labels, 3, 1)[1]
        a = evaluate(method, small_config, small_dataset, train, test)
        b = evaluate(method, small_config, small_dataset, train, test)
        assert_array_equal(a.confusion, b.confusion)
        assert [q.predicted for q in a.queries] == [q.predicted for q in b.queries]
        assert [q.stats for q in a.queries] == [q.stats for q in b.queries]

    def test_crossval_covers_every_sample_once(self, small_config, small_dataset):
        reports = crossval(small_dataset, small_config, ["NN", "SVMKNN2"])
        for rep in reports:
            assert rep.total == len(small_dataset)
            assert sorted(q.name for q in rep.queries) == sorted(small_dataset.names)
        for q in reports[1].queries:
            assert q.stats.cheap_evals == 24
            assert q.stats.costly_evals <= 8 + 4 * 3 // 2

    def test_ensemble_training_error_not_above_single_kernels(self, small_config, small_dataset):
        cfg = small_config.replace({"boost.rounds": "2"})
        labels = np.asarray(small_dataset.labels)
        idx = np.arange(labels.size)
        raw = extract_raw(small_dataset.images, cfg, ("phog", "siftbow"))
        fold = prepare_fold(raw, idx, cfg, ("phog", "siftbow"))
        boosted = train_method("ADABOOST", cfg, CLASSES, fold.rows, labels, fold.codebook)
        ens_err = np.mean(predict_rows(boosted, fold.rows)[0] != labels)
        for ch in ("phog", "siftbow"):
            single_cfg = cfg.replace({"svm.kernel": ch})
            single = train_method("SVM", single_cfg, CLASSES, fold.rows, labels, fold.codebook)
            assert ens_err <= np.mean(predict_rows(single, fold.rows)[0] != labels)


class TestPersistence:
    def test_binary_bit_identical(self, tmp_path, rng):
        x = rng.normal(size=(9, 4))
        y = np.where(rng.random(9) < 0.5, 1.0, -1.0)
        y[0], y[1] = 1.0, -1.0
        m = smo_train(x @ x.T, y, rng.uniform(0.1, 3.0, 9))
        save_model(tmp_path / "m.txt", m)
        back = load_model(tmp_path / "m.txt")
        assert_array_equal(back.indices, m.indices)
        assert back.coef.tobytes() == m.coef.tobytes()
        assert (back.bias, back.c, back.tol) == (m.bias, m.c, m.tol)
        assert open(tmp_path / "m.txt").readline() == "kernelboost-model v1\n"

    def test_multiclass_round_trip(self, rng):
        x = rng.normal(size=(12, 3))
        m = train_multiclass(np.exp(-((x[:, None] - x[None]) ** 2).sum(-1)), np.repeat([0, 1, 2], 4), 3.0, "dag")
        back = loads_model(dumps_model(m))
        assert back.classes == m.classes and back.strategy == "dag"
        for pair, bm in m.pairwise.items():
            assert back.pairwise[pair].coef.tobytes() == bm.coef.tobytes()
            assert back.pairwise[pair].bias == bm.bias

    @pytest.mark.parametrize("method", METHODS)
    def test_trained_model_predicts_identically(self, method, tmp_path, small_config, small_dataset):
        model = train_on_dataset(method, small_config, small_dataset)
        save_model(tmp_path / "m.txt", model)
        back = load_model(tmp_path / "m.txt")
        assert dumps_model(back) == dumps_model(model)
        queries = make_dataset(per_class=2, size=64, seed=99).images
        p1, s1 = predict_images(model, queries)
        p2, s2 = predict_images(back, queries)
        assert_array_equal(p1, p2)
        assert s1 == s2
        if method == "ADABOOST":
            assert isinstance(back.classifier, BoostedEnsemble)
            assert back.classifier.alphas == model.classifier.alphas

    def test_version_mismatch(self):
        with pytest.raises(VersionError, match="version"):
            loads_model("kernelboost-model v9\nkind codebook\n")

    def test_bad_magic(self):
        with pytest.raises(SchemaError) as exc:
            loads_model("some-other-format v1\n")
        assert exc.value.field == "magic"

    def test_truncated_names_missing_field(self, rng):
        m = smo_train(np.eye(4), [1.0, -1.0, 1.0, -1.0], 1.0)
        lines = dumps_model(m).splitlines()
        cut = "\n".join(lines[:4]) + "\n"
        with pytest.raises(SchemaError, match="svm.c") as exc:
            loads_model(cut)
        assert exc.value.field == "svm.c"

    def test_wrong_value_count(self):
        m = smo_train(np.eye(4), [1.0, -1.0, 1.0, -1.0], 1.0)
        text = dumps_model(m).replace("svm.coef ", "svm.coef 1.0 ")
        with pytest.raises(SchemaError) as exc:
            loads_model(text)
        assert exc.value.field == "svm.coef"


class TestCli:
    def test_usage_errors(self, capsys):
        assert cli.main([]) == 1
        assert cli.main(["train", "--method", "NOPE", "--data", "x", "--model", "y"]) == 1
        assert cli.main(["crossval", "--data", "x", "--out", "y", "--folds", "1"]) == 1
        assert cli.main(["frobnicate"]) == 1

    def test_data_errors(self, tmp_path, small_tree):
        assert cli.main(["crossval", "--data", str(tmp_path / "nothing"), "--out", str(tmp_path / "o.csv")]) == 2
        bad_cfg = tmp_path / "bad.cfg"
        bad_cfg.write_text("svm.c=zero\n")
        assert cli.main(["crossval", "--data", str(small_tree), "--config", str(bad_cfg), "--out", str(tmp_path / "o.csv")]) == 2
        not_model = tmp_path / "m.txt"
        not_model.write_text("hello\n")
        assert cli.main(["predict", "--model", str(not_model), "--image", "x.pgm"]) == 2

    def test_train_predict_eval(self, tmp_path, small_tree, small_config_file, capsys):
        model = tmp_path / "m.txt"
        assert cli.main(["train", "--method", "SVM", "--data", str(small_tree), "--config", str(small_config_file), "--model", str(model)]) == 0
        image = next((small_tree / "bars_v").glob("*.pgm"))
        capsys.readouterr()
        assert cli.main(["predict", "--model", str(model), "--image", str(image)]) == 0
        assert capsys.readouterr().out.strip().endswith("bars_v")
        out = tmp_path / "e.csv"
        assert cli.main(["eval", "--model", str(model), "--data", str(small_tree), "--out", str(out)]) == 0
        (block,) = read_report_csv(out)
        assert block["method"] == "SVM"
        assert block["confusion"].sum() == 36

    def test_extract_and_codebook(self, tmp_path, small_tree, small_config_file):
        cb = tmp_path / "cb.txt"
        assert cli.main(["codebook", "--data", str(small_tree), "--config", str(small_config_file), "--out", str(cb)]) == 0
        assert load_model(cb).k == 16
        cache = tmp_path / "d.txt"
        assert cli.main(["extract", "--data", str(small_tree), "--config", str(small_config_file), "--codebook", str(cb), "--out", str(cache)]) == 0
        lines = cache.read_text().splitlines()
        assert lines[0].startswith("# kernelboost-descriptors")
        assert len(lines) == 1 + 2 * 36

    def test_crossval_byte_identical(self, tmp_path, small_tree, small_config_file):
        args = ["crossval", "--data", str(small_tree), "--config", str(small_config_file), "--folds", "3", "--seed", "4"]
        assert cli.main(args + ["--out", str(tmp_path / "a.csv"), "--method", "KNN", "--method", "ADABOOST"]) == 0
        assert cli.main(args + ["--out", str(tmp_path / "b.csv"), "--method", "KNN", "--method", "ADABOOST"]) == 0
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert [b["method"] for b in read_report_csv(tmp_path / "a.csv")] == ["KNN", "ADABOOST"]
