import csv
import json
import os
from collections import Counter

import pytest

import bench
from src.bench.corpus import MAX_SIZE, MIN_SIZE, corpus_files, generate_corpus
from src.bench.errors import DirectoryNotWritable, MismatchedConfigs
from src.bench.experiment import ExperimentConfig, RepeatMetrics, RunMetrics, initial_agents
from src.bench.node import NodeSpec
from src.bench.report import CSV_COLUMNS, load_metrics, report, summarize, time_ratio
from src.pipeline.agents import Mode
from src.pipeline.sources import split_name
from src.utils.settings import Settings, load_settings, settings_from_dict

from .support import free_port


def run_metrics(mode, nodes, times, acl_msgs=100, doc_target=3000):
    metrics = RunMetrics(mode, nodes, doc_target, {"W": 10})
    for n, wall_time in enumerate(times, start=1):
        metrics.repeats.append(RepeatMetrics(n, wall_time, doc_target, acl_msgs, 2048, {"n0:a": acl_msgs}))
    return metrics


class TestCorpus:
    def test_same_seed_same_bytes(self, tmp_path):
        first = generate_corpus(100, 11, str(tmp_path / "a"))
        second = generate_corpus(100, 11, str(tmp_path / "b"))
        assert corpus_files(first) == corpus_files(second)
        for name in corpus_files(first):
            with open(os.path.join(first, name), "rb") as a, open(os.path.join(second, name), "rb") as b:
                assert a.read() == b.read()

    def test_different_seed_differs(self, tmp_path):
        first = generate_corpus(20, 1, str(tmp_path / "a"))
        second = generate_corpus(20, 2, str(tmp_path / "b"))
        contents = [open(os.path.join(d, corpus_files(d)[0]), "rb").read() for d in (first, second)]
        assert contents[0] != contents[1]

    def test_format_mix_and_sizes(self, tmp_path):
        out = generate_corpus(3000, 7, str(tmp_path / "corpus"))
        names = corpus_files(out)
        assert len(names) == 3000
        histogram = Counter(split_name(name)[1].value for name in names)
        assert abs(histogram["TXT"] / 3000 - 0.6) < 0.05
        assert abs(histogram["MARKUP"] / 3000 - 0.3) < 0.05
        assert abs(histogram["BINARY"] / 3000 - 0.1) < 0.05
        for name in names[:200]:
            size = os.path.getsize(os.path.join(out, name))
            assert MIN_SIZE <= size <= MAX_SIZE + 64

    def test_regeneration_replaces_old_files(self, tmp_path):
        out = str(tmp_path / "corpus")
        generate_corpus(10, 1, out)
        generate_corpus(4, 1, out)
        assert [split_name(name)[0] for name in corpus_files(out)] == [f"d{n:06d}" for n in range(1, 5)]

    def test_needs_a_document(self, tmp_path):
        with pytest.raises(ValueError):
            generate_corpus(0, 1, str(tmp_path / "corpus"))

    def test_unwritable_target(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("not a directory")
        with pytest.raises(DirectoryNotWritable):
            generate_corpus(3, 1, str(blocker / "corpus"))


class TestReport:
    def test_ratio(self):
        assert time_ratio(4.5, 10.0) == 45.0
        with pytest.raises(ValueError):
            time_ratio(1.0, 0.0)

    def test_summary_and_reference_lines(self):
        metrics = [run_metrics("ACL_ONLY", 1, [10.0, 10.0]), run_metrics("HYBRID", 1, [4.0, 5.0], acl_msgs=40)]
        summary = summarize(metrics)
        assert summary.doc_target == 3000
        assert summary.ratios == {1: 45.0}
        assert summary.means[("HYBRID", 1)]["acl_msgs"] == 40
        text = report(metrics)
        assert "HYBRID/ACL_ONLY time, 1 node(s): 45.00% (reference 44.48%)" in text
        assert "HYBRID/ACL_ONLY time, 2 node(s): n/a (reference 54.15%)" in text

    def test_one_mode_has_no_ratio(self):
        summary = summarize([run_metrics("ACL_ONLY", 1, [3.0]), run_metrics("ACL_ONLY", 2, [2.0])])
        assert summary.ratios == {}

    def test_needs_two_sets(self):
        with pytest.raises(MismatchedConfigs):
            summarize([run_metrics("HYBRID", 1, [1.0])])

    def test_doc_targets_must_match(self):
        with pytest.raises(MismatchedConfigs):
            summarize([run_metrics("ACL_ONLY", 1, [2.0], doc_target=100),
                       run_metrics("HYBRID", 1, [1.0], doc_target=200)])

    def test_csv_written(self, tmp_path):
        metrics = [run_metrics("ACL_ONLY", 1, [10.0, 11.0]), run_metrics("HYBRID", 1, [4.0])]
        report(metrics, str(tmp_path))
        with open(tmp_path / "results.csv", newline="") as f:
            rows = list(csv.DictReader(f))
        assert list(rows[0]) == CSV_COLUMNS
        assert [(r["mode"], r["repeat"]) for r in rows] == [("ACL_ONLY", "1"), ("ACL_ONLY", "2"), ("HYBRID", "1")]

    def test_load_prefers_json(self, tmp_path):
        run_metrics("ACL_ONLY", 2, [8.0]).save(str(tmp_path))
        run_metrics("HYBRID", 2, [4.0]).save(str(tmp_path))
        loaded = load_metrics(str(tmp_path))
        assert sorted((m.mode, m.nodes) for m in loaded) == [("ACL_ONLY", 2), ("HYBRID", 2)]
        assert summarize(loaded).ratios == {2: 50.0}

    def test_load_from_csv(self, tmp_path):
        metrics = [run_metrics("ACL_ONLY", 1, [10.0]), run_metrics("HYBRID", 1, [5.0])]
        report(metrics, str(tmp_path))
        loaded = load_metrics(str(tmp_path))
        assert summarize(loaded).ratios == {1: 50.0}
        assert loaded[0].repeats[0].acl_msgs == 100

    def test_nothing_saved(self, tmp_path):
        assert load_metrics(str(tmp_path)) == []


class TestExperimentConfig:
    @pytest.mark.parametrize("nodes", [0, 5])
    def test_node_range(self, nodes):
        with pytest.raises(ValueError):
            ExperimentConfig(Mode.HYBRID, nodes=nodes)

    def test_positive_counts(self):
        with pytest.raises(ValueError):
            ExperimentConfig(Mode.HYBRID, doc_target=0)
        with pytest.raises(ValueError):
            ExperimentConfig(Mode.HYBRID, repeats=0)

    def test_label_and_policy(self):
        settings = Settings()
        settings.apply_override("W", "12")
        config = ExperimentConfig("ACL_ONLY", nodes=2, settings=settings)
        assert config.mode == Mode.ACL_ONLY
        assert config.label == "acl_only-2n"
        assert config.policy() == {"W": 12, "H": 5.0, "K": 3, "P": 1.0}

    def test_round_robin_placement(self):
        placement = initial_agents(["n0", "n1"], Settings())
        assert placement["n0"] == [("DataGatherer", "n0:datagatherer-1"), ("Translator", "n0:translator-1"),
                                   ("Indexer", "n0:indexer-1")]
        assert placement["n1"] == [("DataGatherer", "n1:datagatherer-2"), ("Translator", "n1:translator-2"),
                                   ("Indexer", "n1:indexer-2")]

    def test_placement_over_four_nodes(self):
        placement = initial_agents(["n0", "n1", "n2", "n3"], Settings())
        assert [len(agents) for agents in placement.values()] == [2, 2, 1, 1]
        assert sum(len(agents) for agents in placement.values()) == 6

    def test_accounting(self):
        repeat = RepeatMetrics(1, 1.0, 10, 7, 0, {"n0:a": 3, "n0:b": 4})
        assert repeat.accounting_ok
        repeat.acl_msgs = 8
        assert not repeat.accounting_ok

    def test_metrics_round_trip(self, tmp_path):
        metrics = run_metrics("HYBRID", 1, [1.5, 2.5])
        with open(metrics.save(str(tmp_path))) as f:
            restored = RunMetrics.from_dict(json.load(f))
        assert restored == metrics
        assert restored.mean_wall_time == 2.0

    def test_node_spec_file(self, tmp_path):
        spec = NodeSpec("n1", "HYBRID", {"bench": "127.0.0.1:7400", "n1": "127.0.0.1:7402"}, ["n0", "n1"],
                        "/corpus", "/claims", "/index", Settings().to_dict(),
                        [("Translator", "n1:translator-1")], "n0:manager", port_base=7550)
        restored = NodeSpec.load(spec.save(str(tmp_path / "node.json")))
        assert restored == spec
        assert settings_from_dict(restored.settings) == Settings()


class TestSettings:
    def test_aliases(self):
        settings = Settings()
        settings.apply_override("W", "12")
        settings.apply_override("H", "2")
        settings.apply_override("manager", "false")
        settings.apply_override("pipeline.batch_size", "8")
        assert settings.pipeline.policy.window == 12
        assert settings.pipeline.policy.halt_duration == 2.0
        assert isinstance(settings.pipeline.policy.halt_duration, float)
        assert settings.pipeline.manager_enabled is False
        assert settings.pipeline.batch_size == 8

    @pytest.mark.parametrize("key", ["nope", "pipeline.nope", "bench.base_port.x"])
    def test_unknown_key(self, key):
        with pytest.raises(KeyError):
            Settings().apply_override(key, "1")

    def test_partial_dictionary(self):
        settings = settings_from_dict({"bench": {"repeats": 5}, "pipeline": {"policy": {"persistence": 4}}})
        assert settings.bench.repeats == 5
        assert settings.bench.base_port == 7400
        assert settings.pipeline.policy.persistence == 4
        assert settings.pipeline.policy.window == 10

    def test_config_from_environment(self, tmp_path, monkeypatch):
        path = tmp_path / "custom.yaml"
        path.write_text("pipeline:\n  policy:\n    window: 12\nbench:\n  repeats: 1\n")
        monkeypatch.setenv("HYBRID_CONFIG", str(path))
        settings = load_settings(overrides={"K": "5"})
        assert settings.pipeline.policy.window == 12
        assert settings.bench.repeats == 1
        assert settings.pipeline.policy.persistence == 5

    def test_missing_config_gives_defaults(self, tmp_path):
        assert load_settings(str(tmp_path / "absent.yaml")) == Settings()

    def test_shipped_config_matches_defaults(self):
        assert load_settings() == Settings()


class TestCommandLine:
    def test_corpus(self, tmp_path, capsys):
        assert bench.main(["corpus", "--n", "5", "--seed", "3", "--out", str(tmp_path / "c")]) == 0
        assert len(corpus_files(str(tmp_path / "c"))) == 5
        assert "Generated 5 documents" in capsys.readouterr().out

    @pytest.mark.parametrize("override", ["W", "bogus=1"])
    def test_bad_override(self, tmp_path, override):
        argv = ["run", "--mode", "acl", "--out", str(tmp_path), "--set", override]
        assert bench.main(argv) == 2

    def test_too_many_nodes(self, tmp_path):
        assert bench.main(["run", "--mode", "hybrid", "--nodes", "9", "--out", str(tmp_path)]) == 2

    def test_report_without_runs(self, tmp_path):
        assert bench.main(["report", "--in", str(tmp_path)]) == 1

    def test_report(self, tmp_path, capsys):
        run_metrics("ACL_ONLY", 1, [10.0]).save(str(tmp_path))
        run_metrics("HYBRID", 1, [4.448]).save(str(tmp_path))
        assert bench.main(["report", "--in", str(tmp_path)]) == 0
        assert "1 node(s): 44.48% (reference 44.48%)" in capsys.readouterr().out
        assert (tmp_path / "results.csv").exists()

    def test_single_mode_run_writes_results(self, tmp_path, monkeypatch, capsys):
        def run_experiment(config):
            metrics = run_metrics(config.mode.value, config.nodes, [3.0])
            metrics.save(config.out_dir)
            return metrics

        monkeypatch.setattr(bench, "run_experiment", run_experiment)
        assert bench.main(["run", "--mode", "hybrid", "--out", str(tmp_path)]) == 0
        with open(tmp_path / "results.csv", newline="") as f:
            rows = list(csv.DictReader(f))
        assert [(r["mode"], r["nodes"], r["repeat"]) for r in rows] == [("HYBRID", "1", "1")]
        assert "HYBRID/ACL_ONLY" not in capsys.readouterr().out

    def test_parse_overrides(self):
        assert bench.parse_overrides(["W=12", " H = 2.5 "]) == {"W": "12", "H": "2.5"}
        assert bench.parse_overrides(None) == {}


def bench_run(out, mode, nodes, docs=30, extra=()):
    base_port = free_port()
    argv = ["run", "--mode", mode, "--nodes", str(nodes), "--docs", str(docs), "--repeats", "1",
            "--out", str(out), "--set", f"base_port={base_port}", "--set", "bench.run_ceiling=120", "--set", "P=0.3"]
    for override in extra:
        argv += ["--set", override]
    return bench.main(argv)


@pytest.mark.e2e
class TestEndToEnd:
    def test_both_modes_on_one_node(self, tmp_path, capsys):
        assert bench_run(tmp_path, "acl", 1) == 0
        assert bench_run(tmp_path, "hybrid", 1) == 0
        saved = {m.mode: m for m in load_metrics(str(tmp_path))}
        assert set(saved) == {"ACL_ONLY", "HYBRID"}
        for metrics in saved.values():
            [repeat] = metrics.repeats
            assert repeat.docs_indexed == 30
            assert repeat.duplicates == 0
            assert repeat.accounting_ok
        assert saved["ACL_ONLY"].repeats[0].acl_msgs > 0
        assert "HYBRID/ACL_ONLY time, 1 node(s)" in capsys.readouterr().out
        assert (tmp_path / "results.csv").exists()

    def test_hybrid_on_two_nodes(self, tmp_path):
        # gatherer and indexer on n0, translator on n1
        teams = ("gatherers=1", "translators=1", "indexers=1")
        assert bench_run(tmp_path, "hybrid", 2, extra=teams) == 0
        [metrics] = load_metrics(str(tmp_path))
        [repeat] = metrics.repeats
        assert repeat.docs_indexed == 30
        assert repeat.backchannel_bytes > 0
        assert repeat.accounting_ok
