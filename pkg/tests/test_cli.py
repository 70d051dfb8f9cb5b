"""Command-line surface: files, exit codes, determinism, manifests, figures."""

import json

import pytest

from amlgraph.cli import main

from conftest import write_walkthrough_csvs


def run(args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synthdata")
    code = run(
        [
            "synth",
            "--nodes-count", 1500,
            "--records", 80,
            "--suspicious-frac", 0.2,
            "--seed", 3,
            "--out", d,
        ]
    )
    assert code == 0
    return d


def test_synth_outputs(synth_dir):
    for name in ("nodes.csv", "edges.csv", "subgraphs.csv", "subgraph_labels.csv", "manifest.json"):
        assert (synth_dir / name).exists(), name
    manifest = json.loads((synth_dir / "manifest.json").read_text())
    assert manifest["command"] == "synth"
    assert manifest["seed"] == 3
    assert "config_hash" in manifest and "version" in manifest


def test_synth_reproducible_files(tmp_path):
    outs = []
    for sub in ("a", "b"):
        d = tmp_path / sub
        assert run(["synth", "--nodes-count", 800, "--records", 40, "--seed", 5, "--out", d]) == 0
        outs.append((d / "edges.csv").read_bytes())
    assert outs[0] == outs[1]


def test_build_on_walkthrough(tmp_path):
    nodes, edges, labels = write_walkthrough_csvs(tmp_path)
    out = tmp_path / "out"
    code = run(
        [
            "build",
            "--nodes", nodes,
            "--edges", edges,
            "--labels", labels,
            "--timestamp-col", "timestamp",
            "--out", out,
        ]
    )
    assert code == 0
    report = json.loads((out / "build_report.json").read_text())
    assert report["paths"]["licit"] == 3
    assert report["paths"]["illicit"] == 1
    assert report["paths"]["suspicious"] == 3
    assert report["paths"]["neutral"] == 1
    assert report["records"] == {"licit": 1, "suspicious": 1}
    rows = (out / "subgraphs.csv").read_text().splitlines()[1:]
    members = {}
    for row in rows:
        sid, node = row.split(",")
        members.setdefault(sid, set()).add(int(node))
    assert sorted(map(sorted, members.values())) == [
        [4, 5, 7, 8, 9, 10, 11],
        [14, 15, 17],
    ]
    assert (out / "subgraph_sizes.png").stat().st_size > 0


def test_build_rerun_byte_identical(tmp_path):
    nodes, edges, labels = write_walkthrough_csvs(tmp_path)
    blobs = []
    for sub in ("r1", "r2"):
        out = tmp_path / sub
        assert run(
            ["build", "--nodes", nodes, "--edges", edges, "--labels", labels,
             "--timestamp-col", "timestamp", "--out", out, "--no-figures"]
        ) == 0
        blobs.append(
            tuple((out / n).read_bytes() for n in
                  ("subgraphs.csv", "subgraph_labels.csv", "build_report.json", "manifest.json"))
        )
    assert blobs[0] == blobs[1]


def test_build_missing_labels_file_exit_3(tmp_path, capsys):
    nodes, edges, _ = write_walkthrough_csvs(tmp_path)
    code = run(
        ["build", "--nodes", nodes, "--edges", edges,
         "--labels", tmp_path / "absent.csv", "--out", tmp_path]
    )
    assert code == 3
    assert "absent.csv" in capsys.readouterr().err


def test_missing_required_flag_exit_2(tmp_path):
    assert run(["build", "--out", tmp_path]) == 2


def test_bad_config_file_exit_2(tmp_path):
    cfg = tmp_path / "conf.json"
    cfg.write_text("not json at all")
    assert run(["synth", "--config", cfg, "--out", tmp_path]) == 2


def test_config_file_supplies_defaults(tmp_path):
    cfg = tmp_path / "conf.json"
    cfg.write_text(json.dumps({"nodes_count": 900, "records": 30, "seed": 8}))
    out = tmp_path / "o"
    assert run(["synth", "--config", cfg, "--out", out]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["records"] == 30
    assert manifest["seed"] == 8


def test_stats_command(synth_dir, tmp_path, capsys):
    out = tmp_path / "stats"
    code = run(
        [
            "stats",
            "--nodes", synth_dir / "nodes.csv",
            "--edges", synth_dir / "edges.csv",
            "--subgraphs", synth_dir / "subgraphs.csv",
            "--subgraph-labels", synth_dir / "subgraph_labels.csv",
            "--out", out,
        ]
    )
    assert code == 0
    summary = json.loads((out / "stats.json").read_text())
    assert summary["subgraphs"] == 80
    assert summary["nodes"] == 1500
    assert summary["licit"]["count"] + summary["suspicious"]["count"] == 80
    assert summary["licit"]["min_nodes"] >= 2
    assert "subgraphs: 80" in capsys.readouterr().out


def test_sample_command(synth_dir, tmp_path):
    out = tmp_path / "sample"
    code = run(
        [
            "sample",
            "--nodes", synth_dir / "nodes.csv",
            "--edges", synth_dir / "edges.csv",
            "--subgraphs", synth_dir / "subgraphs.csv",
            "--fanouts", "3,3",
            "--batch-size", 8,
            "--num-batches", 2,
            "--seed", 1,
            "--out", out,
        ]
    )
    assert code == 0
    lines = (out / "minibatches.jsonl").read_text().splitlines()
    assert len(lines) == 2
    first = json.loads(lines[0])
    assert first["ranges"][0][0] == 0
    assert len(first["layers"]) == 2
    assert len(first["node_list"]) >= first["ranges"][-1][1]


def test_vip_command(synth_dir, tmp_path):
    out = tmp_path / "vip"
    code = run(
        [
            "vip",
            "--nodes", synth_dir / "nodes.csv",
            "--edges", synth_dir / "edges.csv",
            "--subgraphs", synth_dir / "subgraphs.csv",
            "--batch-size", 16,
            "--fanouts", "4,4",
            "--partitions", 3,
            "--cache-budget", 50,
            "--trials", 10,
            "--seed", 2,
            "--out", out,
        ]
    )
    assert code == 0
    report = json.loads((out / "comm_report.json").read_text())
    assert set(report) == {"no_cache", "random_cache", "vip_cache"}
    assert report["vip_cache"]["remote_rows_with_cache"] <= report["no_cache"]["remote_rows_with_cache"]
    header = (out / "vip.csv").read_text().splitlines()[0]
    assert header == "node_id,layer,probability"
    assert (out / "vip_layers.png").exists()
    assert (out / "comm_volume.png").exists()


@pytest.fixture(scope="module")
def trained_dir(synth_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("trained")
    code = run(
        [
            "train",
            "--nodes", synth_dir / "nodes.csv",
            "--edges", synth_dir / "edges.csv",
            "--subgraphs", synth_dir / "subgraphs.csv",
            "--subgraph-labels", synth_dir / "subgraph_labels.csv",
            "--mode", "glass",
            "--epochs", 3,
            "--batch-size", 32,
            "--hidden", 4,
            "--patience", 0,
            "--seed", 4,
            "--out", out,
        ]
    )
    assert code == 0
    return out


def test_train_outputs(trained_dir):
    assert (trained_dir / "model.bin").exists()
    history = (trained_dir / "history.csv").read_text().splitlines()
    assert history[0] == "epoch,loss,val_pr_auc,val_roc_auc"
    assert len(history) == 4
    assert (trained_dir / "training_curves.png").exists()


def test_eval_command(synth_dir, trained_dir, tmp_path):
    out = tmp_path / "eval"
    code = run(
        [
            "eval",
            "--nodes", synth_dir / "nodes.csv",
            "--edges", synth_dir / "edges.csv",
            "--subgraphs", synth_dir / "subgraphs.csv",
            "--subgraph-labels", synth_dir / "subgraph_labels.csv",
            "--model", trained_dir / "model.bin",
            "--split", "all",
            "--seed", 4,
            "--out", out,
        ]
    )
    assert code == 0
    summary = json.loads((out / "metrics.json").read_text())
    for key in ("micro_f1", "pr_auc", "roc_auc", "confusion"):
        assert key in summary
    assert (out / "sweep.csv").exists()
    assert (out / "pr_roc.png").exists()


def test_eval_single_class_exit_4(tmp_path):
    data = tmp_path / "single"
    assert run(
        ["synth", "--nodes-count", 800, "--records", 30, "--suspicious-frac", 0.0,
         "--seed", 1, "--out", data]
    ) == 0
    train_out = tmp_path / "t"
    assert run(
        ["train", "--nodes", data / "nodes.csv", "--edges", data / "edges.csv",
         "--subgraphs", data / "subgraphs.csv", "--subgraph-labels", data / "subgraph_labels.csv",
         "--epochs", 1, "--hidden", 2, "--patience", 0, "--out", train_out]
    ) == 0
    code = run(
        ["eval", "--nodes", data / "nodes.csv", "--edges", data / "edges.csv",
         "--subgraphs", data / "subgraphs.csv", "--subgraph-labels", data / "subgraph_labels.csv",
         "--model", train_out / "model.bin", "--split", "all", "--out", tmp_path / "e"]
    )
    assert code == 4


def test_no_figures_flag(synth_dir, tmp_path):
    out = tmp_path / "nofig"
    code = run(
        [
            "stats",
            "--subgraphs", synth_dir / "subgraphs.csv",
            "--subgraph-labels", synth_dir / "subgraph_labels.csv",
            "--out", out,
            "--no-figures",
        ]
    )
    assert code == 0
    assert not (out / "subgraph_sizes.png").exists()


def test_feature_count_guard(synth_dir, tmp_path):
    code = run(
        [
            "stats",
            "--nodes", synth_dir / "nodes.csv",
            "--edges", synth_dir / "edges.csv",
            "--node-feature-count", 9,
            "--subgraphs", synth_dir / "subgraphs.csv",
            "--subgraph-labels", synth_dir / "subgraph_labels.csv",
            "--out", tmp_path,
        ]
    )
    assert code == 3  # header disagrees with the configured count


def test_graph_cache_written_and_reused(synth_dir, tmp_path):
    cache = tmp_path / "graph.sgf"
    base = [
        "--nodes", synth_dir / "nodes.csv",
        "--edges", synth_dir / "edges.csv",
        "--subgraphs", synth_dir / "subgraphs.csv",
        "--subgraph-labels", synth_dir / "subgraph_labels.csv",
        "--graph-cache", cache,
        "--no-figures",
    ]
    assert run(["stats", *base, "--out", tmp_path / "a"]) == 0
    assert cache.exists()
    first = json.loads((tmp_path / "a" / "stats.json").read_text())
    # second run loads from the cache (nodes/edges paths may be bogus now)
    assert run(
        ["stats", "--nodes", cache, "--edges", cache, "--graph-cache", cache,
         "--subgraphs", synth_dir / "subgraphs.csv",
         "--subgraph-labels", synth_dir / "subgraph_labels.csv",
         "--no-figures", "--out", tmp_path / "b"]
    ) == 0
    second = json.loads((tmp_path / "b" / "stats.json").read_text())
    assert first == second
