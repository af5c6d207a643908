"""
End-to-end tests of the fednmf command line: prepare, partition, train,
eval and sweep, driven through main(argv) in a temporary directory.
"""

import csv
import json
import re

import pytest

from cli.main import main
from fednmf.checkpoint import save_topic_model
from fednmf.corpus import load_count_matrix, load_matrix_vocabulary
from fednmf.metrics_log import read_metrics
from fednmf.synthetic import cluster_embeddings, planted_corpus, write_corpus, write_embeddings
from models import Document, TopicModel

SUMMARY = re.compile(r"^coherence=-?\d+\.\d{6} macro_f1=\d+\.\d{6} acc=\d+\.\d{6}$")


@pytest.fixture
def workspace(tmp_path):
    """Prepared 40-document corpus with a matching embedding table"""
    docs, names = planted_corpus(num_docs=40, num_classes=2, seed=1)
    corpus = write_corpus(docs, names, tmp_path / "corpus.tsv")
    assert main(["prepare", "--corpus", str(corpus), "--out", str(tmp_path / "matrix.txt")]) == 0
    vocab = load_matrix_vocabulary(tmp_path / "matrix.txt")
    write_embeddings(cluster_embeddings(vocab, dim=4), tmp_path / "embeddings.txt")
    return tmp_path


def _train_config(workspace, **overrides):
    config = {
        "matrix": "matrix.txt",
        "K": 2, "C": 1.0, "T": 2, "k": 3,
        "critic_hidden": [4, 4],
        "sgd": {"B": 8, "E": 1},
    }
    config.update(overrides)
    path = workspace / "run.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    return path


def test_prepare_writes_matrix(tmp_path, capsys):
    """prepare writes the matrix, its sidecars and a manifest"""
    corpus = tmp_path / "corpus.tsv"
    corpus.write_text("a\tapple pear\nb\tplum pear\na\tapple apple\n", encoding="utf-8")
    assert main(["prepare", "--corpus", str(corpus), "--out", str(tmp_path / "m.txt")]) == 0
    assert "N=3" in capsys.readouterr().out
    assert (tmp_path / "m.txt").read_text(encoding="utf-8").splitlines()[0] == "3 3"
    assert (tmp_path / "m.txt.vocab").read_text(encoding="utf-8").split() == ["apple", "pear", "plum"]
    assert (tmp_path / "m.txt.manifest.json").exists()


def test_prepare_is_byte_reproducible(tmp_path):
    """Two prepare runs on one corpus give identical bytes"""
    corpus = tmp_path / "corpus.tsv"
    corpus.write_text("x\tthe quick fox\ny\tlazy dogs sleep\n", encoding="utf-8")
    for name in ("one.txt", "two.txt"):
        assert main(["prepare", "--corpus", str(corpus), "--out", str(tmp_path / name)]) == 0
    for suffix in ("", ".vocab", ".labels"):
        assert (tmp_path / f"one.txt{suffix}").read_bytes() == (tmp_path / f"two.txt{suffix}").read_bytes()


def test_prepare_missing_corpus(tmp_path, capsys):
    """A missing corpus file exits 1 naming the file"""
    missing = tmp_path / "nowhere.tsv"
    assert main(["prepare", "--corpus", str(missing), "--out", str(tmp_path / "m.txt")]) == 1
    err = capsys.readouterr().err
    assert err.startswith("error:")
    assert "nowhere.tsv" in err


def test_partition_command(workspace):
    """partition writes one line per client with equal shard sizes"""
    out = workspace / "shards.txt"
    assert main(["partition", "--matrix", str(workspace / "matrix.txt"), "--K", "4", "--alpha", "0.5",
                 "--out", str(out)]) == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert [line.split(":")[0] for line in lines] == ["0", "1", "2", "3"]
    assert all(len(line.split(":")[1].split(",")) == 10 for line in lines)


def test_train_rejects_invalid_participation(workspace, capsys):
    """An out-of-range C is reported by field name with exit 1"""
    config = _train_config(workspace, C=0)
    assert main(["train", "--config", str(config), "--out-dir", str(workspace / "run")]) == 1
    err = capsys.readouterr().err
    assert "invalid config" in err and "C:" in err


def test_train_writes_artifacts(workspace):
    """Omitted lambda records the 0.1 default; metrics hold round 0 plus T rounds"""
    run = workspace / "run"
    config = _train_config(workspace)
    assert main(["train", "--config", str(config), "--out-dir", str(run), "--checkpoint-every", "1"]) == 0
    for name in ("manifest.json", "metrics.jsonl", "topic_model.txt", "critic.txt", "doc_topics.txt", "shards.txt"):
        assert (run / name).exists(), name

    manifest = json.loads((run / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["config"]["sgd"]["lambda"] == 0.1
    assert manifest["command"] == "train"

    records = read_metrics(run / "metrics.jsonl")
    assert [r["round"] for r in records] == [0, 1, 2]
    assert all(r["config_hash"] == manifest["config_hash"] for r in records)
    assert (run / "checkpoints" / "round-0002" / "topic_model.txt").exists()


def test_train_metrics_do_not_depend_on_threads(workspace):
    """The metrics file is byte-identical for 1 and 4 threads"""
    config = _train_config(workspace)
    for threads in ("1", "4"):
        assert main(["train", "--config", str(config), "--out-dir", str(workspace / f"t{threads}"),
                     "--threads", threads]) == 0
    assert (workspace / "t1" / "metrics.jsonl").read_bytes() == (workspace / "t4" / "metrics.jsonl").read_bytes()


def test_eval_requires_embeddings_for_coherence(workspace):
    """Coherence without an embedding table is a usage error"""
    with pytest.raises(SystemExit) as exc:
        main(["eval", "--checkpoint", str(workspace / "topic_model.txt"), "--mode", "coherence"])
    assert exc.value.code == 2


def test_eval_both_prints_summary(workspace, capsys):
    """eval prints the summary line and writes both reports under the run's config hash"""
    run = workspace / "run"
    assert main(["train", "--config", str(_train_config(workspace)), "--out-dir", str(run)]) == 0
    capsys.readouterr()
    assert main([
        "eval", "--checkpoint", str(run / "topic_model.txt"),
        "--vocab", str(workspace / "matrix.txt.vocab"),
        "--embeddings", str(workspace / "embeddings.txt"),
        "--mode", "both",
    ]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert SUMMARY.match(lines[-1]), lines[-1]

    topic_report = json.loads((run / "topic_report.json").read_text(encoding="utf-8"))
    classification = json.loads((run / "classification_report.json").read_text(encoding="utf-8"))
    manifest = json.loads((run / "manifest.json").read_text(encoding="utf-8"))
    assert len(topic_report["top_words"]) == 3
    assert topic_report["config_hash"] == classification["config_hash"] == manifest["config_hash"]
    assert set(classification["class_names"].values()) == {"class0", "class1"}


def test_eval_classify_single_class_fails(tmp_path, capsys):
    """Classification with one label class exits 1"""
    save_topic_model(TopicModel([[1.0, 0.0], [0.0, 1.0]]), tmp_path / "topic_model.txt")
    rows = [f"doc-{j}\t0\t{j} 1" for j in range(6)]
    (tmp_path / "doc_topics.txt").write_text("6 2\n" + "\n".join(rows) + "\n", encoding="utf-8")
    assert main(["eval", "--checkpoint", str(tmp_path / "topic_model.txt"), "--mode", "classify"]) == 1
    assert "error:" in capsys.readouterr().err


def _sweep_config(workspace, grid):
    base = json.loads(_train_config(workspace, T=1).read_text(encoding="utf-8"))
    path = workspace / "sweep.json"
    path.write_text(json.dumps({"base": base, "grid": grid}), encoding="utf-8")
    return path


def _read_rows(path):
    with path.open(encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def test_sweep_runs_every_cell(workspace, capsys):
    """Every grid cell gets one row in cartesian order"""
    config = _sweep_config(workspace, {"lambda": [0, 0.1], "seed": [1, 2]})
    out = workspace / "table.csv"
    assert main(["sweep", "--config", str(config), "--out", str(out)]) == 0
    rows = _read_rows(out)
    assert len(rows) == 4
    assert [(r["lambda"], r["seed"]) for r in rows] == [("0", "1"), ("0", "2"), ("0.1", "1"), ("0.1", "2")]
    assert all(r["status"] == "ok" for r in rows)
    assert "4 cells (0 failed)" in capsys.readouterr().out


def test_sweep_records_failed_cells(workspace):
    """A failing cell is recorded and the sweep goes on"""
    config = _sweep_config(workspace, {"B": [0, 8]})
    out = workspace / "table.csv"
    assert main(["sweep", "--config", str(config), "--out", str(out)]) == 0
    rows = _read_rows(out)
    assert [r["status"] for r in rows] == ["failed", "ok"]
    assert rows[0]["error"]


def _doc_topic_ids(path):
    return [line.split("\t")[0] for line in path.read_text(encoding="utf-8").splitlines()[1:]]


def test_eval_leaves_out_empty_documents(tmp_path):
    """Documents whose every token is pruned by min_count stay out of doc_topics and classification"""
    docs, names = planted_corpus(num_docs=30, num_classes=2, seed=2)
    lonely = [Document(id=f"lonely-{j}", text=f"solo{j}a solo{j}b", label=j % 2) for j in range(10)]
    corpus_path = write_corpus(docs + lonely, names, tmp_path / "corpus.tsv")
    assert main(["prepare", "--corpus", str(corpus_path), "--min-count", "2",
                 "--out", str(tmp_path / "matrix.txt")]) == 0
    matrix = load_count_matrix(tmp_path / "matrix.txt")
    nonempty = int((matrix.data.getnnz(axis=0) > 0).sum())
    empty_ids = {matrix.doc_ids[j] for j in range(matrix.N) if matrix.data.getnnz(axis=0)[j] == 0}
    assert {f"doc-{j}" for j in range(31, 41)} <= empty_ids

    run = tmp_path / "run"
    config = _train_config(tmp_path, K=1)
    assert main(["train", "--config", str(config), "--out-dir", str(run)]) == 0
    ids = _doc_topic_ids(run / "doc_topics.txt")
    assert len(ids) == nonempty
    assert not empty_ids & set(ids)

    assert main(["eval", "--checkpoint", str(run / "topic_model.txt"), "--mode", "classify"]) == 0
    report = json.loads((run / "classification_report.json").read_text(encoding="utf-8"))
    assert report["n_train"] + report["n_test"] == nonempty


def test_prepare_writes_train_test_split(workspace):
    """Both sides of the split carry the full corpus vocabulary"""
    out = workspace / "matrix.txt"
    assert main(["prepare", "--corpus", str(workspace / "corpus.tsv"), "--out", str(out),
                 "--test-ratio", "0.25", "--split-seed", "3"]) == 0
    train = load_count_matrix(workspace / "matrix.txt.train")
    test = load_count_matrix(workspace / "matrix.txt.test")
    assert (train.N, test.N) == (30, 10)
    assert not set(train.doc_ids) & set(test.doc_ids)
    vocab = (workspace / "matrix.txt.vocab").read_bytes()
    assert (workspace / "matrix.txt.train.vocab").read_bytes() == vocab
    assert (workspace / "matrix.txt.test.vocab").read_bytes() == vocab

    manifest = json.loads((workspace / "matrix.txt.manifest.json").read_text(encoding="utf-8"))
    assert manifest["config"]["test_ratio"] == 0.25
    assert {"train", "test"} <= set(manifest["outputs"])


def _foldin_run(workspace):
    assert main(["prepare", "--corpus", str(workspace / "corpus.tsv"), "--out", str(workspace / "matrix.txt"),
                 "--test-ratio", "0.25", "--split-seed", "3"]) == 0
    run = workspace / "run"
    config = _train_config(workspace, matrix="matrix.txt.train")
    assert main(["train", "--config", str(config), "--out-dir", str(run)]) == 0
    return run


def test_eval_foldin_end_to_end(workspace, capsys):
    """Train on the training side, fold in the held-out side and score it"""
    run = _foldin_run(workspace)
    capsys.readouterr()
    assert main(["eval", "--checkpoint", str(run / "topic_model.txt"), "--mode", "classify",
                 "--features", "foldin", "--test-matrix", str(workspace / "matrix.txt.test")]) == 0
    assert re.match(r"^macro_f1=\d+\.\d{6} acc=\d+\.\d{6}$", capsys.readouterr().out.strip().splitlines()[-1])

    report = json.loads((run / "classification_report.json").read_text(encoding="utf-8"))
    assert report["features"] == "foldin"
    assert (report["n_train"], report["n_test"]) == (30, 10)


def test_eval_foldin_rejects_foreign_vocabulary(workspace, capsys):
    """A held-out matrix indexed by another vocabulary of the same size is refused"""
    run = _foldin_run(workspace)
    foreign = workspace / "foreign.txt"
    foreign.write_bytes((workspace / "matrix.txt.test").read_bytes())
    (workspace / "foreign.txt.labels").write_bytes((workspace / "matrix.txt.test.labels").read_bytes())
    terms = (workspace / "matrix.txt.vocab").read_text(encoding="utf-8").splitlines()
    (workspace / "foreign.txt.vocab").write_text("\n".join(reversed(terms)) + "\n", encoding="utf-8")

    assert main(["eval", "--checkpoint", str(run / "topic_model.txt"), "--mode", "classify",
                 "--features", "foldin", "--test-matrix", str(foreign)]) == 1
    assert "does not match the training vocabulary" in capsys.readouterr().err
