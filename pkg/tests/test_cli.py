import json
import warnings
from pathlib import Path

import pytest

from conftest import oracle_pairs
from needcast import checkpoint, cli
from needcast.encoding import write_pairs
from needcast.synth import OracleSpec, generate, write_corpus

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="module")
def pairs_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "pairs.csv"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        write_pairs(path, oracle_pairs(20, seed=2))
    return path


def _run(argv):
    try:
        return cli.main([str(a) for a in argv])
    except SystemExit as exc:
        return exc.code


def test_usage_errors_exit_1(tmp_path, capsys):
    assert _run([]) == 1
    assert _run(["train", "--bogus"]) == 1
    assert _run(["train", "--teacher-forcing", "maybe", "--pairs", "x"]) == 1
    cfg = tmp_path / "c.cfg"
    cfg.write_text("no_such_key=1\n")
    assert _run(["train", "--config", cfg, "--pairs", "x"]) == 1
    cfg.write_text("just text\n")
    assert _run(["train", "--config", cfg]) == 1
    assert "error" in capsys.readouterr().err


def test_missing_file_exit_2(tmp_path, capsys):
    assert _run(["train", "--pairs", tmp_path / "nope.csv", "--out", tmp_path / "o"]) == 2
    assert "not found" in capsys.readouterr().err


def test_bad_data_exit_2(tmp_path):
    bad = tmp_path / "pairs.csv"
    bad.write_text("a,b\n1,2\n")
    assert _run(["train", "--pairs", bad, "--out", tmp_path / "o"]) == 2
    ckpt = tmp_path / "x.ckpt"
    ckpt.write_bytes(b"junk")
    assert _run(["predict", "--checkpoint", ckpt, "--input", "a b c d e f g h"]) == 2


def test_numeric_failure_exit_3(tmp_path, pairs_csv, capsys):
    code = _run(["train", "--pairs", pairs_csv, "--model", "seq2seq", "--hidden", 4, "--epochs", 3,
                 "--optimizer", "sgd", "--lr", "1e308", "--clip", 0, "--out", tmp_path / "o"])
    assert code == 3
    assert "numeric" in capsys.readouterr().err


def test_train_outputs_and_manifest(tmp_path, pairs_csv):
    out = tmp_path / "run"
    assert _run(["train", "--pairs", pairs_csv, "--model", "trigram", "--seed", 4, "--out", out]) == 0
    names = {p.name for p in out.iterdir()}
    assert {"model.ckpt", "loss.csv", "predictions.csv", "smc_overall.csv", "train_summary.txt", "manifest.json"} <= names
    assert "vocab_size=" in (out / "train_summary.txt").read_text()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "train" and manifest["seed"] == 4
    assert manifest["config"]["model"] == "trigram"
    assert set(manifest["versions"]) == {"needcast", "numpy", "python"}
    import hashlib

    assert manifest["outputs"]["model.ckpt"] == hashlib.sha256((out / "model.ckpt").read_bytes()).hexdigest()
    assert checkpoint.load(out / "model.ckpt").model_type == "trigram"


def test_config_then_flag_override(tmp_path, pairs_csv):
    cfg = tmp_path / "train.cfg"
    cfg.write_text(f"# run settings\npairs={pairs_csv}\nmodel=cnn\nepochs=2\nbatch-size=4\nteacher_forcing=off\n")
    out = tmp_path / "a"
    assert _run(["train", "--config", cfg, "--out", out]) == 0
    conf = json.loads((out / "manifest.json").read_text())["config"]
    assert (conf["model"], int(conf["epochs"]), int(conf["batch_size"])) == ("cnn", 2, 4)
    assert conf["teacher_forcing"] in (False, "off")
    out = tmp_path / "b"
    assert _run(["train", "--config", cfg, "--epochs", 1, "--out", out]) == 0
    assert int(json.loads((out / "manifest.json").read_text())["config"]["epochs"]) == 1


def test_predict_eval_round_trip(tmp_path, pairs_csv, capsys):
    run = tmp_path / "run"
    assert _run(["train", "--pairs", pairs_csv, "--model", "seq2seq", "--hidden", 8, "--epochs", 2, "--out", run]) == 0
    pred = tmp_path / "pred"
    assert _run(["predict", "--checkpoint", run / "model.ckpt", "--pairs", pairs_csv, "--out", pred]) == 0
    assert (pred / "predictions.csv").exists() and any((pred / "attention").iterdir())
    ev = tmp_path / "eval"
    assert _run(["eval", "--pairs", pairs_csv, "--checkpoint", run / "model.ckpt", "--out", ev]) == 0
    # the held-out report from training and from eval agree
    assert (ev / "smc_by_block.csv").read_text() == (run / "smc_by_block.csv").read_text()
    ev2 = tmp_path / "eval2"
    assert _run(["eval", "--pairs", pairs_csv, "--predictions", pred / "predictions.csv", "--out", ev2]) == 0
    capsys.readouterr()
    assert _run(["predict", "--checkpoint", run / "model.ckpt", "--input", "a b c d e f g h", "--out", tmp_path / "one"]) == 0
    line = capsys.readouterr().out.strip()
    assert line.endswith("[EOS]") or line.endswith("[CUT]")
    assert _run(["predict", "--checkpoint", run / "model.ckpt", "--input", "a b c"]) == 2


def test_synth_extract_analyze(tmp_path):
    data = tmp_path / "data"
    assert _run(["synth", "--blocks", 8, "--seed", 3, "--noise", 0, "--out", data]) == 0
    ext = tmp_path / "ext"
    assert _run(["extract", "--tweets", data / "tweets.jsonl", "--weather", data / "weather.csv",
                 "--labeled", data / "labeled.jsonl", "--out", ext]) == 0
    assert (ext / "pairs.csv").read_text() == (data / "truth_pairs.csv").read_text()
    ana = tmp_path / "ana"
    assert _run(["analyze", "--tweets", data / "tweets.jsonl", "--weather", data / "weather.csv",
                 "--phi-unit", "tweet", "--out", ana]) == 0
    assert {"concern_flow.csv", "phi.csv", "tweet_rate.csv", "manifest.json"} <= {p.name for p in ana.iterdir()}
    assert _run(["synth", "--blocks", 8, "--noise", 1.5, "--out", tmp_path / "bad"]) in (1, 2)


def test_synth_is_reproducible(tmp_path):
    for name in ("a", "b"):
        assert _run(["synth", "--blocks", 12, "--seed", 1, "--out", tmp_path / name]) == 0
    for f in ("tweets.jsonl", "weather.csv", "labeled.jsonl", "truth_pairs.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    corpus = generate(OracleSpec.for_blocks(12, seed=1))
    write_corpus(corpus, tmp_path / "c")
    assert (tmp_path / "c" / "tweets.jsonl").read_bytes() == (tmp_path / "a" / "tweets.jsonl").read_bytes()
