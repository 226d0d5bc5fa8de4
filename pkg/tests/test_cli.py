import os

import pytest

from hierdialog import checkpoint as ckpt_io
from hierdialog.cli import main

HERE = os.path.dirname(__file__)
DATA = os.path.join(HERE, "data")
GOLDEN = os.path.join(HERE, "golden")
CORPUS = os.path.join(DATA, "mini.jsonl")
SCHEMA = ["--set", f"schema_path={os.path.join(DATA, 'schema.json')}"]
TINY = ["--set", "dim=8", "--set", "ff_dim=16", "--set", "heads=2", "--set", "max_len=64", "--set", "batch_size=2"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def zero_epoch_ckpt(tmp_path_factory):
    path = tmp_path_factory.mktemp("ck") / "init.ckpt"
    code = main(["train", "--checkpoint", str(path), "--set", f"train_path={CORPUS}", *SCHEMA, *TINY, "--set", "epochs=0",
                 "--out", os.devnull])
    assert code == 0
    return str(path)


GOLDEN_CASES = {
    "sequence_d1.txt": ["inspect-sequence", "--id", "d1"],
    "sequence_d1_plain.txt": ["inspect-sequence", "--id", "d1", "--set", "no_special_tokens=true", "--set", "no_turn_mask=true"],
    "sequence_d2_prefix.txt": ["inspect-sequence", "--id", "d2", "--prefix"],
    "mask_d1.txt": ["inspect-mask", "--id", "d1"],
    "mask_d2.txt": ["inspect-mask", "--id", "d2"],
    "mask_d1_disabled.txt": ["inspect-mask", "--id", "d1", "--set", "no_turn_mask=true"],
    "graph_d1.txt": ["inspect-graph", "--id", "d1"],
    "graph_d3.txt": ["inspect-graph", "--id", "d3"],
}


@pytest.mark.parametrize("name", sorted(GOLDEN_CASES))
def test_inspect_golden(name, capsys, update_golden):
    code, out, _ = run(capsys, *GOLDEN_CASES[name], "--corpus", CORPUS, *SCHEMA)
    assert code == 0
    path = os.path.join(GOLDEN, name)
    if update_golden:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(out)
    with open(path, encoding="utf-8") as fh:
        assert out == fh.read()


def test_inspect_graph_with_checkpoint_golden(capsys, zero_epoch_ckpt, update_golden):
    code, out, _ = run(capsys, "inspect-graph", "--id", "d1", "--corpus", CORPUS, "--checkpoint", zero_epoch_ckpt, *SCHEMA)
    assert code == 0
    path = os.path.join(GOLDEN, "graph_d1_composed.txt")
    if update_golden:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(out)
    with open(path, encoding="utf-8") as fh:
        assert out == fh.read()


def test_inspect_defaults_to_first_instance(capsys):
    _, out, _ = run(capsys, "inspect-mask", "--corpus", CORPUS, *SCHEMA)
    assert out.startswith("id = d1\n")


def test_unknown_id_is_data_error(capsys):
    code, _, err = run(capsys, "inspect-mask", "--id", "nope", "--corpus", CORPUS, *SCHEMA)
    assert code == 1 and "UNKNOWN_ID" in err


def test_malformed_corpus_exits_1(capsys, tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "x"\n')
    code, _, err = run(capsys, "inspect-sequence", "--corpus", str(bad), *SCHEMA)
    assert code == 1 and "MALFORMED_LINE" in err


def test_missing_corpus_file_exits_1(capsys, tmp_path):
    code, _, err = run(capsys, "inspect-sequence", "--corpus", str(tmp_path / "none.jsonl"), *SCHEMA)
    assert code == 1 and "UNREADABLE" in err


def test_bad_config_exits_2(capsys, tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("heads = 5\n")
    code, _, err = run(capsys, "train", "--config", str(cfg))
    assert code == 2 and "BAD_HEADS" in err
    code, _, err = run(capsys, "train", "--set", "nonsense")
    assert code == 2 and "MALFORMED_OVERRIDE" in err
    code, _, err = run(capsys, "train")
    assert code == 2 and "MISSING_PATH" in err


def test_usage_error_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nonfinite_training_exits_3(capsys):
    code, _, err = run(capsys, "train", "--set", f"train_path={CORPUS}", *SCHEMA, *TINY, "--set", "lr=1e300",
                       "--set", "epochs=2", "--checkpoint", os.devnull)
    assert code == 3 and "NONFINITE_LOSS" in err


def test_grad_check_exits_0(capsys):
    code, out, _ = run(capsys, "grad-check")
    assert code == 0
    assert "FAIL" not in out and "encoder.tok_emb" in out


def test_gen_train_evaluate_round_trip(capsys, tmp_path):
    out_dir = tmp_path / "syn"
    code, out, _ = run(capsys, "gen-synthetic", "--out-dir", str(out_dir), "--train", "12", "--dev", "6", "--test", "0",
                       "--classes", "3", "--seed", "5")
    assert code == 0 and out == f"wrote train=12 dev=6 to {out_dir}\n"
    assert sorted(os.listdir(out_dir)) == ["config.txt", "dev.jsonl", "schema.json", "train.jsonl"]
    cfg = str(out_dir / "config.txt")
    code, train_out, _ = run(capsys, "train", "--config", cfg, *TINY, "--set", "epochs=2")
    assert code == 0
    ckpt = out_dir / "checkpoints" / "model.ckpt"
    assert ckpt.exists()
    assert ckpt_io.load(str(ckpt)).config.epochs == 2
    code, eval_out, _ = run(capsys, "evaluate", "--checkpoint", str(ckpt))
    assert code == 0 and eval_out == train_out
    code, _, err = run(capsys, "evaluate", "--checkpoint", str(ckpt), "--corpus", CORPUS, *SCHEMA)
    assert code == 2 and "CONFIG_MISMATCH" in err


def test_gen_synthetic_is_deterministic(capsys, tmp_path):
    for name in ("a", "b"):
        assert run(capsys, "gen-synthetic", "--out-dir", str(tmp_path / name), "--train", "5", "--dev", "0",
                   "--test", "0", "--seed", "9")[0] == 0
    assert (tmp_path / "a" / "train.jsonl").read_bytes() == (tmp_path / "b" / "train.jsonl").read_bytes()


def test_ablate_writes_reports(capsys, tmp_path):
    report_dir = tmp_path / "abl"
    code, out, _ = run(capsys, "ablate", "--set", f"train_path={CORPUS}", "--set", f"dev_path={CORPUS}", *SCHEMA, *TINY,
                       "--set", "epochs=1", "--variants", "full,intra_only", "--report-dir", str(report_dir))
    assert code == 0
    assert sorted(os.listdir(report_dir)) == ["full.txt", "intra_only.txt"]
    text = (report_dir / "full.txt").read_text()
    assert "dev.micro_f1 = " in text and "train.micro_f1 = " in text
    assert out.splitlines()[0].split()[0] == "variant"
    code, _, err = run(capsys, "ablate", "--set", f"train_path={CORPUS}", *SCHEMA, "--variants", "huge")
    assert code == 2 and "UNKNOWN_VARIANT" in err


def test_evaluate_writes_report_file(capsys, tmp_path, zero_epoch_ckpt):
    out = tmp_path / "report.txt"
    code, stdout, _ = run(capsys, "evaluate", "--checkpoint", zero_epoch_ckpt, "--corpus", CORPUS, *SCHEMA,
                          "--set", "metrics=micro_f1,f1c", "--out", str(out))
    assert code == 0 and stdout == ""
    pairs = dict(line.split(" = ") for line in out.read_text().splitlines())
    assert pairs["support"] == "3" and pairs["f1c"] != "none"
    assert "group.class_group.symmetric.support" in pairs
