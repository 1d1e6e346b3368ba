import csv

import numpy as np
import pytest
import yaml

from deeppromp.cli import main


def write_yaml(path, data):
    path.write_text(yaml.safe_dump(data))
    return str(path)


def read_rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = root / "sine.jsonl"
    assert main(["dataset-gen", "--family", "sine", "--n-demos", "16", "--n-points", "21",
                 "--seed", "1", "--out", str(data)]) == 0
    cfg = write_yaml(root / "train.yaml", {
        "schema_version": 1, "dataset": str(data), "model_kind": "deeppromp",
        "training": {"epochs": 6, "hidden": 8, "latent_dim": 4, "seed": 2}})
    assert main(["train", "--config", cfg, "--out", str(root / "dp")]) == 0
    rdata = root / "rhythmic.jsonl"
    assert main(["dataset-gen", "--n-demos", "8", "--n-points", "21", "--phase-mode", "rhythmic",
                 "--out", str(rdata)]) == 0
    rcfg = write_yaml(root / "rtrain.yaml", {"dataset": str(rdata),
                                             "training": {"epochs": 2, "hidden": 8, "latent_dim": 4}})
    assert main(["train", "--config", rcfg, "--out", str(root / "rhythmic")]) == 0
    targets = root / "targets.csv"
    targets.write_text("t,y0\n0.0,0.2\n0.5,1.0\n")
    targets2 = root / "targets2.csv"
    targets2.write_text("t,y0\n0.0,-0.4\n0.7,0.3\n")
    return root


def test_dataset_gen_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for p in (a, b):
        assert main(["dataset-gen", "--family", "bimodal", "--n-demos", "5", "--seed", "3", "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_train_trace_length_and_rerun(workspace, tmp_path):
    trace = read_rows(workspace / "dp" / "trace.csv")
    assert trace[0] == ["epoch", "loss"]
    assert len(trace) == 1 + 6
    cfg = str(workspace / "train.yaml")
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "again")]) == 0
    assert (tmp_path / "again" / "trace.csv").read_bytes() == (workspace / "dp" / "trace.csv").read_bytes()
    assert (tmp_path / "again" / "checkpoint.json").read_bytes() == \
        (workspace / "dp" / "checkpoint.json").read_bytes()


def test_schema_errors_exit_2(tmp_path, capsys):
    cfg = write_yaml(tmp_path / "bad.yaml", {"training": {"epochs": "many", "colour": 1}, "extra": 3})
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "x")]) == 2
    err = capsys.readouterr().err
    assert "dataset (required)" in err
    assert "training.epochs" in err and "training.colour" in err and "extra" in err
    cfg = write_yaml(tmp_path / "ver.yaml", {"schema_version": 9, "dataset": "d"})
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "x")]) == 2


def test_missing_dataset_file_exit_4(tmp_path):
    cfg = write_yaml(tmp_path / "c.yaml", {"dataset": str(tmp_path / "nope.jsonl")})
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "x")]) == 4


def test_eval_report(workspace, tmp_path):
    out = tmp_path / "eval.csv"
    assert main(["eval", "--checkpoint", str(workspace / "dp" / "checkpoint.json"),
                 "--dataset", str(workspace / "sine.jsonl"), "--out", str(out), "--seed", "4"]) == 0
    rows = read_rows(out)
    assert rows[0] == ["model", "mode", "mse", "log10_mse", "seed", "epochs", "dataset"]
    by_mode = {r[1]: float(r[2]) for r in rows[1:]}
    assert set(by_mode) == {"via_point", "low_dim", "image_like", "low+image", "aggregate"}
    four = [by_mode[m] for m in ("via_point", "low_dim", "image_like", "low+image")]
    assert abs(by_mode["aggregate"] - np.mean(four)) < 1e-12
    assert all(r[4] == "4" and r[5] == "6" for r in rows[1:])
    again = tmp_path / "eval2.csv"
    main(["eval", "--checkpoint", str(workspace / "dp" / "checkpoint.json"),
          "--dataset", str(workspace / "sine.jsonl"), "--out", str(again), "--seed", "4"])
    assert again.read_bytes() == out.read_bytes()


def test_eval_promp_image_is_not_applicable(workspace, tmp_path):
    cfg = write_yaml(tmp_path / "p.yaml", {"dataset": str(workspace / "sine.jsonl"), "model_kind": "promp"})
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "promp")]) == 0
    out = tmp_path / "eval.csv"
    assert main(["eval", "--checkpoint", str(tmp_path / "promp" / "checkpoint.json"),
                 "--dataset", str(workspace / "sine.jsonl"), "--out", str(out)]) == 0
    rows = {r[1]: r for r in read_rows(out)[1:]}
    assert rows["image_like"][2] == "n/a" and rows["image_like"][3] == "n/a"
    assert rows["aggregate"][2] == "n/a"
    assert float(rows["via_point"][2]) < 1e-2


def test_eval_joint_cnmp_masks_are_not_applicable(workspace, tmp_path):
    cfg = write_yaml(tmp_path / "c.yaml", {"dataset": str(workspace / "sine.jsonl"), "model_kind": "cnmp",
                                           "training": {"epochs": 2, "hidden": 8, "latent_dim": 4}})
    assert main(["train", "--config", cfg, "--out", str(tmp_path / "cnmp")]) == 0
    out = tmp_path / "eval.csv"
    assert main(["eval", "--checkpoint", str(tmp_path / "cnmp" / "checkpoint.json"),
                 "--dataset", str(workspace / "sine.jsonl"), "--out", str(out)]) == 0
    rows = {r[1]: r[2] for r in read_rows(out)[1:]}
    assert rows["via_point"] == "n/a" and rows["low+image"] != "n/a"


def test_eval_phase_mismatch_exit_2(workspace, tmp_path):
    assert main(["eval", "--checkpoint", str(workspace / "rhythmic" / "checkpoint.json"),
                 "--dataset", str(workspace / "sine.jsonl"), "--out", str(tmp_path / "e.csv")]) == 2


def test_generate_rows_and_determinism(workspace, tmp_path):
    ck = str(workspace / "dp" / "checkpoint.json")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert main(["generate", "--checkpoint", ck, "--n-samples", "37", "--seed", "5", "--out", str(p),
                     "--context", "params=1.0,0.1,-0.2"]) == 0
    rows = read_rows(a)
    assert rows[0] == ["t", "y0"] and len(rows) == 38
    assert a.read_bytes() == b.read_bytes()


def test_generate_writes_svg(workspace, tmp_path):
    plot = tmp_path / "g.svg"
    assert main(["generate", "--checkpoint", str(workspace / "dp" / "checkpoint.json"),
                 "--out", str(tmp_path / "g.csv"), "--plot", str(plot)]) == 0
    assert plot.read_text().lstrip().startswith("<?xml")


def test_rhythmic_generate_periodic_rows(workspace, tmp_path):
    out = tmp_path / "r.csv"
    assert main(["generate", "--checkpoint", str(workspace / "rhythmic" / "checkpoint.json"),
                 "--periods", "3", "--n-samples", "61", "--out", str(out)]) == 0
    y = [r[1:] for r in read_rows(out)[1:]]
    assert len(y) == 61
    for i in range(41):
        assert y[i] == y[i + 20]


def test_condition_csv(workspace, tmp_path):
    out = tmp_path / "c.csv"
    assert main(["condition", "--checkpoint", str(workspace / "dp" / "checkpoint.json"),
                 "--targets", str(workspace / "targets.csv"), "--k", "4", "--n-samples", "11",
                 "--out", str(out)]) == 0
    rows = read_rows(out)
    assert rows[0] == ["t", "mean0", "var0"] and len(rows) == 12
    assert main(["condition", "--checkpoint", str(workspace / "dp" / "checkpoint.json"),
                 "--out", str(out)]) == 2


def test_blend_constant_one_equals_generate(workspace, tmp_path):
    ck = str(workspace / "dp" / "checkpoint.json")
    blend, gen = tmp_path / "b.csv", tmp_path / "g.csv"
    assert main(["blend", "--checkpoint", ck, "--targets", str(workspace / "targets.csv"),
                 "--targets2", str(workspace / "targets2.csv"), "--omega", "1", "--seed", "7",
                 "--n-samples", "21", "--out", str(blend)]) == 0
    assert main(["generate", "--checkpoint", ck, "--targets", str(workspace / "targets.csv"), "--seed", "7",
                 "--n-samples", "21", "--out", str(gen)]) == 0
    b = [[r[0]] + r[2:] for r in read_rows(blend)[1:]]
    g = read_rows(gen)[1:]
    assert b == g
    assert main(["blend", "--checkpoint", ck, "--targets", str(workspace / "targets.csv"),
                 "--targets2", str(workspace / "targets2.csv"), "--omega", "1.5",
                 "--out", str(blend)]) == 2


def test_refine_trace_and_domain(workspace, tmp_path):
    ck = str(workspace / "dp" / "checkpoint.json")
    out = tmp_path / "r.csv"
    traj = tmp_path / "t.csv"
    assert main(["refine", "--checkpoint", ck, "--targets", str(workspace / "targets.csv"), "--steps", "5",
                 "--k", "4", "--out", str(out), "--trajectory-out", str(traj)]) == 0
    rows = read_rows(out)
    assert rows[0] == ["step", "objective", "max_viapoint_error"] and len(rows) == 7
    objective = [float(r[1]) for r in rows[1:]]
    assert objective == sorted(objective, reverse=True)
    assert len(read_rows(traj)) == 102
    zero = tmp_path / "z.csv"
    assert main(["refine", "--checkpoint", ck, "--targets", str(workspace / "targets.csv"), "--steps", "0",
                 "--k", "4", "--out", str(zero)]) == 0
    assert read_rows(zero)[1] == rows[1]
    bad = tmp_path / "bad.csv"
    bad.write_text("t,y0\n1.5,0.0\n")
    assert main(["refine", "--checkpoint", ck, "--targets", str(bad), "--out", str(out)]) == 2


def test_verbs_need_deeppromp_checkpoint(workspace, tmp_path):
    cfg = write_yaml(tmp_path / "p.yaml", {"dataset": str(workspace / "sine.jsonl"), "model_kind": "promp"})
    main(["train", "--config", cfg, "--out", str(tmp_path / "promp")])
    assert main(["generate", "--checkpoint", str(tmp_path / "promp" / "checkpoint.json"),
                 "--out", str(tmp_path / "g.csv")]) == 2
