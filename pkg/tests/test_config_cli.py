import json

import numpy as np
import pytest

from rddkit import cli
from rddkit import config as cfgmod
from rddkit.data import load_dataset
from rddkit.exceptions import ConfigError


# ------------------------------------------------------------------- config

def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def test_empty_config_is_all_defaults(tmp_path):
    cfg = cfgmod.parse_config(write_json(tmp_path / "c.json", {}))
    assert cfg == cfgmod.validate(cfgmod.RunConfig())
    assert cfg.schedule.T == 100
    assert cfg.svdd.M == 5
    assert cfg.reward.kind == "synthetic"


def test_config_round_trip(tmp_path):
    cfg = cfgmod.RunConfig()
    cfg.schedule.T = 42
    cfg.net.hidden_dims = [64, 32]
    cfg.finetune.kl_anchor = False
    cfg.reward.target = [1.0, 0.5]
    cfg.dataset = "train.csv"
    path = tmp_path / "cfg.json"
    cfgmod.save_config(cfg, path)
    back = cfgmod.parse_config(str(path))
    assert back == cfg
    # the archived file carries every field, defaults included
    raw = json.loads(path.read_text())
    assert raw == cfgmod.to_dict(cfg)
    assert raw["pretrain"]["epochs"] == 200


def test_unknown_keys_are_rejected_with_paths(tmp_path):
    with pytest.raises(ConfigError, match="wat: unknown key"):
        cfgmod.parse_config(write_json(tmp_path / "a.json", {"wat": 1}))
    with pytest.raises(ConfigError, match=r"svdd\.M0: unknown key"):
        cfgmod.parse_config(write_json(tmp_path / "b.json", {"svdd": {"M0": 1}}))
    with pytest.raises(ConfigError, match=r"schedule\.TT: unknown key"):
        cfgmod.parse_config(write_json(tmp_path / "c.json", {"schedule": {"TT": 5}}))


def test_type_errors_name_the_key(tmp_path):
    cases = [
        ({"schedule": {"T": 1.5}}, "expected an integer"),
        ({"schedule": {"T": True}}, "expected an integer"),
        ({"schedule": {"beta_start": "tiny"}}, "expected a number"),
        ({"schedule": {"kind": 3}}, "expected a string"),
        ({"finetune": {"kl_anchor": 1}}, "expected true/false"),
        ({"schedule": 5}, "expected an object"),
    ]
    for i, (obj, msg) in enumerate(cases):
        with pytest.raises(ConfigError, match=msg):
            cfgmod.parse_config(write_json(tmp_path / f"t{i}.json", obj))


def test_validate_cross_field_errors():
    def broken(**kw):
        cfg = cfgmod.RunConfig()
        for dotted, value in kw.items():
            section, key = dotted.split("__")
            setattr(getattr(cfg, section), key, value)
        return cfg

    cases = [
        (broken(schedule__T=0), r"schedule\.T"),
        (broken(schedule__beta_end=1.5), r"schedule\.beta"),
        (broken(net__embed_dim=7), r"net\.embed_dim"),
        (broken(net__activation="relu"), r"net\.activation"),
        (broken(pretrain__learning_rate=0.0), r"pretrain\.learning_rate"),
        (broken(finetune__m=1), r"finetune\.m"),
        (broken(finetune__alpha=0.0), r"finetune\.alpha"),
        (broken(svdd__M=0), r"svdd\.M"),
        (broken(svdd__n_traj=0), r"svdd\.n_traj"),
        (broken(reward__kind="oracle"), r"reward\.kind"),
        (broken(reward__target=["a"]), r"reward\.target"),
        (broken(reward__kind="surrogate"), r"reward\.surrogate_path"),
    ]
    for cfg, pattern in cases:
        with pytest.raises(ConfigError, match=pattern):
            cfgmod.validate(cfg)


def test_parse_config_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        cfgmod.parse_config(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="invalid JSON"):
        cfgmod.parse_config(str(bad))


# ---------------------------------------------------------------------- cli

def test_usage_errors_exit_1(tmp_path):
    assert cli.main([]) == 1
    assert cli.main(["not-a-command"]) == 1
    assert cli.main(["--help"]) == 0
    # pretrain without any dataset is a configuration error
    assert cli.main(["pretrain", "--outdir", str(tmp_path)]) == 1
    bad_cfg = tmp_path / "bad.json"
    bad_cfg.write_text(json.dumps({"svdd": {"M0": 1}}))
    assert cli.main(["pretrain", "--config", str(bad_cfg), "--data", "x.csv",
                     "--outdir", str(tmp_path)]) == 1


def test_data_errors_exit_2(tmp_path):
    assert cli.main(["pretrain", "--data", str(tmp_path / "nope.csv"),
                     "--outdir", str(tmp_path)]) == 2
    # a hull outside the feasible cube is a data problem, not a crash
    assert cli.main(["hull", "eval",
                     "--params", "1.5,0.25,0.12,0.08,0.5,0.75"]) == 2
    # reward-free samples cannot be evaluated
    plain = tmp_path / "plain.csv"
    plain.write_text("x0,x1\n0.0,1.0\n1.0,0.0\n")
    assert cli.main(["eval", "--samples", str(plain), "--train", str(plain),
                     "--outdir", str(tmp_path)]) == 2


def test_numerical_errors_exit_3(tmp_path):
    # constant targets make R^2 undefined when scoring the surrogate
    rows = ["x0,x1,reward"] + [f"{i * 0.1},{i * 0.2},1.0" for i in range(15)]
    data = tmp_path / "const.csv"
    data.write_text("\n".join(rows) + "\n")
    model = tmp_path / "surr.rddt"
    assert cli.main(["surrogate", "fit", "--data", str(data),
                     "--out", str(model), "--trees", "3"]) == 0
    assert cli.main(["surrogate", "eval", "--model", str(model),
                     "--data", str(data)]) == 3


def test_hull_eval_prints_resistance_json(capsys):
    rc = cli.main(["hull", "eval", "--params", "0.25,0.25,0.12,0.08,0.5,0.75",
                   "--loa", "80"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["aggregate"] > 0
    assert len(out["R_w"]) == 8
    assert len(out["R_w"][0]) == 4
    total = np.array(out["R_w"]) + np.array(out["R_f"])
    assert np.allclose(total, np.array(out["R_T"]))


def test_full_workflow(tmp_path, capsys):
    data = tmp_path / "data.csv"
    assert cli.main(["benchmark", "make", "--n", "300", "--seed", "0",
                     "--out", str(data)]) == 0
    ds = load_dataset(str(data))
    assert ds.X.shape == (300, 2)
    assert ds.rewards is not None

    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "schedule": {"T": 8},
        "net": {"embed_dim": 8, "hidden_dims": [16]},
        "pretrain": {"epochs": 2, "batch_size": 64},
        "finetune": {"S": 2, "m": 8, "batch_size": 8},
        "svdd": {"M": 2, "n_traj": 6},
    }))
    run = tmp_path / "run"
    assert cli.main(["pretrain", "--config", str(cfg), "--data", str(data),
                     "--outdir", str(run)]) == 0
    assert (run / "model.rddm").exists()
    hist = (run / "pretrain_history.csv").read_text().strip().splitlines()
    assert hist[0] == "epoch,mean_loss"
    assert len(hist) == 3
    archived = json.loads((run / "pretrain.config.json").read_text())
    assert archived["schedule"]["T"] == 8
    record = json.loads((run / "pretrain.run.json").read_text())
    assert set(record) >= {"command", "finished_at", "timings_seconds", "outputs"}

    assert cli.main(["finetune", "--config", str(cfg),
                     "--model", str(run / "model.rddm"),
                     "--outdir", str(run)]) == 0
    assert (run / "model_ft.rddm").exists()
    ft_hist = (run / "finetune_history.csv").read_text().strip().splitlines()
    assert ft_hist[0] == "iteration,mean_reward,mean_loss"
    assert len(ft_hist) == 3

    assert cli.main(["sample", "--config", str(cfg),
                     "--model", str(run / "model_ft.rddm"),
                     "--outdir", str(run), "--seed", "5"]) == 0
    samples = load_dataset(str(run / "samples.csv"))
    assert samples.X.shape == (6, 2)
    assert samples.rewards.shape == (6,)
    summary = json.loads((run / "sample_summary.json").read_text())
    assert summary["n"] == 6
    assert summary["M"] == 2

    # same seed, fresh directory: byte-identical samples
    run2 = tmp_path / "run2"
    assert cli.main(["sample", "--config", str(cfg),
                     "--model", str(run / "model_ft.rddm"),
                     "--outdir", str(run2), "--seed", "5"]) == 0
    assert (run / "samples.csv").read_bytes() == (run2 / "samples.csv").read_bytes()

    assert cli.main(["eval", "--samples", str(run / "samples.csv"),
                     "--train", str(data), "--outdir", str(run)]) == 0
    stats = json.loads((run / "eval_stats.json").read_text())
    assert set(stats) == {"samples", "training", "beyond_distribution"}
    assert "fraction_above_training_max" in stats["beyond_distribution"]
    dens = (run / "reward_density.csv").read_text().splitlines()
    assert dens[0] == "reward,density_samples,density_training"
    assert len(dens) == 513

    surr = tmp_path / "surr.rddt"
    assert cli.main(["surrogate", "fit", "--data", str(data), "--out", str(surr),
                     "--trees", "20", "--depth", "3"]) == 0
    assert (tmp_path / "surrogate_fit.json").exists()
    capsys.readouterr()
    assert cli.main(["surrogate", "eval", "--model", str(surr),
                     "--data", str(data)]) == 0
    scored = json.loads(capsys.readouterr().out)
    assert scored["n_rows"] == 300
    assert "r2" in scored and "mse" in scored


def test_hull_dataset_feeds_surrogate(tmp_path):
    out = tmp_path / "hulls.csv"
    assert cli.main(["hull", "dataset", "--n", "12", "--seed", "3",
                     "--loa", "60", "--out", str(out)]) == 0
    ds = load_dataset(str(out))
    assert ds.X.shape == (12, 6)
    assert np.all(np.isfinite(ds.rewards))
    surr = tmp_path / "surr.rddt"
    assert cli.main(["surrogate", "fit", "--data", str(out), "--out", str(surr),
                     "--trees", "5", "--depth", "2"]) == 0
    assert surr.exists()
