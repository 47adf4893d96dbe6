"""Command-line interface: config parsing, exit codes, output files."""
import json

import numpy as np
import pytest

from pricing_lab import cli
from pricing_lab.cli import (ConfigError, EXIT_CONFIG, EXIT_OK, main,
                             parse_grid, resolve_config, resolved_doc)
from pricing_lab.harness import build_env


def base_doc(**run_overrides):
    run = {"T": 25, "reps": 2, "seed": 5}
    run.update(run_overrides)
    return {
        "problem": {"d1": 2, "d2": 1, "noise_R": 0.1},
        "offline": {"N": 100, "v_true": 0.3},
        "policies": [
            {"kind": "ucb", "lam": 0.5},
            {"kind": "greedy_offline"},
            {"kind": "clairvoyant"},
        ],
        "run": run,
    }


def write_doc(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


# ---------------------------------------------------------------------------
# parse_grid


def test_parse_grid_power_form():
    got = parse_grid("T^{-n/5}:0..9", 5000)
    assert len(got) == 10
    assert got == [5000.0 ** (-n / 5) for n in range(10)]
    assert got[0] == 1.0
    single = parse_grid("T^{-n/4}:3..3", 100)
    assert single == [100.0 ** (-3 / 4)]


def test_parse_grid_comma_form():
    assert parse_grid("0.5,0.25, 0.125", 999) == [0.5, 0.25, 0.125]
    assert parse_grid("0.0", 10) == [0.0]


@pytest.mark.parametrize("bad", [
    "T^{-n/0}:0..3",
    "T^{-n/5}:5..2",
    "abc",
    "",
    "-1,2",
])
def test_parse_grid_rejects(bad):
    with pytest.raises(ConfigError):
        parse_grid(bad, 100)


# ---------------------------------------------------------------------------
# resolve_config


def test_resolve_config_basics():
    cfg, resolved = resolve_config(base_doc())
    assert cfg.spec.d1 == 2 and cfg.spec.d2 == 1
    assert cfg.T == 25 and cfg.reps == 2 and cfg.master_seed == 5
    assert cfg.v_true == 0.3
    assert cfg.v_bound == pytest.approx(1.1 * 0.3)
    assert [p.kind for p in cfg.policies] == ["ucb", "greedy_offline",
                                              "clairvoyant"]
    assert cfg.policies[0].params == {"lam": 0.5}
    assert resolved["run"]["seed"] == 5


def test_resolve_config_seed_override():
    cfg, resolved = resolve_config(base_doc(), seed_override=99)
    assert cfg.master_seed == 99
    assert resolved["run"]["seed"] == 99


def test_resolved_doc_round_trips():
    cfg, resolved = resolve_config(base_doc())
    cfg2, resolved2 = resolve_config(resolved)
    assert resolved2 == resolved
    a = build_env(cfg, rep=0)
    b = build_env(cfg2, rep=0)
    assert np.array_equal(a.theta_star.as_vector(), b.theta_star.as_vector())
    assert np.array_equal(a.xs, b.xs)
    assert np.array_equal(a.offline.demands, b.offline.demands)


@pytest.mark.parametrize("mutate,needle", [
    (lambda d: d.update(extra={}), "unknown key"),
    (lambda d: d["problem"].update(scale=2), "unknown key"),
    (lambda d: d["offline"].update(bias=1), "unknown key"),
    (lambda d: d["run"].update(workers=4), "unknown key"),
    (lambda d: d.pop("offline"), "missing"),
    (lambda d: d["run"].pop("T"), "missing"),
    (lambda d: d["policies"][0].update(v_bound=1.0), "unknown parameter"),
    (lambda d: d["policies"].clear(), "nonempty"),
    (lambda d: d["policies"].append({"kind": "linucb"}), "unknown kind"),
    (lambda d: d["offline"].update(price_scheme="normal"), "price_scheme"),
    (lambda d: d["run"].update(T=True), "integer"),
    (lambda d: d["run"].update(T=12.5), "integer"),
    (lambda d: d["offline"].update(v_true=-0.1), "nonnegative"),
    (lambda d: d["problem"].update(param_scale=0), "positive"),
])
def test_resolve_config_rejects_bad_documents(mutate, needle):
    doc = base_doc()
    mutate(doc)
    with pytest.raises(ConfigError, match=needle):
        resolve_config(doc)


# ---------------------------------------------------------------------------
# run subcommand


def test_missing_config_file_exits_2(tmp_path, capsys):
    missing = str(tmp_path / "nope.json")
    rc = main(["run", "--config", missing, "--out", str(tmp_path / "out")])
    assert rc == EXIT_CONFIG == 2
    assert missing in capsys.readouterr().err


def test_invalid_json_exits_2(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    rc = main(["run", "--config", str(path), "--out", str(tmp_path / "out")])
    assert rc == EXIT_CONFIG
    assert "JSON" in capsys.readouterr().err


def test_run_writes_outputs_and_manifest(tmp_path):
    cfg_path = write_doc(tmp_path, base_doc())
    out = tmp_path / "out"
    assert main(["run", "--config", cfg_path, "--out", str(out)]) == EXIT_OK
    for name in ("trace.csv", "aggregate.csv", "sweep.csv", "manifest.json"):
        assert (out / name).is_file()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "run"
    assert manifest["config"]["run"]["T"] == 25
    assert manifest["measured"]["v_true"] == 0.3
    assert manifest["measured"]["lam_min_offline_gram"] > 0
    assert "delta_sq" in manifest["measured"]


def test_same_config_same_seed_is_byte_identical(tmp_path):
    cfg_path = write_doc(tmp_path, base_doc())
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", cfg_path, "--out", str(a)]) == EXIT_OK
    assert main(["run", "--config", cfg_path, "--out", str(b)]) == EXIT_OK
    for name in ("trace.csv", "aggregate.csv", "sweep.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_thread_count_leaves_the_csvs_unchanged(tmp_path):
    cfg_path = write_doc(tmp_path, base_doc(reps=4))
    a, b = tmp_path / "t1", tmp_path / "t8"
    assert main(["run", "--config", cfg_path, "--out", str(a),
                 "--threads", "1"]) == EXIT_OK
    assert main(["run", "--config", cfg_path, "--out", str(b),
                 "--threads", "8"]) == EXIT_OK
    assert (a / "aggregate.csv").read_bytes() == (b / "aggregate.csv").read_bytes()
    assert (a / "trace.csv").read_bytes() == (b / "trace.csv").read_bytes()


def test_seed_flag_changes_the_run(tmp_path):
    cfg_path = write_doc(tmp_path, base_doc())
    a, b = tmp_path / "s5", tmp_path / "s6"
    main(["run", "--config", cfg_path, "--out", str(a)])
    main(["run", "--config", cfg_path, "--out", str(b), "--seed", "6"])
    assert (a / "aggregate.csv").read_bytes() != (b / "aggregate.csv").read_bytes()
    manifest = json.loads((b / "manifest.json").read_text())
    assert manifest["config"]["run"]["seed"] == 6


def test_manifest_config_reruns_identically(tmp_path):
    cfg_path = write_doc(tmp_path, base_doc())
    first = tmp_path / "first"
    main(["run", "--config", cfg_path, "--out", str(first)])
    manifest = json.loads((first / "manifest.json").read_text())
    replay_path = write_doc(tmp_path, manifest["config"], name="replay.json")
    second = tmp_path / "second"
    assert main(["run", "--config", replay_path, "--out", str(second)]) == EXIT_OK
    assert (first / "aggregate.csv").read_bytes() == \
        (second / "aggregate.csv").read_bytes()


def test_threads_env_fallback(tmp_path, capsys, monkeypatch):
    cfg_path = write_doc(tmp_path, base_doc())
    monkeypatch.setenv("PRICING_LAB_THREADS", "2")
    out = tmp_path / "env2"
    assert main(["run", "--config", cfg_path, "--out", str(out)]) == EXIT_OK
    ref = tmp_path / "ref"
    monkeypatch.delenv("PRICING_LAB_THREADS")
    main(["run", "--config", cfg_path, "--out", str(ref)])
    assert (out / "aggregate.csv").read_bytes() == \
        (ref / "aggregate.csv").read_bytes()
    monkeypatch.setenv("PRICING_LAB_THREADS", "lots")
    rc = main(["run", "--config", cfg_path, "--out", str(tmp_path / "bad")])
    assert rc == EXIT_CONFIG
    assert "PRICING_LAB_THREADS" in capsys.readouterr().err
    # an explicit flag wins over the (still bad) environment value
    assert main(["run", "--config", cfg_path, "--out",
                 str(tmp_path / "flag"), "--threads", "1"]) == EXIT_OK


def test_runtime_failure_exits_3(tmp_path):
    cfg_path = write_doc(tmp_path, base_doc())
    blocker = tmp_path / "blocked"
    blocker.write_text("a file where the output directory should go")
    rc = main(["run", "--config", cfg_path, "--out", str(blocker)])
    assert rc == cli.EXIT_RUNTIME == 3


# ---------------------------------------------------------------------------
# sweep subcommand


def test_sweep_grid_values_appear_verbatim(tmp_path):
    doc = base_doc()
    doc["policies"] = [{"kind": "ucb", "lam": 0.5}, {"kind": "greedy_offline"}]
    cfg_path = write_doc(tmp_path, doc)
    out = tmp_path / "sweep"
    rc = main(["sweep", "--config", cfg_path, "--grid", "T^{-n/5}:0..9",
               "--out", str(out)])
    assert rc == EXIT_OK
    grid = parse_grid("T^{-n/5}:0..9", 25)
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0] == "policy,v_true_sq,mean_final_regret,std_final_regret"
    got = [float(ln.split(",")[1]) for ln in lines[1:]]
    assert got == [v for v in grid for _ in range(2)]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "sweep"
    assert manifest["grid"] == grid


def test_single_point_sweep_matches_the_run_output(tmp_path):
    # one grid point at the document's own bias: the sweep row must agree
    # with the single-run summary byte for byte
    doc = base_doc()
    cfg_path = write_doc(tmp_path, doc)
    run_out = tmp_path / "run"
    sweep_out = tmp_path / "sweep"
    assert main(["run", "--config", cfg_path, "--out", str(run_out)]) == EXIT_OK
    assert main(["sweep", "--config", cfg_path, "--grid", "0.09",
                 "--out", str(sweep_out)]) == EXIT_OK
    assert (run_out / "sweep.csv").read_bytes() == \
        (sweep_out / "sweep.csv").read_bytes()


def test_sweep_needs_run_T(tmp_path, capsys):
    doc = base_doc()
    del doc["run"]["T"]
    cfg_path = write_doc(tmp_path, doc)
    rc = main(["sweep", "--config", cfg_path, "--grid", "0.01",
               "--out", str(tmp_path / "out")])
    assert rc == EXIT_CONFIG
    assert "run.T" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# repro subcommand


def test_repro_fig2a_layout(tmp_path):
    out = tmp_path / "repro"
    rc = main(["repro", "fig2a", "--reps", "1", "--out", str(out)])
    assert rc == EXIT_OK
    root = out / "fig2a"
    top = json.loads((root / "manifest.json").read_text())
    assert top["figure"] == "fig2a"
    assert top["v_over_v_true"] == [1.1, 10.0]
    for label, ratio in (("v_tight", 1.1), ("v_loose", 10.0)):
        sub = root / label
        for name in ("trace.csv", "aggregate.csv", "manifest.json"):
            assert (sub / name).is_file()
        manifest = json.loads((sub / "manifest.json").read_text())
        assert manifest["v_over_v_true"] == ratio
        kinds = [p["kind"] for p in manifest["config"]["policies"]]
        assert "co3" in kinds and "ucb" in kinds and "ucb_offline" in kinds


def test_fig2b_swaps_in_the_vector_policy():
    cfg = cli.fig2b_config(reps=2)
    kinds = [p.kind for p in cfg.policies]
    assert "gco3" in kinds
    assert "co3" not in kinds
    assert cfg.spec.d2 == 5


def test_fig2c_grid_definition():
    cfg, grid = cli.fig2c_config(reps=2)
    assert grid == [5000.0 ** (-n / 5) for n in range(10)]
    assert cfg.T == 5000
    kinds = [p.kind for p in cfg.policies]
    assert kinds == ["rco3", "ucb"]


def test_repro_rejects_unknown_figure():
    with pytest.raises(SystemExit):
        main(["repro", "fig2z", "--out", "x"])
