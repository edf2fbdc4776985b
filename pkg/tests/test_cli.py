import json

import pytest

from ofdm_gfa import cli, harness

FAST = ["--trials", "2", "--sweep-values", "1", "--config"]


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.ini"
    path.write_text("N = 20\nM = 16\nL = 16   # subcarriers\nactivity_prob = 0.2\n")
    return str(path)


class TestConfig:
    def test_flat_and_sectioned(self, tmp_path):
        flat = tmp_path / "a.cfg"
        flat.write_text("N=12\nsweep_values = 1, 2\n")
        sect = tmp_path / "b.cfg"
        sect.write_text("[system]\nN = 12\n[experiment]\nsweep_values = 1, 2\n")
        assert cli.read_config(str(flat)) == cli.read_config(str(sect)) == \
            {"N": "12", "sweep_values": "1, 2"}

    def test_unknown_key(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("bogus = 1\n")
        with pytest.raises(cli.UsageError, match="unknown config keys: bogus"):
            cli.read_config(str(p))

    def test_layering(self, small_cfg, monkeypatch):
        monkeypatch.setenv(cli.THREADS_ENV, "3")
        args = cli.build_parser().parse_args(["sweep", "--config", small_cfg, "--seed", "9",
                                              "--rho", "0.5", "--schemes", "bl-mle"])
        spec, reps = cli.resolve(args)
        assert (spec.base.N, spec.base.M, spec.base.L, spec.base.P) == (20, 16, 16, 4)
        assert spec.seed == 9 and spec.rho == 0.5 and list(spec.schemes) == ["bl-mle"]
        assert spec.threads == 3 and reps == 5
        assert list(spec.sweep_values) == ["1", "2", "4"]

    def test_flag_beats_env(self, small_cfg, monkeypatch):
        monkeypatch.setenv(cli.THREADS_ENV, "3")
        args = cli.build_parser().parse_args(["sweep", "--config", small_cfg, "--threads", "1"])
        assert cli.resolve(args)[0].threads == 1

    def test_paper_preset(self):
        spec, _ = cli.resolve(cli.build_parser().parse_args(["sweep", "--preset", "paper"]))
        assert (spec.base.N, spec.base.L, spec.base.M, spec.base.P) == (1000, 72, 128, 4)


class TestCommands:
    def test_sweep_to_file(self, small_cfg, tmp_path):
        out = tmp_path / "o.csv"
        assert cli.main(["sweep", *FAST, small_cfg, "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == ",".join(harness.CSV_HEADER) and len(lines) == 4

    def test_sweep_stdout(self, small_cfg, capsys):
        assert cli.main(["sweep", *FAST, small_cfg, "--schemes", "mle-direct"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0].startswith("sweep_param,") and out[1].startswith("P,1,mle-direct,2,")

    def test_bench(self, small_cfg, capsys):
        assert cli.main(["bench", *FAST, small_cfg, "--schemes", "mle-direct,mle-virtual",
                         "--reps", "5"]) == 0
        head = capsys.readouterr().out.splitlines()[0]
        assert head.endswith("time_ratio")

    def test_trial_json(self, small_cfg, capsys):
        assert cli.main(["trial", "--config", small_cfg, "--schemes", "bl-mle", "--index", "3"]) == 0
        dump = json.loads(capsys.readouterr().out)
        assert dump["trial"] == 3 and list(dump["schemes"]) == ["bl-mle"]
        assert len(dump["schemes"]["bl-mle"]["scores"]) == 20

    def test_selftest(self, capsys):
        assert cli.main(["selftest"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines and all(l.startswith("PASS") for l in lines)

    @pytest.mark.parametrize("argv,msg", [
        (["sweep", "--schemes", ""], "no schemes requested"),
        (["sweep", "--schemes", "amp"], "unknown scheme"),
        (["sweep", "--rho", "lots"], "--rho expects"),
        (["sweep", "--config", "/nonexistent.ini"], "cannot read config"),
        (["sweep", "--sweep-values", "40"], "P=40"),
    ])
    def test_errors_one_line(self, argv, msg, capsys):
        assert cli.main(argv) != 0
        err = capsys.readouterr().err
        assert err.count("\n") == 1 and err.startswith("error: ") and msg in err

    def test_bad_env(self, monkeypatch, capsys):
        monkeypatch.setenv(cli.THREADS_ENV, "many")
        assert cli.main(["sweep"]) != 0
        assert cli.THREADS_ENV in capsys.readouterr().err
