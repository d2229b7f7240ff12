import pytest

from conftest import ROOT
from src.nav.errors import NavConfigError
from src.nav.settings import RunConfig, config_from_text, load_config, parse_lines


class Test_defaults:
    def test_default_values(self):
        cfg = RunConfig()
        assert cfg.run.seed == 42
        assert cfg.rates.imu == 200.0 and cfg.rates.frame == 20.0
        assert cfg.rates.ratio == 10
        assert cfg.steps == 12000
        assert cfg.landmarks.count == 30
        assert cfg.landmarks.resolved_weight == pytest.approx(1 / 30)
        assert cfg.gains.k_a == 20.0
        assert cfg.ppf.xi_inf == (0.03, 0.1, 0.1, 0.1)
        assert not cfg.ppf.resolved

    def test_sample_file_matches_defaults(self):
        assert load_config(ROOT / "samples" / "run.cfg") == RunConfig()

    def test_hover_sample(self):
        cfg = load_config(ROOT / "samples" / "hover.cfg")
        assert cfg.trajectory.profile == "hover"
        assert cfg.initial.perfect
        assert cfg.noise.std_omega == 0.0


class Test_parse:
    def test_vectors_and_auto(self):
        data = parse_lines(["ppf.xi0=1, 2,3,4", "ppf.delta=auto", "# comentario", "", "run.seed=7"])
        assert data["ppf"]["xi0"] == ["1", "2", "3", "4"]
        assert data["ppf"]["delta"] is None
        assert data["run"]["seed"] == "7"

    def test_replay_paths_keep_commas(self):
        data = parse_lines(["replay.imu=a,b.csv"])
        assert data["replay"]["imu"] == "a,b.csv"

    def test_missing_equals(self):
        with pytest.raises(NavConfigError, match="línea 2"):
            parse_lines(["run.seed=1", "gains.k_w 3"])

    def test_missing_section(self):
        with pytest.raises(NavConfigError, match="línea 1"):
            parse_lines(["seed=1"])

    def test_typed_values(self):
        cfg = config_from_text("ppf.xi0=1,2,2,2\nppf.delta=1.5,1,1,1\ninitial.perfect=true\n")
        assert cfg.ppf.xi0 == (1.0, 2.0, 2.0, 2.0)
        assert cfg.ppf.resolved
        assert cfg.initial.perfect


class Test_validation:
    @pytest.mark.parametrize("line", [
        "gains.k_w=-1",
        "gains.unknown=1",
        "nosuch.key=1",
        "rates.imu=10",
        "rates.frame=30",
        "landmarks.count=2",
        "trajectory.profile=spiral",
        "ppf.xi0=0.01,1,1,1",
        "run.steady_fraction=0",
        "filter.form=euler",
    ])
    def test_invalid(self, line):
        with pytest.raises(NavConfigError):
            load_config(None, [line])

    def test_replay_requires_paths(self):
        with pytest.raises(NavConfigError, match="replay.imu"):
            load_config(None, ["run.mode=replay"])

    def test_replay_complete(self):
        cfg = load_config(None, ["run.mode=replay", "replay.imu=i.csv", "replay.features=f.csv",
                                 "replay.observations=o.csv"])
        assert cfg.replay.truth is None
        assert cfg.replay.t0 is None

    def test_missing_file(self, tmp_path):
        with pytest.raises(NavConfigError):
            load_config(tmp_path / "nope.cfg")

    def test_overrides_after_file(self, tmp_path):
        p = tmp_path / "x.cfg"
        p.write_text("run.seed=1\ngains.k_w=5\n", encoding="utf-8")
        cfg = load_config(p, ["run.seed=9"])
        assert cfg.run.seed == 9
        assert cfg.gains.k_w == 5.0


class Test_copies:
    def test_with_seed(self):
        cfg = RunConfig()
        other = cfg.with_seed(3)
        assert other.run.seed == 3
        assert cfg.run.seed == 42
        assert other.gains == cfg.gains

    def test_with_mode(self):
        with pytest.raises(NavConfigError):
            RunConfig().with_mode("replay")
