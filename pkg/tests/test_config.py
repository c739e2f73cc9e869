"""Config parsing: presets, file format, precedence, validation."""

import pytest

from stackaug.config import ExperimentConfig, PRESETS, parse_config, parse_config_file, write_config
from stackaug.errors import ConfigError


def test_defaults_validate():
    cfg = ExperimentConfig().validate()
    assert cfg.algo == "sac"
    assert cfg.env == "pointmass"
    assert cfg.pipeline == ""


def test_continuous_preset_values():
    cfg = parse_config(preset="pointmass-full")
    assert cfg.replay_capacity == 100000
    assert cfg.frame_stack == 3
    assert cfg.latent_dim == 50
    assert cfg.gamma == pytest.approx(0.99)
    assert cfg.render_size == 56
    assert cfg.pipeline == "crop:48x48"
    assert cfg.action_repeat == 4
    assert cfg.batch_size == 128


def test_procedural_preset_values():
    cfg = parse_config(preset="chasegrid-full")
    assert cfg.algo == "ppo"
    assert cfg.env == "chasegrid"
    assert cfg.rollout_len == 256
    assert cfg.n_envs == 16
    assert cfg.n_minibatches == 8
    assert cfg.lr == pytest.approx(5e-4)
    assert cfg.entropy_coef == pytest.approx(0.1)
    assert cfg.frame_stack == 1


def test_desk_preset_small():
    cfg = parse_config(preset="desk")
    assert cfg.n_layers == 2
    assert cfg.filters < 32
    assert cfg.hidden < 1024


def test_unknown_preset():
    with pytest.raises(ConfigError, match="unknown preset"):
        parse_config(preset="galaxy")


def test_file_sections_and_comments(tmp_path):
    p = tmp_path / "exp.cfg"
    p.write_text(
        "# experiment\n"
        "[run]\n"
        "algo = ppo\n"
        "env = chasegrid\n"
        "\n"
        "[ppo]\n"
        "n_epochs = 5\n"
        "reward_norm = false\n")
    cfg = parse_config(path=p)
    assert cfg.algo == "ppo"
    assert cfg.n_epochs == 5
    assert cfg.reward_norm is False


def test_unknown_key_named_in_error(tmp_path):
    p = tmp_path / "exp.cfg"
    p.write_text("learnig_rate = 0.01\n")
    with pytest.raises(ConfigError, match="learnig_rate"):
        parse_config(path=p)


def test_duplicate_key(tmp_path):
    p = tmp_path / "exp.cfg"
    p.write_text("seed = 1\nseed = 2\n")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_file(p)


def test_malformed_line(tmp_path):
    p = tmp_path / "exp.cfg"
    p.write_text("just some words\n")
    with pytest.raises(ConfigError, match="key = value"):
        parse_config_file(p)


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config(path="/nonexistent/exp.cfg")


def test_precedence_file_over_preset(tmp_path):
    p = tmp_path / "exp.cfg"
    p.write_text("batch_size = 64\n")
    cfg = parse_config(path=p, preset="pointmass-full")
    assert cfg.batch_size == 64
    # untouched preset values survive
    assert cfg.replay_capacity == 100000


def test_precedence_override_over_file(tmp_path):
    p = tmp_path / "exp.cfg"
    p.write_text("batch_size = 64\nseed = 7\n")
    cfg = parse_config(path=p, preset="pointmass-full",
                       overrides={"batch_size": "32"})
    assert cfg.batch_size == 32
    assert cfg.seed == 7


def test_bool_coercions(tmp_path):
    for raw, want in [("true", True), ("1", True), ("yes", True), ("on", True),
                      ("false", False), ("0", False), ("no", False), ("off", False)]:
        cfg = parse_config(overrides={"twin_critic": raw})
        assert cfg.twin_critic is want
    with pytest.raises(ConfigError, match="boolean"):
        parse_config(overrides={"twin_critic": "maybe"})


def test_int_coercion_error():
    with pytest.raises(ConfigError, match="seed"):
        parse_config(overrides={"seed": "three"})


@pytest.mark.parametrize("key,value,pattern", [
    ("algo", "dqn", "algo"),
    ("env", "atari", "env"),
    ("clip_eps", "1.5", "clip_eps"),
    ("gamma", "0", "gamma"),
    ("lam", "1.5", "lam"),
    ("init_temp", "-1", "init_temp"),
    ("budget", "-5", "budget"),
    ("batch_size", "0", "batch_size"),
    ("pipeline", "warp:2", "warp"),
])
def test_validation_rejects(key, value, pattern):
    with pytest.raises(ConfigError, match=pattern):
        parse_config(overrides={key: value})


def test_strides_length_mismatch():
    with pytest.raises(ConfigError, match="encoder_strides"):
        parse_config(overrides={"encoder_strides": "2,1,1", "n_layers": "4"})


def test_strides_parse():
    cfg = parse_config(overrides={"encoder_strides": "2,1,1,1"})
    assert cfg.strides() == [2, 1, 1, 1]
    assert ExperimentConfig().strides() is None


def test_write_then_parse_roundtrip(tmp_path):
    cfg = parse_config(preset="chasegrid-full",
                       overrides={"seed": "11", "pipeline": "flip,rotate"})
    out = tmp_path / "resolved.cfg"
    write_config(cfg, out)
    back = parse_config(path=out)
    assert back == cfg


def test_preset_not_a_file_key(tmp_path):
    p = tmp_path / "exp.cfg"
    p.write_text("preset = desk\n")
    with pytest.raises(ConfigError, match="preset"):
        parse_config(path=p)


def test_all_presets_validate():
    for name in PRESETS:
        parse_config(preset=name)
