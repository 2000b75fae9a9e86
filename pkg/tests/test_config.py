import pytest

from eulermc.config import parse_config, serialize_config
from eulermc.errors import ConfigError


class TestParsing:
    def test_empty_document_gives_defaults(self):
        cfg = parse_config("")
        assert cfg.gas.gamma == 1.4 and cfg.gas.a == 1.0
        assert cfg.scheme.alpha == 0.8 and cfg.scheme.eps_flux == 0.0
        assert cfg.kh.j1 == 0.25 and cfg.kh.j2 == 0.75
        assert cfg.kh.eps_perturb == 0.01 and cfg.kh.n_modes == 10
        assert cfg.l_reps == 20 and cfg.n_ref == 100
        assert cfg.n_list == (5, 10, 20, 40, 80)
        assert cfg.scheme.dt is None

    def test_empty_gas_section_gives_defaults(self):
        cfg = parse_config("[gas]\n")
        assert cfg.gas.gamma == 1.4 and cfg.gas.a == 1.0

    def test_values_and_lists(self):
        text = """
[grid]
nx = 32
ladder = 8,16,32

[scheme]
dt = 0.001
t_final = 0.25

[plan]
n_list = 2,4
n_ref = 8
pairs = 16:2,32:4
"""
        cfg = parse_config(text)
        assert cfg.nx == 32 and cfg.ny == 32
        assert cfg.ladder == (8, 16, 32)
        assert cfg.scheme.dt == 0.001
        assert cfg.pairs == ((16, 2), (32, 4))

    def test_comments_and_blank_lines(self):
        cfg = parse_config("# leading comment\n\n[gas]\n; semicolon comment\ngamma = 1.6\n")
        assert cfg.gas.gamma == 1.6

    def test_ny_and_ly_default_to_square_box(self):
        cfg = parse_config("[grid]\nnx = 16\nny = 32\n")
        assert cfg.ly == 2.0
        assert cfg.grid().h == 1.0 / 16


class TestErrors:
    def test_unknown_section_reports_line(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_config("# c\n[nonsense]\n")

    def test_unknown_key_reports_key_and_line(self):
        with pytest.raises(ConfigError, match=r"'gama', line 2"):
            parse_config("[gas]\ngama = 1.4\n")

    def test_type_mismatch_reports_key_and_line(self):
        with pytest.raises(ConfigError, match=r"'nx', line 3"):
            parse_config("[grid]\n# pad\nnx = lots\n")

    def test_key_outside_section(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config("nx = 4\n")

    def test_invariant_violation_names_key(self):
        with pytest.raises(ConfigError, match="n_ref"):
            parse_config("[plan]\nn_list = 4,8\nn_ref = 4\n")

    def test_inadmissible_alpha_rejected_at_load(self):
        with pytest.raises(ConfigError, match="alpha"):
            parse_config("[scheme]\nalpha = 0.9\n")

    def test_admissible_alpha_for_large_gamma(self):
        cfg = parse_config("[gas]\ngamma = 2.0\n\n[scheme]\nalpha = 0.99\n")
        assert cfg.scheme.alpha == 0.99

    def test_bad_override_shape(self):
        with pytest.raises(ConfigError):
            parse_config("", overrides=["gamma=2"])
        with pytest.raises(ConfigError):
            parse_config("", overrides=["gas.nope=2"])


class TestRoundTrip:
    def test_serialize_parse_round_trip(self):
        text = """
[run]
kind = mc-e1
workers = 2
out_dir = results

[grid]
nx = 16
ladder = 8,16

[scheme]
dt = auto
t_final = 0.125

[kh]
eps_perturb = 0.02

[plan]
master_seed = 42
n_list = 2,4
l_reps = 3
n_ref = 8
pairs = 8:2,16:4
cesaro = true

[solve]
initial = constant
rho = 1.25
u1 = 0.5
snapshots = 0.0625,0.125
"""
        cfg = parse_config(text)
        again = parse_config(serialize_config(cfg))
        assert again == cfg

    def test_overrides_win(self):
        cfg = parse_config("[gas]\ngamma = 1.4\n", overrides=["gas.gamma=1.8", "run.workers=3"])
        assert cfg.gas.gamma == 1.8
        assert cfg.workers == 3

    def test_kind_argument_wins(self):
        cfg = parse_config("[run]\nkind = solve\n", kind="mc-e2")
        assert cfg.kind == "mc-e2"
