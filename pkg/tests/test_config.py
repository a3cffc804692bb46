import numpy as np
import pytest

from gla_workbench.config import SCHEMA, Benchmark, load_config, parse_config, with_overrides
from gla_workbench.errors import ConfigError

MINIMAL = f"[meta]\nschema = {SCHEMA}\n"


def test_shipped_benchmark(bench):
    assert bench.wing.elements == 8
    assert bench.flow.alpha0 == pytest.approx(np.deg2rad(4.0))
    assert bench.rigid_body is None
    assert bench.turbulence.seeds == (0, 1, 2, 3, 4)
    assert bench.study.kc_sweep == (0.3, 1.0, 3.0, 10.0)
    g = bench.discrete_gust()
    assert g.w0 == pytest.approx(0.14 * 59.0) and g.H_g == 20.0


def test_defaults_fill_missing_keys():
    b = parse_config(MINIMAL)
    assert b.synthesis == Benchmark().synthesis
    assert b.wing == Benchmark().wing


def test_degrees_converted():
    b = parse_config(MINIMAL + "[flow]\nalpha0_deg = 90\n")
    assert b.flow.alpha0 == pytest.approx(np.pi / 2)


def test_rigid_body_enabled():
    b = parse_config(MINIMAL + "[rigid_body]\nenabled = true\n")
    assert b.rigid_body is not None


@pytest.mark.parametrize("text, match", [
    ("[meta]\nschema = other/1\n", "schema"),
    ("[wing]\nelements = 4\n", "schema"),
    (MINIMAL + "[wings]\nelements = 4\n", "unknown section"),
    (MINIMAL + "[wing]\nelement = 4\n", "unknown key"),
    (MINIMAL + "[wing]\nelements = four\n", "cannot parse"),
    (MINIMAL + "[synthesis]\nK_c = 0\n", "K_c"),
    (MINIMAL + "[synthesis]\nscaling = imperial\n", "scaling"),
    (MINIMAL + "[turbulence]\nseeds =\n", "seeds"),
    (MINIMAL + "[study]\nmeshes = 1, 2\n", "meshes"),
    (MINIMAL + "[simulation]\ndt = -1\n", "dt"),
    (MINIMAL + "[reduction]\nmodes = 0\n", "modes"),
    (MINIMAL + "[discrete_gust]\nH_g = -5\n", "H_g"),
    ("[meta\n", None),
])
def test_rejected(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="nope.cfg"):
        load_config(tmp_path / "nope.cfg")


def test_overrides_copy(bench):
    b = with_overrides(bench, synthesis={"K_c": 3.0})
    assert b.synthesis.K_c == 3.0 and bench.synthesis.K_c == 1.0
    assert b.wing is bench.wing


def test_turbulence_config(bench):
    tc = bench.turbulence_config(7, duration=12.0)
    assert tc.seed == 7 and tc.duration == 12.0
    assert tc.sigma_w == pytest.approx(0.08 * 59.0)
