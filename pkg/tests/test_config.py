import pytest

from helebern.errors import BadValue, MissingKey, PreconditionError, UnknownKey
from helebern.models.config import RunConfig, parse_config
from helebern.models.law import SpeedLaw

RADIAL = """\
# Bernoulli run
dim = 2
grid.min = -4
grid.max = 4
grid.n = 64
source.radius = 1
init.radius = 1.6   # start inside the equilibrium
law.f = constant
law.c = -1
lambda = 7.389
"""


def _with(text: str = RADIAL, **replace: str) -> str:
    lines = []
    for line in text.splitlines():
        key = line.split("=", 1)[0].strip()
        if key in replace:
            value = replace.pop(key)
            if value is None:
                continue
            line = f"{key} = {value}"
        lines.append(line)
    lines += [f"{key} = {value}" for key, value in replace.items() if value is not None]
    return "\n".join(lines) + "\n"


def test_parse_minimal_radial_config():
    cfg = parse_config(RADIAL)

    assert isinstance(cfg, RunConfig)
    assert cfg.grid_min == (-4.0,)
    assert cfg.law() == SpeedLaw.constant(-1.0, 7.389)
    assert cfg.t_end == 10.0
    assert cfg.solver_method == "redblack"
    assert cfg.is_radial()


def test_scalar_bounds_are_broadcast():
    grid = parse_config(RADIAL).grid()

    assert grid.origin == (-4.0, -4.0)
    assert grid.upper == pytest.approx((4.0, 4.0))
    assert grid.spacing == pytest.approx(0.125)


def test_flow_config_carries_every_setting():
    text = _with(**{"t_end": "2.5", "steady.span": "0.5", "solver.method": "bicgstab"})
    cfg = parse_config(text)
    flow = cfg.flow_config()

    assert flow.t_end == 2.5
    assert flow.steady_span == 0.5
    assert flow.solver.method == "bicgstab"
    assert flow.grid == cfg.grid()
    assert flow.law.lam == pytest.approx(7.389)


def test_radial_case():
    case = parse_config(RADIAL).radial_case()

    assert case.N == 2
    assert case.r0 == 1.0
    assert case.g0 == 1.0


def test_off_centre_source_is_not_radial():
    cfg = parse_config(_with(**{"source.center": "0.5, 0"}))

    assert not cfg.is_radial()
    with pytest.raises(PreconditionError):
        cfg.radial_case()


def test_negative_lambda_reports_its_line():
    with pytest.raises(BadValue) as exc:
        parse_config(_with(**{"lambda": "-1"}))

    assert exc.value.line == 10
    assert "line 10" in exc.value.detail
    assert exc.value.exit_code == 2


def test_missing_source_radius():
    with pytest.raises(MissingKey) as exc:
        parse_config(_with(**{"source.radius": None}))

    assert exc.value.context["keys"] == ["source.radius"]


def test_unknown_key():
    with pytest.raises(UnknownKey) as exc:
        parse_config(RADIAL + "grid.spacing = 0.1\n")

    assert exc.value.line == 11
    assert exc.value.context["key"] == "grid.spacing"


def test_duplicate_key():
    with pytest.raises(BadValue) as exc:
        parse_config(RADIAL + "lambda = 2\n")

    assert exc.value.line == 11


def test_line_without_equals_sign():
    with pytest.raises(BadValue):
        parse_config(RADIAL + "t_end 3\n")


def test_empty_value():
    with pytest.raises(BadValue):
        parse_config(_with(**{"t_end": ""}))


def test_ellipse_needs_axes():
    with pytest.raises(MissingKey):
        parse_config(_with(**{"init.kind": "ellipse"}))

    cfg = parse_config(_with(**{"init.kind": "ellipse", "init.axes": "2.5, 1.6"}))
    assert cfg.init_axes == (2.5, 1.6)
    assert not cfg.is_radial()


def test_affine_law_needs_both_coefficients():
    with pytest.raises(MissingKey) as exc:
        parse_config(_with(**{"law.f": "affine"}))
    assert exc.value.context["keys"] == ["law.a"]

    cfg = parse_config(_with(**{"law.f": "affine", "law.a": "0.5"}))
    assert cfg.law() == SpeedLaw.affine(0.5, -1.0, 7.389)


def test_unsupported_dimension():
    with pytest.raises(BadValue) as exc:
        parse_config(_with(dim="4"))

    assert exc.value.line == 2


def test_wrong_vector_length():
    with pytest.raises(BadValue):
        parse_config(_with(**{"init.center": "0, 0, 0"}))


def test_too_few_cells():
    with pytest.raises(BadValue) as exc:
        parse_config(_with(**{"grid.n": "8"}))

    assert exc.value.line == 5


def test_initial_ball_larger_than_the_box():
    with pytest.raises(BadValue) as exc:
        parse_config(_with(**{"init.radius": "10"}))

    assert exc.value.line == 7
    assert "init.radius" in exc.value.detail
    assert exc.value.exit_code == 2


def test_source_centred_outside_the_box():
    with pytest.raises(BadValue) as exc:
        parse_config(_with(**{"source.center": "10, 10"}))

    assert exc.value.line == 11
    assert "source.center" in exc.value.detail
    assert "(10.0, 10.0)" in exc.value.detail


def test_ellipse_outside_the_box():
    with pytest.raises(BadValue) as exc:
        parse_config(_with(**{"init.kind": "ellipse", "init.axes": "20, 20"}))

    assert "init.axes" in exc.value.detail


def test_text_form_parses_back_to_the_same_config():
    cfg = parse_config(_with(**{"sweep.lambdas": "0.1, 1, 2.718", "out.mask": "true"}))
    again = parse_config(cfg.to_text())

    assert again == cfg
    assert "t_end" not in cfg.to_text()
    assert "out.mask = true" in cfg.to_text()
