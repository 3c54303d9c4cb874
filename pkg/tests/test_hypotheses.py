import json
import math

import pytest

from plapblow.asymptotics import AsymptoticsError
from plapblow.discretization import Interval, Radial
from plapblow.hypotheses import ProblemSpec, max_distance, rate_inputs, validate
from plapblow.model import ABSORPTION, REACTION, NonlinearityModel, WeightModel, decaying_ratio_absorption

P = NonlinearityModel.power


def spec(f=None, g=None, a=WeightModel(), b=WeightModel.constant(1.0), lam=1.0, p=2.0,
         geometry=Interval(0.0, 2.0)):
    return ProblemSpec(p=p, lam=lam, geometry=geometry, f=f or P(ABSORPTION, 3), g=g, a=a, b=b)


def test_cubic_setting_passes():
    rep = validate(spec(g=P(REACTION, 1)))
    assert rep.passed and rep.lambda_star == math.inf
    assert rep.f1prime_ok and rep.g0prime_ok
    assert rep.diagnostics == []


def test_borderline_absorption_fails():
    rep = validate(spec(f=P(ABSORPTION, 1)))
    assert not rep.passed
    assert not rep.ko_converges and not rep.f1_ok and not rep.f1prime_ok
    names = {d["hypothesis"] for d in rep.diagnostics}
    assert {"KO", "f1(i)", "f1(ii)", "f1'"} <= names


def test_singular_reaction_with_negative_weight():
    rep = validate(spec(g=P(REACTION, -1), a=WeightModel(0.0, 0.0, -1.0), lam=0.01))
    assert rep.passed and rep.g0_ok
    assert 0 < rep.lambda_star < math.inf
    assert rep.lambda_star == pytest.approx(0.0235, abs=5e-4)
    assert rep.w0 == pytest.approx(1 / math.cosh(1), abs=1e-4)


def test_lambda_above_threshold_fails():
    rep = validate(spec(g=P(REACTION, -1), a=WeightModel(0.0, 0.0, -1.0), lam=1.0))
    assert not rep.passed and not rep.lambda_ok
    assert any(d["hypothesis"] == "lambda*" for d in rep.diagnostics)


def test_decaying_ratio_fails_ko_and_f0():
    rep = validate(spec(f=decaying_ratio_absorption(2.0)))
    assert not rep.ko_converges and not rep.f0_ok and not rep.passed


def test_relaxed_mode():
    f = NonlinearityModel.powersum(ABSORPTION, [(0.5, 1.0), (1.0, 3.0)])
    s = spec(f=f, g=P(REACTION, 1), a=WeightModel(0.0, 0.0, -1.0), lam=0.01)
    assert not validate(s, w0=0.648054).passed
    rep = validate(s, strict=False, w0=0.648054)
    assert rep.passed and rep.relaxed
    big = NonlinearityModel.powersum(ABSORPTION, [(1.5, 1.0), (1.0, 3.0)])
    assert not validate(spec(f=big, g=P(REACTION, 1), a=WeightModel(0.0, 0.0, -1.0), lam=0.01),
                        strict=False, w0=0.648054).f1_ok


def test_every_false_flag_has_witness():
    rep = validate(spec(f=P(ABSORPTION, 1), b=WeightModel.constant(0.0), g=P(REACTION, 2)))
    names = {d["hypothesis"] for d in rep.diagnostics}
    assert "b0" in names and "g0(ii)" in names and "g0'" in names


def test_report_is_deterministic_json():
    s = spec(g=P(REACTION, -1), a=WeightModel(0.0, 0.0, -1.0), lam=0.01)
    one = json.dumps(validate(s).to_dict())
    two = json.dumps(validate(s).to_dict())
    assert one == two
    assert json.loads(one)["lambda_star"] != "inf"
    assert json.loads(json.dumps(validate(spec()).to_dict()))["lambda_star"] == "inf"


def test_max_distance():
    assert max_distance(Interval(0, 2)) == 1.0
    assert max_distance(Interval(0, 2, (True, False))) == 2.0
    assert max_distance(Radial(3, 0.0, 1.5)) == 1.5
    assert max_distance(Radial(2, 1.0, 3.0)) == 2.0


def test_rate_inputs_cubic():
    ri = rate_inputs(spec(g=P(REACTION, 1)))
    assert (ri.q, ri.m, ri.gamma, ri.Q, ri.eta, ri.R) == (3.0, 1.0, 0.0, 1.0, 2.0, 0.0)


def test_rate_inputs_critical_reaction_weight():
    ri = rate_inputs(spec(g=P(REACTION, 1), a=WeightModel(3.0, 2.0, 0.0)))
    assert ri.R == 3.0


def test_rate_inputs_weighted_absorption():
    ri = rate_inputs(spec(b=WeightModel(2.0, -1.0, 0.0)))
    assert (ri.gamma, ri.Q) == (-1.0, 2.0)
    ri = rate_inputs(spec(b=WeightModel(2.0, -1.0, 0.5)))
    assert (ri.gamma, ri.Q) == (0.0, 0.5)


def test_rate_inputs_rejects_supercritical_reaction_weight():
    with pytest.raises(AsymptoticsError):
        rate_inputs(spec(g=P(REACTION, 1), a=WeightModel(1.0, 3.0, 0.0)))
