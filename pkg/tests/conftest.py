import time
from pathlib import Path
from types import SimpleNamespace

import pytest

from plapblow.cli import build_template, main
from plapblow.config import load
from plapblow.asymptotics import rate_point
from plapblow.hypotheses import rate_inputs
from plapblow.ladder import FitError, default_L0, fit_rate, profile_guess, run_ladder

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

# criterion number -> (passed, detail); filled by test_acceptance, printed at the end
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def ladder_run(name, **overrides):
    """Run the ladder for a shipped config the same way ``plapblow solve`` does."""
    cfg = load(CONFIGS / name)
    if overrides:
        cfg = cfg.replace(**overrides)
    spec = cfg.problem_spec()
    inputs = rate_inputs(spec)
    rp = rate_point(inputs.p, inputs.q, inputs.m, inputs.gamma, inputs.Q, inputs.R,
                    inputs.lam, inputs.f_inf, inputs.g_inf)
    lcfg = cfg.ladder_config()
    L0 = default_L0(rp.A, rp.alpha, lcfg.interior_margin)
    template = build_template(cfg, L0)
    init = profile_guess(template, rp.A, rp.alpha, L0)
    report = run_ladder(template, lcfg, cfg.solve_options(), L0=L0, init=init, keep_fields=True)
    try:
        fit = fit_rate(report.final_field, inputs.gamma, inputs.p, inputs.q,
                       interior_margin=lcfg.interior_margin, cap_fraction=cfg["rate.cap_fraction"],
                       asymptotic_factor=cfg["rate.asymptotic_factor"])
    except FitError:
        fit = None
    return SimpleNamespace(cfg=cfg, rp=rp, inputs=inputs, report=report, fit=fit, L0=L0)


@pytest.fixture(scope="session")
def cubic_ladder():
    return ladder_run("cubic.cfg")


@pytest.fixture(scope="session")
def p3q4_ladder():
    return ladder_run("p3q4.cfg")


@pytest.fixture(scope="session")
def cubic_cli_runs(tmp_path_factory):
    """Two independent ``plapblow solve`` runs of the cubic config."""
    runs = []
    for tag in ("first", "second"):
        out = tmp_path_factory.mktemp(f"cubic-{tag}")
        start = time.perf_counter()
        code = main(["solve", "--config", str(CONFIGS / "cubic.cfg"), "--out", str(out)])
        runs.append(SimpleNamespace(code=code, out=out, seconds=time.perf_counter() - start))
    return runs


@pytest.fixture
def record():
    def _record(number: int, passed: bool, detail: str):
        ACCEPTANCE[number] = (bool(passed), detail)
        print(f"ACCEPTANCE {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
