import pytest

from backend.norms_existence import ExistenceResult
from backend.rng import MCEstimate, RngSpec
from backend.spatial_kernels import KernelFamily, closed_form_I_f
from backend.verify import CHECKS, check_existence_table, expected_thresholds, run_suite


def test_check_names_are_unique():
    names = [name for name, _ in CHECKS]
    assert len(names) == len(set(names)) == 10


@pytest.mark.parametrize("name", ["existence_table", "scaling_law"])
def test_fast_checks_pass(name):
    report = run_suite(RngSpec(1), only=[name])
    assert list(report.columns) == ["check", "passed", "seconds", "detail"]
    assert report["check"].tolist() == [name]
    assert bool(report["passed"].iloc[0]), report["detail"].iloc[0]


def test_filter_keeps_suite_order():
    report = run_suite(only=["scaling_law", "existence_table"])
    assert report["check"].tolist() == ["existence_table", "scaling_law"]


def test_a_raising_check_is_reported_as_a_failure(monkeypatch):
    def broken(ctx):
        raise RuntimeError("boom")

    monkeypatch.setattr("backend.verify.CHECKS", [("broken", broken)])
    report = run_suite(only=["broken"])
    assert not report["passed"].iloc[0]
    assert report["detail"].iloc[0] == {"error": "boom"}


def _riesz_estimate(scale, se_fraction):
    def fake(spec, t, r, s, rng=None, n=10 ** 6, threads=None):
        exact = closed_form_I_f(spec, t, r, s).exact
        reliable = spec.alpha > spec.d / 2.0
        return MCEstimate(exact * scale, exact * se_fraction, n, reliable, exact * scale)

    return fake


def test_riesz_closed_form_accepts_an_exact_estimate(monkeypatch):
    monkeypatch.setattr("backend.verify.mc_I_f", _riesz_estimate(1.0, 1e-3))
    report = run_suite(only=["riesz_closed_form"])
    assert bool(report["passed"].iloc[0])
    assert len(report["detail"].iloc[0]) == 6


def test_riesz_closed_form_rejects_a_one_and_a_half_percent_bias(monkeypatch):
    # 1.5% off with a wide standard error: inside 3 SE, outside the 1% bound
    monkeypatch.setattr("backend.verify.mc_I_f", _riesz_estimate(1.015, 0.01))
    report = run_suite(only=["riesz_closed_form"])
    assert not report["passed"].iloc[0]
    worst = max(row["relative_error"] for row in report["detail"].iloc[0].values())
    assert worst == pytest.approx(0.015)


def test_riesz_closed_form_needs_the_heavy_tail_flag(monkeypatch):
    def unflagged(spec, t, r, s, rng=None, n=10 ** 6, threads=None):
        exact = closed_form_I_f(spec, t, r, s).exact
        return MCEstimate(exact, 1e-3 * exact, n)

    monkeypatch.setattr("backend.verify.mc_I_f", unflagged)
    assert not run_suite(only=["riesz_closed_form"])["passed"].iloc[0]


def test_existence_check_covers_every_family_and_dimension():
    rows = expected_thresholds()
    families = {(spec.family, spec.d) for spec, _ in rows}
    assert {(f, d) for f in KernelFamily for d in (1, 2, 3)} <= families
    assert all(threshold >= 0.5 for _, threshold in rows)


def test_existence_check_flags_a_wrong_threshold(monkeypatch):
    def unclamped(spec, H):
        crit = (spec.d - spec.alpha_f) / 4.0
        return ExistenceResult(H > crit, crit, crit, "H > (d - alpha_f)/4")

    monkeypatch.setattr("backend.verify.existence_check", unclamped)
    passed, detail = check_existence_table({})
    assert not passed
    assert {"family": "white", "d": 1}.items() <= detail["mismatches"][0].items()
