"""Acceptance criteria, one test each.  Each test records a single
PASS/FAIL line that is printed in the terminal summary."""
import io
import json
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from edes_lifespan import cli
from edes_lifespan import iteration as it
from edes_lifespan import pde_sim as ps
from edes_lifespan import verification as vf
from edes_lifespan.exponents import critical_exponent_p0

SWEEP_EPS = [0.5 * 10 ** (-j / 4) for j in range(5)]
SWEEP_DR = 1 / 200


def _fmt(results):
    return "; ".join(f"{r.name} {r.worst:.3g} (tol {r.tolerance:g})" for r in results)


def test_criterion_01_kernel_identities(verdict):
    t0 = time.perf_counter()
    res = vf.check_kernel_identities("full", points=200)
    elapsed = time.perf_counter() - t0
    core = [r for r in res if r.name != "minimum_principle"]
    ok = all(r.passed for r in core) and elapsed < 30
    ok = verdict(1, ok, f"{_fmt(core)}; {elapsed:.1f}s")
    assert ok


def test_criterion_02_triple_representation(verdict):
    t0 = time.perf_counter()
    res = vf.check_triple_representation("full")
    elapsed = time.perf_counter() - t0
    ok = verdict(2, res.passed and res.tolerance <= 1e-9 and elapsed < 10,
                 f"max rel disagreement {res.worst:.3g} (tol 1e-9); {elapsed:.1f}s")
    assert ok


def test_criterion_03_wronskians(verdict):
    bessel = vf.check_bessel_wronskian("full")
    appendix = vf.check_appendix_wronskian("full")[0]
    ok = verdict(3, bessel.passed and appendix.passed, _fmt([bessel, appendix]))
    assert ok


def test_criterion_04_kummer(verdict):
    res = vf.check_kummer_identity("full")
    spot = res.detail["M(1;2,4)"]
    ok = res.passed and abs(spot - 1.690309) < 5e-7
    ok = verdict(4, ok, f"{_fmt([res])}; M(1;2,4) = {spot:.7f}")
    assert ok


def test_criterion_05_exponent_calculus(verdict):
    res = vf.check_exponent_calculus("full")
    want = {"p0_two_forms": 1e-12, "p0_critical_identity": 1e-10, "exponent_ordering": 0.0,
            "kato_sign_equivalences": 0.0}
    by_name = {r.name: r for r in res}
    ok = all(r.passed for r in res)
    ok = ok and all(by_name[k].tolerance <= v for k, v in want.items())
    ok = ok and by_name["kato_sign_equivalences"].detail.get("samples", 0) >= 10_000
    ok = verdict(5, ok, _fmt([by_name[k] for k in want]))
    assert ok


def test_criterion_06_iteration_engine(verdict):
    exact = True
    for p in (Fraction(3, 2), Fraction(2), Fraction(5, 2), Fraction(3)):
        a = it.slicing_sequences("crit_p0", p, 30)
        s = it.slicing_sequences("crit_p1", p, 30)
        for j in range(31):
            exact &= a.alpha[j] == (p ** (j + 1) - 1) / (p - 1)
            exact &= a.beta[j] == p ** j - 1
            exact &= s.sigma[j] == (p ** (j + 1) - 1) / (p - 1)
            exact &= it.weighted_power_sum(p, j) == it.weighted_power_sum_closed(p, j)
    unit = vf.check_iteration("full")[1]
    ok = verdict(6, bool(exact) and unit.passed,
                 f"closed forms exact: {bool(exact)}; {_fmt([unit])}")
    assert ok


def test_criterion_07_minimum_principle_and_aux_bounds(verdict):
    mp = [r for r in vf.check_kernel_identities("full", points=200)
          if r.name == "minimum_principle"]
    aux = vf.check_aux_bounds("full")
    B = aux[0].detail
    positive = min(B["B0"], B["B1"], B["B2"]) > 0
    ok = all(r.passed for r in mp + aux) and positive
    ok = verdict(7, ok, f"{_fmt(mp + aux)}; B0={B['B0']:.4g} B1={B['B1']:.4g} B2={B['B2']:.4g}")
    assert ok


# ---- simulation criteria ------------------------------------------------------


SWEEPS = {
    "k=2/3 n=3 p=2": {"k": 2 / 3, "n": 3, "p": 2.0},
    "k=0 n=1 p=2": {"k": 0.0, "n": 1, "p": 2.0},
}


@pytest.fixture(scope="module")
def sweeps(tmp_path_factory):
    out = {}
    t0 = time.perf_counter()
    for label, base in SWEEPS.items():
        d = tmp_path_factory.mktemp("sweep")
        cfg = d / "sweep.json"
        cfg.write_text(json.dumps({
            "base": {**base, "dr": SWEEP_DR, "t_max": 1e4, "compute_curly": False},
            "eps": SWEEP_EPS, "tolerance": 0.30}))
        code = cli.dispatch(["sweep", "--config", str(cfg), "--out", str(d / "out")],
                            stdout=io.StringIO())
        out[label] = (code, json.loads((d / "out" / "sweep.json").read_text()))
    return out, time.perf_counter() - t0


FUNCTIONAL_RUNS = {
    "k=2/3 n=3 p=2": dict(k=2 / 3, n=3, p=2.0, t_max=1e4),
    "k=2/3 n=3 p=p0": dict(k=2 / 3, n=3, p=critical_exponent_p0(3, 2 / 3), t_max=2e3),
    "k=0 n=1 p=2": dict(k=0.0, n=1, p=2.0, t_max=1e4),
}


@pytest.fixture(scope="module")
def functional_runs():
    return {label: ps.simulate(ps.SimConfig(eps=0.3, dr=SWEEP_DR, refine=False, **kw))
            for label, kw in FUNCTIONAL_RUNS.items()}


@pytest.fixture(scope="module")
def zero_runs():
    return [ps.simulate(ps.SimConfig(k=k, n=n, p=2.0, eps=0.0, dr=SWEEP_DR, t_max=50.0,
                                     refine=False))
            for k, n in ((2 / 3, 3), (0.0, 1), (0.5, 2))]


def test_criterion_08_simulator_physics(verdict, sweeps, functional_runs, zero_runs):
    sw, _ = sweeps
    cone = []
    monotone, agree = True, 0.0
    for _, doc in sw.values():
        runs = sorted(doc["runs"], key=lambda r: -r["eps"])
        T = [r["T_num"] for r in runs]
        monotone &= all(a is not None and b is not None and a < b for a, b in zip(T, T[1:]))
        for r in runs:
            cone.append(r["cone_excess"] / r["dr"])
            cone.append(2 * r["cone_excess_fine"] / r["dr"])
            ra = r["refinement_agreement"]
            agree = max(agree, math.inf if ra is None else ra)
    for res in list(functional_runs.values()) + zero_runs:
        cone.append(res.cone_excess / res.config.dr)
    zero = all(np.all(z.max_u == 0) and np.all(z.final_state["u"] == 0) for z in zero_runs)
    worst_cone = max(cone)
    ok = worst_cone <= 2.0 and zero and monotone and agree <= 0.05
    ok = verdict(8, ok, f"cone excess {worst_cone:.3g} dr (tol 2); zero data exact: {zero}; "
                        f"T monotone in eps: {monotone}; refinement {agree:.3g} (tol 0.05)")
    assert ok


def test_criterion_09_subcritical_scaling(verdict, sweeps):
    sw, elapsed = sweeps
    parts, ok = [], elapsed < 15 * 60
    for label, (code, doc) in sw.items():
        ok &= code == 0 and doc["predicted_exponent"] == pytest.approx(1.0)
        ok &= doc["relative_deviation"] <= 0.30 and len(doc["runs"]) == 5
        ok &= all(r["blew_up"] for r in doc["runs"])
        parts.append(f"{label}: slope {doc['fitted_slope']:.4f} vs 1")
    ok = verdict(9, bool(ok), "; ".join(parts) + f"; {elapsed:.0f}s")
    assert ok


def test_criterion_10_functionals(verdict, functional_runs):
    parts, good = [], 0
    for label, res in functional_runs.items():
        fc = ps.fitted_constants(res)
        floor = ps.fitted_floor_curlyU(res)
        M = fc.M_const.value
        C = fc.C_frame.value if fc.C_frame is not None else math.nan
        fine = floor > 0 and M > 0 and 0 < C < math.inf
        good += fine
        parts.append(f"{label}: floor {floor:.3g}, M_fit {M:.3g}, C_frame {C:.3g}")
    ok = verdict(10, good >= 3, "; ".join(parts))
    assert ok
