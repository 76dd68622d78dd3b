"""Acceptance criteria 1-8; each test prints one PASS/FAIL line."""

import dataclasses
import math

import numpy as np
import pytest

from conftest import MATRIX, OMEGAS, rel_err, system
from ficds.inverters import gfl_equivalent, gfm_equivalent
from ficds.sim import SimConfig, envelope_slope, scenario_b, segment_verdicts, simulate
from ficds.sweep import find_boundary
from ficds.table1 import INVERTER_1, INVERTER_2, INVERTER_3
from ficds.tf import Polynomial, RationalTF, freq_response, pade_delay, poly_roots
from ficds.topology import analyze, robustness_check, set_param

ORDERS = (4, 5, 6, 7, 8)


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return emit


def verdict(sid, *settings, order=5):
    t = system(sid)
    for path, value in settings:
        t = set_param(t, path, value)
    return analyze(t, order).verdict


def robust(sid, *settings):
    t = system(sid)
    for path, value in settings:
        t = set_param(t, path, value)
    return robustness_check(t, ORDERS)


# bracket cases of criteria 1-5 with the expected verdict
CASES = [
    ("A1", (("inverter[0].kp", 7.0),), "stable"),
    ("A1", (("inverter[0].kp", 7.5),), "unstable"),
    ("A1", (("grid.Ls", 0.3e-3),), "stable"),
    ("A1", (("grid.Ls", 0.5e-3),), "unstable"),
    ("A1", (("grid.Ls", 5e-3),), "unstable"),
    ("A2", (("grid.Ls", 5e-3),), "stable"),
    ("B1", (("inverter[0].kp", 6.0),), "stable"),
    ("B1", (("inverter[0].kp", 6.5),), "unstable"),
] + [("B2", (("inverter[0].kp", kp),), "stable") for kp in (5.0, 6.0, 7.0, 8.0, 9.0, 9.5)] + [
    ("B2", (("inverter[1].kpv", 0.2),), "unstable"),
]


def test_criterion_1_a1_kp_threshold(report):
    v7, v75 = verdict("A1", ("inverter[0].kp", 7.0)), verdict("A1", ("inverter[0].kp", 7.5))
    b = find_boundary(system("A1"), "inverter[0].kp", 7.0, 7.5)
    flags = [robust("A1", ("inverter[0].kp", k)).flagged for k in (7.0, 7.5)]
    ok = v7 == "stable" and v75 == "unstable" and 7.0 < b.value < 7.5 and not any(flags)
    report(1, ok, f"kp 7 {v7}, kp 7.5 {v75}, critical kp {b.value:.4f}, order flag {any(flags)}")


def test_criterion_2_a1_ls_threshold(report):
    a, b = verdict("A1", ("grid.Ls", 0.3e-3)), verdict("A1", ("grid.Ls", 0.5e-3))
    report(2, a == "stable" and b == "unstable", f"Ls 0.3 mH {a}, Ls 0.5 mH {b}")


def test_criterion_3_grid_forming_rescue(report):
    a1, a2 = verdict("A1", ("grid.Ls", 5e-3)), verdict("A2", ("grid.Ls", 5e-3))
    report(3, a1 == "unstable" and a2 == "stable", f"Ls 5 mH: A1 {a1}, A2 {a2}")


def test_criterion_4_b1_inverter_count(report):
    v6, v65 = verdict("B1", ("inverter[0].kp", 6.0)), verdict("B1", ("inverter[0].kp", 6.5))
    b1 = find_boundary(system("B1"), "inverter[0].kp", 6.0, 6.5)
    a1 = find_boundary(system("A1"), "inverter[0].kp", 7.0, 7.5)
    ok = v6 == "stable" and v65 == "unstable" and b1.hi < a1.lo
    report(4, ok, f"kp 6 {v6}, kp 6.5 {v65}, critical kp B1 {b1.value:.4f} < A1 {a1.value:.4f}")


def test_criterion_5_b2_islanded(report):
    kps = (5.0, 6.0, 7.0, 8.0, 9.0, 9.5)
    vs = [verdict("B2", ("inverter[0].kp", k)) for k in kps]
    vk = verdict("B2", ("inverter[1].kpv", 0.2))
    ok = all(v == "stable" for v in vs) and vk == "unstable"
    report(5, ok, f"kp1 5..9.5 {'all stable' if all(v == 'stable' for v in vs) else vs}, kpv 0.2 {vk}")


def test_criterion_6_cross_method_agreement(report):
    bad = []
    for sid, path, value in MATRIX:
        t = set_param(system(sid), path, value)
        pole = analyze(t).verdict
        sim = envelope_slope(simulate(t, SimConfig(duration=1.0)), 0.0).verdict
        if sim != pole:
            bad.append(f"{sid} {path}={value}: pole {pole}, sim {sim}")
    report(6, not bad, f"{len(MATRIX) - len(bad)}/{len(MATRIX)} configurations agree" + (f"; {bad}" if bad else ""))


def test_criterion_7_scenario_b(report):
    tr = scenario_b(system("B1"), SimConfig())
    seq = [s.verdict for s in segment_verdicts(tr)]
    ok = seq == ["stable", "unstable", "stable", "unstable"]
    report(7, ok, " -> ".join(seq))


def _properties():
    failures = []
    # resonance identities
    for order in (1, 5, 8):
        for eq in (gfl_equivalent(INVERTER_1, order), gfl_equivalent(INVERTER_2, order), gfm_equivalent(INVERTER_3, order)):
            w1 = INVERTER_1.omega1
            if abs(freq_response(eq.source_tf, [w1])[0] - 1) > 1e-9 or abs(freq_response(eq.immitance_tf, [w1])[0]) > 1e-9:
                failures.append(f"resonance {eq.mode} order {order}")
    # Padé all-pass
    w = np.logspace(0, 5, 40)
    for order in range(1, 9):
        p = pade_delay(1.5e-4, order)
        if np.max(np.abs(np.abs(freq_response(p, w)) - 1)) > 1e-12:
            failures.append(f"all-pass order {order}")
    # root residuals and conjugate pairing on every characteristic polynomial of criteria 1-5
    for sid, settings, _ in CASES:
        t = system(sid)
        for path, value in settings:
            t = set_param(t, path, value)
        for idx in analyze(t).indices.values():
            ps = idx.poles
            if ps.residual_bound > 1e-8:
                failures.append(f"residual {sid} {settings}")
            r = np.array(ps.roots)
            if np.max(np.min(np.abs(r[:, None] - r.conj()[None, :]), axis=1) / np.maximum(1, np.abs(r))) > 1e-8:
                failures.append(f"conjugates {sid} {settings}")
    # pointwise arithmetic oracle
    rng = np.random.default_rng(0)
    for _ in range(10):
        a = RationalTF(rng.uniform(-1, 1, 4), np.polynomial.polynomial.polyfromroots(-rng.uniform(1, 1e3, 4)))
        b = RationalTF(rng.uniform(-1, 1, 3), np.polynomial.polynomial.polyfromroots(-rng.uniform(1, 1e3, 3)))
        s = 1j * OMEGAS
        for got, want in (((a + b)(s), a(s) + b(s)), ((a * b)(s), a(s) * b(s)), ((a / b)(s), a(s) / b(s))):
            if rel_err(got, want) > 1e-9:
                failures.append("arithmetic")
    # simulator linearity
    for sid in ("A1", "A2", "B1", "B2"):
        t = system(sid)
        cfg = SimConfig(duration=0.3)
        x = simulate(t, cfg).v_pcc
        if t.grid is not None:
            t = dataclasses.replace(t, grid=dataclasses.replace(t.grid, Vgrid_rms=2.5 * t.grid.Vgrid_rms))
        y = simulate(t, dataclasses.replace(cfg, iref_amp=2.5 * cfg.iref_amp, vref_amp=2.5 * cfg.vref_amp)).v_pcc
        if np.max(np.abs(y - 2.5 * x)) > 1e-9 * np.max(np.abs(2.5 * x)):
            failures.append(f"linearity {sid}")
    # Padé-order verdict invariance over criteria 1-5
    for sid, settings, expect in CASES:
        vs = {verdict(sid, *settings, order=n) for n in ORDERS}
        if vs != {expect}:
            failures.append(f"order invariance {sid} {settings}: {vs}")
    return failures


def test_criterion_8_property_suites(report):
    failures = _properties()
    report(8, not failures, "all property suites hold" if not failures else "; ".join(failures))
