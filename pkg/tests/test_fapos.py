import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import channels, random_feasible_z, random_phases
from risfa.channel import cascade
from risfa.fapos import (
    CosFamily,
    MmInfo,
    build_quadratic_bound,
    build_trig_objective,
    family_bound,
    g1,
    g2,
    interference_objective,
    mm_optimize_positions,
    r_g1,
    r_g2,
    surrogate_cos,
    surrogate_sin,
    theta_hat,
)
from risfa.hbf import initial_state
from risfa.metrics import rate_of
from risfa.scenario import load_scenario, uniform_apv

LAM = 0.1


def direct_power(ch, ris, z, f, k):
    g = cascade(ch.with_positions(z), ris)[k]
    return abs(np.vdot(g, f)) ** 2


@pytest.fixture(scope="module")
def inst(scn):
    rng = np.random.default_rng(0)
    ch = channels(scn, 3)
    ris = random_phases(scn, rng)
    F = initial_state("FD", cascade(ch, ris), scn.power, scn.noise).F
    return ch, ris, F


# --- surrogates ----------------------------------------------------------------


def test_surrogate_touch_and_value():
    assert surrogate_cos(0.7, 0.7) == math.cos(0.7)
    assert surrogate_sin(0.7, 0.7) == math.sin(0.7)
    assert surrogate_cos(math.pi, 0.0) == pytest.approx(1 - math.pi**2 / 2)
    assert surrogate_cos(math.pi, 0.0) == pytest.approx(-3.9348, abs=1e-4)


def test_surrogate_derivative():
    x0, h = 0.4, 1e-6
    d = (surrogate_cos(x0 + h, x0) - surrogate_cos(x0 - h, x0)) / (2 * h)
    assert d == pytest.approx(-math.sin(x0), abs=1e-8)


@given(st.floats(-50, 50), st.floats(-50, 50))
def test_surrogates_minorize(x, x0):
    assert surrogate_cos(x, x0) <= math.cos(x) + 1e-12
    assert surrogate_sin(x, x0) <= math.sin(x) + 1e-12


# --- expansion -----------------------------------------------------------------


@pytest.mark.parametrize("mode", ["phase", "split"])
def test_master_identity(inst, scn, mode):
    ch, ris, F = inst
    rng = np.random.default_rng(1)
    for k in range(3):
        t = build_trig_objective(ch, ris, F[:, k], k, mode=mode)
        for _ in range(5):
            z = random_feasible_z(scn, rng)
            want = direct_power(ch, ris, z, F[:, k], k)
            assert t.value(z) == pytest.approx(want, rel=1e-8)


def test_structured_form_matches(inst, scn):
    ch, ris, F = inst
    z = random_feasible_z(scn, np.random.default_rng(2))
    for k in range(3):
        t = build_trig_objective(ch, ris, F[:, k], k)
        assert t.structured_value(z) == pytest.approx(t.value(z), rel=1e-10)


def test_interference_term(inst, scn):
    ch, ris, F = inst
    z = random_feasible_z(scn, np.random.default_rng(3))
    t = interference_objective(ch, ris, F, 0, 0.25)
    want = sum(direct_power(ch, ris, z, F[:, j], 0) for j in (1, 2)) + 0.25
    assert t.value(z) == pytest.approx(want, rel=1e-8)


def test_zero_precoder_gives_zero(inst, scn):
    ch, ris, _ = inst
    t = build_trig_objective(ch, ris, np.zeros(24), 0)
    assert t.value(random_feasible_z(scn, np.random.default_rng(4))) == 0.0


def test_pure_nlos_is_constant(scn):
    s = scn.with_kappa_linear(0.0)
    ch = channels(s)
    f = np.exp(1j * np.arange(24))
    t = build_trig_objective(ch, None, f, 1)
    assert t.family.w.size == 0
    assert t.value(random_feasible_z(s, np.random.default_rng(5))) == pytest.approx(t.a0[0])


def test_two_element_hand_expansion():
    s = load_scenario("""
[system]
n_tx = 2
n_users = 1
[users]
theta_deg = 50
phi_deg = 0
range_m = 10
[ris]
theta_deg =
phi_deg =
range_m =
""").with_kappa_linear(1e300)
    ch = channels(s)
    f = np.array([0.8, 0.3 - 0.5j])
    t = build_trig_objective(ch, None, f, 0)
    chi = ch.chi_bu[0][0]
    th = theta_hat(s.theta_bu[0], s.wavelength)
    for z in ([0.0, 0.05], [0.1, 0.9]):
        psi = -th * (z[1] - z[0])
        want = abs(chi) ** 2 * abs(f[0] + f[1] * np.exp(1j * psi)) ** 2
        assert t.value(z) == pytest.approx(want, rel=1e-10)


def test_g_helpers():
    rng = np.random.default_rng(6)
    z = np.sort(rng.random(4))
    f = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    b = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    a1 = np.exp(-1j * theta_hat(0.3, LAM) * z)
    a2 = np.exp(-1j * theta_hat(1.1, LAM) * z)
    s1, s2 = a1 @ f, a2 @ f
    assert g1(0.3, 1.1, z, f, LAM) == pytest.approx(s1 * np.conj(s2))
    assert g2(0.3, z, b, LAM) == pytest.approx(2 * (np.conj(b) @ np.conj(a1)).real)


# --- bounds --------------------------------------------------------------------


@pytest.mark.parametrize("sign", ["for-A", "for-negB"])
@pytest.mark.parametrize("mode", ["phase", "split"])
def test_bound_touch_minorize_concave(inst, scn, sign, mode):
    ch, ris, F = inst
    rng = np.random.default_rng(7)
    z0 = random_feasible_z(scn, rng)
    t = build_trig_objective(ch, ris, F[:, 1], 1, mode=mode) if sign == "for-A" else \
        interference_objective(ch, ris, F, 1, scn.noise, mode=mode)
    q = build_quadratic_bound(t, z0, sign)
    sgn = 1.0 if sign == "for-A" else -1.0
    tv = sgn * t.value(z0)
    assert q.value(z0) == pytest.approx(tv, rel=1e-7, abs=1e-9 * abs(t.family.w).sum())
    assert np.linalg.eigvalsh(q.R).max() <= 1e-9 * abs(q.R).max()
    slack = 1e-9 * (abs(t.family.w).sum() + abs(t.family.const))
    for _ in range(200):
        z = random_feasible_z(scn, rng)
        assert q.value(z) <= sgn * t.value(z) + slack


def test_bound_gradient_matches_finite_differences(inst, scn):
    ch, ris, F = inst
    z0 = random_feasible_z(scn, np.random.default_rng(8))
    t = build_trig_objective(ch, ris, F[:, 0], 0)
    q = build_quadratic_bound(t, z0)
    h = 1e-7
    fd = np.array([(t.value(z0 + h * e) - t.value(z0 - h * e)) / (2 * h) for e in np.eye(24)])
    np.testing.assert_allclose(q.grad(z0), fd, rtol=1e-4, atol=1e-4 * np.abs(fd).max())
    np.testing.assert_allclose(t.grad(z0), fd, rtol=1e-4, atol=1e-4 * np.abs(fd).max())


def test_bound_sign_validation(inst):
    ch, ris, F = inst
    with pytest.raises(ValueError):
        build_quadratic_bound(build_trig_objective(ch, ris, F[:, 0], 0), ch.z, "other")


def test_pair_curvature_formula():
    rng = np.random.default_rng(9)
    f = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    t1, t2 = 0.4, 2.0
    n, m = np.meshgrid(np.arange(5), np.arange(5), indexing="ij")
    w = (np.abs(f)[:, None] * np.abs(f)[None, :]).ravel()
    off = -(np.angle(f)[:, None] - np.angle(f)[None, :]).ravel()
    fam = CosFamily(5, 0.0, w, off, n.ravel(), np.full(25, theta_hat(t2, LAM)),
                    m.ravel(), np.full(25, -theta_hat(t1, LAM)))
    z = np.sort(rng.random(5))
    assert fam.value(z) == pytest.approx(g1(t1, t2, z, f, LAM).real)
    R, _, _ = family_bound(fam, z)
    np.testing.assert_allclose(R, r_g1(t1, t2, f, LAM), rtol=1e-10, atol=1e-12 * abs(R).max())


def test_single_angle_curvature_uses_absolute_parts():
    b = np.array([-1.0 + 2.0j, 0.5 - 0.25j, -0.3 - 0.1j])
    th = theta_hat(0.8, LAM)
    w_cos, w_sin = 2 * b.real, 2 * b.imag
    # sin x = cos(x - pi/2); negative weights move to the cosine phase
    w = np.concatenate([np.abs(w_cos), np.abs(w_sin)])
    off = np.concatenate([np.where(w_cos < 0, math.pi, 0.0), np.where(w_sin < 0, math.pi, 0.0) - math.pi / 2])
    idx = np.concatenate([np.arange(3)] * 2)
    fam = CosFamily(3, 0.0, w, off, idx, np.full(6, th), idx, np.zeros(6))
    z = np.array([0.01, 0.2, 0.37])
    assert fam.value(z) == pytest.approx(g2(0.8, z, b, LAM))
    R, _, _ = family_bound(fam, z)
    np.testing.assert_allclose(R, r_g2(0.8, b, LAM))


# --- MM ------------------------------------------------------------------------


def test_mm_pure_nlos_returns_start(scn):
    s = scn.with_kappa_linear(0.0)
    ch = channels(s)
    F = initial_state("FD", cascade(ch, None), s.power, s.noise).F
    info = MmInfo()
    apv, tr = mm_optimize_positions(ch, None, F, s.noise, info=info)
    np.testing.assert_array_equal(apv.z, ch.z)
    assert info.iterations == 1


def test_mm_single_user_los_matched_is_flat():
    s = load_scenario("""
[system]
n_tx = 4
n_users = 1
[users]
theta_deg = 70
phi_deg = 0
range_m = 10
[ris]
theta_deg =
phi_deg =
range_m =
""").with_kappa_linear(1e300)
    ch = channels(s)
    F = ch.h_bu[0][:, None] / np.linalg.norm(ch.h_bu[0]) * math.sqrt(s.power)
    r0 = rate_of(cascade(ch, None), F, s.noise)
    apv, tr = mm_optimize_positions(ch, None, F, s.noise, max_iter=5)
    # the phase-matched precoder keeps full gain wherever the elements sit
    assert rate_of(cascade(ch.with_positions(apv), None), F, s.noise) >= r0 - 1e-9
    assert max(tr.values("MM")) == pytest.approx(r0, rel=1e-6)


def test_mm_monotone_and_feasible(inst, scn):
    ch, ris, F = inst
    info = MmInfo()
    apv, tr = mm_optimize_positions(ch, ris, F, scn.noise, max_iter=6, info=info)
    vals = tr.values("MM")
    assert tr.is_monotone("MM")
    apv.check(scn)
    assert vals[-1] >= rate_of(cascade(ch, ris), F, scn.noise) - 1e-9
    assert all(b >= a - 1e-9 for a, b in zip(info.surrogate, info.surrogate[1:])) or len(info.surrogate) < 2


def test_mm_without_extrapolation_is_monotone(small):
    ch = channels(small, 2)
    ris = random_phases(small, np.random.default_rng(10))
    F = initial_state("FD", cascade(ch, ris), small.power, small.noise).F
    apv, tr = mm_optimize_positions(ch, ris, F, small.noise, max_iter=5, extrapolate=False)
    assert tr.is_monotone("MM")
    apv.check(small)


def test_reassembled_positions_keep_draws(scn):
    ch = channels(scn)
    ch2 = ch.with_positions(uniform_apv(scn, 0.6 * scn.wavelength))
    assert dataclasses.replace(ch2, apv=ch.apv).draws is ch.draws


def test_expansion_without_ris(scn):
    s = scn.with_ris(0)
    ch = channels(s, 2)
    e = np.ones((0, s.n_ris_elements))
    rng = np.random.default_rng(9)
    f = rng.standard_normal(24) + 1j * rng.standard_normal(24)
    z = random_feasible_z(s, rng)
    t = build_trig_objective(ch, e, f, 0)
    assert t.value(z) == pytest.approx(direct_power(ch, e, z, f, 0), rel=1e-8)
