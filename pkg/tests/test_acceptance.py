"""End-to-end acceptance checks, one test per criterion.

Monte Carlo results are cached per session so that the ordering and runtime
checks reuse the same frozen trials.
"""

import time

import numpy as np
import pytest

from helpers import random_feasible_z
from risfa.channel import assemble_channels, cascade
from risfa.driver import STREAM_SOLVER, ExperimentSpec, bcd_optimize, cli, run_trial, trial_draws
from risfa.fapos import build_quadratic_bound, build_trig_objective, interference_objective, surrogate_cos, surrogate_sin
from risfa.hbf import TIGHT, fd_step, fp_alphas, initial_state
from risfa.metrics import rate_of
from risfa.ris_opt import build_ris_quadratics, lift
from risfa.scenario import default_scenario, rng_for_trial, uniform_apv
from risfa.tfa import tfa_positions_abf, tfa_steering
from risfa.tracing import SolutionTrace

SLACK = 0.005
TRIALS = 10
KAPPAS = (30.0, 20.0, 10.0, 5.0, 0.0)
KAPPA_TRIALS = 5

_cache: dict = {}
# measured values, echoed in the terminal summary
REPORT: dict = {}
SUBCON_FA = ("FA", "SubCon", 2, "optimized", -95.0, 20.0, TRIALS)


def rows(scheme, arch="SubCon", ris=2, phase="optimized", power=-95.0, kappa=20.0, trials=TRIALS):
    """Result rows for one configuration at a single (power, kappa) point."""
    key = (scheme, arch, ris, phase, power, kappa, trials)
    if key == SUBCON_FA:
        subcon_fa_traces()
    if key not in _cache:
        spec = ExperimentSpec(scheme, arch, ris, phase, "power_dbm", (power,), trials, seed=1,
                              fixed_kappa_db=kappa).validate()
        base = default_scenario()
        out = [run_trial(base, spec, power, t) for t in range(trials)]
        assert all(r["status"] == "ok" for r in out), [r["status"] for r in out]
        _cache[key] = out
    return _cache[key]


def mean_rate(*a, **k):
    return float(np.mean([r["sum_rate_bps_hz"] for r in rows(*a, **k)]))


def geq(a, b):
    return a >= b * (1 - SLACK)


def test_c1_oracle_identities():
    s = default_scenario()
    rng = np.random.default_rng(11)
    t0 = time.perf_counter()
    worst_trig = worst_lift = 0.0
    for inst in range(100):
        ch = assemble_channels(s, trial_draws(s, inst), uniform_apv(s, s.min_spacing))
        e = np.exp(2j * np.pi * rng.random((s.n_ris, s.n_ris_elements)))
        F = rng.standard_normal((s.n_tx, s.n_users)) + 1j * rng.standard_normal((s.n_tx, s.n_users))
        z = random_feasible_z(s, rng)
        k = inst % s.n_users
        direct = abs(np.vdot(cascade(ch.with_positions(z), e)[k], F[:, k])) ** 2
        trig = build_trig_objective(ch, e, F[:, k], k).value(z)
        worst_trig = max(worst_trig, abs(trig - direct) / direct)
        g = cascade(ch, e)
        Rs, Ri = build_ris_quadratics(ch, [np.outer(F[:, j], F[:, j].conj()) for j in range(s.n_users)], k, noise=1.0)
        Xi = lift(e)
        sig = abs(np.vdot(g[k], F[:, k])) ** 2
        itf = sum(abs(np.vdot(g[k], F[:, j])) ** 2 for j in range(s.n_users) if j != k) + 1.0
        worst_lift = max(worst_lift, abs(np.trace(Rs @ Xi).real - sig) / sig,
                         abs(np.trace(Ri @ Xi).real - itf) / itf)
    assert worst_trig <= 1e-8
    assert worst_lift <= 1e-9
    assert time.perf_counter() - t0 < 60


def test_c2_minorization_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(12)
    x = rng.uniform(-100, 100, 100_000)
    x0 = rng.uniform(-100, 100, 100_000)
    assert np.all(surrogate_cos(x, x0) <= np.cos(x) + 1e-12)
    assert np.all(surrogate_sin(x, x0) <= np.sin(x) + 1e-12)
    s = default_scenario()
    for inst in range(6):
        ch = assemble_channels(s, trial_draws(s, inst), uniform_apv(s, s.min_spacing))
        e = np.exp(2j * np.pi * rng.random((s.n_ris, s.n_ris_elements)))
        F = initial_state("FD", cascade(ch, e), s.power, s.noise).F
        k = inst % s.n_users
        for sign, t in (("for-A", build_trig_objective(ch, e, F[:, k], k)),
                        ("for-negB", interference_objective(ch, e, F, k, s.noise))):
            sgn = 1.0 if sign == "for-A" else -1.0
            z0 = random_feasible_z(s, rng)
            q = build_quadratic_bound(t, z0, sign)
            scale = abs(t.family.w).sum() + abs(t.family.const)
            assert abs(q.value(z0) - sgn * t.value(z0)) <= 1e-9 * scale
            assert np.linalg.eigvalsh(q.R).max() <= 1e-9 * abs(q.R).max()
            for _ in range(1000):
                z = random_feasible_z(s, rng)
                assert q.value(z) <= sgn * t.value(z) + 1e-9 * scale
    assert time.perf_counter() - t0 < 60


_traces: dict = {}


def subcon_fa_traces():
    """Sub-Con FA at the default point (kappa 20 dB, -95 dBm) with traces.

    The rows double as the Sub-Con FA entries of the result cache, so the
    ordering and runtime checks see exactly these runs.
    """
    if not _traces:
        s = default_scenario()
        out = []
        for t in range(TRIALS):
            t0 = time.perf_counter()
            res = bcd_optimize(s, trial_draws(s, t), "SubCon", "FA", trace=SolutionTrace(),
                               rng=rng_for_trial(s, t, STREAM_SOLVER))
            out.append({"sum_rate_bps_hz": res.rate, "wall_ms": (time.perf_counter() - t0) * 1e3,
                        "bcd_iters": res.bcd_iters, "status": "ok"})
            _traces[t] = res
        _cache[SUBCON_FA] = out
    return _traces


@pytest.mark.slow
def test_c3_monotone_convergence():
    res = subcon_fa_traces()
    for t, r in res.items():
        tr = r.trace
        assert tr.is_monotone("BCD", slack=1e-7), t
        for loop in ("FP-HBF", "FP-RIS", "MM"):
            assert tr.is_monotone(loop, slack=1e-7, per_segment=True), (t, loop)
        assert max(len(seg) for seg in tr.segments("MM")) <= 50, t
    iters = [r.bcd_iters for r in res.values()]
    REPORT["c3 BCD iterations per trial"] = iters
    REPORT["c3 longest MM run"] = max(max(len(s) for s in r.trace.segments("MM")) for r in res.values())
    assert max(iters) <= 5, f"BCD outer iterations per trial: {iters}"


@pytest.mark.slow
def test_c4_architecture_and_scheme_orderings():
    m = {(sch, a): mean_rate(sch, a) for sch in ("FA", "FPA") for a in ("FD", "FullCon", "SubCon")}
    REPORT["c4 mean rates"] = {f"{s}-{a}": round(v, 3) for (s, a), v in m.items()}
    for sch in ("FA", "FPA"):
        assert geq(m[sch, "FD"], m[sch, "FullCon"]), (sch, m)
        assert geq(m[sch, "FullCon"], m[sch, "SubCon"]), (sch, m)
    gaps = {}
    for a in ("FD", "FullCon", "SubCon"):
        assert geq(m["FA", a], m["FPA", a]), (a, m)
        gaps[a] = m["FA", a] - m["FPA", a]
    assert gaps["SubCon"] >= max(gaps.values()) * (1 - SLACK), gaps


@pytest.mark.slow
def test_c5_ris_orderings():
    double = mean_rate("FA", ris=2)
    single = mean_rate("FA", ris=1)
    none = mean_rate("FA", ris=0)
    rand = mean_rate("FA", ris=2, phase="random")
    REPORT["c5 mean rates (2, 1, 0 RIS, random)"] = [round(x, 3) for x in (double, single, none, rand)]
    assert geq(double, single) and geq(single, none), (double, single, none)
    assert geq(double, rand) and geq(rand, none), (double, rand, none)


def test_c6_grating_lobe_exactness():
    t0 = time.perf_counter()
    s = default_scenario()
    lay, V = tfa_positions_abf(s)
    n = s.sub_size
    assert n == 8
    for k in range(s.n_users):
        v = V[k * n:(k + 1) * n, k]
        for th in (s.theta_bu[k], s.theta_br[lay.xi[k]]):
            assert abs(abs(np.vdot(tfa_steering(th, lay.spacing[k], n), v)) - n) <= 1e-10
    assert time.perf_counter() - t0 < 1


def test_c7_sdr_tightness():
    s = default_scenario()
    tight, losses = 0, []
    for inst in range(100):
        rng = np.random.default_rng(1000 + inst)
        ch = assemble_channels(s, trial_draws(s, inst), uniform_apv(s, s.min_spacing))
        g = cascade(ch, np.exp(2j * np.pi * rng.random((s.n_ris, s.n_ris_elements))))
        F0 = initial_state("FD", g, s.power, s.noise).F
        Gam, F, info = fd_step(g, fp_alphas(g, F0, s.noise), s.power, s.noise, F0, rng)
        if min(info.tightness) >= TIGHT:
            tight += 1
            continue
        G = np.array([[np.vdot(g[k], Gam[j] @ g[k]).real for j in range(s.n_users)] for k in range(s.n_users)])
        A = np.diag(G)
        lifted = float(np.sum(np.log2(1 + A / (G.sum(axis=1) - A + s.noise))))
        losses.append(1 - rate_of(g, F, s.noise) / lifted)
    REPORT["c7 tight instances"] = tight
    assert tight >= 95
    assert all(x <= 0.01 for x in losses), losses


def kappa_means(scheme):
    return [mean_rate(scheme, power=-85.0, kappa=k, trials=KAPPA_TRIALS) for k in KAPPAS]


@pytest.mark.slow
def test_c8_tfa_kappa_sensitivity():
    cfs = kappa_means("TFA-CFS")
    fpa = kappa_means("FPA")
    fa = kappa_means("FA")
    for name, c in (("TFA-CFS", cfs), ("FPA", fpa), ("FA", fa)):
        REPORT[f"c8 {name} over kappa {KAPPAS}"] = [round(x, 3) for x in c]
    assert all(b <= a for a, b in zip(cfs, cfs[1:])), cfs
    assert any(c < f for kap, c, f in zip(KAPPAS, cfs, fpa) if kap <= 10), (cfs, fpa)
    for curve in (fa, fpa):
        assert (max(curve) - min(curve)) / max(curve) < 0.15, curve


@pytest.mark.slow
def test_c9_runtime_ordering():
    def wall(*a, **k):
        return float(np.mean([r["wall_ms"] for r in rows(*a, **k)]))

    sub = wall("FA", "SubCon")
    fd = wall("FA", "FD")
    cfs = wall("TFA-CFS")
    REPORT["c9 mean wall ms (SubCon, FD, TFA-CFS)"] = [round(x, 1) for x in (sub, fd, cfs)]
    assert cfs < 0.01 * sub, (cfs, sub)
    assert sub > fd, (sub, fd)


def test_c10_cli_determinism(tmp_path):
    spec = tmp_path / "det.ini"
    spec.write_text("[experiment]\nsweep = kappa_db\ngrid = 20, 5\nfixed_power_dbm = -95\ntrials = 2\nseed = 4\n"
                    "[curve cfs]\nscheme = TFA-CFS\n[curve fpa]\nscheme = FPA\narch = FD\nris = 1\n")
    outs = []
    for i in range(2):
        d = tmp_path / f"run{i}"
        assert cli(["run", "--spec", str(spec), "--out", str(d)]) == 0
        assert cli(["trace", "--scheme", "FPA", "--arch", "FD", "--ris", "1", "--out", str(d)]) == 0
        assert cli(["gl", "--theta-m", "80", "--theta-g", "0", "--out", str(d)]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    assert outs[0].keys() == outs[1].keys() and len(outs[0]) >= 3
    assert outs[0] == outs[1]
