"""Block-coordinate optimization, Monte Carlo experiment suites and the command line."""

from __future__ import annotations

import argparse
import configparser
import csv
import math
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .channel import NlosDraws, assemble_channels, cascade, draw_nlos
from .convex_kernel import SolverError
from .fapos import MmInfo, mm_optimize_positions
from .hbf import hbf_optimize, initial_state
from .metrics import ARCHS, DEFAULT_GRID_DEG, BeamformerState, RisState, beampattern, rate_of, write_beampattern_csv
from .ris_opt import ris_optimize
from .scenario import Scenario, ScenarioError, load_scenario, rng_for_trial, uniform_apv
from .tfa import dual_gl_spacing, gl_spacing, tfa_pipeline, tfa_positions_abf
from .tracing import SolutionTrace

SCHEMES = ("FA", "FPA", "TFA-CFS", "TFA-Opt")
PHASE_MODES = ("optimized", "random")
SWEEPS = ("power_dbm", "kappa_db")
ARCH_ALIASES = {"fd": "FD", "full": "FullCon", "fullcon": "FullCon", "sub": "SubCon", "subcon": "SubCon"}
SCHEME_ALIASES = {"fa": "FA", "fpa": "FPA", "tfa-cfs": "TFA-CFS", "cfs": "TFA-CFS", "tfa-opt": "TFA-Opt"}

# substreams of one trial's generator family
STREAM_DRAWS, STREAM_RIS, STREAM_SOLVER = 0, 1, 2


class BcdError(RuntimeError):
    """A subproblem failed; carries the block and outer iteration."""


# ---------------------------------------------------------------------------
# draws shared across sweep points and configurations
# ---------------------------------------------------------------------------


def trial_draws(scn: Scenario, trial: int) -> NlosDraws:
    """Small-scale fading for one trial, independent of power, kappa and RIS count.

    The draw is made for the full RIS set of ``scn`` and then truncated, so a
    configuration with fewer RISs sees the same links to the remaining ones.
    """
    return draw_nlos(scn, rng_for_trial(scn, trial, STREAM_DRAWS))


def restrict_draws(d: NlosDraws, n_ris: int) -> NlosDraws:
    return NlosDraws(d.h_bu, d.H_br[:n_ris], d.h_ru[:n_ris])


def random_phases(scn: Scenario, trial: int, n_ris: int) -> RisState:
    rng = rng_for_trial(scn, trial, STREAM_RIS)
    e = np.exp(2j * math.pi * rng.random((scn.n_ris, scn.n_ris_elements)))
    return RisState(e[:n_ris].copy())


# ---------------------------------------------------------------------------
# BCD
# ---------------------------------------------------------------------------


@dataclass
class BcdResult:
    bf: BeamformerState
    ris: RisState
    apv: object
    trace: SolutionTrace
    rate: float
    bcd_iters: int
    mm_iters: int

    def __iter__(self):
        return iter((self.bf, self.ris, self.apv, self.trace))


def spacing_grid(scn: Scenario, count: int = 6) -> np.ndarray:
    """Uniform spacings from the minimum spacing up to the widest that fits."""
    widest = scn.aperture / max(scn.n_tx - 1, 1)
    return np.linspace(scn.min_spacing, widest, count)


def initial_positions(scn: Scenario, draws: NlosDraws, arch: str, ris=None):
    """Starting APV for the position block: the uniform spacing on a coarse grid
    whose initial beamformer gives the highest rate.

    Full-Con designs approximate the fully digital precoder, so that precoder
    scores the grid for both.
    """
    proxy = "FD" if arch == "FullCon" else arch
    best, best_rate = None, -math.inf
    for s in spacing_grid(scn):
        ch = assemble_channels(scn, draws, uniform_apv(scn, s))
        g = cascade(ch, ris)
        r = rate_of(g, initial_state(proxy, g, scn.power, scn.noise).F, scn.noise)
        if r > best_rate + 1e-12:
            best, best_rate = ch.apv, r
    return best


def bcd_optimize(scn: Scenario, draws: NlosDraws, arch: str, scheme: str = "FA",
                 phase_mode: str = "optimized", ris0: RisState | None = None,
                 trace: SolutionTrace | None = None, rng=None) -> BcdResult:
    """Cycle beamformer -> RIS phases -> antenna positions until the rate settles.

    FPA keeps the uniform half-wavelength array.  With ``phase_mode="random"``
    the RIS phases stay at ``ris0`` (a random draw by default).  Every block
    only accepts non-decreasing updates, so the recorded BCD objective is
    monotone.
    """
    if scheme not in ("FA", "FPA"):
        raise ValueError(f"BCD handles FA and FPA, not {scheme!r}")
    if arch not in ARCHS:
        raise ValueError(f"unknown architecture {arch!r}")
    if phase_mode not in PHASE_MODES:
        raise ValueError(f"unknown RIS phase mode {phase_mode!r}")
    trace = SolutionTrace() if trace is None else trace
    rng = np.random.default_rng(0) if rng is None else rng
    L, M = scn.n_ris, scn.n_ris_elements
    P, noise = scn.power, scn.noise
    if ris0 is None:
        ris0 = RisState(np.exp(2j * math.pi * rng.random((L, M)))) if phase_mode == "random" else RisState.ones(L, M)
    ris = ris0
    if scheme == "FPA":
        apv = uniform_apv(scn, scn.min_spacing)
    else:
        apv = initial_positions(scn, draws, arch, ris)
    ch = assemble_channels(scn, draws, apv)
    bf = None
    rate = -math.inf
    mm_total = 0
    it = 0
    for it in range(scn.max_bcd_iter):
        trace.outer = it
        prev = rate
        g = cascade(ch, ris)
        try:
            new_bf, trace = hbf_optimize(arch, g, P, noise, scn.rho, scn.max_fp_iter, state=bf,
                                         penalty=scn.penalty, trace=trace, rng=rng)
        except SolverError as exc:
            raise BcdError(f"beamforming block failed at outer iteration {it}: {exc}") from exc
        new_rate = rate_of(g, new_bf.F, noise)
        if bf is None or new_rate >= rate_of(g, bf.F, noise):
            bf = new_bf
        if L and phase_mode == "optimized":
            try:
                ris, trace, _ = ris_optimize(ch, bf, noise, scn.rho, scn.max_fp_iter, ris0=ris,
                                             trace=trace, rng=rng)
            except SolverError as exc:
                raise BcdError(f"RIS block failed at outer iteration {it}: {exc}") from exc
        if scheme == "FA":
            info = MmInfo()
            try:
                apv, trace = mm_optimize_positions(ch, ris, bf.F, noise, scn.rho, scn.max_mm_iter,
                                                   trace=trace, info=info)
            except SolverError as exc:
                raise BcdError(f"position block failed at outer iteration {it}: {exc}") from exc
            mm_total += info.iterations
            ch = ch.with_positions(apv)
        rate = rate_of(cascade(ch, ris), bf.F, noise)
        trace.add("BCD", it, rate)
        if prev > 0 and abs(rate / prev - 1.0) <= scn.rho:
            break
    bf.check(P)
    ris.check()
    ch.apv.check(scn)
    return BcdResult(bf, ris, ch.apv, trace, rate, it + 1, mm_total)


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentSpec:
    """One curve: a scheme/architecture/RIS configuration swept over power or kappa."""

    scheme: str
    arch: str = "SubCon"
    ris_count: int = 2
    phase_mode: str = "optimized"
    sweep: str = "power_dbm"
    grid: tuple = (-95.0,)
    trials: int = 10
    seed: int = 1
    label: str = ""
    fixed_power_dbm: float | None = None
    fixed_kappa_db: float | None = None

    def validate(self) -> "ExperimentSpec":
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.arch not in ARCHS:
            raise ValueError(f"unknown architecture {self.arch!r}")
        if self.scheme.startswith("TFA") and self.arch != "SubCon":
            raise ValueError("TFA schemes use the sub-connected architecture")
        if self.ris_count < 0:
            raise ValueError("RIS count must be nonnegative")
        if self.phase_mode not in PHASE_MODES:
            raise ValueError(f"unknown RIS phase mode {self.phase_mode!r}")
        if self.sweep not in SWEEPS:
            raise ValueError(f"unknown sweep variable {self.sweep!r}")
        if len(self.grid) == 0:
            raise ValueError("sweep grid must be nonempty")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        return self

    @property
    def name(self) -> str:
        return self.label or f"{self.scheme}-{self.arch}-{self.ris_count}RIS-{self.phase_mode}"


RESULT_FIELDS = ("scheme", "arch", "ris_count", "phase_mode", "sweep_name", "sweep_value", "trial",
                 "seed", "sum_rate_bps_hz", "bcd_iters", "mm_iters", "status", "wall_ms")


def point_scenario(base: Scenario, spec: ExperimentSpec, value: float) -> Scenario:
    scn = base
    if spec.fixed_power_dbm is not None:
        scn = scn.with_power_dbm(spec.fixed_power_dbm)
    if spec.fixed_kappa_db is not None:
        scn = scn.with_kappa_db(spec.fixed_kappa_db)
    if spec.sweep == "power_dbm":
        scn = scn.with_power_dbm(value)
    else:
        scn = scn.with_kappa_db(value)
    return replace(scn, seed=spec.seed)


def run_trial(base: Scenario, spec: ExperimentSpec, value: float, trial: int) -> dict:
    """One row of the result table; failures become rows with a non-ok status."""
    full = point_scenario(base, spec, value)
    if spec.ris_count > full.n_ris:
        raise ValueError(f"scenario has {full.n_ris} RISs, spec asks for {spec.ris_count}")
    draws_full = trial_draws(full, trial)
    scn = full.with_ris(spec.ris_count)
    draws = restrict_draws(draws_full, spec.ris_count)
    row = {"scheme": spec.scheme, "arch": spec.arch, "ris_count": spec.ris_count,
           "phase_mode": spec.phase_mode, "sweep_name": spec.sweep, "sweep_value": value,
           "trial": trial, "seed": spec.seed, "sum_rate_bps_hz": float("nan"),
           "bcd_iters": 0, "mm_iters": 0, "status": "ok"}
    t0 = time.perf_counter()
    rng = rng_for_trial(full, trial, STREAM_SOLVER)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            if spec.scheme.startswith("TFA"):
                sol = tfa_pipeline(scn, draws, "CFS" if spec.scheme == "TFA-CFS" else "Opt", rng=rng)
                row["sum_rate_bps_hz"] = sol.rate
                row["bcd_iters"] = sol.trace.count("BCD")
            else:
                ris0 = random_phases(full, trial, spec.ris_count) if spec.phase_mode == "random" else None
                res = bcd_optimize(scn, draws, spec.arch, spec.scheme, spec.phase_mode, ris0=ris0, rng=rng)
                row["sum_rate_bps_hz"] = res.rate
                row["bcd_iters"] = res.bcd_iters
                row["mm_iters"] = res.mm_iters
    except (BcdError, SolverError, np.linalg.LinAlgError, ValueError) as exc:
        row["status"] = f"error: {type(exc).__name__}: {exc}".replace("\n", " ")
    row["wall_ms"] = (time.perf_counter() - t0) * 1e3
    return row


def _run_trial_args(args):
    return run_trial(*args)


def run_experiment(spec: ExperimentSpec, base: Scenario | None = None, workers: int = 1) -> list[dict]:
    """Rows ordered by (sweep point, trial) whatever the completion order."""
    spec.validate()
    base = load_scenario() if base is None else base
    jobs = [(base, spec, float(v), t) for v in spec.grid for t in range(spec.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_run_trial_args, jobs))
    else:
        rows = [_run_trial_args(j) for j in jobs]
    return rows


def aggregate(rows) -> list[dict]:
    """Mean/std of the rate per (curve, sweep value) over ok rows."""
    groups: dict = {}
    for r in rows:
        key = (r["scheme"], r["arch"], r["ris_count"], r["phase_mode"], r["sweep_name"], r["sweep_value"])
        groups.setdefault(key, []).append(r)
    out = []
    for key, rs in groups.items():
        ok = [r["sum_rate_bps_hz"] for r in rs if r["status"] == "ok"]
        out.append(dict(zip(("scheme", "arch", "ris_count", "phase_mode", "sweep_name", "sweep_value"), key),
                        mean_rate=float(np.mean(ok)) if ok else float("nan"),
                        std_rate=float(np.std(ok)) if ok else float("nan"),
                        n_ok=len(ok), n_failed=len(rs) - len(ok)))
    return out


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_rows(path, rows, fields, timing: bool = True) -> None:
    cols = [f for f in fields if timing or f != "wall_ms"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in cols])


# ---------------------------------------------------------------------------
# spec files and presets
# ---------------------------------------------------------------------------

PRESETS = {
    "architectures": """\
[experiment]
sweep = power_dbm
grid = -105, -100, -95, -90, -85
fixed_kappa_db = 20
trials = 10
seed = 1

[curve FA-FD]
scheme = FA
arch = FD
[curve FPA-FD]
scheme = FPA
arch = FD
[curve FA-FullCon]
scheme = FA
arch = FullCon
[curve FPA-FullCon]
scheme = FPA
arch = FullCon
[curve FA-SubCon]
scheme = FA
arch = SubCon
[curve FPA-SubCon]
scheme = FPA
arch = SubCon
""",
    "tfa_compare": """\
[experiment]
sweep = power_dbm
grid = -105, -100, -95, -90, -85
fixed_kappa_db = 20
trials = 10
seed = 1

[curve FA]
scheme = FA
[curve FPA]
scheme = FPA
[curve FPA-FullCon]
scheme = FPA
arch = FullCon
[curve TFA-CFS]
scheme = TFA-CFS
[curve TFA-Opt]
scheme = TFA-Opt
""",
    "ris_configs": """\
[experiment]
sweep = power_dbm
grid = -105, -100, -95, -90, -85
fixed_kappa_db = 20
trials = 10
seed = 1

[curve double]
scheme = FA
ris = 2
[curve single]
scheme = FA
ris = 1
[curve none]
scheme = FA
ris = 0
[curve random]
scheme = FA
ris = 2
phase_mode = random
[curve TFA-double]
scheme = TFA-CFS
ris = 2
[curve TFA-single]
scheme = TFA-CFS
ris = 1
""",
    "kappa_sweep": """\
[experiment]
sweep = kappa_db
grid = 30, 20, 10, 5, 0
fixed_power_dbm = -85
trials = 10
seed = 1

[curve FA]
scheme = FA
[curve FPA]
scheme = FPA
[curve TFA-CFS]
scheme = TFA-CFS
[curve TFA-Opt]
scheme = TFA-Opt
""",
    "runtime": """\
[experiment]
sweep = power_dbm
grid = -95
fixed_kappa_db = 20
trials = 3
seed = 1

[curve FA-FD]
scheme = FA
arch = FD
[curve FA-FullCon]
scheme = FA
arch = FullCon
[curve FA-SubCon]
scheme = FA
arch = SubCon
[curve TFA-CFS]
scheme = TFA-CFS
[curve TFA-Opt]
scheme = TFA-Opt
""",
}


def parse_spec_text(text: str, trials: int | None = None, seed: int | None = None) -> list[ExperimentSpec]:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.read_string(text)
    if not cp.has_section("experiment"):
        raise ValueError("spec file needs an [experiment] section")
    ex = cp["experiment"]
    sweep = ex.get("sweep", "power_dbm").strip()
    grid = tuple(float(x) for x in ex.get("grid", "").replace(",", " ").split())
    n = int(ex.get("trials", "10")) if trials is None else int(trials)
    sd = int(ex.get("seed", "1")) if seed is None else int(seed)
    fp = ex.get("fixed_power_dbm")
    fk = ex.get("fixed_kappa_db")
    specs = []
    for sec in cp.sections():
        if not sec.startswith("curve"):
            continue
        c = cp[sec]
        specs.append(ExperimentSpec(
            scheme=_scheme(c.get("scheme", "FA")), arch=_arch(c.get("arch", "SubCon")),
            ris_count=int(c.get("ris", "2")), phase_mode=c.get("phase_mode", "optimized").strip(),
            sweep=sweep, grid=grid, trials=n, seed=sd, label=sec[len("curve"):].strip(),
            fixed_power_dbm=None if fp is None else float(fp),
            fixed_kappa_db=None if fk is None else float(fk)).validate())
    if not specs:
        raise ValueError("spec file defines no [curve ...] section")
    return specs


def _arch(s: str) -> str:
    s = s.strip()
    if s in ARCHS:
        return s
    try:
        return ARCH_ALIASES[s.lower()]
    except KeyError:
        raise ValueError(f"unknown architecture {s!r}") from None


def _scheme(s: str) -> str:
    s = s.strip()
    if s in SCHEMES:
        return s
    try:
        return SCHEME_ALIASES[s.lower()]
    except KeyError:
        raise ValueError(f"unknown scheme {s!r}") from None


def load_spec(path_or_preset: str, trials=None, seed=None) -> list[ExperimentSpec]:
    if path_or_preset in PRESETS:
        return parse_spec_text(PRESETS[path_or_preset], trials, seed)
    with open(path_or_preset) as fh:
        return parse_spec_text(fh.read(), trials, seed)


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


def _scenario_from_args(args) -> Scenario:
    text = None
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
    sets = list(args.set or [])
    if args.seed is not None:
        sets.append(f"solver.seed={args.seed}")
    return load_scenario(text, sets)


def _cmd_run(args) -> int:
    base = _scenario_from_args(args)
    specs = load_spec(args.spec, args.trials, args.seed)
    os.makedirs(args.out, exist_ok=True)
    stem = os.path.splitext(os.path.basename(args.spec))[0]
    rows = []
    path = os.path.join(args.out, f"{stem}_results.csv")
    try:
        for sp in specs:
            rows.extend(run_experiment(sp, base, workers=args.workers))
    finally:
        write_rows(path, rows, RESULT_FIELDS, timing=args.timing)
        agg = aggregate(rows)
        if agg:
            write_rows(os.path.join(args.out, f"{stem}_summary.csv"), agg, list(agg[0].keys()))
    failed = sum(r["status"] != "ok" for r in rows)
    print(f"wrote {path} ({len(rows)} rows, {failed} failed)")
    return 0


def _cmd_trace(args) -> int:
    base = _scenario_from_args(args)
    scn = base.with_ris(args.ris) if args.ris is not None else base
    trial = args.trial
    draws = restrict_draws(trial_draws(base, trial), scn.n_ris)
    rng = rng_for_trial(base, trial, STREAM_SOLVER)
    os.makedirs(args.out, exist_ok=True)
    scheme = _scheme(args.scheme)
    arch = _arch(args.arch)
    trace = SolutionTrace()
    path = os.path.join(args.out, f"trace_{scheme}_{arch}.csv")
    try:
        if scheme.startswith("TFA"):
            sol = tfa_pipeline(scn, draws, "CFS" if scheme == "TFA-CFS" else "Opt", trace=trace, rng=rng)
            rate = sol.rate
        else:
            res = bcd_optimize(scn, draws, arch, scheme, trace=trace, rng=rng)
            rate = res.rate
    finally:
        trace.write_csv(path, timing=args.timing)
    print(f"sum rate {rate:.6f} bit/s/Hz; wrote {path}")
    return 0


def _cmd_beampattern(args) -> int:
    base = _scenario_from_args(args)
    os.makedirs(args.out, exist_ok=True)
    grid = np.radians(DEFAULT_GRID_DEG)
    lam = base.wavelength
    if args.weights:
        w = np.array([complex(x.replace("i", "j")) for x in args.weights.split(",")])
        spacing = (args.spacing if args.spacing is not None else 0.5) * lam
        path = os.path.join(args.out, "beampattern.csv")
        write_beampattern_csv(path, DEFAULT_GRID_DEG, beampattern(w, spacing, grid, lam))
        print(f"wrote {path}")
        return 0
    scheme = _scheme(args.scheme)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if scheme.startswith("TFA"):
            layout, V = tfa_positions_abf(base)
            n = layout.sub_size
            for k in range(base.n_users):
                path = os.path.join(args.out, f"beampattern_tfa_sub{k}.csv")
                write_beampattern_csv(path, DEFAULT_GRID_DEG,
                                      beampattern(V[k * n:(k + 1) * n, k], layout.spacing[k] * lam, grid, lam))
                print(f"wrote {path}")
            return 0
        draws = trial_draws(base, args.trial)
        res = bcd_optimize(base, draws, _arch(args.arch), scheme,
                           rng=rng_for_trial(base, args.trial, STREAM_SOLVER))
    for k in range(base.n_users):
        path = os.path.join(args.out, f"beampattern_{scheme}_user{k}.csv")
        write_beampattern_csv(path, DEFAULT_GRID_DEG, beampattern(res.bf.f(k), res.apv, grid, lam))
        print(f"wrote {path}")
    return 0


def _cmd_gl(args) -> int:
    tm = math.radians(args.theta_m)
    if args.theta_g2 is not None:
        g1 = args.theta_g if args.theta_g is not None else args.theta_g1
        r = dual_gl_spacing(tm, math.radians(g1), math.radians(args.theta_g2), args.tol)
        print(f"{r.spacing:.4f}")
        print(f"k1 = {r.k1}, k2 = {r.k2}, lobes = {r.lobe_count}, pointing_error_deg = {r.pointing_error_deg:.4f}")
        return 0
    if args.theta_g is None:
        raise ValueError("gl needs --theta-g (and optionally --theta-g2)")
    print(f"{gl_spacing(math.radians(args.theta_g), tm, args.k):.4f}")
    return 0


def _cmd_tfa(args) -> int:
    base = _scenario_from_args(args)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        layout, _ = tfa_positions_abf(base)
    text = layout.report()
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "tfa_layout.txt"), "w") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario INI file (defaults are built in)")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="scenario override")
    common.add_argument("--seed", type=int, help="base seed")
    common.add_argument("--trials", type=int, help="Monte Carlo trials per point")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--arch", default="SubCon", help="FD, FullCon/full or SubCon/sub")
    common.add_argument("--scheme", default="FA", help="FA, FPA, TFA-CFS or TFA-Opt")
    common.add_argument("--ris", type=int, help="number of RISs to keep")
    common.add_argument("--timing", action="store_true", help="add wall-clock columns")
    p = argparse.ArgumentParser(prog="risfa", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", parents=[common], help="run an experiment spec or preset")
    r.add_argument("--spec", required=True, help=f"spec file or preset ({', '.join(PRESETS)})")
    r.add_argument("--workers", type=int, default=1)
    r.set_defaults(func=_cmd_run)
    t = sub.add_parser("trace", parents=[common], help="single BCD/TFA run with its trace")
    t.add_argument("--trial", type=int, default=0)
    t.set_defaults(func=_cmd_trace)
    b = sub.add_parser("beampattern", parents=[common], help="beampattern CSV")
    b.add_argument("--weights", help="comma-separated complex weights, e.g. 1,1j,-1")
    b.add_argument("--spacing", type=float, help="uniform spacing in wavelengths for --weights")
    b.add_argument("--trial", type=int, default=0)
    b.set_defaults(func=_cmd_beampattern)
    g = sub.add_parser("gl", parents=[common], help="grating-lobe spacing calculator")
    g.add_argument("--theta-m", type=float, required=True, help="main lobe (degrees)")
    g.add_argument("--theta-g", type=float, help="grating lobe (degrees)")
    g.add_argument("--theta-g1", type=float, help="first grating lobe for the dual case")
    g.add_argument("--theta-g2", type=float, help="second grating lobe (dual case)")
    g.add_argument("--k", type=int, default=1, help="grating-lobe order")
    g.add_argument("--tol", type=float, default=0.01, help="rational approximation tolerance")
    g.set_defaults(func=_cmd_gl)
    f = sub.add_parser("tfa", parents=[common], help="TFA layout report")
    f.set_defaults(func=_cmd_tfa)
    return p


def cli(argv=None) -> int:
    p = build_parser()
    try:
        args = p.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ScenarioError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (BcdError, SolverError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
