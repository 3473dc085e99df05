"""Static problem description: sizes, geometry, powers, path losses, randomness."""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace

import numpy as np

SPEED_OF_LIGHT = 3e8

DEFAULT_CONFIG = """\
# Default scenario: 24-antenna BS, 3 users, two 4x4 RISs at 3.5 GHz.
[system]
carrier_frequency_hz = 3.5e9
n_tx = 24
n_users = 3
ris_rows = 4
ris_cols = 4
# aperture D in wavelengths; defaults to (N - 1)
aperture_wavelengths = auto
min_spacing_wavelengths = 0.5

[power]
# transmit power and noise density are both per-Hz over a unit bandwidth
transmit_power_dbm = -95
noise_density_dbm_hz = -174

[pathloss]
beta0_db = 40
exponent_bs_ue = 2.5
exponent_bs_ris = 1.7
exponent_ris_ue = 2.5

[rician]
kappa_db = 20
# optional per-family overrides: kappa_bs_ue_db, kappa_bs_ris_db, kappa_ris_ue_db

[users]
theta_deg = 80, 90, 100
phi_deg = 0, 0, 0
range_m = 10, 10, 10

[ris]
theta_deg = 10, 170
phi_deg = 0, 0
range_m = 5, 5

# [ris_users] may give theta_deg / phi_deg / range_m as one row per RIS
# (rows separated by ';'); when absent they follow from planar geometry.

[solver]
rho = 1e-4
max_bcd_iter = 20
max_mm_iter = 50
max_fp_iter = 30
# 'auto' starts unpenalized and switches the rank-1 penalty on after a loose relaxation
penalty = auto
seed = 1
"""


class ScenarioError(ValueError):
    """Invalid or unparseable scenario description."""


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def pathloss_db(beta0_db: float, exponent: float, distance_m):
    """beta = -beta0 - 10 * exponent * log10(r) in dB."""
    return -beta0_db - 10.0 * exponent * np.log10(distance_m)


def _ro(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Scenario:
    wavelength: float
    n_tx: int
    n_users: int
    ris_rows: int
    ris_cols: int
    aperture: float
    min_spacing: float
    power_dbm: float
    noise_dbm: float
    kappa_bu: np.ndarray  # (K,)
    kappa_br: np.ndarray  # (L,)
    kappa_ru: np.ndarray  # (L, K)
    theta_bu: np.ndarray
    phi_bu: np.ndarray
    r_bu: np.ndarray
    theta_br: np.ndarray
    phi_br: np.ndarray
    r_br: np.ndarray
    theta_ru: np.ndarray  # (L, K)
    phi_ru: np.ndarray
    r_ru: np.ndarray
    beta0_db: float = 40.0
    exp_bu: float = 2.5
    exp_br: float = 1.7
    exp_ru: float = 2.5
    rho: float = 1e-4
    max_bcd_iter: int = 20
    max_mm_iter: int = 50
    max_fp_iter: int = 30
    penalty: float | None = None
    seed: int = 1
    notes: tuple = field(default=(), compare=False)

    # sizes ------------------------------------------------------------------
    @property
    def n_ris(self) -> int:
        return len(self.theta_br)

    @property
    def n_ris_elements(self) -> int:
        return self.ris_rows * self.ris_cols

    @property
    def sub_size(self) -> int:
        return self.n_tx // self.n_users

    # powers -----------------------------------------------------------------
    @property
    def power(self) -> float:
        return dbm_to_watt(self.power_dbm)

    @property
    def noise(self) -> float:
        return dbm_to_watt(self.noise_dbm)

    # path losses (linear amplitude) -------------------------------------------
    @property
    def beta_bu(self) -> np.ndarray:
        return 10.0 ** (pathloss_db(self.beta0_db, self.exp_bu, self.r_bu) / 20.0)

    @property
    def beta_br(self) -> np.ndarray:
        return 10.0 ** (pathloss_db(self.beta0_db, self.exp_br, self.r_br) / 20.0)

    @property
    def beta_ru(self) -> np.ndarray:
        return 10.0 ** (pathloss_db(self.beta0_db, self.exp_ru, self.r_ru) / 20.0)

    def validate(self) -> "Scenario":
        N, K, L = self.n_tx, self.n_users, self.n_ris
        if N < 1 or K < 1:
            raise ScenarioError("system.n_tx / system.n_users: must be positive")
        if N % K != 0:
            raise ScenarioError(f"system.n_tx: N mod K ≠ 0 (N={N}, K={K})")
        if self.ris_rows < 1 or self.ris_cols < 1:
            raise ScenarioError("system.ris_rows / ris_cols: must be positive")
        if self.wavelength <= 0:
            raise ScenarioError("system.carrier_frequency_hz: wavelength must be positive")
        if self.min_spacing <= 0:
            raise ScenarioError("system.min_spacing_wavelengths: must be positive")
        if self.aperture < (N - 1) * self.min_spacing - 1e-12:
            raise ScenarioError("system.aperture_wavelengths: D < (N-1)*delta, no feasible placement")
        for name, arr, shape in (
            ("users", self.theta_bu, (K,)),
            ("users", self.phi_bu, (K,)),
            ("users", self.r_bu, (K,)),
            ("ris", self.theta_br, (L,)),
            ("ris", self.phi_br, (L,)),
            ("ris", self.r_br, (L,)),
            ("ris_users", self.theta_ru, (L, K)),
            ("ris_users", self.phi_ru, (L, K)),
            ("ris_users", self.r_ru, (L, K)),
            ("rician", self.kappa_bu, (K,)),
            ("rician", self.kappa_br, (L,)),
            ("rician", self.kappa_ru, (L, K)),
        ):
            if np.shape(arr) != shape:
                raise ScenarioError(f"{name}: expected shape {shape}, got {np.shape(arr)}")
        for name, arr in (("users.theta_deg", self.theta_bu), ("ris.theta_deg", self.theta_br),
                          ("ris_users.theta_deg", self.theta_ru)):
            if np.any((arr < 0) | (arr > math.pi)):
                raise ScenarioError(f"{name}: elevation must lie in [0, 180] degrees")
        for name, arr in (("users.phi_deg", self.phi_bu), ("ris.phi_deg", self.phi_br),
                          ("ris_users.phi_deg", self.phi_ru)):
            if np.any((arr < 0) | (arr >= 2 * math.pi)):
                raise ScenarioError(f"{name}: azimuth must lie in [0, 360) degrees")
        for name, arr in (("users.range_m", self.r_bu), ("ris.range_m", self.r_br),
                          ("ris_users.range_m", self.r_ru)):
            if np.any(arr <= 0):
                raise ScenarioError(f"{name}: distances must be positive")
        for name, arr in (("rician.kappa", self.kappa_bu), ("rician.kappa", self.kappa_br),
                          ("rician.kappa", self.kappa_ru)):
            if np.any(arr <= 0):
                raise ScenarioError(f"{name}: Rician factors must be positive")
        if not math.isfinite(self.power_dbm):
            raise ScenarioError("power.transmit_power_dbm: must be finite")
        if not math.isfinite(self.noise_dbm):
            raise ScenarioError("power.noise_density_dbm_hz: must be finite")
        if self.rho <= 0:
            raise ScenarioError("solver.rho: must be positive")
        for name in ("max_bcd_iter", "max_mm_iter", "max_fp_iter"):
            if getattr(self, name) < 1:
                raise ScenarioError(f"solver.{name}: must be at least 1")
        return self

    # derived variants --------------------------------------------------------
    def with_ris(self, count: int) -> "Scenario":
        """Keep only the first ``count`` RISs."""
        if not 0 <= count <= self.n_ris:
            raise ScenarioError(f"RIS count {count} outside 0..{self.n_ris}")
        sl = slice(0, count)
        return replace(
            self,
            theta_br=_ro(self.theta_br[sl]), phi_br=_ro(self.phi_br[sl]), r_br=_ro(self.r_br[sl]),
            theta_ru=_ro(self.theta_ru[sl]).reshape(count, self.n_users),
            phi_ru=_ro(self.phi_ru[sl]).reshape(count, self.n_users),
            r_ru=_ro(self.r_ru[sl]).reshape(count, self.n_users),
            kappa_br=_ro(self.kappa_br[sl]),
            kappa_ru=_ro(self.kappa_ru[sl]).reshape(count, self.n_users),
        )

    def with_kappa_db(self, kappa_db: float) -> "Scenario":
        k = db_to_linear(kappa_db)
        L, K = self.n_ris, self.n_users
        return replace(self, kappa_bu=_ro(np.full(K, k)), kappa_br=_ro(np.full(L, k)),
                       kappa_ru=_ro(np.full((L, K), k)))

    def with_kappa_linear(self, k: float) -> "Scenario":
        """Unvalidated variant (allows the limiting values 0 and huge)."""
        L, K = self.n_ris, self.n_users
        return replace(self, kappa_bu=_ro(np.full(K, k)), kappa_br=_ro(np.full(L, k)),
                       kappa_ru=_ro(np.full((L, K), k)))

    def with_power_dbm(self, p_dbm: float) -> "Scenario":
        return replace(self, power_dbm=float(p_dbm))


@dataclass(frozen=True)
class Apv:
    positions_m: np.ndarray

    def __post_init__(self):
        arr = np.array(self.positions_m, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "positions_m", arr)

    @property
    def z(self) -> np.ndarray:
        return self.positions_m

    def check(self, scn: Scenario, tol: float = 1e-12) -> None:
        z = self.positions_m
        if z.shape != (scn.n_tx,):
            raise ValueError(f"APV has {z.size} entries, expected {scn.n_tx}")
        if z[0] < -tol:
            raise ValueError(f"APV z_1 = {z[0]:.3e} < 0")
        if z[-1] > scn.aperture + tol:
            raise ValueError(f"APV z_N = {z[-1]:.6g} exceeds aperture {scn.aperture:.6g}")
        gaps = np.diff(z)
        if gaps.size and gaps.min() < scn.min_spacing - tol:
            raise ValueError(f"APV spacing {gaps.min():.6g} below minimum {scn.min_spacing:.6g}")

    def is_feasible(self, scn: Scenario, tol: float = 1e-12) -> bool:
        try:
            self.check(scn, tol)
        except ValueError:
            return False
        return True


def uniform_apv(scn: Scenario, spacing_m: float) -> Apv:
    """Positions 0, d, 2d, ... (the fixed-position array when d = lambda/2)."""
    if spacing_m < scn.min_spacing * (1 - 1e-12):
        raise ValueError(f"spacing {spacing_m:.6g} m below the minimum {scn.min_spacing:.6g} m")
    if (scn.n_tx - 1) * spacing_m > scn.aperture * (1 + 1e-12):
        raise ValueError("uniform array does not fit in the aperture")
    return Apv(np.arange(scn.n_tx) * spacing_m)


def rng_for_trial(scn: Scenario, trial_index: int, stream: int = 0) -> np.random.Generator:
    """Independent deterministic stream for (base seed, trial[, sub-stream])."""
    if trial_index < 0:
        raise ValueError("trial index must be nonnegative")
    return np.random.default_rng(np.random.SeedSequence([int(scn.seed), int(trial_index), int(stream)]))


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------


def _floats(text: str, key: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise ScenarioError(f"{key}: cannot parse number list {text!r}") from exc


def _matrix(text: str, key: str, rows: int, cols: int) -> np.ndarray:
    parts = [r for r in text.split(";") if r.strip()]
    try:
        mat = np.array([[float(v) for v in r.split(",") if v.strip()] for r in parts])
    except ValueError as exc:
        raise ScenarioError(f"{key}: cannot parse matrix {text!r}") from exc
    if mat.shape != (rows, cols):
        raise ScenarioError(f"{key}: expected {rows} rows of {cols} values")
    return mat


def planar_ris_user_geometry(theta_bu, r_bu, theta_br, r_br):
    """Angle (from the array axis) and distance of each RIS->UE vector in the plane."""
    ue = np.stack([r_bu * np.cos(theta_bu), r_bu * np.sin(theta_bu)], axis=-1)  # (K, 2)
    ris = np.stack([r_br * np.cos(theta_br), r_br * np.sin(theta_br)], axis=-1)  # (L, 2)
    d = ue[None, :, :] - ris[:, None, :]
    dist = np.linalg.norm(d, axis=-1)
    theta = np.arccos(np.clip(d[..., 0] / dist, -1.0, 1.0))
    return theta, dist


def apply_overrides(text: str, overrides) -> str:
    """Return config text with ``section.key=value`` overrides applied."""
    cp = _parser(text)
    for item in overrides or ():
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ScenarioError(f"override {item!r} must look like section.key=value")
        lhs, value = item.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, key.strip(), value.strip())
    out = []
    for section in cp.sections():
        out.append(f"[{section}]")
        for k, v in cp.items(section):
            out.append(f"{k} = {v}")
        out.append("")
    return "\n".join(out)


def _parser(text: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError(f"config parse failure: {exc}") from exc
    return cp


def load_scenario(config_text: str | None = None, overrides=None) -> Scenario:
    """Parse and validate a scenario; missing keys fall back to the defaults."""
    base = _parser(DEFAULT_CONFIG)
    if config_text:
        user = _parser(config_text)
        for section in user.sections():
            if not base.has_section(section):
                base.add_section(section)
            for k, v in user.items(section):
                base.set(section, k, v)
    text = apply_overrides("\n".join(_dump(base)), overrides) if overrides else None
    cp = _parser(text) if text else base

    def get(section, key):
        try:
            return cp.get(section, key)
        except (configparser.NoSectionError, configparser.NoOptionError) as exc:
            raise ScenarioError(f"{section}.{key}: missing") from exc

    def num(section, key, kind=float):
        raw = get(section, key)
        try:
            return kind(float(raw)) if kind is int else kind(raw)
        except ValueError as exc:
            raise ScenarioError(f"{section}.{key}: cannot parse {raw!r}") from exc

    if cp.has_option("system", "wavelength_m"):
        lam = num("system", "wavelength_m")
    else:
        fc = num("system", "carrier_frequency_hz")
        if fc <= 0:
            raise ScenarioError("system.carrier_frequency_hz: must be positive")
        lam = SPEED_OF_LIGHT / fc
    N = num("system", "n_tx", int)
    K = num("system", "n_users", int)
    m1 = num("system", "ris_rows", int)
    m2 = num("system", "ris_cols", int)
    ap = get("system", "aperture_wavelengths").strip().lower()
    aperture = (N - 1) * lam if ap == "auto" else float(ap) * lam
    delta = num("system", "min_spacing_wavelengths") * lam

    theta_bu = np.deg2rad(_floats(get("users", "theta_deg"), "users.theta_deg"))
    phi_bu = np.deg2rad(_floats(get("users", "phi_deg"), "users.phi_deg"))
    r_bu = np.array(_floats(get("users", "range_m"), "users.range_m"))
    theta_br = np.deg2rad(_floats(get("ris", "theta_deg"), "ris.theta_deg")) if get("ris", "theta_deg").strip() else np.zeros(0)
    phi_br = np.deg2rad(_floats(get("ris", "phi_deg"), "ris.phi_deg")) if get("ris", "phi_deg").strip() else np.zeros(0)
    r_br = np.array(_floats(get("ris", "range_m"), "ris.range_m")) if get("ris", "range_m").strip() else np.zeros(0)
    if not (len(theta_bu) == len(phi_bu) == len(r_bu) == K):
        raise ScenarioError(f"users: need {K} entries for theta_deg, phi_deg and range_m")
    L = len(theta_br)
    if not (len(phi_br) == len(r_br) == L):
        raise ScenarioError("ris: theta_deg, phi_deg and range_m lengths differ")

    notes = []
    th_ru, r_ru = planar_ris_user_geometry(theta_bu, r_bu, theta_br, r_br)
    ph_ru = np.zeros((L, K))
    if cp.has_section("ris_users"):
        if cp.has_option("ris_users", "theta_deg"):
            th_ru = np.deg2rad(_matrix(get("ris_users", "theta_deg"), "ris_users.theta_deg", L, K))
        if cp.has_option("ris_users", "phi_deg"):
            ph_ru = np.deg2rad(_matrix(get("ris_users", "phi_deg"), "ris_users.phi_deg", L, K))
        if cp.has_option("ris_users", "range_m"):
            r_ru = _matrix(get("ris_users", "range_m"), "ris_users.range_m", L, K)
    else:
        notes.append("RIS-UE angles and ranges derived from planar geometry")
    ph_ru = np.mod(ph_ru, 2 * math.pi)
    phi_bu = np.mod(phi_bu, 2 * math.pi)
    phi_br = np.mod(phi_br, 2 * math.pi)

    kappa_db = num("rician", "kappa_db")

    def kap(key, shape):
        val = num("rician", key) if cp.has_option("rician", key) else kappa_db
        return np.full(shape, db_to_linear(val))

    pen = get("solver", "penalty").strip().lower()
    try:
        penalty = None if pen == "auto" else float(pen)
    except ValueError as exc:
        raise ScenarioError(f"solver.penalty: cannot parse {pen!r}") from exc

    scn = Scenario(
        wavelength=lam, n_tx=N, n_users=K, ris_rows=m1, ris_cols=m2,
        aperture=aperture, min_spacing=delta,
        power_dbm=num("power", "transmit_power_dbm"), noise_dbm=num("power", "noise_density_dbm_hz"),
        kappa_bu=_ro(kap("kappa_bs_ue_db", K)), kappa_br=_ro(kap("kappa_bs_ris_db", L)),
        kappa_ru=_ro(kap("kappa_ris_ue_db", (L, K))),
        theta_bu=_ro(theta_bu), phi_bu=_ro(phi_bu), r_bu=_ro(r_bu),
        theta_br=_ro(theta_br), phi_br=_ro(phi_br), r_br=_ro(r_br),
        theta_ru=_ro(np.reshape(th_ru, (L, K))), phi_ru=_ro(np.reshape(ph_ru, (L, K))),
        r_ru=_ro(np.reshape(r_ru, (L, K))),
        beta0_db=num("pathloss", "beta0_db"), exp_bu=num("pathloss", "exponent_bs_ue"),
        exp_br=num("pathloss", "exponent_bs_ris"), exp_ru=num("pathloss", "exponent_ris_ue"),
        rho=num("solver", "rho"), max_bcd_iter=num("solver", "max_bcd_iter", int),
        max_mm_iter=num("solver", "max_mm_iter", int), max_fp_iter=num("solver", "max_fp_iter", int),
        penalty=penalty, seed=num("solver", "seed", int), notes=tuple(notes),
    )
    return scn.validate()


def _dump(cp: configparser.ConfigParser) -> list[str]:
    out = []
    for section in cp.sections():
        out.append(f"[{section}]")
        for k, v in cp.items(section):
            out.append(f"{k} = {v}")
    return out


def default_scenario(**overrides) -> Scenario:
    """Default scenario, optionally with dataclass field replacements."""
    scn = load_scenario(DEFAULT_CONFIG)
    return replace(scn, **overrides) if overrides else scn
