"""Telescopic fluid antenna: grating-lobe spacing, grouping and the closed-form chain.

Each of the K subarrays keeps a common element spacing.  Its main lobe points
at its user and a grating lobe at the RIS on the opposite side of broadside,
so one analog vector serves both the direct and the reflected path.
Spacings here are in wavelengths unless a name ends in ``_m``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .channel import assemble_channels, cascade
from .convex_kernel import lowrank_rayleigh_max
from .hbf import fp_alphas, mmse_precoder, subcon_dbf_step, subcon_matrix
from .metrics import BeamformerState, RisState, cascaded_ris_vectors, rate_of
from .ris_opt import ris_optimize
from .scenario import Apv, Scenario
from .tracing import SolutionTrace

COS_ZERO = 1e-12


class TfaWarning(UserWarning):
    pass


def tfa_steering(theta, d: float, n: int) -> np.ndarray:
    """exp(-j 2 pi i d cos(theta)) for i = 0..n-1, d in wavelengths."""
    if d <= 0:
        raise ValueError("spacing must be positive")
    return np.exp(-2j * math.pi * np.arange(n) * d * math.cos(theta))


def gl_spacing(theta_g, theta_m, k: int) -> float:
    """Spacing (wavelengths) that puts the k-th grating lobe of a beam steered to
    theta_m at theta_g."""
    if k == 0 or int(k) != k:
        raise ValueError("grating-lobe order must be a nonzero integer")
    den = math.cos(theta_g) - math.cos(theta_m)
    if abs(den) < COS_ZERO:
        raise ValueError("main-lobe and grating-lobe directions have the same cosine")
    d = k / den
    if d <= 0:
        raise ValueError(f"order k={k} gives a nonpositive spacing; use k with the sign of cos(theta_g) - cos(theta_m)")
    return d


def lobe_directions(theta_m, d: float) -> np.ndarray:
    """Angles (rad, ascending) of all full-gain lobes of a d-spaced ULA steered to theta_m."""
    c0 = math.cos(theta_m)
    kmin = math.ceil((-1.0 - c0) * d - 1e-12)
    kmax = math.floor((1.0 - c0) * d + 1e-12)
    cs = c0 + np.arange(kmin, kmax + 1) / d
    return np.sort(np.arccos(np.clip(cs, -1.0, 1.0)))


@dataclass(frozen=True)
class DualGl:
    spacing: float
    k1: int
    k2: int
    ratio: float
    approx: float
    lobe_count: int
    pointing_error_deg: float


def _smallest_fraction(x: float, tol: float) -> tuple[int, int]:
    """(p, q), q >= 1 smallest with |x - p/q| <= tol."""
    q = 1
    while True:
        p = round(x * q)
        if abs(x - p / q) <= tol:
            return int(p), q
        q += 1


def dual_gl_spacing(theta_m, theta_g1, theta_g2, tol: float) -> DualGl:
    """Spacing steering grating lobes to both theta_g1 and theta_g2.

    Both lobes need d (cos g_i - cos m) to be integers k_i, so
    k2 / k1 = (cos g2 - cos m) / (cos g1 - cos m).  The ratio is replaced by the
    fraction with the smallest denominator within ``tol``; the g1 lobe is then
    exact and the g2 lobe carries the pointing error.
    """
    if tol <= 0:
        raise ValueError("approximation tolerance must be positive")
    cm, c1, c2 = math.cos(theta_m), math.cos(theta_g1), math.cos(theta_g2)
    if min(abs(c1 - cm), abs(c2 - cm), abs(c1 - c2)) < COS_ZERO:
        raise ValueError("the three directions need distinct cosines")
    ratio = (c2 - cm) / (c1 - cm)
    p, q = _smallest_fraction(ratio, tol)
    if p == 0:
        raise ValueError("tolerance too loose: second lobe order rounds to zero")
    s = 1 if c1 - cm > 0 else -1
    k1, k2 = s * q, s * p
    d = k1 / (c1 - cm)
    c_hit = cm + k2 / d
    err = abs(math.degrees(math.acos(max(-1.0, min(1.0, c_hit)))) - math.degrees(theta_g2))
    return DualGl(d, k1, k2, ratio, p / q, len(lobe_directions(theta_m, d)), err)


# ---------------------------------------------------------------------------
# grouping and layout
# ---------------------------------------------------------------------------


@dataclass
class TfaLayout:
    spacing: np.ndarray  # per-subarray spacing (wavelengths)
    sub_size: int
    xi: np.ndarray  # user -> RIS index
    zeta: dict  # RIS index -> sorted list of users
    positions_m: np.ndarray
    wavelength: float
    flags: list[str] = field(default_factory=list)

    @property
    def apv(self) -> Apv:
        return Apv(self.positions_m)

    def report(self) -> str:
        lines = ["[tfa_layout]", f"sub_size = {self.sub_size}"]
        for k, d in enumerate(self.spacing):
            lines.append(f"user_{k}: ris = {int(self.xi[k])}, spacing_wavelengths = {d:.6f}")
        for l in sorted(self.zeta):
            lines.append(f"ris_{l}: users = {', '.join(str(k) for k in self.zeta[l]) or '-'}")
        lines.append("placement = contiguous subarrays, left to right, min-spacing guard between them")
        lines.append("positions_wavelengths = " + ", ".join(f"{z / self.wavelength:.6f}" for z in self.positions_m))
        for f in self.flags:
            lines.append(f"flag: {f}")
        return "\n".join(lines) + "\n"


def _side(c: float) -> int:
    return 0 if abs(c) < COS_ZERO else (1 if c > 0 else -1)


def group_users_ris(scn: Scenario):
    """(xi, zeta, flags): each user is paired with a RIS on the other side of broadside.

    Users off broadside are placed first in index order.  Among admissible RISs
    the one with the fewest users so far wins, ties going to the lowest index.
    A user on broadside may use either side.
    """
    L, K = scn.n_ris, scn.n_users
    if L < 1:
        raise ValueError("grouping needs at least one RIS")
    cu = np.cos(scn.theta_bu)
    cr = np.cos(scn.theta_br)
    counts = np.zeros(L, int)
    xi = np.full(K, -1)
    flags = []
    order = [k for k in range(K) if _side(cu[k]) != 0] + [k for k in range(K) if _side(cu[k]) == 0]
    for k in order:
        sk = _side(cu[k])
        ok = [l for l in range(L) if sk == 0 or _side(cr[l]) != sk]
        if not ok:
            msg = f"user {k} has no RIS on the opposite side; assigned by group size"
            warnings.warn(msg, TfaWarning, stacklevel=2)
            flags.append(msg)
            ok = list(range(L))
        l = min(ok, key=lambda j: (counts[j], j))
        xi[k] = l
        counts[l] += 1
    zeta = {l: sorted(int(k) for k in np.flatnonzero(xi == l)) for l in range(L)}
    return xi, zeta, flags


def tfa_positions_abf(scn: Scenario):
    """(TfaLayout, V): grating-lobe spacing per subarray and its analog vectors."""
    xi, zeta, flags = group_users_ris(scn)
    K, n = scn.n_users, scn.sub_size
    lam = scn.wavelength
    dmax = 1.0
    sp = np.empty(K)
    for k in range(K):
        den = abs(math.cos(scn.theta_br[xi[k]]) - math.cos(scn.theta_bu[k]))
        if den < COS_ZERO:
            raise ValueError(f"user {k} and RIS {xi[k]} share a cosine; no grating-lobe spacing")
        sp[k] = 1.0 / den
        if sp[k] > dmax:
            msg = f"subarray {k} spacing {sp[k]:.4f} exceeds the single-lobe limit {dmax:g}"
            warnings.warn(msg, TfaWarning, stacklevel=2)
            flags.append(msg)
        if sp[k] * lam < scn.min_spacing * (1 - 1e-12):
            raise ValueError(f"subarray {k} spacing below the minimum element spacing")
    z = []
    start = 0.0
    for k in range(K):
        z.extend(start + np.arange(n) * sp[k] * lam)
        start = z[-1] + scn.min_spacing
    z = np.array(z)
    if z[-1] > scn.aperture * (1 + 1e-12):
        msg = f"layout length {z[-1] / lam:.3f} exceeds the aperture {scn.aperture / lam:.3f} (wavelengths)"
        warnings.warn(msg, TfaWarning, stacklevel=2)
        flags.append(msg)
    nu = np.concatenate([tfa_steering(scn.theta_bu[k], sp[k], n) for k in range(K)])
    V = subcon_matrix(nu, K)
    return TfaLayout(sp, n, xi, zeta, z, lam, flags), V


def ris_slnr_beamform(ch, layout: TfaLayout, l: int, noise: float, los_only: bool = True) -> np.ndarray:
    """Unit-modulus phases from the dominant generalized eigenvector of the SLNR pair."""
    served = layout.zeta.get(l, [])
    if not served:
        raise ValueError(f"RIS {l} serves no user")
    H = cascaded_ris_vectors(ch, l, los_only)
    leak = [k for k in range(H.shape[0]) if k not in served]
    u = lowrank_rayleigh_max(H[served].T, H[leak].T, noise / H.shape[1])
    return np.exp(1j * np.angle(u))


def mmse_dbf(ch, ris, V, P: float, noise: float) -> np.ndarray:
    """W = G (G^H G + sigma^2/P I)^-1 on the effective channel g_k^H V, power-scaled."""
    g = cascade(ch, ris)
    return mmse_precoder(np.conj(g) @ V, V, P, noise)


@dataclass
class TfaSolution:
    mode: str
    layout: TfaLayout
    bf: BeamformerState
    ris: RisState
    rate: float
    trace: SolutionTrace


def tfa_pipeline(scn: Scenario, draws, mode: str = "CFS", trace: SolutionTrace | None = None,
                 rng=None) -> TfaSolution:
    """Closed-form chain (CFS) or the same chain refined by RIS/DBF alternation (Opt).

    CFS decisions use the LoS part only.  The rate is always evaluated on the
    full channel at the TFA positions.
    """
    if mode not in ("CFS", "Opt"):
        raise ValueError(f"unknown TFA mode {mode!r}")
    trace = SolutionTrace() if trace is None else trace
    layout, V = tfa_positions_abf(scn)
    ch = assemble_channels(scn, draws, layout.apv)
    stat = ch.los_only()
    L, M = scn.n_ris, scn.n_ris_elements
    e = np.ones((L, M), complex)
    for l in range(L):
        if layout.zeta.get(l):
            e[l] = ris_slnr_beamform(stat, layout, l, scn.noise)
    ris = RisState(e)
    W = mmse_dbf(stat, ris, V, scn.power, scn.noise)
    bf = BeamformerState("SubCon", W, V)
    rate = rate_of(cascade(ch, ris), bf.F, scn.noise)
    if mode == "Opt":
        bf, ris, rate = _refine(ch, bf, ris, rate, scn, trace, rng)
    return TfaSolution(mode, layout, bf, ris, rate, trace)


def _refine(ch, bf, ris, rate, scn, trace, rng):
    """Alternate the digital SDR step and the RIS FP loop with monotone acceptance."""
    V, W = bf.V, bf.W
    P, noise = scn.power, scn.noise
    for it in range(scn.max_bcd_iter):
        trace.outer = it
        prev = rate
        for t in range(scn.max_fp_iter):
            g = cascade(ch, ris)
            before = rate
            _, Wn, _ = subcon_dbf_step(g, V, fp_alphas(g, V @ W, noise), P, noise, W0=W)
            val = rate_of(g, V @ Wn, noise)
            if val >= rate:
                W, rate = Wn, val
            trace.add("FP-HBF", t, rate)
            if before > 0 and abs(rate / before - 1.0) <= scn.rho:
                break
        if scn.n_ris:
            ris, trace, _ = ris_optimize(ch, V @ W, noise, scn.rho, scn.max_fp_iter, ris0=ris,
                                         trace=trace, rng=rng)
            rate = rate_of(cascade(ch, ris), V @ W, noise)
        trace.add("BCD", it, rate)
        if prev > 0 and abs(rate / prev - 1.0) <= scn.rho:
            break
    return BeamformerState("SubCon", W, V), ris, rate
