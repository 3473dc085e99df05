"""Antenna-position optimization by minorization-maximization.

For a fixed precoder and fixed RIS phases, |g_k(z)^H f|^2 is a constant plus
a sum of cosines whose arguments are linear in one or two positions.  Each
cosine is bounded below by its second-order expansion (curvature -1), which
gives a concave quadratic minorant in z.  Terms with a negative weight are
handled through cos(x + pi) = -cos(x).

Two ways of splitting the expansion into cosines are supported:

* ``"phase"`` folds every complex coefficient into the cosine phase, so each
  term carries weight |C| (tightest curvature).
* ``"split"`` keeps the real/imaginary split of the coefficients and uses the
  cos/sin surrogate pair on each part, giving weight |Re C| + |Im C|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet, cascade
from .convex_kernel import QpProblem, QuadForm, SolverError, solve_qp
from .metrics import rate_of
from .scenario import Apv
from .tracing import SolutionTrace

HALF_PI = 0.5 * math.pi


def surrogate_cos(x, x0):
    """q(x|x0) = cos x0 - sin x0 (x - x0) - (x - x0)^2 / 2, a global minorant of cos."""
    d = np.subtract(x, x0)
    return np.cos(x0) - np.sin(x0) * d - 0.5 * d * d


def surrogate_sin(x, x0):
    """p(x|x0) = sin x0 + cos x0 (x - x0) - (x - x0)^2 / 2, a global minorant of sin."""
    d = np.subtract(x, x0)
    return np.sin(x0) + np.cos(x0) * d - 0.5 * d * d


def theta_hat(theta, wavelength: float):
    return -2.0 * math.pi * np.cos(theta) / wavelength


# ---------------------------------------------------------------------------
# cosine families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CosFamily:
    """const + sum_t w_t cos(off_t + c1_t z[i1_t] + c2_t z[i2_t]) with w_t >= 0."""

    n: int
    const: float
    w: np.ndarray
    off: np.ndarray
    i1: np.ndarray
    c1: np.ndarray
    i2: np.ndarray
    c2: np.ndarray

    def phase(self, z) -> np.ndarray:
        z = np.asarray(z, float)
        return self.off + self.c1 * z[self.i1] + self.c2 * z[self.i2]

    def value(self, z) -> float:
        return float(self.const + self.w @ np.cos(self.phase(z)))

    def grad(self, z) -> np.ndarray:
        s = -self.w * np.sin(self.phase(z))
        g = np.zeros(self.n)
        np.add.at(g, self.i1, s * self.c1)
        np.add.at(g, self.i2, s * self.c2)
        return g

    def negated(self) -> "CosFamily":
        return CosFamily(self.n, -self.const, self.w, self.off + math.pi,
                         self.i1, self.c1, self.i2, self.c2)

    def scaled(self, s: float) -> "CosFamily":
        if s < 0:
            raise ValueError("scale must be nonnegative")
        return CosFamily(self.n, self.const * s, self.w * s, self.off,
                         self.i1, self.c1, self.i2, self.c2)

    @staticmethod
    def concat(fams, extra_const: float = 0.0) -> "CosFamily":
        fams = list(fams)
        n = fams[0].n
        cat = lambda name: np.concatenate([getattr(f, name) for f in fams])  # noqa: E731
        return CosFamily(n, sum(f.const for f in fams) + extra_const, cat("w"), cat("off"),
                         cat("i1"), cat("c1"), cat("i2"), cat("c2"))


class _Builder:
    def __init__(self, n: int, mode: str):
        if mode not in ("phase", "split"):
            raise ValueError(f"unknown expansion mode {mode!r}")
        self.n = n
        self.mode = mode
        self.const = 0.0
        self.parts: list[tuple] = []

    def add(self, C, i1, c1, i2, c2):
        """Add Re{C exp(j(c1 z[i1] + c2 z[i2]))} elementwise over broadcast arrays."""
        C, i1, c1, i2, c2 = np.broadcast_arrays(np.asarray(C, complex), i1, c1, i2, c2)
        C, i1, c1, i2, c2 = (a.ravel() for a in (C, i1, c1, i2, c2))
        if self.mode == "phase":
            self._push(np.abs(C), np.angle(C), i1, c1, i2, c2)
        else:
            # Re{C e^{jx}} = Re C cos x - Im C sin x, and sin x = cos(x - pi/2)
            self._signed(C.real, np.zeros(C.size), i1, c1, i2, c2)
            self._signed(-C.imag, np.full(C.size, -HALF_PI), i1, c1, i2, c2)

    def _signed(self, w, off, i1, c1, i2, c2):
        neg = w < 0
        self._push(np.abs(w), off + np.where(neg, math.pi, 0.0), i1, c1, i2, c2)

    def _push(self, w, off, i1, c1, i2, c2):
        keep = w > 0
        if np.any(keep):
            self.parts.append((w[keep], off[keep], i1[keep].astype(int), c1[keep].astype(float),
                               i2[keep].astype(int), c2[keep].astype(float)))

    def family(self) -> CosFamily:
        if not self.parts:
            e = np.zeros(0)
            return CosFamily(self.n, self.const, e, e, e.astype(int), e, e.astype(int), e)
        cols = list(zip(*self.parts))
        return CosFamily(self.n, self.const, *(np.concatenate(c) for c in cols))


# ---------------------------------------------------------------------------
# trigonometric objective
# ---------------------------------------------------------------------------


@dataclass
class TrigObjective:
    """|g_k(z)^H f|^2 (summed over the listed f, plus a constant) as cosines in z.

    The per-user coefficients are stored alongside the compiled family so the
    expansion can also be evaluated in its structured g1/g2 form.
    """

    k: int
    wavelength: float
    theta: np.ndarray  # LoS angles [theta_bu_k, theta_br_1, ..., theta_br_L]
    that: np.ndarray  # theta_hat for the same angles (rad/m)
    chi_bu: complex
    chi_br: np.ndarray
    a_ris: np.ndarray  # a_l = h_lk^H E_l^H a_M(theta_br_l)
    fs: list[np.ndarray]
    a0: list[float]  # |nu|^2 per f, z-independent
    nu: list[complex]  # n_k^H f, the z-independent part of g_k^H f
    extra: float
    family: CosFamily
    mode: str = "phase"

    @property
    def d(self) -> np.ndarray:
        """LoS coefficients: g_k = sum_i d_i a(theta_i, z) + z-independent part."""
        return np.concatenate([[self.chi_bu], self.chi_br * np.conj(self.a_ris)])

    def value(self, z) -> float:
        return self.family.value(np.asarray(getattr(z, "positions_m", z), float))

    def grad(self, z) -> np.ndarray:
        return self.family.grad(np.asarray(getattr(z, "positions_m", z), float))

    def A_coef(self) -> np.ndarray:
        return self.chi_bu * np.conj(self.chi_br) * self.a_ris

    def B_coef(self) -> np.ndarray:
        d = self.chi_br * np.conj(self.a_ris)
        return np.outer(d, np.conj(d))

    def b_vec(self, j: int = 0) -> np.ndarray:
        return np.conj(self.chi_bu) * np.conj(self.nu[j]) * self.fs[j]

    def c_vec(self, l: int, j: int = 0) -> np.ndarray:
        return np.conj(self.chi_br[l]) * self.a_ris[l] * np.conj(self.nu[j]) * self.fs[j]

    def structured_value(self, z) -> float:
        """Evaluate through g1/g2 with the A_l, B_{l1,l2}, b, c_l coefficients."""
        z = np.asarray(getattr(z, "positions_m", z), float)
        th, lam = self.theta, self.wavelength
        L = self.chi_br.size
        A, B = self.A_coef(), self.B_coef()
        tot = self.extra
        for j, f in enumerate(self.fs):
            v = self.a0[j] + abs(self.chi_bu) ** 2 * g1(th[0], th[0], z, f, lam).real
            for l in range(L):
                v += 2.0 * (A[l] * g1(th[l + 1], th[0], z, f, lam)).real
            for l1 in range(L):
                for l2 in range(L):
                    v += (B[l1, l2] * g1(th[l2 + 1], th[l1 + 1], z, f, lam)).real
            v += g2(th[0], z, self.b_vec(j), lam)
            for l in range(L):
                v += g2(th[l + 1], z, self.c_vec(l, j), lam)
            tot += v
        return float(tot)


def g1(theta1, theta2, z, f, wavelength) -> complex:
    """sum_{n,m} |f_n f_m| exp(j u(z_n, z_m)),
    u = th2 z_n - th1 z_m - (angle f_n - angle f_m)."""
    t1, t2 = theta_hat(theta1, wavelength), theta_hat(theta2, wavelength)
    z = np.asarray(z, float)
    f = np.asarray(f, complex)
    u = t2 * z[:, None] - t1 * z[None, :] - (np.angle(f)[:, None] - np.angle(f)[None, :])
    return complex((np.abs(f)[:, None] * np.abs(f)[None, :] * np.exp(1j * u)).sum())


def g2(theta, z, b, wavelength) -> float:
    """2 sum_n [Re b_n cos(th z_n) + Im b_n sin(th z_n)]."""
    t = theta_hat(theta, wavelength)
    x = t * np.asarray(z, float)
    b = np.asarray(b, complex)
    return float(2.0 * (b.real @ np.cos(x) + b.imag @ np.sin(x)))


def _los_parts(ch: ChannelSet, ris, k: int):
    """(theta, chi_bu, chi_br, a_l, n_k) for user k."""
    scn = ch.scn
    L = scn.n_ris
    e = np.ones((L, scn.n_ris_elements), complex) if ris is None else \
        np.asarray(getattr(ris, "e", ris), complex).reshape(L, scn.n_ris_elements)
    chi_bu = complex(ch.chi_bu[0][k])
    chi_br = np.asarray(ch.chi_br[0], float).astype(complex).reshape(L)
    a_l = np.array([np.vdot(ch.h_ru[l, k], np.conj(e[l]) * ch.a_ris_br[l]) for l in range(L)])
    n_vec = ch.chi_bu[1][k] * ch.draws.h_bu[k]
    for l in range(L):
        n_vec = n_vec + ch.chi_br[1][l] * (ch.draws.H_br[l] @ (e[l] * ch.h_ru[l, k]))
    theta = np.concatenate([[scn.theta_bu[k]], np.asarray(scn.theta_br, float).reshape(L)])
    return theta, chi_bu, chi_br, a_l, n_vec


def build_trig_objective(ch: ChannelSet, ris, f, k: int, extra: float = 0.0,
                         mode: str = "phase") -> TrigObjective:
    """Cosine expansion of sum_f |g_k(z)^H f|^2 + extra.

    ``f`` is one precoding vector or a list of them (the interference term
    uses the columns j != k).
    """
    fs = [np.asarray(x, complex) for x in (f if isinstance(f, (list, tuple)) else [f])]
    scn = ch.scn
    N = scn.n_tx
    lam = scn.wavelength
    theta, chi_bu, chi_br, a_l, n_vec = _los_parts(ch, ris, k)
    th = theta_hat(theta, lam)
    d = np.concatenate([[chi_bu], chi_br * np.conj(a_l)])
    I = d.size
    bld = _Builder(N, mode)
    bld.const = float(extra)
    idx = np.arange(N)
    # flattened (angle, element) pairs; s_a = sum_n f_n exp(-j th_a z_n)
    ia = np.repeat(np.arange(I), N)
    ie = np.tile(idx, I)
    nus, a0s = [], []
    for fv in fs:
        if fv.shape != (N,):
            raise ValueError("precoding vector length does not match N")
        nu = complex(np.vdot(n_vec, fv))
        nus.append(nu)
        a0s.append(abs(nu) ** 2)
        bld.const += abs(nu) ** 2
        # quadratic part: sum_{p,q} conj(d_a) d_b f_n conj(f_m) exp(j(-th_a z_n + th_b z_m))
        coef = np.conj(d[ia]) * fv[ie]  # p = (a, n)
        bld.const += float(np.sum(np.abs(coef) ** 2))
        P, Q = np.triu_indices(I * N, k=1)
        C = 2.0 * coef[P] * np.conj(coef[Q])
        bld.add(C, ie[P], -th[ia[P]], ie[Q], th[ia[Q]])
        # cross with the z-independent part: 2 Re{conj(nu) conj(d_a) f_n exp(-j th_a z_n)}
        beta = 2.0 * np.conj(nu) * coef
        bld.add(beta, ie, -th[ia], ie, 0.0)
    return TrigObjective(k, lam, theta, th, chi_bu, chi_br, a_l, fs, a0s, nus,
                         float(extra), bld.family(), mode)


def interference_objective(ch, ris, F, k: int, noise: float, mode: str = "phase") -> TrigObjective:
    """sum_{j != k} |g_k^H f_j|^2 + noise."""
    K = F.shape[1]
    cols = [F[:, j] for j in range(K) if j != k]
    if not cols:
        cols = [np.zeros(F.shape[0], complex)]
    return build_trig_objective(ch, ris, cols, k, extra=noise, mode=mode)


# ---------------------------------------------------------------------------
# quadratic minorant
# ---------------------------------------------------------------------------


@dataclass
class QuadraticBound:
    """0.5 z^T R z + r^T z + c minorizing a cosine family, touching at z_i."""

    R: np.ndarray
    r: np.ndarray
    c: float
    z_i: np.ndarray
    sign: str

    def value(self, z) -> float:
        z = np.asarray(getattr(z, "positions_m", z), float)
        return float(0.5 * z @ self.R @ z + self.r @ z + self.c)

    def grad(self, z) -> np.ndarray:
        return self.R @ np.asarray(getattr(z, "positions_m", z), float) + self.r

    def form(self, scale: float = 1.0) -> QuadForm:
        return QuadForm(self.R * scale, self.r * scale, self.c * scale)


def family_bound(fam: CosFamily, z_i) -> tuple[np.ndarray, np.ndarray, float]:
    z0 = np.asarray(z_i, float)
    n = fam.n
    u0 = fam.phase(z0)
    az0 = fam.c1 * z0[fam.i1] + fam.c2 * z0[fam.i2]
    s0, c0 = np.sin(u0), np.cos(u0)
    R = np.zeros((n, n))
    # -sum w a a^T with a = c1 e_i1 + c2 e_i2
    np.add.at(R, (fam.i1, fam.i1), -fam.w * fam.c1 * fam.c1)
    np.add.at(R, (fam.i2, fam.i2), -fam.w * fam.c2 * fam.c2)
    np.add.at(R, (fam.i1, fam.i2), -fam.w * fam.c1 * fam.c2)
    np.add.at(R, (fam.i2, fam.i1), -fam.w * fam.c1 * fam.c2)
    rw = fam.w * (-s0 + az0)
    r = np.zeros(n)
    np.add.at(r, fam.i1, rw * fam.c1)
    np.add.at(r, fam.i2, rw * fam.c2)
    c = fam.const + float(fam.w @ (c0 + s0 * az0 - 0.5 * az0 * az0))
    return R, r, c


def build_quadratic_bound(t: TrigObjective, z_i, sign: str = "for-A") -> QuadraticBound:
    """Concave quadratic touching ``t`` (sign="for-A") or ``-t`` (sign="for-negB") at z_i."""
    z0 = np.asarray(getattr(z_i, "positions_m", z_i), float)
    if sign == "for-A":
        fam = t.family
    elif sign == "for-negB":
        fam = t.family.negated()
    else:
        raise ValueError(f"unknown bound sign {sign!r}")
    R, r, c = family_bound(fam, z0)
    return QuadraticBound(R, r, c, z0.copy(), sign)


def r_g1(theta1, theta2, f, wavelength) -> np.ndarray:
    """Curvature of the g1 surrogate sum for positive pair weights |f_n f_m|.

    With the 0.5 z^T R z convention this is
    2 th1 th2 |f||f|^T - (th1^2 + th2^2) sum|f| diag(|f|).
    """
    t1, t2 = theta_hat(theta1, wavelength), theta_hat(theta2, wavelength)
    af = np.abs(np.asarray(f, complex))
    return 2 * t1 * t2 * np.outer(af, af) - (t1 * t1 + t2 * t2) * af.sum() * np.diag(af)


def r_g2(theta, b, wavelength) -> np.ndarray:
    """Curvature of the g2 surrogate: each Re/Im part costs its absolute value."""
    t = theta_hat(theta, wavelength)
    b = np.asarray(b, complex)
    return -2.0 * np.diag((np.abs(b.real) + np.abs(b.imag)) * t * t)


# ---------------------------------------------------------------------------
# MM loop
# ---------------------------------------------------------------------------


@dataclass
class MmInfo:
    iterations: int = 0
    surrogate: list[float] = field(default_factory=list)
    inner_steps: list[int] = field(default_factory=list)


def _qp_problem(scn, fp_terms, start) -> QpProblem:
    return QpProblem(n=scn.n_tx, lower=0.0, upper=scn.aperture, gap=scn.min_spacing,
                     fp=fp_terms, start=start)


def _surrogate_rate(QA, QB, z) -> float:
    tot = 0.0
    for qa, qb in zip(QA, QB):
        a, b = qa.value(z), -qb.value(z)
        tot += math.log2(1.0 + max(a, 0.0) / b)
    return tot


def _extrapolate(ch, ris, F, noise, z, z_old, rate, beta):
    scn = ch.scn
    step = z - z_old
    for b in (4.0 * beta, 2.0 * beta, beta):
        ze = z + b * step
        if not Apv(ze).is_feasible(scn, tol=0.0):
            continue
        val = rate_of(cascade(ch.with_positions(ze), ris), F, noise)
        if val > rate:
            return ze, val, min(b, 16.0)
    return z, rate, max(0.5 * beta, 0.5)


def mm_optimize_positions(ch: ChannelSet, ris, F, noise: float, rho: float = 1e-4,
                          max_iter: int = 50, trace: SolutionTrace | None = None,
                          mode: str = "phase", max_inner: int = 20, info: MmInfo | None = None,
                          extrapolate: bool = True):
    """MM over the antenna positions for fixed precoder and RIS phases.

    Each outer iteration rebuilds the quadratic minorants at the current APV,
    then alternates the FP variables with the concave QP until the surrogate
    rate settles.  The minorant is conservative, so successive steps tend to
    point the same way; with ``extrapolate`` a longer step along the last move
    is tried and kept only if it is feasible and raises the rate.
    Returns (Apv, trace).
    """
    scn = ch.scn
    F = np.asarray(getattr(F, "F", F), complex)
    K = scn.n_users
    trace = SolutionTrace() if trace is None else trace
    info = MmInfo() if info is None else info
    z = np.array(ch.z, float)
    rate = rate_of(cascade(ch, ris), F, noise)
    beta = 1.0
    for it in range(max_iter):
        cur = ch.with_positions(z)
        QA, QB = [], []
        for k in range(K):
            ta = build_trig_objective(cur, ris, F[:, k], k, mode=mode)
            tb = interference_objective(cur, ris, F, k, noise, mode=mode)
            QA.append(build_quadratic_bound(ta, z, "for-A").form(1.0 / noise))
            QB.append(build_quadratic_bound(tb, z, "for-negB").form(1.0 / noise))
        if all(not np.any(q.R) and not np.any(q.r) for q in QA + QB):
            trace.add("MM", it, rate)
            info.iterations = it + 1
            break  # objective independent of z
        zt = z.copy()
        srate = _surrogate_rate(QA, QB, zt)
        steps = 0
        for _ in range(max_inner):
            steps += 1
            alphas = [math.sqrt(max(qa.value(zt), 0.0)) / (-qb.value(zt)) for qa, qb in zip(QA, QB)]
            try:
                zn = solve_qp(_qp_problem(scn, list(zip(alphas, QA, QB)), zt))
            except SolverError as exc:
                raise SolverError(f"position QP failed at MM iteration {it}: {exc}") from exc
            snew = _surrogate_rate(QA, QB, zn)
            if snew < srate:
                break
            zt, sprev, srate = zn, srate, snew
            if sprev > 0 and abs(srate / sprev - 1.0) <= rho:
                break
        info.inner_steps.append(steps)
        info.surrogate.append(srate)
        prev = rate
        new = rate_of(cascade(ch.with_positions(zt), ris), F, noise)
        if new >= rate:
            z_old, z, rate = z, zt, new
            if extrapolate:
                z, rate, beta = _extrapolate(ch, ris, F, noise, z, z_old, rate, beta)
        trace.add("MM", it, rate)
        info.iterations = it + 1
        if prev > 0 and abs(rate / prev - 1.0) <= rho:
            break
    return Apv(z), trace
