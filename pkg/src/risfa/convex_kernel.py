"""Solver-facing contracts shared by the optimization blocks.

Two small interior-point solvers live here, both specialised to the problem
shapes the beamforming loops produce:

* ``solve_sdp`` maximizes a sum of FP-transformed log terms (plus optional
  linear penalties) over one or more complex Hermitian PSD blocks with
  diagonal / affine equalities and affine inequalities.  The objective only
  touches the matrices through a handful of linear functionals Tr(C X), so a
  Newton step reduces to a small dense system (a Schur complement in the
  functional space plus one row per equality).
* ``solve_qp`` maximizes a concave FP objective of quadratic forms (or a plain
  concave quadratic) over an antenna position vector under box and ordering
  constraints.

Both are log-barrier path-following methods with damped Newton centering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

LN2 = math.log(2.0)


class SolverError(RuntimeError):
    """Raised when a convex solve cannot produce a trustworthy answer."""


# ---------------------------------------------------------------------------
# SDP
# ---------------------------------------------------------------------------


@dataclass
class FpTerm:
    """weight * log2(1 + 2 alpha sqrt(a[num]) - alpha^2 (a[den] + den_const))."""

    alpha: float
    num: int
    den: int
    den_const: float = 0.0
    weight: float = 1.0


@dataclass
class SdpProblem:
    """Concave FP objective over Hermitian PSD blocks.

    ``functionals[j]`` is a list of ``(block, C)`` pairs and evaluates to
    ``sum Re Tr(C X_block)``.  Objective terms, penalties and constraints all
    refer to functionals by index.  ``diag_equalities`` pins the diagonal of a
    whole block (the unit-modulus lifts).
    """

    dims: list[int]
    functionals: list[list[tuple[int, np.ndarray]]] = field(default_factory=list)
    fp_terms: list[FpTerm] = field(default_factory=list)
    linear: list[tuple[float, int]] = field(default_factory=list)
    constant: float = 0.0
    equalities: list[tuple[int, float]] = field(default_factory=list)
    diag_equalities: list[tuple[int, np.ndarray]] = field(default_factory=list)
    inequalities: list[tuple[int, float]] = field(default_factory=list)
    start: list[np.ndarray] | None = None

    def add_functional(self, terms) -> int:
        self.functionals.append([(int(b), np.asarray(c, dtype=complex)) for b, c in terms])
        return len(self.functionals) - 1

    def validate(self) -> None:
        nb = len(self.dims)
        for terms in self.functionals:
            for b, c in terms:
                if not 0 <= b < nb:
                    raise ValueError(f"functional refers to missing block {b}")
                n = self.dims[b]
                if c.shape != (n, n):
                    raise ValueError(f"functional matrix shape {c.shape} does not match block {b} ({n})")
                scale = max(1.0, float(np.abs(c).max(initial=0.0)))
                if np.abs(c - c.conj().T).max(initial=0.0) > 1e-9 * scale:
                    raise ValueError("functional matrices must be Hermitian")
        nf = len(self.functionals)
        for t in self.fp_terms:
            if not (0 <= t.num < nf and 0 <= t.den < nf):
                raise ValueError("FP term refers to a missing functional")
            if t.alpha < 0:
                raise ValueError("FP alpha must be nonnegative")
        for _, j in self.linear:
            if not 0 <= j < nf:
                raise ValueError("linear term refers to a missing functional")
        for j, _ in self.equalities + self.inequalities:
            if not 0 <= j < nf:
                raise ValueError("constraint refers to a missing functional")
        for b, rhs in self.diag_equalities:
            if np.shape(rhs) != (self.dims[b],):
                raise ValueError("diagonal constraint length mismatch")


@dataclass
class SdpResult:
    blocks: list[np.ndarray]
    objective: float
    status: str
    gap: float
    primal_residual: float
    newton_steps: int

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "optimal_inaccurate")


def _fp_value(terms, a):
    val = 0.0
    for t in terms:
        if t.alpha == 0.0:
            continue
        A = a[t.num]
        if A <= 0.0:
            return -math.inf
        s = 1.0 + 2.0 * t.alpha * math.sqrt(A) - t.alpha**2 * (a[t.den] + t.den_const)
        if s <= 0.0:
            return -math.inf
        val += t.weight * math.log(s) / LN2
    return val


def _fp_derivs(terms, a, m):
    g = np.zeros(m)
    H = np.zeros((m, m))
    for t in terms:
        if t.alpha == 0.0:
            continue
        A = a[t.num]
        rA = math.sqrt(A)
        s = 1.0 + 2.0 * t.alpha * rA - t.alpha**2 * (a[t.den] + t.den_const)
        c = t.weight / LN2
        h = {t.num: t.alpha / rA}
        h[t.den] = h.get(t.den, 0.0) - t.alpha**2
        for i, hi in h.items():
            g[i] += c * hi / s
            for j, hj in h.items():
                H[i, j] -= c * hi * hj / s**2
        H[t.num, t.num] += c * (-t.alpha / (2.0 * A * rA)) / s
    return g, H


class _SdpCore:
    """Dense per-block storage of the functionals and the barrier machinery."""

    def __init__(self, p: SdpProblem):
        self.p = p
        self.dims = list(p.dims)
        self.m = len(p.functionals)
        self.C = [np.zeros((self.m, n, n), dtype=complex) for n in self.dims]
        self.used = [np.zeros(self.m, dtype=bool) for _ in self.dims]
        for j, terms in enumerate(p.functionals):
            for b, c in terms:
                self.C[b][j] += 0.5 * (c + c.conj().T)
                self.used[b][j] = True
        self.lin = np.zeros(self.m)
        for coef, j in p.linear:
            self.lin[j] += coef
        self.eq_idx = np.array([j for j, _ in p.equalities], dtype=int)
        self.eq_rhs = np.array([r for _, r in p.equalities], dtype=float)
        self.ineq_idx = np.array([j for j, _ in p.inequalities], dtype=int)
        self.ineq_rhs = np.array([r for _, r in p.inequalities], dtype=float)
        self.diag = [(b, np.asarray(r, dtype=float)) for b, r in p.diag_equalities]
        self.n_eq = len(self.eq_idx) + sum(self.dims[b] for b, _ in self.diag)
        self.nu = sum(self.dims) + len(self.ineq_idx)

    # functionals -----------------------------------------------------------
    def fvals(self, X):
        a = np.zeros(self.m)
        for b, Xb in enumerate(X):
            if self.used[b].any():
                a += np.einsum("jsr,rs->j", self.C[b], Xb).real
        return a

    def objective(self, a):
        return _fp_value(self.p.fp_terms, a) + float(self.lin @ a) + self.p.constant

    def merit(self, X, mu):
        """Barrier objective, -inf outside the domain."""
        a = self.fvals(X)
        f = self.objective(a)
        if not np.isfinite(f):
            return -math.inf, a
        slack = self.ineq_rhs - a[self.ineq_idx] if len(self.ineq_idx) else np.zeros(0)
        if np.any(slack <= 0):
            return -math.inf, a
        ld = 0.0
        for Xb in X:
            try:
                L = np.linalg.cholesky(Xb)
            except np.linalg.LinAlgError:
                return -math.inf, a
            d = np.diag(L).real
            if np.any(d <= 0):
                return -math.inf, a
            ld += 2.0 * np.log(d).sum()
        return f + mu * (ld + np.log(slack).sum()), a

    def eq_values(self, X, a):
        parts = [a[self.eq_idx] - self.eq_rhs] if len(self.eq_idx) else []
        for b, rhs in self.diag:
            parts.append(np.diag(X[b]).real - rhs)
        return np.concatenate(parts) if parts else np.zeros(0)

    # Newton direction -------------------------------------------------------
    def direction(self, X, a, mu):
        m = self.m
        g, H = _fp_derivs(self.p.fp_terms, a, m)
        g += self.lin
        if len(self.ineq_idx):
            slack = self.ineq_rhs - a[self.ineq_idx]
            g[self.ineq_idx] -= mu / slack
            H[self.ineq_idx, self.ineq_idx] -= mu / slack**2

        # P_jb = X_b C_jb X_b and the Gram-type matrices of the Schur system.
        P = []
        Kcc = np.zeros((m, m))
        for b, Xb in enumerate(X):
            Pb = np.einsum("rs,jst,tu->jru", Xb, self.C[b], Xb, optimize=True)
            P.append(Pb)
            if self.used[b].any():
                Kcc += np.einsum("qsr,jrs->qj", self.C[b], Pb).real
        Kcc = 0.5 * (Kcc + Kcc.T)

        ne = self.n_eq
        Kce = np.zeros((m, ne))
        Kee = np.zeros((ne, ne))
        ne_g = len(self.eq_idx)
        if ne_g:
            Kce[:, :ne_g] = Kcc[:, self.eq_idx]
            Kee[:ne_g, :ne_g] = Kcc[np.ix_(self.eq_idx, self.eq_idx)]
        off = ne_g
        diag_slices = []
        for b, _ in self.diag:
            n = self.dims[b]
            sl = slice(off, off + n)
            diag_slices.append((b, sl))
            dP = np.einsum("jii->ji", P[b]).real  # (m, n)
            Kce[:, sl] = dP
            Kee[sl, sl] = np.abs(X[b]) ** 2
            if ne_g:
                Kee[:ne_g, sl] = dP[self.eq_idx]
                Kee[sl, :ne_g] = dP[self.eq_idx].T
            off += n
        # cross terms between diagonal blocks of different matrices vanish

        # residual of the equalities: want E(X + D) = rhs
        r_eq = -self.eq_values(X, a)
        a0 = a.copy()
        if ne:
            rhs_b = np.concatenate(
                [a[self.eq_idx]] + [np.diag(X[b]).real for b, _ in self.diag]
            ) if ne else np.zeros(0)
            # E(D) = E(X) + (Kec w - Kee y)/mu = r_eq
            # => y = Kee^{-1} (mu (E(X) - r_eq) + Kec w)
            Kee_s = 0.5 * (Kee + Kee.T)
            scale = np.sqrt(np.maximum(np.diag(Kee_s), 1e-300))
            Kn = Kee_s / np.outer(scale, scale)
            try:
                cf = sla.cho_factor(Kn + 1e-14 * np.eye(ne), lower=True)
                Kinv = lambda v: sla.cho_solve(cf, v / scale[:, None] if v.ndim == 2 else v / scale) / (
                    scale[:, None] if v.ndim == 2 else scale
                )
            except np.linalg.LinAlgError:
                pinv = np.linalg.pinv(Kn, rcond=1e-13)
                Kinv = lambda v: (pinv @ (v / scale[:, None] if v.ndim == 2 else v / scale)) / (
                    scale[:, None] if v.ndim == 2 else scale
                )
            beq = rhs_b - r_eq
            KinvKec = Kinv(Kce.T)
            S = Kcc - Kce @ KinvKec
            S = 0.5 * (S + S.T)
            a0 = a - Kce @ Kinv(beq)
        else:
            S = Kcc
            beq = np.zeros(0)
        # c = a0 + S (g + H c)/mu
        Msys = np.eye(m) - S @ H / mu
        c = np.linalg.solve(Msys, a0 + S @ g / mu)
        w = g + H @ c
        y = Kinv(mu * beq + Kce.T @ w) if ne else np.zeros(0)

        D = []
        for b, Xb in enumerate(X):
            Db = Xb + np.tensordot(w, P[b], axes=(0, 0)) / mu
            D.append(Db)
        if ne_g:
            for b in range(len(X)):
                D[b] -= np.tensordot(y[:ne_g], P[b][self.eq_idx], axes=(0, 0)) / mu
        for (b, sl) in diag_slices:
            Xb = X[b]
            D[b] -= (Xb * y[sl][None, :]) @ Xb / mu
        D = [0.5 * (Db + Db.conj().T) for Db in D]
        # directional derivative of the merit function
        dA = self.fvals(D)
        tr = 0.0
        for Xb, Db in zip(X, D):
            tr += np.trace(np.linalg.solve(Xb, Db)).real
        slope = float(g @ dA) + mu * tr
        return D, slope


def _center(p: SdpProblem) -> list[np.ndarray] | None:
    """Strictly feasible point built from the constraint structure, or None."""
    X = []
    diag_rhs = {b: np.asarray(r, float) for b, r in p.diag_equalities}
    for b, n in enumerate(p.dims):
        if b in diag_rhs:
            r = diag_rhs[b]
            if np.any(r <= 0):
                return None
            X.append(np.diag(r).astype(complex))
        else:
            X.append(np.eye(n, dtype=complex))
    core_eq = [(j, r) for j, r in p.equalities]
    for j, rhs in core_eq:
        # only trace-like equalities on free blocks are supported here: scale them
        terms = p.functionals[j]
        val = sum(np.trace(c @ X[b]).real for b, c in terms)
        if val <= 0 or rhs <= 0:
            return None
        for b, _ in terms:
            if b in diag_rhs:
                return None
            X[b] = X[b] * (rhs / val)
    if p.inequalities:
        # shrink free blocks until every inequality is strictly satisfied
        free = [b for b in range(len(p.dims)) if b not in diag_rhs]
        fixed_eq_blocks = {b for j, _ in p.equalities for b, _ in p.functionals[j]}
        scalable = [b for b in free if b not in fixed_eq_blocks]
        for j, rhs in p.inequalities:
            terms = p.functionals[j]
            val_fixed = sum(np.trace(c @ X[b]).real for b, c in terms if b not in scalable)
            val_scal = sum(np.trace(c @ X[b]).real for b, c in terms if b in scalable)
            if val_fixed + val_scal < rhs:
                continue
            budget = rhs - val_fixed
            if val_scal <= 0 or budget <= 0:
                return None
            s = 0.5 * budget / val_scal
            for b in scalable:
                X[b] = X[b] * s
        for j, rhs in p.inequalities:
            val = sum(np.trace(c @ X[b]).real for b, c in p.functionals[j])
            if val >= rhs:
                return None
    return X


def _is_psd_matrix(c, tol=1e-12):
    w = np.linalg.eigvalsh(0.5 * (c + c.conj().T))
    return w.min() >= -tol * max(1.0, abs(w).max())


def _detect_infeasible(p: SdpProblem) -> bool:
    """Cheap certificates: PSD-weighted functional bounded above by a negative value."""
    for j, rhs in p.inequalities:
        if rhs < 0 and all(_is_psd_matrix(c) for _, c in p.functionals[j]):
            return True
    for j, rhs in p.equalities:
        terms = p.functionals[j]
        if rhs < 0 and all(_is_psd_matrix(c) for _, c in terms):
            return True
        if rhs > 0 and all(_is_psd_matrix(-c) for _, c in terms):
            return True
    for _, r in p.diag_equalities:
        if np.any(np.asarray(r) < 0):
            return True
    return False


def solve_sdp(p: SdpProblem, tol: float = 1e-8, max_newton: int = 600) -> SdpResult:
    """Maximize the problem objective; status reports optimal / infeasible / failed.

    ``tol`` bounds the barrier duality gap relative to max(1, |objective|).
    Numerical failure at a gap above ``sqrt(tol)`` raises ``SolverError``.
    """
    p.validate()
    if _detect_infeasible(p):
        return SdpResult([], -math.inf, "infeasible", math.inf, math.inf, 0)
    core = _SdpCore(p)
    center = _center(p)
    if center is None:
        if p.start is None:
            return SdpResult([], -math.inf, "infeasible", math.inf, math.inf, 0)
        center = [np.asarray(s, complex) for s in p.start]

    mu = 1.0
    X = None
    if p.start is not None:
        # blend the (typically rank-1) warm start toward the center until interior
        start = [np.asarray(s, complex) for s in p.start]
        for eps in (0.3, 0.1, 0.03, 0.01, 3e-3, 1e-3):
            cand = [(1 - eps) * s + eps * c for s, c in zip(start, center)]
            val, _ = core.merit(cand, 1e-6)
            if np.isfinite(val):
                X = cand
                break
    if X is None:
        X = center
        val, _ = core.merit(X, 1.0)
        if not np.isfinite(val):
            raise SolverError("no strictly feasible starting point inside the objective domain")

    a = core.fvals(X)
    f0 = core.objective(a)
    mu = max(1e-3, 0.1 * max(1.0, abs(f0))) / max(1, core.nu) * 10
    steps = 0
    status = "optimal"
    while True:
        # centering
        for _ in range(80):
            phi, a = core.merit(X, mu)
            D, slope = core.direction(X, a, mu)
            steps += 1
            if slope <= 1e-9 * mu or not np.isfinite(slope):
                break
            t = 1.0
            accepted = False
            for _ls in range(60):
                cand = [Xb + t * Db for Xb, Db in zip(X, D)]
                val, _ = core.merit(cand, mu)
                if np.isfinite(val) and val >= phi + 0.01 * t * slope:
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                break
            X = [0.5 * (Xb + Xb.conj().T) for Xb in cand]
            if slope * t <= 1e-9 * mu:
                break
            if steps > max_newton:
                break
        a = core.fvals(X)
        fval = core.objective(a)
        gap = core.nu * mu
        scale = max(1.0, abs(fval))
        if steps > max_newton:
            status = "optimal_inaccurate" if gap <= math.sqrt(tol) * scale else "failed"
            break
        if gap <= tol * scale:
            break
        mu *= 0.15
    # remove the small drift on pinned diagonals with a congruence (keeps PSD)
    for b, rhs in core.diag:
        d = np.diag(X[b]).real
        s = np.sqrt(rhs / d)
        X[b] = X[b] * np.outer(s, s)
    # trace-type equalities on unpinned blocks: a positive rescale restores them
    pinned = {b for b, _ in core.diag}
    for j, rhs in p.equalities:
        terms = p.functionals[j]
        blocks = {b for b, _ in terms}
        val = sum(np.trace(c @ X[b]).real for b, c in terms)
        if rhs > 0 and val > 0 and not blocks & pinned and all(_is_psd_matrix(c) for _, c in terms):
            for b in blocks:
                X[b] = X[b] * (rhs / val)
    a = core.fvals(X)
    fval = core.objective(a)
    res = core.eq_values(X, a)
    pres = float(np.abs(res).max()) if res.size else 0.0
    if status == "failed":
        raise SolverError(f"SDP Newton iterations exhausted at gap {gap:.3e}")
    return SdpResult([0.5 * (Xb + Xb.conj().T) for Xb in X], float(fval), status, gap, pres, steps)


def dump_sdp(p: SdpProblem, path) -> None:
    """Write a sparse triplet text dump of ``p``.

    Format, one record per line::

        dims n_1 n_2 ...
        F j block row col re im        (nonzero of functional j; 0-based)
        FP alpha num den den_const weight
        LIN coef j
        EQ j rhs | INEQ j rhs | DIAG block v_1 v_2 ...
        CONST value
    """
    with open(path, "w") as fh:
        fh.write("dims " + " ".join(str(n) for n in p.dims) + "\n")
        for j, terms in enumerate(p.functionals):
            for b, c in terms:
                rows, cols = np.nonzero(np.abs(c) > 0)
                for r, s in zip(rows, cols):
                    fh.write(f"F {j} {b} {r} {s} {c[r, s].real:.17g} {c[r, s].imag:.17g}\n")
        for t in p.fp_terms:
            fh.write(f"FP {t.alpha:.17g} {t.num} {t.den} {t.den_const:.17g} {t.weight:.17g}\n")
        for coef, j in p.linear:
            fh.write(f"LIN {coef:.17g} {j}\n")
        for j, r in p.equalities:
            fh.write(f"EQ {j} {r:.17g}\n")
        for j, r in p.inequalities:
            fh.write(f"INEQ {j} {r:.17g}\n")
        for b, r in p.diag_equalities:
            fh.write(f"DIAG {b} " + " ".join(f"{v:.17g}" for v in r) + "\n")
        fh.write(f"CONST {p.constant:.17g}\n")


# ---------------------------------------------------------------------------
# rank-1 helpers and small closed forms
# ---------------------------------------------------------------------------


def extract_rank1(X: np.ndarray) -> tuple[np.ndarray, float]:
    """Dominant eigen-direction sqrt(lambda_1) u_1 and tightness lambda_1 / Tr X."""
    X = np.asarray(X)
    Xh = 0.5 * (X + X.conj().T)
    tr = np.trace(Xh).real
    if not np.any(Xh) or tr <= 0:
        raise ValueError("cannot extract a rank-1 factor from a zero matrix")
    w, U = np.linalg.eigh(Xh)
    lam = max(w[-1], 0.0)
    return math.sqrt(lam) * U[:, -1], float(min(lam / tr, 1.0))


def gaussian_randomization(X, score, project, n_samples: int = 100, rng=None):
    """Best of ``n_samples`` projected draws x ~ CN(0, X) under ``score``.

    ``project`` maps a raw draw to a feasible candidate; ``score`` returns a
    float (higher is better) or -inf when infeasible.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    Xh = 0.5 * (X + X.conj().T)
    w, U = np.linalg.eigh(Xh)
    root = U * np.sqrt(np.clip(w, 0.0, None))
    n = X.shape[0]
    best, best_val = None, -math.inf
    for _ in range(n_samples):
        r = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2.0)
        cand = project(root @ r)
        val = score(cand)
        if val > best_val:
            best, best_val = cand, val
    return best, best_val


def fp_alpha(A: float, B: float) -> float:
    """Quadratic-transform auxiliary variable sqrt(A) / B."""
    if B <= 0:
        raise ValueError("B must be positive")
    if A < 0:
        raise ValueError("A must be nonnegative")
    return math.sqrt(A) / B


def generalized_rayleigh_max(S: np.ndarray, T: np.ndarray) -> tuple[np.ndarray, float]:
    """Maximizer and value of x^H S x / x^H T x (T Hermitian positive definite)."""
    S = 0.5 * (S + S.conj().T)
    T = 0.5 * (T + T.conj().T)
    wt = np.linalg.eigvalsh(T)
    if wt[0] <= -1e-12 * max(abs(wt[-1]), 1e-300) or wt[-1] <= 0:
        raise ValueError("T must be positive definite")
    try:
        w, U = sla.eigh(S, T)
        u = U[:, -1]
    except np.linalg.LinAlgError:
        # T is positive definite but too ill-conditioned for Cholesky; use QZ
        w, U = sla.eig(S, T)
        ok = np.isfinite(w)
        if not np.any(ok):
            raise ValueError("generalized eigenproblem has no finite eigenvalue")
        u = U[:, np.flatnonzero(ok)[np.argmax(w[ok].real)]]
    u = u / np.linalg.norm(u)
    val = (u.conj() @ S @ u).real / (u.conj() @ T @ u).real
    return u, float(val)


def lowrank_rayleigh_max(Hs: np.ndarray, Hl: np.ndarray, c: float) -> np.ndarray:
    """Maximizer of x^H Hs Hs^H x / x^H (c I + Hl Hl^H) x for c > 0.

    Columns of Hs / Hl are the signal / leakage vectors.  The inverse of the
    denominator is applied through the Woodbury identity, which stays accurate
    when c is many orders below the leakage energy.
    """
    if c <= 0:
        raise ValueError("regularizer must be positive")
    n = Hs.shape[0]
    Hl = np.zeros((n, 0), complex) if Hl is None else Hl
    small = c * np.eye(Hl.shape[1]) + Hl.conj().T @ Hl
    X = Hs - Hl @ np.linalg.solve(small, Hl.conj().T @ Hs)  # c * T^-1 Hs
    # nonzero spectrum of T^-1 Hs Hs^H equals that of Hs^H T^-1 Hs
    w, Y = np.linalg.eigh(0.5 * ((Hs.conj().T @ X) + (Hs.conj().T @ X).conj().T))
    u = X @ Y[:, -1]
    nrm = np.linalg.norm(u)
    if nrm == 0:
        raise ValueError("signal vectors lie inside the leakage span")
    return u / nrm


# ---------------------------------------------------------------------------
# QP over antenna positions
# ---------------------------------------------------------------------------


@dataclass
class QuadForm:
    """0.5 z^T R z + r^T z + c with R symmetric negative semidefinite."""

    R: np.ndarray
    r: np.ndarray
    c: float

    def value(self, z):
        return 0.5 * z @ self.R @ z + self.r @ z + self.c

    def grad(self, z):
        return self.R @ z + self.r


@dataclass
class QpProblem:
    """Maximize either sum_k log2(1 + 2 a_k sqrt(QA_k) + a_k^2 QB_k) (FP mode)
    or sum of plain quadratics, over positions with

        z_1 >= lower,  z_N <= upper,  z_{n+1} - z_n >= gap.

    In FP mode ``QB_k`` is a concave minorant of minus the interference-plus-
    noise term, so the FP argument stays concave.
    """

    n: int
    lower: float
    upper: float
    gap: float
    quads: list[QuadForm] = field(default_factory=list)
    fp: list[tuple[float, QuadForm, QuadForm]] = field(default_factory=list)
    start: np.ndarray | None = None

    def validate(self, tol: float = 1e-9) -> None:
        for q in self.quads + [x for t in self.fp for x in t[1:]]:
            if q.R.shape != (self.n, self.n) or q.r.shape != (self.n,):
                raise ValueError("quadratic form has the wrong size")
            w = np.linalg.eigvalsh(0.5 * (q.R + q.R.T))
            if w.max(initial=0.0) > tol * max(1.0, abs(w).max(initial=0.0)):
                raise ValueError("curvature matrix is not negative semidefinite")

    def constraint_matrix(self):
        n = self.n
        G = np.zeros((n + 1, n))
        h = np.zeros(n + 1)
        G[0, 0] = -1.0
        h[0] = -self.lower
        G[1, n - 1] = 1.0
        h[1] = self.upper
        for i in range(n - 1):
            G[2 + i, i] = 1.0
            G[2 + i, i + 1] = -1.0
            h[2 + i] = -self.gap
        return G, h

    def objective(self, z) -> float:
        val = sum(q.value(z) for q in self.quads)
        for a, qa, qb in self.fp:
            if a == 0.0:
                continue
            A = qa.value(z)
            if A <= 0:
                return -math.inf
            s = 1.0 + 2.0 * a * math.sqrt(A) + a * a * qb.value(z)
            if s <= 0:
                return -math.inf
            val += math.log(s) / LN2
        return float(val)

    def derivs(self, z):
        g = np.zeros(self.n)
        H = np.zeros((self.n, self.n))
        for q in self.quads:
            g += q.grad(z)
            H += q.R
        for a, qa, qb in self.fp:
            if a == 0.0:
                continue
            A = qa.value(z)
            rA = math.sqrt(A)
            s = 1.0 + 2.0 * a * rA + a * a * qb.value(z)
            gA, gB = qa.grad(z), qb.grad(z)
            hA = a / rA
            hB = a * a
            hAA = -a / (2.0 * A * rA)
            grad_s = hA * gA + hB * gB
            g += grad_s / (s * LN2)
            Hs = hA * qa.R + hB * qb.R + hAA * np.outer(gA, gA)
            H += (Hs / s - np.outer(grad_s, grad_s) / s**2) / LN2
        return g, H


def _interior_point(p: QpProblem) -> np.ndarray:
    n = p.n
    span = p.upper - p.lower
    s = 0.5 * (p.gap + span / max(n - 1, 1)) if n > 1 else 0.0
    offset = p.lower + 0.5 * (span - (n - 1) * s)
    return offset + s * np.arange(n)


def solve_qp(p: QpProblem, tol: float = 1e-10, max_newton: int = 500) -> np.ndarray:
    """Optimal positions for the concave surrogate (strictly feasible output)."""
    p.validate()
    n = p.n
    if p.upper - p.lower < (n - 1) * p.gap - 1e-15:
        raise SolverError("infeasible geometry: aperture shorter than the minimum spacing allows")
    if p.upper - p.lower <= (n - 1) * p.gap:
        # zero-volume feasible set: the packed arrangement is the only point
        return p.lower + p.gap * np.arange(n)
    G, h = p.constraint_matrix()
    zc = _interior_point(p)
    z = zc
    if p.start is not None:
        z0 = np.asarray(p.start, float)
        for eps in (0.1, 1e-2, 1e-3, 0.5):
            cand = (1 - eps) * z0 + eps * zc
            if np.all(h - G @ cand > 0) and np.isfinite(p.objective(cand)):
                z = cand
                break
    if not np.isfinite(p.objective(z)):
        raise SolverError("no interior starting point inside the objective domain")
    m = G.shape[0]
    t = 1.0
    steps = 0

    def merit(x, t):
        sl = h - G @ x
        if np.any(sl <= 0):
            return -math.inf
        f = p.objective(x)
        if not np.isfinite(f):
            return -math.inf
        return t * f + np.log(sl).sum()

    f0 = abs(p.objective(z))
    t = max(1.0, m / max(1.0, f0))
    while True:
        for _ in range(100):
            steps += 1
            sl = h - G @ z
            g, H = p.derivs(z)
            gt = t * g - G.T @ (1.0 / sl)
            Ht = t * H - (G.T * (1.0 / sl**2)) @ G
            try:
                dz = np.linalg.solve(-Ht, gt)
            except np.linalg.LinAlgError:
                dz = np.linalg.lstsq(-Ht, gt, rcond=None)[0]
            lam2 = float(gt @ dz)
            phi = merit(z, t)
            # centering only needs objective accuracy well below the final gap
            if lam2 / 2 <= max(1e-12, 0.01 * t * tol * max(1.0, f0), 1e-13 * abs(phi)):
                break
            step = 1.0
            neg = G @ dz
            pos = neg > 0
            if np.any(pos):
                step = min(1.0, 0.99 * float(np.min(sl[pos] / neg[pos])))
            while step > 1e-14:
                cand = z + step * dz
                if merit(cand, t) >= phi + 0.01 * step * lam2:
                    break
                step *= 0.5
            else:
                break
            z = cand
            if steps > max_newton:
                break
        if m / t <= tol * max(1.0, abs(p.objective(z))) or steps > max_newton:
            break
        t *= 10.0
    return z
