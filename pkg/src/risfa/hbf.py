"""Active beamforming for the fully digital, fully connected and sub-connected arrays.

All SDPs run in normalized units: channels scaled by sqrt(P)/sigma so that
the power budget and the noise power are both 1.  SINRs are unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .convex_kernel import (
    FpTerm,
    SdpProblem,
    SolverError,
    extract_rank1,
    gaussian_randomization,
    solve_sdp,
)
from .metrics import BeamformerState, rate_of
from .tracing import SolutionTrace

TIGHT = 0.999


@dataclass
class StepInfo:
    tightness: list[float] = field(default_factory=list)
    randomized: bool = False
    sdp_objective: float = float("nan")
    penalty: float = 0.0


def fp_alphas(g: np.ndarray, F: np.ndarray, noise: float) -> np.ndarray:
    """Optimal quadratic-transform variables sqrt(A_k)/B_k for the current precoder."""
    G = np.abs(np.conj(g) @ F) ** 2 / noise
    A = np.diag(G)
    B = G.sum(axis=1) - A + 1.0
    return np.sqrt(A) / B


def mmse_precoder(H_eff: np.ndarray, V: np.ndarray, P: float, noise: float) -> np.ndarray:
    """W = G (G^H G + sigma^2/P I)^-1 with G^H = H_eff, scaled so ||V W||_F^2 = P.

    ``H_eff`` is K x d with row k = g_k^H V.
    """
    Geq = H_eff.conj().T
    K = H_eff.shape[0]
    W = Geq @ np.linalg.inv(H_eff @ Geq + (noise / P) * np.eye(K))
    return scale_to_power(W, V, P)


def scale_to_power(W: np.ndarray, V: np.ndarray, P: float) -> np.ndarray:
    pw = np.linalg.norm(V @ W) ** 2
    if pw <= 0:
        return np.zeros_like(W)
    return W * math.sqrt(P / pw)


def subcon_mask(N: int, K: int) -> np.ndarray:
    return np.kron(np.eye(K), np.ones((N // K, 1))).astype(bool)


def subcon_matrix(nu: np.ndarray, K: int) -> np.ndarray:
    """Block-diagonal analog matrix from the stacked phase vector nu."""
    N = nu.size
    V = np.zeros((N, K), complex)
    n = N // K
    for k in range(K):
        V[k * n:(k + 1) * n, k] = nu[k * n:(k + 1) * n]
    return V


def subcon_phases(V: np.ndarray) -> np.ndarray:
    N, K = V.shape
    n = N // K
    return np.concatenate([V[k * n:(k + 1) * n, k] for k in range(K)])


def initial_state(arch: str, g: np.ndarray, P: float, noise: float) -> BeamformerState:
    """MMSE digital part on top of a simple analog start."""
    K, N = g.shape
    if arch == "FD":
        V = np.eye(N, dtype=complex)
    elif arch == "FullCon":
        n = np.arange(N)[:, None]
        k = np.arange(K)[None, :]
        V = np.exp(2j * math.pi * n * k / N)
    elif arch == "SubCon":
        n = N // K
        nu = np.concatenate([np.exp(1j * np.angle(g[k, k * n:(k + 1) * n])) for k in range(K)])
        V = subcon_matrix(nu, K)
    else:
        raise ValueError(f"unknown architecture {arch!r}")
    H_eff = np.conj(g) @ V
    W = mmse_precoder(H_eff, V, P, noise)
    return BeamformerState(arch, W, V)


# ---------------------------------------------------------------------------
# fully digital
# ---------------------------------------------------------------------------


def fd_step(g, alphas, P, noise, F0=None, rng=None):
    """One SDR solve of the FP-transformed fully digital problem.

    Returns (Gammas, F, info); Gammas are in watts.
    """
    K, N = g.shape
    if P <= 0:
        return [np.zeros((N, N), complex) for _ in range(K)], np.zeros((N, K), complex), StepInfo([1.0] * K)
    gs = g * math.sqrt(P / noise)
    R = [np.outer(gs[k], gs[k].conj()) for k in range(K)]  # Tr(R X) = g^H X g
    p = SdpProblem(dims=[N] * K)
    for k in range(K):
        ia = p.add_functional([(k, R[k])])
        ib = p.add_functional([(j, R[k]) for j in range(K) if j != k])
        p.fp_terms.append(FpTerm(float(alphas[k]), ia, ib, 1.0))
    ip = p.add_functional([(j, np.eye(N)) for j in range(K)])
    p.inequalities.append((ip, 1.0))
    if F0 is not None:
        Fn = np.asarray(F0) / math.sqrt(P)
        p.start = [np.outer(Fn[:, k], Fn[:, k].conj()) for k in range(K)]
    res = solve_sdp(p)
    if not res.ok:
        raise SolverError(f"fully digital SDP failed: {res.status}")
    info = StepInfo(sdp_objective=res.objective)
    F = np.zeros((N, K), complex)
    for k, X in enumerate(res.blocks):
        if np.trace(X).real <= 1e-14:
            info.tightness.append(1.0)
            continue
        v, t = extract_rank1(X)
        info.tightness.append(t)
        F[:, k] = v * math.sqrt(P)
    if min(info.tightness) < TIGHT:
        info.randomized = True
        F = _randomize_fd(res.blocks, g, P, noise, F, rng)
    Gam = [X * P for X in res.blocks]
    return Gam, F, info


def _randomize_fd(blocks, g, P, noise, F_eig, rng):
    rng = np.random.default_rng(0) if rng is None else rng
    roots = []
    for X in blocks:
        w, U = np.linalg.eigh(0.5 * (X + X.conj().T))
        roots.append(U * np.sqrt(np.clip(w, 0, None)))
    best, best_val = F_eig, rate_of(g, F_eig, noise)
    N = blocks[0].shape[0]
    for _ in range(100):
        cols = []
        for Rt in roots:
            r = (rng.standard_normal(N) + 1j * rng.standard_normal(N)) / math.sqrt(2)
            cols.append(Rt @ r)
        F = np.stack(cols, axis=1)
        F *= math.sqrt(P) / max(np.linalg.norm(F), 1e-300)
        val = rate_of(g, F, noise)
        if val > best_val:
            best, best_val = F, val
    return best


def _stop(prev: float, cur: float, rho: float) -> bool:
    if prev <= 0:
        return cur <= 0
    return abs(cur / prev - 1.0) <= rho


def fd_optimize(g, P, noise, rho=1e-4, max_iter=30, F0=None, trace=None, rng=None):
    """FP loop around the fully digital SDR; returns (F, trace, info list)."""
    K, N = g.shape
    trace = SolutionTrace() if trace is None else trace
    if P <= 0:
        return np.zeros((N, K), complex), trace, []
    F = initial_state("FD", g, P, noise).F if F0 is None else np.asarray(F0, complex)
    rate = rate_of(g, F, noise)
    infos = []
    for it in range(max_iter):
        alphas = fp_alphas(g, F, noise)
        _, Fn, info = fd_step(g, alphas, P, noise, F0=F, rng=rng)
        infos.append(info)
        new = rate_of(g, Fn, noise)
        if new >= rate:
            F, prev, rate = Fn, rate, new
        else:
            prev = rate
        trace.add("FP-HBF", it, rate)
        if new < prev or _stop(prev, rate, rho):
            break
    return F, trace, infos


# ---------------------------------------------------------------------------
# fully connected fit
# ---------------------------------------------------------------------------


def _ls_digital(V, F):
    return np.linalg.lstsq(V, F, rcond=None)[0]


def fit_full_connected(F_star, P, iters=50, return_residuals=False):
    """Unit-modulus V and digital W approximating F_star in Frobenius norm.

    Starts from the phase projection V = exp(j angle F_star) with least-squares
    W, then alternates exact per-entry phase updates with the least-squares W.
    The final W is rescaled to the power budget.
    """
    F_star = np.asarray(F_star, complex)
    N, K = F_star.shape
    if not np.any(F_star):
        V = np.ones((N, K), complex)
        W = np.zeros((K, K), complex)
        return (V, W, [0.0]) if return_residuals else (V, W)
    V = np.exp(1j * np.angle(F_star))
    W = _ls_digital(V, F_star)
    res = [np.linalg.norm(F_star - V @ W)]
    for _ in range(iters):
        for n in range(N):
            for k in range(K):
                r = F_star[n] - V[n] @ W + V[n, k] * W[k]
                c = r @ W[k].conj()
                if abs(c) > 0:
                    V[n, k] = np.exp(1j * np.angle(c))
        W = _ls_digital(V, F_star)
        res.append(np.linalg.norm(F_star - V @ W))
        if res[-2] - res[-1] <= 1e-12 * max(res[0], 1e-300):
            break
    W = scale_to_power(W, V, P) if P > 0 else np.zeros_like(W)
    return (V, W, res) if return_residuals else (V, W)


# ---------------------------------------------------------------------------
# sub-connected
# ---------------------------------------------------------------------------


def subcon_dbf_step(g, V, alphas, P, noise, W0=None):
    """Digital SDR for fixed block-diagonal V; returns (Omegas, W, info)."""
    K, N = g.shape
    gs = g * math.sqrt(P / noise)
    h = np.conj(gs) @ V  # row k: g_k^H V
    R = [np.outer(h[k].conj(), h[k]) for k in range(K)]  # w^H R w = |g^H V w|^2
    VhV = V.conj().T @ V
    p = SdpProblem(dims=[K] * K)
    for k in range(K):
        ia = p.add_functional([(k, R[k])])
        ib = p.add_functional([(j, R[k]) for j in range(K) if j != k])
        p.fp_terms.append(FpTerm(float(alphas[k]), ia, ib, 1.0))
    ip = p.add_functional([(j, VhV) for j in range(K)])
    p.inequalities.append((ip, 1.0))
    if W0 is None:
        # the FP domain need not contain the solver's default center
        W0 = mmse_precoder(np.conj(g) @ V, V, P, noise)
    Wn = np.asarray(W0) / math.sqrt(P)
    p.start = [np.outer(Wn[:, k], Wn[:, k].conj()) for k in range(K)]
    res = solve_sdp(p)
    if not res.ok:
        raise SolverError(f"digital SDP failed: {res.status}")
    info = StepInfo(sdp_objective=res.objective)
    W = np.zeros((K, K), complex)
    for k, X in enumerate(res.blocks):
        if np.trace(X).real <= 1e-14:
            info.tightness.append(1.0)
            continue
        v, t = extract_rank1(X)
        info.tightness.append(t)
        W[:, k] = v * math.sqrt(P)
    Om = [X * P for X in res.blocks]
    return Om, W, info


def abf_quadratics(g, W, noise):
    """Matrices R[k][j] with |g_k^H V w_j|^2 / noise = nu^H R[k][j] nu."""
    K, N = g.shape
    n = N // K
    blk = np.repeat(np.arange(K), n)
    out = []
    for k in range(K):
        row = []
        for j in range(K):
            a = g[k] * np.conj(W[blk, j]) / math.sqrt(noise)
            row.append(np.outer(a, a.conj()))
        out.append(row)
    return out


def subcon_abf_step(g, W, alphas, P, noise, penalty=0.0, anchor=None, V0=None, rng=None):
    """Analog SDR over the lifted phase vector with the rank-1 penalty.

    ``penalty`` (<= 0) multiplies Tr(Y) - u^H Y u where ``anchor`` u is the
    dominant direction of the previous lifted iterate.  Returns (Upsilon, V, info).
    """
    K, N = g.shape
    Rq = abf_quadratics(g, W, noise)
    p = SdpProblem(dims=[N])
    for k in range(K):
        ia = p.add_functional([(0, Rq[k][k])])
        ib = p.add_functional([(0, sum(Rq[k][j] for j in range(K) if j != k) if K > 1 else np.zeros((N, N)))])
        p.fp_terms.append(FpTerm(float(alphas[k]), ia, ib, 1.0))
    p.diag_equalities.append((0, np.ones(N)))
    nu0 = subcon_phases(V0) if V0 is not None else None
    if penalty != 0.0:
        u = anchor if anchor is not None else nu0 / np.linalg.norm(nu0)
        u = u / np.linalg.norm(u)
        ipen = p.add_functional([(0, np.eye(N) - np.outer(u, u.conj()))])
        p.linear.append((float(penalty), ipen))
    if nu0 is not None:
        p.start = [np.outer(nu0, nu0.conj())]
    res = solve_sdp(p)
    if not res.ok:
        raise SolverError(f"analog SDP failed: {res.status}")
    Y = res.blocks[0]
    v, t = extract_rank1(Y)
    info = StepInfo([t], sdp_objective=res.objective, penalty=penalty)
    cands = [np.exp(1j * np.angle(v))]
    if t < TIGHT:
        info.randomized = True
        best, _ = gaussian_randomization(
            Y, lambda nu: rate_of(g, subcon_matrix(nu, K) @ W, noise),
            lambda x: np.exp(1j * np.angle(x)), 100, rng)
        cands.append(best)
    scores = [rate_of(g, subcon_matrix(c, K) @ W, noise) for c in cands]
    nu = cands[int(np.argmax(scores))]
    return Y, subcon_matrix(nu, K), info


def _escalate(pen: float, obj: float) -> float:
    """Switch the rank-1 penalty on (or double it) after a loose relaxation."""
    return -0.1 * max(abs(obj), 1e-3) if pen == 0.0 else 2.0 * pen


def _extrapolate(g, P, noise, V, W, rate, V_old, W_old, beta):
    """Try to continue along the last digital/analog step; keep it only if the rate rises.

    The two blocks are strongly coupled, so plain alternation creeps along a
    ridge.  Phases move by b times their last change and W by b times its
    last change, for b in (4 beta, 2 beta, beta); beta adapts to the outcome.
    """
    K = W.shape[1]
    nu, nu_old = subcon_phases(V), subcon_phases(V_old)
    dphi = np.angle(nu * np.conj(nu_old))
    for b in (4.0 * beta, 2.0 * beta, beta):
        Ve = subcon_matrix(nu * np.exp(1j * b * dphi), K)
        We = scale_to_power(W + b * (W - W_old), Ve, P)
        val = rate_of(g, Ve @ We, noise)
        if val > rate:
            return Ve, We, val, min(b, 16.0)
    return V, W, rate, max(0.5 * beta, 0.5)


def subcon_optimize(g, P, noise, rho=1e-4, max_iter=30, state=None, penalty=None, trace=None, rng=None,
                    extrapolate=True):
    """Alternating digital / analog FP iterations with monotone acceptance."""
    K, N = g.shape
    trace = SolutionTrace() if trace is None else trace
    st = initial_state("SubCon", g, P, noise) if state is None else state
    W, V = st.W.copy(), st.V.copy()
    rate = rate_of(g, V @ W, noise)
    auto = penalty is None or penalty == "auto"
    pen = 0.0 if auto else float(penalty)
    anchor = None
    infos = []
    beta = 1.0
    for it in range(max_iter):
        prev = rate
        V_old, W_old = V, W
        alphas = fp_alphas(g, V @ W, noise)
        _, Wn, info_d = subcon_dbf_step(g, V, alphas, P, noise, W0=W)
        val = rate_of(g, V @ Wn, noise)
        if val >= rate:
            W, rate = Wn, val
        alphas = fp_alphas(g, V @ W, noise)
        Y, Vn, info_a = subcon_abf_step(g, W, alphas, P, noise, penalty=pen, anchor=anchor, V0=V, rng=rng)
        infos.append((info_d, info_a))
        val = rate_of(g, Vn @ W, noise)
        if val >= rate:
            V, rate = Vn, val
        anchor = np.linalg.eigh(Y)[1][:, -1]
        if auto and info_a.tightness[0] < TIGHT:
            pen = _escalate(pen, rate)
        if extrapolate:
            V, W, rate, beta = _extrapolate(g, P, noise, V, W, rate, V_old, W_old, beta)
        trace.add("FP-HBF", it, rate)
        if _stop(prev, rate, rho):
            break
    return BeamformerState("SubCon", W, V), trace, infos


def hbf_optimize(arch, g, P, noise, rho=1e-4, max_iter=30, state=None, penalty=None, trace=None, rng=None):
    """Dispatch to the architecture-specific FP loop; returns (state, trace)."""
    trace = SolutionTrace() if trace is None else trace
    if arch == "FD":
        F0 = state.F if state is not None else None
        F, trace, _ = fd_optimize(g, P, noise, rho, max_iter, F0=F0, trace=trace, rng=rng)
        return BeamformerState.fully_digital(F), trace
    if arch == "FullCon":
        F, trace, _ = fd_optimize(g, P, noise, rho, max_iter, trace=trace, rng=rng)
        V, W = fit_full_connected(F, P)
        return BeamformerState("FullCon", W, V), trace
    if arch == "SubCon":
        st, trace, _ = subcon_optimize(g, P, noise, rho, max_iter, state=state, penalty=penalty,
                                       trace=trace, rng=rng)
        return st, trace
    raise ValueError(f"unknown architecture {arch!r}")
