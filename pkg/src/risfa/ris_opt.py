"""Passive beamforming over all RISs jointly via the lifted phase matrix."""

from __future__ import annotations


import numpy as np

from .channel import ChannelSet, cascade
from .convex_kernel import FpTerm, SdpProblem, SolverError, extract_rank1, gaussian_randomization, solve_sdp
from .hbf import TIGHT, StepInfo, fp_alphas
from .metrics import RisState, rate_of
from .tracing import SolutionTrace


def cascade_basis(ch: ChannelSet, k: int) -> np.ndarray:
    """Q_k = [H_1 diag(h_1k), ..., H_L diag(h_Lk), h_bu_k] so that g_k = Q_k [e; 1]."""
    L = ch.scn.n_ris
    cols = [ch.H_br[l] * ch.h_ru[l, k][None, :] for l in range(L)]
    cols.append(ch.h_bu[k][:, None])
    return np.concatenate(cols, axis=1)


def build_ris_quadratics(ch: ChannelSet, Gammas, k: int, noise: float = 0.0):
    """(R_sig, R_int) with Tr(R_sig Xi) = g_k^H Gamma_k g_k and
    Tr(R_int Xi) = sum_{j != k} g_k^H Gamma_j g_k (+ noise through the corner entry).

    Row/column block (l1, l2) of R_sig is diag(h_l1k)^H H_l1^H Gamma_k H_l2 diag(h_l2k);
    the last row/column couples the reflected blocks to the direct link.
    """
    Q = cascade_basis(ch, k)
    K = len(Gammas)
    if Gammas[k].shape != (Q.shape[0], Q.shape[0]):
        raise ValueError("covariance size does not match the number of antennas")
    Rs = Q.conj().T @ Gammas[k] @ Q
    Gi = sum((Gammas[j] for j in range(K) if j != k), np.zeros_like(Gammas[k]))
    Ri = Q.conj().T @ Gi @ Q
    if noise:
        Ri[-1, -1] += noise
    return 0.5 * (Rs + Rs.conj().T), 0.5 * (Ri + Ri.conj().T)


def lift(e: np.ndarray) -> np.ndarray:
    x = np.concatenate([np.ravel(e), [1.0]])
    return np.outer(x, x.conj())


def phases_from_lift(v: np.ndarray, L: int, M: int) -> np.ndarray:
    """Divide out the homogenization slot's phase, then project to unit modulus."""
    ref = v[-1]
    x = v * (np.conj(ref) / abs(ref)) if abs(ref) > 0 else v
    return np.exp(1j * np.angle(x[:-1])).reshape(L, M)


def ris_step(ch, F, alphas, noise, penalty=0.0, anchor=None, e0=None):
    """One SDR solve for the lifted RIS matrix; returns (Xi, sdp objective, tightness)."""
    scn = ch.scn
    L, M, K = scn.n_ris, scn.n_ris_elements, scn.n_users
    n = L * M + 1
    Gam = [np.outer(F[:, j], F[:, j].conj()) / noise for j in range(K)]
    p = SdpProblem(dims=[n])
    for k in range(K):
        Rs, Ri = build_ris_quadratics(ch, Gam, k)
        ia = p.add_functional([(0, Rs)])
        ib = p.add_functional([(0, Ri)])
        p.fp_terms.append(FpTerm(float(alphas[k]), ia, ib, 1.0))
    p.diag_equalities.append((0, np.ones(n)))
    if e0 is not None:
        p.start = [lift(e0)]
    if penalty != 0.0:
        u = anchor if anchor is not None else np.concatenate([np.ravel(e0), [1.0]])
        u = u / np.linalg.norm(u)
        ip = p.add_functional([(0, np.eye(n) - np.outer(u, u.conj()))])
        p.linear.append((float(penalty), ip))
    res = solve_sdp(p)
    if not res.ok:
        raise SolverError(f"RIS SDP failed: {res.status}")
    Xi = res.blocks[0]
    _, t = extract_rank1(Xi)
    return Xi, res.objective, t


def _candidates(ch, F, noise, Xi, tight, rng):
    L, M = ch.scn.n_ris, ch.scn.n_ris_elements
    v, _ = extract_rank1(Xi)
    cands = [phases_from_lift(v, L, M)]
    if tight < TIGHT:
        def score(e):
            return rate_of(cascade(ch, e), F, noise)

        best, _ = gaussian_randomization(Xi, score, lambda x: phases_from_lift(x, L, M), 100, rng)
        cands.append(best)
    rates = [rate_of(cascade(ch, c), F, noise) for c in cands]
    i = int(np.argmax(rates))
    return cands[i], rates[i]


def ris_optimize(ch, bf, noise, rho=1e-4, max_iter=30, penalty=None, ris0=None,
                 trace=None, rng=None, audit=True):
    """FP iterations over the RIS phases for a fixed beamformer.

    Returns (RisState, trace, infos).  Each accepted iterate never lowers the
    sum rate; the lifted SDP value and tightness are kept in ``infos``.
    """
    scn = ch.scn
    L, M = scn.n_ris, scn.n_ris_elements
    trace = SolutionTrace() if trace is None else trace
    e = np.ones((L, M), complex) if ris0 is None else np.asarray(getattr(ris0, "e", ris0), complex)
    if L == 0:
        return RisState(e), trace, []
    F = bf.F if hasattr(bf, "F") else np.asarray(bf, complex)
    rate = rate_of(cascade(ch, e), F, noise)
    pen = 0.0 if penalty is None else float(penalty)
    anchor = None
    Xi_last = None
    infos = []
    for it in range(max_iter):
        prev = rate
        g = cascade(ch, e)
        alphas = fp_alphas(g, F, noise)
        tries = 0
        while True:
            Xi, obj, t = ris_step(ch, F, alphas, noise, pen, anchor, e)
            cand, cand_rate = _candidates(ch, F, noise, Xi, t, rng)
            # phase-projection loss audit against the lifted objective
            if audit and cand_rate < 0.99 * obj and tries < 3:
                pen = -0.1 * max(abs(rate), 1e-3) if pen == 0.0 else 2.0 * pen
                tries += 1
                continue
            break
        infos.append(StepInfo([t], sdp_objective=obj, penalty=pen, randomized=t < TIGHT))
        if cand_rate >= rate:
            e, rate = cand, cand_rate
        Xi_last = Xi
        anchor = np.linalg.eigh(Xi)[1][:, -1]
        if t < TIGHT:
            pen = -0.1 * max(abs(rate), 1e-3) if pen == 0.0 else 2.0 * pen
        trace.add("FP-RIS", it, rate)
        if prev > 0 and abs(rate / prev - 1.0) <= rho:
            break
    return RisState(e, Xi_last), trace, infos
