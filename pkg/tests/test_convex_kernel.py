import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from risfa.convex_kernel import (
    FpTerm,
    QpProblem,
    QuadForm,
    SdpProblem,
    SolverError,
    dump_sdp,
    extract_rank1,
    fp_alpha,
    gaussian_randomization,
    generalized_rayleigh_max,
    lowrank_rayleigh_max,
    solve_qp,
    solve_sdp,
)


def crand(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def herm_psd(rng, n, rank=None):
    A = crand(rng, n, rank or n)
    return A @ A.conj().T


# --- SDP -------------------------------------------------------------------


def test_sdp_dominant_eigenvector():
    p = SdpProblem(dims=[2])
    j = p.add_functional([(0, np.diag([2.0, 1.0]))])
    t = p.add_functional([(0, np.eye(2))])
    p.linear.append((1.0, j))
    p.equalities.append((t, 1.0))
    res = solve_sdp(p)
    assert res.ok
    assert res.objective == pytest.approx(2.0, abs=1e-6)
    np.testing.assert_allclose(res.blocks[0], np.diag([1.0, 0.0]), atol=1e-5)


def test_sdp_infeasible_trace():
    p = SdpProblem(dims=[2])
    t = p.add_functional([(0, np.eye(2))])
    p.inequalities.append((t, -1.0))
    assert solve_sdp(p).status == "infeasible"


def test_sdp_single_user_mrt():
    rng = np.random.default_rng(0)
    h = crand(rng, 4)
    p = SdpProblem(dims=[4])
    ia = p.add_functional([(0, np.outer(h, h.conj()))])
    ib = p.add_functional([(0, np.zeros((4, 4)))])
    ip = p.add_functional([(0, np.eye(4))])
    # with no interference the FP term is increasing in |h^H f|^2
    p.fp_terms.append(FpTerm(0.1, ia, ib, 1.0))
    p.inequalities.append((ip, 1.0))
    res = solve_sdp(p)
    want = np.outer(h, h.conj()) / np.linalg.norm(h) ** 2
    np.testing.assert_allclose(res.blocks[0], want, atol=1e-5)


def test_sdp_validation_errors():
    p = SdpProblem(dims=[2])
    p.add_functional([(0, np.array([[0, 1], [0, 0]]))])
    with pytest.raises(ValueError, match="Hermitian"):
        solve_sdp(p)
    p = SdpProblem(dims=[2])
    p.add_functional([(1, np.eye(2))])
    with pytest.raises(ValueError):
        solve_sdp(p)


def test_sdp_matches_cvxpy_oracle():
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(11)
    K, N = 2, 3
    g = crand(rng, K, N)
    R = [np.outer(g[k], g[k].conj()) for k in range(K)]
    alphas = [0.4, 0.6]
    p = SdpProblem(dims=[N] * K)
    for k in range(K):
        ia = p.add_functional([(k, R[k])])
        ib = p.add_functional([(j, R[k]) for j in range(K) if j != k])
        p.fp_terms.append(FpTerm(alphas[k], ia, ib, 1.0))
    ip = p.add_functional([(j, np.eye(N)) for j in range(K)])
    p.inequalities.append((ip, 1.0))
    ours = solve_sdp(p)

    X = [cp.Variable((N, N), hermitian=True) for _ in range(K)]
    obj = 0
    for k in range(K):
        A = cp.real(cp.trace(R[k] @ X[k]))
        B = sum(cp.real(cp.trace(R[k] @ X[j])) for j in range(K) if j != k)
        obj += cp.log(1 + 2 * alphas[k] * cp.sqrt(A) - alphas[k] ** 2 * (B + 1)) / math.log(2)
    cons = [x >> 0 for x in X] + [sum(cp.real(cp.trace(x)) for x in X) <= 1]
    val = cp.Problem(cp.Maximize(obj), cons).solve(solver="CLARABEL")
    assert ours.objective == pytest.approx(val, abs=1e-5)


def test_dump_sdp(tmp_path):
    p = SdpProblem(dims=[2])
    t = p.add_functional([(0, np.eye(2))])
    p.equalities.append((t, 1.0))
    p.diag_equalities.append((0, np.ones(2)))
    dump_sdp(p, tmp_path / "p.txt")
    lines = (tmp_path / "p.txt").read_text().splitlines()
    assert lines[0] == "dims 2"
    assert "EQ 0 1" in lines and lines[-1] == "CONST 0"


# --- rank-1 and closed forms ------------------------------------------------


def test_extract_rank1_examples():
    v, t = extract_rank1(np.diag([5.0, 0.0]))
    np.testing.assert_allclose(np.abs(v), [math.sqrt(5), 0], atol=1e-12)
    assert t == pytest.approx(1.0)
    assert extract_rank1(np.eye(2))[1] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        extract_rank1(np.zeros((2, 2)))


@given(st.integers(0, 2**31))
def test_extract_rank1_recovers_vector(seed):
    v = crand(np.random.default_rng(seed), 5)
    u, t = extract_rank1(np.outer(v, v.conj()))
    ph = np.vdot(u, v) / abs(np.vdot(u, v))
    np.testing.assert_allclose(u * ph, v, atol=1e-10 * np.linalg.norm(v))
    assert t == pytest.approx(1.0)


@given(st.integers(0, 2**31))
def test_extract_rank1_residual_bound(seed):
    X = herm_psd(np.random.default_rng(seed), 4, 2)
    v, t = extract_rank1(X)
    tr = np.trace(X).real
    assert np.linalg.norm(X - np.outer(v, v.conj())) <= math.sqrt(1 - t) * tr * math.sqrt(2) + 1e-9 * tr


def test_fp_alpha():
    assert fp_alpha(4, 2) == 1.0
    assert fp_alpha(0, 3) == 0.0
    with pytest.raises(ValueError):
        fp_alpha(1, 0)
    A, B = 2.7, 1.3
    a = fp_alpha(A, B)
    assert 2 * a * math.sqrt(A) - a * a * B == pytest.approx(A / B)


def test_gaussian_randomization_keeps_best():
    X = np.diag([1.0, 1.0])
    best, val = gaussian_randomization(X, lambda x: -abs(x[0] - 1), lambda x: x, 50, np.random.default_rng(0))
    assert val == pytest.approx(-abs(best[0] - 1))


def test_rayleigh_examples():
    u, v = generalized_rayleigh_max(np.diag([3.0, 1.0]), np.eye(2))
    assert v == pytest.approx(3.0)
    np.testing.assert_allclose(np.abs(u), [1, 0], atol=1e-12)
    S = herm_psd(np.random.default_rng(1), 3)
    assert generalized_rayleigh_max(S, S)[1] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        generalized_rayleigh_max(np.eye(2), -np.eye(2))


@given(st.integers(0, 2**31))
def test_rayleigh_beats_random_vectors(seed):
    rng = np.random.default_rng(seed)
    S, T = herm_psd(rng, 4, 2), herm_psd(rng, 4) + 0.1 * np.eye(4)
    _, val = generalized_rayleigh_max(S, T)
    x = crand(rng, 1000, 4)
    q = np.einsum("ij,jk,ik->i", x.conj(), S, x).real / np.einsum("ij,jk,ik->i", x.conj(), T, x).real
    assert val >= q.max() - 1e-9 * val


@given(st.integers(0, 2**31), st.floats(1e-8, 1.0))
def test_lowrank_rayleigh_matches_dense(seed, c):
    rng = np.random.default_rng(seed)
    Hs, Hl = crand(rng, 5, 2), crand(rng, 5, 2)
    u = lowrank_rayleigh_max(Hs, Hl, c)
    S = Hs @ Hs.conj().T
    T = c * np.eye(5) + Hl @ Hl.conj().T
    _, best = generalized_rayleigh_max(S, T)
    q = (u.conj() @ S @ u).real / (u.conj() @ T @ u).real
    assert q == pytest.approx(best, rel=1e-6)


# --- QP ----------------------------------------------------------------------


def _plain_qp(n, zbar, gap=0.1, upper=10.0):
    q = QuadForm(-2 * np.eye(n), 2 * np.asarray(zbar, float), -float(np.dot(zbar, zbar)))
    return QpProblem(n=n, lower=0.0, upper=upper, gap=gap, quads=[q])


def test_qp_unconstrained_optimum():
    zbar = np.array([0.5, 1.5, 3.0, 7.0])
    np.testing.assert_allclose(solve_qp(_plain_qp(4, zbar)), zbar, atol=1e-6)


def test_qp_projection_onto_ordering():
    z = solve_qp(_plain_qp(5, np.zeros(5), gap=0.2))
    np.testing.assert_allclose(z, 0.2 * np.arange(5), atol=1e-6)


def _projected_gradient(p, iters=200_000):
    """Oracle: projected gradient ascent with an exact projection onto the feasible set."""
    G, h = p.constraint_matrix()
    z = p.lower + p.gap * np.arange(p.n) + 1e-3
    Rsum = sum(q.R for q in p.quads)
    step = 1.0 / np.abs(np.linalg.eigvalsh(Rsum)).max()
    for _ in range(iters):
        zn = _project(z + step * sum(q.grad(z) for q in p.quads), p)
        if np.abs(zn - z).max() < 1e-13:
            break
        z = zn
    return z


def _project(y, p):
    # positions with gaps >= delta <=> u = z - delta*i nondecreasing; project u by pool-adjacent-violators
    off = p.gap * np.arange(p.n)
    u = y - off
    blocks = [[v, 1] for v in u]
    out = []
    for b in blocks:
        out.append(b)
        while len(out) > 1 and out[-2][0] / out[-2][1] > out[-1][0] / out[-1][1]:
            s, c = out.pop()
            out[-1][0] += s
            out[-1][1] += c
    vals = []
    for s, c in out:
        vals.extend([s / c] * c)
    u = np.clip(np.array(vals), p.lower, p.upper - off[-1])
    return u + off


@given(st.integers(0, 2**31))
def test_qp_matches_projected_gradient_oracle(seed):
    rng = np.random.default_rng(seed)
    n = 4
    A = rng.standard_normal((n, n))
    R = -(A @ A.T + 0.5 * np.eye(n))
    r = rng.standard_normal(n) * 3
    p = QpProblem(n=n, lower=0.0, upper=2.0, gap=0.3, quads=[QuadForm(R, r, 0.0)])
    z = solve_qp(p)
    zo = _projected_gradient(p)
    assert p.objective(z) >= p.objective(zo) - 1e-6
    np.testing.assert_allclose(z, zo, atol=1e-4)


def test_qp_rejects_convex_curvature():
    p = QpProblem(n=2, lower=0.0, upper=1.0, gap=0.1, quads=[QuadForm(np.eye(2), np.zeros(2), 0.0)])
    with pytest.raises(ValueError, match="negative semidefinite"):
        solve_qp(p)


def test_qp_infeasible_geometry():
    with pytest.raises(SolverError):
        solve_qp(_plain_qp(4, np.zeros(4), gap=1.0, upper=2.0))


def test_qp_output_feasible():
    z = solve_qp(_plain_qp(6, [5, 1, 4, 2, 9, 3], gap=0.5, upper=6.0))
    assert z[0] >= -1e-9 and z[-1] <= 6.0 + 1e-9
    assert np.diff(z).min() >= 0.5 - 1e-9
