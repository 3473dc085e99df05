"""Shared evaluation layer: SINR, sum rate, beampatterns and SLNR."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .channel import ris_steering

ARCHS = ("FD", "FullCon", "SubCon")


@dataclass
class BeamformerState:
    """Digital W, analog V and the overall precoder F = V W.

    For the fully digital architecture V is the N x N identity and W holds F.
    """

    arch: str
    W: np.ndarray
    V: np.ndarray

    @property
    def F(self) -> np.ndarray:
        return self.V @ self.W

    def f(self, k: int) -> np.ndarray:
        return self.V @ self.W[:, k]

    def power(self) -> float:
        return float(np.linalg.norm(self.F) ** 2)

    def check(self, power: float, tol: float = 1e-9) -> None:
        if self.arch not in ARCHS:
            raise ValueError(f"unknown architecture {self.arch!r}")
        V = self.V
        if self.arch == "FullCon":
            if np.abs(np.abs(V) - 1).max() > 1e-9:
                raise ValueError("FullCon analog entries must be unit modulus")
        elif self.arch == "SubCon":
            N, K = V.shape
            n = N // K
            mask = np.kron(np.eye(K), np.ones((n, 1))).astype(bool)
            if np.abs(V[~mask]).max(initial=0.0) != 0.0:
                raise ValueError("SubCon analog matrix must be block diagonal")
            if np.abs(np.abs(V[mask]) - 1).max() > 1e-9:
                raise ValueError("SubCon analog entries must be unit modulus")
        if self.power() > power * (1 + tol):
            raise ValueError(f"power {self.power():.6e} exceeds budget {power:.6e}")

    @classmethod
    def fully_digital(cls, F) -> "BeamformerState":
        F = np.asarray(F, complex)
        return cls("FD", F.copy(), np.eye(F.shape[0], dtype=complex))


@dataclass
class RisState:
    e: np.ndarray  # (L, M) unit modulus
    Xi: np.ndarray | None = None

    def check(self, tol: float = 1e-9) -> None:
        if self.e.size and np.abs(np.abs(self.e) - 1).max() > tol:
            raise ValueError("RIS phase entries must be unit modulus")
        if self.Xi is not None:
            if np.abs(np.diag(self.Xi) - 1).max() > 1e-6:
                raise ValueError("lifted RIS matrix must have unit diagonal")
            if np.linalg.eigvalsh(self.Xi).min() < -1e-6 * np.trace(self.Xi).real:
                raise ValueError("lifted RIS matrix must be PSD")

    def lifted(self) -> np.ndarray:
        x = np.concatenate([self.e.ravel(), [1.0]])
        return np.outer(x, x.conj())

    @classmethod
    def ones(cls, L: int, M: int) -> "RisState":
        return cls(np.ones((L, M), complex))

    @classmethod
    def random(cls, L: int, M: int, rng: np.random.Generator) -> "RisState":
        return cls(np.exp(2j * math.pi * rng.random((L, M))))


def _precoder(bf) -> np.ndarray:
    return bf.F if isinstance(bf, BeamformerState) else np.asarray(bf, complex)


def gains(g: np.ndarray, bf) -> np.ndarray:
    """|g_k^H f_j|^2 as a K x K matrix (row k = receiver)."""
    F = _precoder(bf)
    return np.abs(np.conj(g) @ F) ** 2


def sinr(g: np.ndarray, bf, noise: float) -> np.ndarray:
    G = gains(np.atleast_2d(g), bf)
    sig = np.diag(G)
    interf = G.sum(axis=1) - sig
    return sig / (interf + noise)


def sum_rate(gammas) -> float:
    gammas = np.asarray(gammas, float)
    if np.any(gammas < 0):
        raise ValueError("SINR values must be nonnegative")
    return float(np.log2(1.0 + gammas).sum())


def rate_of(g: np.ndarray, bf, noise: float) -> float:
    return sum_rate(sinr(g, bf, noise))


DEFAULT_GRID_DEG = np.round(np.arange(0, 1801) * 0.1, 10)


def beampattern(weights, positions, theta_grid, wavelength: float = 1.0) -> np.ndarray:
    """|a(theta)^H w| normalized by its maximum over the grid.

    ``positions`` is either a position vector (meters, same unit as
    ``wavelength``) or a scalar uniform spacing.
    """
    w = np.asarray(weights, complex)
    theta_grid = np.atleast_1d(np.asarray(theta_grid, float))
    if theta_grid.size == 0:
        raise ValueError("angle grid must be nonempty")
    pos = np.asarray(getattr(positions, "positions_m", positions), float)
    if pos.ndim == 0:
        pos = np.arange(w.size) * float(pos)
    A = np.exp(-2j * math.pi * np.outer(np.cos(theta_grid), pos) / wavelength)
    amp = np.abs(A.conj() @ w)
    peak = amp.max()
    return amp / peak if peak > 0 else amp


def write_beampattern_csv(path, theta_deg, gain) -> None:
    gain = np.asarray(gain, float)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["theta_deg", "gain_linear", "gain_db"])
        for t, gval in zip(theta_deg, gain):
            db = 20.0 * math.log10(gval) if gval > 0 else -math.inf
            wr.writerow([f"{t:.1f}", f"{gval:.12g}", f"{db:.6f}"])


def cascaded_ris_vectors(ch, l: int, los_only: bool = False) -> np.ndarray:
    """Rows diag(a_M(theta_br, phi_br)) conj(h_ru_lk) for every user k, shape (K, M)."""
    scn = ch.scn
    a = ris_steering(scn.theta_br[l], scn.phi_br[l], scn.ris_rows, scn.ris_cols)
    if los_only:
        h = np.array([
            ch.chi_ru[0][l, k] * ris_steering(scn.theta_ru[l, k], scn.phi_ru[l, k], scn.ris_rows, scn.ris_cols)
            for k in range(scn.n_users)
        ])
    else:
        h = ch.h_ru[l]
    return a[None, :] * np.conj(h)


def slnr_matrices(ch, served, l: int, noise: float, los_only: bool = False):
    served = sorted(set(int(k) for k in served))
    if not served:
        raise ValueError("served user set must be nonempty")
    H = cascaded_ris_vectors(ch, l, los_only)
    M = H.shape[1]
    S = np.zeros((M, M), complex)
    T = (noise / M) * np.eye(M, dtype=complex)
    for k in range(H.shape[0]):
        o = np.outer(H[k], H[k].conj())
        if k in served:
            S += o
        else:
            T += o
    return S, T


def slnr(e, served, ch, l: int, noise: float, los_only: bool = False) -> float:
    S, T = slnr_matrices(ch, served, l, noise, los_only)
    e = np.asarray(e, complex)
    return float((e.conj() @ S @ e).real / (e.conj() @ T @ e).real)
