"""Steering vectors, Rician channel synthesis and the cascaded per-user channel."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .scenario import Apv, Scenario


def fa_steering(theta, z, wavelength: float) -> np.ndarray:
    """exp(-j 2 pi z_n cos(theta) / lambda) for arbitrary element positions."""
    z = np.asarray(getattr(z, "positions_m", z), dtype=float)
    return np.exp(-2j * math.pi * z * math.cos(theta) / wavelength)


def ris_steering(theta, phi, m1: int, m2: int) -> np.ndarray:
    """UPA steering vector a_{M1} kron a_{M2} with half-wavelength element pitch."""
    if m1 < 1 or m2 < 1:
        raise ValueError("RIS dimensions must be positive")
    fy = 0.5 * math.sin(theta) * math.sin(phi)
    fx = 0.5 * math.sin(theta) * math.cos(phi)
    ay = np.exp(-2j * math.pi * np.arange(m1) * fy)
    ax = np.exp(-2j * math.pi * np.arange(m2) * fx)
    return np.kron(ay, ax)


def crandn(rng: np.random.Generator, shape) -> np.ndarray:
    """Circular complex Gaussian entries with unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


@dataclass(frozen=True)
class NlosDraws:
    h_bu: np.ndarray  # (K, N)
    H_br: np.ndarray  # (L, N, M)
    h_ru: np.ndarray  # (L, K, M)


def draw_nlos(scn: Scenario, rng: np.random.Generator) -> NlosDraws:
    N, K, L, M = scn.n_tx, scn.n_users, scn.n_ris, scn.n_ris_elements
    h_bu = crandn(rng, (K, N))
    H_br = crandn(rng, (L, N, M))
    h_ru = crandn(rng, (L, K, M))
    return NlosDraws(h_bu, H_br, h_ru)


def rician_factors(beta, kappa):
    """(LoS, NLoS) amplitude factors beta*sqrt(k/(k+1)), beta*sqrt(1/(k+1))."""
    beta = np.asarray(beta, float)
    kappa = np.asarray(kappa, float)
    if np.any(np.isinf(kappa)):
        los = np.where(np.isinf(kappa), beta, beta * np.sqrt(kappa / (kappa + 1)))
        nlos = np.where(np.isinf(kappa), 0.0, beta * np.sqrt(1 / (kappa + 1)))
        return los, nlos
    return beta * np.sqrt(kappa / (kappa + 1.0)), beta * np.sqrt(1.0 / (kappa + 1.0))


@dataclass(frozen=True)
class ChannelSet:
    """All links for one trial at one antenna position vector."""

    scn: Scenario
    draws: NlosDraws
    apv: Apv
    chi_bu: tuple  # (los (K,), nlos (K,))
    chi_br: tuple  # (los (L,), nlos (L,))
    chi_ru: tuple  # (los (L,K), nlos (L,K))
    a_ris_br: np.ndarray  # (L, M) RIS steering toward the BS
    h_bu: np.ndarray  # (K, N)
    H_br: np.ndarray  # (L, N, M)
    h_ru: np.ndarray  # (L, K, M)

    @property
    def z(self) -> np.ndarray:
        return self.apv.positions_m

    def with_positions(self, z) -> "ChannelSet":
        return assemble_channels(self.scn, self.draws, z if isinstance(z, Apv) else Apv(z))

    def los_only(self) -> "ChannelSet":
        """Same geometry with the NLoS parts removed (statistical CSI)."""
        d = self.draws
        zero = NlosDraws(np.zeros_like(d.h_bu), np.zeros_like(d.H_br), np.zeros_like(d.h_ru))
        return assemble_channels(self.scn, zero, self.apv)


def assemble_channels(scn: Scenario, draws: NlosDraws, z) -> ChannelSet:
    apv = z if isinstance(z, Apv) else Apv(z)
    zz = apv.positions_m
    N, K, L, M = scn.n_tx, scn.n_users, scn.n_ris, scn.n_ris_elements
    if zz.shape != (N,):
        raise ValueError(f"APV length {zz.size} does not match N={N}")
    if draws.h_bu.shape != (K, N) or draws.H_br.shape != (L, N, M) or draws.h_ru.shape != (L, K, M):
        raise ValueError("NLoS draw dimensions do not match the scenario")
    lam = scn.wavelength
    cb_bu = rician_factors(scn.beta_bu, scn.kappa_bu)
    cb_br = rician_factors(scn.beta_br, scn.kappa_br)
    cb_ru = rician_factors(scn.beta_ru, scn.kappa_ru)

    h_bu = np.empty((K, N), complex)
    for k in range(K):
        h_bu[k] = cb_bu[0][k] * fa_steering(scn.theta_bu[k], zz, lam) + cb_bu[1][k] * draws.h_bu[k]
    a_br = np.empty((L, M), complex)
    H_br = np.empty((L, N, M), complex)
    h_ru = np.empty((L, K, M), complex)
    for l in range(L):
        a_br[l] = ris_steering(scn.theta_br[l], scn.phi_br[l], scn.ris_rows, scn.ris_cols)
        los = np.outer(fa_steering(scn.theta_br[l], zz, lam), a_br[l].conj())
        H_br[l] = cb_br[0][l] * los + cb_br[1][l] * draws.H_br[l]
        for k in range(K):
            a_ru = ris_steering(scn.theta_ru[l, k], scn.phi_ru[l, k], scn.ris_rows, scn.ris_cols)
            h_ru[l, k] = cb_ru[0][l, k] * a_ru + cb_ru[1][l, k] * draws.h_ru[l, k]
    for arr in (h_bu, H_br, h_ru, a_br):
        arr.setflags(write=False)
    return ChannelSet(scn, draws, apv, cb_bu, cb_br, cb_ru, a_br, h_bu, H_br, h_ru)


def cascade(ch: ChannelSet, ris) -> np.ndarray:
    """Rows g_k = h_bu_k + sum_l H_br_l diag(e_l) h_ru_lk, shape (K, N)."""
    e = _phases(ch, ris)
    g = np.array(ch.h_bu, dtype=complex)
    for l in range(ch.scn.n_ris):
        g += (ch.H_br[l] @ (e[l][:, None] * ch.h_ru[l].T)).T
    return g


def _phases(ch: ChannelSet, ris) -> np.ndarray:
    L, M = ch.scn.n_ris, ch.scn.n_ris_elements
    if ris is None:
        return np.ones((L, M), complex)
    e = np.asarray(getattr(ris, "e", ris), dtype=complex).reshape(L, M)
    return e


def dump_channels(ch: ChannelSet, out_dir) -> list[str]:
    """One CSV per link family with index columns plus re, im."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    specs = [
        ("bs_ue.csv", ("k", "n"), ch.h_bu),
        ("bs_ris.csv", ("l", "n", "m"), ch.H_br),
        ("ris_ue.csv", ("l", "k", "m"), ch.h_ru),
    ]
    for name, cols, arr in specs:
        path = os.path.join(out_dir, name)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(cols) + ["re", "im"])
            for idx in np.ndindex(arr.shape):
                v = arr[idx]
                w.writerow(list(idx) + [repr(float(v.real)), repr(float(v.imag))])
        paths.append(path)
    return paths
