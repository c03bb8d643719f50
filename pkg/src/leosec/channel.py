"""Steering vectors, link SNRs and secrecy rates for a movable-antenna array."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .constellation import SlotScene

LN2 = math.log(2.0)


@dataclass(frozen=True)
class ArrayGeometry:
    """Element positions (N, 2) in metres inside the square ``[0, side]^2``."""

    positions: np.ndarray
    side: float
    d_min: float

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(-1, 2)
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        if not self.side > 0 or self.d_min < 0:
            raise ValueError("region side must be positive and d_min non-negative")

    @property
    def num_elements(self) -> int:
        return self.positions.shape[0]

    @property
    def flat(self) -> np.ndarray:
        return self.positions.ravel().copy()

    def with_positions(self, positions) -> "ArrayGeometry":
        return ArrayGeometry(np.asarray(positions, dtype=float).reshape(-1, 2), self.side, self.d_min)

    def pairwise_distances(self) -> np.ndarray:
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        return np.linalg.norm(diff, axis=-1)

    def min_spacing(self) -> float:
        n = self.num_elements
        if n < 2:
            return math.inf
        d = self.pairwise_distances()
        return float(d[np.triu_indices(n, 1)].min())

    def box_violation(self) -> float:
        p = self.positions
        return float(max(0.0, -p.min(), p.max() - self.side))

    def is_feasible(self, tol: float = 1e-9) -> bool:
        return self.box_violation() <= tol and self.min_spacing() >= self.d_min - tol

    def centroid_spread(self) -> float:
        """Mean element distance from the array centroid."""
        c = self.positions.mean(axis=0)
        return float(np.linalg.norm(self.positions - c, axis=1).mean())


@dataclass(frozen=True)
class SlotRates:
    legit: float
    eaves: tuple[float, ...]
    secrecy: float

    @property
    def max_eaves(self) -> float:
        return max(self.eaves) if self.eaves else -math.inf

    @property
    def margin(self) -> float:
        """Unclamped legitimate-minus-strongest-eavesdropper rate."""
        return self.legit - self.max_eaves if self.eaves else self.legit


@dataclass(frozen=True)
class SecrecyReport:
    per_slot: tuple[SlotRates, ...]
    average: float

    def secrecy_rates(self) -> np.ndarray:
        return np.array([r.secrecy for r in self.per_slot])

    def write_csv(self, path, scenes: Sequence[SlotScene] | None = None) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["slot", "serving", "num_eaves", "rate_legit", "rate_eaves_max", "secrecy_rate"])
            for i, r in enumerate(self.per_slot):
                slot = scenes[i].slot_index if scenes is not None else i + 1
                serving = str(scenes[i].serving) if scenes is not None else ""
                w.writerow([slot, serving, len(r.eaves), fmt(r.legit),
                            fmt(r.max_eaves) if r.eaves else "", fmt(r.secrecy)])
            w.writerow(["mean", "", "", "", "", fmt(self.average)])


def fmt(x: float) -> str:
    return f"{x:.12g}"


def steering_vector(b_tilde: np.ndarray, geometry: ArrayGeometry | np.ndarray) -> np.ndarray:
    """Array response exp(j b^T c_n); only horizontal wave components matter."""
    pos = geometry.positions if isinstance(geometry, ArrayGeometry) else np.asarray(geometry).reshape(-1, 2)
    b = np.asarray(b_tilde, dtype=float)
    return np.exp(1j * (pos @ b[..., :2].T)).T if b.ndim == 2 else np.exp(1j * (pos @ b[:2]))


def steering_matrix(scene: SlotScene, positions: np.ndarray) -> np.ndarray:
    """(1 + M, N) steering vectors of every link in a scene."""
    return np.exp(1j * (scene.horizontal_waves @ np.asarray(positions).reshape(-1, 2).T))


def hermitian_part(W: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    W = np.asarray(W, dtype=complex)
    scale = max(1.0, float(np.abs(W).max(initial=0.0)))
    if np.abs(W - W.conj().T).max(initial=0.0) > tol * scale:
        raise ValueError("matrix is not Hermitian")
    return 0.5 * (W + W.conj().T)


def received_power(W: np.ndarray, b_tilde: np.ndarray, geometry: ArrayGeometry | np.ndarray) -> float:
    """Quadratic form s^H W s for a Hermitian PSD ``W``."""
    W = hermitian_part(W)
    s = steering_vector(b_tilde, geometry)
    return float(np.real(s.conj() @ W @ s))


def snr(path_gain: float, noise_power: float, u: float) -> float:
    if not noise_power > 0:
        raise ValueError("noise power must be positive")
    return path_gain / noise_power * u


def channel_vector(scene: SlotScene, link: int, geometry: ArrayGeometry) -> np.ndarray:
    """Full channel including the deterministic propagation phase."""
    s = steering_vector(scene.wave_vectors[link], geometry)
    phase = np.exp(1j * 2.0 * math.pi * scene.distances[link] / scene.wavelength)
    return math.sqrt(scene.path_gains[link]) * phase * s


def link_rates(scene: SlotScene, positions: np.ndarray, W: np.ndarray) -> np.ndarray:
    """log2(1 + SNR) for every link (row 0 legitimate) under covariance ``W``."""
    S = steering_matrix(scene, positions)
    u = np.real(np.einsum("ln,nm,lm->l", S.conj(), W, S))
    return np.log2(1.0 + scene.gain_to_noise * np.maximum(u, 0.0))


def _as_covariance(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=complex)
    return np.outer(w, w.conj()) if w.ndim == 1 else hermitian_part(w)


def secrecy_rate(scene: SlotScene, geometry: ArrayGeometry | np.ndarray, w: np.ndarray) -> SlotRates:
    """Per-slot rates; ``w`` may be a beamformer vector or a covariance matrix.

    With no eavesdropper the secrecy rate equals the legitimate rate.
    """
    pos = geometry.positions if isinstance(geometry, ArrayGeometry) else geometry
    rates = link_rates(scene, pos, _as_covariance(w))
    legit, eaves = float(rates[0]), tuple(float(r) for r in rates[1:])
    cs = legit - max(eaves) if eaves else legit
    return SlotRates(legit, eaves, max(cs, 0.0))


def average_secrecy_rate(
    scenes: Sequence[SlotScene], geometry: ArrayGeometry | np.ndarray, plan: Sequence[np.ndarray]
) -> SecrecyReport:
    if len(scenes) != len(plan):
        raise ValueError(f"{len(scenes)} scenes but {len(plan)} beamformers")
    if not scenes:
        raise ValueError("no slots")
    per = tuple(secrecy_rate(sc, geometry, w) for sc, w in zip(scenes, plan))
    return SecrecyReport(per, float(np.mean([r.secrecy for r in per])))


def batch_secrecy_rates(scenes: Sequence[SlotScene], population: np.ndarray, plan: Sequence[np.ndarray]) -> np.ndarray:
    """Clamped secrecy rates for many geometries at once.

    ``population`` has shape (n_pop, 2N); returns (n_pop, P).  Beamformers
    must be vectors.
    """
    pop = np.asarray(population, dtype=float)
    n_pop = pop.shape[0]
    xy = pop.reshape(n_pop, -1, 2)
    out = np.empty((n_pop, len(scenes)))
    for p, (sc, w) in enumerate(zip(scenes, plan)):
        phase = xy @ sc.horizontal_waves.T  # (n_pop, N, L)
        amp = np.einsum("n,knl->kl", np.asarray(w).conj(), np.exp(1j * phase))
        rates = np.log2(1.0 + sc.gain_to_noise * np.abs(amp) ** 2)
        cs = rates[:, 0] - rates[:, 1:].max(axis=1) if rates.shape[1] > 1 else rates[:, 0]
        out[:, p] = np.maximum(cs, 0.0)
    return out


def beam_gain_map(
    geometry: ArrayGeometry, w: np.ndarray, kx: np.ndarray, ky: np.ndarray
) -> np.ndarray:
    """|w^H s|^2 over a grid of horizontal wave-vector components.

    Returns an array of shape ``(len(ky), len(kx))``.
    """
    kx = np.asarray(kx, dtype=float)
    ky = np.asarray(ky, dtype=float)
    pos = geometry.positions
    phase = pos[:, 0][:, None, None] * kx[None, None, :] + pos[:, 1][:, None, None] * ky[None, :, None]
    amp = np.einsum("n,nij->ij", np.asarray(w).conj(), np.exp(1j * phase))
    return np.abs(amp) ** 2


def write_beam_map_csv(path, kx: np.ndarray, ky: np.ndarray, gain: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kx", "ky", "gain"])
        for i, y in enumerate(ky):
            for j, x in enumerate(kx):
                w.writerow([fmt(x), fmt(y), fmt(gain[i, j])])


def write_geometry_csv(path: Path | str, geometry: ArrayGeometry, wavelength: float) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "x_m", "y_m", "x_lambda", "y_lambda"])
        for n, (x, y) in enumerate(geometry.positions, start=1):
            w.writerow([n, fmt(x), fmt(y), fmt(x / wavelength), fmt(y / wavelength)])
