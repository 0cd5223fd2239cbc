"""Monte Carlo simulation of horizontal Brownian motion with its stochastic

area, vertical Levy perturbations, and the group-valued Ornstein-Uhlenbeck
process, plus characteristic-function estimators.

Conventions (checked against the kernel module in the tests): Brownian
coordinates have variance ``2 t`` apiece, matching the sum-of-squares
generator; the vertical area is the Ito integral ``int omega(B, dB) / 2``,
whose variance at time t is exactly ``t^2`` on the first Heisenberg group; jumps ride
along the vertical coordinate and never feed back into the area.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .groups import CarnotGroup

__all__ = [
    "PathConfig",
    "CharFnEstimate",
    "simulate_levy_on_group",
    "simulate_levy_ou",
    "estimate_charfn",
    "worker_count",
]

CHUNK = 20_000


def worker_count():
    """Worker cap from the CARNOT_THREADS environment variable (default 1)."""
    try:
        return max(1, int(os.environ.get("CARNOT_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class PathConfig:
    horizon: float
    steps_per_unit: int = 4096
    paths: int = 10_000
    seed: int = 0
    antithetic: bool = False

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        k = self.steps_per_unit
        if k < 1 or (k & (k - 1)) != 0:
            raise ValueError("steps per unit time must be a power of two")
        if self.paths < 100:
            raise ValueError("need at least 100 paths")

    @property
    def steps(self):
        return max(1, int(round(self.steps_per_unit * self.horizon)))


def _chunks(total):
    out = []
    lo = 0
    while lo < total:
        out.append(min(CHUNK, total - lo))
        lo += CHUNK
    return out


def _map_chunks(fn, sizes, streams):
    workers = worker_count()
    if workers == 1:
        return [fn(size, rng) for size, rng in zip(sizes, streams)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, sizes, streams))


def _brownian_with_area(G, t, steps, size, rng, antithetic=False):
    """Terminal (B_t, area_t) with area = int omega(B, dB) / 2.

    Antithetic pairs flip the driving increments; the area is even under
    the flip, so antithetics only help the horizontal moments.
    """
    dt = t / steps
    scale = math.sqrt(2.0 * dt)
    half = (size + 1) // 2 if antithetic else size
    B = np.zeros((size, G.n))
    V = np.zeros((size, G.m))
    for _ in range(steps):
        dB = rng.standard_normal((half, G.n)) * scale
        if antithetic:
            dB = np.concatenate([dB, -dB], axis=0)[:size]
        V += 0.5 * G.omega(B, dB)
        B += dB
    return B, V


def simulate_levy_on_group(G: CarnotGroup, psi, cfg: PathConfig):
    """Terminal samples of the group-valued Levy process

        X(t) = (B(t), area(t) + Y(t)),

    horizontal Brownian motion with its stochastic area plus an independent
    vertical Levy increment.  Returns arrays (h, v) with one row per path.
    """
    t = cfg.horizon
    master = np.random.default_rng(cfg.seed)
    sizes = _chunks(cfg.paths)
    streams = master.spawn(len(sizes))

    def work(size, rng):
        B, V = _brownian_with_area(G, t, cfg.steps, size, rng, cfg.antithetic)
        if psi is not None and not psi.is_trivial:
            V = V + psi.sample_increments(t, rng, size)
        return B, V

    parts = _map_chunks(work, sizes, streams)
    H = np.concatenate([p[0] for p in parts], axis=0)
    V = np.concatenate([p[1] for p in parts], axis=0)
    return H, V


def simulate_levy_ou(G: CarnotGroup, psi, cfg: PathConfig, x0=None):
    """Terminal samples of the group Ornstein-Uhlenbeck process driven by

    the perturbed Levy process, via the exact-in-distribution update

        X(T) = dilate(e^{-T}) (h0, v0 - V_T)  *  (B_s, area_s),

    with ``V_T`` drawn from the time-deformed vertical law (characteristic
    function ``exp(psi_T)``) and ``s = (1 - e^{-2T}) / 2``.  Long horizons
    sample the stationary density.
    """
    T = cfg.horizon
    if psi is not None and not psi.is_trivial and not psi.in_N_log and T > 5.0:
        warnings.warn(
            "exponent lacks a logarithmic moment: no stationary law exists, "
            "long-horizon samples will not settle",
            stacklevel=2,
        )
    h0 = np.zeros(G.n) if x0 is None else np.asarray(x0[0], dtype=float)
    v0 = np.zeros(G.m) if x0 is None else np.asarray(x0[1], dtype=float)
    s = (1.0 - math.exp(-2.0 * T)) / 2.0
    steps = max(1, int(round(cfg.steps_per_unit * s)))
    master = np.random.default_rng(cfg.seed)
    sizes = _chunks(cfg.paths)
    streams = master.spawn(len(sizes))
    decay_h, decay_v = math.exp(-T), math.exp(-2.0 * T)

    def work(size, rng):
        B, A = _brownian_with_area(G, s, steps, size, rng, cfg.antithetic)
        vstart = np.broadcast_to(v0, (size, G.m)).copy()
        if psi is not None and not psi.is_trivial:
            vstart = vstart - psi.sample_deformed(T, rng, size)
        h = decay_h * h0 + B
        v = decay_v * vstart + A + 0.5 * G.omega(np.broadcast_to(decay_h * h0, B.shape), B)
        return h, v

    parts = _map_chunks(work, sizes, streams)
    H = np.concatenate([p[0] for p in parts], axis=0)
    V = np.concatenate([p[1] for p in parts], axis=0)
    return H, V


@dataclass
class CharFnEstimate:
    lam: np.ndarray          # (K, m) evaluation frequencies
    values: np.ndarray       # complex estimates
    stderr: np.ndarray       # combined standard errors
    paths: int

    def check_modulus(self):
        return bool(np.all(np.abs(self.values) <= 1.0 + 3.0 * self.stderr))


def estimate_charfn(samples, lam_panel):
    """Empirical characteristic function of sample rows at the given panel."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    lam = np.atleast_2d(np.asarray(lam_panel, dtype=float))
    if lam.shape[1] != samples.shape[1]:
        lam = lam.reshape(-1, samples.shape[1])
    n = samples.shape[0]
    if n == 0:
        raise ValueError("no samples")
    phases = np.exp(1j * samples @ lam.T)
    values = phases.mean(axis=0)
    se = np.sqrt(phases.real.var(axis=0) / n) + np.sqrt(phases.imag.var(axis=0) / n)
    return CharFnEstimate(lam=lam, values=values, stderr=se, paths=n)
