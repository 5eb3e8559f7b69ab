"""Shaped training reward: log-fidelity gain minus drive penalties.

total = r_fid - z_amp * P_amp - z_freq * P_freq - z_smooth * P_smooth with

    r_fid    = (a + b F^4) * (-log10(1 - F))
    P_amp    = sum_i (1/n) sum_k exp(|Lambda_k,i|)
    P_freq   = exp(w_d)
    P_smooth = sum_i [ sum_k (dLambda)^2 + 2 sum_k (d2Lambda)^2 ]

The fidelity is clamped below 1 so the log stays finite; difference stencils
stop at the last well-defined index.  By default the amplitude penalty uses
|Lambda| (a literal mode without the absolute value is available, which
rewards large negative amplitudes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .schedule import PulseSchedule


@dataclass(frozen=True)
class RewardConfig:
    a: float = 1.0
    b: float = 4.0
    zeta_amp: float = 1e-3
    zeta_freq: float = 1e-2
    zeta_smooth: float = 1e-3
    f_clamp: float = 1.0 - 1e-10
    abs_amp: bool = True

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise DomainError("a and b must be positive")
        if not 0.0 < self.f_clamp < 1.0:
            raise DomainError("f_clamp must be in (0, 1)")
        if min(self.zeta_amp, self.zeta_freq, self.zeta_smooth) < 0:
            raise DomainError("penalty weights must be non-negative")


@dataclass(frozen=True)
class RewardBreakdown:
    r_fid: float
    p_amp: float
    p_freq: float
    p_smooth: float
    total: float


def fidelity_reward(F: float, cfg: RewardConfig) -> float:
    if not 0.0 <= F <= 1.0:
        raise DomainError(f"fidelity {F} outside [0, 1]")
    f = min(F, cfg.f_clamp)
    return (cfg.a + cfg.b * f**4) * (-math.log10(1.0 - f))


def _active_fields(schedule: PulseSchedule):
    """Fields with any nonzero amplitude; all fields if every one is silent."""
    active = [f for f in schedule.fields if np.any(f.amplitudes != 0.0)]
    return active if active else list(schedule.fields)


def amp_penalty(schedule: PulseSchedule, cfg: RewardConfig, active=None) -> float:
    """``active`` (an iterable of fields) overrides the nonzero-amplitude heuristic."""
    fields = list(active) if active is not None else _active_fields(schedule)
    n = len(fields)
    if n == 0:
        return 0.0
    total = 0.0
    for f in fields:
        lam = np.abs(f.amplitudes) if cfg.abs_amp else f.amplitudes
        total += float(np.sum(np.exp(lam))) / n
    return total


def freq_penalty(omega_d: float) -> float:
    if omega_d < 0:
        raise DomainError("drive frequency must be >= 0")
    return math.exp(omega_d)


def smooth_penalty(schedule: PulseSchedule) -> float:
    total = 0.0
    for f in _active_fields(schedule):
        lam = f.amplitudes
        d1 = np.diff(lam)
        d2 = np.diff(lam, n=2)
        total += float(np.sum(d1 * d1) + 2.0 * np.sum(d2 * d2))
    return total


def total_reward(F: float, schedule: PulseSchedule, cfg: RewardConfig, active=None) -> RewardBreakdown:
    r = fidelity_reward(F, cfg)
    pa = amp_penalty(schedule, cfg, active=active)
    pf = freq_penalty(schedule.drive_freq)
    ps = smooth_penalty(schedule)
    return RewardBreakdown(
        r_fid=r,
        p_amp=pa,
        p_freq=pf,
        p_smooth=ps,
        total=r - cfg.zeta_amp * pa - cfg.zeta_freq * pf - cfg.zeta_smooth * ps,
    )
