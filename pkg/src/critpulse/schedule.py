"""Control-pulse schedules: coupling ramp, drive fields and action encoding.

A schedule covers the window [0, T] discretized into K equal segments with
grid points t_k = k T / K, k = 0..K.  Each control field carries one
amplitude per segment (zero-order hold): segment k in [t_{k-1}, t_k] uses
``amplitudes[k-1]``.  The first and last amplitudes are clamped to zero so
every drive vanishes at t = 0 and t = T.  The carrier cos(w_d t + phi) is
evaluated continuously.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import DomainError

RAMP_BC_TOL = 1e-12


class ControlKind(Enum):
    """The five drive operators, indexed as in the control-field list."""

    DISPLACEMENT = 1   # (a + a^+)
    QUADRATURE_SQ = 2  # (a + a^+)^2
    PHOTON_NUMBER = 3  # a^+ a
    QUBIT_Z = 4        # sigma_z
    QUBIT_X = 5        # sigma_x

    @property
    def json_name(self) -> str:
        return _KIND_NAMES[self]


_KIND_NAMES = {
    ControlKind.DISPLACEMENT: "displacement",
    ControlKind.QUADRATURE_SQ: "quadrature2",
    ControlKind.PHOTON_NUMBER: "photon_number",
    ControlKind.QUBIT_Z: "qubit_z",
    ControlKind.QUBIT_X: "qubit_x",
}
_KIND_FROM_NAME = {v: k for k, v in _KIND_NAMES.items()}

ALL_KINDS = tuple(ControlKind)


@dataclass(frozen=True)
class CouplingRamp:
    """g(t) = a0 + a1 t + a2 t^2 with g(0) = g_start and g(T) = g_end."""

    a0: float
    a1: float
    a2: float
    duration: float
    g_start: float
    g_end: float

    def __post_init__(self):
        if self.duration <= 0:
            raise DomainError(f"ramp duration must be > 0, got {self.duration}")
        if abs(self.a0 - self.g_start) > RAMP_BC_TOL:
            raise DomainError("ramp start boundary violated")
        end = self.a0 + self.a1 * self.duration + self.a2 * self.duration**2
        if abs(end - self.g_end) > RAMP_BC_TOL * max(1.0, abs(self.g_end)):
            raise DomainError(f"ramp end boundary violated: g(T) = {end!r}")

    def __call__(self, t: float) -> float:
        return eval_ramp(self, t)


def make_ramp(g0: float, gc: float, T: float, free_a1: float = 0.0) -> CouplingRamp:
    """Quadratic ramp through (0, g0) and (T, gc); a1 is the free coefficient."""
    if T <= 0:
        raise DomainError(f"ramp duration must be > 0, got {T}")
    a2 = (gc - g0 - free_a1 * T) / (T * T)
    return CouplingRamp(a0=g0, a1=free_a1, a2=a2, duration=T, g_start=g0, g_end=gc)


def eval_ramp(ramp: CouplingRamp, t: float) -> float:
    if not -RAMP_BC_TOL <= t <= ramp.duration + RAMP_BC_TOL:
        raise DomainError(f"t = {t} outside [0, {ramp.duration}]")
    return ramp.a0 + ramp.a1 * t + ramp.a2 * t * t


@dataclass(frozen=True)
class ControlField:
    kind: ControlKind
    phase: float
    amplitudes: np.ndarray  # one value per segment, ends clamped to zero

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=float)
        object.__setattr__(self, "amplitudes", amps)
        if amps.ndim != 1 or len(amps) < 2:
            raise DomainError("amplitude sequence needs at least 2 entries")
        if amps[0] != 0.0 or amps[-1] != 0.0:
            raise DomainError("first and last amplitudes must be exactly zero")


@dataclass(frozen=True)
class PulseSchedule:
    duration: float
    steps: int
    drive_freq: float
    ramp: CouplingRamp
    fields: tuple[ControlField, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(self.fields))
        if self.duration <= 0 or self.steps < 2:
            raise DomainError("schedule needs duration > 0 and steps >= 2")
        if self.drive_freq < 0:
            raise DomainError("drive_freq must be >= 0")
        if abs(self.ramp.duration - self.duration) > RAMP_BC_TOL:
            raise DomainError("ramp duration differs from schedule duration")
        for f in self.fields:
            if len(f.amplitudes) != self.steps:
                raise DomainError(
                    f"field {f.kind.name} has {len(f.amplitudes)} amplitudes, "
                    f"schedule has {self.steps} segments"
                )

    @property
    def grid(self) -> np.ndarray:
        """t_k = k T / K for k = 0..K."""
        return np.linspace(0.0, self.duration, self.steps + 1)

    def segment_of(self, t: float) -> int:
        """1-based index of the segment containing t."""
        if not 0 <= t <= self.duration + RAMP_BC_TOL:
            raise DomainError(f"t = {t} outside schedule window")
        return min(int(t * self.steps / self.duration) + 1, self.steps)

    def with_field_mask(self, mask) -> "PulseSchedule":
        """Copy with the amplitudes of unmasked fields zeroed."""
        new_fields = []
        for f, keep in zip(self.fields, mask):
            if keep:
                new_fields.append(f)
            else:
                new_fields.append(replace(f, amplitudes=np.zeros_like(f.amplitudes)))
        return replace(self, fields=tuple(new_fields))


def drive_value(fld: ControlField, schedule: PulseSchedule, t: float) -> float:
    """Lambda_k cos(w_d t + phi) with the zero-order-hold amplitude of segment k."""
    k = schedule.segment_of(t)
    return float(fld.amplitudes[k - 1] * np.cos(schedule.drive_freq * t + fld.phase))


# ---------------------------------------------------------------------------
# action encoding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ActionBounds:
    """Per-parameter (min, max) intervals for the affine [-1, 1] action map.

    ``ramp_a1`` is expressed in units of (g_end - g_start)/T so its physical
    bound tracks whatever duration the agent picks; (0, 2) brackets the
    linear ramp, which sits at exactly 1.
    """

    duration: tuple[float, float] = (1.0, 6.0)
    drive_freq: tuple[float, float] = (0.0, 5.0)
    phase: tuple[float, float] = (0.0, 2.0 * np.pi)
    amplitude: tuple[float, float] = (-2.0, 2.0)
    ramp_a1: tuple[float, float] = (0.0, 2.0)

    def __post_init__(self):
        for name in ("duration", "drive_freq", "phase", "amplitude", "ramp_a1"):
            lo, hi = getattr(self, name)
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise DomainError(f"bounds for {name} must be finite with min < max")

    @property
    def amp_max(self) -> float:
        return max(abs(self.amplitude[0]), abs(self.amplitude[1]))


def action_dim(K: int, field_mask, free_duration: bool = True, free_a1: bool = True) -> int:
    n_active = int(np.sum(np.asarray(field_mask, dtype=bool)))
    n_global = (1 if free_duration else 0) + 1 + (1 if free_a1 else 0) + n_active
    return n_global + n_active * (K - 2)


def _affine_to(raw: float, lo: float, hi: float) -> float:
    return lo + (float(raw) + 1.0) * 0.5 * (hi - lo)


def _affine_from(value: float, lo: float, hi: float) -> float:
    return (float(value) - lo) * 2.0 / (hi - lo) - 1.0


def decode_action(
    raw: np.ndarray,
    bounds: ActionBounds,
    K: int,
    field_mask,
    g0: float,
    gc: float,
    fixed_duration: float | None = None,
    fixed_a1_linear: bool = False,
) -> PulseSchedule:
    """Map a raw vector in [-1, 1]^d to a schedule.

    Layout: [T?] [w_d] [a1?] [phi_i for active i] [interior amplitudes field
    by field].  Components for T and a1 are absent when the duration is fixed
    or the ramp is frozen to linear.  Raw values are clipped to [-1, 1].
    """
    mask = np.asarray(field_mask, dtype=bool)
    if mask.shape != (len(ALL_KINDS),):
        raise DomainError(f"field_mask needs {len(ALL_KINDS)} entries")
    free_duration = fixed_duration is None
    free_a1 = not fixed_a1_linear
    d = action_dim(K, mask, free_duration, free_a1)
    raw = np.clip(np.asarray(raw, dtype=float), -1.0, 1.0)
    if raw.shape != (d,):
        raise DomainError(f"action has shape {raw.shape}, expected ({d},)")

    pos = 0
    if free_duration:
        T = _affine_to(raw[pos], *bounds.duration)
        pos += 1
    else:
        T = float(fixed_duration)
    wd = _affine_to(raw[pos], *bounds.drive_freq)
    pos += 1
    if free_a1:
        a1_units = _affine_to(raw[pos], *bounds.ramp_a1)
        pos += 1
    else:
        a1_units = 1.0  # linear ramp
    a1 = a1_units * (gc - g0) / T

    phases = []
    for active in mask:
        if active:
            phases.append(_affine_to(raw[pos], *bounds.phase))
            pos += 1
    fields = []
    pi = 0
    for kind, active in zip(ALL_KINDS, mask):
        amps = np.zeros(K)
        phase = 0.0
        if active:
            inner = raw[pos : pos + K - 2]
            pos += K - 2
            amps[1 : K - 1] = [_affine_to(v, *bounds.amplitude) for v in inner]
            phase = phases[pi]
            pi += 1
        fields.append(ControlField(kind=kind, phase=phase, amplitudes=amps))

    ramp = make_ramp(g0, gc, T, free_a1=a1)
    return PulseSchedule(
        duration=T, steps=K, drive_freq=wd, ramp=ramp, fields=tuple(fields)
    )


def encode_action(
    schedule: PulseSchedule,
    bounds: ActionBounds,
    field_mask,
    fixed_duration: float | None = None,
    fixed_a1_linear: bool = False,
) -> np.ndarray:
    """Inverse of :func:`decode_action` for schedules inside the bounds."""
    mask = np.asarray(field_mask, dtype=bool)
    out = []
    if fixed_duration is None:
        out.append(_affine_from(schedule.duration, *bounds.duration))
    out.append(_affine_from(schedule.drive_freq, *bounds.drive_freq))
    if not fixed_a1_linear:
        g0, gc, T = schedule.ramp.g_start, schedule.ramp.g_end, schedule.duration
        a1_units = schedule.ramp.a1 * T / (gc - g0)
        out.append(_affine_from(a1_units, *bounds.ramp_a1))
    for f, active in zip(schedule.fields, mask):
        if active:
            out.append(_affine_from(f.phase, *bounds.phase))
    for f, active in zip(schedule.fields, mask):
        if active:
            out.extend(_affine_from(v, *bounds.amplitude) for v in f.amplitudes[1:-1])
    return np.array(out)


# ---------------------------------------------------------------------------
# JSON checkpoint format
# ---------------------------------------------------------------------------

def schedule_to_dict(schedule: PulseSchedule) -> dict:
    return {
        "duration": schedule.duration,
        "steps": schedule.steps,
        "drive_freq": schedule.drive_freq,
        "ramp": {
            "a0": schedule.ramp.a0,
            "a1": schedule.ramp.a1,
            "a2": schedule.ramp.a2,
            "g0": schedule.ramp.g_start,
            "gc": schedule.ramp.g_end,
        },
        "fields": [
            {
                "kind": f.kind.json_name,
                "phase": f.phase,
                "amplitudes": [float(v) for v in f.amplitudes],
            }
            for f in schedule.fields
        ],
    }


def schedule_from_dict(doc: dict) -> PulseSchedule:
    try:
        ramp_doc = doc["ramp"]
        ramp = CouplingRamp(
            a0=float(ramp_doc["a0"]),
            a1=float(ramp_doc["a1"]),
            a2=float(ramp_doc["a2"]),
            duration=float(doc["duration"]),
            g_start=float(ramp_doc["g0"]),
            g_end=float(ramp_doc["gc"]),
        )
        fields = tuple(
            ControlField(
                kind=_KIND_FROM_NAME[fd["kind"]],
                phase=float(fd["phase"]),
                amplitudes=np.asarray(fd["amplitudes"], dtype=float),
            )
            for fd in doc["fields"]
        )
        return PulseSchedule(
            duration=float(doc["duration"]),
            steps=int(doc["steps"]),
            drive_freq=float(doc["drive_freq"]),
            ramp=ramp,
            fields=fields,
        )
    except KeyError as exc:
        raise DomainError(f"schedule document missing field {exc.args[0]!r}") from exc


def save_schedule(schedule: PulseSchedule, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schedule_to_dict(schedule), fh, indent=2)
        fh.write("\n")


def load_schedule(path) -> PulseSchedule:
    with open(path, encoding="utf-8") as fh:
        return schedule_from_dict(json.load(fh))
