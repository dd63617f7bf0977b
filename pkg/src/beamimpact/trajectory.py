"""Simulation output container and contact event detection."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(eq=False)
class EventLog:
    """Contact windows ``[(t_on, t_off), ...]`` after coalescence.

    ``pulses`` holds the raw windows before coalescence. ``t_on`` is the
    last sample with zero force before contact, ``t_off`` the first
    sample with zero force after it.
    """

    windows: list[tuple[float, float]]
    pulses: list[tuple[float, float]]
    coalescence: float

    @property
    def sub_impacts(self) -> int:
        return max(len(self.windows) - 1, 0)

    @property
    def contact_window(self) -> tuple[float, float] | None:
        return self.windows[0] if self.windows else None

    def lines(self) -> list[str]:
        out = []
        for on, off in self.windows:
            out.append(f"onset t={on:.9e}")
            out.append(f"release t={off:.9e}")
        out.append(f"windows {len(self.windows)}")
        out.append(f"sub_impacts {self.sub_impacts}")
        return out


def contact_pulses(t, f_c) -> list[tuple[float, float]]:
    """Raw windows of ``f_c > 0``; open windows end at the last sample."""
    t = np.asarray(t)
    on = np.asarray(f_c) > 0.0
    pulses = []
    n = len(on)
    k = 0
    while k < n:
        if on[k]:
            start = k
            while k < n and on[k]:
                k += 1
            t_on = t[start - 1] if start > 0 else t[start]
            t_off = t[k] if k < n else t[n - 1]
            pulses.append((float(t_on), float(t_off)))
        else:
            k += 1
    return pulses


def detect_events(t, f_c, coalescence: float = 5e-6) -> EventLog:
    """Contact windows from a force history.

    Pulses separated by less than ``coalescence`` seconds are merged into
    one window; every further window counts as a sub-impact.
    """
    pulses = contact_pulses(t, f_c)
    windows: list[tuple[float, float]] = []
    for on, off in pulses:
        if windows and on - windows[-1][1] < coalescence:
            windows[-1] = (windows[-1][0], off)
        else:
            windows.append((on, off))
    return EventLog(windows=windows, pulses=pulses, coalescence=coalescence)


@dataclass(eq=False)
class Trajectory:
    """Time series of one impact simulation.

    ``beam_eta``/``beam_eta_dot`` are the coordinates of the retained beam
    normal modes (columns follow ``mode_frequencies``; the first
    ``rigid_count`` are rigid-body modes). ``impact_shape`` holds the
    mass-normalized mode shapes at the impact dof.
    """

    method: str
    t: np.ndarray
    f_c: np.ndarray
    v_sph: np.ndarray
    lam: np.ndarray
    probe_names: tuple[str, ...]
    probe_velocity: np.ndarray
    beam_eta: np.ndarray
    beam_eta_dot: np.ndarray
    mode_frequencies: np.ndarray
    impact_shape: np.ndarray
    rigid_count: int
    energy: np.ndarray
    sphere_mass: float
    beam_momentum: np.ndarray | None = None
    residual: np.ndarray | None = None
    meta: dict = field(default_factory=dict)
    coalescence: float = 5e-6

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def events(self) -> EventLog:
        return detect_events(self.t, self.f_c, self.coalescence)

    @property
    def contact_window(self) -> tuple[float, float] | None:
        return self.events.contact_window

    @property
    def contact_duration(self) -> float:
        w = self.contact_window
        if w is None:
            raise ValueError("no contact occurred")
        return w[1] - w[0]

    def index(self, time: float) -> int:
        return int(np.argmin(np.abs(self.t - time)))

    @property
    def sphere_momentum(self) -> np.ndarray:
        return self.sphere_mass * self.v_sph

    @property
    def elastic_labels(self) -> list[str]:
        return [f"{k + 1}F" for k in range(len(self.mode_frequencies) - self.rigid_count)]
