"""Wall-time comparison of the ROM run against the full-order reference."""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass

from .scenario import Scenario
from .simulation import build_setup, full_order_reference, simulate

logger = logging.getLogger(__name__)

METHODS = ("rom_semi_explicit", "full_order_reference")


@dataclass(frozen=True)
class MethodTiming:
    name: str
    dof_count: int
    step_count: int
    wall_time: float
    contact_duration: float


@dataclass(frozen=True)
class BenchReport:
    """Per-method cost plus ROM construction overhead."""

    methods: tuple[MethodTiming, ...]
    rom_construction_s: float

    def by_name(self, name: str) -> MethodTiming:
        for m in self.methods:
            if m.name == name:
                return m
        raise KeyError(name)

    @property
    def speedup(self) -> float:
        """Full-order wall time over ROM wall time (time integration only)."""
        return (self.by_name("full_order_reference").wall_time
                / self.by_name("rom_semi_explicit").wall_time)

    @property
    def speedup_with_construction(self) -> float:
        return (self.by_name("full_order_reference").wall_time
                / (self.by_name("rom_semi_explicit").wall_time + self.rom_construction_s))

    @property
    def duration_disagreement(self) -> float:
        rom = self.by_name("rom_semi_explicit").contact_duration
        ref = self.by_name("full_order_reference").contact_duration
        return abs(rom - ref) / ref

    def lines(self) -> list[str]:
        out = [f"{'method':<22} {'dofs':>6} {'steps':>8} {'wall_s':>10} {'t_contact_us':>13}"]
        for m in self.methods:
            out.append(f"{m.name:<22} {m.dof_count:>6d} {m.step_count:>8d} "
                       f"{m.wall_time:>10.4f} {m.contact_duration * 1e6:>13.3f}")
        out.append(f"rom construction     {self.rom_construction_s:.4f} s")
        if len(self.methods) == 2:
            out.append(f"speedup              {self.speedup:.1f}x "
                       f"({self.speedup_with_construction:.1f}x incl. construction)")
            out.append(f"duration mismatch    {self.duration_disagreement:.2%}")
        return out


def run_bench(scenario: Scenario, methods=METHODS) -> BenchReport:
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown bench methods {sorted(unknown)}")
    t0 = time.perf_counter()
    setup = build_setup(scenario)
    _ = setup.system  # force ROM construction
    construction = time.perf_counter() - t0
    rows = []
    for name in methods:
        if name == "rom_semi_explicit":
            traj = simulate(scenario, setup)
            dofs, steps = setup.rom_dof_count, scenario.n_steps
        else:
            traj = full_order_reference(scenario, setup)
            dofs, steps = traj.meta["dof_count"], traj.meta["n_steps"]
        wall = traj.meta["wall_time_s"]
        if wall < 0.01:
            warnings.warn(f"{name} ran in {wall * 1e3:.2f} ms; timer resolution may "
                          "dominate the measurement", stacklevel=2)
        rows.append(MethodTiming(name, int(dofs), int(steps), float(wall),
                                 traj.contact_duration))
    return BenchReport(methods=tuple(rows), rom_construction_s=construction)
