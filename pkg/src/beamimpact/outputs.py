"""CSV, event-log and manifest writers for simulation artifacts.

All files are deterministic functions of the scenario: no timestamps or
wall times are written, so reruns reproduce identical checksums.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from . import __version__
from .post import RIG_SAMPLE_RATE, FrfEstimate, ModalSummary
from .scenario import Scenario, format_scenario
from .trajectory import EventLog, Trajectory

FLOAT = "%.17g"


def _fmt(x) -> str:
    return FLOAT % x


def _write_rows(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    return path


def trajectory_columns(traj: Trajectory) -> list[str]:
    return (["t", "f_c", "v_sph"] + [f"v_{p}" for p in traj.probe_names]
            + [f"lambda_{j + 1}" for j in range(traj.lam.shape[1])])


def write_trajectory(traj: Trajectory, path, downsample: bool = False) -> Path:
    """Trajectory CSV ``t, f_c, v_sph, v_P.., lambda_..``.

    With ``downsample`` the rows are linearly resampled to the rig's
    102.4 kHz rate.
    """
    data = np.column_stack([traj.t, traj.f_c, traj.v_sph, traj.probe_velocity, traj.lam])
    if downsample:
        t_new = np.arange(0.0, traj.t[-1] + 0.5 / RIG_SAMPLE_RATE, 1.0 / RIG_SAMPLE_RATE)
        t_new = t_new[t_new <= traj.t[-1]]
        data = np.column_stack([t_new] + [np.interp(t_new, traj.t, data[:, j])
                                          for j in range(1, data.shape[1])])
    return _write_rows(Path(path), trajectory_columns(traj), data)


def read_trajectory(path) -> dict:
    """Columns of a trajectory CSV as a name -> array dict."""
    path = Path(path)
    with open(path, newline="") as fh:
        header = next(csv.reader(fh))
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != len(header) or header[:3] != ["t", "f_c", "v_sph"]:
        raise ValueError(f"{path}: not a trajectory CSV (header {header})")
    return {name: data[:, j] for j, name in enumerate(header)}


def write_modal_summary(summary: ModalSummary, path) -> Path:
    rows = [(str(k + 1), lb, f, e, ef, r) for k, (lb, f, e, ef, r) in enumerate(zip(
        summary.labels, summary.frequencies_hz, summary.energy,
        summary.energy_fraction, summary.restitution))]
    return _write_rows(Path(path), ["mode", "label", "freq_hz", "E_mod_J", "E_frac", "r_k"],
                       rows)


def write_frf(frf: FrfEstimate, path) -> Path:
    H = frf.values
    rows = zip(frf.frequencies, H.real, H.imag, np.abs(H), np.angle(H))
    return _write_rows(Path(path), ["f_hz", "re", "im", "mag", "phase"], rows)


def write_spectrum(freqs, spectrum, path) -> Path:
    rows = zip(freqs, spectrum.real, spectrum.imag, np.abs(spectrum))
    return _write_rows(Path(path), ["f_hz", "re", "im", "mag"], rows)


def write_events(events: EventLog, path) -> Path:
    path = Path(path)
    path.write_text("\n".join(events.lines()) + "\n")
    return path


def write_modes(freqs_hz, labels, path) -> Path:
    return _write_rows(Path(path), ["mode", "label", "freq_hz"],
                       [(str(k + 1), lb, f) for k, (lb, f) in enumerate(zip(labels, freqs_hz))])


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, scenario: Scenario, files, extra: dict | None = None) -> Path:
    """``manifest.json``: config echo, code version, assumptions and file checksums."""
    out_dir = Path(out_dir)
    manifest = {
        "package": "beamimpact",
        "version": __version__,
        "scenario": scenario.name,
        "config": format_scenario(scenario).splitlines(),
        "assumptions": [
            "probe/impact point coordinates are fractions of the beam length "
            "(points.p*_frac); the reference drawing gives no coordinates",
            "beam ends are ideally clamped or free; adhesive layers are not modeled",
        ],
        "files": {Path(f).name: sha256(f) for f in sorted(map(str, files))},
    }
    if extra:
        manifest.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
