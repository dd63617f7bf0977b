"""Command-line entry point ``beamimpact``.

Exit status: 0 success, 2 configuration/usage error, 3 file-system error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import outputs, post
from .assembly import ModelError
from .bench import METHODS, run_bench
from .cms import ReductionError, export_rom
from .contact import ContactSolverError, InstabilityError
from .matrix_io import MatrixFileError, export_matrices
from .scenario import ConfigError, Scenario, format_scenario, parse_scenario
from .simulation import build_setup, hertz_oracle, simulate

logger = logging.getLogger("beamimpact")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
THREADS_ENV = "BEAMIMPACT_THREADS"


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory not writable: {out}")
    return out


def _load(args) -> Scenario:
    return parse_scenario(args.config, strict=not args.lenient)


def write_run(traj, scenario: Scenario, out: Path) -> list[Path]:
    files = [outputs.write_trajectory(traj, out / "trajectory.csv",
                                      downsample=scenario.outputs.downsample),
             outputs.write_events(traj.events, out / "events.txt")]
    if traj.contact_window is not None:
        files.append(outputs.write_modal_summary(post.summarize(traj),
                                                 out / "modal_summary.csv"))
        iS, iE = (traj.index(x) for x in traj.contact_window)
        f, X = post.pulse_spectrum(traj.f_c[iS:iE + 1], traj.dt)
        files.append(outputs.write_spectrum(f, X, out / "pulse_spectrum.csv"))
    files.append(outputs.write_manifest(out, scenario, files, {"method": traj.method}))
    return files


def cmd_modes(args) -> int:
    s = _load(args)
    setup = build_setup(s)
    b = setup.basis
    r = b.rigid_count
    labels = ["R"] * r + b.elastic_labels()
    keep = setup.retained
    print(f"# {s.beam.bc}, n_elem={s.beam.n_elem}, {b.n_modes} modes, "
          f"{keep.size} retained below {s.rom.f_cut_hz:g} Hz")
    for k in keep:
        print(f"{labels[k]:>4} {b.frequencies_hz[k]:14.3f} Hz")
    if args.out:
        out = _out_dir(args.out)
        f = outputs.write_modes(b.frequencies_hz[keep], [labels[k] for k in keep],
                                out / "modes.csv")
        outputs.write_manifest(out, s, [f])
    return EXIT_OK


def cmd_rom(args) -> int:
    s = _load(args)
    setup = build_setup(s)
    out = _out_dir(args.out)
    files = export_matrices(setup.beam, out / "beam")
    files += export_rom(setup.beam_rom, out / "beam")
    files += export_rom(setup.sphere_rom, out / "sphere")
    outputs.write_manifest(out, s, files, {"rom_dofs": setup.rom_dof_count,
                                           "compliance_m_per_n": repr(setup.compliance)})
    print(f"ROM: {setup.beam_rom.n_boundary} boundary + {setup.beam_rom.n_modes} modes "
          f"(beam), compliance {setup.compliance:.6e} m/N -> {out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    s = _load(args)
    out = _out_dir(args.out)
    traj = simulate(s)
    write_run(traj, s, out)
    _report(traj)
    return EXIT_OK


def cmd_oracle(args) -> int:
    s = _load(args)
    out = _out_dir(args.out)
    traj = hertz_oracle(s, rigid_target=args.rigid)
    write_run(traj, s, out)
    _report(traj)
    return EXIT_OK


def _report(traj) -> None:
    ev = traj.events
    if ev.contact_window is None:
        print(f"{traj.method}: no contact")
        return
    print(f"{traj.method}: contact {traj.contact_duration * 1e6:.2f} us, "
          f"peak force {traj.f_c.max():.2f} N, sub-impacts {ev.sub_impacts}")


def cmd_post(args) -> int:
    cols = outputs.read_trajectory(args.traj)
    out = _out_dir(args.out)
    t, f_c, v = cols["t"], cols["f_c"], cols["v_sph"]
    dt = float(t[1] - t[0])
    files = []
    from .trajectory import detect_events
    events = detect_events(t, f_c)
    files.append(outputs.write_events(events, out / "events.txt"))
    mass = args.sphere_mass
    s = None
    if args.config:
        s = _load(args)
        mass = s.sphere.mass_kg
    t_f, f_v = post.force_from_sphere_velocity(
        v, mass, dt, resample_rate=post.RIG_SAMPLE_RATE if args.rig_rate else None)
    files.append(outputs._write_rows(out / "force_from_velocity.csv", ["t", "f_c"],
                                     zip(t_f, f_v)))
    if events.contact_window is not None:
        iS, iE = (int(np.argmin(np.abs(t - x))) for x in events.contact_window)
        f, X = post.pulse_spectrum(f_c[iS:iE + 1], dt)
        files.append(outputs.write_spectrum(f, X, out / "pulse_spectrum.csv"))
        if s is not None:
            setup = build_setup(s)
            w = setup.retained_frequencies
            eta, eta_dot = post.duhamel_response(f_c[iS:iE + 1], dt, w, setup.impact_shape)
            r = setup.basis.rigid_count
            e = post.modal_energy(eta, eta_dot, w)
            e_pre = 0.5 * mass * v[iS] ** 2
            rk = post.modal_restitution(v[iS], v[iE], setup.impact_shape[r:], eta_dot[r:])
            summ = post.ModalSummary(
                labels=tuple(setup.basis.elastic_labels()[:w.size - r]),
                frequencies_hz=w[r:] / (2 * np.pi), energy=e[r:], energy_fraction=e[r:] / e_pre,
                restitution=rk, sphere_energy_pre=e_pre,
                sphere_energy_post=0.5 * mass * v[iE] ** 2,
                beam_rigid_energy=float(e[:r].sum()), t_start=float(t[iS]), t_end=float(t[iE]))
            files.append(outputs.write_modal_summary(summ, out / "modal_summary.csv"))
    if s is not None:
        outputs.write_manifest(out, s, files, {"source": Path(args.traj).name})
    print(f"post-processed {args.traj} -> {out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    s = _load(args)
    if args.n_elem:
        s = s.replace(beam={"n_elem": args.n_elem})
    report = run_bench(s, methods=tuple(args.methods))
    print("\n".join(report.lines()))
    return EXIT_OK


def _batch_one(path: str, out_root: Path, strict: bool) -> tuple[str, int, str]:
    try:
        s = parse_scenario(path, strict=strict)
        out = _out_dir(out_root / s.name)
        traj = simulate(s)
        write_run(traj, s, out)
        return path, EXIT_OK, f"{traj.contact_duration * 1e6:.2f} us"
    except Exception as exc:  # reported per scenario
        return path, _exit_code(exc), str(exc)


def cmd_batch(args) -> int:
    workers = int(os.environ.get(THREADS_ENV, "0")) or min(4, len(args.configs))
    out_root = _out_dir(args.out)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda p: _batch_one(p, out_root, not args.lenient),
                                args.configs))
    worst = EXIT_OK
    for path, code, msg in results:
        print(f"{path}: {'ok' if code == EXIT_OK else 'FAILED'} ({msg})")
        worst = max(worst, code)
    return worst


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (ConfigError, MatrixFileError)):
        return EXIT_CONFIG
    if isinstance(exc, OSError):
        return EXIT_IO
    if isinstance(exc, (ReductionError, ContactSolverError, InstabilityError, ModelError,
                        post.PostError, ArithmeticError, AssertionError,
                        np.linalg.LinAlgError, ValueError)):
        return EXIT_NUMERIC
    raise exc


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="beamimpact",
        description="Sphere-on-beam impact with massless-boundary reduced models.")
    ap.add_argument("--print-defaults", action="store_true",
                    help="print the default scenario config and exit")
    mode = ap.add_mutually_exclusive_group()
    mode.add_argument("--strict", dest="lenient", action="store_false",
                      help="reject unknown config keys (default)")
    mode.add_argument("--lenient", dest="lenient", action="store_true",
                      help="warn about unknown config keys instead of failing")
    ap.set_defaults(lenient=False)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command")

    p = sub.add_parser("modes", help="list beam natural frequencies")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("rom", help="export FE matrices and reduced models")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rom)

    p = sub.add_parser("simulate", help="semi-explicit ROM impact simulation")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle", help="Hertz contact reference on the retained modes")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rigid", action="store_true", help="rigid immovable target")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("post", help="post-process a trajectory CSV")
    p.add_argument("--traj", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="scenario for modal quantities (Duhamel route)")
    p.add_argument("--sphere-mass", type=float, default=5.58e-3,
                   help="sphere mass in kg when no config is given")
    p.add_argument("--rig-rate", action="store_true",
                   help="resample v_sph to 102.4 kHz before differentiating")
    p.set_defaults(func=cmd_post)

    p = sub.add_parser("bench", help="ROM vs full-order wall time")
    p.add_argument("--config", required=True)
    p.add_argument("--n-elem", type=int, default=0, help="override beam.n_elem")
    p.add_argument("--methods", nargs="+", default=list(METHODS), choices=METHODS)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("batch", help="simulate several scenarios concurrently")
    p.add_argument("configs", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_batch)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.print_defaults:
        sys.stdout.write(format_scenario(Scenario(name="defaults")))
        return EXIT_OK
    if not getattr(args, "func", None):
        ap.print_help()
        return EXIT_CONFIG
    try:
        return args.func(args)
    except Exception as exc:
        try:
            code = _exit_code(exc)
        except Exception:
            raise
        logger.error("%s: %s", type(exc).__name__, exc)
        return code


if __name__ == "__main__":
    sys.exit(main())
