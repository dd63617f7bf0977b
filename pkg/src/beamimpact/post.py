"""Modal evaluation of impact trajectories and measurement-style signals.

Modal energies use mass-normalized modes, ``E_k = (eta_dot_k^2 +
omega_k^2 eta_k^2) / 2``. The modal coefficient of restitution compares
the sphere's rebound velocity with the velocity of mode ``k`` at the
impact point at the end of contact, relative to the impact velocity.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .trajectory import Trajectory

logger = logging.getLogger(__name__)

RIG_SAMPLE_RATE = 102.4e3


class PostError(ValueError):
    """Invalid input to a post-processing operation."""


def modal_energy(eta, eta_dot, omega):
    """Energy of mass-normalized modal coordinates, ``(eta_dot^2 + omega^2 eta^2) / 2``."""
    eta = np.asarray(eta, dtype=float)
    eta_dot = np.asarray(eta_dot, dtype=float)
    omega = np.asarray(omega, dtype=float)
    return 0.5 * (eta_dot ** 2 + omega ** 2 * eta ** 2)


def project_to_modal(q, q_dot, shapes, mass_matrix):
    """Modal coordinates ``eta = Phi^T M q`` (rows of ``q`` may be time samples)."""
    shapes = np.asarray(shapes, dtype=float)
    M = np.asarray(mass_matrix, dtype=float)
    q = np.asarray(q, dtype=float)
    q_dot = np.asarray(q_dot, dtype=float)
    n = M.shape[0]
    if shapes.shape[0] != n or q.shape[-1] != n or q_dot.shape[-1] != n:
        raise PostError(f"dimension mismatch: model has {n} dofs, "
                        f"q has {q.shape[-1]}, shapes have {shapes.shape[0]} rows")
    P = shapes.T @ M
    return q @ P.T, q_dot @ P.T


def modal_restitution(v_sph_start: float, v_sph_end: float, phi_p, eta_dot_end):
    """Per-mode restitution ``-(v_sph(t_E) - phi_k(P) eta_dot_k(t_E)) / v_sph(t_S)``.

    ``v_sph_start`` is the (negative, downward) sphere velocity at contact
    onset.
    """
    if v_sph_start == 0:
        raise PostError("sphere velocity at contact onset is zero")
    phi_p = np.asarray(phi_p, dtype=float)
    eta_dot_end = np.asarray(eta_dot_end, dtype=float)
    return -(v_sph_end - phi_p * eta_dot_end) / v_sph_start


def force_from_sphere_velocity(v_sph, m_sph: float, dt_sample: float,
                               resample_rate: float | None = None):
    """Contact force ``m dv/dt`` by central differences (one-sided at the ends).

    With ``resample_rate`` (Hz, e.g. :data:`RIG_SAMPLE_RATE`) the velocity
    is first linearly resampled to that rate, emulating a coarse
    measurement. Returns ``(t, f)`` on the grid actually differentiated.
    """
    v = np.asarray(v_sph, dtype=float)
    if v.size < 3:
        raise PostError("need at least 3 velocity samples")
    t = dt_sample * np.arange(v.size)
    if resample_rate is not None:
        h = 1.0 / resample_rate
        t_new = np.arange(0.0, t[-1] + 0.5 * h, h)
        t_new = t_new[t_new <= t[-1]]
        if t_new.size < 3:
            raise PostError("resampled signal has fewer than 3 samples")
        v = np.interp(t_new, t, v)
        t, dt_sample = t_new, h
    return t, m_sph * np.gradient(v, dt_sample)


def duhamel_response(f_c, dt: float, omega, phi_p):
    """Modal state at the end of a force record by undamped Duhamel convolution.

    ``f_c`` is sampled on ``[t_S, t_E]`` with step ``dt``; the modal force is
    ``-phi_k(P) f_c`` (contact pushes the beam downward when ``phi > 0``
    means upward displacement, the convention of the simulation output).
    Returns ``(eta(t_E), eta_dot(t_E))`` by trapezoidal quadrature.
    """
    f = np.asarray(f_c, dtype=float)
    if f.size < 2:
        raise PostError("empty contact window")
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    phi = np.atleast_1d(np.asarray(phi_p, dtype=float))
    T = dt * (f.size - 1)
    tau = dt * np.arange(f.size)
    arg = np.outer(omega, T - tau)
    w = np.full(f.size, dt)
    w[0] = w[-1] = 0.5 * dt
    g = -phi[:, None] * f[None, :] * w[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        sin_term = np.sum(g * np.sin(arg), axis=1)
        eta = np.where(omega > 0, sin_term / np.where(omega > 0, omega, 1.0),
                       np.sum(g * (T - tau)[None, :], axis=1))
    eta_dot = np.sum(g * np.cos(arg), axis=1)
    return eta, eta_dot


@dataclass(frozen=True)
class FreeFit:
    """Least-squares fit of a post-impact velocity record."""

    v_rigid: float
    eta_c: np.ndarray  # cos-phase amplitudes (modal displacement at t=0)
    eta_s: np.ndarray  # sin-phase amplitudes (modal velocity / omega at t=0)
    residual_norm: float
    omega: np.ndarray

    @property
    def eta(self) -> np.ndarray:
        """Modal displacements at the start of the fit window."""
        return self.eta_c

    @property
    def eta_dot(self) -> np.ndarray:
        """Modal velocities at the start of the fit window."""
        return self.omega * self.eta_s


def fit_modal_free(t, v_p, omega, phi_p, min_periods: float = 2.0) -> FreeFit:
    """Fit ``v_P(t) = v_R + sum_k phi_k (-omega_k c_k sin omega_k t + omega_k s_k cos omega_k t)``.

    ``t`` starts at the beginning of the fit window. Each modal coordinate
    is ``eta_k(t) = c_k cos omega_k t + s_k sin omega_k t``.
    """
    t = np.asarray(t, dtype=float) - float(np.asarray(t)[0])
    v = np.asarray(v_p, dtype=float)
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    phi = np.atleast_1d(np.asarray(phi_p, dtype=float))
    if omega.size != phi.size:
        raise PostError("omega and phi_p must have equal length")
    if np.any(omega <= 0):
        raise PostError("fitted frequencies must be positive")
    if np.unique(omega).size != omega.size:
        raise PostError("fitted frequencies must be distinct")
    span = t[-1] if t.size else 0.0
    period = 2 * np.pi / omega.min()
    if span < min_periods * period:
        warnings.warn(f"fit window {span:.3e} s is shorter than {min_periods} periods "
                      f"of the lowest fitted mode ({period:.3e} s)", stacklevel=2)
    wt = np.outer(t, omega)
    X = np.column_stack([np.ones_like(t), -omega * phi * np.sin(wt),
                         omega * phi * np.cos(wt)])
    # column scaling for conditioning
    scale = np.linalg.norm(X, axis=0)
    if np.any(scale == 0):
        raise PostError("design matrix has a zero column (mode with phi_k(P) = 0)")
    Xs = X / scale
    coef, res, rank, sv = np.linalg.lstsq(Xs, v, rcond=None)
    if rank < X.shape[1] or sv[-1] < 1e-10 * sv[0]:
        raise PostError(f"rank-deficient design matrix (rank {rank} of {X.shape[1]}); "
                        "frequencies alias on this window")
    coef = coef / scale
    n = omega.size
    r = float(np.linalg.norm(X @ coef - v))
    return FreeFit(v_rigid=float(coef[0]), eta_c=coef[1:1 + n], eta_s=coef[1 + n:],
                   residual_norm=r, omega=omega)


@dataclass(frozen=True)
class FrfEstimate:
    """Frequency response on an ascending grid (``NaN`` where undefined)."""

    frequencies: np.ndarray
    values: np.ndarray
    n_rep: int

    def __post_init__(self):
        if np.any(np.diff(self.frequencies) <= 0):
            raise PostError("frequency grid must be strictly ascending")

    @property
    def undefined(self) -> np.ndarray:
        return ~np.isfinite(self.values)


def h1_estimate(freqs, realizations, velocity_input: bool = False) -> FrfEstimate:
    """H1 estimate ``sum U F* / sum F F*`` over realizations ``[(U, F), ...]``.

    With ``velocity_input`` the ``U`` spectra are velocities and are
    converted to displacements by division by ``2 pi i f``; the ``f = 0``
    bin is then dropped. Bins with no excitation are ``NaN``.
    """
    freqs = np.asarray(freqs, dtype=float)
    if not realizations:
        raise PostError("at least one realization is required")
    num = np.zeros(freqs.size, dtype=complex)
    den = np.zeros(freqs.size)
    for U, F in realizations:
        U = np.asarray(U, dtype=complex)
        F = np.asarray(F, dtype=complex)
        if U.shape != freqs.shape or F.shape != freqs.shape:
            raise PostError("all realizations must share the frequency grid")
        num += U * np.conj(F)
        den += np.abs(F) ** 2
    keep = np.ones(freqs.size, dtype=bool)
    if velocity_input:
        keep = freqs != 0
        num = num[keep] / (2j * np.pi * freqs[keep])
        den = den[keep]
    with np.errstate(divide="ignore", invalid="ignore"):
        H = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan + 0j)
    return FrfEstimate(frequencies=freqs[keep], values=H, n_rep=len(realizations))


def frf_model(shapes, omega, damping, drive: int, response: int, freqs) -> FrfEstimate:
    """Receptance ``sum_k phi_k(d) phi_k(r) / (omega_k^2 - w^2 + 2 i D_k omega_k w)``."""
    shapes = np.asarray(shapes, dtype=float)
    omega = np.asarray(omega, dtype=float)
    D = np.broadcast_to(np.asarray(damping, dtype=float), omega.shape)
    if np.any(D < 0):
        raise PostError("damping ratios must be >= 0")
    freqs = np.asarray(freqs, dtype=float)
    w = 2 * np.pi * freqs
    num = shapes[drive] * shapes[response]
    den = omega[None, :] ** 2 - w[:, None] ** 2 + 2j * D[None, :] * omega[None, :] * w[:, None]
    return FrfEstimate(frequencies=freqs, values=np.sum(num[None, :] / den, axis=1), n_rep=0)


def pulse_spectrum(f_c, dt: float):
    """One-sided spectrum of a force record, normalized ``X_k = (1/N) sum x_n e^{-2 pi i kn/N}``."""
    f = np.asarray(f_c, dtype=float)
    n = f.size
    return np.fft.rfftfreq(n, dt), np.fft.rfft(f) / n


def spectral_energy(spectrum, n: int, dt: float) -> float:
    """``sum |x|^2 dt`` recovered from a :func:`pulse_spectrum` (Parseval)."""
    X = np.asarray(spectrum) * n
    w = np.full(X.size, 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    return float(np.sum(w * np.abs(X) ** 2) / n * dt)


@dataclass(frozen=True)
class ModalSummary:
    """Post-impact energy and restitution of the retained bending modes."""

    labels: tuple[str, ...]
    frequencies_hz: np.ndarray
    energy: np.ndarray
    energy_fraction: np.ndarray
    restitution: np.ndarray
    sphere_energy_pre: float
    sphere_energy_post: float
    beam_rigid_energy: float
    t_start: float
    t_end: float

    @property
    def bending_total(self) -> float:
        return float(self.energy.sum())

    def audit(self) -> float:
        """Relative energy-balance defect across the contact window."""
        return abs(self.sphere_energy_pre - self.sphere_energy_post - self.beam_rigid_energy
                   - self.bending_total) / self.sphere_energy_pre

    def even_fraction(self) -> float:
        """Share of bending energy in even-numbered (antisymmetric) modes."""
        even = self.energy[1::2].sum()
        return float(even / max(self.bending_total, 1e-300))

    def above(self, threshold: float) -> list[str]:
        """Labels of modes whose energy fraction exceeds ``threshold``."""
        return [lb for lb, f in zip(self.labels, self.energy_fraction) if f > threshold]


def summarize(traj: Trajectory) -> ModalSummary:
    """Modal energies and restitution at the end of the first contact window."""
    window = traj.contact_window
    if window is None:
        raise PostError("no contact window: restitution undefined")
    iS, iE = traj.index(window[0]), traj.index(window[1])
    r = traj.rigid_count
    w = traj.mode_frequencies
    e_all = modal_energy(traj.beam_eta[iE], traj.beam_eta_dot[iE], w)
    v_S, v_E = float(traj.v_sph[iS]), float(traj.v_sph[iE])
    rk = modal_restitution(v_S, v_E, traj.impact_shape[r:], traj.beam_eta_dot[iE, r:])
    e_pre = 0.5 * traj.sphere_mass * v_S ** 2
    return ModalSummary(
        labels=tuple(traj.elastic_labels), frequencies_hz=w[r:] / (2 * np.pi),
        energy=e_all[r:], energy_fraction=e_all[r:] / e_pre, restitution=rk,
        sphere_energy_pre=e_pre, sphere_energy_post=0.5 * traj.sphere_mass * v_E ** 2,
        beam_rigid_energy=float(e_all[:r].sum()), t_start=window[0], t_end=window[1])


def modal_routes(traj: Trajectory, probe: str, fit_window: float | None = None,
                 energy_floor: float = 0.01):
    """Post-impact modal velocities of the dominant modes by three routes.

    Returns ``(modes, direct, duhamel, fitted)`` where ``modes`` are the
    elastic column indices carrying at least ``energy_floor`` of the
    bending energy and the arrays hold the modal amplitude
    ``sqrt(2 E_k)`` at ``t_E`` from direct projection, Duhamel
    convolution of ``f_c`` and the free-vibration fit of the probe
    velocity (free-free only; ``None`` otherwise).
    """
    summ = summarize(traj)
    r = traj.rigid_count
    w = traj.mode_frequencies
    iS, iE = traj.index(summ.t_start), traj.index(summ.t_end)
    frac = summ.energy / max(summ.bending_total, 1e-300)
    modes = np.flatnonzero(frac >= energy_floor) + r
    direct = np.sqrt(2 * modal_energy(traj.beam_eta[iE], traj.beam_eta_dot[iE], w))[modes]
    eta, eta_dot = duhamel_response(traj.f_c[iS:iE + 1], traj.dt, w, traj.impact_shape)
    duh = np.sqrt(2 * modal_energy(eta, eta_dot, w))[modes]
    fitted = None
    if r > 0:
        span = fit_window if fit_window is not None else traj.t[-1] - summ.t_end
        j = list(traj.probe_names).index(probe)
        sel = (traj.t >= summ.t_end) & (traj.t <= summ.t_end + span)
        shapes_p = traj.meta.get("probe_shapes")
        if shapes_p is None:
            raise PostError("trajectory lacks probe mode shapes for the free fit")
        el = np.arange(r, w.size)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fit = fit_modal_free(traj.t[sel], traj.probe_velocity[sel, j], w[el],
                                 shapes_p[j, el])
        amp = np.sqrt(fit.eta_dot ** 2 + (w[el] * fit.eta) ** 2)
        fitted = amp[modes - r]
    return modes, direct, duh, fitted
