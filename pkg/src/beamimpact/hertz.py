"""Reference model: rigid sphere, Hertz contact law, truncated beam modes.

State ``[x, v, eta, eta_dot]`` with ``x`` the displacement of the sphere's
contact point (upward positive), ``eta`` the beam modal coordinates and
penetration ``delta = phi_P . eta - x``. The contact force
``k_H * delta^1.5`` acts upward on the sphere and downward on the beam.
"""

from __future__ import annotations

import logging
import warnings

import numpy as np
from scipy.integrate import solve_ivp

logger = logging.getLogger(__name__)


def hertz_impact(mass: float, k_hertz: float, velocity: float, omega=(), phi_p=(),
                 t_end: float = 5e-4, dt_out: float = 1e-7, rtol: float = 1e-10,
                 radius: float | None = None, stop_after_release: bool = False):
    """Integrate the sphere/modal-beam impact with Hertz contact.

    ``omega`` and ``phi_p`` are the retained beam frequencies (rad/s) and
    mode-shape values at the impact point; leave them empty for a rigid,
    immovable target. Returns a dict of uniformly sampled arrays
    ``t, x, v, eta, eta_dot, f_c, delta``.
    """
    omega = np.asarray(omega, dtype=float)
    phi = np.asarray(phi_p, dtype=float)
    nm = omega.size
    w2 = omega ** 2

    def delta(y):
        return phi @ y[2:2 + nm] - y[0]

    def rhs_contact(t, y):
        d = delta(y)
        f = k_hertz * d * np.sqrt(d) if d > 0 else 0.0
        out = np.empty_like(y)
        out[0] = y[1]
        out[1] = f / mass
        out[2:2 + nm] = y[2 + nm:]
        out[2 + nm:] = -w2 * y[2:2 + nm] - phi * f
        return out

    def release(t, y):
        return delta(y)
    release.terminal = True
    release.direction = -1

    def touch(t, y):
        return delta(y)
    touch.terminal = True
    touch.direction = 1

    n_out = int(round(t_end / dt_out))
    t_grid = dt_out * np.arange(n_out + 1)
    Y = np.empty((n_out + 1, 2 + 2 * nm))
    filled = 0
    y = np.zeros(2 + 2 * nm)
    y[1] = -velocity
    t0 = 0.0
    in_contact = True
    max_step = np.inf
    if nm:
        max_step = 0.25 * 2 * np.pi / omega.max(initial=1.0) if omega.max(initial=0) > 0 else np.inf
    atol = 1e-12 * np.r_[1e-5, velocity, np.full(nm, 1e-5 * 0.1), np.full(nm, velocity * 0.1)]
    releases = 0
    while t0 < t_end and filled <= n_out:
        ev = release if in_contact else touch
        # first instant of each phase has delta == 0; skip event detection there
        sol = solve_ivp(rhs_contact, (t0, t_end), y, method="DOP853", rtol=rtol,
                        atol=atol, events=ev, dense_output=True, max_step=max_step,
                        first_step=min(dt_out, 1e-8))
        t_stop = sol.t[-1]
        mask = (t_grid >= t0) & (t_grid <= t_stop)
        idx = np.flatnonzero(mask)
        idx = idx[idx >= filled]
        if idx.size:
            Y[idx] = sol.sol(t_grid[idx]).T
            filled = idx[-1] + 1
        if sol.status == 1 and sol.t_events[0].size:
            y = sol.y_events[0][0].copy()
            t0 = float(sol.t_events[0][0])
            if in_contact:
                releases += 1
                if stop_after_release:
                    break
            in_contact = not in_contact
            # nudge off the event surface
            if t0 >= t_end:
                break
        else:
            break
    Y = Y[:filled]
    t_grid = t_grid[:filled]
    d = Y[:, 2:2 + nm] @ phi - Y[:, 0] if nm else -Y[:, 0]
    f = k_hertz * np.where(d > 0, d, 0.0) ** 1.5
    if radius is not None and d.max(initial=0.0) > 0.01 * radius:
        warnings.warn(
            f"maximum approach {d.max():.3e} m exceeds 1% of the sphere radius; "
            "Hertz theory is questionable", stacklevel=2)
    return {"t": t_grid, "x": Y[:, 0], "v": Y[:, 1], "eta": Y[:, 2:2 + nm],
            "eta_dot": Y[:, 2 + nm:], "f_c": f, "delta": d}
