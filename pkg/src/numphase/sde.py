"""Trajectory integrators for the damped Kerr oscillator.

Three unravelings share one runner:

* ``numphase``: jump-diffusion in number-phase space.  Between jumps the
  phase drifts at ``-chi n`` and diffuses with amplitude
  ``sqrt(gamma) / (2 sqrt(n+1))``; ``n`` drops by one with probability
  ``gamma n dt`` per step.  Weights come from the initial grid and never
  change.
* ``tw``: truncated Wigner, a complex Langevin equation for ``alpha``.
* ``gaugep``: gauge positive-P in log variables with a real gauge angle.

All integrators are Euler-Maruyama and vectorised over the paths of one
block; blocks are independent (see :mod:`numphase.streams`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import representation as rep
from .fock import ModelParams, coherent_density, expect_a, expect_number
from .sampling import stats_from_moments, weighted_moments
from .streams import BLOCK_SIZE, TAG_GAUGEP, TAG_NUMPHASE, TAG_TW, map_blocks

SQRT2 = math.sqrt(2.0)
GAUGE_COEFF = 0.005
OVERFLOW_LIMIT = 700.0
ABORT_FRACTION = 0.01
TW_RUNAWAY = 1e3

METHODS = ("numphase", "tw", "gaugep")


@dataclass(frozen=True)
class IntegrationParams:
    dt: float = 1e-3
    t_final: float = 7.0
    sample_times: tuple | None = None
    n_traj: int = 100_000
    seed: int = 42
    sample_dt: float = 0.1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_final >= 0:
            raise ValueError(f"t_final must be non-negative, got {self.t_final}")
        if self.n_traj < 1:
            raise ValueError(f"n_traj must be >= 1, got {self.n_traj}")
        if self.sample_times is not None:
            ts = np.asarray(self.sample_times, dtype=float)
            if np.any(np.diff(ts) < 0) or (ts.size and (ts[0] < 0 or ts[-1] > self.t_final + 1e-12)):
                raise ValueError("sample_times must be ascending and inside [0, t_final]")

    @property
    def times(self) -> np.ndarray:
        if self.sample_times is not None:
            return np.asarray(self.sample_times, dtype=float)
        count = int(math.floor(self.t_final / self.sample_dt + 1e-9)) + 1
        return np.round(np.arange(count) * self.sample_dt, 12)

    def step_indices(self) -> np.ndarray:
        ts = self.times
        idx = np.rint(ts / self.dt).astype(np.int64)
        if np.any(np.abs(idx * self.dt - ts) > 1e-9 * np.maximum(1.0, ts)):
            raise ValueError("sample times must be integer multiples of dt")
        return idx

    def check_rates(self, params: ModelParams, n_max: float) -> None:
        if params.gamma * n_max * self.dt >= 0.1:
            raise ValueError(
                f"gamma*n_max*dt = {params.gamma * n_max * self.dt:.3g} >= 0.1; reduce dt"
            )
        if abs(params.chi) * n_max * self.dt >= 0.1:
            raise ValueError(f"chi*n_max*dt = {abs(params.chi) * n_max * self.dt:.3g} >= 0.1; reduce dt")


@dataclass
class EnsembleTimeSeries:
    method: str
    times: np.ndarray
    x_mean: np.ndarray
    x_stderr: np.ndarray
    n_mean: np.ndarray
    n_stderr: np.ndarray
    mean_weight: np.ndarray
    flagged: np.ndarray = None
    status: str = "ok"
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.flagged is None:
            self.flagged = np.zeros_like(self.times)
        lengths = {len(a) for a in (self.times, self.x_mean, self.x_stderr, self.n_mean, self.n_stderr, self.mean_weight)}
        if len(lengths) != 1:
            raise ValueError("time series arrays must have equal length")


# ---------------------------------------------------------------- number-phase


@dataclass
class NumPhasePaths:
    """Doubled occupation ``two_n`` (exact parity), unreduced phase, static weight."""

    two_n: np.ndarray
    phi: np.ndarray
    omega: np.ndarray
    info: dict = field(default_factory=dict)

    def __len__(self):
        return self.omega.size

    def take(self, lo, hi):
        return NumPhasePaths(self.two_n[lo:hi].copy(), self.phi[lo:hi].copy(), self.omega[lo:hi].copy())


def init_numphase_ensemble(
    alpha0: complex,
    two_n_max: int,
    phi_points: int,
    n_traj: int | None = None,
    prune: float | None = None,
) -> NumPhasePaths:
    """Deterministic grid over ``(n, phi_j)`` with weights ``(2 pi / M) W(n, phi_j)``.

    ``n_traj`` replicates every grid point ``ceil(n_traj / points)`` times
    (weights split evenly) so noise and jumps are sampled more than once per
    point.  ``prune`` drops points with ``|w|`` below the threshold before
    replication; the count is recorded on the returned object.
    """
    if phi_points < 2 * two_n_max + 2:
        raise ValueError(f"phi grid of {phi_points} points too coarse for two_n_max={two_n_max}")
    table = rep.coherent_closed_form(alpha0, two_n_max)
    phis = rep.phi_grid(phi_points)
    w = np.real(rep.w_grid(table, phis)) * (rep.TWO_PI / phi_points)
    two_n = np.repeat(np.arange(table.two_n_max + 1), phi_points)
    phi = np.tile(phis, table.two_n_max + 1)
    omega = w.ravel()
    dropped = 0
    if prune:
        keep = np.abs(omega) >= prune
        dropped = int(omega.size - keep.sum())
        two_n, phi, omega = two_n[keep], phi[keep], omega[keep]
    copies = 1 if not n_traj else max(1, math.ceil(n_traj / omega.size))
    paths = NumPhasePaths(np.repeat(two_n, copies), np.repeat(phi, copies), np.repeat(omega / copies, copies))

    x0, n0 = numphase_observables(paths.two_n, paths.phi)
    sw = paths.omega.sum()
    rho = coherent_density(alpha0, table.dim)
    x_ref = SQRT2 * expect_a(rho).real
    n_ref = expect_number(rho)
    x_err = abs(np.dot(paths.omega, x0) / sw - x_ref)
    n_err = abs(np.dot(paths.omega, n0) / sw - n_ref)
    if x_err > 1e-8 or n_err > 1e-8:
        raise ValueError(f"grid fails the initial moment check (x err {x_err:.2g}, n err {n_err:.2g})")
    paths.info = {"grid_points": w.size, "dropped": dropped, "copies": copies, "two_n_max": table.two_n_max}
    return paths


def numphase_observables(two_n: np.ndarray, phi: np.ndarray):
    """Position and number estimators; both vanish on frozen ``n = -1/2`` paths."""
    n = 0.5 * two_n
    x = SQRT2 * np.sqrt(np.maximum(n + 0.5, 0.0)) * np.cos(phi) * (two_n >= 1)
    return x, np.where(two_n >= 0, n, 0.0)


def step_numphase(paths: NumPhasePaths, params: ModelParams, dt: float, rng) -> NumPhasePaths:
    xi = rng.standard_normal(len(paths))
    u = rng.random(len(paths))
    _numphase_update(paths.two_n, paths.phi, params, dt, xi, u)
    return paths


def _numphase_update(two_n, phi, params, dt, xi, u):
    active = two_n >= 0
    n = 0.5 * two_n
    dphi = -params.chi * n * dt
    if params.gamma:
        dphi = dphi + np.sqrt(params.gamma * dt / (4.0 * (n + 1.0))) * xi
        jump = active & (u < params.gamma * n * dt)
        two_n -= 2 * jump
    phi += np.where(active, dphi, 0.0)


# ------------------------------------------------------------ truncated Wigner


@dataclass
class TWPaths:
    alpha: np.ndarray

    def __len__(self):
        return self.alpha.size


def init_tw_ensemble(alpha0: complex, n_traj: int, seed: int, rng=None) -> TWPaths:
    """``alpha = alpha0 + (eta1 + i eta2)/2`` with independent standard normals."""
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    if rng is not None:
        eta = rng.standard_normal((2, n_traj))
        return TWPaths(alpha0 + 0.5 * (eta[0] + 1j * eta[1]))

    def block(lo, hi, g):
        eta = g.standard_normal((2, hi - lo))
        return alpha0 + 0.5 * (eta[0] + 1j * eta[1])

    return TWPaths(np.concatenate(map_blocks(block, n_traj, seed, TAG_TW)))


TW_SCHEMES = ("rotation", "euler")


def step_truncated_wigner(paths: TWPaths, params: ModelParams, dt: float, rng, scheme: str = "rotation") -> TWPaths:
    """One step of ``d alpha = (i chi alpha (1/2 - |alpha|^2) - gamma alpha / 2) dt + sqrt(gamma)/2 dW``.

    ``scheme="euler"`` is plain Euler-Maruyama.  Its explicit step inflates
    ``|alpha|`` by ``sqrt(1 + (chi |alpha|^2 dt)^2)`` per step, which runs away
    for tail paths at ``dt = 1e-3``.  ``scheme="rotation"`` (default) applies
    the norm-conserving Kerr rotation exactly and Euler-Maruyama to the rest.
    """
    dw = rng.standard_normal((2, len(paths)))
    paths.alpha = _tw_update(paths.alpha, params, dt, dw, scheme)
    return paths


def _tw_update(alpha, params, dt, dw, scheme="rotation"):
    noise = (0.5 * math.sqrt(params.gamma * dt)) * (dw[0] + 1j * dw[1])
    mod2 = alpha.real**2 + alpha.imag**2
    if scheme == "rotation":
        alpha = alpha * np.exp(1j * params.chi * (0.5 - mod2) * dt)
        return alpha - (0.5 * params.gamma * dt) * alpha + noise
    if scheme == "euler":
        drift = 1j * params.chi * alpha * (0.5 - mod2) - 0.5 * params.gamma * alpha
        return alpha + drift * dt + noise
    raise ValueError(f"unknown truncated-Wigner scheme {scheme!r}; expected one of {TW_SCHEMES}")


def tw_observables(alpha):
    return SQRT2 * alpha.real, alpha.real**2 + alpha.imag**2 - 0.5


# ----------------------------------------------------------- gauge positive-P


@dataclass
class GaugePPaths:
    """Log amplitudes ``phi_c``, ``psi_c`` with ``alpha = exp((1-i)/2 phi_c)``, ``beta`` likewise."""

    phi_c: np.ndarray
    psi_c: np.ndarray
    theta: np.ndarray
    flagged: np.ndarray = None

    def __post_init__(self):
        if self.flagged is None:
            self.flagged = np.zeros(self.theta.shape, dtype=bool)

    def __len__(self):
        return self.theta.size


_HALF_1MI = 0.5 * (1 - 1j)


def init_gaugep_ensemble(alpha0: complex, n_traj: int) -> GaugePPaths:
    alpha0 = complex(alpha0)
    if alpha0 == 0:
        raise ValueError("gauge-P log variables need alpha0 != 0")
    phi0 = np.log(alpha0) / _HALF_1MI
    psi0 = np.log(alpha0.conjugate()) / _HALF_1MI
    return GaugePPaths(
        np.full(n_traj, phi0, dtype=complex),
        np.full(n_traj, psi0, dtype=complex),
        np.zeros(n_traj),
    )


def gaugep_amplitudes(paths: GaugePPaths):
    return np.exp(_HALF_1MI * paths.phi_c), np.exp(_HALF_1MI * paths.psi_c)


def _gauges(alpha, beta):
    n = alpha * beta.conj()
    a2 = alpha.real**2 + alpha.imag**2
    b2 = beta.real**2 + beta.imag**2
    # i(n* - n)/2 = Im n and (n + n*)/2 = Re n, so both gauges are real
    g1 = GAUGE_COEFF * (n.imag - n.real + a2)
    g2 = GAUGE_COEFF * (n.imag + n.real - b2)
    return n, g1, g2


def step_gauge_p(paths: GaugePPaths, params: ModelParams, dt: float, rng) -> GaugePPaths:
    dw = rng.standard_normal((2, len(paths)))
    _gaugep_update(paths, params, dt, dw)
    return paths


def _gaugep_update(paths, params, dt, dw):
    live = ~paths.flagged
    alpha, beta = gaugep_amplitudes(paths)
    n, g1, g2 = _gauges(alpha, beta)
    t = np.tan(paths.theta)
    damp = 0.5 * params.gamma * (1 + 1j)
    sq = math.sqrt(dt)
    sig = math.sqrt(2.0 * abs(params.chi))
    dphi = (params.chi * (n * (1 - 1j) - 2.0 * g1 * (t + 1j)) - damp) * dt + sig * sq * dw[0]
    dpsi = (params.chi * (n.conj() * (1 - 1j) - 2.0 * g2 * (t - 1j)) - damp) * dt + sig * sq * dw[1]
    dth = -2.0 * t * (g1**2 + g2**2) * dt + SQRT2 * sq * (g2 * dw[1] - g1 * dw[0])
    paths.phi_c = np.where(live, paths.phi_c + dphi, paths.phi_c)
    paths.psi_c = np.where(live, paths.psi_c + dpsi, paths.psi_c)
    paths.theta = np.where(live, paths.theta + dth, paths.theta)
    _flag_gaugep(paths)


def _flag_gaugep(paths):
    with np.errstate(all="ignore"):
        alpha, beta = gaugep_amplitudes(paths)
        re_n = (alpha * beta.conj()).real
        bad = (
            ~np.isfinite(paths.phi_c)
            | ~np.isfinite(paths.psi_c)
            | ~np.isfinite(paths.theta)
            | ~np.isfinite(re_n)
            | (np.abs(re_n) > OVERFLOW_LIMIT)
        )
    paths.flagged |= bad


GAUGE_WEIGHTS = ("printed", "cos")


def gaugep_observables(paths: GaugePPaths, weight: str = "printed"):
    """Weight and the position / number estimators, zeroed on flagged paths.

    ``weight="printed"`` is ``2 exp(Re[alpha beta*]) cos(theta)``;
    ``weight="cos"`` drops the ``exp(Re[alpha beta*])`` factor, which turns
    the scheme into plain positive-P while the gauge angle stays near zero.
    """
    if weight not in GAUGE_WEIGHTS:
        raise ValueError(f"unknown gauge weight {weight!r}; expected one of {GAUGE_WEIGHTS}")
    with np.errstate(all="ignore"):
        alpha, beta = gaugep_amplitudes(paths)
        n = alpha * beta.conj()
        omega = np.cos(paths.theta)
        if weight == "printed":
            omega = 2.0 * np.exp(n.real) * omega
        x = (alpha + beta.conj()).real / SQRT2
    live = ~paths.flagged
    return np.where(live, omega, 0.0), np.where(live, x, 0.0), np.where(live, n.real, 0.0)


# ---------------------------------------------------------------------- runner


def _sample_sums(w, x, n):
    mx = weighted_moments(w, x)
    mn = weighted_moments(w, n)
    return np.array([mx[0], mx[1], mx[2], mx[3], mx[4], mx[5], mn[3], mn[4], mn[5]], dtype=float)


def _block_runner(method, init, params, integ, steps, tw_scheme, gauge_weight):
    dt = integ.dt
    last = int(steps[-1]) if steps.size else 0

    def run(lo, hi, rng):
        out = np.zeros((steps.size, 10))
        if method == "numphase":
            p = init.take(lo, hi)
            if params.gamma:
                draw = lambda: (rng.standard_normal(hi - lo), rng.random(hi - lo))
            else:
                draw = lambda: (None, None)
            advance = lambda z: _numphase_update(p.two_n, p.phi, params, dt, *z)

            def observe():
                x, n = numphase_observables(p.two_n, p.phi)
                return p.omega, x, n, 0
        elif method == "tw":
            state = {"alpha": init.alpha[lo:hi].copy()}
            draw = lambda: rng.standard_normal((2, hi - lo))

            def advance(z):
                a = _tw_update(state["alpha"], params, dt, z, tw_scheme)
                # runaway paths are frozen at zero and dropped from the sums
                state["bad"] |= ~np.isfinite(a) | (np.abs(a) > TW_RUNAWAY)
                state["alpha"] = np.where(state["bad"], 0, a)

            state["bad"] = np.zeros(hi - lo, dtype=bool)

            def observe():
                bad = state["bad"]
                x, n = tw_observables(state["alpha"])
                return (~bad).astype(float), x, n, int(bad.sum())
        elif method == "gaugep":
            p = GaugePPaths(init.phi_c[lo:hi].copy(), init.psi_c[lo:hi].copy(), init.theta[lo:hi].copy())
            draw = lambda: rng.standard_normal((2, hi - lo))
            advance = lambda z: _gaugep_update(p, params, dt, z)

            def observe():
                w, x, n = gaugep_observables(p, gauge_weight)
                return w, x, n, int(p.flagged.sum())
        else:
            raise ValueError(f"unknown method {method!r}")

        j = 0
        for s in range(last + 1):
            while j < steps.size and steps[j] == s:
                w, x, n, bad = observe()
                out[j, :9] = _sample_sums(w, x, n)
                out[j, 9] = bad
                j += 1
            if s < last:
                with np.errstate(all="ignore"):
                    advance(draw())
        return out

    return run


_TAGS = {"numphase": TAG_NUMPHASE, "tw": TAG_TW, "gaugep": TAG_GAUGEP}


def run_ensemble(
    method: str,
    init,
    params: ModelParams,
    integ: IntegrationParams,
    workers: int = 1,
    block_size: int = BLOCK_SIZE,
    tw_scheme: str = "rotation",
    gauge_weight: str = "printed",
) -> EnsembleTimeSeries:
    """Integrate every path of ``init`` and reduce weighted statistics at the sample times.

    Block partial sums are combined in block order, so the result does not
    depend on ``workers``.  If more than 1% of paths are flagged (non-finite
    or overflowing), the series is cut at that sample: later entries are NaN
    and ``status`` records the abort time.
    """
    steps = integ.step_indices()
    times = integ.times
    if method == "numphase":
        integ.check_rates(params, max(0.5 * float(np.max(init.two_n)), 0.5))
    n_paths = len(init)
    parts = map_blocks(
        _block_runner(method, init, params, integ, steps, tw_scheme, gauge_weight),
        n_paths,
        integ.seed,
        _TAGS[method],
        workers=workers,
        block_size=block_size,
    )
    total = np.zeros((steps.size, 10))
    for part in parts:
        total += part

    k = steps.size
    x_mean, x_err, n_mean, n_err, mean_w = (np.full(k, np.nan) for _ in range(5))
    flagged = total[:, 9] / n_paths
    status = "ok"
    for i in range(k):
        if flagged[i] > ABORT_FRACTION:
            status = f"aborted at t={times[i]:.6g}: {flagged[i]:.1%} of paths divergent"
            break
        sums = total[i]
        if sums[1] == 0.0 or not np.isfinite(sums[:9]).all():
            status = f"aborted at t={times[i]:.6g}: non-finite weighted sums"
            break
        mx = (n_paths, sums[1], sums[2], sums[3], sums[4], sums[5])
        mn = (n_paths, sums[1], sums[2], sums[6], sums[7], sums[8])
        x_mean[i], x_err[i] = stats_from_moments(mx)
        n_mean[i], n_err[i] = stats_from_moments(mn)
        mean_w[i] = sums[1] / n_paths
    return EnsembleTimeSeries(method, times, x_mean, x_err, n_mean, n_err, mean_w, flagged, status,
                              info={"n_paths": n_paths})
