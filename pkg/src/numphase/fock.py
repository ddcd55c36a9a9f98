"""Truncated Fock-basis states and the damped Kerr master equation.

Everything here works on dense ``(D, D)`` complex arrays.  The master
equation is

    drho/dt = -i (chi/2) [n^2, rho] + gamma (a rho a^+ - {n, rho}/2)

integrated with fixed-step RK4; it is the reference every stochastic
method is checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LEAKAGE_TOL = 1e-8


class TruncationError(ValueError):
    """The Fock truncation is too small for the requested state or moment."""


class StabilityError(ValueError):
    """The RK4 step violates the stability heuristic, or the run produced NaN."""


def safe_dim(alpha0: complex) -> int:
    """Smallest truncation that keeps the Poisson tail of ``|alpha0>`` negligible."""
    r = abs(alpha0)
    return int(math.ceil(r * r + 6.0 * r + 10.0))


@dataclass(frozen=True)
class ModelParams:
    chi: float
    gamma: float
    alpha0: complex = 0.0
    dim: int | None = None

    def __post_init__(self):
        if not (self.gamma >= 0.0):
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if not math.isfinite(self.chi):
            raise ValueError(f"chi must be finite, got {self.chi}")
        if self.dim is not None:
            if self.dim < 1:
                raise ValueError(f"dim must be positive, got {self.dim}")
            if self.alpha0 != 0 and self.dim < safe_dim(self.alpha0):
                raise TruncationError(
                    f"dim={self.dim} below the safe truncation {safe_dim(self.alpha0)} "
                    f"for alpha0={self.alpha0}"
                )

    @property
    def D(self) -> int:
        return self.dim if self.dim is not None else safe_dim(self.alpha0)


def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def number_op(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def coherent_state(alpha: complex, dim: int, return_leakage: bool = False):
    """Normalised coherent-state amplitudes ``alpha^p e^{-|alpha|^2/2} / sqrt(p!)``.

    Raises :class:`TruncationError` when more than ``1e-8`` of the norm lies
    beyond ``dim``.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    alpha = complex(alpha)
    p = np.arange(dim)
    if alpha == 0:
        amps = np.zeros(dim, dtype=complex)
        amps[0] = 1.0
        return (amps, 0.0) if return_leakage else amps
    # log-space avoids overflow of alpha^p / sqrt(p!) for large p
    log_mod = p * math.log(abs(alpha)) - 0.5 * abs(alpha) ** 2 - 0.5 * np.array(
        [math.lgamma(k + 1) for k in p]
    )
    amps = np.exp(log_mod) * np.exp(1j * p * np.angle(alpha))
    leakage = 1.0 - float(np.sum(np.abs(amps) ** 2))
    if leakage > LEAKAGE_TOL:
        raise TruncationError(
            f"coherent state alpha={alpha} leaks {leakage:.3g} beyond dim={dim}"
        )
    amps = amps / np.linalg.norm(amps)
    return (amps, leakage) if return_leakage else amps


def coherent_density(alpha: complex, dim: int) -> np.ndarray:
    psi = coherent_state(alpha, dim)
    return np.outer(psi, psi.conj())


def fock_projector(m: int, dim: int) -> np.ndarray:
    if not 0 <= m < dim:
        raise ValueError(f"Fock index m={m} outside [0, {dim})")
    rho = np.zeros((dim, dim), dtype=complex)
    rho[m, m] = 1.0
    return rho


def _check_square(rho: np.ndarray, dim: int | None = None) -> int:
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    if dim is not None and rho.shape[0] != dim:
        raise ValueError(f"dimension mismatch: rho is {rho.shape[0]}, params dim is {dim}")
    return rho.shape[0]


def lindblad_rhs(rho: np.ndarray, params: ModelParams) -> np.ndarray:
    """Time derivative of ``rho`` under the damped anharmonic-oscillator master equation.

    Uses the elementwise form of each term; :func:`lindblad_rhs_matrix`
    is the literal operator-product version.
    """
    dim = _check_square(rho, params.dim)
    m = np.arange(dim, dtype=float)
    out = (-0.5j * params.chi) * (m[:, None] ** 2 - m[None, :] ** 2) * rho
    if params.gamma:
        out -= (0.5 * params.gamma) * (m[:, None] + m[None, :]) * rho
        # (a rho a^+)_{ab} = sqrt((a+1)(b+1)) rho_{a+1,b+1}
        s = np.sqrt(m[1:])
        out[:-1, :-1] += params.gamma * (s[:, None] * s[None, :]) * rho[1:, 1:]
    return out


def lindblad_rhs_matrix(rho: np.ndarray, params: ModelParams) -> np.ndarray:
    dim = _check_square(rho, params.dim)
    a = annihilation(dim)
    ad = a.conj().T
    n = ad @ a
    h = 0.5 * params.chi * (n @ n)
    out = -1j * (h @ rho - rho @ h)
    out += params.gamma * (a @ rho @ ad - 0.5 * (n @ rho + rho @ n))
    return out


def _rk4_step(rho, params, dt):
    k1 = lindblad_rhs(rho, params)
    k2 = lindblad_rhs(rho + 0.5 * dt * k1, params)
    k3 = lindblad_rhs(rho + 0.5 * dt * k2, params)
    k4 = lindblad_rhs(rho + dt * k3, params)
    rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return 0.5 * (rho + rho.conj().T)


def max_stable_dt(params: ModelParams, dim: int) -> float:
    """Largest step allowed by ``chi*D^2*dt < 0.1`` and ``gamma*D*dt < 0.1``."""
    limits = [np.inf]
    if params.chi:
        limits.append(0.1 / (abs(params.chi) * dim**2))
    if params.gamma:
        limits.append(0.1 / (params.gamma * dim))
    return float(min(limits))


def evolve_master(rho0: np.ndarray, params: ModelParams, tgrid, dt: float) -> np.ndarray:
    """RK4-integrate ``rho0`` and return ``rho`` at each time in ``tgrid``.

    ``tgrid`` must be ascending and start at or after 0; the state at
    ``tgrid[0]`` is reached from ``t = 0``.  Each output interval is covered
    by an integer number of equal steps no longer than ``dt``.
    """
    dim = _check_square(rho0, params.dim)
    tgrid = np.asarray(tgrid, dtype=float)
    if tgrid.ndim != 1 or np.any(np.diff(tgrid) < 0) or (tgrid.size and tgrid[0] < 0):
        raise ValueError("tgrid must be an ascending array of non-negative times")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if dt >= max_stable_dt(params, dim):
        raise StabilityError(
            f"dt={dt} violates chi*D^2*dt < 0.1 / gamma*D*dt < 0.1 for D={dim}; "
            f"use dt < {max_stable_dt(params, dim):.3g}"
        )
    out = np.empty((tgrid.size, dim, dim), dtype=complex)
    rho = np.array(rho0, dtype=complex)
    t = 0.0
    for i, target in enumerate(tgrid):
        span = target - t
        nsteps = int(math.ceil(span / dt - 1e-9)) if span > 0 else 0
        if nsteps:
            h = span / nsteps
            for _ in range(nsteps):
                rho = _rk4_step(rho, params, h)
            if not np.all(np.isfinite(rho)):
                raise StabilityError(f"non-finite density matrix at t={target}")
        t = target
        out[i] = rho
    return out


def expect_antinormal_direct(rho: np.ndarray, p: int, q: int) -> complex:
    """``Tr[a^q (a^+)^p rho]`` by explicit matrix products."""
    dim = _check_square(rho)
    if p < 0 or q < 0:
        raise ValueError("p and q must be non-negative")
    if p + q > dim / 2:
        raise TruncationError(f"p+q={p + q} too large for dim={dim} (need p+q <= D/2)")
    # pad so that a^+ does not lose population off the top of the basis
    big = dim + p + q
    a = annihilation(big)
    ad = a.conj().T
    r = np.zeros((big, big), dtype=complex)
    r[:dim, :dim] = rho
    op = np.linalg.matrix_power(a, q) @ np.linalg.matrix_power(ad, p)
    return complex(np.trace(op @ r))


def expect_a(rho: np.ndarray) -> complex:
    dim = _check_square(rho)
    return complex(np.sum(np.sqrt(np.arange(1, dim)) * np.diagonal(rho, offset=-1)))


def expect_number(rho: np.ndarray) -> float:
    dim = _check_square(rho)
    return float(np.real(np.sum(np.arange(dim) * np.diagonal(rho))))


def expect_position(rho: np.ndarray) -> float:
    """``<(a + a^+)/sqrt 2>``; raises if the result has an imaginary residue above 1e-10."""
    a = expect_a(rho)
    ad = complex(np.sum(np.sqrt(np.arange(1, rho.shape[0])) * np.diagonal(rho, offset=1)))
    x = (a + ad) / math.sqrt(2.0)
    if abs(x.imag) > 1e-10:
        raise ValueError(f"position expectation has imaginary part {x.imag:.3g}")
    return x.real


def kerr_mean_a(alpha: complex, chi: float, t):
    """Closed-form ``<a>(t)`` for the undamped Kerr oscillator from a coherent state."""
    t = np.asarray(t, dtype=float)
    return alpha * np.exp(-0.5j * chi * t) * np.exp(-abs(alpha) ** 2 * (1.0 - np.exp(-1j * chi * t)))
