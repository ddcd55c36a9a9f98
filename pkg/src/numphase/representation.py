"""Number-phase Wigner distribution stored as Fourier coefficients.

For half-integer ``n`` and ``k`` with ``n +/- k`` integer,

    W(n, phi) = (1/2pi) sum_k c_k(n) exp(-2i k phi),   c_k(n) = <n+k|rho|n-k>.

Half-integers are kept doubled.  The table ``coeffs[d, a]`` holds
``c_k(n)`` for ``d = 2n`` and ``a = n + k`` (so ``2k = 2a - d`` and
``n - k = d - a``).  Entries with ``a > d`` or with either Fock index
outside the truncation are identically zero.  Since ``W`` is a finite
Fourier series in ``phi`` every phase integral reduces to picking one
coefficient, so all operations here are exact up to rounding.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .fock import ModelParams, TruncationError

TWO_PI = 2.0 * math.pi

RULES = ("rho_n", "n_rho", "rho_E", "Edag_rho", "rho_Edag", "E_rho")


class SymmetryError(ValueError):
    """Coefficient table violates ``c_{-k}(n) = conj(c_k(n))``."""


def _valid_mask(two_n_max: int, dim: int) -> np.ndarray:
    d = np.arange(two_n_max + 1)[:, None]
    a = np.arange(two_n_max + 1)[None, :]
    return (a <= d) & (a < dim) & (d - a < dim)


@dataclass(frozen=True, eq=False)
class NumPhaseDist:
    """Coefficient table ``coeffs[d, a]``; ``dim`` is the Fock truncation."""

    coeffs: np.ndarray
    dim: int

    @property
    def two_n_max(self) -> int:
        return self.coeffs.shape[0] - 1

    def c(self, two_n: int, two_k: int) -> complex:
        """Single coefficient ``c_k(n)`` addressed by doubled indices."""
        if (two_n + two_k) % 2 or abs(two_k) > two_n or two_n > self.two_n_max or two_n < 0:
            return 0j
        return complex(self.coeffs[two_n, (two_n + two_k) // 2])

    def symmetry_error(self) -> float:
        d = np.arange(self.two_n_max + 1)[:, None]
        a = np.arange(self.two_n_max + 1)[None, :]
        mirror = np.where(a <= d, d - a, a)
        partner = np.take_along_axis(self.coeffs, np.broadcast_to(mirror, self.coeffs.shape), axis=1)
        return float(np.max(np.abs(self.coeffs - partner.conj()), initial=0.0))

    def max_abs_diff(self, other: "NumPhaseDist") -> float:
        return float(np.max(np.abs(self.coeffs - other.coeffs)))


def empty_table(dim: int) -> NumPhaseDist:
    size = 2 * (dim - 1) + 1
    return NumPhaseDist(np.zeros((size, size), dtype=complex), dim)


def from_density(rho: np.ndarray, check: bool = True) -> NumPhaseDist:
    rho = np.asarray(rho, dtype=complex)
    dim = rho.shape[0]
    if check:
        herm = float(np.max(np.abs(rho - rho.conj().T)))
        if herm > 1e-10:
            raise SymmetryError(f"density matrix is not Hermitian (deviation {herm:.3g})")
    two_n_max = 2 * (dim - 1)
    coeffs = np.zeros((two_n_max + 1, two_n_max + 1), dtype=complex)
    d, a = np.nonzero(_valid_mask(two_n_max, dim))
    coeffs[d, a] = rho[a, d - a]
    return NumPhaseDist(coeffs, dim)


def to_density(w: NumPhaseDist, check: bool = True) -> np.ndarray:
    if check:
        err = w.symmetry_error()
        if err > 1e-10:
            raise SymmetryError(f"conjugate symmetry violated by {err:.3g}")
    rho = np.zeros((w.dim, w.dim), dtype=complex)
    d, a = np.nonzero(_valid_mask(w.two_n_max, w.dim))
    rho[a, d - a] = w.coeffs[d, a]
    return rho


def _phase_factors(two_n: int, phi) -> np.ndarray:
    """``exp(-2i k phi)`` for every column ``a`` of row ``d = two_n``."""
    a = np.arange(two_n + 1)
    two_k = 2 * a - two_n
    return np.exp(-1j * np.multiply.outer(np.asarray(phi, dtype=float), two_k))


def eval_w(w: NumPhaseDist, two_n: int, phi) -> np.ndarray | float:
    """Value of ``W(n, phi)`` at ``n = two_n / 2``; ``phi`` may be an array."""
    if not 0 <= two_n <= w.two_n_max:
        raise ValueError(f"2n={two_n} outside table range [0, {w.two_n_max}]")
    row = w.coeffs[two_n, : two_n + 1]
    val = (_phase_factors(two_n, phi) @ row) / TWO_PI
    resid = float(np.max(np.abs(np.imag(val)), initial=0.0))
    if resid > 1e-12 * max(1.0, float(np.max(np.abs(row), initial=0.0))) * (two_n + 1):
        raise SymmetryError(f"W has imaginary residue {resid:.3g}; corrupted table")
    val = np.real(val)
    return float(val) if np.ndim(val) == 0 else val


def w_grid(w: NumPhaseDist, phis) -> np.ndarray:
    """``W`` on every row ``d = 0..two_n_max`` and every phase in ``phis`` (complex)."""
    phis = np.asarray(phis, dtype=float)
    out = np.empty((w.two_n_max + 1, phis.size), dtype=complex)
    for d in range(w.two_n_max + 1):
        out[d] = _phase_factors(d, phis) @ w.coeffs[d, : d + 1]
    return out / TWO_PI


def phi_grid(m: int) -> np.ndarray:
    return TWO_PI * np.arange(m) / m


def marginal_number(w: NumPhaseDist) -> np.ndarray:
    """``P(m) = c_0(m)`` for integer ``m = 0..dim-1``."""
    m = np.arange(w.dim)
    return np.real(w.coeffs[2 * m, m])


def marginal_phase(w: NumPhaseDist, phis) -> np.ndarray:
    """Sum of ``W(n, phi)`` over all rows ``n``."""
    return np.real(np.sum(w_grid(w, phis), axis=0))


def phase_distribution_direct(rho: np.ndarray, phis) -> np.ndarray:
    """``<phi|rho|phi>`` for the Susskind-Glogower phase states, straight from ``rho``."""
    dim = rho.shape[0]
    m = np.arange(dim)
    v = np.exp(-1j * np.multiply.outer(np.asarray(phis, dtype=float), m))
    return np.real(np.einsum("ja,ab,jb->j", v, rho, v.conj())) / TWO_PI


def coherent_closed_form(alpha: complex, two_n_max: int) -> NumPhaseDist:
    """Coherent-state table from the closed form

        c_k(n) = |alpha|^{2n} e^{-|alpha|^2} e^{2ik arg(alpha)} / sqrt((n+k)!(n-k)!).
    """
    if two_n_max < 0:
        raise ValueError("two_n_max must be >= 0")
    dim = two_n_max // 2 + 1
    two_n_max = 2 * (dim - 1)
    r2 = abs(alpha) ** 2
    m = np.arange(dim)
    if r2 > 0:
        tail = 1.0 - float(np.sum(np.exp(m * math.log(r2) - r2 - gammaln(m + 1))))
    else:
        tail = 0.0
    if tail > 1e-9:
        raise TruncationError(f"two_n_max={two_n_max} leaves Poisson tail {tail:.3g} for alpha={alpha}")
    coeffs = np.zeros((two_n_max + 1, two_n_max + 1), dtype=complex)
    d, a = np.nonzero(_valid_mask(two_n_max, dim))
    b = d - a
    if r2 == 0:
        coeffs[0, 0] = 1.0
    else:
        logmag = 0.5 * d * math.log(r2) - r2 - 0.5 * (gammaln(a + 1) + gammaln(b + 1))
        coeffs[d, a] = np.exp(logmag + 1j * (a - b) * np.angle(alpha))
    return NumPhaseDist(coeffs, dim)


def antinormal_estimator(p: int, q: int, n, phi):
    """Per-point observable whose phase-space average is ``Tr[a^q (a^+)^p rho]``.

    ``Gamma(n+(p+q)/2+1) e^{i(q-p)phi} / sqrt(Gamma(n+(q-p)/2+1) Gamma(n+(p-q)/2+1))``,
    set to zero where ``n < |q-p|/2``.  Vectorised over ``n`` and ``phi``.
    """
    n = np.asarray(n, dtype=float)
    phi = np.asarray(phi, dtype=float)
    half = abs(q - p) / 2.0
    ok = n >= half - 1e-12
    ns = np.where(ok, n, half)
    logmag = gammaln(ns + (p + q) / 2 + 1) - 0.5 * (
        gammaln(ns + (q - p) / 2 + 1) + gammaln(ns + (p - q) / 2 + 1)
    )
    val = np.where(ok, np.exp(logmag) * np.exp(1j * (q - p) * phi), 0j)
    return complex(val) if val.ndim == 0 else val


def antinormal_moment(w: NumPhaseDist, p: int, q: int) -> complex:
    """``sum_n integral dphi f_pq(n, phi) W(n, phi)`` evaluated exactly on the coefficients."""
    if p < 0 or q < 0:
        raise ValueError("p and q must be non-negative")
    if p + q >= w.two_n_max / 2:
        raise TruncationError(f"p+q={p + q} too large for two_n_max={w.two_n_max}")
    two_k = q - p
    total = 0j
    for d in range(abs(two_k), w.two_n_max + 1, 1):
        if (d + two_k) % 2:
            continue
        # the phase integral keeps only the coefficient with 2k = q - p
        total += antinormal_estimator(p, q, d / 2.0, 0.0) * w.c(d, two_k)
    return total


def apply_correspondence(w: NumPhaseDist, which: str) -> NumPhaseDist:
    """Table of ``rho n``, ``n rho``, ``rho E``, ``E^+ rho``, ``rho E^+`` or ``E rho``.

    ``E = sum_m |m><m+1|`` is the Susskind-Glogower exponential phase
    operator.  The shifts act on ``(d, a)``; for ``rho E^+`` and ``E rho``
    the shifted row contains one coefficient outside ``|k| <= n``, the
    vacuum correlation ``<2n+1|rho|0>`` or its conjugate, which is dropped.
    """
    c = w.coeffs
    size = c.shape[0]
    d = np.arange(size)[:, None]
    a = np.arange(size)[None, :]
    out = np.zeros_like(c)
    if which == "rho_n":
        out = (d - a) * c
    elif which == "n_rho":
        out = a * c
    elif which == "rho_E":
        # c'_k(n) = c_{k+1/2}(n-1/2)
        out[1:, :] = c[:-1, :]
    elif which == "Edag_rho":
        # c'_k(n) = c_{k-1/2}(n-1/2)
        out[1:, 1:] = c[:-1, :-1]
    elif which == "rho_Edag":
        # c'_k(n) = c_{k-1/2}(n+1/2), minus the a = d+1 vacuum term
        out[:-1, :] = c[1:, :]
    elif which == "E_rho":
        # c'_k(n) = c_{k+1/2}(n+1/2), minus the a = 0 vacuum term
        out[:-1, :-1] = c[1:, 1:]
    else:
        raise ValueError(f"unknown correspondence {which!r}; expected one of {RULES}")
    out = np.where(_valid_mask(w.two_n_max, w.dim), out, 0)
    return NumPhaseDist(out.astype(complex), w.dim)


def _rows(w: NumPhaseDist):
    size = w.two_n_max + 1
    d = np.arange(size)[:, None].astype(float)
    a = np.arange(size)[None, :].astype(float)
    n = d / 2.0
    k = a - n
    return n, k


def generator_exact(w: NumPhaseDist, params: ModelParams) -> NumPhaseDist:
    """``dc_k(n)/dt = -2i chi n k c - gamma n c + gamma sqrt((n+1)^2 - k^2) c_k(n+1)``."""
    n, k = _rows(w)
    c = w.coeffs
    out = (-2j * params.chi * n * k - params.gamma * n) * c
    if params.gamma:
        # c_k(n+1) sits at (d+2, a+1)
        shifted = np.zeros_like(c)
        shifted[:-2, :-1] = c[2:, 1:]
        out = out + params.gamma * np.sqrt(np.maximum((n + 1) ** 2 - k**2, 0.0)) * shifted
    out = np.where(_valid_mask(w.two_n_max, w.dim), out, 0)
    return NumPhaseDist(out, w.dim)


def generator_truncated(w: NumPhaseDist, params: ModelParams) -> NumPhaseDist:
    """Square-root expanded, locally diffusive generator that the jump SDE unravels.

    ``dc_k(n)/dt = -2i chi n k c - gamma k^2/(2(n+1)) c + gamma((n+1) c_k(n+1) - n c)``
    """
    n, k = _rows(w)
    c = w.coeffs
    out = (-2j * params.chi * n * k - params.gamma * k**2 / (2.0 * (n + 1)) - params.gamma * n) * c
    if params.gamma:
        shifted = np.zeros_like(c)
        shifted[:-2, :-1] = c[2:, 1:]
        out = out + params.gamma * (n + 1) * shifted
    out = np.where(_valid_mask(w.two_n_max, w.dim), out, 0)
    return NumPhaseDist(out, w.dim)


def export_w_csv(w: NumPhaseDist, phis, path) -> None:
    """Write ``W`` sampled on every row and the given phases as ``two_n,phi,w`` CSV."""
    vals = np.real(w_grid(w, phis))
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["two_n", "phi", "w"])
        for d in range(vals.shape[0]):
            for phi, v in zip(phis, vals[d]):
                out.writerow([d, f"{phi:.17g}", f"{v:.17g}"])
