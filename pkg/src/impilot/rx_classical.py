"""Baseline receivers: preamble-based LS / linear-MMSE channel estimation and
per-symbol maximum-likelihood detection under the two-entry channel model."""

import numpy as np

from .constellation import Constellation

__all__ = [
    "DegeneratePilotSetError",
    "pilot_matrix",
    "ls_estimate",
    "mmse_estimate",
    "detect_symbols",
]

_RANK_TOL = 1e-9


class DegeneratePilotSetError(ValueError):
    """Pilot set whose [p, conj(p)] matrix is rank deficient."""


def pilot_matrix(pilots) -> np.ndarray:
    """(n, 2) matrix pairing each pilot with its conjugate."""
    pilots = np.asarray(pilots, dtype=complex).reshape(-1)
    return np.column_stack([pilots, np.conj(pilots)])


def _normal_terms(pilots, received):
    """Entries of P^H P and P^H y for P = [p, conj(p)].

    P^H P = [[a, conj(s2)], [s2, a]] with a = sum |p|^2 and s2 = sum p^2;
    its smallest singular value is sqrt(a - |s2|).
    """
    a = float(np.sum(np.abs(pilots) ** 2))
    s2 = complex(np.sum(pilots**2))
    r1 = complex(np.sum(np.conj(pilots) * received))
    r2 = complex(np.sum(pilots * received))
    return a, s2, r1, r2


def solve_two_path_ls(pilots, received):
    """Closed-form LS solution, or None when the pilot set is degenerate."""
    pilots = np.asarray(pilots, dtype=complex).reshape(-1)
    received = np.asarray(received, dtype=complex).reshape(-1)
    a, s2, r1, r2 = _normal_terms(pilots, received)
    if a - abs(s2) <= _RANK_TOL**2 * max(a, 1.0):
        return None
    det = a * a - abs(s2) ** 2
    h_direct = (a * r1 - np.conj(s2) * r2) / det
    h_image = (-s2 * r1 + a * r2) / det
    return np.array([h_direct, h_image])


def ls_estimate(pilots, received) -> np.ndarray:
    """Least-squares two-entry channel estimate from known pilots.

    Requires at least two pilots whose phases are not all equal modulo pi;
    otherwise the pilot and its conjugate are collinear and the fit is
    underdetermined.
    """
    pilots = np.asarray(pilots, dtype=complex).reshape(-1)
    received = np.asarray(received, dtype=complex).reshape(-1)
    if pilots.size < 2:
        raise ValueError("at least two pilot symbols are required")
    if pilots.size != received.size:
        raise ValueError("pilots and received samples must have the same length")
    solution = solve_two_path_ls(pilots, received)
    if solution is None:
        raise DegeneratePilotSetError(
            "degenerate pilot set: pilot column is collinear with its conjugate"
        )
    return solution


def mmse_estimate(pilots, received, noise_variance: float, prior_covariance) -> np.ndarray:
    """Linear MMSE estimate (P^H P + v C^-1)^-1 P^H y with prior covariance C.

    Reduces to LS as the noise variance goes to zero and shrinks to the zero
    vector as it grows.
    """
    if noise_variance < 0:
        raise ValueError("noise variance must be >= 0")
    prior = np.asarray(prior_covariance, dtype=complex)
    if prior.shape != (2, 2):
        raise ValueError("prior covariance must be 2x2")
    eigvals = np.linalg.eigvalsh(prior)
    if eigvals.min() <= 0:
        raise ValueError("prior covariance must be positive definite")
    P = pilot_matrix(pilots)
    received = np.asarray(received, dtype=complex).reshape(-1)
    gram = P.conj().T @ P
    rhs = P.conj().T @ received
    return np.linalg.solve(gram + noise_variance * np.linalg.inv(prior), rhs)


def detect_symbols(received, channel_estimate, constellation: Constellation, noise_power=None):
    """Per-symbol ML detection: argmin over the alphabet of
    |y - (c*h_direct + conj(c)*h_image)|^2.

    The decision is invariant to the (optional) noise power; ties go to the
    lowest constellation index.  Returns (symbols, bits).
    """
    h = np.asarray(channel_estimate, dtype=complex).reshape(-1)
    if h.size != 2 or not np.any(h):
        raise ValueError("channel estimate must be a non-zero length-2 vector")
    received = np.asarray(received, dtype=complex).reshape(-1)
    model = constellation.points * h[0] + np.conj(constellation.points) * h[1]
    d2 = np.abs(received[:, None] - model[None, :]) ** 2
    idx = np.argmin(d2, axis=1)
    symbols = constellation.points[idx]
    bits = constellation.label_bits[idx].reshape(-1)
    return symbols, bits
