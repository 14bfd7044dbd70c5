"""Linearised reaction operator at an equilibrium and the spectral gap of
diffusion + reaction on Neumann domains.

Writing a = a* + h and dropping quadratic terms, the reaction part acts as
the I x I matrix

    L[i, j] = - sum_r kf_r a*^alpha^r (alpha_i - beta_i)(alpha_j - beta_j) / a*_j,

which is symmetric in the inner product <u, v> = sum_i u_i v_i / a*_i and
negative semidefinite, vanishing exactly on Ker(W)^perp complements.  On a
box with no-flux boundaries the full operator h -> diag(d) Lap h + L h
block-diagonalizes over Neumann cosine modes: mode k contributes the
matrix -mu_k diag(d) + L, with the k = 0 block restricted to Im W^T by the
conservation laws.  The spectral gap is the smallest distance from these
block spectra to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Domain, Interval, Rectangle
from .network import ReactionNetwork, is_four_species, stoichiometric_matrix
from .equilibrium import _relative_db_residual


class NotEquilibriumError(ValueError):
    """The supplied state does not balance every reaction."""


@dataclass(frozen=True)
class LinearisedMatrix:
    """Reaction linearisation L and the weights 1/a*_i of its inner product."""

    matrix: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class SpectralGapReport:
    lambda_star: float
    per_mode: tuple[tuple[float, float], ...]  # (laplacian eigenvalue, mode gap)
    modes_examined: int
    analytic_bound: float | None = None


def linearised_matrix(net: ReactionNetwork, a_inf,
                      equilibrium_tol: float = 1e-10) -> LinearisedMatrix:
    """Linearised reaction matrix at a detailed-balance equilibrium.

    Raises NotEquilibriumError when some reaction flux at ``a_inf`` exceeds
    ``equilibrium_tol`` relative to its one-sided fluxes.
    """
    a = np.asarray(a_inf, dtype=float)
    if a.shape != (net.n_species,) or np.any(a <= 0):
        raise ValueError("a_inf must be a strictly positive vector, one per species")
    _, relative = _relative_db_residual(net, a)
    if relative > equilibrium_tol:
        raise NotEquilibriumError(
            f"state is not an equilibrium (relative flux residual {relative:.3e})")
    E = (net.alpha_matrix() - net.beta_matrix()).astype(float)  # R x I
    coeff = net.kf_array() * np.prod(a[np.newaxis, :] ** net.alpha_matrix(), axis=1)
    L = -E.T @ (coeff[:, np.newaxis] * E / a[np.newaxis, :])
    return LinearisedMatrix(matrix=L, weights=1.0 / a)


def _jacobi_eigenvalues(S: np.ndarray, tol: float = 1e-12,
                        max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps until the off-diagonal Frobenius norm drops below ``tol``
    relative to the matrix norm.  Plenty for the small (I <= ~20) matrices
    that arise here.
    """
    A = np.array(S, dtype=float)
    n = A.shape[0]
    if n <= 1:
        return np.diag(A).copy() if n else np.zeros(0)
    norm = np.linalg.norm(A)
    if norm == 0.0:
        return np.zeros(n)
    target = tol * norm
    for _ in range(max_sweeps):
        strict_off = A - np.diag(np.diag(A))
        off = float(np.linalg.norm(strict_off))
        if off <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.hypot(1.0, tau))
                c = 1.0 / math.hypot(1.0, t)
                s = t * c
                rot = np.array([[c, s], [-s, c]])
                A[[p, q], :] = rot.T @ A[[p, q], :]
                A[:, [p, q]] = A[:, [p, q]] @ rot
                A[p, q] = A[q, p] = 0.0
    else:
        raise RuntimeError("Jacobi iteration did not converge")
    return np.sort(np.diag(A))


def _orthonormalize(columns: np.ndarray, drop_tol: float = 1e-12) -> np.ndarray:
    """Modified Gram-Schmidt, dropping dependent columns."""
    out = []
    for j in range(columns.shape[1]):
        v = columns[:, j].astype(float).copy()
        scale = np.linalg.norm(v)
        for u in out:
            v -= (u @ v) * u
        # second pass for numerical orthogonality
        for u in out:
            v -= (u @ v) * u
        norm = np.linalg.norm(v)
        if norm > drop_tol * max(scale, 1.0):
            out.append(v / norm)
    if not out:
        return np.zeros((columns.shape[0], 0))
    return np.column_stack(out)


def weighted_spectrum(lin: LinearisedMatrix, subspace: np.ndarray | None = None,
                      symmetry_tol: float = 1e-9,
                      jacobi_tol: float = 1e-12) -> np.ndarray:
    """Ascending real eigenvalues of L in its weighted inner product.

    Similarity-transforms with diag(sqrt(w)) to an ordinary symmetric
    matrix, optionally projects onto ``subspace`` (columns spanning a
    subspace in state coordinates, orthonormalized in the weighted inner
    product), then runs cyclic Jacobi.
    """
    sqrt_w = np.sqrt(lin.weights)
    S = sqrt_w[:, np.newaxis] * lin.matrix / sqrt_w[np.newaxis, :]
    asym = np.max(np.abs(S - S.T))
    if asym > symmetry_tol * max(1.0, np.linalg.norm(S)):
        raise ValueError(
            f"operator is not symmetric in the weighted inner product "
            f"(asymmetry {asym:.3e}); the base state is not a valid equilibrium")
    S = 0.5 * (S + S.T)
    if subspace is not None:
        basis = _orthonormalize(sqrt_w[:, np.newaxis] * np.asarray(subspace, float))
        S = basis.T @ S @ basis
    return _jacobi_eigenvalues(S, tol=jacobi_tol)


def neumann_eigenvalues(domain: Domain, count: int) -> np.ndarray:
    """First ``count`` Neumann Laplacian eigenvalues of the box, ascending.

    Interval: (k pi / L)^2.  Rectangle: sorted sums over both axes.  The
    first entry is always 0; the second is the domain's Poincare constant.
    """
    if count <= 0:
        return np.zeros(0)
    if isinstance(domain, Interval):
        k = np.arange(count)
        return (k * math.pi / domain.length) ** 2
    if isinstance(domain, Rectangle):
        # Grow the (kx, ky) index window until the count-th smallest sum is
        # strictly below the first excluded eigenvalue on each axis, which
        # guarantees no smaller sum lies outside the window.
        radius = math.sqrt(4.0 * count / (math.pi * domain.lx * domain.ly)) + 2.0
        kx = min(count, int(radius * domain.lx) + 2)
        ky = min(count, int(radius * domain.ly) + 2)
        while True:
            mx = (np.arange(kx) * math.pi / domain.lx) ** 2
            my = (np.arange(ky) * math.pi / domain.ly) ** 2
            sums = (mx[:, np.newaxis] + my[np.newaxis, :]).ravel()
            sums.sort()
            if sums.size >= count:
                threshold = sums[count - 1]
                next_x = (kx * math.pi / domain.lx) ** 2
                next_y = (ky * math.pi / domain.ly) ** 2
                if (kx >= count or threshold < next_x) and \
                   (ky >= count or threshold < next_y):
                    return sums[:count]
            kx = min(count, 2 * kx)
            ky = min(count, 2 * ky)
    raise TypeError(f"unsupported domain {domain!r}")


def analytic_gap_bound_four_species(a_inf, d, c_omega: float) -> float:
    """Constructive lower bound for the four-species gap, |Omega| = 1.

    With pair masses M12 = a1 + a2, M14 = a1 + a4, M32 = a3 + a2,
    M34 = a3 + a4 and C_M = M12*M32*M14*M34 / M^2, the gap is at least
    gamma * min_i d_i where gamma = min(C_Omega, C_M (sum 1/a_i)^2 /
    (sum d_i/a_i)).  Valid for unit reaction rates.
    """
    a = np.asarray(a_inf, dtype=float)
    d = np.asarray(d, dtype=float)
    if a.shape != (4,) or d.shape != (4,):
        raise ValueError("the analytic bound applies to four-species systems only")
    if np.any(a <= 0) or np.any(d <= 0):
        raise ValueError("equilibrium values and diffusion must be positive")
    m12, m14, m32, m34 = a[0] + a[1], a[0] + a[3], a[2] + a[1], a[2] + a[3]
    total = a.sum()
    c_m = m12 * m32 * m14 * m34 / total ** 2
    gamma = min(float(c_omega), c_m * np.sum(1.0 / a) ** 2 / np.sum(d / a))
    return gamma * float(np.min(d))


def _analytic_bound_applies(net: ReactionNetwork, domain: Domain) -> bool:
    return (is_four_species(net)
            and math.isclose(domain.measure, 1.0, rel_tol=1e-12)
            and math.isclose(net.reactions[0].kf, 1.0, rel_tol=1e-12)
            and math.isclose(net.reactions[0].kb, 1.0, rel_tol=1e-12))


def operator_spectral_gap(net: ReactionNetwork, a_inf, domain: Domain,
                          max_modes: int = 100_000) -> SpectralGapReport:
    """Spectral gap of h -> diag(d) Lap h + L h over Neumann modes.

    Mode 0 is restricted to Im W^T (the conservation constraint); higher
    modes act on the full space.  Enumeration stops once
    mu_k * min_i d_i exceeds the running minimum, after which no mode can
    lower the gap (each mode matrix is bounded above by -mu_k min_i d_i).
    """
    lin = linearised_matrix(net, a_inf)
    a = np.asarray(a_inf, dtype=float)
    d = net.diffusion_array()
    if np.any(d <= 0):
        raise ValueError("diffusion coefficients must be strictly positive")
    dmin = float(np.min(d))
    W = stoichiometric_matrix(net)

    mode0 = weighted_spectrum(lin, subspace=W.T.astype(float))
    if mode0.size == 0:
        raise ValueError("network has no reactive directions")
    per_mode = [(0.0, float(-mode0[-1]))]
    lam = per_mode[0][1]

    chunk = 64
    mus = neumann_eigenvalues(domain, chunk)
    k = 1
    prev = (None, None)
    while True:
        if k >= len(mus):
            chunk *= 2
            if chunk > 4 * max_modes:
                raise RuntimeError("mode enumeration budget exhausted")
            mus = neumann_eigenvalues(domain, chunk)
            continue
        mu = float(mus[k])
        if mu * dmin >= lam:
            break
        if mu == prev[0]:
            gap = prev[1]  # repeated rectangle eigenvalue, same block
        else:
            lin_k = LinearisedMatrix(matrix=-mu * np.diag(d) + lin.matrix,
                                     weights=lin.weights)
            spectrum = weighted_spectrum(lin_k)
            gap = float(-spectrum[-1])
        per_mode.append((mu, gap))
        lam = min(lam, gap)
        prev = (mu, gap)
        k += 1
        if k > max_modes:
            raise RuntimeError("mode enumeration budget exhausted")

    bound = None
    if _analytic_bound_applies(net, domain):
        poincare = float(neumann_eigenvalues(domain, 2)[1])
        bound = analytic_gap_bound_four_species(a, d, poincare)
    return SpectralGapReport(lambda_star=lam, per_mode=tuple(per_mode),
                             modes_examined=len(per_mode), analytic_bound=bound)
