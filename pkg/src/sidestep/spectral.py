"""Region geometry, spectrum samples, trace splitting, and eigensolvers.

Regions are unions of a closed disk about 0 and finitely many small closed
disks about real points; membership uses closed balls throughout, so
boundary points count as inside.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import fsum
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    NonSymmetricError,
    SpectralRangeError,
    UnpairedNonrealError,
)

# Absolute tolerance on imaginary parts when deciding whether an eigenvalue
# is real / whether nonreal eigenvalues pair up.
PAIR_TOL = 1e-9


@dataclass(frozen=True)
class Region:
    """Union of the closed disk B_{center_radius}(0) and closed disks of
    radius ``point_radius`` about each of ``points``.

    ``center_radius=None`` omits the central disk entirely; note that a
    radius of 0 still denotes the closed ball {0}.
    """

    center_radius: float | None = None
    points: tuple[float, ...] = ()
    point_radius: float = 0.0

    def __post_init__(self):
        if self.center_radius is not None and self.center_radius < 0:
            raise ValueError("radii must be nonnegative")
        if self.point_radius < 0:
            raise ValueError("radii must be nonnegative")
        object.__setattr__(self, "points", tuple(float(p) for p in self.points))

    def contains(self, z: complex) -> bool:
        return region_contains(self, z)

    def member_mask(self, eigs: np.ndarray) -> np.ndarray:
        """Vectorized membership test over an eigenvalue array."""
        if self.center_radius is None:
            mask = np.zeros(len(eigs), dtype=bool)
        else:
            mask = np.abs(eigs) <= self.center_radius
        for p in self.points:
            mask |= np.abs(eigs - p) <= self.point_radius
        return mask


def region_contains(region: Region, z: complex) -> bool:
    if region.center_radius is not None and abs(z) <= region.center_radius:
        return True
    return any(abs(z - p) <= region.point_radius for p in region.points)


@dataclass(frozen=True, eq=False)
class SpectrumSample:
    """One sampled matrix, represented by its eigenvalue multiset."""

    eigenvalues: np.ndarray
    weight: float = 1.0
    n: int = 0

    def __post_init__(self):
        eigs = np.asarray(self.eigenvalues, dtype=complex)
        eigs.setflags(write=False)
        object.__setattr__(self, "eigenvalues", eigs)
        if self.n == 0:
            object.__setattr__(self, "n", len(eigs))
        if not 0 < self.weight <= 1:
            raise ValueError(f"weight must lie in (0, 1], got {self.weight}")
        if self.n != len(eigs):
            raise ValueError("n must match the number of eigenvalues")


def ein_eout(samples: Iterable[SpectrumSample], region: Region) -> tuple[float, float]:
    """Expected number of eigenvalues inside / outside the region.

    Weights must sum to 1 (within 1e-9); ein + eout = n up to the same
    rounding.  All samples must share one dimension.
    """
    ein_parts: list[float] = []
    eout_parts: list[float] = []
    weights: list[float] = []
    n = None
    for s in samples:
        if n is None:
            n = s.n
        elif s.n != n:
            raise DimensionMismatchError(f"sample dimension {s.n} != {n}")
        inside = int(np.count_nonzero(region.member_mask(s.eigenvalues)))
        ein_parts.append(s.weight * inside)
        eout_parts.append(s.weight * (s.n - inside))
        weights.append(s.weight)
    if n is None:
        raise ValueError("no samples given")
    total = fsum(weights)
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"sample weights sum to {total}, expected 1")
    return fsum(ein_parts), fsum(eout_parts)


def _real_mask(eigs: np.ndarray) -> np.ndarray:
    return np.abs(eigs.imag) <= PAIR_TOL


def _check_conjugate_pairing(nonreal: np.ndarray) -> None:
    """Greedy conjugate matching of the nonreal eigenvalues."""
    upper = sorted(
        (z for z in nonreal if z.imag > 0), key=lambda z: (z.real, z.imag)
    )
    lower = sorted(
        (z for z in nonreal if z.imag < 0), key=lambda z: (z.real, -z.imag)
    )
    if len(upper) != len(lower):
        raise UnpairedNonrealError(
            f"{len(upper)} upper-half vs {len(lower)} lower-half eigenvalues"
        )
    for u, v in zip(upper, lower):
        if abs(u - np.conj(v)) > 1e-6 * max(1.0, abs(u)):
            raise UnpairedNonrealError(f"no conjugate partner for {u}")


def trace_split(sample: SpectrumSample, k: int) -> tuple[float, float]:
    """Split the power sum sum(lambda**k) into real and nonreal parts.

    The nonreal part is real because nonreal eigenvalues occur in conjugate
    pairs; the residual imaginary part is checked against PAIR_TOL scaled by
    the magnitude of the sum of |mu|**k.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    eigs = sample.eigenvalues
    mask = _real_mask(eigs)
    real_part = float(np.sum(eigs.real[mask] ** k)) if mask.any() else 0.0
    nonreal = eigs[~mask]
    if len(nonreal) == 0:
        return real_part, 0.0
    _check_conjugate_pairing(nonreal)
    powers = nonreal**k
    total = complex(np.sum(powers))
    scale = float(np.sum(np.abs(powers)))
    if abs(total.imag) > PAIR_TOL * max(1.0, scale):
        raise UnpairedNonrealError(
            f"nonreal trace has imaginary residue {total.imag}"
        )
    return real_part, total.real


def real_trace_in_region(sample: SpectrumSample, k: int, region: Region) -> float:
    """Sum of lambda**k over the real eigenvalues lying inside the region."""
    eigs = sample.eigenvalues
    mask = _real_mask(eigs) & region.member_mask(eigs)
    if not mask.any():
        return 0.0
    return float(np.sum(eigs.real[mask] ** k))


def mean_real_trace(
    samples: Sequence[SpectrumSample], ks: Sequence[int]
) -> np.ndarray:
    """Weighted mean of RealTrace(M, k) across samples, for each k in ks."""
    ks = np.asarray(ks, dtype=int)
    acc = np.zeros(len(ks))
    for s in samples:
        eigs = s.eigenvalues
        re = eigs.real[_real_mask(eigs)]
        re = re[re != 0]
        if len(re):
            acc += s.weight * np.sum(re[None, :] ** ks[:, None], axis=1)
    return acc


def _tournament_rounds(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Round-robin schedule covering every index pair once per sweep in
    rounds of disjoint pairs (circle method; a dummy pads odd n)."""
    size = n + (n % 2)
    arr = list(range(size))
    rounds = []
    for _ in range(size - 1):
        ps, qs = [], []
        for i in range(size // 2):
            p, q = arr[i], arr[size - 1 - i]
            if p < n and q < n:
                ps.append(min(p, q))
                qs.append(max(p, q))
        rounds.append((np.array(ps), np.array(qs)))
        arr = [arr[0], arr[-1], *arr[1:-1]]
    return rounds


def sym_eigs(
    a: np.ndarray, want_vectors: bool = False
) -> np.ndarray | tuple[np.ndarray, np.ndarray]:
    """All eigenvalues of a dense real symmetric matrix, ascending.

    Cyclic Jacobi rotations in tournament order (each sweep visits every
    pair once, in rounds of disjoint pairs applied together), run until the
    off-diagonal Frobenius norm drops below 1e-12 times the matrix norm,
    capped at 60 sweeps.  With ``want_vectors`` also returns the orthogonal
    eigenvector matrix (columns match the sorted eigenvalues).
    """
    A = np.array(a, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NonSymmetricError(f"expected a square matrix, got shape {A.shape}")
    n = A.shape[0]
    scale = max(1.0, float(np.abs(A).max()))
    if float(np.abs(A - A.T).max()) > 1e-9 * scale:
        raise NonSymmetricError("matrix is not symmetric within 1e-9")
    A = (A + A.T) / 2.0
    norm = float(np.linalg.norm(A))
    V = np.eye(n)
    if n > 1 and norm > 0:
        tol = 1e-12 * norm
        rounds = _tournament_rounds(n)
        for _ in range(60):
            off = np.linalg.norm(A - np.diag(np.diag(A)))
            if off <= tol:
                break
            # Rotations below this cannot reduce the off-norm meaningfully.
            skip = (off / n) * 1e-9
            for ps, qs in rounds:
                apq = A[ps, qs]
                active = np.abs(apq) > skip
                if not active.any():
                    continue
                p = ps[active]
                q = qs[active]
                apq = apq[active]
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                root = np.sqrt(1.0 + tau * tau)
                t = np.where(tau == 0, 1.0, np.sign(tau) / (np.abs(tau) + root))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # disjoint pairs: apply all column, then all row rotations;
                # fancy indexing returns copies
                col_p = A[:, p]
                col_q = A[:, q]
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :]
                row_q = A[q, :]
                A[p, :] = c[:, None] * row_p - s[:, None] * row_q
                A[q, :] = s[:, None] * row_p + c[:, None] * row_q
                A[p, q] = 0.0
                A[q, p] = 0.0
                vp = V[:, p]
                vq = V[:, q]
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    values = np.diag(A).copy()
    order = np.argsort(values, kind="stable")
    values = values[order]
    if want_vectors:
        return values, V[:, order]
    return values


def hashimoto_from_adjacency(mus: Sequence[float], d: int) -> np.ndarray:
    """Map adjacency eigenvalues mu to directed-edge operator eigenvalues.

    Each mu yields both roots of lambda**2 - mu*lambda + (d-1) = 0.  Nonreal
    roots land on the circle of radius sqrt(d-1).  The constant +-1 blocks of
    the full directed-edge spectrum cancel in new-spectrum differences and
    are not emitted here.
    """
    if d < 3:
        raise ValueError(f"degree must be >= 3, got {d}")
    mus = np.asarray(mus, dtype=float)
    if len(mus) and float(np.abs(mus).max()) > d + 1e-9:
        bad = mus[np.abs(mus) > d + 1e-9][0]
        raise SpectralRangeError(f"|mu| = {abs(bad)} exceeds degree {d}")
    mus = np.clip(mus, -d, d)
    disc = mus * mus - 4.0 * (d - 1)
    sq = np.sqrt(disc.astype(complex))
    out = np.empty(2 * len(mus), dtype=complex)
    out[0::2] = (mus + sq) / 2.0
    out[1::2] = (mus - sq) / 2.0
    return out
