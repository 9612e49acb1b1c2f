"""Monte Carlo trace estimation, 1/n expansion fitting, and base detection.

The pipeline: sample spectra, tabulate mean power sums per k with standard
errors, fit the coefficients of the expansion in powers of 1/n across the
dimension grid by weighted least squares, locate real exponential bases in
a fitted coefficient sequence with the matrix-pencil method, and estimate
outlier weights by counting eigenvalues in shrinking windows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import IllConditionedError, WindowTooShortError
from .models import sample_seed, trace_horizon
from .spectral import Region

# Matrix-pencil settings.
RANK_TOL = 1e-8          # singular values kept relative to the largest
REAL_BASE_TOL = 1e-6     # |Im z| <= tol * |z| counts as a real base
SEPARATION = 0.02        # bases must exceed lambda0 * (1 + SEPARATION)
AMPLITUDE_FLOOR = 1e-3   # relative to the largest fitted amplitude
LAMBDA1_SLACK = 0.05     # detected |base| may exceed lambda1 by this much
NOISE_SIGMA = 4.0        # contribution must exceed this many stderr units
NUM_EPS = 1e-13          # relative float-noise floor of the expansion fit

# Detection windows start here to damp transient finite-support parts.
DETECT_K_MIN = 4

_CHUNK = 2048


@dataclass(frozen=True, eq=False)
class TraceTable:
    """Mean power sums E[sum lambda**k] for one dimension n.

    ``covariance`` holds the covariance matrix of the mean vector across k
    (sample covariance / m); the trace noise at different k comes from the
    same draws and is strongly correlated, which downstream significance
    tests need.  It is None for tables loaded without it, in which case a
    fully coherent model stderr(k) * stderr(k') is assumed.
    """

    n: int
    ks: np.ndarray
    means: np.ndarray
    stderrs: np.ndarray
    m: int
    covariance: np.ndarray = None

    def __post_init__(self):
        for name in ("ks", "means", "stderrs"):
            arr = np.asarray(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.covariance is not None:
            cov = np.asarray(self.covariance)
            cov.setflags(write=False)
            object.__setattr__(self, "covariance", cov)
        if np.any(self.stderrs < 0):
            raise ValueError("standard errors must be nonnegative")
        if len(self.ks) != len(self.means) or len(self.ks) != len(self.stderrs):
            raise ValueError("ks, means, stderrs must have equal length")

    def covariance_model(self) -> np.ndarray:
        if self.covariance is not None:
            return np.asarray(self.covariance)
        return np.outer(self.stderrs, self.stderrs)


def mc_expected_trace(model, n: int, k_max: int, m: int, seed: int) -> TraceTable:
    """Monte Carlo estimate of the mean power-sum trace for k = 1..k_max.

    Samples are generated in seed-indexed chunks and reduced in chunk order,
    so the result is deterministic in (model, n, k_max, m, seed).
    """
    if m < 2:
        raise ValueError(f"need at least 2 samples, got {m}")
    if k_max < 1 or k_max > trace_horizon(n):
        raise ValueError(f"k_max={k_max} outside 1..K(n)={trace_horizon(n)}")
    ks = np.arange(1, k_max + 1)
    total = np.zeros(k_max)
    total_outer = np.zeros((k_max, k_max))
    done = 0
    while done < m:
        count = min(_CHUNK, m - done)
        chunk = np.zeros(k_max)
        chunk_outer = np.zeros((k_max, k_max))
        for i in range(done, done + count):
            eigs = model.sample(n, sample_seed(seed, n, i)).eigenvalues
            nz = eigs[eigs != 0]
            if len(nz):
                t = np.real(np.sum(nz[None, :] ** ks[:, None], axis=1))
                chunk += t
                chunk_outer += np.outer(t, t)
        total += chunk
        total_outer += chunk_outer
        done += count
    means = total / m
    cov = (total_outer - m * np.outer(means, means)) / (m - 1) / m
    var = np.maximum(np.diag(cov), 0.0)
    stderrs = np.sqrt(var)
    return TraceTable(n, ks, means, stderrs, m, cov)


def exact_trace_table(model, n: int, k_max: int) -> TraceTable:
    """Zero-noise table from a model's closed-form expected trace."""
    ks = np.arange(1, k_max + 1)
    means = np.array([model.exact_trace(n, int(k)) for k in ks])
    return TraceTable(n, ks, means, np.zeros(k_max), m=0)


@dataclass(frozen=True, eq=False)
class ExpansionEstimate:
    """Fitted coefficients c_i(k) of the expansion in powers of 1/n.

    ``level_covs`` propagates the trace-table covariances through the fit:
    entry i is the covariance matrix of c_i(k) across the k-window.  Exact
    input still carries the fit's own floating-point noise floor here.
    """

    r: int
    ks: np.ndarray
    coeffs: np.ndarray        # shape (len(ks), r); column i is c_i(k)
    residuals: np.ndarray     # weighted residual norm per k
    condition: float
    n_grid: tuple[int, ...]
    level_covs: tuple = None  # r matrices of shape (len(ks), len(ks))

    def level(self, i: int) -> np.ndarray:
        return self.coeffs[:, i]

    def level_covariance(self, i: int):
        if self.level_covs is None:
            return None
        return self.level_covs[i]

    def level_stderr(self, i: int) -> np.ndarray:
        if self.level_covs is None:
            return np.zeros(len(self.ks))
        return np.sqrt(np.maximum(np.diag(self.level_covs[i]), 0.0))

    def restrict(self, k_min: int) -> "ExpansionEstimate":
        mask = self.ks >= k_min
        covs = None
        if self.level_covs is not None:
            covs = tuple(c[np.ix_(mask, mask)] for c in self.level_covs)
        return ExpansionEstimate(
            self.r,
            self.ks[mask],
            self.coeffs[mask],
            self.residuals[mask],
            self.condition,
            self.n_grid,
            covs,
        )


def fit_expansion(tables: Sequence[TraceTable], r: int) -> ExpansionEstimate:
    """Weighted least squares of the trace means against (1, 1/n, ..., n**-(r-1)).

    Weights are 1/stderr**2, unit where stderr is zero.  Tables are sorted
    by n internally, so the coefficients do not depend on input order.
    """
    if r < 1:
        raise ValueError("expansion order r must be >= 1")
    tables = sorted(tables, key=lambda t: t.n)
    ns = [t.n for t in tables]
    if len(set(ns)) != len(ns):
        raise ValueError("duplicate dimensions in the table list")
    if len(ns) < r + 1:
        raise ValueError(f"need at least r+1 = {r + 1} dimensions, got {len(ns)}")
    k_lo = max(int(t.ks.min()) for t in tables)
    k_hi = min(int(t.ks.max()) for t in tables)
    if k_hi < k_lo:
        raise WindowTooShortError("tables share no common k-window")
    ks = np.arange(k_lo, k_hi + 1)
    x = 1.0 / np.asarray(ns, dtype=float)
    design = np.vander(x, r, increasing=True)
    col_scale = np.linalg.norm(design, axis=0)
    coeffs = np.zeros((len(ks), r))
    residuals = np.zeros(len(ks))
    solve_maps = np.zeros((len(ks), r, len(ns)))
    worst_cond = 0.0
    offsets = [int(np.searchsorted(t.ks, k_lo)) for t in tables]
    noisy = any(np.any(t.stderrs > 0) for t in tables)
    for row, k in enumerate(ks):
        y = np.array([t.means[off + row] for t, off in zip(tables, offsets)])
        se = np.array([t.stderrs[off + row] for t, off in zip(tables, offsets)])
        w = np.where(se > 0, 1.0 / np.where(se > 0, se, 1.0) ** 2, 1.0)
        sw = np.sqrt(w)
        a = design * sw[:, None]
        cond = float(np.linalg.cond(a))
        worst_cond = max(worst_cond, cond)
        if cond > 1e12:
            raise IllConditionedError(
                f"fit system condition {cond:.3e} exceeds 1e12 at k={k}",
                condition=cond,
                diagnostics={"k": int(k), "n_grid": tuple(ns), "r": r},
            )
        sol, *_ = np.linalg.lstsq(a / col_scale, y * sw, rcond=None)
        c = sol / col_scale
        coeffs[row] = c
        residuals[row] = float(np.linalg.norm((y - design @ c) * sw))
        # linear map y -> c, needed for noise propagation
        solve_maps[row] = (
            np.linalg.pinv(a / col_scale) * sw[None, :]
        ) / col_scale[:, None]
    covs = [np.zeros((len(ks), len(ks))) for _ in range(r)]
    if noisy:
        for t_idx, (table, off) in enumerate(zip(tables, offsets)):
            block = table.covariance_model()[
                off : off + len(ks), off : off + len(ks)
            ]
            for i in range(r):
                gain = solve_maps[:, i, t_idx]
                covs[i] += np.outer(gain, gain) * block
    # floating-point floor of the fit itself: a coefficient that sits far
    # below another column's contribution carries coherent roundoff of this
    # size, which downstream detection must not mistake for signal
    means = np.array(
        [[abs(t.means[off + row]) for t, off in zip(tables, offsets)]
         for row in range(len(ks))]
    )
    for i in range(r):
        num_scale = NUM_EPS * np.einsum(
            "kn,kn->k", np.abs(solve_maps[:, i, :]), means
        )
        covs[i] += np.outer(num_scale, num_scale)
    return ExpansionEstimate(
        r, ks, coeffs, residuals, worst_cond, tuple(ns), tuple(covs)
    )


@dataclass(frozen=True)
class DetectedBase:
    """One recovered exponential base with its weight."""

    ell: float
    amplitude: float
    level: int
    residual: float


def _pencil_poles(values: np.ndarray, max_poles: int) -> np.ndarray:
    n = len(values)
    cols = n // 2
    rows = n - cols
    h0 = np.empty((rows, cols))
    h1 = np.empty((rows, cols))
    for j in range(cols):
        h0[:, j] = values[j : j + rows]
        h1[:, j] = values[j + 1 : j + 1 + rows]
    u, s, vh = np.linalg.svd(h0, full_matrices=False)
    if s[0] == 0:
        return np.array([])
    rank = int(np.count_nonzero(s >= RANK_TOL * s[0]))
    rank = min(rank, max_poles)
    if rank == 0:
        return np.array([])
    core = (u[:, :rank].conj().T @ h1 @ vh[:rank].conj().T) / s[:rank][None, :]
    return np.linalg.eigvals(core)


def detect_bases(
    values: Sequence[float],
    ks: Sequence[int],
    lambda0: float,
    lambda1: Optional[float] = None,
    max_bases: int = 4,
    level: int = 0,
    noise_cov: Optional[np.ndarray] = None,
) -> list[DetectedBase]:
    """Fit values(k) ~ sum C_l * l**k and return the real bases beyond lambda0.

    Matrix-pencil poles of the Hankel pencil are kept when they are real
    (within REAL_BASE_TOL), exceed lambda0 * (1 + SEPARATION) in absolute
    value, and stay below lambda1 + LAMBDA1_SLACK.  Amplitudes come from a
    linear least-squares fit of pure exponentials (constant coefficients).
    A base is dropped when its amplitude falls below AMPLITUDE_FLOOR times
    the largest fitted amplitude, or, when ``noise_cov`` (covariance of the
    input sequence across the window) is given, when the amplitude is not
    NOISE_SIGMA of its own propagated standard error away from zero; Monte
    Carlo error in a fitted coefficient sequence is coherent across k, so
    it masquerades as a tiny genuine exponential and has to be rejected
    statistically.  An empty list is a valid outcome.
    """
    values = np.asarray(values, dtype=float)
    ks = np.asarray(ks, dtype=int)
    if len(values) != len(ks):
        raise ValueError("values and ks must have equal length")
    if len(values) < 2 * max_bases + 2:
        raise WindowTooShortError(
            f"window of length {len(values)} < 2 * max_bases + 2 = {2 * max_bases + 2}"
        )
    scale = float(np.max(np.abs(values))) if len(values) else 0.0
    if scale == 0.0:
        return []
    cov = None
    if noise_cov is not None:
        cov = np.asarray(noise_cov, dtype=float)
        if cov.shape != (len(ks), len(ks)):
            raise ValueError("noise_cov must match the k-window")
        if not np.any(np.diag(cov) > 0):
            cov = None
    poles = _pencil_poles(values, max_bases)
    kept: list[float] = []
    for z in poles:
        if abs(z.imag) > REAL_BASE_TOL * max(abs(z), 1e-300):
            continue
        x = float(z.real)
        if abs(x) <= lambda0 * (1.0 + SEPARATION):
            continue
        if lambda1 is not None and abs(x) > lambda1 + LAMBDA1_SLACK:
            continue
        if any(abs(x - y) <= 1e-9 * max(1.0, abs(x)) for y in kept):
            continue
        kept.append(x)

    while kept:
        z = np.array(kept, dtype=float)
        design = z[None, :] ** ks[:, None]
        amps, *_ = np.linalg.lstsq(design, values, rcond=None)
        if cov is not None:
            # propagated amplitude covariance P cov P'
            pinv = np.linalg.pinv(design)
            amp_se = np.sqrt(np.maximum(np.diag(pinv @ cov @ pinv.T), 0.0))
        else:
            amp_se = np.zeros(len(kept))
        c_min = AMPLITUDE_FLOOR * float(np.max(np.abs(amps)))
        drop = [
            i
            for i, a in enumerate(amps)
            if a < c_min or abs(a) < NOISE_SIGMA * amp_se[i]
        ]
        if not drop:
            resid = float(np.linalg.norm(values - design @ amps))
            out = [
                DetectedBase(float(b), float(a), level, resid)
                for b, a in zip(kept, amps)
            ]
            out.sort(key=lambda d: -abs(d.ell))
            return out
        kept = [b for i, b in enumerate(kept) if i not in drop]
    return []


def find_smallest_j(
    estimate: ExpansionEstimate,
    lambda0: float,
    lambda1: Optional[float] = None,
    max_bases: int = 4,
) -> Optional[int]:
    """Smallest level i whose fitted coefficient carries a base beyond lambda0.

    Returns None when every level up to r-1 is base-free.  Detection runs on
    the k >= DETECT_K_MIN part of the window.
    """
    est = estimate.restrict(DETECT_K_MIN)
    for i in range(est.r):
        found = detect_bases(
            est.level(i),
            est.ks,
            lambda0,
            lambda1,
            max_bases,
            level=i,
            noise_cov=est.level_covariance(i),
        )
        if found:
            return i
    return None


def region_expectations(
    model, n: int, m: int, seed: int, regions: Sequence[Region]
) -> list[tuple[float, float]]:
    """Empirical (ein, eout) for several regions in one pass over m samples."""
    counts = np.zeros(len(regions))
    dim = None
    for i in range(m):
        s = model.sample(n, sample_seed(seed, n, i))
        if dim is None:
            dim = s.n
        for j, region in enumerate(regions):
            counts[j] += int(np.count_nonzero(region.member_mask(s.eigenvalues)))
    eins = counts / m
    return [(float(e), float(dim - e)) for e in eins]


@dataclass(frozen=True)
class CEllEstimate:
    """Scaled eigenvalue counts near one base, per dimension, with the
    tail average used as the final estimate."""

    ell: float
    level: int
    theta: float
    per_n: tuple[tuple[int, float], ...]
    extrapolated: float


def estimate_C_ell(
    model,
    ell: float,
    j: int,
    theta: float,
    n_grid: Sequence[int],
    m: int,
    seed: int,
) -> CEllEstimate:
    """Estimate the outlier weight at ell from window counts.

    Per n, counts eigenvalues inside the closed ball of radius n**-theta
    about ell, scaled by n**j; the final value averages the two largest
    dimensions (the correction term has unknown sign and order, so plain
    averaging beats extrapolation here).
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    rows = []
    for n in sorted(n_grid):
        region = Region(None, (float(ell),), float(n) ** (-theta))
        (ein, _), = region_expectations(model, n, m, seed, [region])
        rows.append((int(n), float(ein * n**j)))
    tail = rows[-2:] if len(rows) >= 2 else rows
    extrapolated = float(np.mean([v for _, v in tail]))
    return CEllEstimate(float(ell), j, theta, tuple(rows), extrapolated)
