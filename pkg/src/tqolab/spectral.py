"""Eigensolvers, spectral bands, gap tracking, and containment checks."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .config import DEFAULT, SolverConfig
from .errors import NumericalError, ResourceCapError
from .operators import OperatorMatrix


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    max_residual: float


def dense_spectrum(M: OperatorMatrix, config: SolverConfig = DEFAULT) -> SpectrumResult:
    """Full Hermitian eigendecomposition with a residual audit."""
    if M.dim > config.dense_cap:
        raise ResourceCapError(
            f"dimension {M.dim} exceeds dense cap {config.dense_cap}; use low_spectrum")
    arr = M.toarray()
    w, v = np.linalg.eigh(arr)
    res = np.linalg.norm(arr @ v - v * w, axis=0).max() if w.size else 0.0
    return SpectrumResult(w, v, float(res))


def low_spectrum(M: OperatorMatrix, m: int, config: SolverConfig = DEFAULT,
                 return_vectors: bool = True) -> SpectrumResult:
    """Lowest m eigenvalues by implicitly restarted Lanczos (deterministic v0)."""
    if m > config.lanczos_max_k:
        raise ResourceCapError(f"m={m} exceeds Lanczos cap {config.lanczos_max_k}")
    if M.n > config.sparse_cap_qubits:
        raise ResourceCapError(
            f"{M.n} qubits exceeds sparse cap {config.sparse_cap_qubits}")
    dim = M.dim
    if m >= dim - 1 or dim <= 64:
        full = dense_spectrum(OperatorMatrix.from_matrix(M.toarray(), M.n), config)
        return SpectrumResult(full.eigenvalues[:m], full.eigenvectors[:, :m],
                              full.max_residual)
    rng = np.random.default_rng(config.seed)
    v0 = rng.standard_normal(dim)
    ncv = min(dim - 1, max(4 * m, 40))
    try:
        w, v = spla.eigsh(M.mat, k=m, which="SA", v0=v0, ncv=ncv)
    except spla.ArpackNoConvergence as exc:
        got = getattr(exc, "eigenvalues", np.array([]))
        raise NumericalError(
            f"Lanczos did not converge ({len(got)}/{m} Ritz pairs)",
            residual=float("nan")) from exc
    order = np.argsort(w)
    w, v = w[order], v[:, order]
    res = np.array([np.linalg.norm(M.mat @ v[:, i] - w[i] * v[:, i]) for i in range(m)])
    spread = np.diff(w)
    if spread.size and (np.abs(spread) < 1e-8).any():
        warnings.warn("near-degenerate Ritz cluster (spread < 1e-8)", stacklevel=2)
    return SpectrumResult(w, v if return_vectors else np.empty((0, 0)), float(res.max()))


# ---------------------------------------------------------------------------
# bands


@dataclass
class Band:
    label: int
    lo: float
    hi: float
    count: int

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass
class SpectralBands:
    eigenvalues: np.ndarray
    bands: list[Band]
    threshold: float

    @property
    def delta0(self) -> float:
        return self.bands[0].width

    @property
    def gap(self) -> float:
        if len(self.bands) < 2:
            return float("inf")
        return self.bands[1].lo - self.bands[0].hi


def cluster_bands(eigs: np.ndarray, threshold: float = 0.5) -> SpectralBands:
    """Greedy clustering: a new band opens when the gap exceeds the threshold."""
    eigs = np.sort(np.asarray(eigs, dtype=float))
    bands: list[Band] = []
    if eigs.size == 0:
        return SpectralBands(eigs, bands, threshold)
    lo = hi = eigs[0]
    count = 1
    for val in eigs[1:]:
        if val - hi > threshold:
            bands.append(Band(len(bands), lo, hi, count))
            lo = hi = val
            count = 1
        else:
            hi = val
            count += 1
    bands.append(Band(len(bands), lo, hi, count))
    return SpectralBands(eigs, bands, threshold)


# ---------------------------------------------------------------------------
# gap tracking


@dataclass
class GapPath:
    s_grid: np.ndarray
    gaps: np.ndarray
    e_min: np.ndarray
    e_max: np.ndarray

    @property
    def min_gap(self) -> float:
        return float(self.gaps.min())

    def holds(self, floor: float) -> bool:
        return bool((self.gaps >= floor).all())


def gap_path(model, family, s_grid, config: SolverConfig = DEFAULT) -> GapPath:
    """E_min, E_max (g-th eigenvalue), and the gap above the ground band per s.

    The gap at s is the (g+1)-th smallest eigenvalue of H0 + sV minus the
    g-th smallest, with g the unperturbed ground degeneracy.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    if s_grid.size and (s_grid.min() < 0 or s_grid.max() > 1):
        raise ValueError("s grid must lie in [0, 1]")
    g = model.ground_degeneracy
    h0 = model.h0_matrix(config)
    v = family if isinstance(family, OperatorMatrix) else family.realize(config)
    gaps, e_min, e_max = [], [], []
    for s in s_grid:
        hs = OperatorMatrix.from_matrix(h0.mat + s * v.mat, model.n_qubits)
        try:
            if hs.is_dense:
                w = np.linalg.eigvalsh(hs.toarray())[:g + 1]
            else:
                w = low_spectrum(hs, g + 1, config, return_vectors=False).eigenvalues
        except NumericalError as exc:
            raise NumericalError(f"eigensolve failed at s={s:.6g}: {exc}") from exc
        e_min.append(w[0])
        e_max.append(w[g - 1])
        gaps.append(w[g] - w[g - 1])
    return GapPath(s_grid, np.array(gaps), np.array(e_min), np.array(e_max))


# ---------------------------------------------------------------------------
# band-interval coverage


@dataclass
class Theorem1Coverage:
    shifted_eigenvalues: np.ndarray
    c1: float
    delta: float
    margins: np.ndarray          # >= 0 means inside some interval
    covered: bool

    def verdicts(self) -> list[bool]:
        return [m >= 0 for m in self.margins]


def _interval_margins(eigs: np.ndarray, J: float, c1: float, delta: float) -> np.ndarray:
    ks = np.arange(0, int(np.ceil(eigs.max())) + 2) if eigs.size else np.arange(1)
    lo = ks * (1 - c1 * J) - delta
    hi = ks * (1 + c1 * J) + delta
    margins = np.minimum(eigs[:, None] - lo[None, :], hi[None, :] - eigs[:, None])
    return margins.max(axis=1)


def check_theorem1(eigs: np.ndarray, J: float, c1: float, delta: float) -> Theorem1Coverage:
    """Coverage of the shifted spectrum by the band intervals I_k.

    The overall energy shift subtracts the computed ground energy, so band 0
    starts at 0 and I_0 = [-delta, delta].
    """
    eigs = np.sort(np.asarray(eigs, dtype=float))
    shifted = eigs - eigs[0]
    margins = _interval_margins(shifted, J, c1, delta)
    return Theorem1Coverage(shifted, c1, delta, margins, bool((margins >= 0).all()))


def fit_theorem1(eigs: np.ndarray, J: float, delta: float) -> float:
    """Smallest c1 such that all shifted eigenvalues are covered at this delta."""
    eigs = np.sort(np.asarray(eigs, dtype=float))
    shifted = eigs - eigs[0]
    ks = np.arange(1, int(np.ceil(shifted.max())) + 2)
    c1_needed = []
    for lam in shifted:
        if abs(lam) <= delta:
            c1_needed.append(0.0)
            continue
        per_k = (np.abs(lam - ks) - delta) / (ks * J)
        c1_needed.append(max(0.0, per_k.min()))
    return float(max(c1_needed)) if c1_needed else 0.0


# ---------------------------------------------------------------------------
# relative boundedness


@dataclass
class RelBoundReport:
    b: float
    kernel_defect: float
    containment: bool | None
    margin: float | None
    flagged: str | None = None


def check_relbound_containment(H0: OperatorMatrix, W: OperatorMatrix,
                               config: SolverConfig = DEFAULT) -> RelBoundReport:
    """Measured relative bound b and the interval-containment verdict.

    b is the largest singular value of W restricted to the orthogonal
    complement of ker(H0), scaled by 1/H0 there (the range-restricted pencil
    of W^2 against H0^2).  If W does not annihilate the kernel the bound is
    infinite and the verdict is skipped.  For b < 1 every eigenvalue of
    H0 + W must lie in some [lam0(1-b), lam0(1+b)].
    """
    if H0.dim > config.dense_cap:
        raise ResourceCapError("relative-bound check requires the dense path")
    w0, v0 = np.linalg.eigh(H0.toarray())
    scale = max(np.abs(w0).max(), 1.0)
    kernel_sel = np.abs(w0) <= 1e-8 * scale
    kernel = v0[:, kernel_sel]
    Wd = W.toarray()
    kernel_defect = float(np.linalg.norm(Wd @ kernel, 2)) if kernel.size else 0.0
    if kernel_defect > config.tol_iterative:
        return RelBoundReport(float("inf"), kernel_defect, None, None,
                              flagged="W does not annihilate ker(H0)")
    comp = v0[:, ~kernel_sel]
    lam = w0[~kernel_sel]
    if lam.size == 0:
        return RelBoundReport(0.0, kernel_defect, True, float("inf"))
    pencil = (Wd @ comp) / lam[None, :]
    b = float(np.linalg.svd(pencil, compute_uv=False)[0])
    if b >= 1.0:
        return RelBoundReport(b, kernel_defect, None, None,
                              flagged="b >= 1: relative-bound precondition unmet")
    eigs = np.linalg.eigvalsh(H0.toarray() + Wd)
    distinct = np.unique(np.round(w0, 10))
    lo = distinct * (1 - b)
    hi = distinct * (1 + b)
    lo2 = np.minimum(lo, hi)
    hi2 = np.maximum(lo, hi)
    margins = np.minimum(eigs[:, None] - lo2[None, :], hi2[None, :] - eigs[:, None]).max(axis=1)
    margin = float(margins.min())
    return RelBoundReport(b, kernel_defect, bool(margin >= -1e-10), margin)
