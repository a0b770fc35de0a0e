"""Spectral-flow engine: generator, ordered-exponential transport, and the
rewrite of the conjugated Hamiltonian into ground-commuting local pieces.

The flow generator is the odd-filtered Heisenberg image of the path
derivative: its ground-to-excited matrix elements equal V_mn/(E_m - E_n)
whenever the gap clears the filter cutoff, which is what transports spectral
projectors exactly along a gapped path.  Everything here is dense: the
generator needs the instantaneous eigenbasis.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.integrate

from .config import DEFAULT, SolverConfig
from .errors import FlowAbortError, ResourceCapError
from .filters import FilterSpec, spectral_multiplier
from .lattice import ball, box_partition, site_ball
from .models import CommutingProjectorModel, GroundData, local_projector
from .operators import (OperatorMatrix, conditional_expectation,
                        locality_profile, operator_norm)
from .perturb import LocalFamily, site_split, strength_of
from .spectral import RelBoundReport, SpectrumResult, check_relbound_containment

_DEFAULT_F_CUTOFF = 0.5


def _dense_pair(model: CommutingProjectorModel, family: LocalFamily,
                config: SolverConfig):
    dim = 1 << model.n_qubits
    if dim > config.dense_cap:
        raise ResourceCapError(
            f"flow is dense-only (dim {dim} > cap {config.dense_cap})")
    h0 = model.h0_matrix(config, force="dense").toarray().astype(complex)
    v = family.realize(config).toarray().astype(complex)
    return h0, v


def generator_Ds(model: CommutingProjectorModel, family: LocalFamily, s: float,
                 filter_F: FilterSpec, config: SolverConfig = DEFAULT) -> OperatorMatrix:
    """D_s with i D_s the filter-multiplied path derivative in the H_s eigenbasis."""
    h0, v = _dense_pair(model, family, config)
    w, vecs = np.linalg.eigh(h0 + s * v)
    iD = spectral_multiplier(filter_F, OperatorMatrix.from_matrix(v, model.n_qubits),
                             (w, vecs))
    return OperatorMatrix.from_matrix(-1j * iD.toarray(), model.n_qubits)


@dataclass
class FlowState:
    s: float
    U: np.ndarray
    P0: np.ndarray
    n: int
    unitarity_defect: float
    gap_history: list[tuple[float, float]] = field(default_factory=list)
    n_rhs_evaluations: int = 0

    @property
    def tracked_P(self) -> np.ndarray:
        return self.U @ self.P0 @ self.U.conj().T

    @property
    def tracked_rank(self) -> float:
        return float(np.trace(self.tracked_P).real)


def evolve_U(model: CommutingProjectorModel, family: LocalFamily, s_target: float,
             ground: GroundData, filter_F: FilterSpec | None = None,
             config: SolverConfig = DEFAULT) -> FlowState:
    """Integrate dU/ds = (iD_s) U with adaptive stepping and polar re-unitarization.

    The instantaneous gap above the tracked band is monitored at every
    right-hand-side evaluation; if it falls below ``config.gap_floor`` the
    flow aborts, reporting the offending s.
    """
    filter_F = filter_F or FilterSpec("F", _DEFAULT_F_CUTOFF)
    h0, v = _dense_pair(model, family, config)
    dim = h0.shape[0]
    g = ground.degeneracy
    gap_history: list[tuple[float, float]] = []
    counter = [0]

    def rhs(s, y):
        counter[0] += 1
        U = y.reshape(dim, dim)
        w, vecs = np.linalg.eigh(h0 + s * v)
        gap = float(w[g] - w[g - 1])
        gap_history.append((float(s), gap))
        if gap < config.gap_floor:
            raise FlowAbortError(float(s), gap, config.gap_floor)
        vt = vecs.conj().T @ v @ vecs
        mult = filter_F.fourier(w[:, None] - w[None, :])
        iD = vecs @ (mult * vt) @ vecs.conj().T
        return (iD @ U).ravel()

    y0 = np.eye(dim, dtype=complex).ravel()
    if s_target == 0.0:
        sol_y = y0
    else:
        sol = scipy.integrate.solve_ivp(rhs, (0.0, s_target), y0, method="RK45",
                                        rtol=config.ode_tol, atol=config.ode_tol)
        if not sol.success:
            raise FlowAbortError(float(sol.t[-1]), float("nan"), config.gap_floor)
        sol_y = sol.y[:, -1]
    U = sol_y.reshape(dim, dim)
    defect = float(np.linalg.norm(U.conj().T @ U - np.eye(dim), 2))
    if defect > 1e-10:
        uu, _, vvh = np.linalg.svd(U)
        U = uu @ vvh
    P0 = ground.P.toarray() if ground.P is not None else ground.basis @ ground.basis.conj().T
    return FlowState(s_target, U, P0, model.n_qubits, defect, gap_history, counter[0])


def check_samespace(flow: FlowState, model: CommutingProjectorModel,
                    family: LocalFamily, config: SolverConfig = DEFAULT) -> float:
    """|| P_direct(s) - U P(0) U^dag ||: transport error of the ground projector."""
    h0, v = _dense_pair(model, family, config)
    w, vecs = np.linalg.eigh(h0 + flow.s * v)
    g = int(round(np.trace(flow.P0).real))
    B = vecs[:, :g]
    direct = B @ B.conj().T
    return float(np.linalg.norm(direct - flow.tracked_P, 2))


@dataclass
class ConjugationResult:
    H_prime: OperatorMatrix
    V_prime: OperatorMatrix
    commutator_with_P: float
    strength: object


def conjugated_hamiltonian(flow: FlowState, model: CommutingProjectorModel,
                           family: LocalFamily,
                           config: SolverConfig = DEFAULT) -> ConjugationResult:
    """H' = U^dag H_s U, its perturbation V' = H' - H0, and the audits on both."""
    h0, v = _dense_pair(model, family, config)
    hs = h0 + flow.s * v
    hp = flow.U.conj().T @ hs @ flow.U
    hp = (hp + hp.conj().T) / 2.0
    vp = hp - h0
    comm = float(np.linalg.norm(hp @ flow.P0 - flow.P0 @ hp, 2))
    vp_op = OperatorMatrix.from_matrix(vp, model.n_qubits)
    strength = strength_of(vp_op, model.layout, config)
    return ConjugationResult(OperatorMatrix.from_matrix(hp, model.n_qubits),
                             vp_op, comm, strength)


# ---------------------------------------------------------------------------
# global -> local rewrite


@dataclass
class LocalRewrite:
    site_terms: dict[tuple, OperatorMatrix]            # X_u per site
    reconstruction_error: float
    telescoping_error: float
    max_commutator_with_P: float
    profiles: dict[tuple, list[tuple[int, float]]]     # shell norms per site

    def as_dict(self) -> dict:
        return {"reconstruction_error": self.reconstruction_error,
                "telescoping_error": self.telescoping_error,
                "max_commutator_with_P": self.max_commutator_with_P,
                "profiles": {str(k): v for k, v in self.profiles.items()}}


def rewrite_global_to_local(H_prime: OperatorMatrix, model: CommutingProjectorModel,
                            ground: GroundData, filter_g: FilterSpec,
                            config: SolverConfig = DEFAULT) -> LocalRewrite:
    """Write H' = H0 + sum_u X_u with every X_u commuting with P.

    V' is split into per-site pieces by the shell peel; each piece and each
    model projector is band-filtered under H' (the bump passes within-band
    matrix elements untouched and kills cross-band ones), and the projector
    corrections are attributed to the site anchoring their square.  Since the
    bump is 1 at zero frequency, filtering H' itself is the identity, which
    makes the telescoping sum exact.
    """
    n = model.n_qubits
    h0 = model.h0_matrix(config, force="dense").toarray().astype(complex)
    hp = H_prime.toarray()
    vp = OperatorMatrix.from_matrix(hp - h0, n)
    eig = np.linalg.eigh(hp)
    w, vecs = eig
    spectrum = SpectrumResult(w, vecs, 0.0)

    def filtered(op: OperatorMatrix) -> OperatorMatrix:
        return spectral_multiplier(filter_g, op, spectrum)

    v_sites = site_split(vp, model.layout, config)
    vt_sites = {u: filtered(vu) for u, vu in v_sites.items()}

    site_terms: dict[tuple, OperatorMatrix] = dict(vt_sites)
    telescope = sum((t.toarray() for t in vt_sites.values()),
                    np.zeros_like(hp))
    for i, term in enumerate(model.terms):
        q_a = model.term_projector(i, config)
        q_t = filtered(OperatorMatrix.from_matrix(q_a.toarray().astype(complex), n))
        telescope = telescope + q_t.toarray()
        u = term.square.anchor
        corr = q_t - q_a
        site_terms[u] = site_terms[u] + corr if u in site_terms else corr

    recon = h0 + sum((x.toarray() for x in site_terms.values()), np.zeros_like(hp))
    recon_err = float(np.linalg.norm(recon - hp, 2))
    tel_err = float(np.linalg.norm(telescope - hp, 2))
    P = ground.P.toarray()
    comm = max(float(np.linalg.norm(x.mat @ P - P @ x.mat, 2))
               for x in site_terms.values())
    profiles = {}
    for u, x in site_terms.items():
        prof = locality_profile(x, u, model.layout)
        entries = prof.norms_by_radius + [(prof.saturation_radius, prof.residual_norm)]
        profiles[u] = [(l, float(v)) for l, v in entries]
    return LocalRewrite(site_terms, recon_err, tel_err, comm, profiles)


# ---------------------------------------------------------------------------
# locally block-diagonal decomposition


@dataclass
class DecompTerm:
    kind: str              # "Y" or "Z"
    index: int
    region_m: int          # supported on the ball of index m (size 2(m-1)+1)
    op: OperatorMatrix

    @property
    def norm(self) -> float:
        return operator_norm(self.op)


@dataclass
class LocalDecomposition:
    site: tuple
    terms: list[DecompTerm]
    delta: OperatorMatrix
    scalar_shifts: list[tuple[int, float]]
    resolution_error: float
    reconstruction_error: float
    max_annihilation_defect: float
    y_norms: list[tuple[int, float]]
    z_norms: list[tuple[int, float]]
    tqo_radius_used: int


def decompose_local(X_u: OperatorMatrix, model: CommutingProjectorModel,
                    ground: GroundData, site: tuple,
                    config: SolverConfig = DEFAULT,
                    L_star: int | None = None) -> LocalDecomposition:
    """Split a ground-commuting near-site term into pieces annihilating P.

    Shell q of the input (supported on the ball of index q) is scalar-shifted
    so its ground block is traceless whenever the shift radius is certified;
    the residual ground block is removed as the Delta remainder.  The nested
    projector differences E_m resolve the identity exactly, and regrouping
    E_p X(q) E_r by the larger of p, r yields the Y/Z terms: all Hermitian,
    all annihilating P, supported on increasing balls around the site.
    """
    n = model.n_qubits
    layout = model.layout
    torus = model.torus
    P = ground.P.toarray()
    g = ground.degeneracy
    dim = 1 << n

    prof = locality_profile(X_u, site, layout)
    M = prof.saturation_radius + 1           # ball index with B_M = whole lattice
    shells: dict[int, np.ndarray] = {l + 1: op.toarray().astype(complex)
                                     for l, op in prof.shells}
    shells[M] = prof.residual.toarray().astype(complex)

    if L_star is None:
        # scalar shifts are valid up to the largest scalar-block radius
        from .tqo import check_tqo1
        L_star = 0
        for r in range(1, torus.L + 1):
            if check_tqo1(model, None, r, config, method="gf2").status != "pass":
                break
            L_star = r
    shifts = []
    for q in sorted(shells):
        size = 2 * (q - 1) + 1
        if size <= L_star and q <= M:
            c = float(np.trace(P @ shells[q] @ P).real) / g
            shells[q] = shells[q] - c * np.eye(dim)
            shifts.append((q, c))
    x_shift = sum(shells.values())
    delta = P @ x_shift @ P
    shells[M] = shells[M] - delta

    balls = {}
    for m in range(1, M):
        sq, sat = site_ball(torus, site, m - 1)
        balls[m] = local_projector(model, sq, config).toarray()
    balls[M] = P
    E = {1: np.eye(dim) - balls[1]}
    for m in range(2, M + 1):
        E[m] = balls[m - 1] - balls[m]
    E[M + 1] = P
    resolution = sum(E.values()) - np.eye(dim)
    resolution_error = float(np.abs(resolution).max())

    terms: list[DecompTerm] = []
    y_norms, z_norms = [], []
    for j in range(2, 2 * M + 1):
        acc = np.zeros((dim, dim), dtype=complex)
        for p in range(1, M + 1):
            r = j - p
            if not 1 <= r <= M:
                continue
            qmax = max(p, r) - 2
            if qmax < 1:
                continue
            xsum = sum(shells[q] for q in range(1, qmax + 1) if q in shells)
            if np.isscalar(xsum):
                continue
            acc += E[p] @ xsum @ E[r]
        if np.abs(acc).max() > 0:
            op = OperatorMatrix.from_matrix(acc, n)
            terms.append(DecompTerm("Y", j, min(j - 1, M), op))
        y_norms.append((j, float(np.linalg.norm(acc, 2))))
    for q in sorted(shells):
        acc = np.zeros((dim, dim), dtype=complex)
        cap = min(q + 1, M)
        for p in range(1, cap + 1):
            for r in range(1, cap + 1):
                acc += E[p] @ shells[q] @ E[r]
        op = OperatorMatrix.from_matrix(acc, n)
        terms.append(DecompTerm("Z", q, cap, op))
        z_norms.append((q, float(np.linalg.norm(acc, 2))))

    total = sum((t.op.toarray() for t in terms), np.zeros((dim, dim), dtype=complex))
    recon_err = float(np.linalg.norm(total - (x_shift - delta), 2))
    ann = 0.0
    for t in terms:
        ann = max(ann, float(np.linalg.norm(t.op.mat @ P, 2)),
                  float(np.linalg.norm(P @ t.op.mat, 2)))
    return LocalDecomposition(site, terms, OperatorMatrix.from_matrix(delta, n),
                              shifts, resolution_error, recon_err, ann,
                              y_norms, z_norms, L_star)


# ---------------------------------------------------------------------------
# relative bounds of the decomposed family


@dataclass
class FamilyRelBound:
    per_radius: dict[int, RelBoundReport]
    total_b: float
    combined: RelBoundReport
    box_margins: dict[int, float]
    annihilation_defect: float


def relbound_of_family(decomps: list[LocalDecomposition],
                       model: CommutingProjectorModel, ground: GroundData,
                       config: SolverConfig = DEFAULT) -> FamilyRelBound:
    """Per-radius relative bounds b(r) of the decomposed terms, their sum, and
    the box-partition operator inequality backing the bound."""
    n = model.n_qubits
    dim = 1 << n
    L = model.torus.L
    P = ground.P.toarray()
    h0 = model.h0_matrix(config, force="dense")
    groups: dict[int, np.ndarray] = {}
    ann = 0.0
    for dec in decomps:
        for t in dec.terms:
            r_eff = min(2 * (t.region_m - 1) + 1, L)
            groups.setdefault(r_eff, np.zeros((dim, dim), dtype=complex))
            groups[r_eff] += t.op.toarray()
            ann = max(ann, float(np.linalg.norm(t.op.mat @ P, 2)))
    if ann > config.tol_iterative:
        raise ValueError(f"a decomposed term fails to annihilate P (defect {ann:.3g})")
    per_radius = {}
    for r, W in sorted(groups.items()):
        per_radius[r] = check_relbound_containment(
            h0, OperatorMatrix.from_matrix(W, n), config)
    total_b = sum(rep.b for rep in per_radius.values())
    W_all = sum(groups.values(), np.zeros((dim, dim), dtype=complex))
    combined = check_relbound_containment(h0, OperatorMatrix.from_matrix(W_all, n), config)
    box_margins = {}
    for r in sorted({r for r in groups if 2 <= r <= L}):
        box_margins[r] = check_box_inequality(model, r, config)
    if 2 not in box_margins and L >= 2:
        box_margins[2] = check_box_inequality(model, 2, config)
    return FamilyRelBound(per_radius, total_b, combined, box_margins, ann)


def check_box_inequality(model: CommutingProjectorModel, r: int,
                         config: SolverConfig = DEFAULT) -> float:
    """Minimum eigenvalue of H0^2 - G with G the occupied-box-count-squared
    operator of the size-r box partition (nonnegative when the defect-count
    argument holds)."""
    boxes = box_partition(model.torus, r)
    if len(boxes) > 12:
        raise ResourceCapError(f"{len(boxes)} boxes exceed the projector cap (12)")
    n = model.n_qubits
    dim = 1 << n
    pbs = [local_projector(model, b, config).toarray() for b in boxes]
    qbs = [np.eye(dim) - pb for pb in pbs]
    G = np.zeros((dim, dim), dtype=complex)
    for mask in range(1 << len(boxes)):
        k = bin(mask).count("1")
        if k == 0:
            continue
        R = np.eye(dim, dtype=complex)
        for a in range(len(boxes)):
            R = R @ (qbs[a] if (mask >> a) & 1 else pbs[a])
        G += (k * k) * R
    h0 = model.h0_matrix(config, force="dense").toarray()
    diff = h0 @ h0 - G
    return float(np.linalg.eigvalsh((diff + diff.conj().T) / 2.0).min())
