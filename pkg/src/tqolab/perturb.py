"""Perturbation families: construction, strength measurement, pinching.

A family is a list of square-supported Hermitian terms.  Measuring the
"strength" of a bare operator requires choosing a decomposition; the
convention here is sequential shell peeling: sweep radii outward and, per
radius, visit sites in row-major order, assigning each site whatever part of
the remaining operator its ball can localize (its conditional expectation)
and subtracting it.  The peel telescopes to an exact decomposition; a sum of
single-site terms is recovered entirely at radius zero.  The measured
strength of a constructed family can exceed its nominal J by at most the
number of squares sharing a site (the usual decomposition-convention factor).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import DEFAULT, SolverConfig
from .errors import ResourceCapError
from .lattice import QubitLayout, Square, enumerate_squares
from .models import CommutingProjectorModel, GroundData
from .operators import (OperatorMatrix, PauliString, conditional_expectation,
                        embed_on_support, hermitian_from_pauli_coeffs,
                        hermitian_pauli, operator_norm, realize)


@dataclass
class FamilyTerm:
    r: int
    square: Square
    support: tuple[int, ...]
    local: np.ndarray                                  # dense on the support
    paulis: list[tuple[float, PauliString]] | None = None

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.local, 2))


@dataclass
class LocalFamily:
    layout: QubitLayout
    terms: list[FamilyTerm]
    strength_J: float
    decay_mu: float | None = None
    decay_tag: str = "single-radius"
    seed: int | None = None

    @property
    def n_qubits(self) -> int:
        return self.layout.n_qubits

    def realize(self, config: SolverConfig = DEFAULT) -> OperatorMatrix:
        n = self.n_qubits
        dim = 1 << n
        if dim <= config.dense_cap:
            total = np.zeros((dim, dim), dtype=complex)
            for t in self.terms:
                if len(t.support) == n:
                    total += t.local
                else:
                    total += embed_on_support(t.local, t.support, n)
            return OperatorMatrix.from_matrix(total, n)
        paulis: list[tuple[float, PauliString]] = []
        for t in self.terms:
            if t.paulis is None:
                raise ResourceCapError(
                    "family term without Pauli terms cannot be realized sparsely")
            paulis.extend(t.paulis)
        return realize(paulis, n, config)

    def term_norms(self) -> list[float]:
        return [t.norm for t in self.terms]


def _pauli_term(layout: QubitLayout, r: int, square: Square,
                coeff: float, p: PauliString) -> FamilyTerm:
    support = tuple(sorted(p.support)) or (0,)
    local = coeff * _restrict_dense(p, support)
    return FamilyTerm(r, square, support, local, [(coeff, p)])


def _restrict_dense(p: PauliString, support) -> np.ndarray:
    from .gf2 import restrict_to
    return restrict_to(p, list(support)).dense()


def uniform_field(model: CommutingProjectorModel, axis: str, h: float) -> LocalFamily:
    """One single-qubit field term per qubit; strength equals |h|."""
    if abs(h) >= 1.0:
        raise ValueError(f"|h| must be below 1, got {h}")
    layout = model.layout
    n = layout.n_qubits
    terms = []
    for coord in layout.torus.sites():
        for slot in range(layout.qubits_per_cell):
            q = layout.qubit(coord, slot)
            p = PauliString.single(n, q, axis.upper())
            terms.append(_pauli_term(layout, 1, Square(coord, 1), h, p))
    return LocalFamily(layout, terms, abs(h), None, "single-radius")


def random_family(model: CommutingProjectorModel, J: float, mu: float,
                  r_max: int, seed: int) -> LocalFamily:
    """Random Hermitian terms on every square up to r_max.

    Per square, coefficients are independent standard normals over the
    traceless Hermitian Pauli basis of its support, rescaled so the term norm
    is J exp(-mu r) u with u uniform on [0, 1).  Deterministic under the seed.
    """
    if r_max > model.torus.L:
        raise ValueError(f"r_max={r_max} exceeds lattice size {model.torus.L}")
    layout = model.layout
    n = layout.n_qubits
    rng = np.random.default_rng(seed)
    terms = []
    for r in range(1, r_max + 1):
        for square in enumerate_squares(layout.torus, r):
            support = layout.region_qubits(square)
            m = len(support)
            coeffs = rng.standard_normal(4 ** m - 1)
            local = hermitian_from_pauli_coeffs(coeffs, m)
            nrm = float(np.linalg.norm(local, 2))
            target = J * math.exp(-mu * r) * float(rng.uniform())
            scale = target / nrm if nrm > 0 else 0.0
            local *= scale
            paulis = None
            if m <= 4:
                paulis = []
                dim = 1 << m
                for x in range(dim):
                    for z in range(dim):
                        if x == 0 and z == 0:
                            continue
                        c = scale * coeffs[x * dim + z - 1]
                        if c == 0.0:
                            continue
                        gx = gz = 0
                        for j, q in enumerate(support):
                            gx |= ((x >> j) & 1) << q
                            gz |= ((z >> j) & 1) << q
                        paulis.append((c, hermitian_pauli(n, gx, gz)))
            terms.append(FamilyTerm(r, square, support, local, paulis))
    return LocalFamily(layout, terms, J, mu, "exponential", seed)


# ---------------------------------------------------------------------------
# strength measurement


def _peel(V: OperatorMatrix, layout: QubitLayout, config: SolverConfig):
    """Yield (site, l, term) with terms summing exactly to V (see module doc)."""
    residual = OperatorMatrix(V.toarray().copy().astype(complex), V.n, V.hermitian)
    sites = list(layout.torus.sites())
    l = 0
    while True:
        qubits, saturated = layout.ball_qubits(sites[0], l)
        if saturated:
            yield sites[0], l, residual
            return
        for site in sites:
            qubits, _ = layout.ball_qubits(site, l)
            term = conditional_expectation(residual, qubits)
            residual = residual - term
            yield site, l, term
        l += 1


@dataclass
class StrengthReport:
    J_measured: float
    per_radius: list[tuple[int, float]]        # (square size 2l+1, max site norm)
    fit: dict
    convention: str = "shell"

    @property
    def decay_description(self) -> str:
        return self.fit.get("kind", "unknown")


def strength_of(V: OperatorMatrix, layout: QubitLayout,
                config: SolverConfig = DEFAULT) -> StrengthReport:
    """Measured strength and decay envelope of an arbitrary operator."""
    norms: dict[int, float] = {}
    for site, l, term in _peel(V, layout, config):
        r = 2 * l + 1
        nrm = operator_norm(term, config)
        norms[r] = max(norms.get(r, 0.0), nrm)
    per_radius = sorted(norms.items())
    J = max((v for _, v in per_radius), default=0.0)
    fit = _fit_envelope(per_radius, config)
    return StrengthReport(J, per_radius, fit)


def _fit_envelope(per_radius, config) -> dict:
    pts = [(r, v) for r, v in per_radius if v > 1e-14]
    if len(pts) <= 1:
        return {"kind": "single-radius"}
    rs = np.array([p[0] for p in pts], dtype=float)
    vs = np.log(np.array([p[1] for p in pts]))
    A_exp = np.vstack([np.ones_like(rs), -rs]).T
    sol_exp, res_exp = _lstsq(A_exp, vs)
    A_pow = np.vstack([np.ones_like(rs), -np.log(rs)]).T
    sol_pow, res_pow = _lstsq(A_pow, vs)
    if res_exp <= res_pow:
        return {"kind": "exponential", "mu": float(sol_exp[1]),
                "J": float(np.exp(sol_exp[0])), "residual": res_exp}
    return {"kind": "power", "exponent": float(sol_pow[1]),
            "J": float(np.exp(sol_pow[0])), "residual": res_pow}


def _lstsq(A, y):
    sol, *_ = np.linalg.lstsq(A, y, rcond=None)
    return sol, float(np.linalg.norm(A @ sol - y))


def site_split(V: OperatorMatrix, layout: QubitLayout,
               config: SolverConfig = DEFAULT) -> dict[tuple, OperatorMatrix]:
    """Exact per-site decomposition V = sum_u V_u from the shell peel."""
    out: dict[tuple, OperatorMatrix] = {}
    for site, l, term in _peel(V, layout, config):
        out[site] = out[site] + term if site in out else term
    return out


# ---------------------------------------------------------------------------
# block-diagonal compression


def block_diagonal_part(family: LocalFamily, ground: GroundData,
                        config: SolverConfig = DEFAULT) -> LocalFamily:
    """Pinch every term to P W P + (I-P) W (I-P); each output term commutes
    with the ground projector.  Used to manufacture locally block-diagonal
    inputs; the pinched terms carry their nominal square but global support."""
    if ground.P is None:
        raise ResourceCapError("pinching requires the dense ground projector")
    P = ground.P.toarray()
    n = family.n_qubits
    dim = 1 << n
    Q = np.eye(dim) - P
    all_support = tuple(range(n))
    out_terms = []
    for t in family.terms:
        W = t.local if len(t.support) == n else embed_on_support(t.local, t.support, n)
        pinched = P @ W @ P + Q @ W @ Q
        out_terms.append(FamilyTerm(t.r, t.square, all_support, pinched, None))
    J = max((tt.norm for tt in out_terms), default=0.0)
    return LocalFamily(family.layout, out_terms, J, family.decay_mu, "pinched", family.seed)


# ---------------------------------------------------------------------------
# serialization


def save_family(family: LocalFamily, path: str | Path) -> None:
    """Model-file term syntax with a trailing weight column; header records
    the construction envelope and seed for reproducibility."""
    t = family.layout.torus
    lines = [f"# family strength_J={family.strength_J!r} decay_mu={family.decay_mu!r} "
             f"tag={family.decay_tag} seed={family.seed}",
             f"lattice {t.D} {t.L} {family.layout.qubits_per_cell}"]
    for term in family.terms:
        if term.paulis is None:
            raise ValueError("family term without Pauli data is not serializable")
        anchor = ",".join(str(c) for c in term.square.anchor)
        sites = list(term.square.sites(t))
        for coeff, p in term.paulis:
            spec = []
            for coord in sites:
                for slot in range(family.layout.qubits_per_cell):
                    q = family.layout.qubit(coord, slot)
                    xb, zb = (p.x >> q) & 1, (p.z >> q) & 1
                    spec.append("IXZY"[xb + 2 * zb] if not (xb and zb) else "Y")
            lines.append(f"term {anchor} {term.square.size} {''.join(spec)} {coeff!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_family(path: str | Path) -> LocalFamily:
    from .lattice import Torus
    path = Path(path)
    layout = None
    raw_terms: list[tuple[Square, float, PauliString]] = []
    for lineno, rawline in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if fields[0] == "lattice":
            D, L, qpc = (int(v) for v in fields[1:4])
            layout = QubitLayout(Torus((L,) * D), qpc)
        elif fields[0] == "term":
            if layout is None:
                raise ValueError(f"{path}:{lineno}: term before lattice header")
            anchor = tuple(int(v) for v in fields[1].split(","))
            size = int(fields[2])
            spec = fields[3].upper()
            weight = float(fields[4])
            square = Square(layout.torus.wrap(anchor), size)
            qubits, labels = [], []
            k = 0
            for coord in square.sites(layout.torus):
                for slot in range(layout.qubits_per_cell):
                    if spec[k] != "I":
                        qubits.append(layout.qubit(coord, slot))
                        labels.append(spec[k])
                    k += 1
            p = PauliString.from_label("".join(labels) or "I", n=layout.n_qubits,
                                       qubits=qubits or [0])
            raw_terms.append((square, weight, p))
        else:
            raise ValueError(f"{path}:{lineno}: unknown directive {fields[0]!r}")
    if layout is None:
        raise ValueError(f"{path}: missing lattice header")
    grouped: dict[tuple, list] = {}
    for square, weight, p in raw_terms:
        grouped.setdefault((square.anchor, square.size), []).append((weight, p))
    terms = []
    for (anchor, size), paulis in grouped.items():
        square = Square(anchor, size)
        support = tuple(sorted(set().union(*(set(p.support) for _, p in paulis)))) or (0,)
        m = len(support)
        local = np.zeros((1 << m, 1 << m), dtype=complex)
        for c, p in paulis:
            local += c * _restrict_dense(p, support)
        terms.append(FamilyTerm(size, square, support, local, paulis))
    J = max((t.norm for t in terms), default=0.0)
    return LocalFamily(layout, terms, J, None, "loaded")
