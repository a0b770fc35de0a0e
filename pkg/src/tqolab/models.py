"""Commuting-projector models: builders, validation, file I/O, ground data.

Every model term is a stabilizer-form projector ``(I - S)/2`` with S a
Hermitian Pauli string attached to a square region.  Star and plaquette
terms of the toric code live on the minimal enclosing 2x2 cell square of
their four edges (each cell hosts the two outgoing edges of its vertex).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gf2
from .config import DEFAULT, SolverConfig
from .errors import ModelValidationError, ResourceCapError
from .lattice import Box, QubitLayout, Square, Torus
from .operators import (OperatorMatrix, PauliString, commutes, pauli_mul,
                        realize)


@dataclass(frozen=True)
class ModelTerm:
    square: Square
    generator: PauliString

    def projector_paulis(self) -> list[tuple[float, PauliString]]:
        """(I - S)/2 as weighted Pauli strings."""
        return [(0.5, PauliString.identity(self.generator.n)),
                (-0.5, self.generator)]


@dataclass
class CommutingProjectorModel:
    name: str
    layout: QubitLayout
    terms: list[ModelTerm]
    rank: int = field(default=0)
    ground_degeneracy: int = field(default=0)

    @property
    def torus(self) -> Torus:
        return self.layout.torus

    @property
    def n_qubits(self) -> int:
        return self.layout.n_qubits

    def stabilizer_generators(self) -> list[PauliString]:
        return [t.generator for t in self.terms]

    def h0_pauli_terms(self) -> list[tuple[float, PauliString]]:
        n = self.n_qubits
        out: list[tuple[float, PauliString]] = [(0.5 * len(self.terms), PauliString.identity(n))]
        out.extend((-0.5, t.generator) for t in self.terms)
        return out

    def h0_matrix(self, config: SolverConfig = DEFAULT, force: str | None = None) -> OperatorMatrix:
        return realize(self.h0_pauli_terms(), self.n_qubits, config, force=force)

    def term_projector(self, i: int, config: SolverConfig = DEFAULT) -> OperatorMatrix:
        return realize(self.terms[i].projector_paulis(), self.n_qubits, config)

    def validate(self) -> "CommutingProjectorModel":
        n = self.n_qubits
        for i, t in enumerate(self.terms):
            if t.generator.n != n:
                raise ModelValidationError(f"term {i}: generator on wrong qubit count")
            if not t.generator.is_hermitian:
                raise ModelValidationError(f"term {i}: generator is not Hermitian")
            allowed = set(self.layout.region_qubits(t.square))
            if not set(t.generator.support) <= allowed:
                raise ModelValidationError(
                    f"term {i}: support {t.generator.support} leaves its square")
        for i in range(len(self.terms)):
            for j in range(i + 1, len(self.terms)):
                if not commutes(self.terms[i].generator, self.terms[j].generator):
                    raise ModelValidationError(
                        f"terms {i} and {j} anticommute "
                        f"({self.terms[i].generator.label()} vs {self.terms[j].generator.label()})")
        rank, consistent = gf2.stabilizer_rank(self.stabilizer_generators())
        if not consistent:
            raise ModelValidationError(
                "model is frustrated: no state is annihilated by every projector")
        self.rank = rank
        self.ground_degeneracy = 2 ** (n - rank)
        return self


def build_toric_code(L: int) -> CommutingProjectorModel:
    """Toric code on an L x L cell torus: 2 edge qubits per cell, deg 4."""
    if L < 2:
        raise ValueError(f"toric code needs L >= 2, got {L}")
    torus = Torus((L, L))
    layout = QubitLayout(torus, qubits_per_cell=2)
    n = layout.n_qubits
    terms = []
    for x in range(L):
        for y in range(L):
            star = [layout.qubit((x, y), 0), layout.qubit((x, y), 1),
                    layout.qubit((x - 1, y), 0), layout.qubit((x, y - 1), 1)]
            anchor = torus.wrap((x - 1, y - 1))
            terms.append(ModelTerm(Square(anchor, 2),
                                   PauliString.from_label("XXXX", n=n, qubits=star)))
    for x in range(L):
        for y in range(L):
            plaq = [layout.qubit((x, y), 0), layout.qubit((x, y), 1),
                    layout.qubit((x, y + 1), 0), layout.qubit((x + 1, y), 1)]
            terms.append(ModelTerm(Square((x, y), 2),
                                   PauliString.from_label("ZZZZ", n=n, qubits=plaq)))
    return CommutingProjectorModel(f"toric-L{L}", layout, terms).validate()


def build_ising(L: int, D: int = 2) -> CommutingProjectorModel:
    """Classical Ising model: one qubit per site, edge projectors (I - ZZ)/2."""
    if L < 2:
        raise ValueError(f"ising model needs L >= 2, got {L}")
    if D not in (1, 2):
        raise ValueError(f"D must be 1 or 2, got {D}")
    torus = Torus((L,) * D)
    layout = QubitLayout(torus, qubits_per_cell=1)
    n = layout.n_qubits
    terms = []
    for coord in torus.sites():
        for axis in range(D):
            step = tuple(c + (1 if a == axis else 0) for a, c in enumerate(coord))
            pair = [layout.qubit(coord), layout.qubit(step)]
            terms.append(ModelTerm(Square(coord, 2),
                                   PauliString.from_label("ZZ", n=n, qubits=pair)))
    return CommutingProjectorModel(f"ising-{D}D-L{L}", layout, terms).validate()


# ---------------------------------------------------------------------------
# model files


def save_model(model: CommutingProjectorModel, path: str | Path) -> None:
    lines = [f"# {model.name}",
             f"lattice {model.torus.D} {model.torus.L} {model.layout.qubits_per_cell}"]
    for t in model.terms:
        anchor = ",".join(str(c) for c in t.square.anchor)
        sites = list(t.square.sites(model.torus))
        spec = []
        for coord in sites:
            for slot in range(model.layout.qubits_per_cell):
                q = model.layout.qubit(coord, slot)
                xb, zb = (t.generator.x >> q) & 1, (t.generator.z >> q) & 1
                spec.append("IXZY"[xb + 2 * zb] if not (xb and zb) else "Y")
        lines.append(f"term {anchor} {t.square.size} {''.join(spec)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> CommutingProjectorModel:
    """Parse and fully validate a model file; errors carry line numbers."""
    path = Path(path)
    layout: QubitLayout | None = None
    terms: list[ModelTerm] = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if fields[0] == "lattice":
            if len(fields) != 4:
                raise ModelValidationError(f"{path}:{lineno}: lattice line needs 'lattice D L qpc'")
            D, L, qpc = (int(v) for v in fields[1:])
            layout = QubitLayout(Torus((L,) * D), qpc)
        elif fields[0] == "term":
            if layout is None:
                raise ModelValidationError(f"{path}:{lineno}: term before lattice header")
            if len(fields) != 4:
                raise ModelValidationError(f"{path}:{lineno}: term line needs 'term anchor size spec'")
            anchor = tuple(int(v) for v in fields[1].split(","))
            if len(anchor) != layout.torus.D:
                raise ModelValidationError(f"{path}:{lineno}: anchor has wrong dimension")
            size = int(fields[2])
            square = Square(layout.torus.wrap(anchor), size)
            sites = list(square.sites(layout.torus))
            spec = fields[3].upper()
            if len(spec) != len(sites) * layout.qubits_per_cell:
                raise ModelValidationError(
                    f"{path}:{lineno}: pauli spec length {len(spec)} != "
                    f"{len(sites) * layout.qubits_per_cell} support qubits")
            qubits, labels = [], []
            k = 0
            for coord in sites:
                for slot in range(layout.qubits_per_cell):
                    if spec[k] not in "IXYZ":
                        raise ModelValidationError(
                            f"{path}:{lineno}: invalid pauli character {spec[k]!r} at column {k}")
                    if spec[k] != "I":
                        qubits.append(layout.qubit(coord, slot))
                        labels.append(spec[k])
                    k += 1
            gen = PauliString.from_label("".join(labels) or "I",
                                         n=layout.n_qubits,
                                         qubits=qubits or [0])
            terms.append(ModelTerm(square, gen))
        else:
            raise ModelValidationError(f"{path}:{lineno}: unknown directive {fields[0]!r}")
    if layout is None:
        raise ModelValidationError(f"{path}: missing lattice header")
    return CommutingProjectorModel(path.stem, layout, terms).validate()


# ---------------------------------------------------------------------------
# ground data


@dataclass
class GroundData:
    """Ground projector (dense) or orthonormal ground basis (large systems)."""

    degeneracy: int
    gap: float
    basis: np.ndarray                  # dim x g, orthonormal columns
    P: OperatorMatrix | None = None    # dense mode only
    mode: str = "dense"

    def block(self, M) -> np.ndarray:
        """g x g ground block  B^dag M B  (M: OperatorMatrix, matrix, or PauliString)."""
        if isinstance(M, PauliString):
            applied = np.column_stack([M.apply(self.basis[:, i])
                                       for i in range(self.degeneracy)])
        elif isinstance(M, OperatorMatrix):
            applied = M.mat @ self.basis
        else:
            applied = M @ self.basis
        return self.basis.conj().T @ applied


def ground_data(model: CommutingProjectorModel, config: SolverConfig = DEFAULT) -> GroundData:
    """P as the product of (I - Q_A), its basis, degeneracy, and the H0 gap.

    Above the dense cap the projector is not materialized; an orthonormal
    ground-basis block from the iterative low-spectrum solver is used and the
    result is flagged with ``mode='basis'``.
    """
    n = model.n_qubits
    dim = 1 << n
    g = model.ground_degeneracy
    if dim <= config.dense_cap:
        P = np.eye(dim)
        for t in model.terms:
            s = t.generator.dense()
            P = P @ ((np.eye(dim) + s) / 2.0)
        trace = float(np.trace(P).real)
        if abs(trace - g) > 1e-6:
            raise ModelValidationError(
                f"projector trace {trace} disagrees with GF(2) degeneracy {g}")
        w, v = np.linalg.eigh((P + P.conj().T) / 2.0)
        basis = v[:, w > 0.5]
        h0 = model.h0_matrix(config, force="dense")
        evals = np.linalg.eigvalsh(h0.toarray())
        gap = float(evals[evals > config.tol_iterative].min())
        return GroundData(g, gap, basis, OperatorMatrix.from_matrix(P, n), "dense")

    from .spectral import low_spectrum
    h0 = model.h0_matrix(config)
    k = min(g + 4, config.lanczos_max_k)
    with warnings.catch_warnings():
        # the ground cluster is exactly degenerate by construction
        warnings.simplefilter("ignore")
        res = low_spectrum(h0, k, config)
    evals, vecs = res.eigenvalues, res.eigenvectors
    if np.abs(evals[:g]).max() > 1e-6:
        raise ModelValidationError("iterative solver found fewer than g zero modes")
    basis, _ = np.linalg.qr(vecs[:, :g])
    gap = float(evals[g])
    return GroundData(g, gap, np.asarray(basis), None, "basis")


def local_projector(model: CommutingProjectorModel, region: Square | Box,
                    config: SolverConfig = DEFAULT) -> OperatorMatrix:
    """P_B: product of (I - Q_A) over the terms contained in the region."""
    n = model.n_qubits
    dim = 1 << n
    if dim > config.dense_cap:
        raise ResourceCapError(
            f"local projector needs the dense path (dim {dim} > cap {config.dense_cap})")
    P = np.eye(dim)
    for t in local_terms(model, region):
        P = P @ ((np.eye(dim) + t.generator.dense()) / 2.0)
    return OperatorMatrix.from_matrix(P, n)


def local_terms(model: CommutingProjectorModel, region: Square | Box) -> list[ModelTerm]:
    allowed = set(model.layout.region_qubits(region))
    return [t for t in model.terms if set(t.generator.support) <= allowed]
