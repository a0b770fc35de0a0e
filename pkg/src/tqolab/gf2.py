"""GF(2) linear algebra over stabilizer generators.

Generators are commuting Hermitian Pauli strings; products track phases
exactly, so rank computations double as consistency (frustration) checks.
Masks are combined as ``x | (z << n)`` for elimination purposes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import PauliString, pauli_mul


def _combined(p: PauliString) -> int:
    return p.x | (p.z << p.n)


@dataclass
class Eliminated:
    """Row-echelon form of a generator set, keeping exact Pauli products."""

    pivots: dict[int, PauliString]
    rank: int
    consistent: bool

    def reduce(self, p: PauliString) -> PauliString:
        cur = p
        while True:
            m = _combined(cur)
            if m == 0:
                return cur
            lead = m.bit_length() - 1
            if lead not in self.pivots:
                return cur
            cur = pauli_mul(self.pivots[lead], cur)

    def membership_phase(self, p: PauliString) -> complex | None:
        """Phase c with ``p = c * g`` for some group element g, else None."""
        red = self.reduce(p)
        if _combined(red) != 0:
            return None
        # h * p = red.phase * I with h in the group and h^2 = I
        return red.phase


def eliminate(generators: list[PauliString]) -> Eliminated:
    pivots: dict[int, PauliString] = {}
    consistent = True
    for g in generators:
        cur = g
        while True:
            m = _combined(cur)
            if m == 0:
                if cur.phase != 1:
                    consistent = False
                break
            lead = m.bit_length() - 1
            if lead in pivots:
                cur = pauli_mul(pivots[lead], cur)
            else:
                pivots[lead] = cur
                break
    return Eliminated(pivots, len(pivots), consistent)


def stabilizer_rank(generators: list[PauliString]) -> tuple[int, bool]:
    """(GF(2) rank, consistency); degeneracy is ``2**(n - rank)`` when consistent."""
    e = eliminate(generators)
    return e.rank, e.consistent


def _nullspace_combos(rows: list[int]) -> list[int]:
    """Combination masks c with XOR_{i in c} rows[i] = 0 (bit i = row i)."""
    table: dict[int, tuple[int, int]] = {}  # lead bit -> (vec, combo)
    combos = []
    for i, vec in enumerate(rows):
        combo = 1 << i
        while vec:
            lead = vec.bit_length() - 1
            if lead in table:
                pv, pc = table[lead]
                vec ^= pv
                combo ^= pc
            else:
                table[lead] = (vec, combo)
                break
        if vec == 0:
            combos.append(combo)
    return combos


def subgroup_on_support(generators: list[PauliString], keep_mask: int) -> list[PauliString]:
    """Independent generators of the subgroup supported inside ``keep_mask``."""
    e = eliminate(generators)
    indep = list(e.pivots.values())
    outside = ~keep_mask
    rows = [(g.x & outside) | ((g.z & outside) << g.n) for g in indep]
    elements = []
    for combo in _nullspace_combos(rows):
        prod = PauliString.identity(indep[0].n) if indep else None
        for i, g in enumerate(indep):
            if (combo >> i) & 1:
                prod = pauli_mul(prod, g)
        if prod is not None and _combined(prod) != 0:
            elements.append(prod)
    return elements


def restrict_to(p: PauliString, keep: list[int]) -> PauliString:
    """Remap a string supported inside ``keep`` onto len(keep) qubits."""
    x = z = 0
    keep_mask = 0
    for j, q in enumerate(sorted(keep)):
        keep_mask |= 1 << q
        if (p.x >> q) & 1:
            x |= 1 << j
        if (p.z >> q) & 1:
            z |= 1 << j
    if (p.x | p.z) & ~keep_mask:
        raise ValueError("string not supported inside keep set")
    return PauliString(len(keep), x, z, p.phase)


def restricted_group_sum(generators: list[PauliString], keep: list[int]) -> tuple[np.ndarray, int]:
    """Sum over subgroup elements supported in ``keep``, as a dense local matrix.

    Returns (matrix on len(keep) qubits, number of independent subgroup
    generators d); the subgroup has 2^d elements including identity.
    """
    keep = sorted(keep)
    mask = 0
    for q in keep:
        mask |= 1 << q
    subgens = subgroup_on_support(generators, mask)
    m = len(keep)
    dim = 1 << m
    total = np.zeros((dim, dim), dtype=complex)
    d = len(subgens)
    n = generators[0].n if generators else m
    for bits in range(1 << d):
        prod = PauliString.identity(n)
        for i in range(d):
            if (bits >> i) & 1:
                prod = pauli_mul(prod, subgens[i])
        total += restrict_to(prod, keep).dense()
    return total, d


def commutant_dimension(generators: list[PauliString], qubits: list[int]) -> int:
    """log2 of the count of Pauli masks on ``qubits`` commuting with every generator."""
    qubits = sorted(qubits)
    m = len(qubits)
    rows = []
    for g in generators:
        vec = 0
        for j, q in enumerate(qubits):
            if (g.z >> q) & 1:       # pairs with the unknown's x bit
                vec |= 1 << j
            if (g.x >> q) & 1:       # pairs with the unknown's z bit
                vec |= 1 << (m + j)
        rows.append(vec)
    # rank of the constraint system acting on 2m unknowns
    table: dict[int, int] = {}
    rank = 0
    for vec in rows:
        while vec:
            lead = vec.bit_length() - 1
            if lead in table:
                vec ^= table[lead]
            else:
                table[lead] = vec
                rank += 1
                break
    return 2 * m - rank
