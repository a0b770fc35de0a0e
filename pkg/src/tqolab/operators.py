"""Pauli-string algebra and Hermitian operator realization.

Encoding: an n-qubit Pauli is ``phase * X^x * Z^z`` where ``x`` and ``z`` are
bit masks (bit j = qubit j) and the X factors stand left of the Z factors.
With this convention Y on a single qubit is ``(x=1, z=1, phase=i)``.

Basis-state indices are little-endian: qubit j corresponds to bit j of the
computational index, so ``X^x Z^z |b> = (-1)^{|z & b|} |b ^ x>``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .config import DEFAULT, SolverConfig
from .errors import NumericalError, ResourceCapError
from .lattice import QubitLayout

PHASES = (1 + 0j, 1j, -1 + 0j, -1j)


def _popcount(x: int) -> int:
    return bin(x).count("1")


def _parity_table(dim: int, mask: int) -> np.ndarray:
    """Parity of ``index & mask`` for every basis index, as int8 0/1."""
    idx = np.arange(dim, dtype=np.uint64)
    return (np.bitwise_count(idx & np.uint64(mask)) & np.uint64(1)).astype(np.int8)


@dataclass(frozen=True)
class PauliString:
    """Pauli operator on ``n`` qubits as a symplectic mask pair plus phase."""

    n: int
    x: int = 0
    z: int = 0
    phase: complex = 1 + 0j

    def __post_init__(self):
        if self.x >> self.n or self.z >> self.n:
            raise ValueError("mask exceeds qubit count")
        if self.phase not in PHASES:
            raise ValueError(f"phase must be a fourth root of unity, got {self.phase}")

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n)

    @classmethod
    def from_label(cls, label: str, n: int | None = None,
                   qubits: Sequence[int] | None = None) -> "PauliString":
        """Build from a string over IXYZ; ``qubits`` maps characters to qubit indices."""
        if qubits is None:
            qubits = range(len(label))
        qubits = list(qubits)
        if len(qubits) != len(label):
            raise ValueError("label length does not match qubit list")
        if n is None:
            n = max(qubits) + 1 if qubits else 1
        x = z = 0
        phase = 1 + 0j
        for ch, q in zip(label.upper(), qubits):
            if ch == "I":
                continue
            if ch in "XY":
                x |= 1 << q
            if ch in "ZY":
                z |= 1 << q
            if ch == "Y":
                phase *= 1j
            if ch not in "IXYZ":
                raise ValueError(f"invalid Pauli character {ch!r}")
        return cls(n, x, z, phase)

    @classmethod
    def single(cls, n: int, q: int, axis: str) -> "PauliString":
        return cls.from_label(axis, n=n, qubits=[q])

    @property
    def support(self) -> tuple[int, ...]:
        mask = self.x | self.z
        return tuple(q for q in range(self.n) if (mask >> q) & 1)

    @property
    def weight(self) -> int:
        return _popcount(self.x | self.z)

    @property
    def is_identity_mask(self) -> bool:
        return self.x == 0 and self.z == 0

    @property
    def is_hermitian(self) -> bool:
        # (X^x Z^z)^dag = (-1)^{|x&z|} X^x Z^z
        sign = -1 if _popcount(self.x & self.z) & 1 else 1
        return np.conj(self.phase) * sign == self.phase

    def label(self) -> str:
        out = []
        for q in range(self.n):
            xb, zb = (self.x >> q) & 1, (self.z >> q) & 1
            out.append("IXZY"[xb + 2 * zb] if not (xb and zb) else "Y")
        return "".join(out)

    def dense(self) -> np.ndarray:
        """Dense matrix realization (small n only)."""
        dim = 1 << self.n
        cols = np.arange(dim)
        rows = cols ^ self.x
        vals = self.phase * (1.0 - 2.0 * _parity_table(dim, self.z))
        m = np.zeros((dim, dim), dtype=complex)
        m[rows, cols] = vals
        return m

    def apply(self, vec: np.ndarray) -> np.ndarray:
        """Matrix-free action on a state vector (or on each column of a matrix)."""
        dim = vec.shape[0]
        idx = np.arange(dim) ^ self.x
        signs = self.phase * (1.0 - 2.0 * _parity_table(dim, self.z))[idx]
        if vec.ndim == 1:
            return signs * vec[idx]
        return signs[:, None] * vec[idx, :]


def pauli_mul(a: PauliString, b: PauliString) -> PauliString:
    """Product a*b with the symplectic sign rule (Z^z X^x = (-1)^{|z&x|} X^x Z^z)."""
    if a.n != b.n:
        raise ValueError(f"qubit counts differ: {a.n} vs {b.n}")
    sign = -1 if _popcount(a.z & b.x) & 1 else 1
    return PauliString(a.n, a.x ^ b.x, a.z ^ b.z, a.phase * b.phase * sign)


def commutes(a: PauliString, b: PauliString) -> bool:
    """True iff the GF(2) symplectic form of the mask pairs vanishes."""
    if a.n != b.n:
        raise ValueError(f"qubit counts differ: {a.n} vs {b.n}")
    return (_popcount(a.x & b.z) + _popcount(a.z & b.x)) % 2 == 0


def hermitian_pauli(n: int, x: int, z: int, sign: int = 1) -> PauliString:
    """The Hermitian representative ``i^{|x&z|} X^x Z^z`` (times an optional sign)."""
    return PauliString(n, x, z, sign * 1j ** (_popcount(x & z) % 4))


def enumerate_paulis(qubits: Sequence[int], n: int,
                     include_identity: bool = False) -> Iterable[PauliString]:
    """All Hermitian Pauli strings supported on ``qubits``, in a fixed order."""
    m = len(qubits)
    for code in range(4 ** m):
        if code == 0 and not include_identity:
            continue
        x = z = 0
        c = code
        for q in qubits:
            xb, zb = c & 1, (c >> 1) & 1
            x |= xb << q
            z |= zb << q
            c >>= 2
        yield hermitian_pauli(n, x, z)


# ---------------------------------------------------------------------------
# matrix realization


@dataclass
class OperatorMatrix:
    """Hermitian-aware wrapper over a dense ndarray or CSR matrix."""

    mat: np.ndarray | sp.csr_matrix
    n: int
    hermitian: bool = field(default=False)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @property
    def is_dense(self) -> bool:
        return isinstance(self.mat, np.ndarray)

    def toarray(self) -> np.ndarray:
        return self.mat if self.is_dense else self.mat.toarray()

    @classmethod
    def from_matrix(cls, mat, n: int, tol: float = 1e-12) -> "OperatorMatrix":
        herm = hermiticity_defect(mat) <= tol
        return cls(mat, n, herm)

    @classmethod
    def identity(cls, n: int, dense: bool = True) -> "OperatorMatrix":
        dim = 1 << n
        mat = np.eye(dim, dtype=complex) if dense else sp.identity(dim, dtype=complex, format="csr")
        return cls(mat, n, True)

    def dag(self) -> "OperatorMatrix":
        m = self.mat.conj().T if self.is_dense else self.mat.getH().tocsr()
        return OperatorMatrix(m, self.n, self.hermitian)

    def trace(self) -> complex:
        return complex(np.trace(self.mat) if self.is_dense else self.mat.trace())

    def __add__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix.from_matrix(_coerce(self.mat + other.mat), self.n)

    def __sub__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix.from_matrix(_coerce(self.mat - other.mat), self.n)

    def __neg__(self) -> "OperatorMatrix":
        return OperatorMatrix(-self.mat, self.n, self.hermitian)

    def __mul__(self, c) -> "OperatorMatrix":
        return OperatorMatrix.from_matrix(self.mat * c, self.n)

    __rmul__ = __mul__

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix.from_matrix(_coerce(self.mat @ other.mat), self.n)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.mat @ v


def _coerce(mat):
    if sp.issparse(mat):
        return mat.tocsr()
    return np.asarray(mat)


def hermiticity_defect(mat) -> float:
    if sp.issparse(mat):
        d = (mat - mat.getH()).tocoo()
        return float(np.abs(d.data).max()) if d.nnz else 0.0
    mat = np.asarray(mat)
    return float(np.abs(mat - mat.conj().T).max()) if mat.size else 0.0


def realize(terms: Iterable[tuple[complex, PauliString]], n: int,
            config: SolverConfig = DEFAULT, force: str | None = None) -> OperatorMatrix:
    """Matrix for a weighted sum of Pauli strings.

    Terms are grouped by X-mask so each group contributes one diagonal band;
    the result is dense below ``config.dense_cap`` and CSR otherwise.  Purely
    real value sets are stored as float64.
    """
    if n > config.sparse_cap_qubits:
        raise ResourceCapError(
            f"{n} qubits exceeds the sparse realization cap "
            f"({config.sparse_cap_qubits} qubits)")
    dim = 1 << n
    dense = dim <= config.dense_cap if force is None else force == "dense"

    groups: dict[int, list[tuple[complex, int]]] = {}
    for coeff, p in terms:
        if p.n != n:
            raise ValueError(f"term on {p.n} qubits in a {n}-qubit realization")
        groups.setdefault(p.x, []).append((coeff * p.phase, p.z))

    cols = np.arange(dim)
    if dense:
        out = np.zeros((dim, dim), dtype=complex)
        for x, members in groups.items():
            vals = np.zeros(dim, dtype=complex)
            for c, z in members:
                vals += c * (1.0 - 2.0 * _parity_table(dim, z))
            out[cols ^ x, cols] += vals
        if np.abs(out.imag).max() == 0.0:
            out = np.ascontiguousarray(out.real)
        return OperatorMatrix.from_matrix(out, n)

    rows_all, vals_all = [], []
    for x, members in groups.items():
        vals = np.zeros(dim, dtype=complex)
        for c, z in members:
            vals += c * (1.0 - 2.0 * _parity_table(dim, z))
        rows_all.append(cols ^ x)
        vals_all.append(vals)
    rows = np.concatenate(rows_all) if rows_all else np.zeros(0, dtype=int)
    vals = np.concatenate(vals_all) if vals_all else np.zeros(0, dtype=complex)
    if vals.size and np.abs(vals.imag).max() == 0.0:
        vals = np.ascontiguousarray(vals.real)
    col_idx = np.tile(cols, len(rows_all)) if rows_all else np.zeros(0, dtype=int)
    mat = sp.coo_matrix((vals, (rows, col_idx)), shape=(dim, dim)).tocsr()
    mat.eliminate_zeros()
    return OperatorMatrix.from_matrix(mat, n)


@lru_cache(maxsize=8)
def _hadamard_signs(dim: int) -> np.ndarray:
    """Sylvester Hadamard matrix H[b, z] = (-1)^{|b & z|}."""
    h = np.array([[1.0]])
    while h.shape[0] < dim:
        h = np.block([[h, h], [h, -h]])
    return h


def hermitian_from_pauli_coeffs(coeffs: np.ndarray, m: int) -> np.ndarray:
    """Dense 2^m matrix ``sum_P c_P sigma_P`` over the traceless Hermitian basis.

    Coefficients are ordered over (x, z) mask pairs lexicographically with x
    major, skipping (0, 0); ``sigma_{x,z} = i^{|x&z|} X^x Z^z``.  Assembled one
    X-band at a time through a Walsh-Hadamard transform of the z-coefficients.
    """
    dim = 1 << m
    if coeffs.shape != (dim * dim - 1,):
        raise ValueError(f"expected {dim * dim - 1} coefficients, got {coeffs.shape}")
    full = np.zeros(dim * dim, dtype=complex)
    full[1:] = coeffs
    table = full.reshape(dim, dim)  # [x, z]
    zs = np.arange(dim, dtype=np.uint64)
    h = _hadamard_signs(dim)
    out = np.zeros((dim, dim), dtype=complex)
    cols = np.arange(dim)
    for x in range(dim):
        yfix = 1j ** (np.bitwise_count(np.uint64(x) & zs) % 4)
        diag = h @ (table[x] * yfix)
        out[cols ^ x, cols] += diag
    return out


def embed_on_support(local: np.ndarray, support: Sequence[int], n: int) -> np.ndarray:
    """Dense embedding of a local operator (little-endian over sorted support)."""
    support = sorted(support)
    comp = [q for q in range(n) if q not in set(support)]
    cdim = 1 << len(comp)
    order = _block_axis_order(support, comp, n)
    inv = np.argsort(order)
    full = np.einsum("ab,cd->acbd", local, np.eye(cdim))
    return full.reshape((2,) * (2 * n)).transpose(inv).reshape(1 << n, 1 << n)


def _block_axis_order(keep: Sequence[int], comp: Sequence[int], n: int) -> list[int]:
    row = [n - 1 - q for q in sorted(keep, reverse=True)]
    row += [n - 1 - q for q in sorted(comp, reverse=True)]
    return row + [a + n for a in row]


def apply_local(local: np.ndarray, support: Sequence[int], n: int,
                vecs: np.ndarray) -> np.ndarray:
    """Apply a local operator (little-endian over sorted support) to state columns."""
    support = sorted(support)
    comp = [q for q in range(n) if q not in set(support)]
    kdim = 1 << len(support)
    single = vecs.ndim == 1
    cols = vecs[:, None] if single else vecs
    k = cols.shape[1]
    row = [n - 1 - q for q in sorted(support, reverse=True)]
    row += [n - 1 - q for q in sorted(comp, reverse=True)]
    inv = np.argsort(row)
    arr = cols.reshape((2,) * n + (k,)).transpose(list(row) + [n])
    arr = (local @ arr.reshape(kdim, -1)).reshape((2,) * n + (k,))
    out = arr.transpose(list(inv) + [n]).reshape(1 << n, k)
    return out[:, 0] if single else out


def partial_trace(M: OperatorMatrix | np.ndarray, keep: Sequence[int],
                  n: int | None = None) -> np.ndarray:
    """Trace out the complement of ``keep``; result bit j = sorted(keep)[j]."""
    if isinstance(M, OperatorMatrix):
        n = M.n
        arr = M.toarray()
    else:
        arr = np.asarray(M)
        if n is None:
            n = arr.shape[0].bit_length() - 1
    keep = sorted(keep)
    comp = [q for q in range(n) if q not in set(keep)]
    kdim, cdim = 1 << len(keep), 1 << len(comp)
    order = _block_axis_order(keep, comp, n)
    t = arr.reshape((2,) * (2 * n)).transpose(order).reshape(kdim, cdim, kdim, cdim)
    return np.einsum("acbc->ab", t)


def vector_partial_trace(vecs: np.ndarray, keep: Sequence[int], n: int) -> np.ndarray:
    """``Tr_comp sum_i |v_i><v_i|`` for the columns of ``vecs`` (memory-light)."""
    keep = sorted(keep)
    comp = [q for q in range(n) if q not in set(keep)]
    kdim, cdim = 1 << len(keep), 1 << len(comp)
    row = [n - 1 - q for q in sorted(keep, reverse=True)]
    row += [n - 1 - q for q in sorted(comp, reverse=True)]
    rho = np.zeros((kdim, kdim), dtype=complex)
    for i in range(vecs.shape[1]):
        g = vecs[:, i].reshape((2,) * n).transpose(row).reshape(kdim, cdim)
        rho += g @ g.conj().T
    return rho


def conditional_expectation(M: OperatorMatrix, keep: Sequence[int]) -> OperatorMatrix:
    """Normalized partial trace over the complement, tensored with identity.

    This is the unique unital projection onto operators supported on ``keep``;
    it is idempotent and norm-nonincreasing, which makes it the canonical
    local approximation for measuring operator locality.
    """
    if not M.is_dense:
        raise ResourceCapError("conditional expectation requires the dense path")
    keep = sorted(set(keep))
    if len(keep) == M.n:
        return OperatorMatrix(M.toarray().copy(), M.n, M.hermitian)
    comp_dim = 1 << (M.n - len(keep))
    block = partial_trace(M, keep) / comp_dim
    out = embed_on_support(block, keep, M.n)
    return OperatorMatrix.from_matrix(out, M.n)


@dataclass
class LocalityProfile:
    """Shell decomposition of an operator around a site."""

    center: tuple[int, ...]
    shells: list[tuple[int, OperatorMatrix]]
    residual: OperatorMatrix
    saturation_radius: int

    @property
    def norms_by_radius(self) -> list[tuple[int, float]]:
        return [(l, operator_norm(v)) for l, v in self.shells]

    @property
    def residual_norm(self) -> float:
        return operator_norm(self.residual)

    def reconstruct(self) -> OperatorMatrix:
        out = self.residual
        for _, shell in self.shells:
            out = out + shell
        return out


def locality_profile(M: OperatorMatrix, site: Sequence[int],
                     layout: QubitLayout) -> LocalityProfile:
    """Nested-ball shell decomposition of ``M`` around ``site``.

    Shell l is the difference of conditional expectations onto balls of
    radius l and l-1; the residual is whatever lives outside the largest
    non-saturating ball.  Shells plus residual reconstruct ``M`` exactly.
    """
    site = tuple(site)
    shells: list[tuple[int, OperatorMatrix]] = []
    prev: OperatorMatrix | None = None
    l = 0
    while True:
        qubits, saturated = layout.ball_qubits(site, l)
        if saturated:
            break
        e_l = conditional_expectation(M, qubits)
        shells.append((l, e_l if prev is None else e_l - prev))
        prev = e_l
        l += 1
    residual = M - prev if prev is not None else M
    return LocalityProfile(site, shells, residual, l)


def operator_norm(M: OperatorMatrix | np.ndarray, config: SolverConfig = DEFAULT) -> float:
    """Spectral norm; dense paths are exact, sparse uses Lanczos to 1e-8."""
    if isinstance(M, np.ndarray):
        M = OperatorMatrix.from_matrix(M, int(M.shape[0]).bit_length() - 1)
    if M.is_dense:
        if M.hermitian:
            w = np.linalg.eigvalsh(M.mat)
            return float(np.abs(w).max()) if w.size else 0.0
        s = np.linalg.svd(M.mat, compute_uv=False)
        return float(s[0]) if s.size else 0.0
    if M.mat.nnz == 0:
        return 0.0
    if M.dim <= 8:
        return operator_norm(OperatorMatrix.from_matrix(M.toarray(), M.n), config)
    rng = np.random.default_rng(config.seed)
    v0 = rng.standard_normal(M.dim)
    try:
        if M.hermitian:
            w = spla.eigsh(M.mat, k=1, which="LM", tol=config.tol_iterative * 1e-1,
                           v0=v0, return_eigenvectors=False)
            return float(np.abs(w).max())
        s = spla.svds(M.mat, k=1, tol=config.tol_iterative * 1e-1,
                      v0=v0, return_singular_vectors=False)
        return float(s.max())
    except spla.ArpackNoConvergence as exc:  # pragma: no cover - rare
        raise NumericalError(f"spectral norm iteration did not converge: {exc}") from exc


def commutator(A: OperatorMatrix, B: OperatorMatrix) -> OperatorMatrix:
    return A @ B - B @ A
