"""Solver settings and tolerance defaults shared across modules."""
from __future__ import annotations

from dataclasses import dataclass, field, fields


@dataclass(frozen=True)
class SolverConfig:
    """Caps and tolerances; every experiment echoes these into its manifest.

    Algebraic identities default to 1e-10, iterative spectral quantities to
    1e-8.  Dense storage is used up to ``dense_cap`` (matrix dimension),
    sparse realization up to ``sparse_cap_qubits`` qubits.
    """

    dense_cap: int = 4096
    sparse_cap_qubits: int = 20
    tol_algebraic: float = 1e-10
    tol_iterative: float = 1e-8
    tol_projector: float = 1e-12
    band_threshold: float = 0.5
    gap_floor: float = 0.5
    ode_tol: float = 1e-8
    lanczos_max_k: int = 64
    tqo_tolerance: float = 1e-9
    pauli_sweep_cap: int = 4096       # exhaustive Pauli sweep up to this basis size
    tqo_sample_count: int = 200       # randomized operators when the sweep is capped
    seed: int = 2024

    def replace(self, **kwargs) -> "SolverConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(kwargs)
        return SolverConfig(**values)


DEFAULT = SolverConfig()
