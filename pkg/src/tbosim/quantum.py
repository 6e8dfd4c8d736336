"""Exact small-dimension quantum mechanics for bipartite qudit pairs.

Amplitudes of a bipartite state are stored Alice-major: the basis vector
``|i_A, i_B>`` sits at flat index ``d * i_A + i_B``.  This is the ordering
produced by ``np.kron(A, B)``, so ``A (x) B`` acts on the flat vector directly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Literal, Sequence

import numpy as np

from .errors import (
    AllZeroCoefficients,
    DimensionMismatch,
    NotHermitian,
    NotInvolutory,
    NotNormalized,
    NotTraceless,
    OddDimension,
    TBOSimError,
)
from .sphere import UnitVector

Side = Literal["alice", "bob"]

TOL_IMAG = 1e-10


@dataclass(frozen=True)
class Tolerances:
    herm: float = 1e-9
    trace: float = 1e-9
    square: float = 1e-9
    norm: float = 1e-9


DEFAULT_TOL = Tolerances()


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TracelessBinaryObservable:
    """Hermitian, traceless d x d matrix squaring to the identity.

    Build instances through :func:`validate_tbo`; the constructor itself does
    not re-check the invariants.
    """

    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def to_dict(self) -> dict[str, Any]:
        return {
            "dim": self.dim,
            "re": self.matrix.real.tolist(),
            "im": self.matrix.imag.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any], tol: Tolerances = DEFAULT_TOL) -> TracelessBinaryObservable:
        m = np.asarray(doc["re"], dtype=float) + 1j * np.asarray(doc["im"], dtype=float)
        if m.shape != (doc["dim"], doc["dim"]):
            raise DimensionMismatch(f"matrix shape {m.shape} does not match dim={doc['dim']}")
        return validate_tbo(m, tol)


@dataclass(frozen=True, eq=False)
class PureBipartiteState:
    """Unit vector in C^d (x) C^d, Alice-major amplitude order."""

    amplitudes: np.ndarray
    dim: int

    def __post_init__(self) -> None:
        amps = _frozen(np.ravel(self.amplitudes))
        if amps.shape != (self.dim * self.dim,):
            raise DimensionMismatch(
                f"expected {self.dim * self.dim} amplitudes for d={self.dim}, got {amps.shape[0]}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > DEFAULT_TOL.norm:
            raise NotNormalized(f"state norm is {norm!r}, expected 1")
        object.__setattr__(self, "amplitudes", amps)

    def as_matrix(self) -> np.ndarray:
        """Coefficient matrix ``C[i_A, i_B]``."""
        return self.amplitudes.reshape(self.dim, self.dim)

    def schmidt_coefficients(self) -> np.ndarray:
        return np.linalg.svd(self.as_matrix(), compute_uv=False)

    def is_maximally_entangled(self, atol: float = 1e-9) -> bool:
        coeffs = self.schmidt_coefficients()
        return bool(np.allclose(coeffs, 1.0 / np.sqrt(self.dim), atol=atol))

    def to_dict(self) -> dict[str, Any]:
        return {
            "dim": self.dim,
            "re": self.amplitudes.real.tolist(),
            "im": self.amplitudes.imag.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> PureBipartiteState:
        amps = np.asarray(doc["re"], dtype=float) + 1j * np.asarray(doc["im"], dtype=float)
        return cls(amps, int(doc["dim"]))


def validate_tbo(m: Any, tol: Tolerances = DEFAULT_TOL) -> TracelessBinaryObservable:
    """Check the traceless-binary-observable conditions and wrap ``m``.

    Raises NotHermitian, NotTraceless, NotInvolutory or OddDimension, in that
    order of checking.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"observable must be square, got shape {m.shape}")
    d = m.shape[0]
    herm_err = np.max(np.abs(m - m.conj().T))
    if herm_err > tol.herm:
        raise NotHermitian(f"observable is not Hermitian: max |M - M^dagger| = {herm_err:.3e}")
    trace = np.trace(m)
    if abs(trace) > tol.trace:
        raise NotTraceless(f"observable is not traceless: Tr(M) = {trace:.6g}")
    sq_err = np.max(np.abs(m @ m - np.eye(d)))
    if sq_err > tol.square:
        raise NotInvolutory(f"observable does not square to identity: max |M^2 - I| = {sq_err:.3e}")
    if d % 2:
        raise OddDimension(f"no traceless involution exists in odd dimension d={d}")
    return TracelessBinaryObservable(_frozen(m))


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed d x d unitary from a phase-corrected QR of a Ginibre matrix."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    return q * (diag / np.abs(diag))


def random_tbo(d: int, rng: np.random.Generator) -> TracelessBinaryObservable:
    if d < 2 or d % 2:
        raise OddDimension(f"random_tbo needs an even d >= 2, got d={d}")
    u = haar_unitary(d, rng)
    spectrum = np.concatenate([np.ones(d // 2), -np.ones(d // 2)])
    m = (u * spectrum) @ u.conj().T
    # symmetrize away rounding so the Hermitian check sees an exact M = M^dagger
    m = 0.5 * (m + m.conj().T)
    return validate_tbo(m)


def random_pure_state(d: int, rng: np.random.Generator) -> PureBipartiteState:
    v = rng.standard_normal(d * d) + 1j * rng.standard_normal(d * d)
    return PureBipartiteState(v / np.linalg.norm(v), d)


def schmidt_state(coeffs: Sequence[float]) -> PureBipartiteState:
    """``sum_i c_i |i i>`` with the coefficients renormalized to unit length."""
    c = np.asarray(coeffs, dtype=float)
    if np.any(c < 0):
        raise ValueError("Schmidt coefficients must be nonnegative")
    norm = np.linalg.norm(c)
    if norm == 0.0:
        raise AllZeroCoefficients("all Schmidt coefficients are zero")
    d = c.size
    amps = np.zeros(d * d, dtype=complex)
    amps[np.arange(d) * (d + 1)] = c / norm
    return PureBipartiteState(amps, d)


def maximally_entangled(d: int) -> PureBipartiteState:
    return schmidt_state(np.ones(d))


def singlet() -> PureBipartiteState:
    return PureBipartiteState(np.array([0, 1, -1, 0]) / np.sqrt(2.0), 2)


PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def _check_dims(state: PureBipartiteState, *observables: TracelessBinaryObservable) -> None:
    for obs in observables:
        if obs.dim != state.dim:
            raise DimensionMismatch(f"observable dim {obs.dim} != state dim {state.dim}")


def _real_expectation(value: complex) -> float:
    if abs(value.imag) > TOL_IMAG:
        raise TBOSimError(f"expectation has imaginary residue {value.imag:.3e}")
    return float(np.clip(value.real, -1.0, 1.0))


def joint_expectation(
    state: PureBipartiteState, a: TracelessBinaryObservable, b: TracelessBinaryObservable
) -> float:
    """<psi| A (x) B |psi>, built from the explicit Kronecker product."""
    _check_dims(state, a, b)
    psi = state.amplitudes
    return _real_expectation(np.vdot(psi, np.kron(a.matrix, b.matrix) @ psi))


def marginal_expectation(state: PureBipartiteState, t: TracelessBinaryObservable, side: Side) -> float:
    _check_dims(state, t)
    ident = np.eye(state.dim)
    if side == "alice":
        op = np.kron(t.matrix, ident)
    elif side == "bob":
        op = np.kron(ident, t.matrix)
    else:
        raise ValueError(f"side must be 'alice' or 'bob', got {side!r}")
    psi = state.amplitudes
    return _real_expectation(np.vdot(psi, op @ psi))


def real_embed(u: np.ndarray) -> np.ndarray:
    """Complex vector to reals: all real parts, then all imaginary parts."""
    u = np.ravel(u)
    return np.concatenate([u.real, u.imag])


def tsirelson_embed(state: PureBipartiteState, t: TracelessBinaryObservable, side: Side) -> UnitVector:
    """Map an observable to a point of the 2d^2-1 sphere for the given state.

    Alice's vector is the real embedding of ``(T (x) I)|psi>`` and Bob's of
    ``(I (x) T)|psi>``; their dot product is ``Re <psi|A (x) B|psi>``, which
    equals the joint expectation because ``A (x) B`` is Hermitian.
    """
    _check_dims(state, t)
    c = state.as_matrix()
    if side == "alice":
        u = t.matrix @ c
    elif side == "bob":
        u = c @ t.matrix.T
    else:
        raise ValueError(f"side must be 'alice' or 'bob', got {side!r}")
    return UnitVector(real_embed(u))


def dumps(obj: TracelessBinaryObservable | PureBipartiteState) -> str:
    return json.dumps(obj.to_dict())
