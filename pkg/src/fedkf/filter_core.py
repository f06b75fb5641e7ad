"""Discrete-time linear Kalman filter primitives.

The same three functions back the standard-KF baseline and every local
filter of the federated filter::

    x+ = A x + B u                 P+ = A P A^T + Q          (predict)
    K  = P C^T (C P C^T + R)^-1                               (gain)
    x+ = x + K (z - C x)           P+ = (I-KC) P (I-KC)^T + K R K^T

The covariance update is always the Joseph form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ShapeMismatchError(ValueError):
    """Raised when matrix or vector dimensions are inconsistent."""


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when the innovation covariance cannot be inverted."""


def _as_matrix(value, name: str) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if arr.ndim != 2:
        raise ShapeMismatchError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def _as_vector(value, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.ndim != 1:
        raise ShapeMismatchError(f"{name} must be 1-D, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class StateEstimate:
    """State vector ``x`` and covariance ``P`` at time index ``k``."""

    x: np.ndarray
    P: np.ndarray
    k: int = 0

    def __post_init__(self):
        x = _as_vector(self.x, "x")
        P = _as_matrix(self.P, "P")
        if P.shape != (x.size, x.size):
            raise ShapeMismatchError(f"P must be {x.size}x{x.size}, got {P.shape}")
        if self.k < 0:
            raise ValueError("time index k must be non-negative")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "P", P)

    @property
    def dim(self) -> int:
        return self.x.size

    def is_valid(self, tol: float = 1e-9) -> bool:
        """True when P is symmetric and positive semidefinite within ``tol``."""
        if np.max(np.abs(self.P - self.P.T), initial=0.0) > tol:
            return False
        return bool(np.min(np.linalg.eigvalsh(self.P)) >= -tol)


@dataclass(frozen=True)
class KfModel:
    """System matrices of one linear filter.

    ``C`` doubles as the measurement matrix in both the gain and the state
    update. ``B`` defaults to a zero column, i.e. no control channel.
    """

    A: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    B: np.ndarray = field(default=None)

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        C = _as_matrix(self.C, "C")
        Q = _as_matrix(self.Q, "Q")
        R = _as_matrix(self.R, "R")
        n_x = A.shape[0]
        B = np.zeros((n_x, 1)) if self.B is None else _as_matrix(self.B, "B")
        if A.shape != (n_x, n_x):
            raise ShapeMismatchError(f"A must be square, got {A.shape}")
        if B.shape[0] != n_x:
            raise ShapeMismatchError(f"B must have {n_x} rows, got {B.shape}")
        if C.shape[1] != n_x:
            raise ShapeMismatchError(f"C must have {n_x} columns, got {C.shape}")
        if Q.shape != (n_x, n_x):
            raise ShapeMismatchError(f"Q must be {n_x}x{n_x}, got {Q.shape}")
        n_z = C.shape[0]
        if R.shape != (n_z, n_z):
            raise ShapeMismatchError(f"R must be {n_z}x{n_z}, got {R.shape}")
        for name, value in (("A", A), ("B", B), ("C", C), ("Q", Q), ("R", R)):
            object.__setattr__(self, name, value)

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_z(self) -> int:
        return self.C.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]

    @classmethod
    def scalar(cls, A: float = 1.0, C: float = 1.0, Q: float = 0.0, R: float = 1.0) -> "KfModel":
        """One-dimensional model; the default is a random-walk RSSI track."""
        return cls(A=[[A]], C=[[C]], Q=[[Q]], R=[[R]])

    def with_noise(self, Q=None, R=None) -> "KfModel":
        return KfModel(
            A=self.A,
            C=self.C,
            Q=self.Q if Q is None else Q,
            R=self.R if R is None else R,
            B=self.B,
        )

    def is_valid(self, tol: float = 1e-9) -> bool:
        """Check Q, R symmetric PSD and R positive definite."""
        for M in (self.Q, self.R):
            if np.max(np.abs(M - M.T), initial=0.0) > tol:
                return False
        if np.min(np.linalg.eigvalsh(self.Q)) < -tol:
            return False
        return bool(np.min(np.linalg.eigvalsh(self.R)) > 0.0)


def predict(state: StateEstimate, model: KfModel, u=None) -> StateEstimate:
    """Propagate ``state`` one step through the model dynamics."""
    if state.dim != model.n_x:
        raise ShapeMismatchError(f"A is {model.A.shape} but state has dimension {state.dim}")
    A = model.A
    x = A @ state.x
    if u is not None:
        u = _as_vector(u, "u")
        if u.size != model.n_u:
            raise ShapeMismatchError(f"B expects {model.n_u} control inputs, got {u.size}")
        x = x + model.B @ u
    P = A @ state.P @ A.T + model.Q
    return StateEstimate(x, P, state.k + 1)


def gain(P, C, R) -> np.ndarray:
    """Kalman gain ``P C^T (C P C^T + R)^-1``, computed with a linear solve."""
    P = _as_matrix(P, "P")
    C = _as_matrix(C, "C")
    R = _as_matrix(R, "R")
    if C.shape[1] != P.shape[0]:
        raise ShapeMismatchError(f"C is {C.shape} but P is {P.shape}")
    if R.shape != (C.shape[0], C.shape[0]):
        raise ShapeMismatchError(f"R is {R.shape} but C has {C.shape[0]} rows")
    PCt = P @ C.T
    S = C @ PCt + R
    try:
        # K S = P C^T  <=>  S^T K^T = (P C^T)^T
        return np.linalg.solve(S.T, PCt.T).T
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"innovation covariance is singular: {S!r}") from exc


def update(state: StateEstimate, model: KfModel, z) -> StateEstimate:
    """Fold measurement ``z`` into ``state`` (Joseph-form covariance)."""
    z = _as_vector(z, "z")
    if z.size != model.n_z:
        raise ShapeMismatchError(f"C expects {model.n_z} measurements, got {z.size}")
    if state.dim != model.n_x:
        raise ShapeMismatchError(f"C is {model.C.shape} but state has dimension {state.dim}")
    C = model.C
    K = gain(state.P, C, model.R)
    x = state.x + K @ (z - C @ state.x)
    IKC = np.eye(state.dim) - K @ C
    P = IKC @ state.P @ IKC.T + K @ model.R @ K.T
    return StateEstimate(x, P, state.k)


def step(state: StateEstimate, model: KfModel, z, u=None) -> StateEstimate:
    """One predict-then-update cycle."""
    return update(predict(state, model, u), model, z)
