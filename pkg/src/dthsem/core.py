"""Extended phase space state, step records and the canonical symplectic map.

Coordinates are laid out as ``(q_1..q_n, t, p_1..p_n, prho)`` everywhere, where
``prho`` is the momentum conjugate to time.  With that ordering the canonical
structure matrix is ``J = [[0, I], [-I, 0]]`` and is applied without ever being
formed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class StructureError(ValueError):
    """Raised for vectors or states of incompatible shape."""


def _as_vector(v) -> np.ndarray:
    if isinstance(v, ExtendedState):
        return v.z
    return np.asarray(v, dtype=float)


def apply_J(v) -> np.ndarray:
    """Return ``J v`` for ``v = (a, b)``, which is ``(b, -a)``."""
    v = _as_vector(v)
    if v.ndim != 1 or v.size % 2:
        raise StructureError(f"apply_J needs an even-length vector, got shape {v.shape}")
    m = v.size // 2
    out = np.empty_like(v)
    out[:m] = v[m:]
    out[m:] = -v[:m]
    return out


def J_times(A: np.ndarray) -> np.ndarray:
    """Left-multiply a matrix by ``J`` (row permutation with sign)."""
    m = A.shape[0] // 2
    return np.concatenate([A[m:], -A[:m]])


@dataclass(frozen=True)
class ExtendedState:
    """A point ``z = (q, t, p, prho)`` of extended phase space.

    ``qext`` holds the physical positions followed by time, ``pext`` the
    physical momenta followed by the time momentum.
    """

    qext: np.ndarray
    pext: np.ndarray

    def __post_init__(self):
        qext = np.array(self.qext, dtype=float).reshape(-1)
        pext = np.array(self.pext, dtype=float).reshape(-1)
        if qext.size != pext.size:
            raise StructureError(f"qext has {qext.size} entries but pext has {pext.size}")
        if qext.size < 2:
            raise StructureError("extended state needs at least one degree of freedom")
        if not (np.all(np.isfinite(qext)) and np.all(np.isfinite(pext))):
            raise ValueError("extended state entries must be finite")
        qext.setflags(write=False)
        pext.setflags(write=False)
        object.__setattr__(self, "qext", qext)
        object.__setattr__(self, "pext", pext)

    @classmethod
    def from_vector(cls, z) -> "ExtendedState":
        z = np.asarray(z, dtype=float).reshape(-1)
        if z.size % 2:
            raise StructureError(f"odd-length state vector ({z.size})")
        m = z.size // 2
        return cls(z[:m], z[m:])

    @classmethod
    def from_physical(cls, q, p, t: float = 0.0, prho: float = 0.0) -> "ExtendedState":
        q = np.atleast_1d(np.asarray(q, dtype=float))
        p = np.atleast_1d(np.asarray(p, dtype=float))
        return cls(np.append(q, t), np.append(p, prho))

    @property
    def n(self) -> int:
        return self.qext.size - 1

    @property
    def z(self) -> np.ndarray:
        return np.concatenate([self.qext, self.pext])

    @property
    def q(self) -> np.ndarray:
        return self.qext[:-1]

    @property
    def t(self) -> float:
        return float(self.qext[-1])

    @property
    def p(self) -> np.ndarray:
        return self.pext[:-1]

    @property
    def prho(self) -> float:
        return float(self.pext[-1])

    def __eq__(self, other):
        if not isinstance(other, ExtendedState):
            return NotImplemented
        return np.array_equal(self.qext, other.qext) and np.array_equal(self.pext, other.pext)

    def __hash__(self):
        return hash((self.qext.tobytes(), self.pext.tobytes()))


def midpoint(a, b) -> ExtendedState:
    """Componentwise average of two extended states."""
    za, zb = _as_vector(a), _as_vector(b)
    if za.shape != zb.shape:
        raise StructureError(f"dimension mismatch: {za.shape} vs {zb.shape}")
    return ExtendedState.from_vector(0.5 * (za + zb))


class Branch(str, enum.Enum):
    NORMAL = "Normal"
    BRACKETED = "Bracketed"
    GHOST = "Ghost"
    REGULARIZED = "Regularized"
    POST_CROSS = "PostCross"


class EventKind(str, enum.Enum):
    CROSSING_DETECTED = "CrossingDetected"
    BRACKET_FOUND = "BracketFound"
    GHOST_BRANCH = "GhostBranch"
    REGULARIZED_BRANCH = "RegularizedBranch"
    NEGATIVE_LAMBDA = "NegativeLambda"
    # not named in the original event list; see README
    GHOST_REWIND = "GhostRewind"
    DEGENERATE_CROSSING = "DegenerateCrossing"
    KKT_SIGN_MISMATCH = "KKTSignMismatch"


@dataclass(frozen=True)
class StepResult:
    """One linear segment ``z_start -> z_end`` of a discrete trajectory."""

    z_start: ExtendedState
    z_end: ExtendedState
    z_mid: ExtendedState
    lam: float
    mu: float
    branch: Branch
    psi_mid: float
    h_mid: float

    @property
    def delta(self) -> np.ndarray:
        return self.z_end.z - self.z_start.z


@dataclass
class Trajectory:
    steps: list[StepResult] = field(default_factory=list)
    events: list[tuple[int, EventKind]] = field(default_factory=list)
    initial: ExtendedState | None = None

    def __len__(self):
        return len(self.steps)

    def log(self, kind: EventKind, index: int | None = None):
        self.events.append((len(self.steps) if index is None else index, kind))

    def vertices(self) -> np.ndarray:
        """All vertices as rows, ``z_0`` through ``z_N``."""
        if not self.steps:
            return np.empty((0, 0)) if self.initial is None else self.initial.z[None, :]
        rows = [self.steps[0].z_start.z] + [s.z_end.z for s in self.steps]
        return np.array(rows)

    @property
    def z_final(self) -> ExtendedState:
        if not self.steps:
            if self.initial is None:
                raise ValueError("empty trajectory has no final state")
            return self.initial
        return self.steps[-1].z_end

    def event_kinds(self) -> set[EventKind]:
        return {kind for _, kind in self.events}
