"""Extrinsic alignment from point correspondences and PTP clock offset/delay."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class InvalidExchangeError(ValueError):
    pass


@dataclass(frozen=True)
class RigidTransform:
    rotation: np.ndarray
    translation: np.ndarray

    def apply(self, points) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """``self`` after ``other``."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m


class RigidEstimate(NamedTuple):
    transform: RigidTransform
    rms: float
    degenerate: bool


def estimate_rigid(src, dst) -> RigidEstimate:
    """Least-squares rotation + translation mapping ``src`` onto ``dst``.

    Centroids removed, SVD of the cross-covariance, sign fix on the last singular
    direction so the result is a proper rotation. ``degenerate`` flags collinear input,
    where the rotation about the common line is not determined.
    """
    P = np.asarray(src, dtype=float)
    Q = np.asarray(dst, dtype=float)
    if P.shape != Q.shape or P.ndim != 2 or P.shape[1] != 3:
        raise ValueError("src and dst must be matching (n, 3) arrays")
    if len(P) < 3:
        raise ValueError("need at least 3 correspondences")
    pc, qc = P.mean(axis=0), Q.mean(axis=0)
    A, B = P - pc, Q - qc
    H = A.T @ B
    U, S, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T)) or 1.0
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    t = qc - R @ pc
    resid = P @ R.T + t - Q
    rms = float(np.sqrt((resid ** 2).sum(axis=1).mean()))
    sv = np.linalg.svd(A, compute_uv=False)
    degenerate = bool(sv[1] <= 1e-9 * max(sv[0], 1e-300))
    return RigidEstimate(RigidTransform(R, t), rms, degenerate)


@dataclass(frozen=True)
class TimestampExchange:
    t1: float  # master send, master clock
    t2: float  # slave receive, slave clock
    t3: float  # slave send, slave clock
    t4: float  # master receive, master clock


@dataclass(frozen=True)
class ClockEstimate:
    offset: float  # slave - master
    delay: float  # one-way, assuming symmetric paths


def estimate_clock(ex: TimestampExchange) -> ClockEstimate:
    fwd = ex.t2 - ex.t1
    back = ex.t4 - ex.t3
    delay = (fwd + back) / 2
    # allow for rounding when the true delay is zero
    tol = 1e-12 * max(1.0, abs(ex.t1), abs(ex.t2), abs(ex.t3), abs(ex.t4))
    if delay < -tol:
        raise InvalidExchangeError(f"negative path delay {delay:g} s")
    return ClockEstimate((fwd - back) / 2, max(delay, 0.0))


def estimate_clock_batch(exchanges) -> ClockEstimate:
    ests = [estimate_clock(e) for e in exchanges]
    if not ests:
        raise ValueError("no exchanges")
    return ClockEstimate(float(np.median([e.offset for e in ests])),
                         float(np.median([e.delay for e in ests])))


def read_pairs(text: str):
    rows = []
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        vals = line.split()
        if len(vals) != 6:
            raise ValueError(f"line {n}: expected 'sx sy sz dx dy dz'")
        rows.append([float(v) for v in vals])
    arr = np.array(rows, dtype=float).reshape(-1, 6)
    return arr[:, :3], arr[:, 3:]


def read_exchanges(text: str) -> list[TimestampExchange]:
    out = []
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        vals = line.split()
        if len(vals) != 4:
            raise ValueError(f"line {n}: expected 't1 t2 t3 t4'")
        out.append(TimestampExchange(*(float(v) for v in vals)))
    return out
