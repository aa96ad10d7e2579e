"""Geodesic matching on the unit hypersphere.

Normal and anomaly centroids are tracked with a projected exponential
moving average; each labelled feature updates only its own centroid, and
only when that centroid is strictly the nearer one. Also here: the geodesic
compactness/separation losses, variance-aware channel reweighting, and the
multimodal assignment rule with its separation check.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .metrics import MetricSpec, metric_eval_rows

UNIT_TOL = 1e-6


class DegenerateUpdateError(ValueError):
    """The EMA combination vanished (antipodal inputs), so it cannot be projected."""


def _check_unit(f: np.ndarray, name: str) -> None:
    n = float(np.linalg.norm(f))
    if abs(n - 1.0) > UNIT_TOL:
        raise ValueError(f"{name} must be unit-norm within {UNIT_TOL}, has norm {n}")


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(n == 0):
        raise ValueError("cannot normalize a zero vector")
    return v / n


def geodesic_distance(f1, f2) -> float:
    """Great-circle angle ``arccos(<f1, f2>)`` in ``[0, pi]``.

    Evaluated as ``2 atan2(||a - b||, ||a + b||)`` on the renormalized inputs,
    which equals the arccos form on the sphere but keeps full precision near
    0 and pi, where arccos of a rounded inner product loses about 1e-8.
    """
    f1 = np.asarray(f1, dtype=float)
    f2 = np.asarray(f2, dtype=float)
    _check_unit(f1, "f1")
    _check_unit(f2, "f2")
    a, b = f1 / np.linalg.norm(f1), f2 / np.linalg.norm(f2)
    return float(2.0 * np.arctan2(np.linalg.norm(a - b), np.linalg.norm(a + b)))


def geodesic_rows(F: np.ndarray, c: np.ndarray) -> np.ndarray:
    F = normalize(F)
    c = normalize(c)
    return 2.0 * np.arctan2(np.linalg.norm(F - c, axis=-1), np.linalg.norm(F + c, axis=-1))


def ema_centroid_update(c, f, alpha: float = 0.5) -> np.ndarray:
    """``normalize(alpha * c + (1 - alpha) * f)``."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    c = np.asarray(c, dtype=float)
    f = np.asarray(f, dtype=float)
    _check_unit(c, "centroid")
    _check_unit(f, "feature")
    mix = alpha * c + (1 - alpha) * f
    n = float(np.linalg.norm(mix))
    if n < 1e-12:
        raise DegenerateUpdateError("EMA combination is zero; centroid left unchanged")
    return mix / n


@dataclass
class SphereState:
    """Normal (``c_plus``) and anomaly (``c_minus``) centroids and their matched features.

    A centroid left as ``None`` is seeded by the first feature carrying its
    label; the zero vector cannot be projected onto the sphere.
    """

    c_plus: Optional[np.ndarray] = None
    c_minus: Optional[np.ndarray] = None
    alpha: float = 0.5
    S_plus: list = field(default_factory=list)
    S_minus: list = field(default_factory=list)
    degenerate_skips: int = 0
    history: list = field(default_factory=list)


def adaptive_assign(f, label: str, state: SphereState) -> str:
    """Route one labelled feature and update ``state`` in place.

    Returns ``"update_plus"``, ``"update_minus"`` or ``"skip"``. The sample's
    own radius is ``min(d+, d-)``; a feature updates its label's centroid
    only if that centroid is strictly nearer. Ties and wrong-side features
    are skipped.
    """
    if label not in ("normal", "anomaly"):
        raise ValueError(f"label must be 'normal' or 'anomaly', got {label!r}")
    f = np.asarray(f, dtype=float)
    _check_unit(f, "feature")
    own = "c_plus" if label == "normal" else "c_minus"
    store = state.S_plus if label == "normal" else state.S_minus
    decision = "update_plus" if label == "normal" else "update_minus"

    if getattr(state, own) is None:
        setattr(state, own, f / np.linalg.norm(f))
        store.append(f.copy())
        state.history.append(decision)
        return decision

    d_plus = geodesic_distance(f, state.c_plus) if state.c_plus is not None else math.inf
    d_minus = geodesic_distance(f, state.c_minus) if state.c_minus is not None else math.inf
    nearer = d_plus < d_minus if label == "normal" else d_minus < d_plus
    if not nearer:
        state.history.append("skip")
        return "skip"
    try:
        setattr(state, own, ema_centroid_update(getattr(state, own), f, state.alpha))
    except DegenerateUpdateError:
        state.degenerate_skips += 1
        state.history.append("skip")
        return "skip"
    store.append(f.copy())
    state.history.append(decision)
    return decision


@dataclass(frozen=True)
class GeodesicLosses:
    L_intra: float
    L_inter: float
    L_geo: float
    notices: tuple = ()


def geodesic_losses(state: SphereState, lambda1: float = 1.0, lambda2: float = 1.0) -> GeodesicLosses:
    """Mean squared geodesic spread of each matched set plus negative centroid separation."""
    if lambda1 <= 0 or lambda2 <= 0:
        raise ValueError("lambda1 and lambda2 must be positive")
    notices = []
    intra = 0.0
    for name, S, c in (("S_plus", state.S_plus, state.c_plus), ("S_minus", state.S_minus, state.c_minus)):
        if not S or c is None:
            notices.append(f"{name} is empty; its compactness term is 0")
            continue
        intra += float(np.mean(geodesic_rows(np.array(S), c) ** 2))
    if state.c_plus is None or state.c_minus is None:
        notices.append("a centroid is unset; separation term is 0")
        inter = 0.0
    else:
        inter = -geodesic_distance(state.c_plus, state.c_minus)
    return GeodesicLosses(intra, inter, lambda1 * intra + lambda2 * inter, tuple(notices))


def softplus_gain(scale: float = 10.0, shift: float = 0.0) -> Callable[[np.ndarray], np.ndarray]:
    """Default channel gain ``softplus(scale * delta + shift)``: smooth, nonnegative, monotone."""
    if scale < 0:
        raise ValueError("scale must be nonnegative to keep the gain monotone")

    def gain(delta: np.ndarray) -> np.ndarray:
        return np.logaddexp(0.0, scale * np.asarray(delta, dtype=float) + shift)

    return gain


@dataclass(frozen=True, eq=False)
class VacaResult:
    weights: np.ndarray
    reweighted: np.ndarray
    var_disc: float
    delta: np.ndarray


def vaca_reweight(P, T, gain_map: Optional[Callable] = None, gamma: float = 1.0) -> VacaResult:
    """Variance-aware channel reweighting.

    ``P`` is (B, N, D) with rows normalized along D; ``T`` is (D, 2) with
    columns for the normal and anomaly class. Per-channel contributions
    ``P[b, n, d] * T[d, j]`` are batch-averaged and their class contrast
    ``delta_d`` drives the weights ``w = 1 + gamma * gain_map(delta)``.
    """
    P = np.asarray(P, dtype=float)
    T = np.asarray(T, dtype=float)
    if P.ndim != 3:
        raise ValueError(f"P must be (B, N, D), got shape {P.shape}")
    if T.shape != (P.shape[2], 2):
        raise ValueError(f"T must be ({P.shape[2]}, 2), got shape {T.shape}")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    gain_map = gain_map or softplus_gain()
    contrib = P[..., :, None] * T[None, None, :, :]       # (B, N, D, 2)
    mean_contrib = contrib.mean(axis=(0, 1))              # (D, 2)
    delta = np.abs(mean_contrib[:, 0] - mean_contrib[:, 1])
    if gamma == 0:
        w = np.ones_like(delta)
        return VacaResult(w, P.copy(), float(np.var(delta)), delta)
    w = 1.0 + gamma * np.asarray(gain_map(delta), dtype=float)
    return VacaResult(w, P * w, float(np.var(delta * w)), delta)


@dataclass(frozen=True, eq=False)
class ModeBank:
    centroids: tuple
    taus: tuple
    metric: MetricSpec = MetricSpec()
    weights: Optional[tuple] = None

    def __post_init__(self) -> None:
        if len(self.centroids) == 0:
            raise ValueError("a mode bank needs at least one mode")
        if len(self.centroids) != len(self.taus):
            raise ValueError("centroids and taus must have the same length")
        if any(t <= 0 for t in self.taus):
            raise ValueError("mode radii must be positive")

    @property
    def C(self) -> np.ndarray:
        return np.array(self.centroids, dtype=float)


def multimodal_assign_batch(X, bank: ModeBank) -> np.ndarray:
    """Mode index per row of ``X``, or -1 when the row is inside zero or several balls."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    C = bank.C
    taus = np.asarray(bank.taus, dtype=float)
    D = np.stack([metric_eval_rows(bank.metric, X - C[m]) for m in range(len(C))], axis=1)
    inside = D < taus[None, :]
    count = inside.sum(axis=1)
    return np.where(count == 1, np.argmax(inside, axis=1), -1)


def multimodal_assign(x, bank: ModeBank) -> Optional[int]:
    """Mode ``m`` if ``x`` is inside ball ``m`` and outside every other ball, else None."""
    m = int(multimodal_assign_batch(np.asarray(x, dtype=float)[None, :], bank)[0])
    return None if m < 0 else m


def check_mode_separation(true_modes: Sequence, bank: ModeBank, R_max: float, eps_max: float) -> bool:
    """True iff the modes are separated by more than ``2 (tau_max + R_max + eps_max)``
    and every radius covers its mode, ``tau_m >= R_max + eps_m`` with
    ``eps_m = ||c_m - mu_m||``. Also False if some ``eps_m`` exceeds ``eps_max``."""
    mus = np.array(true_modes, dtype=float)
    if len(mus) < 2:
        raise ValueError("separation needs at least two modes")
    if len(mus) != len(bank.centroids):
        raise ValueError("true_modes and bank must list the same number of modes")
    eps = np.linalg.norm(bank.C - mus, axis=1)
    if np.any(eps > eps_max):
        return False
    tau_max = max(bank.taus)
    gaps = [np.linalg.norm(mus[i] - mus[j]) for i in range(len(mus)) for j in range(i + 1, len(mus))]
    separated = min(gaps) > 2 * (tau_max + R_max + eps_max)
    covered = all(t >= R_max + e for t, e in zip(bank.taus, eps))
    return bool(separated and covered)


# Embedding files: little-endian uint32 count, uint32 dim, then count*dim float32, row-major.
_HEADER = struct.Struct("<II")


def write_embeddings(path, F) -> None:
    F = np.asarray(F, dtype="<f4")
    if F.ndim != 2:
        raise ValueError("embeddings must be a 2-D array")
    path = Path(path)
    if path.suffix == ".csv":
        np.savetxt(path, F, delimiter=",", fmt="%.9g")
        return
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(*F.shape))
        fh.write(F.tobytes(order="C"))


def read_embeddings(path) -> np.ndarray:
    """Load a (count, dim) feature matrix from ``.csv`` or the binary layout above."""
    path = Path(path)
    if path.suffix == ".csv":
        return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=float))
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    count, dim = _HEADER.unpack_from(raw)
    body = raw[_HEADER.size:]
    if len(body) != 4 * count * dim:
        raise ValueError(f"{path}: expected {count}x{dim} float32 values, found {len(body) // 4}")
    return np.frombuffer(body, dtype="<f4").reshape(count, dim).astype(float)
