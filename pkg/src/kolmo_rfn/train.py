"""Output-weight trainers for random feature networks.

Three fitting routes share one convention: the hidden layer is frozen,
so every trainer sees only the feature matrix X (n samples by N
features) and the label vector Y, and returns the output weights W
together with diagnostics.

* ``fit_ols``: minimum-norm least squares via the pseudo-inverse.
* ``fit_constrained``: least squares restricted to the ball
  ``norm(W) <= lam``, solved through the Lagrange multiplier Lambda
  with ``W = (X'X + Lambda I)^{-1} X'Y``.
* ``fit_sgd``: projected mini-batch SGD with step size eta0/sqrt(t).

The output cap, when a model carries one, acts at prediction time
only; no trainer ever sees it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .network import FeatureMatrix, RandomFeatureNet, predict
from .rng import substream

__all__ = [
    "TrainConfig",
    "FitDiagnostics",
    "fit_ols",
    "fit_constrained",
    "project_ball",
    "fit_sgd",
    "fit",
    "empirical_risk",
    "prediction_error_estimate",
]

_SGD_INDEX_STREAM = 60

# singular values below this fraction of the largest are treated as zero
_SVD_RCOND = 1e-10

METHODS = ("ols", "constrained", "sgd")


@dataclass(frozen=True)
class TrainConfig:
    """Which trainer to run and with what knobs.

    ``lam`` is the norm budget: the constraint radius for the
    constrained solver and the projection radius for SGD. ``average``
    switches SGD to returning the mean of all iterates instead of the
    last one; it is off by default.
    """

    method: str
    lam: float | None = None
    eta0: float | None = None
    batch: int | None = None
    steps: int | None = None
    seed: int = 0
    cap: float | None = None
    average: bool = False

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.method in ("constrained", "sgd"):
            if self.lam is None or not self.lam > 0:
                raise ValueError(f"method {self.method!r} requires lam > 0, got {self.lam}")
        if self.method == "sgd":
            if self.eta0 is None or not self.eta0 > 0:
                raise ValueError(f"sgd requires eta0 > 0, got {self.eta0}")
            if self.steps is None or self.steps < 1:
                raise ValueError(f"sgd requires steps >= 1, got {self.steps}")
            if self.batch is not None and self.batch < 1:
                raise ValueError(f"batch must be at least 1, got {self.batch}")
        if self.cap is not None and not self.cap > 0:
            raise ValueError(f"cap must be positive, got {self.cap}")

    def to_dict(self) -> dict:
        out = {"method": self.method, "seed": self.seed}
        if self.lam is not None:
            out["lambda"] = self.lam
        if self.eta0 is not None:
            out["eta0"] = self.eta0
        if self.batch is not None:
            out["batch"] = self.batch
        if self.steps is not None:
            out["steps"] = self.steps
        if self.cap is not None:
            out["cap"] = self.cap
        if self.average:
            out["average"] = True
        return out

    @staticmethod
    def from_dict(payload: dict) -> "TrainConfig":
        return TrainConfig(
            method=payload["method"],
            lam=payload.get("lambda"),
            eta0=payload.get("eta0"),
            batch=payload.get("batch"),
            steps=payload.get("steps"),
            seed=int(payload.get("seed", 0)),
            cap=payload.get("cap"),
            average=bool(payload.get("average", False)),
        )


@dataclass(frozen=True)
class FitDiagnostics:
    empirical_risk: float
    lambda_multiplier: float | None = None  # constrained only
    effective_rank: int | None = None  # ols only
    steps_run: int | None = None  # sgd only

    def __post_init__(self) -> None:
        if not self.empirical_risk >= 0:
            raise ValueError("empirical risk cannot be negative")
        if self.lambda_multiplier is not None and not self.lambda_multiplier >= 0:
            raise ValueError("multiplier cannot be negative")

    def to_dict(self) -> dict:
        out = {"empirical_risk": self.empirical_risk}
        if self.lambda_multiplier is not None:
            out["lambda_multiplier"] = self.lambda_multiplier
        if self.effective_rank is not None:
            out["effective_rank"] = self.effective_rank
        if self.steps_run is not None:
            out["steps_run"] = self.steps_run
        return out


def _as_matrix(design) -> np.ndarray:
    values = design.values if isinstance(design, FeatureMatrix) else np.asarray(design, dtype=float)
    if values.ndim != 2:
        raise ValueError("design must be an n x N matrix")
    return values


def _check_xy(design, Y) -> tuple[np.ndarray, np.ndarray]:
    X = _as_matrix(design)
    y = np.asarray(Y, dtype=float).ravel()
    if X.shape[0] == 0:
        raise ValueError("cannot fit on empty data")
    if y.shape[0] != X.shape[0]:
        raise ValueError(f"{X.shape[0]} design rows but {y.shape[0]} labels")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("design and labels must be finite")
    return X, y


def _mean_sq_residual(X: np.ndarray, y: np.ndarray, W: np.ndarray) -> float:
    r = X @ W - y
    return float(r @ r / y.size)


def fit_ols(design, Y) -> tuple[np.ndarray, FitDiagnostics]:
    """Minimum-norm least squares.

    Rank deficiency (including n < N) is handled by the pseudo-inverse:
    among all W with X'X W = X'Y the returned one has minimal norm.
    """

    X, y = _check_xy(design, Y)
    W, _, rank, _ = np.linalg.lstsq(X, y, rcond=_SVD_RCOND)
    diag = FitDiagnostics(
        empirical_risk=_mean_sq_residual(X, y, W), effective_rank=int(rank)
    )
    return W, diag


def fit_constrained(design, Y, lam: float) -> tuple[np.ndarray, FitDiagnostics]:
    """Least squares over the ball norm(W) <= lam.

    The minimizer is W(t) = (X'X + tI)^{-1} X'Y with t = Lambda >= 0
    chosen so that norm(W) = lam, unless the minimum-norm OLS solution
    already fits inside the ball, in which case Lambda = 0. Since
    f(t) = norm(W(t)) is strictly decreasing where positive, Lambda is
    found by doubling a bracket and bisecting. One SVD of X serves
    every f evaluation: with X = U diag(s) V', f(t) is the norm of
    s_i (U'Y)_i / (s_i^2 + t).
    """

    if not lam > 0:
        raise ValueError(f"lam must be positive, got {lam}")
    X, y = _check_xy(design, Y)
    u, s, vt = np.linalg.svd(X, full_matrices=False)
    keep = s > _SVD_RCOND * s[0] if s.size and s[0] > 0 else np.zeros(s.shape, dtype=bool)
    s = s[keep]
    c = u.T[keep] @ y
    vt = vt[keep]

    def solution_coeffs(t: float) -> np.ndarray:
        return s * c / (s * s + t)

    min_norm = math.sqrt(float(np.sum((c / s) ** 2))) if s.size else 0.0
    if min_norm <= lam:
        W = vt.T @ (c / s) if s.size else np.zeros(X.shape[1])
        diag = FitDiagnostics(
            empirical_risk=_mean_sq_residual(X, y, W), lambda_multiplier=0.0
        )
        return W, diag

    def f(t: float) -> float:
        return float(np.linalg.norm(solution_coeffs(t)))

    hi = 1.0
    for _ in range(200):
        if f(hi) <= lam:
            break
        hi *= 2.0
    else:  # pragma: no cover - would need astronomically scaled data
        raise ArithmeticError("failed to bracket the norm constraint")
    lo = 0.0
    lam_mult = hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        val = f(mid)
        lam_mult = mid
        if abs(val - lam) <= 1e-8 * lam:
            break
        if val > lam:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-10 * hi:
            lam_mult = hi  # f(hi) <= lam keeps the iterate feasible
            break

    W = vt.T @ solution_coeffs(lam_mult)
    diag = FitDiagnostics(
        empirical_risk=_mean_sq_residual(X, y, W), lambda_multiplier=lam_mult
    )
    return W, diag


def project_ball(w, lam: float) -> np.ndarray:
    """Orthogonal projection onto the closed ball of radius lam."""

    if not lam > 0:
        raise ValueError(f"lam must be positive, got {lam}")
    w = np.asarray(w, dtype=float)
    norm = float(np.linalg.norm(w))
    if norm <= lam:
        return w
    return w * (lam / norm)


def fit_sgd(design, Y, config: TrainConfig, observer=None) -> tuple[np.ndarray, FitDiagnostics]:
    """Projected mini-batch SGD on the empirical squared risk.

    Starts at W_1 = 0 and performs exactly steps-1 updates

        W_{t+1} = proj(W_t - (2 eta_t / batch) * X_J' (X_J W_t - Y_J))

    with eta_t = eta0 / sqrt(t) and J a batch of indices drawn i.i.d.
    uniformly (with replacement) from a substream keyed only by the
    config seed, so runs are reproducible and independent of how the
    data were produced. ``observer(t, W_t)`` is invoked on every
    iterate including the initial zero vector; the array passed is a
    snapshot the observer may keep.

    With ``config.average`` the returned vector is the average of all
    iterates W_1..W_steps instead of the final one (a Polyak-style
    variant, off by default). Diagnostics always report the risk of
    the returned vector.
    """

    if config.method != "sgd":
        raise ValueError(f"fit_sgd called with method {config.method!r}")
    X, y = _check_xy(design, Y)
    n, N = X.shape
    batch = config.batch if config.batch is not None else min(n, 64)
    if batch > n:
        raise ValueError(f"batch {batch} exceeds the {n} available samples")
    steps = config.steps
    lam = config.lam

    W = np.zeros(N)
    if observer is not None:
        observer(1, W.copy())
    total = W.copy() if config.average else None

    idx_stream = substream(config.seed, _SGD_INDEX_STREAM)
    block = 8192
    t = 1
    while t < steps:
        rows = min(block, steps - t)
        J = idx_stream.integers(0, n, size=(rows, batch))
        for k in range(rows):
            Xb = X[J[k]]
            grad = (2.0 / batch) * (Xb.T @ (Xb @ W - y[J[k]]))
            W = project_ball(W - config.eta0 / math.sqrt(t) * grad, lam)
            t += 1
            if observer is not None:
                observer(t, W.copy())
            if total is not None:
                total += W

    out = total / steps if total is not None else W
    diag = FitDiagnostics(
        empirical_risk=_mean_sq_residual(X, y, out), steps_run=steps - 1
    )
    return out, diag


def fit(design, Y, config: TrainConfig) -> tuple[np.ndarray, FitDiagnostics]:
    """Dispatch to the trainer named by the config."""

    if config.method == "ols":
        return fit_ols(design, Y)
    if config.method == "constrained":
        return fit_constrained(design, Y, config.lam)
    return fit_sgd(design, Y, config)


def empirical_risk(net: RandomFeatureNet, data: Dataset) -> float:
    """Mean squared residual of the net's predictions on the data.

    Uses the net's own prediction pipeline, so a model carrying an
    output cap is scored as it would actually predict.
    """

    if data.n < 1:
        raise ValueError("empirical risk needs at least one sample")
    r = predict(net, data.X) - data.Y
    return float(r @ r / data.n)


def prediction_error_estimate(net: RandomFeatureNet, test: Dataset) -> float:
    """Root mean squared residual on held-out data."""

    return math.sqrt(empirical_risk(net, test))
