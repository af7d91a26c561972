"""Dataset generation and persistence.

Two regimes produce training pairs (X_i, Y_i):

* PDE datasets: inputs are log-moneyness points drawn uniformly on
  [-M, M]^d; labels are either one payoff draw phi(exp(X_i + L_T)) per
  row (``single_draw``), an unbiased Monte Carlo price per row
  (``mc_price``), or an MC price plus centered Gaussian noise
  (``noisy_observation``).  In every case E[Y | X = x] = u(T, exp(x)).
* Basket-put datasets: inputs are strikes uniform on [0, M]; labels are
  Monte Carlo put prices under a lognormal S_T plus optional noise.

Inputs, label draws, and observation noise come from separate
substreams of the dataset seed, and Monte Carlo label rows get one
substream each, keyed by (seed, row), so generation is reproducible and
order-independent.  Datasets persist as CSV (header ``x_1,...,x_d,y``)
with a JSON sidecar holding the generation metadata.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .levy import LevyTriplet, Payoff, payoff_eval, price_mc, simulate_levy_increment, sqrt_sigma
from .rng import substream

__all__ = [
    "Dataset",
    "LognormalSpec",
    "sample_lognormal",
    "gen_pde_dataset",
    "gen_basket_put_dataset",
    "save_dataset",
    "load_dataset",
]

_X_STREAM = 50
_LABEL_STREAM = 51
_NOISE_STREAM = 52

LABEL_KINDS = ("single_draw", "mc_price", "noisy_observation")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Paired samples with their provenance."""

    X: np.ndarray
    Y: np.ndarray
    label_kind: str
    seed: int
    M: float
    T: float
    paths: int | None = None
    noise_std: float | None = None

    def __post_init__(self) -> None:
        if self.X.ndim != 2:
            raise ValueError("X must be an n x d matrix")
        if self.Y.shape != (self.X.shape[0],):
            raise ValueError("Y length must match the rows of X")
        if self.label_kind not in LABEL_KINDS:
            raise ValueError(f"unknown label kind {self.label_kind!r}")
        self.X.setflags(write=False)
        self.Y.setflags(write=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True, eq=False)
class LognormalSpec:
    """Martingale lognormal S_T: S0_j * exp(-cov_jj T/2 + (sqrt(cov) W_T)_j)."""

    s0: np.ndarray
    cov: np.ndarray
    T: float = 1.0

    def __post_init__(self) -> None:
        s0 = np.atleast_1d(np.asarray(self.s0, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        object.__setattr__(self, "s0", s0)
        object.__setattr__(self, "cov", cov)
        m = s0.shape[0]
        if cov.shape != (m, m):
            raise ValueError(f"cov shape {cov.shape} does not match {m} assets")
        if (s0 <= 0).any():
            raise ValueError("initial prices must be positive")
        if self.T < 0:
            raise ValueError("T must be nonnegative")

    @property
    def m(self) -> int:
        return self.s0.shape[0]


def sample_lognormal(spec: LognormalSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw (size, m) terminal prices; each component has mean S0_j."""

    drift = -0.5 * np.diag(spec.cov) * spec.T
    if spec.T == 0:
        return np.tile(spec.s0, (size, 1))
    root = sqrt_sigma(spec.cov)
    z = rng.standard_normal((size, spec.m))
    return spec.s0 * np.exp(drift + math.sqrt(spec.T) * (z @ root.T))


def gen_pde_dataset(
    triplet: LevyTriplet,
    payoff: Payoff,
    M: float,
    T: float,
    n: int,
    label_kind: str = "single_draw",
    seed: int = 0,
    paths: int = 1000,
    noise_std: float = 0.0,
) -> Dataset:
    """Inputs uniform on [-M, M]^d, labels per the chosen regime."""

    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if label_kind not in LABEL_KINDS:
        raise ValueError(f"unknown label kind {label_kind!r}")
    if not M > 0:
        raise ValueError("M must be positive")
    d = triplet.d
    X = substream(seed, _X_STREAM).uniform(-M, M, size=(n, d))

    if label_kind == "single_draw":
        incr = simulate_levy_increment(triplet, T, substream(seed, _LABEL_STREAM), size=n)
        Y = payoff_eval(payoff, np.exp(X + incr))
        return Dataset(X=X, Y=np.asarray(Y, dtype=float), label_kind=label_kind, seed=seed, M=M, T=T)

    Y = np.empty(n)
    for i in range(n):
        Y[i], _ = price_mc(triplet, payoff, X[i], T, paths, substream(seed, _LABEL_STREAM, i))
    kwargs = {"paths": paths}
    if label_kind == "noisy_observation":
        if noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        if noise_std > 0:
            Y = Y + substream(seed, _NOISE_STREAM).normal(0.0, noise_std, size=n)
        kwargs["noise_std"] = noise_std
    return Dataset(X=X, Y=Y, label_kind=label_kind, seed=seed, M=M, T=T, **kwargs)


def gen_basket_put_dataset(
    sampler: LognormalSpec,
    weights,
    M: float,
    n: int,
    noise_std: float = 0.0,
    seed: int = 0,
    paths: int = 100,
) -> Dataset:
    """Strikes uniform on [0, M]; labels are MC put prices plus noise.

    Row i's Monte Carlo paths come from the substream (seed, row) so
    rows are independent and the dataset is reproducible regardless of
    generation order.
    """

    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if not M > 0:
        raise ValueError("M must be positive")
    if noise_std < 0:
        raise ValueError("noise_std must be nonnegative")
    if paths < 1:
        raise ValueError("paths must be at least 1")
    w = np.atleast_1d(np.asarray(weights, dtype=float))
    if w.shape != (sampler.m,):
        raise ValueError(f"weights shape {w.shape} does not match {sampler.m} assets")
    if (w < 0).any():
        raise ValueError("basket weights must be nonnegative")

    K = substream(seed, _X_STREAM).uniform(0.0, M, size=n)
    Y = np.empty(n)
    for i in range(n):
        s_t = sample_lognormal(sampler, substream(seed, _LABEL_STREAM, i), paths)
        Y[i] = np.maximum(K[i] - s_t @ w, 0.0).mean()
    if noise_std > 0:
        Y = Y + substream(seed, _NOISE_STREAM).normal(0.0, noise_std, size=n)
    return Dataset(
        X=K[:, None],
        Y=Y,
        label_kind="noisy_observation",
        seed=seed,
        M=M,
        T=sampler.T,
        paths=paths,
        noise_std=noise_std,
    )


def save_dataset(ds: Dataset, path) -> None:
    """Write CSV ``x_1,...,x_d,y`` plus a ``.json`` metadata sidecar."""

    path = Path(path)
    header = ",".join([f"x_{j + 1}" for j in range(ds.d)] + ["y"])
    body = np.column_stack([ds.X, ds.Y])
    np.savetxt(path, body, delimiter=",", header=header, comments="", fmt="%.17g")
    sidecar = {
        "label_kind": ds.label_kind,
        "seed": int(ds.seed),
        "M": ds.M,
        "T": ds.T,
        "n": int(ds.n),
    }
    if ds.paths is not None:
        sidecar["paths"] = int(ds.paths)
    if ds.noise_std is not None:
        sidecar["noise_std"] = ds.noise_std
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar))


def load_dataset(path) -> Dataset:
    path = Path(path)
    body = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    sidecar = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    return Dataset(
        X=body[:, :-1],
        Y=body[:, -1],
        label_kind=sidecar["label_kind"],
        seed=int(sidecar["seed"]),
        M=float(sidecar["M"]),
        T=float(sidecar["T"]),
        paths=sidecar.get("paths"),
        noise_std=sidecar.get("noise_std"),
    )
