"""Exponential Levy model machinery.

A d-dimensional Levy process is described here by its characteristic
triplet: diffusion covariance ``sigma``, drift ``gamma``, and a finite
atomic compound-Poisson jump measure with atoms inside a ball of radius
R.  The module provides the Levy symbol eta (the exponent in
E[exp(i xi . L_T)] = exp(T eta(xi))), the non-degeneracy check on
sigma, exact path-increment simulation, payoff evaluation, Monte Carlo
pricing of u(T, s) = E[phi(s exp(L_T))], and the closed-form
Black-Scholes call/put used as a reference curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .rng import substream

__all__ = [
    "CompoundPoissonSpec",
    "LevyTriplet",
    "NondegeneracyReport",
    "Payoff",
    "max_call",
    "basket_put",
    "tent",
    "indicator",
    "table",
    "payoff_eval",
    "payoff_log_eval",
    "payoff_to_dict",
    "payoff_from_dict",
    "equal_correlation_sigma",
    "risk_neutral_gamma",
    "levy_symbol",
    "verify_nondegeneracy",
    "sqrt_sigma",
    "simulate_levy_increment",
    "price_mc",
    "bs_call_price",
    "bs_put_price",
]

_PRICE_STREAM = 40
_CHUNK = 1 << 17

# strong-form horizon threshold: C*T must exceed 1/(2^{3/2} pi)
STRONG_FORM_THRESHOLD = 1.0 / (2.0 ** 1.5 * math.pi)


@dataclass(frozen=True, eq=False)
class CompoundPoissonSpec:
    """Finite atomic jump measure: intensity * sum_k p_k * delta_{y_k}.

    :param intensity: jump arrival rate per unit time (lambda_J >= 0)
    :param atoms: sequence of (probability, jump vector) pairs; the
        probabilities must sum to 1 and every jump must satisfy
        ``norm(y) <= radius``
    :param radius: declared support radius R > 1
    """

    intensity: float
    atoms: tuple
    radius: float

    def __post_init__(self) -> None:
        if not self.intensity >= 0.0:
            raise ValueError(f"intensity must be nonnegative, got {self.intensity}")
        if not self.radius > 1.0:
            raise ValueError(f"jump support radius must exceed 1, got {self.radius}")
        if len(self.atoms) == 0:
            raise ValueError("compound Poisson spec needs at least one atom")
        probs = np.array([p for p, _ in self.atoms], dtype=float)
        if (probs < 0).any() or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("atom probabilities must be nonnegative and sum to 1")
        dims = {np.atleast_1d(np.asarray(y, dtype=float)).shape for _, y in self.atoms}
        if len(dims) != 1:
            raise ValueError("all jump atoms must share one dimension")
        for _, y in self.atoms:
            if np.linalg.norm(np.atleast_1d(y)) > self.radius + 1e-12:
                raise ValueError("jump atom outside the declared radius")

    @property
    def d(self) -> int:
        return np.atleast_1d(np.asarray(self.atoms[0][1])).shape[0]

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Atom probabilities (k,) and jump vectors (k, d)."""

        probs = np.array([p for p, _ in self.atoms], dtype=float)
        ys = np.array([np.atleast_1d(np.asarray(y, dtype=float)) for _, y in self.atoms])
        return probs, ys


@dataclass(frozen=True, eq=False)
class LevyTriplet:
    """Characteristic triplet (sigma, gamma, jumps)."""

    sigma: np.ndarray
    gamma: np.ndarray
    jumps: CompoundPoissonSpec | None = None

    def __post_init__(self) -> None:
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "gamma", gamma)
        d = gamma.shape[0]
        if sigma.shape != (d, d):
            raise ValueError(f"sigma shape {sigma.shape} does not match drift dimension {d}")
        scale = np.linalg.norm(sigma)
        if scale > 0 and np.linalg.norm(sigma - sigma.T) > 1e-12 * scale:
            raise ValueError("sigma must be symmetric")
        eigs = np.linalg.eigvalsh(0.5 * (sigma + sigma.T))
        if eigs.min() < -1e-12 * max(scale, 1.0):
            raise ValueError("sigma must be positive semidefinite")
        if self.jumps is not None and self.jumps.d != d:
            raise ValueError(f"jump dimension {self.jumps.d} does not match d={d}")
        self.sigma.setflags(write=False)
        self.gamma.setflags(write=False)

    @property
    def d(self) -> int:
        return self.gamma.shape[0]


def equal_correlation_sigma(sigma: float, rho: float, d: int) -> np.ndarray:
    """Covariance with sigma^2 on the diagonal and sigma^2*rho off it."""

    rho_min = -1.0 / (d - 1) if d > 1 else -1.0
    if not rho_min <= rho <= 1.0:
        raise ValueError(f"rho={rho} gives an indefinite matrix for d={d}")
    out = np.full((d, d), sigma * sigma * rho)
    np.fill_diagonal(out, sigma * sigma)
    return out


def risk_neutral_gamma(sigma: np.ndarray, jumps: CompoundPoissonSpec | None = None) -> np.ndarray:
    """Drift making every exp(L_{t,i}) a martingale.

    Solves gamma_i + sigma_ii/2 + intensity * sum_k p_k
    (exp(y_{k,i}) - 1 - y_{k,i} 1{norm(y_k) <= 1}) = 0 componentwise.
    """

    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    gamma = -0.5 * np.diag(sigma).copy()
    if jumps is not None:
        probs, ys = jumps.arrays()
        small = np.linalg.norm(ys, axis=1) <= 1.0
        term = np.expm1(ys) - ys * small[:, None]
        gamma -= jumps.intensity * probs @ term
    return gamma


def levy_symbol(triplet: LevyTriplet, xi) -> complex:
    """Levy-Khintchine exponent eta(xi).

    eta(xi) = i xi.gamma - xi.sigma xi / 2
              + intensity * sum_k p_k (e^{i xi.y_k} - 1 - i xi.y_k 1{norm(y_k)<=1})
    """

    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.shape != (triplet.d,):
        raise ValueError(f"xi has shape {xi.shape}, expected ({triplet.d},)")
    val = 1j * (xi @ triplet.gamma) - 0.5 * (xi @ triplet.sigma @ xi)
    if triplet.jumps is not None:
        probs, ys = triplet.jumps.arrays()
        small = np.linalg.norm(ys, axis=1) <= 1.0
        phase = ys @ xi
        val += triplet.jumps.intensity * np.sum(
            probs * (np.exp(1j * phase) - 1.0 - 1j * phase * small)
        )
    return complex(val)


@dataclass(frozen=True)
class NondegeneracyReport:
    """Result of the ellipticity check on sigma.

    ``holds`` is the headline answer (lambda_min(sigma)/2 >= C up to a
    1e-12 slack); ``strong_form`` additionally records whether
    C*T > 1/(2^{3/2} pi) when a horizon was supplied.  The report is
    truthy exactly when ``holds``.
    """

    holds: bool
    lambda_min: float
    C: float
    strong_form: bool | None = None

    def __bool__(self) -> bool:
        return self.holds


def verify_nondegeneracy(triplet: LevyTriplet, C: float, T: float | None = None) -> NondegeneracyReport:
    """Check xi.sigma xi / 2 >= C |xi|^2, i.e. lambda_min(sigma)/2 >= C."""

    if not C > 0.0:
        raise ValueError(f"C must be positive, got {C}")
    lam_min = float(np.linalg.eigvalsh(triplet.sigma).min())
    holds = 0.5 * lam_min >= C - 1e-12
    strong = None if T is None else bool(C * T > STRONG_FORM_THRESHOLD)
    return NondegeneracyReport(holds=holds, lambda_min=lam_min, C=C, strong_form=strong)


def sqrt_sigma(sigma: np.ndarray) -> np.ndarray:
    """Matrix S with S S^T = sigma.

    Cholesky when sigma is definite; otherwise a symmetric-eigendecomposition
    square root with eigenvalues below 1e-10 * trace/d clipped to zero.
    """

    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(0.5 * (sigma + sigma.T))
        tol = 1e-10 * np.trace(sigma) / sigma.shape[0]
        vals = np.where(vals > tol, vals, 0.0)
        return vecs * np.sqrt(vals)


def _as_rng(rng_or_seed) -> np.random.Generator:
    if isinstance(rng_or_seed, np.random.Generator):
        return rng_or_seed
    return substream(int(rng_or_seed), _PRICE_STREAM)


def simulate_levy_increment(triplet: LevyTriplet, T: float, rng, size: int | None = None):
    """Draw L_T (one d-vector, or a (size, d) block when size is given).

    Exact simulation via the Levy-Ito decomposition: Gaussian part
    gamma*T + sqrt(sigma) sqrt(T) Z, plus the compound-Poisson jump sum,
    minus the small-jump compensator T * intensity * sum_k p_k y_k
    1{norm(y_k) <= 1} that the symbol's centering term prescribes.
    """

    if T < 0:
        raise ValueError(f"T must be nonnegative, got {T}")
    rng = _as_rng(rng)
    n = 1 if size is None else int(size)
    d = triplet.d
    if T == 0:
        out = np.zeros((n, d))
        return out[0] if size is None else out

    s = sqrt_sigma(triplet.sigma)
    z = rng.standard_normal((n, d))
    out = triplet.gamma * T + math.sqrt(T) * (z @ s.T)

    if triplet.jumps is not None and triplet.jumps.intensity > 0:
        probs, ys = triplet.jumps.arrays()
        counts = rng.poisson(triplet.jumps.intensity * T, size=n)
        total = int(counts.sum())
        if total:
            idx = rng.choice(len(probs), size=total, p=probs)
            rows = np.repeat(np.arange(n), counts)
            for j in range(d):
                out[:, j] += np.bincount(rows, weights=ys[idx, j], minlength=n)
        small = np.linalg.norm(ys, axis=1) <= 1.0
        out -= T * triplet.jumps.intensity * ((probs * small) @ ys)

    return out[0] if size is None else out


# ---------------------------------------------------------------------------
# payoffs


@dataclass(frozen=True, eq=False)
class Payoff:
    """A payoff identified by kind plus its parameters.

    Asset-space kinds (max_call, basket_put) are evaluated at price
    vectors s in [0, inf)^d; log-space kinds (tent, indicator, table,
    truncated) are defined at x = log(s) and evaluated there directly.
    """

    kind: str
    params: dict


def max_call(strike: float, d: int = 1) -> Payoff:
    """phi(s) = max(max_i s_i - K, 0)."""

    if strike < 0:
        raise ValueError("strike must be nonnegative")
    return Payoff(kind="max_call", params={"strike": float(strike), "d": int(d)})


def basket_put(strike: float, weights) -> Payoff:
    """phi(s) = max(K - w . s, 0) with fixed strike and weights."""

    w = np.atleast_1d(np.asarray(weights, dtype=float))
    if (w < 0).any():
        raise ValueError("basket weights must be nonnegative")
    return Payoff(kind="basket_put", params={"strike": float(strike), "weights": w})


def tent(center: float = 0.0, width: float = 1.0) -> Payoff:
    """One-dimensional hat in log-coordinates: max(1 - |x - c|/width, 0)."""

    if not width > 0:
        raise ValueError("tent width must be positive")
    return Payoff(kind="tent", params={"center": float(center), "width": float(width)})


def indicator(lo, hi) -> Payoff:
    """Indicator of the log-coordinate box [lo, hi] (componentwise)."""

    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if lo.shape != hi.shape or (lo >= hi).any():
        raise ValueError("indicator box needs lo < hi componentwise")
    return Payoff(kind="indicator", params={"lo": lo, "hi": hi})


def table(xs, ys) -> Payoff:
    """Piecewise-linear log-coordinate payoff, zero outside the grid."""

    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.ndim != 1 or xs.shape != ys.shape or xs.shape[0] < 2:
        raise ValueError("table needs matching 1-d grids with at least 2 nodes")
    if (np.diff(xs) <= 0).any():
        raise ValueError("table grid must be strictly increasing")
    return Payoff(kind="table", params={"xs": xs, "ys": ys})


def _payoff_d(payoff: Payoff) -> int | None:
    if payoff.kind == "max_call":
        return payoff.params["d"]
    if payoff.kind == "basket_put":
        return payoff.params["weights"].shape[0]
    if payoff.kind in ("tent", "table"):
        return 1
    if payoff.kind == "indicator":
        return payoff.params["lo"].shape[0]
    if payoff.kind == "truncated":
        return _payoff_d(payoff.params["inner"])
    raise ValueError(f"unknown payoff kind {payoff.kind!r}")


def payoff_log_eval(payoff: Payoff, x) -> np.ndarray | float:
    """Payoff at log-coordinates x (one point or rows of points)."""

    arr = np.atleast_1d(np.asarray(x, dtype=float))
    single = arr.ndim == 1
    pts = arr[None, :] if single else arr
    d = _payoff_d(payoff)
    if d is not None and pts.shape[1] != d:
        raise ValueError(f"x has dimension {pts.shape[1]}, payoff expects {d}")

    if payoff.kind == "tent":
        c, w = payoff.params["center"], payoff.params["width"]
        vals = np.maximum(1.0 - np.abs(pts[:, 0] - c) / w, 0.0)
    elif payoff.kind == "indicator":
        lo, hi = payoff.params["lo"], payoff.params["hi"]
        vals = np.all((pts >= lo) & (pts <= hi), axis=1).astype(float)
    elif payoff.kind == "table":
        vals = np.interp(pts[:, 0], payoff.params["xs"], payoff.params["ys"], left=0.0, right=0.0)
    elif payoff.kind == "truncated":
        inner = payoff_log_eval(payoff.params["inner"], pts)
        vals = np.where(np.linalg.norm(pts, axis=1) <= payoff.params["bound"], inner, 0.0)
    else:
        vals = payoff_eval(payoff, np.exp(pts))
    return float(vals[0]) if single else vals


def payoff_eval(payoff: Payoff, s) -> np.ndarray | float:
    """Payoff at asset values s (one point or rows of points)."""

    arr = np.atleast_1d(np.asarray(s, dtype=float))
    single = arr.ndim == 1
    pts = arr[None, :] if single else arr
    d = _payoff_d(payoff)
    if d is not None and pts.shape[1] != d:
        raise ValueError(f"s has dimension {pts.shape[1]}, payoff expects {d}")

    if payoff.kind == "max_call":
        if (pts < 0).any() or not np.isfinite(pts).all():
            raise ValueError("asset values must be finite and nonnegative")
        vals = np.maximum(pts.max(axis=1) - payoff.params["strike"], 0.0)
    elif payoff.kind == "basket_put":
        if (pts < 0).any() or not np.isfinite(pts).all():
            raise ValueError("asset values must be finite and nonnegative")
        vals = np.maximum(payoff.params["strike"] - pts @ payoff.params["weights"], 0.0)
    else:
        if (pts <= 0).any():
            raise ValueError("log-space payoffs need strictly positive asset values")
        return payoff_log_eval(payoff, np.log(arr))
    return float(vals[0]) if single else vals


def payoff_to_dict(payoff: Payoff) -> dict:
    params = {}
    for key, val in payoff.params.items():
        if isinstance(val, Payoff):
            params[key] = payoff_to_dict(val)
        elif isinstance(val, np.ndarray):
            params[key] = val.tolist()
        else:
            params[key] = val
    return {"kind": payoff.kind, "params": params}


def payoff_from_dict(doc: dict) -> Payoff:
    kind = doc["kind"]
    p = doc["params"]
    if kind == "max_call":
        return max_call(p["strike"], p.get("d", 1))
    if kind == "basket_put":
        return basket_put(p["strike"], p["weights"])
    if kind == "tent":
        return tent(p["center"], p["width"])
    if kind == "indicator":
        return indicator(p["lo"], p["hi"])
    if kind == "table":
        return table(p["xs"], p["ys"])
    if kind == "truncated":
        return Payoff(
            kind="truncated",
            params={"inner": payoff_from_dict(p["inner"]), "bound": float(p["bound"])},
        )
    raise ValueError(f"unknown payoff kind {kind!r}")


# ---------------------------------------------------------------------------
# pricing


def price_mc(triplet: LevyTriplet, payoff: Payoff, x, T: float, paths: int, rng) -> tuple[float, float]:
    """Monte Carlo estimate of u(T, exp(x)) = E[phi(exp(x + L_T))].

    Returns (mean, standard error); the standard error is the sample
    standard deviation over paths divided by sqrt(paths).  ``rng`` is a
    numpy Generator or an integer seed.
    """

    if paths < 1:
        raise ValueError(f"paths must be at least 1, got {paths}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (triplet.d,):
        raise ValueError(f"x has shape {x.shape}, expected ({triplet.d},)")
    if T == 0:
        return float(payoff_eval(payoff, np.exp(x))), 0.0

    rng = _as_rng(rng)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < paths:
        block = min(_CHUNK, paths - done)
        incr = simulate_levy_increment(triplet, T, rng, size=block)
        vals = payoff_eval(payoff, np.exp(x + incr))
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
        done += block
    mean = total / paths
    if paths == 1:
        return mean, math.inf
    var = max(total_sq - paths * mean * mean, 0.0) / (paths - 1)
    return mean, math.sqrt(var / paths)


def bs_call_price(spot, strike, sigma: float, T: float):
    """Black-Scholes call at zero rate: spot*N(d1) - strike*N(d2)."""

    spot = np.asarray(spot, dtype=float)
    strike = np.asarray(strike, dtype=float)
    sig = sigma * math.sqrt(T)
    if sig == 0:
        return np.maximum(spot - strike, 0.0)[()]
    with np.errstate(divide="ignore"):
        d1 = np.where(strike > 0, (np.log(np.maximum(spot, 1e-300) / np.where(strike > 0, strike, 1.0)) + 0.5 * sig * sig) / sig, np.inf)
    val = spot * ndtr(d1) - strike * ndtr(d1 - sig)
    return np.where(strike > 0, np.where(spot > 0, val, 0.0), spot)[()]


def bs_put_price(spot, strike, sigma: float, T: float):
    """Black-Scholes put at zero rate, via parity with the call."""

    spot = np.asarray(spot, dtype=float)
    strike = np.asarray(strike, dtype=float)
    return (bs_call_price(spot, strike, sigma, T) - spot + strike)[()]
