"""Training-free output weights from the target's Fourier representation.

For targets of the form H(x) = E[Phi(x + V)] with a compactly supported
payoff Phi (in log coordinates) and a smoothing vector V whose
characteristic function decays like exp(-C |xi|^2), the network weights
can be written down directly: a signed density alpha(xi, u) on
frequency-offset space satisfies

    integral of alpha(xi, u) relu(xi . x + u)  du dxi  =  H(x)

for every x in the box [-M, M]^d, so importance sampling against the
hidden-weight distribution gives output weights

    W_i = f(A_i, B_i) / N,    f = alpha / (pi_w pi_b),

an unbiased N-term estimator of H. No training data is involved, which
makes this an independent check of the 1/sqrt(N) approximation rate.

Everything here works with the transform convention
f_hat(xi) = (2 pi)^{-d/2} integral e^{-i x . xi} f(x) dx.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .levy import Payoff, payoff_log_eval
from .network import (
    HiddenWeights,
    RandomFeatureNet,
    WeightDistributionSpec,
    pi_b,
    pi_w,
    predict,
)

__all__ = [
    "FourierProfile",
    "ReferenceFunction",
    "phi_hat_tent",
    "phi_hat_indicator",
    "phi_hat_table",
    "char_fn_gaussian",
    "gaussian_profile",
    "alpha",
    "oracle_weight_envelope",
    "construct_oracle_weights",
    "reference_convolution",
    "reference_for",
    "sup_error_on_grid",
    "truncate_payoff",
]

# below this the closed-form transforms switch to 4th-order series
_TAYLOR_CUTOFF = 1e-4

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _tent_base(eta: np.ndarray) -> np.ndarray:
    """2 (1 - cos eta) / eta^2 with its removable singularity filled in.

    Evaluated as sinc(eta/2)^2, the cancellation-free equivalent; the
    series branch below the cutoff keeps the limit exact.
    """

    out = np.empty(eta.shape)
    small = np.abs(eta) < _TAYLOR_CUTOFF
    e2 = eta[small] ** 2
    out[small] = 1.0 - e2 / 12.0 + e2 * e2 / 360.0
    big = ~small
    out[big] = np.sinc(eta[big] / (2.0 * np.pi)) ** 2
    return out


def phi_hat_tent(center: float, width: float, xi):
    """Transform of the hat max(1 - |x - center|/width, 0).

    The unit hat at zero transforms to (2 pi)^{-1/2} 2(1 - cos xi)/xi^2;
    shifting multiplies by e^{-i center xi} and scaling by width stretches
    the frequency axis and the amplitude.
    """

    if not width > 0:
        raise ValueError("width must be positive")
    arr = np.asarray(xi, dtype=float)
    vals = width * _INV_SQRT_2PI * np.exp(-1j * center * arr) * _tent_base(width * arr)
    return complex(vals[()]) if arr.ndim == 0 else vals


def phi_hat_indicator(lo: float, hi: float, xi):
    """Transform of the interval indicator 1_{[lo, hi]}."""

    if not hi > lo:
        raise ValueError("indicator needs lo < hi")
    arr = np.asarray(xi, dtype=float)
    flat = np.atleast_1d(arr).astype(float)
    out = np.empty(flat.shape, dtype=complex)
    small = np.abs(flat) < _TAYLOR_CUTOFF
    z = -1j * flat[small]
    # integral of e^{-i x xi} over [lo, hi], expanded to 4th order
    acc = np.zeros(small.sum(), dtype=complex)
    fact = 1.0
    for k in range(5):
        fact *= max(k, 1)
        acc += z**k * (hi ** (k + 1) - lo ** (k + 1)) / ((k + 1) * fact)
    out[small] = acc
    big = ~small
    xb = flat[big]
    # factor out the midpoint phase; the rest is a stable sinc
    mid = 0.5 * (lo + hi)
    width = hi - lo
    out[big] = width * np.exp(-1j * mid * xb) * np.sinc(width * xb / (2.0 * np.pi))
    out *= _INV_SQRT_2PI
    return complex(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def phi_hat_table(xs, ys, xi):
    """Transform of a piecewise-linear payoff by oscillatory quadrature.

    The closed forms above cover hats and boxes; arbitrary tables fall
    back to weighted quadrature of the Fourier integral, one frequency
    at a time.
    """

    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    arr = np.asarray(xi, dtype=float)
    flat = np.atleast_1d(arr)

    def f(x):
        return np.interp(x, xs, ys, left=0.0, right=0.0)

    a, b = xs[0], xs[-1]
    out = np.empty(flat.shape, dtype=complex)
    for k, w in enumerate(flat):
        re, _ = integrate.quad(f, a, b, weight="cos", wvar=w, limit=200)
        im, _ = integrate.quad(f, a, b, weight="sin", wvar=w, limit=200)
        out[k] = _INV_SQRT_2PI * (re - 1j * im)
    return complex(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def _check_psd(cov: np.ndarray) -> np.ndarray:
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.shape[0] != cov.shape[1]:
        raise ValueError("covariance must be square")
    if not np.allclose(cov, cov.T, rtol=1e-12, atol=1e-12):
        raise ValueError("covariance must be symmetric")
    eig = np.linalg.eigvalsh(cov)
    if eig.min() < -1e-12 * max(1.0, abs(eig.max())):
        raise ValueError("covariance must be positive semidefinite")
    return cov


def char_fn_gaussian(cov, xi):
    """E[e^{i xi . V}] for centered Gaussian V: exp(-xi . cov . xi / 2)."""

    cov = _check_psd(cov)
    arr = np.asarray(xi, dtype=float)
    pts = np.atleast_2d(arr)
    if pts.shape[1] != cov.shape[0]:
        raise ValueError(f"xi has dimension {pts.shape[1]}, covariance is {cov.shape[0]}-dim")
    q = np.einsum("ij,jk,ik->i", pts, cov, pts)
    vals = np.exp(-0.5 * q)
    return float(vals[0]) if arr.ndim <= 1 else vals


@dataclass(frozen=True)
class FourierProfile:
    """The target's frequency-domain description.

    ``phi_hat`` and ``char_V`` consume an (n, d) array of frequency rows
    and return n complex values. ``C`` is the declared decay constant:
    |char_V(xi)| <= exp(-C |xi|^2) must hold, and construction spot-checks
    it on a deterministic probe set.
    """

    phi_hat: Callable[[np.ndarray], np.ndarray]
    char_V: Callable[[np.ndarray], np.ndarray]
    M: float
    d: int
    C: float

    def __post_init__(self) -> None:
        if not self.M > 0:
            raise ValueError("M must be positive")
        if self.d < 1:
            raise ValueError("d must be at least 1")
        if not self.C > 0:
            raise ValueError("C must be positive")
        probes = [np.zeros(self.d)]
        for r in (0.5, 1.0, 2.0, 4.0, 8.0):
            probes.extend(r * np.eye(self.d))
            probes.append(np.full(self.d, r / math.sqrt(self.d)))
        pts = np.array(probes)
        vals = np.asarray(self.char_V(pts), dtype=complex)
        if abs(vals[0] - 1.0) > 1e-9:
            raise ValueError("char_V(0) must equal 1")
        bound = np.exp(-self.C * (pts**2).sum(axis=1))
        if (np.abs(vals) > bound * (1.0 + 1e-9) + 1e-300).any():
            raise ValueError(
                "char_V decays slower than exp(-C |xi|^2) for the declared C"
            )

    def G(self, xis: np.ndarray) -> np.ndarray:
        """(2 pi)^{-d/2} phi_hat(xi) char_V(xi), batched over rows."""

        xis = np.atleast_2d(np.asarray(xis, dtype=float))
        scale = (2.0 * math.pi) ** (-0.5 * self.d)
        return scale * np.asarray(self.phi_hat(xis), dtype=complex) * np.asarray(
            self.char_V(xis), dtype=complex
        )


def gaussian_profile(payoff: Payoff, M: float, C: float, cov: float | None = None) -> FourierProfile:
    """One-dimensional profile for a compactly supported payoff and Gaussian V.

    ``cov`` is V's variance; the default 2C meets the decay bound with
    equality. Payoff kinds: tent, indicator (1-d), table.
    """

    if cov is None:
        cov = 2.0 * C
    if payoff.kind == "tent":
        c, w = payoff.params["center"], payoff.params["width"]
        base = lambda xs: phi_hat_tent(c, w, xs)
    elif payoff.kind == "indicator":
        lo, hi = payoff.params["lo"], payoff.params["hi"]
        if lo.shape != (1,):
            raise ValueError("gaussian_profile handles one-dimensional payoffs")
        base = lambda xs: phi_hat_indicator(lo[0], hi[0], xs)
    elif payoff.kind == "table":
        xs_, ys_ = payoff.params["xs"], payoff.params["ys"]
        base = lambda xs: phi_hat_table(xs_, ys_, xs)
    else:
        raise ValueError(f"no closed-form transform for payoff kind {payoff.kind!r}")

    cov_mat = _check_psd([[float(cov)]])
    return FourierProfile(
        phi_hat=lambda rows: base(np.atleast_2d(rows)[:, 0]),
        char_V=lambda rows: char_fn_gaussian(cov_mat, np.atleast_2d(rows)),
        M=float(M),
        d=1,
        C=float(C),
    )


def _alpha_rows(profile: FourierProfile, xis: np.ndarray, us: np.ndarray) -> np.ndarray:
    """alpha at each (frequency row, offset) pair.

    alpha(xi, u) = -1_{(-M |xi|_1, 0]}(u) Re[e^{-iu} G(xi) + e^{iu} G(-xi)]
                   + 1_{[0, 1]}(u) gt(xi) - 1_{[-1, 0]}(u) gt(-xi)

    with gt = 2 Re G - Im G. The first term carries the curvature of the
    target over the box (|xi|_1 is the l1 norm), the other two absorb the
    affine remainder of the relu representation.
    """

    gp = profile.G(xis)
    gm = profile.G(-xis)
    l1 = np.abs(xis).sum(axis=1)
    out = np.zeros(us.shape)

    box = (us > -profile.M * l1) & (us <= 0.0)
    if box.any():
        u = us[box]
        out[box] -= (np.exp(-1j * u) * gp[box] + np.exp(1j * u) * gm[box]).real

    pos = (us >= 0.0) & (us <= 1.0)
    out[pos] += 2.0 * gp[pos].real - gp[pos].imag
    neg = (us >= -1.0) & (us <= 0.0)
    out[neg] -= 2.0 * gm[neg].real - gm[neg].imag
    return out


def alpha(profile: FourierProfile, xi, u: float) -> float:
    """The signed mixing density at one (frequency, offset) pair."""

    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.shape != (profile.d,):
        raise ValueError(f"xi has shape {xi.shape}, expected ({profile.d},)")
    return float(_alpha_rows(profile, xi[None, :], np.array([float(u)]))[0])


def oracle_weight_envelope(
    profile: FourierProfile, spec: WeightDistributionSpec, xis, us
) -> np.ndarray:
    """Pointwise bound on |f| = |alpha| / (pi_w pi_b) at the given rows.

    |alpha(xi, u)| <= (1_{(-M |xi|_1, 0]}(u) + 4 * 1_{[-1, 1]}(u)) (|G(xi)| + |G(-xi)|),
    divided through by the sampling densities.
    """

    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    us = np.atleast_1d(np.asarray(us, dtype=float))
    mag = np.abs(profile.G(xis)) + np.abs(profile.G(-xis))
    l1 = np.abs(xis).sum(axis=1)
    ind = ((us > -profile.M * l1) & (us <= 0.0)).astype(float)
    ind += 4.0 * ((us >= -1.0) & (us <= 1.0))
    return ind * mag / (pi_w(spec, xis) * pi_b(spec, us))


def construct_oracle_weights(hidden: HiddenWeights, profile: FourierProfile) -> np.ndarray:
    """Output weights W_i = f(A_i, B_i)/N, no training data involved.

    Sampling the hidden rows from (pi_w, pi_b) makes the resulting
    N-term network an unbiased estimator of the profile's target on
    [-M, M]^d. Raises if the magnitudes escape their envelope, which
    would mean the profile and the hidden sampling disagree.
    """

    if hidden.d != profile.d:
        raise ValueError(f"hidden weights are {hidden.d}-dim, profile is {profile.d}-dim")
    f = _alpha_rows(profile, hidden.A, hidden.B) / (
        pi_w(hidden.spec, hidden.A) * pi_b(hidden.spec, hidden.B)
    )
    env = oracle_weight_envelope(profile, hidden.spec, hidden.A, hidden.B)
    if (np.abs(f) > env * (1.0 + 1e-9) + 1e-300).any():
        raise ArithmeticError("sampled weight escaped its envelope; inconsistent profile")
    return f / hidden.N


# ---------------------------------------------------------------------------
# reference targets


def _log_support(payoff: Payoff) -> tuple[np.ndarray, np.ndarray]:
    """Bounding box of the payoff's support in log coordinates."""

    if payoff.kind == "tent":
        c, w = payoff.params["center"], payoff.params["width"]
        return np.array([c - w]), np.array([c + w])
    if payoff.kind == "indicator":
        return payoff.params["lo"], payoff.params["hi"]
    if payoff.kind == "table":
        xs = payoff.params["xs"]
        return np.array([xs[0]]), np.array([xs[-1]])
    if payoff.kind == "truncated":
        bound = payoff.params["bound"]
        inner = payoff.params["inner"]
        try:
            lo, hi = _log_support(inner)
        except ValueError:
            d = 1 if inner.kind in ("tent", "table") else None
            if d is None:
                d = inner.params.get("d") or inner.params["weights"].shape[0]
            lo, hi = np.full(d, -bound), np.full(d, bound)
        return np.maximum(lo, -bound), np.minimum(hi, bound)
    raise ValueError(f"payoff kind {payoff.kind!r} has unbounded log-support")


def _kinks_1d(payoff: Payoff) -> list[float]:
    if payoff.kind == "tent":
        c, w = payoff.params["center"], payoff.params["width"]
        return [c - w, c, c + w]
    if payoff.kind == "indicator":
        return [payoff.params["lo"][0], payoff.params["hi"][0]]
    if payoff.kind == "table":
        return list(payoff.params["xs"])
    if payoff.kind == "truncated":
        b = payoff.params["bound"]
        return sorted(set(_kinks_1d(payoff.params["inner"]) + [-b, b]))
    return []


def reference_convolution(payoff: Payoff, cov, x) -> float:
    """H(x) = E[Phi(x + V)] for Gaussian V by adaptive quadrature, d <= 2.

    A zero covariance degenerates to Phi(x) itself.
    """

    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = x.shape[0]
    if d > 2:
        raise ValueError("reference convolution is certified for d <= 2 only")
    cov = _check_psd(cov)
    if cov.shape[0] != d:
        raise ValueError(f"covariance is {cov.shape[0]}-dim, x is {d}-dim")
    if not cov.any():
        return float(payoff_log_eval(payoff, x))
    lo, hi = _log_support(payoff)

    if d == 1:
        sd = math.sqrt(cov[0, 0])

        def f(v):
            return payoff_log_eval(payoff, np.array([x[0] + v])) * (
                _INV_SQRT_2PI / sd * math.exp(-0.5 * (v / sd) ** 2)
            )

        a, b = lo[0] - x[0], hi[0] - x[0]
        pts = sorted({min(max(k - x[0], a), b) for k in _kinks_1d(payoff)})
        val, _ = integrate.quad(f, a, b, points=pts, limit=200, epsabs=1e-12, epsrel=1e-10)
        return float(val)

    det = np.linalg.det(cov)
    if det <= 0:
        raise ValueError("two-dimensional reference needs a nonsingular covariance")
    inv = np.linalg.inv(cov)
    norm = 1.0 / (2.0 * math.pi * math.sqrt(det))

    def f2(v2, v1):
        v = np.array([v1, v2])
        return payoff_log_eval(payoff, x + v) * norm * math.exp(-0.5 * v @ inv @ v)

    val, _ = integrate.dblquad(
        f2, lo[0] - x[0], hi[0] - x[0],
        lambda _: lo[1] - x[1], lambda _: hi[1] - x[1],
        epsabs=1e-9, epsrel=1e-8,
    )
    return float(val)


@dataclass(frozen=True)
class ReferenceFunction:
    """Pointwise-evaluable target H with its construction recorded."""

    evaluator: Callable[[np.ndarray], float]
    d: int
    payoff: Payoff | None = None
    cov: np.ndarray | None = None

    def __call__(self, x) -> float:
        return float(self.evaluator(x))


def reference_for(payoff: Payoff, cov) -> ReferenceFunction:
    """Reference H(x) = E[Phi(x + V)] built from convolution quadrature."""

    cov = _check_psd(cov)
    return ReferenceFunction(
        evaluator=lambda x: reference_convolution(payoff, cov, x),
        d=cov.shape[0],
        payoff=payoff,
        cov=cov,
    )


def sup_error_on_grid(
    net: RandomFeatureNet,
    reference,
    M: float,
    grid_points_per_axis: int,
    reference_values: np.ndarray | None = None,
) -> float:
    """Max |net - reference| over a regular grid on [-M, M]^d, d <= 2.

    A grid maximum is a lower bound on the true sup. ``reference_values``
    short-circuits the (possibly expensive) reference evaluation when the
    caller has them cached; they must match the grid layout produced here
    (last axis fastest).
    """

    d = net.hidden.d
    if d > 2:
        raise ValueError("grid sup-error is certified for d <= 2 only")
    if grid_points_per_axis < 2:
        raise ValueError("need at least 2 grid points per axis")
    axis = np.linspace(-M, M, grid_points_per_axis)
    if d == 1:
        pts = axis[:, None]
    else:
        g1, g2 = np.meshgrid(axis, axis, indexing="ij")
        pts = np.column_stack([g1.ravel(), g2.ravel()])
    if reference_values is None:
        fn = reference.evaluator if isinstance(reference, ReferenceFunction) else reference
        ref = np.array([fn(p) for p in pts])
    else:
        ref = np.asarray(reference_values, dtype=float).ravel()
        if ref.shape[0] != pts.shape[0]:
            raise ValueError("reference_values does not match the grid size")
    return float(np.abs(predict(net, pts) - ref).max())


def truncate_payoff(phi: Payoff, M: float, R: float) -> Payoff:
    """Cut the log-coordinate payoff to zero outside the ball of radius M + R.

    Inside that ball the payoff is untouched, so targets probed on
    [-M, M]^d never see the cut; it only tames the tails.
    """

    if not R > 0:
        raise ValueError("R must be positive")
    if not M > 0:
        raise ValueError("M must be positive")
    return Payoff(kind="truncated", params={"inner": phi, "bound": float(M + R)})
