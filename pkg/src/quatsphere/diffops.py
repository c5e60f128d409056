"""Finite-difference realizations of the sphere's invariant operators.

T_i, T_j, T_k differentiate along the one-parameter flows x -> exp(-axis*t)x;
the sublaplacian is -(T_i^2 + T_j^2 + T_k^2) and the Laplace-Beltrami
operator is realized as minus the sum of second derivatives along geodesics
in an orthonormal tangent frame.  Both operators then have non-negative
spectra: h(h + 4n - 2) and (h - 2m)(h - 2m + 2) on the joint eigenspaces.

Functions passed to the operators must be vectorized: they map an array of
points of shape (..., 4n) to values of shape (...).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .quat_core import AXES, Array, SpherePoint, flow_points, geodesic_points, sphere_samples, tangent_frame
from .zonal_kernel import CalibratedKernel

PointFunction = Callable[[Array], Array]

_TAG_EIGEN = 21


class DegenerateProbesError(RuntimeError):
    """Raised when every candidate probe sits too close to a zero of f."""


@dataclass(frozen=True)
class FDConfig:
    step: float = 1e-2
    richardson: bool = True

    def __post_init__(self):
        if not 1e-4 <= self.step <= 1e-1:
            raise ValueError(f"step must lie in [1e-4, 1e-1], got {self.step}")


def _steps(cfg: FDConfig) -> list[float]:
    return [cfg.step, cfg.step / 2.0] if cfg.richardson else [cfg.step]


def _extrapolate(coarse: float, fine: float, cfg: FDConfig) -> float:
    # one Richardson level for an O(tau^2) central difference
    return (4.0 * fine - coarse) / 3.0 if cfg.richardson else coarse


def t_axis(f: PointFunction, x: SpherePoint, axis: str, cfg: FDConfig = FDConfig()) -> float:
    """Derivative of f along the flow t -> exp(-axis*t)x at t = 0."""
    estimates = []
    for tau in _steps(cfg):
        fwd = float(f(flow_points(x.vec[None, :], axis, tau))[0])
        bwd = float(f(flow_points(x.vec[None, :], axis, -tau))[0])
        estimates.append((fwd - bwd) / (2.0 * tau))
    return _extrapolate(estimates[0], estimates[-1], cfg)


def _second_along_flow(f: PointFunction, x_vec: Array, axis: str, tau: float) -> float:
    pts = np.stack(
        [
            flow_points(x_vec, axis, tau),
            x_vec,
            flow_points(x_vec, axis, -tau),
        ]
    )
    v = f(pts)
    return (float(v[0]) - 2.0 * float(v[1]) + float(v[2])) / (tau * tau)


def gamma_apply(f: PointFunction, x: SpherePoint, cfg: FDConfig = FDConfig()) -> float:
    """Sublaplacian -(T_i^2 + T_j^2 + T_k^2) applied to f at x."""
    total = 0.0
    for axis in AXES:
        estimates = [_second_along_flow(f, x.vec, axis, tau) for tau in _steps(cfg)]
        total += _extrapolate(estimates[0], estimates[-1], cfg)
    return -total


def laplace_beltrami_apply(f: PointFunction, y: SpherePoint, cfg: FDConfig = FDConfig()) -> float:
    """Laplace-Beltrami operator (positive spectrum convention) at y.

    Sums second central differences of t -> f(cos(t) y + sin(t) e) over an
    orthonormal tangent frame {e} and negates, so eigenfunctions of degree h
    return +h(h + 4n - 2) times themselves.
    """
    frame = tangent_frame(y)
    taus = _steps(cfg)
    # batch all stencil points into a single evaluation of f
    stencil = []
    for e in frame:
        for tau in taus:
            stencil.append(geodesic_points(y.vec, e, np.array([tau, -tau])))
    pts = np.concatenate(stencil, axis=0)
    vals = f(pts)
    f0 = float(f(y.vec[None, :])[0])

    total = 0.0
    per_dir = 2 * len(taus)
    for d in range(len(frame)):
        base = d * per_dir
        estimates = []
        for si, tau in enumerate(taus):
            fwd = float(vals[base + 2 * si])
            bwd = float(vals[base + 2 * si + 1])
            estimates.append((fwd - 2.0 * f0 + bwd) / (tau * tau))
        total += _extrapolate(estimates[0], estimates[-1], cfg)
    return -total


@dataclass(frozen=True)
class EigencheckReport:
    h: int
    m: int
    n: int
    lambda_delta_est: float
    lambda_gamma_est: float
    lambda_delta_true: float
    lambda_gamma_true: float
    rel_err_delta: float
    rel_err_gamma: float
    probes_used: int

    def to_json_dict(self) -> dict:
        return {
            "index": {"h": self.h, "m": self.m, "n": self.n},
            "lambda_delta_est": self.lambda_delta_est,
            "lambda_gamma_est": self.lambda_gamma_est,
            "rel_err_delta": self.rel_err_delta,
            "rel_err_gamma": self.rel_err_gamma,
        }


def _error(est: float, true: float) -> float:
    # relative error where the target is nonzero, absolute at zero eigenvalues
    return abs(est - true) / abs(true) if true != 0.0 else abs(est)


def eigencheck(
    ck: CalibratedKernel,
    x0: SpherePoint,
    probes: int = 8,
    cfg: FDConfig = FDConfig(),
    seed: int = 0,
    pool_size: int = 128,
) -> EigencheckReport:
    """Estimate both eigenvalues on the kernel section y -> K(x0, y).

    Probes are uniform points filtered to |f| > 0.1 max|f| (ratio estimates
    blow up near zeros of f); the median across probes is reported.
    """
    idx = ck.index
    f = ck.section(x0)
    pool = sphere_samples(idx.n, pool_size, [seed, idx.h, idx.m, _TAG_EIGEN])
    fvals = f(pool)
    cutoff = 0.1 * float(np.max(np.abs(fvals)))
    eligible = np.flatnonzero(np.abs(fvals) > cutoff)
    if eligible.size == 0:
        raise DegenerateProbesError(f"no probe with |f| above 0.1*max for {idx}")
    chosen = eligible[:probes]

    delta_est, gamma_est = [], []
    for i in chosen:
        x = SpherePoint(pool[i])
        fx = float(fvals[i])
        delta_est.append(laplace_beltrami_apply(f, x, cfg) / fx)
        gamma_est.append(gamma_apply(f, x, cfg) / fx)

    lam_d = float(np.median(delta_est))
    lam_g = float(np.median(gamma_est))
    return EigencheckReport(
        h=idx.h,
        m=idx.m,
        n=idx.n,
        lambda_delta_est=lam_d,
        lambda_gamma_est=lam_g,
        lambda_delta_true=idx.lambda_delta,
        lambda_gamma_true=idx.lambda_gamma,
        rel_err_delta=_error(lam_d, idx.lambda_delta),
        rel_err_gamma=_error(lam_g, idx.lambda_gamma),
        probes_used=len(chosen),
    )


def l1_l2_identity(h: int, m: int, n: int) -> tuple[float, float]:
    """Eigenvalues of sqrt(Delta + (2n-1)^2 Id) - (2n-1) Id and sqrt(Id + Gamma) - Id.

    Both radicands are perfect squares, (h + 2n - 1)^2 and (h - 2m + 1)^2,
    so the returned pair equals (h, h - 2m) exactly.
    """
    if not 2 * m <= h:
        raise ValueError("need 2m <= h")
    lam_delta = h * (h + 4 * n - 2)
    lam_gamma = (h - 2 * m) * (h - 2 * m + 2)
    first = math.sqrt(lam_delta + (2 * n - 1) ** 2) - (2 * n - 1)
    second = math.sqrt(1.0 + lam_gamma) - 1.0
    return first, second
