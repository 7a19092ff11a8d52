"""Quotient intensity losses: values, gradients, curvatures, polar derivatives.

All four loss variants share the structure ``f(u) = (1/m) sum_k r_k^2 / D_k``
with residual ``r_k = |a_k . u|^2 - y_k`` and denominators

* ``qim1``:      ``D_k = y_k``
* ``qim2``:      ``D_k = beta ||u||^2 + y_k``
* ``qim3``:      ``D_k = ||u||^2 + beta1 |a_k . u|^2 + beta2 y_k``
* ``intensity``: ``D_k = 1`` (plain intensity least squares, the baseline)

Conventions
-----------
* Scalar reductions over measurements accumulate left-to-right in index
  order by default (bit-reproducible); ``reduction="pairwise"`` opts into
  numpy's pairwise summation, which agrees to ~1e-12 relative.  Matrix
  products delegate to BLAS, which is deterministic within one build.
* On the complex field, :func:`gradient` returns the Wirtinger gradient in
  the d/d(u conjugate) convention.  Descent code that wants one convention
  across both fields should use :func:`descent_direction`, which is the
  Wirtinger direction everywhere (half the Euclidean gradient on reals).
  Finite-difference checks of the complex case therefore compare the
  real-isomorphic embedding gradient against ``2 * gradient``.
* ``qim1`` guards against near-zero denominators: measurements with
  ``y_k < guard_rel * mean(y)`` raise :class:`SingularDenominator` unless
  the model's ``qim1_drop_singular`` flag is set, in which case they are
  excluded and the loss averages over the kept measurements.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, DomainError, SingularDenominator
from .measurements import IntensityData, SensingEnsemble, adjoint_map, forward_map

VARIANTS = ("qim1", "qim2", "qim3", "intensity")


@dataclass(frozen=True)
class QimModel:
    """Loss variant plus its parameters (all strictly positive)."""

    variant: str
    beta: float = 1.0
    beta1: float = 0.1
    beta2: float = 1.0
    qim1_drop_singular: bool = False
    guard_rel: float = 1e-12

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}, expected one of {VARIANTS}")
        if self.variant == "qim2" and not self.beta > 0:
            raise DomainError("qim2 requires beta > 0")
        if self.variant == "qim3" and not (self.beta1 > 0 and self.beta2 > 0):
            raise DomainError("qim3 requires beta1 > 0 and beta2 > 0")

    @classmethod
    def qim1(cls, drop_singular: bool = False) -> "QimModel":
        return cls("qim1", qim1_drop_singular=drop_singular)

    @classmethod
    def qim2(cls, beta: float = 1.0) -> "QimModel":
        return cls("qim2", beta=beta)

    @classmethod
    def qim3(cls, beta1: float = 0.1, beta2: float = 1.0) -> "QimModel":
        return cls("qim3", beta1=beta1, beta2=beta2)

    @classmethod
    def intensity(cls) -> "QimModel":
        return cls("intensity")

    def label(self) -> str:
        if self.variant == "qim2":
            return f"qim2(beta={self.beta})"
        if self.variant == "qim3":
            return f"qim3(beta1={self.beta1},beta2={self.beta2})"
        return self.variant


@dataclass(frozen=True)
class LossEval:
    value: float
    gradient: Optional[np.ndarray] = None
    singular_hits: int = 0


@dataclass(frozen=True)
class PolarPoint:
    """Point ``u = sqrt(R) (x_dir cos(theta) + e_perp sin(theta))``.

    ``x_dir`` is the normalized ground-truth direction; ``e_perp`` is a unit
    vector orthogonal to it.  The identities quoted for ``R = 1`` (for
    example the exact radial stationarity at ``theta = 0``) assume a
    unit-norm ground truth, so that ``R = 1, theta = 0`` is the minimizer.
    """

    R: float
    theta: float
    e_perp: np.ndarray = dc_field(repr=False)
    x_dir: np.ndarray = dc_field(repr=False)


def polar_point(R: float, theta: float, e_perp: np.ndarray, x: np.ndarray) -> PolarPoint:
    """Validated :class:`PolarPoint` constructor."""
    if not R > 0:
        raise DomainError(f"R must be positive, got {R}")
    if not 0.0 <= theta <= np.pi:
        raise DomainError(f"theta must lie in [0, pi], got {theta}")
    x = np.asarray(x, dtype=float)
    e_perp = np.asarray(e_perp, dtype=float)
    if x.shape != e_perp.shape:
        raise DimensionMismatch("e_perp and x must have the same shape")
    x_dir = x / np.linalg.norm(x)
    if abs(np.linalg.norm(e_perp) - 1.0) > 1e-12:
        raise DomainError("e_perp must be a unit vector")
    if abs(float(e_perp @ x_dir)) > 1e-12:
        raise DomainError("e_perp must be orthogonal to the truth direction")
    return PolarPoint(float(R), float(theta), e_perp, x_dir)


def perp_direction(x: np.ndarray, g: np.random.Generator) -> np.ndarray:
    """Random unit vector orthogonal to ``x`` (real field)."""
    x_dir = x / np.linalg.norm(x)
    v = g.standard_normal(x.shape[0])
    v -= (v @ x_dir) * x_dir
    return v / np.linalg.norm(v)


def _ksum(v: np.ndarray) -> float:
    """Left-to-right sequential sum; fixed accumulation order."""
    if v.size == 0:
        return 0.0
    return float(np.cumsum(v)[-1])


def _reduce(v: np.ndarray, reduction: str) -> float:
    if reduction == "sequential":
        return _ksum(v)
    if reduction == "pairwise":
        return float(np.sum(v))
    raise ValueError(f"unknown reduction {reduction!r}")


def _as_y(y) -> np.ndarray:
    if isinstance(y, IntensityData):
        return y.y
    return np.asarray(y)


def _sqabs(z: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(z):
        return z.real * z.real + z.imag * z.imag
    return z * z


@dataclass
class _Eval:
    z: np.ndarray
    q: np.ndarray
    r: np.ndarray
    D: np.ndarray
    nu: float            # ||u||^2
    keep: Optional[np.ndarray]  # None unless qim1 dropped measurements
    m_eff: int
    singular_hits: int


def _prepare(model: QimModel, E: SensingEnsemble, y: np.ndarray, u: np.ndarray) -> _Eval:
    z = forward_map(E, u)
    q = _sqabs(z)
    nu = float(np.real(np.vdot(u, u)))
    keep = None
    hits = 0
    if model.variant == "qim1":
        guard = model.guard_rel * float(np.mean(y))
        bad = y < guard
        hits = int(np.count_nonzero(bad))
        if hits:
            if not model.qim1_drop_singular:
                raise SingularDenominator(
                    f"{hits} measurement(s) with y below the guard {guard:.3e}")
            keep = ~bad
            if not keep.any():
                raise SingularDenominator("all measurements fall below the guard")
            z, q, y = z[keep], q[keep], y[keep]
        D = y.astype(float, copy=True)
    elif model.variant == "qim2":
        D = model.beta * nu + y
    elif model.variant == "qim3":
        D = nu + model.beta1 * q + model.beta2 * y
    else:
        D = np.ones_like(q)
    r = q - y
    return _Eval(z=z, q=q, r=r, D=D, nu=nu, keep=keep, m_eff=len(q), singular_hits=hits)


def loss(model: QimModel, E: SensingEnsemble, y, u: np.ndarray,
         reduction: str = "sequential", with_gradient: bool = False) -> LossEval:
    """Evaluate the loss at ``u``.  Nonnegative; zero iff all residuals vanish."""
    y = _as_y(y)
    u = np.asarray(u)
    ev = _prepare(model, E, y, u)
    value = _reduce(ev.r * ev.r / ev.D, reduction) / ev.m_eff
    grad = None
    if with_gradient:
        grad = _project_field(E, u, _wirtinger_gradient(model, E, y, u, ev))
        if E.field == "real" and not np.iscomplexobj(u):
            grad = 2.0 * grad
    return LossEval(value=value, gradient=grad, singular_hits=ev.singular_hits)


def _wirtinger_gradient(model: QimModel, E: SensingEnsemble, y: np.ndarray,
                        u: np.ndarray, ev: _Eval) -> np.ndarray:
    """d f / d(u conjugate); equals half the Euclidean gradient on reals."""
    m = ev.m_eff
    w = ev.r / ev.D * ev.z
    if ev.keep is not None:
        full = np.zeros(E.m, dtype=ev.z.dtype)
        full[ev.keep] = w
        w = full
    g = (2.0 / m) * adjoint_map(E, w)
    if model.variant == "qim2":
        g = g - (model.beta / m) * _ksum(ev.r ** 2 / ev.D ** 2) * u
    elif model.variant == "qim3":
        g = g - (1.0 / m) * _ksum(ev.r ** 2 / ev.D ** 2) * u
        w2 = ev.r ** 2 / ev.D ** 2 * ev.z
        g = g - (model.beta1 / m) * adjoint_map(E, w2)
    return g


def _project_field(E: SensingEnsemble, u: np.ndarray, g: np.ndarray) -> np.ndarray:
    # a real-field signal behind a complex operator (cdp) lives on the real
    # subspace: its Wirtinger direction is the real part
    if E.field == "real" and not np.iscomplexobj(u) and np.iscomplexobj(g):
        return np.ascontiguousarray(g.real)
    return g


def gradient(model: QimModel, E: SensingEnsemble, y, u: np.ndarray) -> np.ndarray:
    """Gradient of :func:`loss` at ``u``.

    Real field: the Euclidean gradient, matching central finite differences
    of the loss (for complex operators such as cdp this is twice the real
    part of the Wirtinger gradient).  Complex field: the Wirtinger gradient
    in the d/d(u bar) convention (the embedding gradient is twice this).
    """
    y = _as_y(y)
    u = np.asarray(u)
    ev = _prepare(model, E, y, u)
    g = _project_field(E, u, _wirtinger_gradient(model, E, y, u, ev))
    if E.field == "real" and not np.iscomplexobj(u):
        return 2.0 * g
    return g


def descent_direction(model: QimModel, E: SensingEnsemble, y, u: np.ndarray) -> np.ndarray:
    """Wirtinger-convention descent direction on both fields.

    This is what :func:`qimlab.optim.gradient_descent` steps along, so that
    one step size means the same thing for real and complex signals (on the
    real field it equals half the Euclidean gradient).
    """
    y = _as_y(y)
    u = np.asarray(u)
    ev = _prepare(model, E, y, u)
    return _project_field(E, u, _wirtinger_gradient(model, E, y, u, ev))


def _require_real(E: SensingEnsemble, what: str) -> None:
    if E.is_complex:
        raise DomainError(f"{what} is defined for the real field only")


def dir_curvature(model: QimModel, E: SensingEnsemble, y, u: np.ndarray,
                  xi: np.ndarray) -> float:
    """Directional curvature ``d^2/dt^2 loss(u + t xi)`` at ``t = 0`` (real field).

    ``xi`` must be a unit vector.
    """
    y = _as_y(y)
    _require_real(E, "dir_curvature")
    xi = np.asarray(xi, dtype=float)
    if abs(np.linalg.norm(xi) - 1.0) > 1e-8:
        raise DomainError("xi must be a unit vector")
    u = np.asarray(u, dtype=float)
    ev = _prepare(model, E, y, u)
    s = forward_map(E, xi)
    if ev.keep is not None:
        s = s[ev.keep]
    z, r, D = ev.z, ev.r, ev.D
    qd = 2.0 * z * s          # d q / dt
    qdd = 2.0 * s * s         # d^2 q / dt^2
    Nd = 2.0 * r * qd
    Ndd = 2.0 * qd * qd + 2.0 * r * qdd
    uxi = float(u @ xi)
    if model.variant == "qim2":
        Dd = 2.0 * model.beta * uxi
        Ddd = 2.0 * model.beta
    elif model.variant == "qim3":
        Dd = 2.0 * uxi + 2.0 * model.beta1 * z * s
        Ddd = 2.0 + 2.0 * model.beta1 * s * s
    else:
        Dd = 0.0
        Ddd = 0.0
    N = r * r
    terms = Ndd / D - (2.0 * Nd * Dd + N * Ddd) / D ** 2 + 2.0 * N * Dd ** 2 / D ** 3
    return _ksum(terms) / ev.m_eff


def hessian_matrix(model: QimModel, E: SensingEnsemble, y, u: np.ndarray) -> np.ndarray:
    """Dense Hessian of the loss at ``u`` (real explicit ensembles, n <= 512)."""
    y = _as_y(y)
    _require_real(E, "hessian_matrix")
    if E.kind != "explicit":
        raise DomainError("hessian_matrix needs an explicit ensemble")
    if E.n > 512:
        raise DomainError("dense Hessian assembly is capped at n = 512; "
                          "use hessian_vector_product above that")
    u = np.asarray(u, dtype=float)
    ev = _prepare(model, E, y, u)
    A = E.rows if ev.keep is None else E.rows[ev.keep]
    m = ev.m_eff
    z, r, D = ev.z, ev.r, ev.D
    w_aa = (8.0 * z * z + 4.0 * r) / D
    if model.variant == "qim3":
        b1 = model.beta1
        w_aa = (w_aa - 16.0 * b1 * r * z * z / D ** 2 - 2.0 * b1 * r ** 2 / D ** 2
                + 8.0 * b1 ** 2 * r ** 2 * z * z / D ** 3)
    H = (A.T * w_aa) @ A / m
    if model.variant == "qim2":
        b = model.beta
        c1 = A.T @ (r * z / D ** 2) / m
        H -= 8.0 * b * (np.outer(c1, u) + np.outer(u, c1))
        H -= (2.0 * b / m) * _ksum(r ** 2 / D ** 2) * np.eye(E.n)
        H += (8.0 * b ** 2 / m) * _ksum(r ** 2 / D ** 3) * np.outer(u, u)
    elif model.variant == "qim3":
        b1 = model.beta1
        c1 = A.T @ (r * z / D ** 2) / m
        H -= 8.0 * (np.outer(c1, u) + np.outer(u, c1))
        H -= (2.0 / m) * _ksum(r ** 2 / D ** 2) * np.eye(E.n)
        c3 = A.T @ (r ** 2 * z / D ** 3) / m
        H += 8.0 * b1 * (np.outer(c3, u) + np.outer(u, c3))
        H += (8.0 / m) * _ksum(r ** 2 / D ** 3) * np.outer(u, u)
    return H


def hessian_vector_product(model: QimModel, E: SensingEnsemble, y, u: np.ndarray,
                           v: np.ndarray) -> np.ndarray:
    """Matrix-free ``H v`` with the same value as :func:`hessian_matrix` @ v."""
    y = _as_y(y)
    _require_real(E, "hessian_vector_product")
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    ev = _prepare(model, E, y, u)
    m = ev.m_eff
    z, r, D = ev.z, ev.r, ev.D
    Av = forward_map(E, v)
    if ev.keep is not None:
        Av = Av[ev.keep]

    def AtW(w):
        if ev.keep is not None:
            full = np.zeros(E.m)
            full[ev.keep] = w
            w = full
        return adjoint_map(E, w)

    w_aa = (8.0 * z * z + 4.0 * r) / D
    if model.variant == "qim3":
        b1 = model.beta1
        w_aa = (w_aa - 16.0 * b1 * r * z * z / D ** 2 - 2.0 * b1 * r ** 2 / D ** 2
                + 8.0 * b1 ** 2 * r ** 2 * z * z / D ** 3)
    Hv = AtW(w_aa * Av) / m
    if model.variant == "qim2":
        b = model.beta
        c1 = AtW(r * z / D ** 2) / m
        Hv -= 8.0 * b * (c1 * (u @ v) + u * (c1 @ v))
        Hv -= (2.0 * b / m) * _ksum(r ** 2 / D ** 2) * v
        Hv += (8.0 * b ** 2 / m) * _ksum(r ** 2 / D ** 3) * u * (u @ v)
    elif model.variant == "qim3":
        b1 = model.beta1
        c1 = AtW(r * z / D ** 2) / m
        Hv -= 8.0 * (c1 * (u @ v) + u * (c1 @ v))
        Hv -= (2.0 / m) * _ksum(r ** 2 / D ** 2) * v
        c3 = AtW(r ** 2 * z / D ** 3) / m
        Hv += 8.0 * b1 * (c3 * (u @ v) + u * (c3 @ v))
        Hv += (8.0 / m) * _ksum(r ** 2 / D ** 3) * u * (u @ v)
    return Hv


@dataclass(frozen=True)
class PolarDerivatives:
    f: float
    dR: float
    dRR: float
    dtheta: float
    dtheta2: float


# csc/cot forms are used away from the poles, per the angular derivative
# identity d(a.uhat)/dtheta = cot(theta) Z - csc(theta) X; the identity is
# singular at the endpoints although the derivative itself is not, so the
# direct chain rule takes over there.
_POLAR_ENDPOINT = 0.01


def polar_eval(model: QimModel, E: SensingEnsemble, y, p: PolarPoint) -> PolarDerivatives:
    """Loss and its radial/angular derivatives at a polar point (real field).

    Returns ``(f, df/dR, d2f/dR2, df/dtheta, d2f/dtheta2)``.  The radial
    first derivative is computed in residual-factored form, so it vanishes
    exactly (to the last bit) at ``theta = 0, R = 1`` on noiseless data with
    a unit-norm ground truth.
    """
    y = _as_y(y)
    _require_real(E, "polar_eval")
    R, theta = p.R, p.theta
    if not R > 0:
        raise DomainError(f"R must be positive, got {R}")
    c, s = np.cos(theta), np.sin(theta)
    X = forward_map(E, p.x_dir)
    if theta == 0.0:
        Z = X.copy()
    else:
        Z = forward_map(E, c * p.x_dir + s * p.e_perp)
    if _POLAR_ENDPOINT <= theta <= np.pi - _POLAR_ENDPOINT:
        Zp = Z * (c / s) - X / s
    else:
        Y = forward_map(E, p.e_perp)
        Zp = -s * X + c * Y
    m = E.m
    if model.variant == "qim1":
        guard = model.guard_rel * float(np.mean(y))
        bad = y < guard
        if bad.any():
            if not model.qim1_drop_singular:
                raise SingularDenominator("y below the guard in polar evaluation")
            keep = ~bad
            X, Z, Zp, y = X[keep], Z[keep], Zp[keep], y[keep]
            m = int(keep.sum())
    Z2 = Z * Z
    q = R * Z2
    r = q - y

    if model.variant == "qim1":
        D = y
        dR_terms = 2.0 * r * Z2 / y
        dRR_terms = 2.0 * Z2 * Z2 / y
        Dq = 0.0
    elif model.variant == "qim2":
        D = model.beta * R + y
        dR_terms = r * (2.0 * Z2 * D - r * model.beta) / D ** 2
        dRR_terms = 2.0 * y ** 2 * (model.beta + Z2) ** 2 / D ** 3
        Dq = 0.0
    elif model.variant == "qim3":
        b1, b2 = model.beta1, model.beta2
        D = R * (1.0 + b1 * Z2) + b2 * y
        dR_terms = r * (2.0 * Z2 * D - r * (1.0 + b1 * Z2)) / D ** 2
        dRR_terms = 2.0 * y ** 2 * (1.0 + (b1 + b2) * Z2) ** 2 / D ** 3
        Dq = b1
    else:
        D = np.ones_like(y)
        dR_terms = 2.0 * r * Z2
        dRR_terms = 2.0 * Z2 * Z2
        Dq = 0.0

    f = _ksum(r * r / D) / m
    dR = _ksum(dR_terms) / m
    dRR = _ksum(dRR_terms) / m

    qp = 2.0 * R * Z * Zp
    qpp = 2.0 * R * (Zp * Zp - Z2)
    Np = 2.0 * r * qp
    Npp = 2.0 * qp * qp + 2.0 * r * qpp
    if Dq:
        Dp = Dq * qp
        Dpp = Dq * qpp
        dt_terms = r * qp * (2.0 * D - r * Dq) / D ** 2
        dtt_terms = Npp / D - (2.0 * Np * Dp + r * r * Dpp) / D ** 2 + 2.0 * r * r * Dp ** 2 / D ** 3
    else:
        dt_terms = Np / D
        dtt_terms = Npp / D
    dtheta = _ksum(dt_terms) / m
    dtheta2 = _ksum(dtt_terms) / m
    return PolarDerivatives(f=f, dR=dR, dRR=dRR, dtheta=dtheta, dtheta2=dtheta2)


def dist_mod_phase(u: np.ndarray, x: np.ndarray) -> float:
    """Distance modulo the global phase: sign for real, unit phase for complex."""
    u = np.asarray(u)
    x = np.asarray(x)
    if u.shape != x.shape:
        raise DimensionMismatch(f"shape mismatch {u.shape} vs {x.shape}")
    if np.iscomplexobj(u) or np.iscomplexobj(x):
        ip = np.vdot(x, u)
        mag = abs(ip)
        phase = ip / mag if mag > 0 else 1.0
        return float(np.linalg.norm(u - phase * x))
    return float(min(np.linalg.norm(u - x), np.linalg.norm(u + x)))
