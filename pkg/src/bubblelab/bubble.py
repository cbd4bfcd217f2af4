"""The bubble family, its Jacobi fields, and the closed-form energy.

The model solution on the half-space is

    U(x) = C * w(x)^{-(n-2)/2},   w(x) = |x - x0|^2 - delta^2,

with C = alpha_n / |K|^{(n-2)/4} and x0 = (center, -D*delta); D > 1 keeps
w strictly positive up to the boundary.  Everything here is a rational
function of x, so all derivatives are analytic — finite differences
appear only in tests.  Residuals of the model problem

    -c_n Lap U = K U^{(n+2)/(n-2)}        in the half-space,
    (2/(n-2)) dU/dnu = H U^{n/(n-2)}      on x_n = 0,  nu = -e_n,

and of its linearization vanish identically; evaluating them measures
pure floating-point cancellation, which is the point of the test suite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import quad
from .errors import DomainError
from .model import ProblemPoint


def alpha_n(n):
    """Normalization constant (4n(n-1))^{(n-2)/4}."""
    return (4.0 * n * (n - 1.0)) ** ((n - 2.0) / 4.0)


def c_n(n):
    """Conformal-Laplacian coefficient 4(n-1)/(n-2)."""
    return 4.0 * (n - 1.0) / (n - 2.0)


def crit_interior(n):
    """Critical interior exponent 2n/(n-2)."""
    return 2.0 * n / (n - 2.0)


def crit_boundary(n):
    """Critical boundary-trace exponent 2(n-1)/(n-2)."""
    return 2.0 * (n - 1.0) / (n - 2.0)


@dataclass(frozen=True)
class Bubble:
    """One member of the bubble family over a ProblemPoint."""

    pt: ProblemPoint
    delta: float = 1.0
    center: np.ndarray | None = None

    def __post_init__(self):
        if self.delta <= 0.0:
            raise DomainError(f"delta must be positive, got {self.delta}")
        if self.pt.D <= 1.0:
            raise DomainError(
                f"bubble family needs D > 1, got D = {self.pt.D:.6g}")
        m = self.pt.n - 1
        center = np.zeros(m) if self.center is None else np.array(self.center,
                                                                  dtype=float)
        if center.shape != (m,):
            raise DomainError(f"center must have shape ({m},), got {center.shape}")
        center.flags.writeable = False
        object.__setattr__(self, "center", center)

    # -- basic scalars -----------------------------------------------------
    @property
    def n(self):
        return self.pt.n

    @property
    def C(self):
        """Amplitude alpha_n / |K|^{(n-2)/4}."""
        n = self.n
        return alpha_n(n) / abs(self.pt.K) ** ((n - 2.0) / 4.0)

    @property
    def q(self):
        """Profile exponent (n-2)/2."""
        return 0.5 * (self.n - 2.0)

    @property
    def x0(self):
        """Center of the defining sphere: (center, -D*delta)."""
        out = np.empty(self.n)
        out[:-1] = self.center
        out[-1] = -self.pt.D * self.delta
        return out

    @property
    def normalized(self):
        return self.delta == 1.0 and not np.any(self.center)

    def _require_normalized(self, what):
        if not self.normalized:
            raise DomainError(f"{what} is defined for the normalized bubble "
                              "(delta=1, center=0) only")

    # -- pointwise evaluation (x has shape (n,) or (..., n)) ----------------
    def w(self, x):
        d = np.asarray(x, dtype=float) - self.x0
        return np.sum(d * d, axis=-1) - self.delta ** 2

    def U(self, x):
        return self.C * self.delta ** self.q * self.w(x) ** (-self.q)

    def grad_U(self, x):
        d = np.asarray(x, dtype=float) - self.x0
        wv = np.sum(d * d, axis=-1) - self.delta ** 2
        coef = -2.0 * self.q * self.C * self.delta ** self.q \
            * wv ** (-self.q - 1.0)
        return coef[..., None] * d if np.ndim(coef) else coef * d

    def hess_U(self, x):
        d = np.asarray(x, dtype=float) - self.x0
        wv = np.sum(d * d, axis=-1) - self.delta ** 2
        q = self.q
        amp = self.C * self.delta ** q
        a = -2.0 * q * amp * wv ** (-q - 1.0)
        bcoef = 4.0 * q * (q + 1.0) * amp * wv ** (-q - 2.0)
        eye = np.eye(self.n)
        if np.ndim(wv):
            return a[..., None, None] * eye \
                + bcoef[..., None, None] * d[..., :, None] * d[..., None, :]
        return a * eye + bcoef * np.outer(d, d)

    def laplacian_U(self, x):
        wv = self.w(x)
        n, q = self.n, self.q
        return n * (n - 2.0) * self.C * self.delta ** (q + 2.0) * wv ** (-q - 2.0)

    # -- radial-slice helpers used by the corrector grids --------------------
    def w_rx(self, r, xn):
        """w along the slice x = (r e_1, x_n); needs center = 0."""
        if np.any(self.center):
            raise DomainError("radial slice helpers need center = 0")
        r = np.asarray(r, dtype=float)
        xn = np.asarray(xn, dtype=float)
        return r * r + (xn + self.pt.D * self.delta) ** 2 - self.delta ** 2

    def U_rx(self, r, xn):
        return self.C * self.delta ** self.q * self.w_rx(r, xn) ** (-self.q)


def eval_U(b, x, derivs=2):
    """Value and optional analytic derivatives of U: (U, grad, hess)."""
    x = np.asarray(x, dtype=float)
    val = b.U(x)
    grad = b.grad_U(x) if derivs >= 1 else None
    hess = b.hess_U(x) if derivs >= 2 else None
    return val, grad, hess


def residual_model(b, x, boundary_tol=0.0):
    """Relative residuals of the model problem at x.

    Returns (interior, boundary): each residual is divided by the larger
    of its two constituent terms.  boundary is None unless x_n lies
    within ``boundary_tol`` of 0.
    """
    x = np.asarray(x, dtype=float)
    if x[-1] < 0.0:
        raise DomainError(f"x_n must be >= 0, got {x[-1]}")
    n = b.n
    K = b.pt.K
    t1 = -c_n(n) * b.laplacian_U(x)
    t2 = K * b.U(x) ** (crit_interior(n) - 1.0)
    interior = abs(t1 - t2) / max(abs(t1), abs(t2))
    boundary = None
    if x[-1] <= boundary_tol:
        xb = x.copy()
        xb[-1] = 0.0
        dn = b.grad_U(xb)[-1]
        s1 = (2.0 / (n - 2.0)) * (-dn)          # outward normal is -e_n
        s2 = b.pt.H * b.U(xb) ** (crit_boundary(n) - 1.0)
        boundary = abs(s1 - s2) / max(abs(s1), abs(s2))
    return interior, boundary


# ---------------------------------------------------------------------------
# Jacobi fields of the linearized problem (normalized bubble only)


def jacobi(b, i, x):
    """Kernel element j_i at x, i in 1..n (1-based, i=n is the radial one).

    j_i = (2-n) C x_i w^{-n/2}            for i < n,
    j_n = C (n-2)/2 (|x|^2 + 1 - D^2) w^{-n/2}.
    """
    b._require_normalized("jacobi")
    x = np.asarray(x, dtype=float)
    n = b.n
    if not 1 <= i <= n:
        raise DomainError(f"jacobi index must be in 1..{n}, got {i}")
    wv = b.w(x)
    s = 0.5 * n
    if i < n:
        return (2.0 - n) * b.C * x[..., i - 1] * wv ** (-s)
    phi = np.sum(x * x, axis=-1) + 1.0 - b.pt.D ** 2
    return 0.5 * (n - 2.0) * b.C * phi * wv ** (-s)


def jacobi_alt_n(b, x):
    """Equivalent form of the radial kernel element:
    (2-n)/2 U - sum_a x_a dU/dx_a."""
    b._require_normalized("jacobi_alt_n")
    x = np.asarray(x, dtype=float)
    n = b.n
    return 0.5 * (2.0 - n) * b.U(x) - np.sum(x * b.grad_U(x), axis=-1)


def jacobi_grad(b, i, x):
    b._require_normalized("jacobi_grad")
    x = np.asarray(x, dtype=float)
    n = b.n
    s = 0.5 * n
    d = x - b.x0
    wv = b.w(x)
    if i < n:
        A = (2.0 - n) * b.C
        g = -2.0 * s * x[i - 1] * wv ** (-s - 1.0) * d
        g[i - 1] += wv ** (-s)
        return A * g
    B = 0.5 * (n - 2.0) * b.C
    phi = np.sum(x * x) + 1.0 - b.pt.D ** 2
    return B * (2.0 * x * wv ** (-s) - 2.0 * s * phi * wv ** (-s - 1.0) * d)


def jacobi_laplacian(b, i, x):
    """Analytic Laplacian of j_i, assembled from Lap(w^-s) and the product rule."""
    b._require_normalized("jacobi_laplacian")
    x = np.asarray(x, dtype=float)
    n = b.n
    s = 0.5 * n
    d = x - b.x0
    wv = b.w(x)
    # Lap(w^-s) = 2s(2s+2-n) w^{-s-1} + 4s(s+1) w^{-s-2} (|x-x0|^2 = w + 1)
    lap_ws = 2.0 * s * (2.0 * s + 2.0 - n) * wv ** (-s - 1.0) \
        + 4.0 * s * (s + 1.0) * wv ** (-s - 2.0)
    grad_ws = -2.0 * s * wv ** (-s - 1.0) * d
    if i < n:
        A = (2.0 - n) * b.C
        return A * (x[i - 1] * lap_ws + 2.0 * grad_ws[i - 1])
    B = 0.5 * (n - 2.0) * b.C
    phi = np.sum(x * x) + 1.0 - b.pt.D ** 2
    return B * (2.0 * n * wv ** (-s) + 2.0 * np.dot(2.0 * x, grad_ws)
                + phi * lap_ws)


def residual_linearized(b, i, x, boundary_tol=0.0):
    """Relative residuals of the linearized problem for kernel element j_i.

    Interior: -c_n Lap j + (2*-1)|K| U^{4/(n-2)} j; boundary (x_n = 0):
    (2/(n-2)) dj/dnu - (n/(n-2)) H U^{2/(n-2)} j.  Each residual is
    normalized by the larger constituent term (1 if both vanish, e.g.
    on the nodal set of j_i).
    """
    x = np.asarray(x, dtype=float)
    if x[-1] < 0.0:
        raise DomainError(f"x_n must be >= 0, got {x[-1]}")
    n = b.n
    pot = (crit_interior(n) - 1.0) * abs(b.pt.K) * b.U(x) ** (4.0 / (n - 2.0))
    jv = jacobi(b, i, x)
    t1 = -c_n(n) * jacobi_laplacian(b, i, x)
    t2 = pot * jv
    interior = abs(t1 + t2) / max(abs(t1), abs(t2), 1.0e-300)
    boundary = None
    if x[-1] <= boundary_tol:
        xb = x.copy()
        xb[-1] = 0.0
        dn = jacobi_grad(b, i, xb)[-1]
        s1 = (2.0 / (n - 2.0)) * (-dn)
        s2 = (n / (n - 2.0)) * b.pt.H * b.U(xb) ** (2.0 / (n - 2.0)) \
            * jacobi(b, i, xb)
        boundary = abs(s1 - s2) / max(abs(s1), abs(s2), 1.0e-300)
    return interior, boundary


# ---------------------------------------------------------------------------
# Bubble energy


def bubble_energy(pt, rel_tol=1e-10):
    """Closed-form energy of the (normalized) bubble over ``pt``.

    E = a_n / |K|^{(n-2)/2} * ( -(n-1) phi_{(n+1)/2}(D) + D (D^2-1)^{-(n-1)/2} ),
    a_n = alpha_n^{2#} * omega * I(n-1, n) * (n-3) / ((n-1) sqrt(n(n-1))).
    """
    n = pt.n
    D = pt.D
    if D <= 1.0:
        raise DomainError(f"bubble energy needs D > 1, got D = {D:.6g}")
    tbl = quad.MomentTable(n, D, rel_tol=rel_tol)
    a = alpha_n(n) ** crit_boundary(n) * tbl.omega * tbl.I(n - 1, n) \
        * (n - 3.0) / ((n - 1.0) * math.sqrt(n * (n - 1.0)))
    bracket = -(n - 1.0) * tbl.phi(0.5 * (n + 1.0)) \
        + D * (D * D - 1.0) ** (-0.5 * (n - 1.0))
    return a / abs(pt.K) ** (0.5 * (n - 2.0)) * bracket


def bubble_energy_quadrature(pt, rel_tol=1e-8):
    """Independent oracle: the energy functional evaluated by quadrature.

    (c_n/2) int |grad U|^2 + (|K|/2*) int U^{2*}
        - (n-2) H int_boundary U^{2#}.
    """
    n = pt.n
    b = Bubble(pt)
    ts = crit_interior(n)
    tsh = crit_boundary(n)

    grad2 = quad.brute_halfspace(lambda x: float(np.sum(b.grad_U(x) ** 2)),
                                 n, rel_tol=rel_tol)
    upow = quad.brute_halfspace(lambda x: float(b.U(x) ** ts), n,
                                rel_tol=rel_tol)

    def trace(r):
        x = np.zeros(n)
        x[0] = r
        return float(b.U(x) ** tsh) * r ** (n - 2)

    btrace = quad.sphere_area(n - 1) * quad.integrate_halfline(
        trace, a=0.0, rel_tol=rel_tol)
    return 0.5 * c_n(n) * grad2 + abs(pt.K) / ts * upow \
        - (n - 2.0) * pt.H * btrace
