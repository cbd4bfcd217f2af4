"""Reduced-energy coefficients and the finite-dimensional blow-up locator.

The expansion of the energy of a bubble of depth delta at a boundary
point p collapses, after the corrector is accounted for, to a function
of (delta, p) alone:

    constant curvatures:      E(p) + A(p) gamma(p) eps delta - B(p) delta^4
    non-constant curvatures:  E(p) + A(p) eps delta - B(p) delta^2

This module computes A and the two flavors of B from closed moments
(coeff_A, coeff_B_nonconstant) or from a solved corrector plus curvature
invariants (coeff_B_constant), carries the sign quantity S with its two
equivalent expressions, and maximizes the increment over a finite sample
of boundary points.  Sampling the boundary is the caller's business: the
locator consumes a list of BoundarySample records and returns the
maximizer, its depth, and the rate delta ~ eps^rate.
"""

import csv
import json
import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import corrector, quad
from .bubble import alpha_n, bubble_energy, c_n, crit_boundary, crit_interior
from .errors import DomainError, HypothesisFailure


def _amplitude_sq(pt):
    """C^2 = alpha_n^2 / |K|^{(n-2)/2}, the squared bubble amplitude."""
    return alpha_n(pt.n) ** 2 / abs(pt.K) ** (0.5 * (pt.n - 2.0))


def coeff_A(pt, rel_tol=1e-10):
    """Coefficient of the eps*delta term: (n-1) int U^2(xt, 0) dxt."""
    n = pt.n
    tbl = quad.MomentTable(n, pt.D, rel_tol=rel_tol)
    return float((n - 1.0) * _amplitude_sq(pt)
                 * tbl.boundary_moment(0, n - 2))


def coeff_B_nonconstant(pt, hess, rel_tol=1e-10):
    """Coefficient of the delta^2 term from the curvature Hessians.

    The quadratic forms <D^2 H xt, xt> and <D^2 K x, x> integrate
    against radially symmetric bubble powers, so only the tangential
    traces and the normal-normal entry of D^2 K survive:

        c_n (n-2)/4 * tr(hessH)/(n-1) * int |xt|^2 U^{2#}(xt, 0)
        + 1/(2 2*) * [ tr_t(hessK)/(n-1) * int |xt|^2 U^{2*}
                       + hessK_nn * int x_n^2 U^{2*} ]
    """
    n = pt.n
    if hess.n != n:
        raise DomainError(f"hessians are for n={hess.n}, point has n={n}")
    tbl = quad.MomentTable(n, pt.D, rel_tol=rel_tol)
    amp = alpha_n(n) / abs(pt.K) ** (0.25 * (n - 2.0))
    tr_h = float(np.trace(hess.hessH))
    tr_k = float(np.trace(hess.hessK[:-1, :-1]))
    k_nn = float(hess.hessK[-1, -1])
    term_h = 0.25 * c_n(n) * (n - 2.0) * (tr_h / (n - 1.0)) \
        * amp ** crit_boundary(n) * tbl.boundary_moment(2, n - 1)
    term_k = (tr_k / (n - 1.0)) * tbl.halfspace_moment(0, 2, n) \
        + k_nn * tbl.halfspace_moment(2, 0, n)
    return float(term_h
                 + amp ** crit_interior(n) * term_k / (2.0 * crit_interior(n)))


def compute_S(pt, rel_tol=1e-10):
    """The positive quantity S multiplying R^2_{nins} in the delta^4 term."""
    n = pt.n
    D = pt.D
    tbl = quad.MomentTable(n, D, rel_tol=rel_tol)
    bracket = tbl.phi_hat(0.5 * (n - 3.0)) \
        + (n - 3.0) * D * tbl.phi_power(3, 0.5 * (n - 1.0))
    return _amplitude_sq(pt) * tbl.omega * ((n - 2.0) / (n + 1.0)) \
        * tbl.I(n, n + 2) * bracket


def compute_S_alt(pt, rel_tol=1e-10):
    """Equivalent expression for S through the tail-moment identity.

    The bracket (n-3) phi~_{(n-1)/2} - 4 phi^_{(n-3)/2} equals -S over
    the shared prefactor; the two routes agreeing is one of the identity
    checks the verify command reports.
    """
    n = pt.n
    tbl = quad.MomentTable(n, pt.D, rel_tol=rel_tol)
    bracket = (n - 3.0) * tbl.phi_tilde(0.5 * (n - 1.0)) \
        - 4.0 * tbl.phi_hat(0.5 * (n - 3.0))
    return -_amplitude_sq(pt) * tbl.omega * ((n - 2.0) / (n + 1.0)) \
        * tbl.I(n, n + 2) * bracket


def compute_I2(pt, rel_tol=1e-10):
    """The second delta^4 bracket; vanishes identically.

    Returns the signed value of

        c_n alpha_n^2 (n-2)^2 / (2 (n^2-1) |K|^{(n-2)/2}) * int x_n^2 |xt|^4 w^-n
        - 1/2 int x_n^2 U^2

    which cancels exactly; the residual is pure quadrature noise and the
    verify command checks it against zero.
    """
    n = pt.n
    tbl = quad.MomentTable(n, pt.D, rel_tol=rel_tol)
    first = c_n(n) * _amplitude_sq(pt) * (n - 2.0) ** 2 \
        / (2.0 * (n * n - 1.0)) * tbl.halfspace_moment(2, 4, n)
    second = 0.5 * _amplitude_sq(pt) * tbl.halfspace_moment(2, 0, n - 2)
    return first - second


def coeff_B_constant(pt, frame, sol, rel_tol=1e-10):
    """Coefficient of the delta^4 term when both curvatures are constant.

    B = 1/2 int E_p V_p + |Weyl|^2/(24(n-1)) int |xt|^2 U^2
        + R^2_{nins} S.

    The first term uses the corrector equation to trade the quadratic
    form of V_p for the forcing pairing, evaluated on the solved modes.
    """
    n = pt.n
    # gamma scales the perturbation, not the geometry, so solutions are
    # shared across samples that differ only in gamma
    if (sol.pt.n, sol.pt.K, sol.pt.H) != (pt.n, pt.K, pt.H):
        raise DomainError("corrector solution was computed for a different "
                          f"problem point: {sol.pt} vs {pt}")
    tbl = quad.MomentTable(n, pt.D, rel_tol=rel_tol)
    pair = 0.5 * corrector.forcing_pairing(sol)
    weyl_term = frame.weyl_norm_sq / (24.0 * (n - 1.0)) \
        * _amplitude_sq(pt) * tbl.halfspace_moment(0, 2, n - 2)
    s_term = frame.nnins_sq * compute_S(pt, rel_tol=rel_tol) \
        if frame.nnins_sq > 0.0 else 0.0
    return float(pair + weyl_term + s_term)


@dataclass(frozen=True)
class ReducedCoefficients:
    """Coefficient bundle (E, A, B) of the reduced energy at one point."""

    E: float
    A: float
    B: float
    case_tag: str
    S: float = None

    def __post_init__(self):
        if self.case_tag not in ("constants", "non-constants"):
            raise DomainError(f"unknown case tag {self.case_tag!r}")
        if self.A <= 0.0:
            raise DomainError(
                f"A must be positive (it is an integral of U^2), got {self.A}")
        if self.case_tag == "constants":
            if self.S is None:
                raise DomainError("constants case carries the quantity S")
            if self.S <= 0.0:
                raise HypothesisFailure(f"S must be positive, got {self.S}")

    def to_json_dict(self):
        doc = {"E": self.E, "A": self.A, "B": self.B,
               "case_tag": self.case_tag}
        if self.S is not None:
            doc["S"] = self.S
        return doc


def increment_constants(d, a, gamma, b):
    """Reduced-energy increment A gamma d - B d^4 (depth units of eps^{1/3})."""
    return a * gamma * d - b * d ** 4


def increment_nonconstant(d, a, b):
    """Reduced-energy increment A d - B d^2 (depth units of eps)."""
    return a * d - b * d * d


def stationary_depth_constants(a, gamma, b):
    """Closed-form maximizer of A gamma d - B d^4, requires B > 0.

    The stationarity equation A gamma = 4 d^3 B gives
    d0 = (A gamma / (4 B))^{1/3}.
    """
    if b <= 0.0:
        raise DomainError(f"stationary depth needs B > 0, got B={b}")
    if a * gamma <= 0.0:
        raise DomainError(f"stationary depth needs A*gamma > 0, "
                          f"got A={a}, gamma={gamma}")
    return (a * gamma / (4.0 * b)) ** (1.0 / 3.0)


def stationary_depth_nonconstant(a, b):
    """Closed-form maximizer of A d - B d^2: d0 = A / (2 B), requires B > 0."""
    if b <= 0.0:
        raise DomainError(f"stationary depth needs B > 0, got B={b}")
    return a / (2.0 * b)


@dataclass(frozen=True)
class BoundarySample:
    """One boundary point with the data the locator needs.

    ``pt`` carries (n, K(p), H(p), gamma(p)).  The non-constant case
    supplies ``hess``; the constants case supplies ``frame`` and the
    solved corrector ``sol``.
    """

    label: str
    coords: tuple
    pt: object
    hess: object = None
    frame: object = None
    sol: object = None


@dataclass
class BlowupReport:
    """Outcome of the finite-dimensional maximization over a sample."""

    p_star: str
    coords: tuple
    d_star: float
    rate: float
    case_tag: str
    coefficients: ReducedCoefficients
    gamma: float
    J_values: dict
    hypothesis_flags: dict
    table: list = field(default_factory=list)

    def __post_init__(self):
        c = self.coefficients
        if self.case_tag == "constants":
            defect = abs(c.A * self.gamma - 4.0 * self.d_star ** 3 * c.B)
            scale = abs(c.A * self.gamma)
        else:
            defect = abs(c.A - 2.0 * self.d_star * c.B)
            scale = abs(c.A)
        if defect > 1e-8 * scale:
            raise DomainError(
                f"d_star violates the stationarity equation: defect "
                f"{defect:.3e} vs scale {scale:.3e}")

    def to_json_dict(self):
        return {
            "p_star": self.p_star,
            "coords": list(self.coords),
            "d_star": self.d_star,
            "rate": self.rate,
            "case_tag": self.case_tag,
            "coefficients": self.coefficients.to_json_dict(),
            "gamma": self.gamma,
            "J_values": self.J_values,
            "hypothesis_flags": self.hypothesis_flags,
            "depth_convention": "stationarity A*gamma = 4 d^3 B (constants) "
                                "/ A = 2 d B (non-constants), from the "
                                "differentiated increment",
        }

    def save(self, directory):
        """Write blowup.json and the per-sample samples.csv table."""
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, "blowup.json"), "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True,
                      default=float)
            fh.write("\n")
        with open(os.path.join(directory, "samples.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sample", "E", "A", "B", "d0", "G"])
            for row in self.table:
                writer.writerow([row["sample"]] + [
                    repr(float(row[k])) if row[k] is not None else ""
                    for k in ("E", "A", "B", "d0", "G")])


def _admissible(samples):
    """Drop samples below the bubble threshold D > 1, warning per drop."""
    kept = []
    for s in samples:
        if s.pt.D <= 1.0:
            warnings.warn(
                f"sample {s.label!r} has D = {s.pt.D:.6g} <= 1 (no bubble "
                "exists there); excluded from the maximization")
            continue
        kept.append(s)
    if not kept:
        raise DomainError("no admissible samples: every point has D <= 1")
    return kept


def optimize_constants(samples, rel_tol=1e-10):
    """Maximize A gamma d - B d^4 over boundary samples, rate 1/3.

    Every admissible sample gets its coefficient row; samples with
    B <= 0 are flagged and skipped for the maximization.
    HypothesisFailure when no sample has B > 0.
    """
    kept = _admissible(list(samples))
    all_d = all(s.pt.D > 1.0 for s in samples)
    rows = []
    best = None
    for s in kept:
        if s.frame is None or s.sol is None:
            raise DomainError(f"sample {s.label!r} lacks frame/corrector data")
        e_val = bubble_energy(s.pt, rel_tol=rel_tol)
        a_val = coeff_A(s.pt, rel_tol=rel_tol)
        b_val = coeff_B_constant(s.pt, s.frame, s.sol, rel_tol=rel_tol)
        row = {"sample": s.label, "E": e_val, "A": a_val, "B": b_val,
               "d0": None, "G": None}
        if b_val > 0.0:
            d0 = stationary_depth_constants(a_val, s.pt.gamma, b_val)
            row["d0"] = d0
            row["G"] = increment_constants(d0, a_val, s.pt.gamma, b_val)
            if best is None or row["G"] > best[1]["G"]:
                best = (s, row)
        rows.append(row)
    if best is None:
        raise HypothesisFailure(
            "B(p) <= 0 at every sample: the delta^4 coefficient never "
            "produces a maximum at positive depth")
    s, row = best
    coeffs = ReducedCoefficients(E=row["E"], A=row["A"], B=row["B"],
                                 case_tag="constants",
                                 S=compute_S(s.pt, rel_tol=rel_tol))
    flags = {"B_positive": bool(row["B"] > 0.0),
             "D_above_one_along_sample": bool(all_d)}
    j_values = {"E": row["E"],
                "A_gamma_d": row["A"] * s.pt.gamma * row["d0"],
                "B_d4": row["B"] * row["d0"] ** 4,
                "G": row["G"]}
    return BlowupReport(p_star=s.label, coords=tuple(s.coords),
                        d_star=row["d0"], rate=1.0 / 3.0,
                        case_tag="constants", coefficients=coeffs,
                        gamma=s.pt.gamma, J_values=j_values,
                        hypothesis_flags=flags, table=rows)


def optimize_nonconstant(samples, rel_tol=1e-10, tie_rel_tol=1e-9):
    """Maximize over samples in the non-constant case, rate 1.

    The bubble energy E(p) dominates at order eps^0, so the selection
    maximizes E first; samples whose E ties the maximum within
    ``tie_rel_tol`` (relative) are ranked by the eps^2-order increment
    G = A^2/(4B).  HypothesisFailure when the curvature Hessians at the
    selected point are not positive definite.
    """
    kept = _admissible(list(samples))
    all_d = all(s.pt.D > 1.0 for s in samples)
    rows = []
    entries = []
    for s in kept:
        if s.hess is None:
            raise DomainError(f"sample {s.label!r} lacks Hessian data")
        e_val = bubble_energy(s.pt, rel_tol=rel_tol)
        a_val = coeff_A(s.pt, rel_tol=rel_tol)
        b_val = coeff_B_nonconstant(s.pt, s.hess, rel_tol=rel_tol)
        row = {"sample": s.label, "E": e_val, "A": a_val, "B": b_val,
               "d0": None, "G": None}
        if b_val > 0.0:
            d0 = stationary_depth_nonconstant(a_val, b_val)
            row["d0"] = d0
            row["G"] = increment_nonconstant(d0, a_val, b_val)
            entries.append((s, row))
        rows.append(row)
    if not entries:
        raise HypothesisFailure(
            "B(p) <= 0 at every sample: no positive-depth maximum exists")
    e_max = max(row["E"] for _, row in entries)
    band = [pair for pair in entries
            if pair[1]["E"] >= e_max - tie_rel_tol * abs(e_max)]
    s, row = max(band, key=lambda pair: pair[1]["G"])
    eig_h = np.linalg.eigvalsh(s.hess.hessH)
    eig_k = np.linalg.eigvalsh(s.hess.hessK)
    pd = bool(eig_h[0] > 0.0 and eig_k[0] > 0.0)
    if not pd:
        raise HypothesisFailure(
            f"curvature Hessians at the selected point {s.label!r} are not "
            f"positive definite (min eigenvalues {eig_h[0]:.3e}, "
            f"{eig_k[0]:.3e})")
    coeffs = ReducedCoefficients(E=row["E"], A=row["A"], B=row["B"],
                                 case_tag="non-constants")
    flags = {"B_positive": bool(row["B"] > 0.0),
             "hessians_positive_definite": pd,
             "D_above_one_along_sample": bool(all_d)}
    j_values = {"E": row["E"],
                "A_d": row["A"] * row["d0"],
                "B_d2": row["B"] * row["d0"] ** 2,
                "G": row["G"]}
    return BlowupReport(p_star=s.label, coords=tuple(s.coords),
                        d_star=row["d0"], rate=1.0,
                        case_tag="non-constants", coefficients=coeffs,
                        gamma=s.pt.gamma, J_values=j_values,
                        hypothesis_flags=flags, table=rows)
