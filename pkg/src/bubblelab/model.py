"""Domain types and hypothesis validation.

A candidate concentration point on the boundary is described by scalar
data (dimension, prescribed curvatures, perturbation weight) collected
in :class:`ProblemPoint`, plus curvature tensors at the point in the
gauge where the boundary Ricci tensor and the normal-normal Ricci entry
vanish (:class:`CurvatureFrame`).  Validation never raises: every
operation returns a report listing each invariant with its measured
violation, so the CLI can show all failures at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

SUPPORTED_MIN_DIMENSION = 8
# identity verification still makes sense below the blow-up threshold;
# the explicit override lowers the gate to this hard floor
OVERRIDE_MIN_DIMENSION = 5


def scaling_quantity(n, K, H):
    """D = sqrt(n(n-1)) * H / sqrt(|K|); bubbles exist iff D > 1."""
    if K == 0.0:
        raise DomainError("scaling quantity undefined at K = 0")
    return math.sqrt(n * (n - 1.0)) * H / math.sqrt(abs(K))


def _frozen_array(obj, name, value, shape):
    arr = np.array(value, dtype=float)
    if arr.shape != shape:
        raise DomainError(f"{name} must have shape {shape}, got {arr.shape}")
    arr.flags.writeable = False
    object.__setattr__(obj, name, arr)
    return arr


@dataclass(frozen=True)
class ProblemPoint:
    """Scalar data of a candidate blow-up point.

    The scaling quantity D is always recomputed from (n, K, H) — it is a
    property, never stored, so it cannot drift out of sync.
    """

    n: int
    K: float
    H: float
    gamma: float = 1.0

    @property
    def D(self):
        return scaling_quantity(self.n, self.K, self.H)

    def to_json_dict(self):
        return {"n": self.n, "K": self.K, "H": self.H, "gamma": self.gamma}

    @classmethod
    def from_json_dict(cls, doc):
        return cls(n=int(doc["n"]), K=float(doc["K"]), H=float(doc["H"]),
                   gamma=float(doc.get("gamma", 1.0)))


@dataclass(frozen=True)
class HessianData:
    """Second derivatives of the prescribed curvatures at the point.

    hessH is (n-1) x (n-1) (tangential), hessK is n x n.
    """

    hessH: np.ndarray
    hessK: np.ndarray

    def __post_init__(self):
        hH = np.array(self.hessH, dtype=float)
        hK = np.array(self.hessK, dtype=float)
        if hH.ndim != 2 or hH.shape[0] != hH.shape[1]:
            raise DomainError(f"hessH must be square, got {hH.shape}")
        if hK.shape != (hH.shape[0] + 1, hH.shape[0] + 1):
            raise DomainError(
                f"hessK must be {(hH.shape[0] + 1,) * 2} for hessH {hH.shape}, "
                f"got {hK.shape}")
        for name, arr in (("hessH", hH), ("hessK", hK)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n(self):
        return self.hessK.shape[0]


@dataclass(frozen=True)
class CurvatureFrame:
    """Curvature data at the point, in the gauge with vanishing boundary Ricci.

    riem_boundary holds the boundary Riemann tensor R[i,k,j,l] with all
    indices tangential (1..n-1); the pair slots are (i,k) and (j,l) and
    the Ricci contraction is over slots (0, 2).  normal_block is the
    symmetric matrix R_{ninj}.  nnins_sq is always recomputed from
    normal_block; weyl_norm_sq may be supplied or left None and filled
    from geom.weyl_norm.
    """

    riem_boundary: np.ndarray
    normal_block: np.ndarray
    normal_block_div: float = 0.0
    weyl_norm_sq: float | None = None
    nnins_sq: float = field(init=False)

    def __post_init__(self):
        riem = np.array(self.riem_boundary, dtype=float)
        if riem.ndim != 4 or len(set(riem.shape)) != 1:
            raise DomainError(
                f"riem_boundary must be rank 4 with equal dims, got {riem.shape}")
        m = riem.shape[0]
        riem.flags.writeable = False
        object.__setattr__(self, "riem_boundary", riem)
        nb = _frozen_array(self, "normal_block", self.normal_block, (m, m))
        object.__setattr__(self, "nnins_sq", float(np.sum(nb * nb)))

    @property
    def m(self):
        """Boundary dimension n-1."""
        return self.riem_boundary.shape[0]

    @property
    def n(self):
        return self.m + 1

    @classmethod
    def zero(cls, n, normal_block_div=0.0):
        m = n - 1
        return cls(riem_boundary=np.zeros((m, m, m, m)),
                   normal_block=np.zeros((m, m)),
                   normal_block_div=normal_block_div,
                   weyl_norm_sq=0.0)

    def to_json_dict(self):
        return {
            "n": self.n,
            "riem_boundary": [float(v) for v in self.riem_boundary.ravel(order="C")],
            "riem_boundary_dims": list(self.riem_boundary.shape),
            "normal_block": [[float(v) for v in row] for row in self.normal_block],
            "normal_block_div": self.normal_block_div,
            "weyl_norm_sq": self.weyl_norm_sq,
        }

    @classmethod
    def from_json_dict(cls, doc):
        dims = tuple(int(d) for d in doc["riem_boundary_dims"])
        riem = np.array(doc["riem_boundary"], dtype=float).reshape(dims, order="C")
        wns = doc.get("weyl_norm_sq")
        return cls(riem_boundary=riem,
                   normal_block=np.array(doc["normal_block"], dtype=float),
                   normal_block_div=float(doc.get("normal_block_div", 0.0)),
                   weyl_norm_sq=None if wns is None else float(wns))


# ---------------------------------------------------------------------------
# validation reports


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    bound: float
    detail: str = ""

    def to_json_dict(self):
        return {"name": self.name, "passed": self.passed, "value": self.value,
                "bound": self.bound, "detail": self.detail}


@dataclass
class ValidationReport:
    checks: list
    outside_supported_regime: bool = False

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def to_json_dict(self):
        return {
            "passed": self.passed,
            "outside_supported_regime": self.outside_supported_regime,
            "checks": [c.to_json_dict() for c in self.checks],
        }


def validate_point(pt, override_dimension_gate=False):
    """Check every ProblemPoint invariant; all failures become report rows."""
    checks = []
    outside = False
    n_floor = OVERRIDE_MIN_DIMENSION if override_dimension_gate else SUPPORTED_MIN_DIMENSION
    dim_ok = pt.n >= n_floor
    if override_dimension_gate and OVERRIDE_MIN_DIMENSION <= pt.n < SUPPORTED_MIN_DIMENSION:
        outside = True
    checks.append(Check(
        name="n >= 8" if not override_dimension_gate else "n >= 5 (gate overridden)",
        passed=dim_ok, value=float(pt.n), bound=float(n_floor),
        detail="" if dim_ok else f"dimension gate: need n >= {n_floor}, got n={pt.n}"))
    checks.append(Check(name="K < 0", passed=pt.K < 0.0, value=pt.K, bound=0.0))
    try:
        D = pt.D
        d_ok = D > 1.0
        detail = "" if d_ok else f"no bubble family: D = {D:.6g} <= 1"
    except DomainError as exc:
        D, d_ok, detail = math.nan, False, str(exc)
    checks.append(Check(name="D > 1", passed=d_ok, value=D, bound=1.0, detail=detail))
    checks.append(Check(name="gamma > 0", passed=pt.gamma > 0.0,
                        value=pt.gamma, bound=0.0))
    return ValidationReport(checks=checks, outside_supported_regime=outside)


def validate_frame(fr, tol=1e-10):
    """Check the algebraic symmetries and gauge trace conditions of a frame.

    Violations are measured in max norm and compared against
    tol * max(1, |R|_max) per symmetry class.
    """
    R = fr.riem_boundary
    Q = fr.normal_block
    scale = max(1.0, float(np.max(np.abs(R))) if R.size else 0.0,
                float(np.max(np.abs(Q))) if Q.size else 0.0)
    bound = tol * scale

    def mx(arr):
        return float(np.max(np.abs(arr))) if arr.size else 0.0

    bianchi = R + R.transpose(0, 2, 3, 1) + R.transpose(0, 3, 1, 2)
    ricci = np.einsum("ikil->kl", R)
    checks = [
        Check("antisymmetry first pair", mx(R + R.transpose(1, 0, 2, 3)) <= bound,
              mx(R + R.transpose(1, 0, 2, 3)), bound),
        Check("antisymmetry second pair", mx(R + R.transpose(0, 1, 3, 2)) <= bound,
              mx(R + R.transpose(0, 1, 3, 2)), bound),
        Check("pair symmetry", mx(R - R.transpose(2, 3, 0, 1)) <= bound,
              mx(R - R.transpose(2, 3, 0, 1)), bound),
        Check("first Bianchi identity", mx(bianchi) <= bound, mx(bianchi), bound),
        Check("boundary Ricci vanishes", mx(ricci) <= bound, mx(ricci), bound),
        Check("normal block symmetric", mx(Q - Q.T) <= bound, mx(Q - Q.T), bound),
        Check("normal block trace vanishes", abs(float(np.trace(Q))) <= bound,
              abs(float(np.trace(Q))), bound),
    ]
    nnins = float(np.sum(Q * Q))
    checks.append(Check("nnins_sq consistent", abs(fr.nnins_sq - nnins) <= bound,
                        abs(fr.nnins_sq - nnins), bound))
    if fr.weyl_norm_sq is not None:
        checks.append(Check("weyl_norm_sq >= 0", fr.weyl_norm_sq >= 0.0,
                            fr.weyl_norm_sq, 0.0))
    return ValidationReport(checks=checks)


def validate_hessians(hd, require_definite=True, tol=1e-10):
    """Symmetry (always) and positive definiteness (when asserted)."""
    checks = []
    for name, arr in (("hessH", hd.hessH), ("hessK", hd.hessK)):
        scale = max(1.0, float(np.max(np.abs(arr))))
        viol = float(np.max(np.abs(arr - arr.T)))
        checks.append(Check(f"{name} symmetric", viol <= tol * scale, viol,
                            tol * scale))
        if require_definite:
            lam = float(np.linalg.eigvalsh(0.5 * (arr + arr.T))[0])
            checks.append(Check(f"{name} positive definite", lam > 0.0, lam, 0.0))
    return ValidationReport(checks=checks)
