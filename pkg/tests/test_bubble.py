import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bubblelab.bubble import (Bubble, alpha_n, bubble_energy,
                              bubble_energy_quadrature, c_n, crit_boundary,
                              crit_interior, jacobi, residual_linearized,
                              residual_model)
from bubblelab.errors import DomainError
from bubblelab.model import ProblemPoint


def test_constants(pt8):
    assert c_n(8) == pytest.approx(28.0 / 6.0, rel=1e-15)
    assert crit_interior(8) == pytest.approx(16.0 / 6.0, rel=1e-15)
    assert crit_boundary(8) == pytest.approx(14.0 / 6.0, rel=1e-15)
    # (4*8*7)^{3/2} / 56^{3/2} = 4^{3/2}
    assert Bubble(pt8).C == pytest.approx(8.0, rel=1e-14)
    assert alpha_n(8) == pytest.approx(224.0 ** 1.5, rel=1e-14)


def test_bubble_needs_supercritical_mean_curvature():
    with pytest.raises(DomainError):
        Bubble(ProblemPoint(n=8, K=-56.0, H=0.2))
    with pytest.raises(DomainError):
        Bubble(ProblemPoint(n=8, K=-56.0, H=2.0), delta=-1.0)


def test_residuals_at_fixed_points(pt8):
    b = Bubble(pt8)
    for x in (np.array([0.5, 0, 0, 0, 0, 0, 0, 1.0]),
              np.array([0, 0, 0, 0, 0, 0, 0, 0.0]),
              np.array([3.0, -2.0, 1.0, 0, 0, 0, 0, 0.0])):
        interior, boundary = residual_model(b, x)
        assert abs(interior) < 1e-12
        if x[-1] == 0.0:
            assert abs(boundary) < 1e-12
        else:
            assert boundary is None


def test_residual_model_rejects_lower_halfspace(pt8):
    with pytest.raises(DomainError):
        residual_model(Bubble(pt8), np.array([0, 0, 0, 0, 0, 0, 0, -1.0]))


@given(seed=st.integers(0, 10000))
@settings(max_examples=30, deadline=None)
def test_residuals_random_points(seed):
    pt = ProblemPoint(n=8, K=-56.0, H=2.0)
    b = Bubble(pt)
    rng = np.random.default_rng(seed)
    x = rng.normal(size=8) * rng.lognormal(0.0, 1.0)
    x[-1] = abs(x[-1])
    interior, _ = residual_model(b, x)
    assert abs(interior) < 1e-8


def test_jacobi_fields_solve_linearized_problem(pt8, pt10, rng):
    for pt in (pt8, pt10):
        b = Bubble(pt)
        n = pt.n
        pts = rng.normal(size=(10, n))
        pts[:, -1] = np.abs(pts[:, -1])
        pts[::2, -1] = 0.0
        for i in range(1, n + 1):
            for x in pts:
                interior, boundary = residual_linearized(b, i, x)
                assert abs(interior) < 1e-8
                if boundary is not None:
                    assert abs(boundary) < 1e-8


def test_jacobi_values_are_finite(pt8, rng):
    b = Bubble(pt8)
    x = rng.normal(size=8)
    x[-1] = abs(x[-1])
    vals = [jacobi(b, i, x) for i in range(1, 9)]
    assert np.all(np.isfinite(vals))
    with pytest.raises(DomainError):
        jacobi(b, 0, x)
    with pytest.raises(DomainError):
        jacobi(b, 9, x)


def test_energy_closed_form_vs_quadrature(pt8, pt10):
    for pt in (pt8, pt10):
        closed = bubble_energy(pt)
        direct = bubble_energy_quadrature(pt, rel_tol=1e-9)
        assert closed == pytest.approx(direct, rel=1e-7)


def test_energy_frozen_value(pt8):
    assert bubble_energy(pt8) == pytest.approx(1.0767440997271294, rel=1e-13)


def test_energy_decreasing_in_D():
    n, K = 8, -56.0
    h_of_d = lambda d: d * np.sqrt(abs(K) / (n * (n - 1.0)))
    es = [bubble_energy(ProblemPoint(n=n, K=K, H=h_of_d(d)))
          for d in np.linspace(1.1, 5.0, 15)]
    assert all(e2 < e1 for e1, e2 in zip(es, es[1:]))


def test_energy_scaling_in_K(pt8):
    # J ~ |K|^{-(n-2)/2} at fixed D
    base = bubble_energy(pt8)
    quad = bubble_energy(ProblemPoint(n=8, K=4.0 * pt8.K, H=2.0 * pt8.H))
    assert quad / base == pytest.approx(4.0 ** -3.0, rel=1e-12)


def test_radial_slice_matches_full_evaluation(pt8, rng):
    b = Bubble(pt8)
    for _ in range(5):
        x = rng.normal(size=8)
        x[-1] = abs(x[-1])
        r = float(np.linalg.norm(x[:-1]))
        assert b.U_rx(r, x[-1]) == pytest.approx(b.U(x), rel=1e-14)


def test_translated_dilated_bubble_still_solves(pt8):
    b = Bubble(pt8, delta=0.7, center=np.array([1.0, 0, 0, 0, 0, 0, 0]))
    x = np.array([0.3, -0.2, 0, 0, 0, 0, 0, 0.0])
    interior, boundary = residual_model(b, x)
    assert abs(interior) < 1e-12
    assert abs(boundary) < 1e-12
