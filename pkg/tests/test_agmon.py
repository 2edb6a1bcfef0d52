import numpy as np
import pytest
from scipy.integrate import quad

from magagmon.agmon import (AgmonParams, BetaBarQuery, ConcaveBound, ConfineBound,
                            NU1_DISC, OptimizerSpec, agmon_distance, agmon_weight,
                            beta_bar, carmona_bound, classically_allowed,
                            corollary_bounds, path_length_functional, weight_profile)
from magagmon.fields import (concave_field, constant_field, custom_potential,
                             gaussian_bump_field, grid_field, landau_gauge,
                             radial_quadratic_field, split_field)
from magagmon.geometry import Domain, Polyline, make_grid


def _plane_grid(half, n):
    return make_grid(Domain.plane(), n, n, box=(-half, half, -half, half))


# ---------------------------------------------------------------------------
# beta_bar
# ---------------------------------------------------------------------------

def test_beta_bar_constant_closed_form():
    # beta constant: (b0^2/4)(|p-x|^2 + 2t), exact for any GH order >= 2
    b0 = 1.7
    x, p, t = (0.5, -0.25), (2.0, 1.0), 0.8
    expected = (b0 ** 2 / 4) * ((2.0 - 0.5) ** 2 + (1.0 + 0.25) ** 2 + 2 * t)
    for n_gh in (2, 5, 20):
        q = BetaBarQuery(constant_field(b0), x, p, t, n_gh=n_gh, n_s=4)
        assert beta_bar(q) == pytest.approx(expected, abs=1e-10 * expected)


def test_beta_bar_zero_field():
    q = BetaBarQuery(constant_field(0.0), (0.0, 0.0), (1.0, 2.0), 0.5)
    assert beta_bar(q) == 0.0
    est = beta_bar(BetaBarQuery(constant_field(0.0), (0.0, 0.0), (1.0, 2.0), 0.5,
                                method="mc", mc_samples=2000, seed=1))
    assert est.value == 0.0 and est.stderr == 0.0


def test_beta_bar_time_zero_analytic():
    # t=0: |x-p|^2 (int_0^1 s beta(s x + (1-s) p) ds)^2; for beta = b0|p|^2,
    # x=0, p=(1,0): inner integral b0 * int s(1-s)^2 ds = b0/12
    b0 = 2.0
    q = BetaBarQuery(radial_quadratic_field(b0), (0.0, 0.0), (1.0, 0.0), 0.0,
                     n_gh=8, n_s=12)
    assert beta_bar(q) == pytest.approx((b0 / 12.0) ** 2, rel=1e-12)


def test_beta_bar_gh_vs_mc_cross_validation():
    q_gh = BetaBarQuery(radial_quadratic_field(1.0), (0.0, 0.0), (1.0, 0.0), 0.25,
                        n_gh=40, n_s=16)
    val = beta_bar(q_gh)
    est = beta_bar(BetaBarQuery(radial_quadratic_field(1.0), (0.0, 0.0), (1.0, 0.0),
                                0.25, n_s=16, method="mc", mc_samples=400_000, seed=2))
    assert abs(val - est.value) <= 3 * est.stderr


def test_beta_bar_nonnegative_catalog():
    rng = np.random.default_rng(3)
    fields = [constant_field(1.3), radial_quadratic_field(0.8),
              concave_field(2.0, 0.5), gaussian_bump_field(1.0, 0.7)]
    for beta in fields:
        for _ in range(5):
            x, p = rng.normal(size=2), rng.normal(size=2)
            t = rng.uniform(0.0, 1.0)
            assert beta_bar(BetaBarQuery(beta, x, p, t, n_gh=10, n_s=8)) >= 0.0


def test_beta_bar_rejects_nonfinite_field():
    bad = custom_potential  # placeholder to keep import; real field below
    xs = np.linspace(-1, 1, 5)
    values = np.ones((5, 5))
    field = grid_field(xs, xs, values)
    object.__setattr__(field, "fn", lambda p: np.full(p.shape[:-1], np.nan))
    with pytest.raises(ValueError, match="segment"):
        beta_bar(BetaBarQuery(field, (0.0, 0.0), (1.0, 0.0), 0.5, n_gh=4, n_s=4))


# ---------------------------------------------------------------------------
# weight
# ---------------------------------------------------------------------------

def test_weight_clamp_boundary_and_positive_branch():
    params_eq = AgmonParams(lam=NU1_DISC, a=1.0)  # lam = nu1/a^2: clamp level 0
    q0 = BetaBarQuery(constant_field(0.0), (0.0, 0.0), (0.0, 0.0), 0.0)
    assert agmon_weight(q0, params_eq) == 0.0
    params_lo = AgmonParams(lam=1.0, a=1.0)
    assert agmon_weight(q0, params_lo) == pytest.approx(
        np.sqrt(2 * (NU1_DISC - 1.0)), rel=1e-12)


def test_weight_constant_field_spec_arithmetic():
    # b0=2, x=p, t=1, lam=b0/2=1, a=1: beta_bar = 2, weight = sqrt(2 - 2(1 - nu1))
    q = BetaBarQuery(constant_field(2.0), (0.7, -0.1), (0.7, -0.1), 1.0, n_gh=6)
    w = agmon_weight(q, AgmonParams(lam=1.0, a=1.0))
    assert w == pytest.approx(np.sqrt(2.0 - 2.0 * (1.0 - NU1_DISC)), rel=1e-12)


def test_weight_clamps_to_zero():
    q = BetaBarQuery(constant_field(0.0), (0.0, 0.0), (1.0, 0.0), 0.1)
    assert agmon_weight(q, AgmonParams(lam=50.0, a=1.0)) == 0.0


def test_weight_monotone_in_lambda_and_tube():
    q = BetaBarQuery(constant_field(1.0), (0.0, 0.0), (2.0, 0.0), 0.5)
    lams = np.linspace(0.1, 4.0, 9)
    ws = [agmon_weight(q, AgmonParams(lam=l, a=1.0)) for l in lams]
    assert all(b <= a + 1e-12 for a, b in zip(ws, ws[1:]))
    tubes = [agmon_weight(q, AgmonParams(lam=1.0, a=1.0, nu1=n)) for n in (1.0, 2.0, 4.0)]
    assert tubes[0] <= tubes[1] <= tubes[2]


# ---------------------------------------------------------------------------
# classically allowed region
# ---------------------------------------------------------------------------

def test_allowed_region_landau_radius():
    # (1/2)|A|^2 <= lam with A = (b0/2)(-p2, p1): |p| <= sqrt(8 lam)/b0; radius 2
    grid = _plane_grid(4.0, 160)
    region = classically_allowed(landau_gauge(1.0), 0.5, grid)
    nodes = grid.nodes()
    r = np.hypot(nodes[..., 0], nodes[..., 1])
    assert np.array_equal(region.mask, r <= 2.0) or np.array_equal(region.mask, r < 2.0)
    radii = np.hypot(region.boundary_points[:, 0], region.boundary_points[:, 1])
    assert np.max(np.abs(radii - 2.0)) < 0.05
    assert not region.contains((3.0, 0.0))
    assert region.contains((0.5, 0.5))


def test_allowed_region_zero_potential_everything():
    grid = _plane_grid(1.0, 16)
    a0 = custom_potential(lambda p: np.zeros_like(p), divergence_free=True)
    region = classically_allowed(a0, 0.3, grid)
    assert region.mask.all()
    assert len(region.boundary_points) == 0


def test_allowed_region_lambda_zero_only_zeros_of_a():
    # 5x5 cell-centered grid on [-1,1]^2 has a node exactly at the origin
    grid = _plane_grid(1.0, 5)
    region = classically_allowed(landau_gauge(1.0), 0.0, grid)
    assert region.mask.sum() == 1
    assert region.mask[2, 2]


def test_allowed_region_empty_gives_inf_distance():
    grid = _plane_grid(2.0, 32)
    region = classically_allowed(landau_gauge(1.0), -1.0, grid)
    assert region.empty
    res = agmon_distance((3.0, 0.0), landau_gauge(1.0), constant_field(1.0),
                         AgmonParams(lam=-1.0), OptimizerSpec.light(grid))
    assert res.distance == np.inf and res.polyline is None


def test_allowed_region_convention_flag():
    grid = _plane_grid(6.0, 120)
    # unsquared convention: (1/2)|A| <= lam -> |p| <= 4 lam / b0; radius 2 at lam=0.5
    region = classically_allowed(landau_gauge(1.0), 0.5, grid, convention="half-abs")
    radii = np.hypot(region.boundary_points[:, 0], region.boundary_points[:, 1])
    assert np.max(np.abs(radii - 2.0)) < 0.1


# ---------------------------------------------------------------------------
# path length functional
# ---------------------------------------------------------------------------

def test_functional_zero_weight_for_any_path():
    beta = constant_field(0.0)
    params = AgmonParams(lam=NU1_DISC, a=1.0)  # clamp level exactly 0
    rng = np.random.default_rng(4)
    for _ in range(3):
        verts = rng.normal(size=(6, 2))
        poly = Polyline(np.linspace(0, 1, 6), verts)
        out = path_length_functional(poly, verts[0], params, beta, refine_tol=None)
        assert out.value == 0.0


def test_functional_constant_path_is_zero():
    poly = Polyline(np.array([0.0, 1.0]), np.array([[1.0, 2.0], [1.0, 2.0]]))
    out = path_length_functional(poly, (1.0, 2.0), AgmonParams(lam=0.1), constant_field(5.0))
    assert out.value == 0.0


def test_functional_requires_matching_start():
    poly = Polyline.line((0.0, 0.0), (1.0, 0.0))
    with pytest.raises(ValueError, match="starts at"):
        path_length_functional(poly, (0.5, 0.0), AgmonParams(lam=0.1), constant_field(1.0))


def test_functional_straight_line_quadrature_oracle():
    # b0=1, path (0,0)->(4,0), lam=1/2, a=1: the weight is
    # sqrt((1/4)(16 t^2 + 2t) + 2(nu1 - 1/2)) and the speed is 4
    b0, d = 1.0, 4.0
    params = AgmonParams(lam=0.5, a=1.0)
    beta = constant_field(b0)
    poly = Polyline.line((0.0, 0.0), (d, 0.0), n_segments=16)
    out = path_length_functional(poly, (0.0, 0.0), params, beta, refine_tol=1e-5,
                                 max_refine=10)
    oracle = quad(lambda t: d * np.sqrt(0.25 * (d * d * t * t + 2 * t)
                                        + 2 * (NU1_DISC - 0.5)), 0.0, 1.0)[0]
    assert out.converged
    assert out.value == pytest.approx(oracle, rel=1e-4)
    assert out.value >= b0 * d ** 2 / 8.0  # the uniform-field chain threshold


def test_functional_refinement_converges():
    poly = Polyline.line((0.0, 0.0), (3.0, 1.0), n_segments=4)
    params = AgmonParams(lam=0.5)
    coarse = path_length_functional(poly, (0.0, 0.0), params, constant_field(1.0),
                                    refine_tol=None)
    refined = path_length_functional(poly, (0.0, 0.0), params, constant_field(1.0),
                                     refine_tol=1e-3)
    assert refined.converged
    assert abs(refined.value - coarse.value) / refined.value < 0.01


def test_functional_frozen_time_is_parametrization_invariant():
    # same vertex chain, warped time stamps: spatial-only weight is identical
    beta = constant_field(1.0)
    params = AgmonParams(lam=0.5)
    verts = np.array([[0, 0], [1.5, 0.4], [2.5, -0.2], [4, 0]], dtype=float)
    t0 = np.linspace(0, 1, 4)
    poly = Polyline(t0, verts)
    warped = Polyline(t0 ** 2, verts)
    v1 = path_length_functional(poly, (0, 0), params, beta, refine_tol=None,
                                freeze_time=0.0).value
    v2 = path_length_functional(warped, (0, 0), params, beta, refine_tol=None,
                                freeze_time=0.0).value
    assert v1 == v2
    # live weight moves under the warp (measured, not asserted equal)
    l1 = path_length_functional(poly, (0, 0), params, beta, refine_tol=None).value
    l2 = path_length_functional(warped, (0, 0), params, beta, refine_tol=None).value
    assert l1 != l2


# ---------------------------------------------------------------------------
# distance optimization
# ---------------------------------------------------------------------------

def test_distance_zero_inside_region():
    grid = _plane_grid(4.0, 64)
    res = agmon_distance((0.5, 0.0), landau_gauge(1.0), constant_field(1.0),
                         AgmonParams(lam=0.5), OptimizerSpec.light(grid))
    assert res.distance == 0.0
    assert res.polyline.length() == 0.0


def test_distance_euclidean_scaling_for_zero_field():
    # A = grad(p1 p2) = (p2, p1) has curl 0; E
    # = {(1/2)|A|^2 <= lam} is the disc of radius sqrt(2 lam); with beta = 0
    # the weight is the constant sqrt(2(nu1 - lam)) and the metric is Euclidean
    lam = 0.5
    a = custom_potential(lambda p: np.stack([p[..., 1], p[..., 0]], axis=-1),
                         divergence_free=True)
    grid = _plane_grid(4.0, 200)
    x = np.array([3.0, 0.0])
    c = np.sqrt(2 * (NU1_DISC - lam))
    res = agmon_distance(x, a, constant_field(0.0), AgmonParams(lam=lam),
                         OptimizerSpec.light(grid, seed=5))
    assert res.distance == pytest.approx(c * 2.0, rel=5e-3)
    # straight-line minimizer: the path stays near the segment [(1,0), (3,0)]
    assert np.max(np.abs(res.polyline.vertices[:, 1])) < 0.05


def test_distance_constant_field_lower_bound():
    # uniform-field chain: rho >= b0 d^2 / 8 at d = 2
    b0, d = 1.0, 2.0
    grid = _plane_grid(6.0, 160)
    x = np.array([2.0 + d, 0.0])
    res = agmon_distance(x, landau_gauge(b0), constant_field(b0),
                         AgmonParams(lam=b0 / 2), OptimizerSpec.light(grid, seed=6))
    assert res.distance >= (b0 * d ** 2 / 8.0) * 0.99
    assert res.distance <= res.diagnostics["straight_line_value"] + 1e-12


def test_distance_is_lower_envelope_of_feasible_paths():
    # any hand-built path from x to the boundary upper-bounds the distance
    b0 = 1.0
    grid = _plane_grid(6.0, 120)
    params = AgmonParams(lam=b0 / 2)
    beta = constant_field(b0)
    x = np.array([4.0, 0.0])
    res = agmon_distance(x, landau_gauge(b0), beta, params,
                         OptimizerSpec.light(grid, seed=7))
    rng = np.random.default_rng(8)
    for _ in range(4):
        angle = rng.uniform(-0.6, 0.6)
        y = 2.0 * np.array([np.cos(angle), np.sin(angle)])
        mid = 0.5 * (x + y) + rng.normal(scale=0.4, size=2)
        verts = np.stack([x, mid, y])
        poly = Polyline(np.array([0.0, 0.5, 1.0]), verts)
        val = path_length_functional(poly, x, params, beta, n_gh=8, n_s=8,
                                     refine_tol=None).value
        assert res.distance <= val + 1e-9


def test_distance_result_matches_functional_on_stored_path():
    grid = _plane_grid(5.0, 96)
    params = AgmonParams(lam=0.5)
    beta = constant_field(1.0)
    opt = OptimizerSpec.light(grid, seed=9)
    x = np.array([3.5, 0.5])
    res = agmon_distance(x, landau_gauge(1.0), beta, params, opt)
    recomputed = path_length_functional(res.polyline, x, params, beta,
                                        n_gh=opt.n_gh, n_s=opt.n_s,
                                        refine_tol=None).value
    assert abs(res.distance - recomputed) <= 1e-9


# ---------------------------------------------------------------------------
# corollary and splitting bounds
# ---------------------------------------------------------------------------

def test_concave_bound_collapses_at_constant_field():
    # beta identical to its infimum: the integrand reduces to the flat clamp
    beta = constant_field(1.0)
    params = AgmonParams(lam=0.5)
    grid = _plane_grid(3.0, 24)
    poly = Polyline.line((2.0, 0.0), (1.0, 0.0), n_segments=6)
    val = corollary_bounds(ConcaveBound(beta_inf=1.0), (2.0, 0.0), poly, beta,
                           params, grid)
    flat = np.sqrt(max(-params.clamp_level, 0.0))
    assert val == pytest.approx(flat * poly.length(), rel=1e-12)


def test_confine_bound_zero_at_threshold():
    beta = radial_quadratic_field(1.0)
    params = AgmonParams(lam=0.5)
    grid = _plane_grid(3.0, 24)
    x = np.array([1.0, 0.0])
    y = np.array([-1.0 + np.sqrt(2.0), 0.0])  # |x + y|^2 = 2
    poly = Polyline.line(x, y)
    val = corollary_bounds(ConfineBound(beta0=1.0), x, poly, beta, params, grid)
    assert val == pytest.approx(0.0, abs=1e-12)


def test_confine_bound_monotone_along_ray():
    beta = radial_quadratic_field(1.0)
    grid = _plane_grid(8.0, 96)
    params = AgmonParams(lam=0.5)
    opt = OptimizerSpec.light(grid, seed=10)
    gauge = None
    from magagmon.fields import transversal_gauge
    gauge = transversal_gauge(beta, quad_n=24)
    vals = []
    for r in (3.0, 4.0, 5.0, 6.0):
        x = np.array([r, 0.0])
        res = agmon_distance(x, gauge, beta, params, opt)
        vals.append(corollary_bounds(ConfineBound(beta0=1.0), x, res.polyline,
                                     beta, params, grid))
    assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))


def test_confine_screen_refuses_with_witness():
    grid = _plane_grid(3.0, 24)
    poly = Polyline.line((2.0, 0.0), (1.0, 0.0))
    with pytest.raises(ValueError, match="confining hypothesis fails at"):
        corollary_bounds(ConfineBound(beta0=1.0), (2.0, 0.0), poly,
                         constant_field(1.0), AgmonParams(lam=0.5), grid)


def test_concave_screen_refuses_with_witness():
    grid = _plane_grid(3.0, 24)
    poly = Polyline.line((2.0, 0.0), (1.0, 0.0))
    with pytest.raises(ValueError, match="concavity fails"):
        corollary_bounds(ConcaveBound(beta_inf=0.0), (2.0, 0.0), poly,
                         radial_quadratic_field(1.0), AgmonParams(lam=0.5), grid)


def test_carmona_constant_w_terms():
    w0, T, lam = 1.0, 2.0, 0.2
    grid = _plane_grid(3.0, 48)
    split = split_field(constant_field(w0), constant_field(0.0), grid)
    poly = Polyline.line((1.5, 0.0), (0.0, 0.0), n_segments=8)
    params = AgmonParams(lam=lam, a=1.0)
    out = carmona_bound((1.5, 0.0), T, poly, split, params, lam, grid)
    assert out.w_tube_min == pytest.approx(w0)
    assert out.u_sup == 0.0
    assert out.tube_term == pytest.approx(np.exp(-T * w0 / 2), rel=1e-12)
    ell = poly.length()
    expected_t1 = np.exp(-0.5 * T * w0 ** 2 - NU1_DISC * T - ell ** 2 / (2 * T))
    assert out.gaussian_term == pytest.approx(expected_t1, rel=1e-12)
    assert out.path_length == pytest.approx(1.5, rel=1e-12)


def test_carmona_decays_for_large_horizon():
    # lam < W/2 makes both terms eventually decay; check monotone tail -> 0
    grid = _plane_grid(3.0, 48)
    split = split_field(constant_field(1.0), constant_field(0.0), grid)
    poly = Polyline.line((1.0, 0.0), (0.0, 0.0), n_segments=4)
    params = AgmonParams(lam=0.2, a=1.0)
    horizons = np.linspace(2.0, 20.0, 10)
    vals = [carmona_bound((1.0, 0.0), T, poly, split, params, 0.2, grid).value
            for T in horizons]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    # tail rate ~ e^{T (lam - w0/2)} = e^{-0.3 T}
    assert vals[-1] < 1e-2 * vals[0]


def test_carmona_refuses_negative_u():
    grid = _plane_grid(2.0, 24)
    w = constant_field(1.0)
    u_bad = concave_field(0.5, 2.0)  # dips below zero away from origin
    split = type(w)(lambda p: w.fn(p) - u_bad.fn(p), "split", None, w, u_bad)
    poly = Polyline.line((1.0, 0.0), (0.0, 0.0))
    with pytest.raises(ValueError, match="negative"):
        carmona_bound((1.0, 0.0), 1.0, poly, split, AgmonParams(lam=0.1), 0.1, grid)
