import numpy as np
import pytest
from scipy import stats

from bretp import (AcidDistribution, BoundaryMatrix, CtmcInput, DonsoffParams, HawkesParams,
                   Partition, RandomTelegraphParams, acid, acid_pdf, boundary_density,
                   build_boundary_matrix, dark_current_model, direct_fixed_point, donsoff_model,
                   exponential_renewal, hawkes_model, random_telegraph_model, snyder_model,
                   solve_boundary_density, wasserstein1)
from bretp.errors import (MeshTooCoarse, NotConverged, QuasiPositivityUnverified, SingularKernel,
                          SupportNotCovered, UnsupportedModel)

from oracles import w1_histograms

DARK = RandomTelegraphParams(0.1, 0.1, 1.0, 0.1)


@pytest.fixture(scope="module")
def dark():
    return dark_current_model(DARK)


@pytest.fixture(scope="module")
def hawkes():
    return hawkes_model(HawkesParams.from_moments(1.0, 2.0, 1.0))


def test_partition_geometry():
    part = Partition(np.array([0.0, 1.0]), np.array([2.0, 2.0]), (4, 2), 3)
    assert part.size == 8
    assert part.volume == pytest.approx(0.25)
    reps = part.representatives()
    assert reps.shape == (8, 9, 2)
    raw = part.raw_index(reps.reshape(-1, 2).T)
    cells = part.flat_index(raw).reshape(8, 9)
    assert np.all(cells == np.arange(8)[:, None])
    assert part.raw_index(np.array([[-1.0], [1.5]]))[0, 0] == -1


def test_matrix_paths_agree_on_dark_current(dark):
    part = Partition.for_model(dark, 60)
    A = build_boundary_matrix(dark, part, method="analytic").dense()
    B = build_boundary_matrix(dark, part, method="ode").dense()
    assert np.abs(A - B).max() < 1e-7
    assert np.allclose(A.sum(0), 1.0, atol=1e-12)


def test_batched_matrix_close_to_analytic(dark):
    part = Partition.for_model(dark, 60)
    A = build_boundary_matrix(dark, part, method="analytic")
    C = build_boundary_matrix(dark, part, method="batched", dt=0.005)
    pa = solve_boundary_density(A, norm=dark.mean_intensity)
    pc = solve_boundary_density(C, norm=dark.mean_intensity)
    assert np.abs(pa.values - pc.values).sum() * part.volume < 5e-3


def test_fixed_point_normalisation_and_residual(dark):
    p0, I = boundary_density(dark, cells=200)
    A = I.dense()
    a = p0.values
    assert np.abs(A @ a - a).sum() / a.sum() < 1e-8
    assert p0.integral == pytest.approx(dark.mean_intensity, rel=1e-10)
    assert p0.quasi_positive


def test_acid_mass_consistency(dark):
    # sum_j w a_j int P = 1 is the normalisation identity; it is not imposed
    a, p0, _ = acid(dark, cells=400)
    assert a.total_mass == pytest.approx(1.0, abs=1e-4)
    assert a.mean == pytest.approx(DARK.mean_intensity, abs=1e-3)


def test_telegraph_acid_mean_and_support():
    p = RandomTelegraphParams(0.1, 0.1)
    a, p0, I = acid(random_telegraph_model(p), bins=500)
    assert I.method == "trivial"
    assert a.mean == pytest.approx(0.5, abs=1e-3)
    assert a.edges[0] == pytest.approx(p.roots[0])
    assert a.cdf(p.roots[0]) == 0.0


def test_snyder_model_matches_dark_current_acid(dark):
    # exact filter in probability coordinates and in intensity coordinates
    edges = np.linspace(0.1, 1.1, 201)
    a_dc, _, _ = acid(dark, cells=150, edges=edges)
    sm = snyder_model(CtmcInput.telegraph(DARK))
    a_sn, _, _ = acid(sm, cells=150, edges=edges)
    assert wasserstein1(a_dc, a_sn) < 2e-3


def test_exponential_renewal_is_point_mass():
    a, _, _ = acid(exponential_renewal(1.5), bins=10)
    assert a.mean == pytest.approx(1.5, rel=1e-6)
    assert wasserstein1(a, AcidDistribution.point_mass(1.5)) < 1e-5


def test_hawkes_acid_moments(hawkes):
    a, p0, I = acid(hawkes, cells=200, reps=3)
    assert a.mean == pytest.approx(2.0, abs=0.02)
    assert a.variance == pytest.approx(1.0, abs=0.05)
    assert 0 < p0.truncated_mass < 0.01


def test_direct_method_dark_current(dark):
    a, _, _ = acid(dark, cells=1000)
    d = direct_fixed_point(dark, grid=1000)
    # the eigenvalue departs from one by the kernel quadrature error
    assert d.diagnostics["eigenvalue"] == pytest.approx(1.0, abs=1e-3)
    assert wasserstein1(a, d) < 1e-3


def test_direct_method_errors(dark):
    with pytest.raises(SingularKernel):
        direct_fixed_point(dark, grid=np.linspace(0.1, 1.1, 11))
    with pytest.raises(UnsupportedModel):
        direct_fixed_point(donsoff_model(DonsoffParams(0.04, 1.6, 1.6)))


def test_support_not_covered(dark):
    part = Partition(np.array([0.7]), np.array([1.1]), (20,), 1)
    with pytest.raises(SupportNotCovered):
        build_boundary_matrix(dark, part)


def test_not_converged_and_quasi_positivity():
    part = Partition(np.array([0.0]), np.array([1.0]), (2,), 1)
    eps = 1e-4
    slow = BoundaryMatrix(np.array([[1 - eps, 2 * eps], [eps, 1 - 2 * eps]]), part, np.zeros(2))
    with pytest.warns(QuasiPositivityUnverified), pytest.raises(NotConverged):
        solve_boundary_density(slow, L=1, max_polish=0)
    p = solve_boundary_density(slow, L=20)
    assert np.allclose(p.values / p.values.sum(), [2 / 3, 1 / 3], atol=1e-9)
    ident = BoundaryMatrix(np.eye(2), part, np.zeros(2))
    with pytest.warns(QuasiPositivityUnverified):
        p = solve_boundary_density(ident, L=2)
    assert p.quasi_positive is False


def test_mesh_too_coarse_warning(hawkes):
    p0, _ = boundary_density(hawkes, cells=50)
    with pytest.warns(MeshTooCoarse):
        acid_pdf(hawkes, p0, bins=1)


# ---------------------------------------------------------------------------
# Wasserstein-1

def _random_hist(rng, k=40):
    edges = np.sort(rng.uniform(0, 5, k + 1))
    w = rng.random(k)
    return AcidDistribution(edges, w)


def test_w1_matches_quadrature_oracle():
    rng = np.random.default_rng(3)
    for _ in range(5):
        a, b = _random_hist(rng), _random_hist(rng)
        assert wasserstein1(a, b) == pytest.approx(
            w1_histograms(a.edges, a.weights, b.edges, b.weights), abs=2e-5)


def test_w1_metric_properties():
    rng = np.random.default_rng(4)
    a, b, c = _random_hist(rng), _random_hist(rng), _random_hist(rng)
    assert wasserstein1(a, a) == pytest.approx(0.0, abs=1e-14)
    assert wasserstein1(a, b) == pytest.approx(wasserstein1(b, a))
    assert wasserstein1(a, c) <= wasserstein1(a, b) + wasserstein1(b, c) + 1e-12
    shifted = AcidDistribution(a.edges + 0.3, a.weights)
    assert wasserstein1(a, shifted) == pytest.approx(0.3)


def test_w1_atoms_and_samples():
    x = stats.norm(1.0, 0.5).rvs(size=20000, random_state=1)
    edges = np.linspace(-2, 4, 601)
    h = AcidDistribution.from_samples(x, edges)
    assert wasserstein1(h, AcidDistribution.point_mass(1.0)) == pytest.approx(
        0.5 * np.sqrt(2 / np.pi), abs=0.01)
    assert wasserstein1(AcidDistribution.point_mass(0.2), AcidDistribution.point_mass(1.0)) \
        == pytest.approx(0.8)
