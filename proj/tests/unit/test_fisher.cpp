#include "helpers.hpp"

#include "fedfisher/center.hpp"
#include "fedfisher/fisher.hpp"

#include <doctest.h>

#include <filesystem>

using namespace fedfisher;

namespace {

struct Inputs {
  MEstimatorRound mest;
  GradientRound grads;
};

Inputs gather(Federation& fed, const Vector& theta) {
  Inputs in{collect_m_estimators(fed), {}};
  in.grads = broadcast_and_collect_gradients(fed, theta);
  return in;
}

FisherEstimate mg(const Inputs& in) {
  return mg_estimate(in.mest.theta_hats, in.mest.theta_bar, in.grads.grads, in.grads.grad_bar);
}
FisherEstimate gm(const Inputs& in) {
  return gm_estimate(in.mest.theta_hats, in.mest.theta_bar, in.grads.grads, in.grads.grad_bar);
}

/// Applies s -> a * s to every covariate vector.
std::vector<CenterData> transform(const std::vector<CenterData>& centers, const Matrix& a) {
  std::vector<CenterData> out;
  for (const CenterData& c : centers) {
    CenterData t(c.id(), c.dim());
    for (std::size_t r = 0; r < c.size(); ++r) {
      const SampleRef x = c.sample(r);
      const Vector s = a * Eigen::Map<const Vector>(x.s.data(), static_cast<Eigen::Index>(x.s.size()));
      t.add_sample(x.y, std::span<const double>(s.data(), c.dim()));
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

TEST_CASE("quadratic loss with a shared design is recovered exactly") {
  const std::size_t d = 3;
  const ModelSpec spec = ModelSpec::standard(Family::GaussianQuadratic, d, CovariateLaw::StdNormal, 1);
  Federation fed(spec, testutil::shared_design_centers(8, 40, d, 77));
  const Vector theta = Vector::Constant(d, 0.3);
  const Inputs in = gather(fed, theta);
  const Matrix h = local_hessian_at(fed, theta);
  CHECK((mg(in).matrix - h).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((gm(in).matrix - h.inverse()).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((gm(in).fisher() - h).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((mg(in).solve(h * Vector::Ones(d)) - Vector::Ones(d)).norm() < 1e-10);
  CHECK((gm(in).solve(h * Vector::Ones(d)) - Vector::Ones(d)).norm() < 1e-10);
}

TEST_CASE("estimators are equivariant under orthogonal and scale changes") {
  const std::size_t d = 3;
  const ModelSpec spec = ModelSpec::standard(Family::Logistic, d, CovariateLaw::StdNormal, 2);
  const auto centers = generate_federation(spec, 20, 200);
  const Vector theta = Vector::Constant(d, 0.4);
  Federation base(spec, centers);
  const Inputs in = gather(base, theta);

  SUBCASE("rotation") {
    Rng rng(4);
    Matrix g(d, d);
    for (Eigen::Index k = 0; k < g.size(); ++k) g.data()[k] = rng.normal();
    const Matrix r = Eigen::HouseholderQR<Matrix>(g).householderQ();
    Federation rotated(spec, transform(centers, r));
    const Inputs rin = gather(rotated, r * theta);
    const Matrix want_mg = r * mg(in).matrix * r.transpose();
    const Matrix want_gm = r * gm(in).matrix * r.transpose();
    CHECK((mg(rin).matrix - want_mg).norm() < 1e-6 * want_mg.norm());
    CHECK((gm(rin).matrix - want_gm).norm() < 1e-6 * want_gm.norm());
  }
  SUBCASE("scale") {
    const double c = 2.5;
    Federation scaled(spec, transform(centers, c * Matrix::Identity(d, d)));
    const Inputs sin = gather(scaled, theta / c);
    CHECK((mg(sin).matrix - c * c * mg(in).matrix).norm() < 1e-6 * c * c * mg(in).matrix.norm());
    CHECK((gm(sin).matrix - gm(in).matrix / (c * c)).norm() < 1e-6 * gm(in).matrix.norm());
  }
}

TEST_CASE("too few centers or collapsed estimates are singular") {
  const std::size_t d = 3;
  const ModelSpec spec = ModelSpec::standard(Family::Logistic, d, CovariateLaw::StdNormal, 9);
  Federation fed(spec, generate_federation(spec, 3, 100));
  const Inputs in = gather(fed, Vector::Zero(d));
  CHECK_THROWS_AS(mg(in), SingularDesign);
  CHECK_THROWS_AS(gm(in), SingularDesign);

  std::vector<Vector> same(6, Vector::Ones(d));
  std::vector<Vector> grads;
  Rng rng(1);
  for (int i = 0; i < 6; ++i) grads.push_back(testutil::random_vector(rng, d));
  try {
    mg_estimate(same, Vector::Ones(d), grads, Vector::Zero(d));
    FAIL("expected SingularDesign");
  } catch (const SingularDesign& e) {
    CHECK(e.condition() > kMaxGramCondition);
  }
}

TEST_CASE("spectral norm agrees with power iteration") {
  Rng rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix a(4, 4);
    for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = rng.normal();
    Vector v = Vector::Ones(4);
    double sigma = 0.0;
    for (int it = 0; it < 2000; ++it) {
      v = a.transpose() * (a * v);
      sigma = std::sqrt(v.norm());
      v.normalize();
    }
    sigma = (a * v).norm();
    CHECK(spectral_norm(a) == doctest::Approx(sigma).epsilon(1e-8));
  }
  CHECK(spectral_norm(Matrix::Identity(3, 3) * 2.0) == doctest::Approx(2.0));
}

TEST_CASE("relative errors") {
  const Matrix i0 = Vector(Eigen::Vector2d(2.0, 1.0)).asDiagonal();
  const Matrix a = Vector(Eigen::Vector2d(2.2, 1.0)).asDiagonal();
  CHECK(delta1(a, i0) == doctest::Approx(0.1));
  CHECK(delta2(a, i0) == doctest::Approx(std::abs(1 / 2.2 - 0.5)));
  CHECK(delta2_from_inverse(a.inverse(), i0) == doctest::Approx(delta2(a, i0)));
  CHECK(delta1(i0, i0) == 0.0);
  CHECK(symmetric_condition(i0) == doctest::Approx(2.0));
  CHECK(std::isinf(symmetric_condition(-i0)));
}

TEST_CASE("hessian-based estimates") {
  const ModelSpec spec = ModelSpec::standard(Family::Poisson, 2, CovariateLaw::StdNormal, 3);
  Federation fed(spec, generate_federation(spec, 4, 100));
  const Vector theta = Vector::Constant(2, 0.1);
  const FisherEstimate lc = local_hessian_estimate(fed, theta);
  const FisherEstimate gl = global_hessian_estimate(fed, theta);
  CHECK(lc.kind == FisherKind::LocalHessian);
  CHECK(gl.matrix == pooled_hessian_at(fed, theta));
  CHECK(lc.matrix == local_hessian_at(fed, theta));
  CHECK(to_string(FisherKind::GlobalHessian) == "GL");
  CHECK(to_string(FisherKind::LocalHessian) == "LC");
}

TEST_CASE("reference Fisher information") {
  const ModelSpec gauss = ModelSpec::standard(Family::GaussianQuadratic, 3, CovariateLaw::StdNormal, 0);
  const ReferenceFisher ref = reference_fisher(gauss, 200000, 5);
  const Matrix err = (ref.mean - Matrix::Identity(3, 3)).cwiseAbs();
  for (Eigen::Index k = 0; k < err.size(); ++k) {
    CHECK(err.data()[k] < 5 * ref.std_err.data()[k] + 1e-12);
  }
  CHECK(ref.std_err(0, 0) > 0.0);
  CHECK(ref.samples == 200000);

  const auto dir = std::filesystem::temp_directory_path() / "fedfisher_ref_cache_test";
  std::filesystem::remove_all(dir);
  const auto file = dir / "cache.json";
  const ReferenceFisher a = cached_reference_fisher(gauss, 200000, 5, file);
  CHECK(std::filesystem::exists(file));
  const ReferenceFisher b = cached_reference_fisher(gauss, 200000, 5, file);
  CHECK(a.mean == ref.mean);
  CHECK(b.mean == ref.mean);
  CHECK(b.key == ref.key);
  CHECK(reference_key(gauss, 200000, 5) != reference_key(gauss, 200000, 6));
  std::filesystem::remove_all(dir);
}
