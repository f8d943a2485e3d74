#include "fedfisher/model.hpp"

#include "fedfisher/rng.hpp"

#include <algorithm>
#include <cmath>

namespace fedfisher {

std::string_view to_string(Family f) {
  switch (f) {
    case Family::Logistic: return "logistic";
    case Family::Poisson: return "poisson";
    case Family::GaussianQuadratic: return "gaussian";
  }
  return "unknown";
}

std::string_view to_string(CovariateLaw c) {
  switch (c) {
    case CovariateLaw::StdNormal: return "normal";
    case CovariateLaw::IidExp1: return "exp1";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  if (name == "logistic") return Family::Logistic;
  if (name == "poisson") return Family::Poisson;
  if (name == "gaussian") return Family::GaussianQuadratic;
  throw std::invalid_argument("unknown family '" + std::string(name) + "'");
}

CovariateLaw parse_covariate_law(std::string_view name) {
  if (name == "normal") return CovariateLaw::StdNormal;
  if (name == "exp1") return CovariateLaw::IidExp1;
  throw std::invalid_argument("unknown covariate law '" + std::string(name) + "'");
}

ModelSpec ModelSpec::standard(Family family, std::size_t dim, CovariateLaw covariates,
                              std::uint64_t seed) {
  if (dim == 0) throw std::invalid_argument("ModelSpec: dimension must be >= 1");
  ModelSpec spec;
  spec.family = family;
  spec.dim = dim;
  spec.theta0 = Vector::Constant(static_cast<Eigen::Index>(dim),
                                 1.0 / std::sqrt(static_cast<double>(dim)));
  spec.covariates = covariates;
  spec.seed = seed;
  return spec;
}

ThirdTensor& ThirdTensor::operator+=(const ThirdTensor& other) {
  require_dim(other.dim_, dim_, "ThirdTensor::operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

ThirdTensor& ThirdTensor::operator*=(double c) {
  for (double& x : data_) x *= c;
  return *this;
}

double ThirdTensor::max_abs() const noexcept {
  double best = 0.0;
  for (double x : data_) best = std::max(best, std::fabs(x));
  return best;
}

bool ThirdTensor::is_zero() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return x == 0.0; });
}

namespace glm {

double sigmoid(double eta) noexcept {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

double log1p_exp(double eta) noexcept {
  if (eta > 0.0) return eta + std::log1p(std::exp(-eta));
  return std::log1p(std::exp(eta));
}

double loss(Family family, double eta, double y) noexcept {
  switch (family) {
    case Family::Logistic: return -y * eta + log1p_exp(eta);
    case Family::Poisson: return -y * eta + std::exp(eta);
    case Family::GaussianQuadratic: {
      const double r = y - eta;
      return 0.5 * r * r;
    }
  }
  return 0.0;
}

double residual(Family family, double eta, double y) noexcept {
  switch (family) {
    case Family::Logistic: return sigmoid(eta) - y;
    case Family::Poisson: return std::exp(eta) - y;
    case Family::GaussianQuadratic: return eta - y;
  }
  return 0.0;
}

double weight(Family family, double eta) noexcept {
  switch (family) {
    case Family::Logistic: {
      // p(1-p) = e^{-|eta|} / (1 + e^{-|eta|})^2, no cancellation in the tails
      const double e = std::exp(-std::fabs(eta));
      const double denom = 1.0 + e;
      return e / (denom * denom);
    }
    case Family::Poisson: return std::exp(eta);
    case Family::GaussianQuadratic: return 1.0;
  }
  return 0.0;
}

double curvature(Family family, double eta) noexcept {
  switch (family) {
    case Family::Logistic:
      // p(1-p)(1-2p), with 1 - 2p = -tanh(eta / 2)
      return -weight(family, eta) * std::tanh(0.5 * eta);
    case Family::Poisson: return std::exp(eta);
    case Family::GaussianQuadratic: return 0.0;
  }
  return 0.0;
}

}  // namespace glm

namespace {

double predictor_checked(const Vector& theta, SampleRef sample, const char* what) {
  require_dim(static_cast<std::size_t>(theta.size()), sample.s.size(), what);
  return glm::linear_predictor(sample.s, theta.data());
}

}  // namespace

double loss_value(Family family, const Vector& theta, SampleRef sample) {
  const double eta = predictor_checked(theta, sample, "loss_value");
  return glm::loss(family, eta, sample.y);
}

Vector gradient(Family family, const Vector& theta, SampleRef sample) {
  const double eta = predictor_checked(theta, sample, "gradient");
  const double r = glm::residual(family, eta, sample.y);
  const auto d = static_cast<Eigen::Index>(sample.s.size());
  Vector g(d);
  for (Eigen::Index k = 0; k < d; ++k) g[k] = r * sample.s[k];
  return g;
}

Matrix hessian(Family family, const Vector& theta, SampleRef sample) {
  const double eta = predictor_checked(theta, sample, "hessian");
  const double w = glm::weight(family, eta);
  const auto d = static_cast<Eigen::Index>(sample.s.size());
  Matrix h(d, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double ws = w * sample.s[k];
    for (Eigen::Index l = k; l < d; ++l) {
      h(k, l) = ws * sample.s[l];
      h(l, k) = h(k, l);
    }
  }
  return h;
}

ThirdTensor third_tensor(Family family, const Vector& theta, SampleRef sample) {
  const double eta = predictor_checked(theta, sample, "third_tensor");
  const double v = glm::curvature(family, eta);
  const std::size_t d = sample.s.size();
  ThirdTensor t(d);
  if (v == 0.0) return t;
  // Each sorted triple is computed once and mirrored, so t is exactly symmetric.
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = j; k < d; ++k) {
      const double vjk = v * sample.s[j] * sample.s[k];
      for (std::size_t l = k; l < d; ++l) {
        const double x = vjk * sample.s[l];
        t(j, k, l) = t(j, l, k) = t(k, j, l) = t(k, l, j) = t(l, j, k) = t(l, k, j) = x;
      }
    }
  }
  return t;
}

Vector contract_circle(const ThirdTensor& tensor, const Vector& u) {
  const std::size_t d = tensor.dim();
  require_dim(static_cast<std::size_t>(u.size()), d, "contract_circle");
  Vector out = Vector::Zero(static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < d; ++j) {
    double acc = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      double row = 0.0;
      for (std::size_t l = 0; l < d; ++l) row += tensor(j, k, l) * u[l];
      acc += u[k] * row;
    }
    out[j] = acc;
  }
  return out;
}

double draw_sample(const ModelSpec& spec, Rng& rng, std::span<double> s) {
  for (double& x : s) {
    x = spec.covariates == CovariateLaw::StdNormal ? rng.normal() : rng.exponential();
  }
  const double eta = glm::linear_predictor(s, spec.theta0.data());
  switch (spec.family) {
    case Family::Logistic: return rng.bernoulli(glm::sigmoid(eta)) ? 1.0 : 0.0;
    case Family::Poisson: return static_cast<double>(rng.poisson(std::exp(eta)));
    case Family::GaussianQuadratic: return eta + rng.normal();
  }
  return 0.0;
}

std::vector<CenterData> generate_federation(const ModelSpec& spec, std::size_t m,
                                            std::size_t n) {
  if (spec.dim == 0) throw std::invalid_argument("generate_federation: dimension must be >= 1");
  require_dim(static_cast<std::size_t>(spec.theta0.size()), spec.dim, "generate_federation theta0");
  if (m == 0) throw std::invalid_argument("generate_federation: need at least one center");
  if (n <= spec.dim) {
    throw std::invalid_argument("generate_federation: n must exceed d for local M-estimation");
  }

  const std::size_t d = spec.dim;
  std::vector<CenterData> centers;
  centers.reserve(m);
  std::vector<double> s(d);
  for (std::size_t i = 1; i <= m; ++i) {
    Rng rng(derive_seed({spec.seed, i}));
    CenterData center(i, d);
    center.reserve(n);
    for (std::size_t row = 0; row < n; ++row) {
      const double y = draw_sample(spec, rng, s);
      center.add_sample(y, s);
    }
    centers.push_back(std::move(center));
  }
  return centers;
}

}  // namespace fedfisher
