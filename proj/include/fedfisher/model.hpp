#pragma once

#include "fedfisher/center_data.hpp"
#include "fedfisher/types.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fedfisher {

enum class Family { Logistic, Poisson, GaussianQuadratic };
enum class CovariateLaw { StdNormal, IidExp1 };

std::string_view to_string(Family f);
std::string_view to_string(CovariateLaw c);
Family parse_family(std::string_view name);
CovariateLaw parse_covariate_law(std::string_view name);

/// Generative ground truth for a simulated federation.
struct ModelSpec {
  Family family = Family::Logistic;
  std::size_t dim = 1;
  Vector theta0;
  CovariateLaw covariates = CovariateLaw::StdNormal;
  std::uint64_t seed = 0;

  /// theta0 = d^{-1/2} * (1, ..., 1), the design used by every simulation study.
  static ModelSpec standard(Family family, std::size_t dim, CovariateLaw covariates,
                            std::uint64_t seed);
};

/// Dense d x d x d array. Block j is the Hessian of the j-th partial
/// derivative, so entry (j, k, l) is d^3 L / (d theta_j d theta_k d theta_l).
class ThirdTensor {
 public:
  using BlockMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                  Eigen::RowMajor>>;

  ThirdTensor() = default;
  explicit ThirdTensor(std::size_t dim) : dim_(dim), data_(dim * dim * dim, 0.0) {}

  std::size_t dim() const noexcept { return dim_; }

  double& operator()(std::size_t j, std::size_t k, std::size_t l) {
    return data_[(j * dim_ + k) * dim_ + l];
  }
  double operator()(std::size_t j, std::size_t k, std::size_t l) const {
    return data_[(j * dim_ + k) * dim_ + l];
  }

  BlockMap block(std::size_t j) const {
    return BlockMap(data_.data() + j * dim_ * dim_, static_cast<Eigen::Index>(dim_),
                    static_cast<Eigen::Index>(dim_));
  }

  std::span<const double> raw() const noexcept { return data_; }
  std::span<double> raw() noexcept { return data_; }

  ThirdTensor& operator+=(const ThirdTensor& other);
  ThirdTensor& operator*=(double c);

  double max_abs() const noexcept;
  bool is_zero() const noexcept;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

// Per-sample derivatives of the canonical GLM negative log-likelihood.
// Constants independent of theta (the Poisson log y! term, the Gaussian
// normalizer) are dropped.

double loss_value(Family family, const Vector& theta, SampleRef sample);
Vector gradient(Family family, const Vector& theta, SampleRef sample);
Matrix hessian(Family family, const Vector& theta, SampleRef sample);
ThirdTensor third_tensor(Family family, const Vector& theta, SampleRef sample);

/// (I_d kron u^T) T u: component j is u^T T_j u.
Vector contract_circle(const ThirdTensor& tensor, const Vector& u);

class Rng;

/// Draw one observation from the spec's law: covariates into `s`, response returned.
double draw_sample(const ModelSpec& spec, Rng& rng, std::span<double> s);

/// m centers of n samples each, drawn from the spec's conditional law.
/// Center i (1-based id) draws from its own stream keyed by (spec.seed, i).
std::vector<CenterData> generate_federation(const ModelSpec& spec, std::size_t m,
                                            std::size_t n);

namespace glm {

/// s^T theta, summed in index order.
inline double linear_predictor(std::span<const double> s, const double* theta) noexcept {
  double eta = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) eta += s[k] * theta[k];
  return eta;
}

double sigmoid(double eta) noexcept;
double log1p_exp(double eta) noexcept;

/// Scalar pieces of L(eta; y): L, dL/deta, d2L/deta2, d3L/deta3.
double loss(Family family, double eta, double y) noexcept;
double residual(Family family, double eta, double y) noexcept;
double weight(Family family, double eta) noexcept;
double curvature(Family family, double eta) noexcept;

}  // namespace glm

}  // namespace fedfisher
