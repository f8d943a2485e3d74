#pragma once

#include "fedfisher/comm.hpp"
#include "fedfisher/model.hpp"
#include "fedfisher/types.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

namespace fedfisher {

enum class FisherKind { MG, GM, LocalHessian, GlobalHessian };

std::string_view to_string(FisherKind kind);

/// A Fisher-information estimate. For kind == GM the stored matrix is an
/// estimate of the *inverse* Fisher information; for every other kind it
/// estimates I0 itself. Use fisher() / inverse_fisher() / solve() rather
/// than reading `matrix` directly unless you branch on `kind`.
struct FisherEstimate {
  Matrix matrix;
  FisherKind kind = FisherKind::MG;
  Vector eval_theta;
  double condition_number = 1.0;

  Matrix fisher() const;
  Matrix inverse_fisher() const;
  /// I0_hat^{-1} g (a linear solve, or a product for GM).
  Vector solve(const Vector& g) const;
};

/// Above this Gram condition number the regression estimators refuse to solve.
inline constexpr double kMaxGramCondition = 1e12;

/// -[sum (th_i - th_bar)(th_i - th_bar)^T]^{-1} [sum (th_i - th_bar)(l_i - l_bar)^T]
FisherEstimate mg_estimate(std::span<const Vector> theta_hats, const Vector& theta_bar,
                           std::span<const Vector> grads, const Vector& grad_bar,
                           const Vector& eval_theta = Vector());

/// -[sum (l_i - l_bar)(l_i - l_bar)^T]^{-1} [sum (l_i - l_bar)(th_i - th_bar)^T]
FisherEstimate gm_estimate(std::span<const Vector> theta_hats, const Vector& theta_bar,
                           std::span<const Vector> grads, const Vector& grad_bar,
                           const Vector& eval_theta = Vector());

FisherEstimate local_hessian_estimate(const Federation& fed, const Vector& theta);
FisherEstimate global_hessian_estimate(const Federation& fed, const Vector& theta);

/// Largest singular value, via the symmetric eigenproblem of M^T M.
double spectral_norm(const Matrix& m);

/// Condition number of a symmetric matrix, infinite unless positive definite.
double symmetric_condition(const Matrix& m);

/// ||I0 - A|| / ||I0||
double delta1(const Matrix& a, const Matrix& i0);
/// ||I0^{-1} - A^{-1}|| / ||I0^{-1}||
double delta2(const Matrix& a, const Matrix& i0);
/// delta2 when A^{-1} is already at hand (GM estimates).
double delta2_from_inverse(const Matrix& a_inverse, const Matrix& i0);

struct ReferenceFisher {
  Matrix mean;     ///< Monte-Carlo estimate of E[hessian at theta0]
  Matrix std_err;  ///< delete-one-block jackknife standard error per entry
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  std::string key;
};

/// Cache key: family, d, theta0 hash, covariate law, sample count, seed.
std::string reference_key(const ModelSpec& spec, std::size_t mc_samples, std::uint64_t seed);

/// Mean Hessian at theta0 over mc_samples fresh draws, reduced over a fixed
/// number of blocks in block order.
ReferenceFisher reference_fisher(const ModelSpec& spec, std::size_t mc_samples,
                                 std::uint64_t seed);

/// Looks the reference up in `cache_file` (JSON object keyed by
/// reference_key), computing and storing it on a miss.
ReferenceFisher cached_reference_fisher(const ModelSpec& spec, std::size_t mc_samples,
                                        std::uint64_t seed,
                                        const std::filesystem::path& cache_file);

}  // namespace fedfisher
