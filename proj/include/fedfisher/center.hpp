#pragma once

#include "fedfisher/center_data.hpp"
#include "fedfisher/model.hpp"
#include "fedfisher/types.hpp"

#include <cstddef>
#include <span>

namespace fedfisher {

struct NewtonSettings {
  double grad_tol = 1e-10;
  std::size_t max_iter = 100;
  double damping_shrink = 0.5;
  std::size_t max_halvings = 30;

  void validate() const;
};

/// Local moment estimators at a pilot parameter theta^A, computed on one center.
struct LocalMoments {
  Matrix h_a;       ///< mean Hessian
  ThirdTensor q;    ///< mean third-derivative tensor
  Matrix q11;       ///< centered gradient second moment
  ThirdTensor q12;  ///< centered gradient x centered Hessian; (j,k,l) = g_j (H_kl)
};

/// Damped Newton from theta = 0 on the center-average loss. Steps are halved
/// until the mean loss does not increase. Non-convergence is reported through
/// LocalFit::converged, not thrown.
LocalFit fit_m_estimator(const CenterData& center, Family family,
                         const NewtonSettings& settings = {});

/// Same solver on the concatenation of several centers (the pooled problem).
/// Samples are visited part by part, rows in order.
LocalFit fit_pooled(std::span<const CenterData* const> parts, Family family,
                    const NewtonSettings& settings = {});

/// n^{-1} sum of per-sample gradients, summed in row order.
Vector eval_gradient_at(const CenterData& center, Family family, const Vector& theta);

/// n^{-1} sum of per-sample Hessians, summed in row order.
Matrix eval_hessian_at(const CenterData& center, Family family, const Vector& theta);

/// Mean Hessian over the concatenation of several centers.
Matrix eval_hessian_pooled(std::span<const CenterData* const> parts, Family family,
                           const Vector& theta);

/// Single pass over the center's samples. The cross moments are centered at
/// the within-center means of the gradient and Hessian.
LocalMoments local_moments(const CenterData& center, Family family, const Vector& theta_a);

}  // namespace fedfisher
