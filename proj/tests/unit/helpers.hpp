#pragma once

#include "fedfisher/comm.hpp"
#include "fedfisher/model.hpp"
#include "fedfisher/rng.hpp"

#include <vector>

namespace testutil {

using namespace fedfisher;

inline Vector random_vector(Rng& rng, std::size_t d, double scale = 1.0) {
  Vector v(static_cast<Eigen::Index>(d));
  for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = scale * rng.normal();
  return v;
}

inline Sample random_sample(Rng& rng, Family family, std::size_t d) {
  Sample s;
  s.s.resize(d);
  for (double& x : s.s) x = rng.normal();
  switch (family) {
    case Family::Logistic: s.y = rng.bernoulli(0.5) ? 1.0 : 0.0; break;
    case Family::Poisson: s.y = static_cast<double>(rng.poisson(2.0)); break;
    case Family::GaussianQuadratic: s.y = rng.normal(); break;
  }
  return s;
}

/// Federation of m centers sharing one covariate block; only responses differ.
inline std::vector<CenterData> shared_design_centers(std::size_t m, std::size_t n, std::size_t d,
                                                     std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> s(n * d);
  for (double& x : s) x = rng.normal();
  std::vector<CenterData> centers;
  for (std::size_t i = 0; i < m; ++i) {
    CenterData c(i + 1, d);
    for (std::size_t r = 0; r < n; ++r) {
      c.add_sample(rng.normal(), std::span<const double>(s.data() + r * d, d));
    }
    centers.push_back(std::move(c));
  }
  return centers;
}

}  // namespace testutil
