#pragma once

#include "fedfisher/center.hpp"
#include "fedfisher/model.hpp"
#include "fedfisher/types.hpp"

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedfisher {

enum class Direction { Up, Down };  // Up: center -> coordinator

struct CommEvent {
  std::size_t round;
  Direction direction;
  std::string kind;
  std::size_t scalars;
};

/// Message accounting for the simulated coordinator protocol. Costs are in
/// scalars (8 bytes each as doubles).
class CommLog {
 public:
  /// Opens a new synchronous round; subsequent records belong to it.
  void begin_round() { ++rounds_; }
  void record(Direction direction, std::string kind, std::size_t scalars);

  std::size_t rounds() const noexcept { return rounds_; }
  std::size_t scalars_up() const noexcept { return up_; }
  std::size_t scalars_down() const noexcept { return down_; }
  std::size_t total_scalars() const noexcept { return up_ + down_; }
  const std::vector<CommEvent>& events() const noexcept { return events_; }

  /// Appends a delta log; its round numbers are shifted past ours.
  CommLog& operator+=(const CommLog& delta);

  /// CSV with header `round,direction,kind,scalars`.
  void write_csv(std::ostream& out) const;

 private:
  std::size_t rounds_ = 0;
  std::size_t up_ = 0;
  std::size_t down_ = 0;
  std::vector<CommEvent> events_;
};

/// A center failed to converge during local M-estimation.
class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, std::vector<std::size_t> center_ids)
      : std::runtime_error(what), ids_(std::move(center_ids)) {}
  const std::vector<std::size_t>& center_ids() const noexcept { return ids_; }

 private:
  std::vector<std::size_t> ids_;
};

class Federation;

namespace detail {
struct FederationAccess;
}

/// m equally sized centers plus the designated local center.
///
/// Algorithms never touch center samples directly: every data-dependent
/// quantity comes from the comm operations below. The public `center()`
/// accessor is counted so tests can assert it goes unused by the solvers.
class Federation {
 public:
  Federation(ModelSpec spec, std::vector<CenterData> centers, std::size_t local_id = 1);

  const ModelSpec& spec() const noexcept { return spec_; }
  Family family() const noexcept { return spec_.family; }
  std::size_t m() const noexcept { return centers_.size(); }
  std::size_t n() const noexcept { return centers_.front().size(); }
  std::size_t dim() const noexcept { return spec_.dim; }
  std::size_t local_id() const noexcept { return centers_[local_pos_].id(); }

  /// Raw access by storage position. Counted.
  const CenterData& center(std::size_t position) const;
  CenterData& center(std::size_t position);
  std::size_t raw_accesses() const noexcept { return raw_accesses_; }

 private:
  friend struct detail::FederationAccess;

  ModelSpec spec_;
  std::vector<CenterData> centers_;
  std::vector<std::size_t> by_id_;  // storage positions in ascending centerId order
  std::size_t local_pos_ = 0;
  mutable std::size_t raw_accesses_ = 0;
};

struct MEstimatorRound {
  std::vector<Vector> theta_hats;  // centerId order
  Vector theta_bar;
  CommLog comm;
};

struct GradientRound {
  std::vector<Vector> grads;  // centerId order
  Vector grad_bar;
  CommLog comm;
};

/// Fits any unfitted center, then gathers every M-estimator (m*d scalars up).
MEstimatorRound collect_m_estimators(Federation& fed, const NewtonSettings& settings = {});

/// Broadcasts theta (m*d down) and gathers the center gradients (m*d up).
GradientRound broadcast_and_collect_gradients(const Federation& fed, const Vector& theta);

/// Oracle M-estimator on the pooled N = m*n samples. Out-of-band: no comm cost.
LocalFit pooled_oracle_fit(const Federation& fed, const NewtonSettings& settings = {});

// Local-center computations. The local center owns its data, so these
// involve no communication.

/// The local center's M-estimator (fitting it if needed).
Vector local_m_estimator(Federation& fed, const NewtonSettings& settings = {});
Matrix local_hessian_at(const Federation& fed, const Vector& theta);
LocalMoments local_moments_at(const Federation& fed, const Vector& theta_a);

/// Mean Hessian over all N samples. Oracle baseline, out-of-band.
Matrix pooled_hessian_at(const Federation& fed, const Vector& theta);

/// Mean gradient over all N samples. Evaluation only, out-of-band.
Vector pooled_gradient_at(const Federation& fed, const Vector& theta);

}  // namespace fedfisher
