#include "fedfisher/comm.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

namespace fedfisher {

void CommLog::record(Direction direction, std::string kind, std::size_t scalars) {
  if (rounds_ == 0) begin_round();
  (direction == Direction::Up ? up_ : down_) += scalars;
  events_.push_back({rounds_, direction, std::move(kind), scalars});
}

CommLog& CommLog::operator+=(const CommLog& delta) {
  for (const CommEvent& e : delta.events_) {
    events_.push_back({e.round + rounds_, e.direction, e.kind, e.scalars});
  }
  rounds_ += delta.rounds_;
  up_ += delta.up_;
  down_ += delta.down_;
  return *this;
}

void CommLog::write_csv(std::ostream& out) const {
  out << "round,direction,kind,scalars\n";
  for (const CommEvent& e : events_) {
    out << e.round << ',' << (e.direction == Direction::Up ? "up" : "down") << ',' << e.kind
        << ',' << e.scalars << '\n';
  }
}

Federation::Federation(ModelSpec spec, std::vector<CenterData> centers, std::size_t local_id)
    : spec_(std::move(spec)), centers_(std::move(centers)) {
  if (centers_.empty()) throw std::invalid_argument("Federation: no centers");
  const std::size_t n = centers_.front().size();
  for (const CenterData& c : centers_) {
    require_dim(c.dim(), spec_.dim, "Federation center");
    if (c.size() != n) throw std::invalid_argument("Federation: centers must share n");
  }
  by_id_.resize(centers_.size());
  std::iota(by_id_.begin(), by_id_.end(), std::size_t{0});
  std::sort(by_id_.begin(), by_id_.end(),
            [&](std::size_t a, std::size_t b) { return centers_[a].id() < centers_[b].id(); });
  for (std::size_t i = 1; i < by_id_.size(); ++i) {
    if (centers_[by_id_[i]].id() == centers_[by_id_[i - 1]].id()) {
      throw std::invalid_argument("Federation: duplicate center id");
    }
  }
  auto it = std::find_if(centers_.begin(), centers_.end(),
                         [&](const CenterData& c) { return c.id() == local_id; });
  if (it == centers_.end()) throw std::invalid_argument("Federation: unknown local center id");
  local_pos_ = static_cast<std::size_t>(it - centers_.begin());
}

const CenterData& Federation::center(std::size_t position) const {
  ++raw_accesses_;
  return centers_.at(position);
}

CenterData& Federation::center(std::size_t position) {
  ++raw_accesses_;
  return centers_.at(position);
}

namespace detail {

struct FederationAccess {
  static std::vector<CenterData>& centers(Federation& f) { return f.centers_; }
  static const std::vector<CenterData>& centers(const Federation& f) { return f.centers_; }
  static const std::vector<std::size_t>& by_id(const Federation& f) { return f.by_id_; }
  static CenterData& local(Federation& f) { return f.centers_[f.local_pos_]; }
  static const CenterData& local(const Federation& f) { return f.centers_[f.local_pos_]; }

  static std::vector<const CenterData*> ordered(const Federation& f) {
    std::vector<const CenterData*> out;
    out.reserve(f.by_id_.size());
    for (std::size_t pos : f.by_id_) out.push_back(&f.centers_[pos]);
    return out;
  }
};

}  // namespace detail

using detail::FederationAccess;

namespace {

const LocalFit& ensure_fit(CenterData& c, Family family, const NewtonSettings& settings) {
  if (!c.fit) c.fit = fit_m_estimator(c, family, settings);
  return *c.fit;
}

Vector mean_of(const std::vector<Vector>& xs) {
  Vector sum = Vector::Zero(xs.front().size());
  for (const Vector& x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

}  // namespace

MEstimatorRound collect_m_estimators(Federation& fed, const NewtonSettings& settings) {
  auto& centers = FederationAccess::centers(fed);
  MEstimatorRound out;
  out.theta_hats.reserve(centers.size());
  std::vector<std::size_t> failed;
  for (std::size_t pos : FederationAccess::by_id(fed)) {
    const LocalFit& fit = ensure_fit(centers[pos], fed.family(), settings);
    if (!fit.converged) failed.push_back(centers[pos].id());
    out.theta_hats.push_back(fit.theta_hat);
  }
  if (!failed.empty()) {
    std::string ids;
    for (std::size_t id : failed) ids += (ids.empty() ? "" : ",") + std::to_string(id);
    throw NonConvergence("local M-estimation did not converge at centers " + ids,
                         std::move(failed));
  }
  out.theta_bar = mean_of(out.theta_hats);
  out.comm.begin_round();
  out.comm.record(Direction::Up, "m_estimator", fed.m() * fed.dim());
  return out;
}

GradientRound broadcast_and_collect_gradients(const Federation& fed, const Vector& theta) {
  require_dim(static_cast<std::size_t>(theta.size()), fed.dim(), "broadcast theta");
  GradientRound out;
  out.comm.begin_round();
  out.comm.record(Direction::Down, "theta", fed.m() * fed.dim());
  const auto& centers = FederationAccess::centers(fed);
  out.grads.reserve(centers.size());
  for (std::size_t pos : FederationAccess::by_id(fed)) {
    out.grads.push_back(eval_gradient_at(centers[pos], fed.family(), theta));
  }
  out.grad_bar = mean_of(out.grads);
  out.comm.record(Direction::Up, "gradient", fed.m() * fed.dim());
  return out;
}

LocalFit pooled_oracle_fit(const Federation& fed, const NewtonSettings& settings) {
  const auto parts = FederationAccess::ordered(fed);
  return fit_pooled(parts, fed.family(), settings);
}

Vector local_m_estimator(Federation& fed, const NewtonSettings& settings) {
  CenterData& local = FederationAccess::local(fed);
  const LocalFit& fit = ensure_fit(local, fed.family(), settings);
  if (!fit.converged) {
    throw NonConvergence("local center M-estimation did not converge", {local.id()});
  }
  return fit.theta_hat;
}

Matrix local_hessian_at(const Federation& fed, const Vector& theta) {
  return eval_hessian_at(FederationAccess::local(fed), fed.family(), theta);
}

LocalMoments local_moments_at(const Federation& fed, const Vector& theta_a) {
  return local_moments(FederationAccess::local(fed), fed.family(), theta_a);
}

Matrix pooled_hessian_at(const Federation& fed, const Vector& theta) {
  const auto parts = FederationAccess::ordered(fed);
  return eval_hessian_pooled(parts, fed.family(), theta);
}

Vector pooled_gradient_at(const Federation& fed, const Vector& theta) {
  std::vector<Vector> grads;
  for (const CenterData* c : FederationAccess::ordered(fed)) {
    grads.push_back(eval_gradient_at(*c, fed.family(), theta));
  }
  return mean_of(grads);
}

}  // namespace fedfisher
