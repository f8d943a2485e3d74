#pragma once

#include "fedfisher/types.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace fedfisher {

/// Non-owning view of one observation X = (y, s).
struct SampleRef {
  double y;
  std::span<const double> s;
};

struct Sample {
  double y = 0.0;
  std::vector<double> s;

  SampleRef ref() const noexcept { return {y, s}; }
};

/// Result of a local M-estimation.
struct LocalFit {
  Vector theta_hat;
  double grad_norm = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// One center's samples, stored row-major, plus its fitted M-estimator.
class CenterData {
 public:
  CenterData(std::size_t id, std::size_t dim) : id_(id), dim_(dim) {}

  std::size_t id() const noexcept { return id_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return y_.size(); }

  void reserve(std::size_t n) {
    y_.reserve(n);
    s_.reserve(n * dim_);
  }

  void add_sample(double y, std::span<const double> s) {
    require_dim(s.size(), dim_, "CenterData::add_sample");
    y_.push_back(y);
    s_.insert(s_.end(), s.begin(), s.end());
  }

  SampleRef sample(std::size_t row) const noexcept {
    return {y_[row], std::span<const double>(s_.data() + row * dim_, dim_)};
  }

  std::span<const double> responses() const noexcept { return y_; }
  std::span<const double> covariates() const noexcept { return s_; }

  bool operator==(const CenterData& other) const {
    return id_ == other.id_ && dim_ == other.dim_ && y_ == other.y_ && s_ == other.s_;
  }

  std::optional<LocalFit> fit;

 private:
  std::size_t id_;
  std::size_t dim_;
  std::vector<double> y_;
  std::vector<double> s_;
};

}  // namespace fedfisher
