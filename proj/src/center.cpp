#include "fedfisher/center.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fedfisher {

void NewtonSettings::validate() const {
  if (!(grad_tol > 0.0)) throw std::invalid_argument("NewtonSettings: grad_tol must be > 0");
  if (max_iter < 1) throw std::invalid_argument("NewtonSettings: max_iter must be >= 1");
  if (!(damping_shrink > 0.0 && damping_shrink < 1.0)) {
    throw std::invalid_argument("NewtonSettings: damping_shrink must lie in (0, 1)");
  }
}

namespace {

struct Objective {
  double loss = 0.0;
  Vector grad;
  Matrix hess;
};

std::size_t part_dim(std::span<const CenterData* const> parts) {
  if (parts.empty()) throw std::invalid_argument("no data to fit");
  const std::size_t d = parts.front()->dim();
  for (const CenterData* c : parts) require_dim(c->dim(), d, "pooled centers");
  return d;
}

Objective evaluate(std::span<const CenterData* const> parts, Family family, const Vector& theta,
                   bool with_hessian) {
  const std::size_t d = part_dim(parts);
  require_dim(static_cast<std::size_t>(theta.size()), d, "evaluate");
  const auto di = static_cast<Eigen::Index>(d);
  Objective out;
  out.grad = Vector::Zero(di);
  if (with_hessian) out.hess = Matrix::Zero(di, di);
  std::size_t total = 0;
  double loss = 0.0;
  double* g = out.grad.data();
  for (const CenterData* part : parts) {
    const std::size_t n = part->size();
    const double* ys = part->responses().data();
    const double* ss = part->covariates().data();
    for (std::size_t row = 0; row < n; ++row) {
      const std::span<const double> s(ss + row * d, d);
      const double eta = glm::linear_predictor(s, theta.data());
      loss += glm::loss(family, eta, ys[row]);
      const double r = glm::residual(family, eta, ys[row]);
      for (std::size_t k = 0; k < d; ++k) g[k] += r * s[k];
      if (with_hessian) {
        const double w = glm::weight(family, eta);
        for (std::size_t k = 0; k < d; ++k) {
          const double ws = w * s[k];
          for (std::size_t l = k; l < d; ++l) out.hess(k, l) += ws * s[l];
        }
      }
    }
    total += n;
  }
  const double count = static_cast<double>(total);
  out.loss = loss / count;
  out.grad /= count;
  if (with_hessian) {
    for (Eigen::Index k = 0; k < di; ++k) {
      for (Eigen::Index l = k; l < di; ++l) {
        out.hess(k, l) /= count;
        out.hess(l, k) = out.hess(k, l);
      }
    }
  }
  return out;
}

// Newton direction H^{-1} g. A ridge of 1e-8 * tr(H) / d is added to the
// system (never to the reported Hessian) when H is not safely positive definite.
Vector newton_direction(const Matrix& h, const Vector& g) {
  Eigen::LLT<Matrix> llt(h);
  if (llt.info() == Eigen::Success && llt.rcond() > 1e-12) return llt.solve(g);
  const double d = static_cast<double>(h.rows());
  double ridge = 1e-8 * h.trace() / d;
  if (!(ridge > 0.0)) ridge = 1e-8;
  Matrix damped = h;
  damped.diagonal().array() += ridge;
  Eigen::LLT<Matrix> ridged(damped);
  if (ridged.info() == Eigen::Success) return ridged.solve(g);
  return damped.fullPivLu().solve(g);
}

LocalFit newton(std::span<const CenterData* const> parts, Family family,
                const NewtonSettings& settings) {
  settings.validate();
  const std::size_t d = part_dim(parts);
  Vector theta = Vector::Zero(static_cast<Eigen::Index>(d));
  Objective current = evaluate(parts, family, theta, true);

  LocalFit fit;
  const double eps = std::numeric_limits<double>::epsilon();
  for (;;) {
    const double gnorm = current.grad.norm();
    fit.grad_norm = gnorm;
    if (gnorm <= settings.grad_tol) {
      fit.converged = true;
      break;
    }
    if (fit.iterations >= settings.max_iter) break;

    const Vector direction = newton_direction(current.hess, current.grad);
    double step = 1.0;
    bool accepted = false;
    for (std::size_t h = 0; h <= settings.max_halvings; ++h) {
      Vector trial_theta = theta - step * direction;
      Objective trial = evaluate(parts, family, trial_theta, true);
      // Near the optimum the loss change drops below round-off; there a step
      // that leaves the loss unchanged to working precision is accepted when
      // it shrinks the gradient.
      const double slack = 8.0 * eps * std::max(1.0, std::fabs(current.loss));
      const bool decreased = trial.loss <= current.loss;
      const bool flat = trial.loss <= current.loss + slack && trial.grad.norm() < gnorm;
      if (std::isfinite(trial.loss) && (decreased || flat)) {
        theta = std::move(trial_theta);
        current = std::move(trial);
        accepted = true;
        break;
      }
      step *= settings.damping_shrink;
    }
    if (!accepted) break;
    ++fit.iterations;
  }
  fit.theta_hat = std::move(theta);
  return fit;
}

}  // namespace

LocalFit fit_m_estimator(const CenterData& center, Family family,
                         const NewtonSettings& settings) {
  if (center.size() <= center.dim()) {
    throw std::invalid_argument("fit_m_estimator: need n > d samples");
  }
  const CenterData* parts[] = {&center};
  return newton(parts, family, settings);
}

LocalFit fit_pooled(std::span<const CenterData* const> parts, Family family,
                    const NewtonSettings& settings) {
  return newton(parts, family, settings);
}

Vector eval_gradient_at(const CenterData& center, Family family, const Vector& theta) {
  const std::size_t d = center.dim();
  require_dim(static_cast<std::size_t>(theta.size()), d, "eval_gradient_at");
  Vector sum = Vector::Zero(static_cast<Eigen::Index>(d));
  const std::size_t n = center.size();
  const double* ys = center.responses().data();
  const double* ss = center.covariates().data();
  for (std::size_t row = 0; row < n; ++row) {
    const std::span<const double> s(ss + row * d, d);
    const double r = glm::residual(family, glm::linear_predictor(s, theta.data()), ys[row]);
    for (std::size_t k = 0; k < d; ++k) sum[static_cast<Eigen::Index>(k)] += r * s[k];
  }
  return sum / static_cast<double>(n);
}

Matrix eval_hessian_at(const CenterData& center, Family family, const Vector& theta) {
  const CenterData* parts[] = {&center};
  return eval_hessian_pooled(parts, family, theta);
}

Matrix eval_hessian_pooled(std::span<const CenterData* const> parts, Family family,
                           const Vector& theta) {
  const std::size_t d = part_dim(parts);
  require_dim(static_cast<std::size_t>(theta.size()), d, "eval_hessian_at");
  const auto di = static_cast<Eigen::Index>(d);
  Matrix sum = Matrix::Zero(di, di);
  std::size_t total = 0;
  for (const CenterData* part : parts) {
    const double* ss = part->covariates().data();
    for (std::size_t row = 0; row < part->size(); ++row) {
      const std::span<const double> s(ss + row * d, d);
      const double w = glm::weight(family, glm::linear_predictor(s, theta.data()));
      for (std::size_t k = 0; k < d; ++k) {
        const double ws = w * s[k];
        for (std::size_t l = k; l < d; ++l) sum(k, l) += ws * s[l];
      }
    }
    total += part->size();
  }
  for (Eigen::Index k = 0; k < di; ++k) {
    for (Eigen::Index l = k; l < di; ++l) {
      sum(k, l) /= static_cast<double>(total);
      sum(l, k) = sum(k, l);
    }
  }
  return sum;
}

LocalMoments local_moments(const CenterData& center, Family family, const Vector& theta_a) {
  const std::size_t d = center.dim();
  require_dim(static_cast<std::size_t>(theta_a.size()), d, "local_moments");
  const auto di = static_cast<Eigen::Index>(d);
  const std::size_t n = center.size();

  Matrix h_sum = Matrix::Zero(di, di);
  ThirdTensor t_sum(d);
  Vector g_mean = Vector::Zero(di);
  Matrix h_mean = Matrix::Zero(di, di);
  Matrix c11 = Matrix::Zero(di, di);
  ThirdTensor c12(d);

  Vector dg(di);
  Matrix dh(di, di);
  const double* ys = center.responses().data();
  const double* ss = center.covariates().data();
  for (std::size_t row = 0; row < n; ++row) {
    const std::span<const double> s(ss + row * d, d);
    const double eta = glm::linear_predictor(s, theta_a.data());
    const double r = glm::residual(family, eta, ys[row]);
    const double w = glm::weight(family, eta);
    const double v = glm::curvature(family, eta);

    // Welford co-moment update: C += ((k-1)/k) (x - mean_old)(y - mean_old)^T
    const double k = static_cast<double>(row + 1);
    const double shrink = (k - 1.0) / k;
    for (std::size_t a = 0; a < d; ++a) {
      dg[a] = r * s[a] - g_mean[a];
      g_mean[a] += dg[a] / k;
    }
    for (std::size_t a = 0; a < d; ++a) {
      const double ws = w * s[a];
      for (std::size_t b = a; b < d; ++b) {
        const double hab = ws * s[b];
        h_sum(a, b) += hab;
        dh(a, b) = hab - h_mean(a, b);
        h_mean(a, b) += dh(a, b) / k;
      }
    }
    for (std::size_t a = 0; a < d; ++a) {
      const double da = shrink * dg[a];
      for (std::size_t b = a; b < d; ++b) c11(a, b) += da * dg[b];
      for (std::size_t b = 0; b < d; ++b) {
        for (std::size_t c = b; c < d; ++c) c12(a, b, c) += da * dh(b, c);
      }
    }
    if (v != 0.0) {
      for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = a; b < d; ++b) {
          const double vab = v * s[a] * s[b];
          for (std::size_t c = b; c < d; ++c) t_sum(a, b, c) += vab * s[c];
        }
      }
    }
  }

  const double count = static_cast<double>(n);
  LocalMoments out;
  out.h_a = Matrix(di, di);
  out.q11 = Matrix(di, di);
  out.q = ThirdTensor(d);
  out.q12 = ThirdTensor(d);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      out.h_a(a, b) = out.h_a(b, a) = h_sum(a, b) / count;
      out.q11(a, b) = out.q11(b, a) = c11(a, b) / count;
    }
  }
  // Mirror the computed triangles: q is fully symmetric, q12 only in its
  // trailing pair of indices.
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) {
      for (std::size_t c = b; c < d; ++c) {
        out.q12(a, b, c) = out.q12(a, c, b) = c12(a, b, c) / count;
        std::size_t idx[3] = {a, b, c};
        std::sort(idx, idx + 3);
        out.q(a, b, c) = out.q(a, c, b) = t_sum(idx[0], idx[1], idx[2]) / count;
      }
    }
  }
  return out;
}

}  // namespace fedfisher
