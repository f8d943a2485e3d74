#include "fedfisher/fisher.hpp"

#include "fedfisher/rng.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace fedfisher {

std::string_view to_string(FisherKind kind) {
  switch (kind) {
    case FisherKind::MG: return "MG";
    case FisherKind::GM: return "GM";
    case FisherKind::LocalHessian: return "LC";
    case FisherKind::GlobalHessian: return "GL";
  }
  return "unknown";
}

namespace {

Matrix checked_inverse(const Matrix& m, const char* what) {
  Eigen::PartialPivLU<Matrix> lu(m);
  if (!(lu.rcond() > 1e-14)) throw NumericalError(std::string(what) + ": matrix is singular");
  return lu.inverse();
}

// Shared regression step of the MG / GM estimators:
// -[sum x_i x_i^T]^{-1} [sum x_i z_i^T] with x, z the centered regressor and response.
FisherEstimate regression_estimate(std::span<const Vector> regressors, const Vector& reg_bar,
                                   std::span<const Vector> responses, const Vector& resp_bar,
                                   FisherKind kind, const Vector& eval_theta) {
  if (regressors.size() != responses.size()) {
    throw std::invalid_argument("Fisher estimate: M-estimator and gradient lists differ in length");
  }
  if (regressors.empty()) throw std::invalid_argument("Fisher estimate: no centers");
  const auto d = reg_bar.size();
  require_dim(static_cast<std::size_t>(resp_bar.size()), static_cast<std::size_t>(d),
              "Fisher estimate");
  const std::size_t m = regressors.size();
  const char* name = kind == FisherKind::MG ? "MG" : "GM";
  if (m < static_cast<std::size_t>(d) + 1) {
    throw SingularDesign(std::string(name) + " estimate needs m >= d + 1 centers",
                         std::numeric_limits<double>::infinity());
  }

  Matrix gram = Matrix::Zero(d, d);
  Matrix cross = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < m; ++i) {
    require_dim(static_cast<std::size_t>(regressors[i].size()), static_cast<std::size_t>(d),
                "Fisher estimate regressor");
    require_dim(static_cast<std::size_t>(responses[i].size()), static_cast<std::size_t>(d),
                "Fisher estimate response");
    const Vector x = regressors[i] - reg_bar;
    const Vector z = responses[i] - resp_bar;
    gram.noalias() += x * x.transpose();
    cross.noalias() += x * z.transpose();
  }
  const double cond = symmetric_condition(gram);
  if (!(cond <= kMaxGramCondition)) {
    throw SingularDesign(std::string(name) + " Gram matrix is singular (condition " +
                             std::to_string(cond) + ")",
                         cond);
  }
  FisherEstimate out;
  out.matrix = -gram.partialPivLu().solve(cross);
  out.kind = kind;
  out.eval_theta = eval_theta;
  out.condition_number = cond;
  return out;
}

}  // namespace

Matrix FisherEstimate::fisher() const {
  return kind == FisherKind::GM ? checked_inverse(matrix, "GM estimate") : matrix;
}

Matrix FisherEstimate::inverse_fisher() const {
  return kind == FisherKind::GM ? matrix : checked_inverse(matrix, "Fisher estimate");
}

Vector FisherEstimate::solve(const Vector& g) const {
  require_dim(static_cast<std::size_t>(g.size()), static_cast<std::size_t>(matrix.rows()),
              "FisherEstimate::solve");
  if (kind == FisherKind::GM) return matrix * g;
  Eigen::PartialPivLU<Matrix> lu(matrix);
  if (!(lu.rcond() > 1e-14)) {
    throw SingularDesign(std::string(to_string(kind)) + " estimate is singular",
                         1.0 / lu.rcond());
  }
  return lu.solve(g);
}

FisherEstimate mg_estimate(std::span<const Vector> theta_hats, const Vector& theta_bar,
                           std::span<const Vector> grads, const Vector& grad_bar,
                           const Vector& eval_theta) {
  return regression_estimate(theta_hats, theta_bar, grads, grad_bar, FisherKind::MG,
                             eval_theta);
}

FisherEstimate gm_estimate(std::span<const Vector> theta_hats, const Vector& theta_bar,
                           std::span<const Vector> grads, const Vector& grad_bar,
                           const Vector& eval_theta) {
  return regression_estimate(grads, grad_bar, theta_hats, theta_bar, FisherKind::GM,
                             eval_theta);
}

FisherEstimate local_hessian_estimate(const Federation& fed, const Vector& theta) {
  FisherEstimate out;
  out.matrix = local_hessian_at(fed, theta);
  out.kind = FisherKind::LocalHessian;
  out.eval_theta = theta;
  out.condition_number = symmetric_condition(out.matrix);
  return out;
}

FisherEstimate global_hessian_estimate(const Federation& fed, const Vector& theta) {
  FisherEstimate out;
  out.matrix = pooled_hessian_at(fed, theta);
  out.kind = FisherKind::GlobalHessian;
  out.eval_theta = theta;
  out.condition_number = symmetric_condition(out.matrix);
  return out;
}

double spectral_norm(const Matrix& m) {
  const Matrix gram = m.transpose() * m;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
}

double symmetric_condition(const Matrix& m) {
  if (!m.allFinite()) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

double delta1(const Matrix& a, const Matrix& i0) {
  if (a.rows() != i0.rows() || a.cols() != i0.cols()) {
    throw DimensionMismatch("delta1: shape mismatch");
  }
  return spectral_norm(i0 - a) / spectral_norm(i0);
}

double delta2(const Matrix& a, const Matrix& i0) {
  return delta2_from_inverse(checked_inverse(a, "delta2"), i0);
}

double delta2_from_inverse(const Matrix& a_inverse, const Matrix& i0) {
  if (a_inverse.rows() != i0.rows() || a_inverse.cols() != i0.cols()) {
    throw DimensionMismatch("delta2: shape mismatch");
  }
  const Matrix i0_inv = checked_inverse(i0, "delta2 reference");
  return spectral_norm(i0_inv - a_inverse) / spectral_norm(i0_inv);
}

std::string reference_key(const ModelSpec& spec, std::size_t mc_samples, std::uint64_t seed) {
  std::uint64_t h = 0;
  for (Eigen::Index k = 0; k < spec.theta0.size(); ++k) {
    h = derive_seed({h, std::bit_cast<std::uint64_t>(spec.theta0[k])});
  }
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(h));
  return std::string(to_string(spec.family)) + "-d" + std::to_string(spec.dim) + "-" + hash +
         "-" + std::string(to_string(spec.covariates)) + "-N" + std::to_string(mc_samples) +
         "-s" + std::to_string(seed);
}

ReferenceFisher reference_fisher(const ModelSpec& spec, std::size_t mc_samples,
                                 std::uint64_t seed) {
  constexpr std::size_t kBlocks = 100;
  if (mc_samples < kBlocks) {
    throw std::invalid_argument("reference_fisher: need at least 100 Monte-Carlo samples");
  }
  const std::size_t d = spec.dim;
  const auto di = static_cast<Eigen::Index>(d);
  std::vector<Matrix> block_sums(kBlocks, Matrix::Zero(di, di));
  std::vector<std::size_t> block_sizes(kBlocks, mc_samples / kBlocks);
  for (std::size_t b = 0; b < mc_samples % kBlocks; ++b) ++block_sizes[b];

  std::vector<double> s(d);
  for (std::size_t b = 0; b < kBlocks; ++b) {
    Rng rng(derive_seed({seed, 0x5ef15eULL, b}));
    Matrix& sum = block_sums[b];
    for (std::size_t i = 0; i < block_sizes[b]; ++i) {
      draw_sample(spec, rng, s);
      const double w = glm::weight(spec.family, glm::linear_predictor(s, spec.theta0.data()));
      for (std::size_t k = 0; k < d; ++k) {
        const double ws = w * s[k];
        for (std::size_t l = k; l < d; ++l) sum(k, l) += ws * s[l];
      }
    }
    for (Eigen::Index k = 0; k < di; ++k) {
      for (Eigen::Index l = k + 1; l < di; ++l) sum(l, k) = sum(k, l);
    }
  }

  Matrix total = Matrix::Zero(di, di);
  for (const Matrix& m : block_sums) total += m;
  const double count = static_cast<double>(mc_samples);

  // Delete-one-block jackknife of the mean.
  std::vector<Matrix> loo(kBlocks);
  Matrix loo_mean = Matrix::Zero(di, di);
  for (std::size_t b = 0; b < kBlocks; ++b) {
    loo[b] = (total - block_sums[b]) / (count - static_cast<double>(block_sizes[b]));
    loo_mean += loo[b];
  }
  loo_mean /= static_cast<double>(kBlocks);
  Matrix var = Matrix::Zero(di, di);
  for (const Matrix& m : loo) var += (m - loo_mean).cwiseAbs2();
  var *= static_cast<double>(kBlocks - 1) / static_cast<double>(kBlocks);

  ReferenceFisher out;
  out.mean = total / count;
  out.std_err = var.cwiseSqrt();
  out.samples = mc_samples;
  out.seed = seed;
  out.key = reference_key(spec, mc_samples, seed);
  return out;
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? 0 : static_cast<Eigen::Index>(j.front().size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

}  // namespace

ReferenceFisher cached_reference_fisher(const ModelSpec& spec, std::size_t mc_samples,
                                        std::uint64_t seed,
                                        const std::filesystem::path& cache_file) {
  const std::string key = reference_key(spec, mc_samples, seed);
  nlohmann::json cache = nlohmann::json::object();
  if (std::filesystem::exists(cache_file)) {
    std::ifstream in(cache_file);
    cache = nlohmann::json::parse(in, nullptr, false);
    if (cache.is_discarded() || !cache.is_object()) cache = nlohmann::json::object();
  }
  if (cache.contains(key)) {
    const auto& entry = cache[key];
    ReferenceFisher out;
    out.mean = matrix_from_json(entry.at("mean"));
    out.std_err = matrix_from_json(entry.at("std_err"));
    out.samples = entry.at("samples").get<std::size_t>();
    out.seed = entry.at("seed").get<std::uint64_t>();
    out.key = key;
    return out;
  }

  ReferenceFisher ref = reference_fisher(spec, mc_samples, seed);
  nlohmann::json entry;
  entry["family"] = to_string(spec.family);
  entry["d"] = spec.dim;
  entry["covariates"] = to_string(spec.covariates);
  entry["theta0"] = std::vector<double>(spec.theta0.data(), spec.theta0.data() + spec.theta0.size());
  entry["samples"] = mc_samples;
  entry["seed"] = seed;
  entry["mean"] = matrix_to_json(ref.mean);
  entry["std_err"] = matrix_to_json(ref.std_err);
  cache[key] = std::move(entry);
  if (cache_file.has_parent_path()) std::filesystem::create_directories(cache_file.parent_path());
  std::ofstream out(cache_file);
  if (!out) throw std::runtime_error("cannot write reference cache " + cache_file.string());
  out << cache.dump(2) << '\n';
  return ref;
}

}  // namespace fedfisher
