#include "isarah/problems.hpp"

#include "isarah/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace isarah {

namespace {

// log(1 + e^t) without overflow.
double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

std::size_t component(SampleId xi) { return static_cast<std::size_t>(xi.value - 1); }

}  // namespace

// ---------------------------------------------------------------------------------------
// QuadraticFiniteSum

QuadraticFiniteSum::QuadraticFiniteSum(Matrix diagonals, Matrix shifts)
    : diagonals_(std::move(diagonals)), shifts_(std::move(shifts)) {
  if (diagonals_.rows() < 1 || diagonals_.cols() < 1)
    throw InvalidArgument("quadratic: need at least one component and one dimension");
  if (shifts_.rows() != diagonals_.rows() || shifts_.cols() != diagonals_.cols())
    throw InvalidArgument("quadratic: diagonals and shifts must have the same shape");
  if (!diagonals_.allFinite() || !shifts_.allFinite()) throw InvalidArgument("quadratic: non-finite input");
  if ((diagonals_.array() < 0.0).any()) throw InvalidArgument("quadratic: curvatures must be non-negative");

  const double n = static_cast<double>(diagonals_.rows());
  const Vector mean_curvature = diagonals_.colwise().sum().transpose() / n;
  const double L = diagonals_.maxCoeff();
  if (!(L > 0.0)) throw InvalidArgument("quadratic: all curvatures are zero");

  Vector w_star(dimension());
  for (Eigen::Index j = 0; j < dimension(); ++j) {
    const double weight = diagonals_.col(j).sum();
    w_star(j) = weight > 0.0 ? diagonals_.col(j).dot(shifts_.col(j)) / weight : 0.0;
  }

  double sigma = 0.0;
  for (Eigen::Index i = 0; i < diagonals_.rows(); ++i) {
    const Vector g = diagonals_.row(i).transpose().cwiseProduct(w_star - shifts_.row(i).transpose());
    sigma += g.squaredNorm();
  }

  constants_.L = L;
  constants_.n_components = diagonals_.rows();
  constants_.w_star = w_star;
  constants_.sigma_star_sq = sigma / n;
  constants_.f_star = value_full(w_star);
  const double mu = mean_curvature.minCoeff();
  if (mu > 0.0) {
    constants_.mu = mu;
    constants_.M = 1.0 / (2.0 * mu);
    constants_.N = 0.0;
  }
}

void QuadraticFiniteSum::do_grad_sample(const Vector& w, SampleId xi, Vector& out) const {
  const auto i = static_cast<Eigen::Index>(component(xi));
  out = diagonals_.row(i).transpose().cwiseProduct(w - shifts_.row(i).transpose());
}

double QuadraticFiniteSum::do_value_sample(const Vector& w, SampleId xi) const {
  const auto i = static_cast<Eigen::Index>(component(xi));
  const Vector r = w - shifts_.row(i).transpose();
  return 0.5 * r.dot(diagonals_.row(i).transpose().cwiseProduct(r));
}

QuadraticFiniteSum make_quadratic(std::int64_t n, Eigen::Index d, double kappa_target, RandomStream& rng,
                                  const QuadraticOptions& options) {
  if (n < 1 || d < 1) throw InvalidArgument("make_quadratic: n and d must be >= 1");
  if (!(kappa_target >= 1.0) || !std::isfinite(kappa_target))
    throw InvalidArgument("make_quadratic: kappa_target must be >= 1");
  if (!(options.spread >= 0.0 && options.spread <= 1.0))
    throw InvalidArgument("make_quadratic: spread must lie in [0, 1]");
  if (!(options.shift_scale >= 0.0)) throw InvalidArgument("make_quadratic: shift_scale must be >= 0");

  QuadraticFiniteSum::Matrix A(n, d);
  QuadraticFiniteSum::Matrix C(n, d);

  if (d == 1) {
    A.setOnes();
    if (kappa_target > 1.0) {
      if (n == 1 || kappa_target > static_cast<double>(n))
        throw InvalidArgument("make_quadratic: kappa " + std::to_string(kappa_target) +
                              " is not realizable with d = 1 and n = " + std::to_string(n));
      // One stiff component at kappa, the rest share the remainder so the mean stays 1.
      A(0, 0) = kappa_target;
      const double rest = (static_cast<double>(n) - kappa_target) / static_cast<double>(n - 1);
      for (std::int64_t i = 1; i < n; ++i) A(i, 0) = rest;
    }
  } else {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (Eigen::Index j = 0; j < d; ++j) {
      // Mean curvatures log-spaced from 1 (coordinate 0) to kappa (last coordinate).
      const double mean = std::pow(kappa_target, static_cast<double>(j) / static_cast<double>(d - 1));
      const double rho = std::min(options.spread, std::max(0.0, kappa_target / mean - 1.0));
      Vector u(n);
      for (std::int64_t i = 0; i < n; ++i) u(i) = unit(rng);
      u.array() -= u.mean();
      const double scale = u.cwiseAbs().maxCoeff();
      if (n == 1 || scale == 0.0 || rho == 0.0) {
        A.col(j).setConstant(mean);
      } else {
        A.col(j) = (mean * (1.0 + rho * u.array() / scale)).matrix();
      }
    }
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::int64_t i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) C(i, j) = options.shift_scale * normal(rng);
  return QuadraticFiniteSum(std::move(A), std::move(C));
}

// ---------------------------------------------------------------------------------------
// LogisticProblem

LogisticProblem::LogisticProblem(LabeledDataset data, double lambda) : data_(std::move(data)), lambda_(lambda) {
  if (data_.rows() < 1) throw DataError("logistic: dataset has no rows");
  if (data_.dimension < 1) throw DataError("logistic: dataset has no features");
  if (!(lambda_ >= 0.0) || !std::isfinite(lambda_)) throw InvalidArgument("logistic: lambda must be >= 0");
  if (data_.row_offsets.size() != data_.labels.size() + 1) throw DataError("logistic: inconsistent row offsets");
  for (double y : data_.labels)
    if (y != 1.0 && y != -1.0) throw DataError("logistic: labels must be -1 or +1");

  double max_sq = 0.0;
  for (std::int64_t r = 0; r < data_.rows(); ++r) {
    double sq = 0.0;
    for (auto k = data_.row_offsets[r]; k < data_.row_offsets[r + 1]; ++k) sq += data_.values[k] * data_.values[k];
    max_sq = std::max(max_sq, sq);
  }
  constants_.L = max_sq / 4.0 + lambda_;
  if (!(*constants_.L > 0.0)) throw DataError("logistic: all feature vectors are zero and lambda = 0");
  constants_.n_components = data_.rows();
  if (lambda_ > 0.0) constants_.mu = lambda_;
  // Log-loss is non-negative, so 0 is always a valid lower bound until w* is known.
  constants_.f_star = 0.0;
}

double LogisticProblem::margin(const Vector& w, std::int64_t row) const {
  double z = 0.0;
  for (auto k = data_.row_offsets[row]; k < data_.row_offsets[row + 1]; ++k) z += data_.values[k] * w(data_.columns[k]);
  return data_.labels[row] * z;
}

void LogisticProblem::do_grad_sample(const Vector& w, SampleId xi, Vector& out) const {
  const auto row = static_cast<std::int64_t>(component(xi));
  const double coeff = -data_.labels[row] * sigmoid(-margin(w, row));
  out = lambda_ * w;
  for (auto k = data_.row_offsets[row]; k < data_.row_offsets[row + 1]; ++k) out(data_.columns[k]) += coeff * data_.values[k];
}

double LogisticProblem::do_value_sample(const Vector& w, SampleId xi) const {
  const auto row = static_cast<std::int64_t>(component(xi));
  return softplus(-margin(w, row)) + 0.5 * lambda_ * w.squaredNorm();
}

void LogisticProblem::set_reference_solution(const Vector& w_star) {
  if (w_star.size() != dimension()) throw ContractViolation("logistic: reference solution has wrong dimension");
  Vector g(dimension());
  double sigma = 0.0;
  for (std::int64_t i = 1; i <= data_.rows(); ++i) {
    grad_sample(w_star, SampleId{static_cast<std::uint64_t>(i)}, g);
    sigma += g.squaredNorm();
  }
  set_reference_constants(w_star, value_full(w_star), sigma / static_cast<double>(data_.rows()));
}

void LogisticProblem::set_reference_constants(const Vector& w_star, double f_star, double sigma_star_sq) {
  constants_.w_star = w_star;
  constants_.f_star = f_star;
  constants_.sigma_star_sq = sigma_star_sq;
  if (constants_.mu) {
    constants_.M = 1.0 / (2.0 * *constants_.mu);
    constants_.N = 0.0;
  }
}

// ---------------------------------------------------------------------------------------
// ModifiedLogistic1D

ModifiedLogistic1D::ModifiedLogistic1D(double lambda) : lambda_(lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidArgument("modified_logistic: lambda must be > 0");
  constants_.L = 0.25 + lambda;
  constants_.n_components = 1;
  constants_.f_star = 0.0;
  constants_.sigma_star_sq = 0.0;
  // Certified (not tight) growth pair: the penalized branch is lambda-strongly convex and
  // the other branch is bounded by log(1 + e^2).
  constants_.M = 1.0 / (2.0 * lambda);
  constants_.N = std::log1p(std::exp(2.0));
}

double ModifiedLogistic1D::value(double w) const {
  const double base = softplus(-w);
  return w < -2.0 ? base + 0.5 * lambda_ * (w + 2.0) * (w + 2.0) : base;
}

double ModifiedLogistic1D::derivative(double w) const {
  const double base = -sigmoid(-w);
  return w < -2.0 ? base + lambda_ * (w + 2.0) : base;
}

void ModifiedLogistic1D::do_grad_sample(const Vector& w, SampleId, Vector& out) const { out(0) = derivative(w(0)); }

double ModifiedLogistic1D::do_value_sample(const Vector& w, SampleId) const { return value(w(0)); }

ModifiedLogistic1D modified_logistic(double lambda) { return ModifiedLogistic1D(lambda); }

// ---------------------------------------------------------------------------------------
// NoisyQuadratic

NoisyQuadratic::NoisyQuadratic(Vector curvature, Vector center, double noise, double rho)
    : curvature_(std::move(curvature)), center_(std::move(center)), noise_(noise), rho_(rho) {
  if (curvature_.size() < 1 || curvature_.size() != center_.size())
    throw InvalidArgument("noisy_quadratic: curvature and center must be non-empty and the same size");
  if (!curvature_.allFinite() || !center_.allFinite() || (curvature_.array() <= 0.0).any())
    throw InvalidArgument("noisy_quadratic: curvatures must be finite and positive");
  if (!(noise_ >= 0.0) || !std::isfinite(noise_)) throw InvalidArgument("noisy_quadratic: noise must be >= 0");
  if (!(rho_ >= 0.0 && rho_ < 1.0)) throw InvalidArgument("noisy_quadratic: rho must lie in [0, 1)");

  constants_.L = (1.0 + rho_) * curvature_.maxCoeff();
  constants_.mu = curvature_.minCoeff();
  constants_.w_star = center_;
  constants_.f_star = 0.5 * noise_ * noise_ * curvature_.sum();
  constants_.sigma_star_sq = noise_ * noise_ * (1.0 + rho_ * rho_ / 3.0) * curvature_.squaredNorm();
  constants_.M = 1.0 / (2.0 * *constants_.mu);
  constants_.N = 0.0;
}

void NoisyQuadratic::realize(SampleId xi, Vector& h, Vector& z) const {
  RandomStream engine(xi.value);
  std::uniform_real_distribution<double> u(1.0 - rho_, 1.0 + rho_);
  std::normal_distribution<double> normal(0.0, noise_ > 0.0 ? noise_ : 1.0);
  h.resize(dimension());
  z.resize(dimension());
  for (Eigen::Index j = 0; j < dimension(); ++j) {
    h(j) = curvature_(j) * (rho_ > 0.0 ? u(engine) : 1.0);
    z(j) = noise_ > 0.0 ? normal(engine) : 0.0;
  }
}

void NoisyQuadratic::do_grad_sample(const Vector& w, SampleId xi, Vector& out) const {
  Vector h, z;
  realize(xi, h, z);
  out = h.cwiseProduct(w - center_ - z);
}

double NoisyQuadratic::do_value_sample(const Vector& w, SampleId xi) const {
  Vector h, z;
  realize(xi, h, z);
  const Vector r = w - center_ - z;
  return 0.5 * r.dot(h.cwiseProduct(r));
}

Vector NoisyQuadratic::analytic_gradient(const Vector& w) const { return curvature_.cwiseProduct(w - center_); }

double NoisyQuadratic::analytic_value(const Vector& w) const {
  const Vector r = w - center_;
  return 0.5 * r.dot(curvature_.cwiseProduct(r)) + *constants_.f_star;
}

// ---------------------------------------------------------------------------------------

Vector solve_reference(const StochasticProblem& problem, Vector w0, double tol, std::int64_t max_iterations) {
  const auto& c = problem.constants();
  if (!c.L) throw MissingConstant("L");
  const double step = 1.0 / *c.L;
  Vector w = std::move(w0);
  for (std::int64_t k = 0; k < max_iterations; ++k) {
    const Vector g = problem.grad_full(w);
    if (g.norm() <= tol) return w;
    w -= step * g;
    if (!w.allFinite()) break;
  }
  throw NonConvergence(problem.name() + ": reference solve did not reach gradient norm " + std::to_string(tol));
}

void save_sidecar(const std::filesystem::path& path, const LogisticProblem& problem) {
  const auto& c = problem.constants();
  if (!c.w_star || !c.f_star || !c.sigma_star_sq) throw MissingConstant("w_star");
  nlohmann::json j;
  j["format"] = "isarah-constants";
  j["version"] = 1;
  j["n"] = problem.data().rows();
  j["d"] = problem.dimension();
  j["lambda"] = problem.lambda();
  j["L"] = *c.L;
  if (c.mu) j["mu"] = *c.mu;
  j["f_star"] = *c.f_star;
  j["sigma_star_sq"] = *c.sigma_star_sq;
  j["w_star"] = std::vector<double>(c.w_star->data(), c.w_star->data() + c.w_star->size());
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ResourceError("cannot write sidecar " + path.string());
  out << j.dump(2) << '\n';
}

void load_sidecar(const std::filesystem::path& path, LogisticProblem& problem) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open sidecar " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    if (j.at("format") != "isarah-constants") throw DataError("sidecar " + path.string() + ": unknown format");
    if (j.at("n").get<std::int64_t>() != problem.data().rows() || j.at("d").get<std::int64_t>() != problem.dimension() ||
        j.at("lambda").get<double>() != problem.lambda())
      throw DataError("sidecar " + path.string() + " does not match the dataset");
    const auto w = j.at("w_star").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != problem.dimension()) throw DataError("sidecar w_star has wrong size");
    problem.set_reference_constants(Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size())),
                                    j.at("f_star").get<double>(), j.at("sigma_star_sq").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError("sidecar " + path.string() + ": " + e.what());
  }
}

void ensure_reference_constants(LogisticProblem& problem, const std::filesystem::path& sidecar) {
  if (std::filesystem::exists(sidecar)) {
    load_sidecar(sidecar, problem);
    return;
  }
  problem.set_reference_solution(solve_reference(problem, Vector::Zero(problem.dimension())));
  save_sidecar(sidecar, problem);
}

}  // namespace isarah
