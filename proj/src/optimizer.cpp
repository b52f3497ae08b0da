#include "ibs/optimizer.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ibs/random.hpp"

namespace ibs {

namespace {

constexpr double kLogitLimit = 30.0;
// Response-surface rounds per start.
constexpr int kSurfaceRounds = 3;
// Kernel bandwidth of the pooled refit, in box units.
constexpr double kKernelWidth = 0.6;

double logit(double x) { return std::log(x) - std::log1p(-x); }
double logistic(double u) { return 1.0 / (1.0 + std::exp(-u)); }

// Search coordinates: each parameter (after an optional log-odds transform)
// rescaled so that its plausible range maps to [0, 1].
class Coordinates {
 public:
  Coordinates(const ParameterSpace& space, const std::vector<bool>& logit_mask)
      : space_(space), logit_(logit_mask) {
    const std::size_t d = space.dim();
    origin_.resize(d);
    scale_.resize(d);
    lo_.resize(d);
    hi_.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      const auto& b = space[j];
      origin_[j] = transform(j, b.plb);
      scale_[j] = transform(j, b.pub) - origin_[j];
      lo_[j] = (transform(j, b.lb) - origin_[j]) / scale_[j];
      hi_[j] = (transform(j, b.ub) - origin_[j]) / scale_[j];
    }
  }

  [[nodiscard]] std::size_t dim() const { return origin_.size(); }
  [[nodiscard]] double lo(std::size_t j) const { return lo_[j]; }
  [[nodiscard]] double hi(std::size_t j) const { return hi_[j]; }

  [[nodiscard]] std::vector<double> to_z(std::span<const double> theta) const {
    std::vector<double> z(dim());
    for (std::size_t j = 0; j < dim(); ++j) z[j] = (transform(j, theta[j]) - origin_[j]) / scale_[j];
    return z;
  }

  [[nodiscard]] std::vector<double> to_theta(std::span<const double> z) const {
    std::vector<double> theta(dim());
    for (std::size_t j = 0; j < dim(); ++j) {
      const double u = origin_[j] + scale_[j] * z[j];
      theta[j] = std::clamp(logit_[j] ? logistic(u) : u, space_[j].lb, space_[j].ub);
    }
    return theta;
  }

  void clamp(std::vector<double>& z) const {
    for (std::size_t j = 0; j < dim(); ++j) z[j] = std::clamp(z[j], lo_[j], hi_[j]);
  }

 private:
  [[nodiscard]] double transform(std::size_t j, double x) const {
    if (!logit_[j]) return x;
    return std::clamp(logit(x), -kLogitLimit, kLogitLimit);
  }

  const ParameterSpace& space_;
  std::vector<bool> logit_;
  std::vector<double> origin_;
  std::vector<double> scale_;
  std::vector<double> lo_;
  std::vector<double> hi_;
};

std::vector<bool> logit_mask(const ParameterSpace& space, const OptimizerConfig& cfg) {
  std::vector<bool> mask(space.dim(), false);
  if (cfg.logit_params) {
    for (std::size_t j : *cfg.logit_params) {
      if (j >= space.dim()) throw std::invalid_argument("OptimizerConfig: logit parameter index out of range");
      const auto& b = space[j];
      if (!(b.plb > 0.0 && b.pub < 1.0 && b.lb >= 0.0 && b.ub <= 1.0)) {
        throw std::invalid_argument("OptimizerConfig: log-odds search needs plausible bounds inside (0, 1) for '" +
                                    b.name + "'");
      }
      mask[j] = true;
    }
    return mask;
  }
  for (std::size_t j = 0; j < space.dim(); ++j) {
    const auto& b = space[j];
    mask[j] = b.name == "gamma" && b.plb > 0.0 && b.pub < 1.0 && b.lb >= 0.0 && b.ub <= 1.0;
  }
  return mask;
}

// Running summary of repeated evaluations at one point.
struct PointStats {
  std::vector<double> z;
  double sum = 0.0;
  double sum_sq = 0.0;
  double reported_var_sum = 0.0;
  int n = 0;

  void add(const Evaluation& e) {
    sum += e.value;
    sum_sq += e.value * e.value;
    if (std::isfinite(e.variance)) reported_var_sum += e.variance;
    ++n;
  }
  [[nodiscard]] double mean() const { return sum / n; }
};

class StartSearch {
 public:
  StartSearch(const Objective& f, const Coordinates& coords, const OptimizerConfig& cfg, std::uint64_t seed,
              int budget)
      : f_(f), coords_(coords), cfg_(cfg), seed_(seed), budget_(budget) {}

  StartReport run(std::span<const double> start) {
    StartReport rep;
    rep.start.assign(start.begin(), start.end());
    auto z = coords_.to_z(start);
    coords_.clamp(z);
    inc_ = PointStats{z};
    const Evaluation first = eval(z);
    inc_.add(first);
    if (std::isnan(first.variance)) {
      // no reported variance: measure the noise at the start point
      for (int i = 0; i < 4 && used_ < budget_; ++i) observe_incumbent();
      reported_variance_ = false;
    }
    noisy_ = reported_variance_ ? first.variance > 0.0 : pooled_noise_var() > 0.0;

    const int phase1_budget = noisy_ ? std::max(used_ + 1, static_cast<int>(0.35 * budget_)) : budget_;
    const bool converged = pattern_search(phase1_budget);
    std::vector<double> candidate = inc_.z;
    const bool refine = noisy_ && budget_ - used_ >= 3 * min_round();
    if (refine) candidate = response_surface();

    rep.candidate = coords_.to_theta(candidate);
    rep.search_value = inc_.mean();
    rep.evaluations = used_;
    rep.samples = samples_;
    rep.noise_sd = std::sqrt(noise_var());
    rep.budget_exhausted = !converged && !refine;
    return rep;
  }

 private:
  Evaluation eval(const std::vector<double>& z) {
    const auto theta = coords_.to_theta(z);
    const Evaluation e = f_(theta, derive_seed(seed_, static_cast<std::uint64_t>(used_)));
    ++used_;
    samples_ += e.samples;
    return e;
  }

  void observe_incumbent() {
    const double before_mean = inc_.n > 0 ? inc_.mean() : 0.0;
    const Evaluation e = eval(inc_.z);
    inc_.add(e);
    // pooled within-point spread for estimators without a reported variance
    const double after_mean = inc_.mean();
    pooled_ss_ += (e.value - before_mean) * (e.value - after_mean);
    ++pooled_df_;
  }

  [[nodiscard]] double pooled_noise_var() const { return pooled_df_ > 0 ? pooled_ss_ / pooled_df_ : 0.0; }

  // Noise variance of a single evaluation near the incumbent.
  [[nodiscard]] double noise_var() const {
    if (reported_variance_) return inc_.n > 0 ? inc_.reported_var_sum / inc_.n : 0.0;
    return pooled_noise_var();
  }

  [[nodiscard]] double eval_var(const Evaluation& e) const {
    return reported_variance_ && std::isfinite(e.variance) ? e.variance : pooled_noise_var();
  }

  bool pattern_search(int phase_budget) {
    const std::size_t d = coords_.dim();
    const double stop_mesh = noisy_ ? 0.05 : cfg_.min_mesh;
    double mesh = 0.25;
    std::size_t next_dir = 0;
    while (mesh >= stop_mesh) {
      bool success = false;
      for (std::size_t t = 0; t < 2 * d && !success; ++t) {
        if (used_ >= phase_budget) return false;
        const std::size_t dir = (next_dir + t) % (2 * d);
        auto z = inc_.z;
        z[dir / 2] += (dir % 2 == 0 ? 1.0 : -1.0) * mesh;
        coords_.clamp(z);
        if (z == inc_.z) continue;
        const Evaluation e = eval(z);
        const double threshold = noisy_ ? std::sqrt(eval_var(e) + noise_var() / inc_.n) : 0.0;
        if (e.value > inc_.mean() + threshold) {
          inc_ = PointStats{z};
          inc_.add(e);
          next_dir = dir;
          success = true;
        }
      }
      if (success) {
        mesh = std::min(2.0 * mesh, 0.5);
      } else {
        mesh *= 0.5;
        if (noisy_) {
          for (int r = 0; r < cfg_.incumbent_reestimates && used_ < phase_budget; ++r) observe_incumbent();
        }
      }
    }
    return true;
  }

  [[nodiscard]] int coefficient_count() const {
    const int d = static_cast<int>(coords_.dim());
    return 1 + d + d * (d + 1) / 2;
  }
  [[nodiscard]] int min_round() const { return 5 * coefficient_count(); }

  // Quadratic response-surface rounds around the incumbent: sample a box,
  // fit a full quadratic by least squares, move to its maximizer and reshape
  // the next box along the fitted curvature axes so the surface drops by
  // about the noise level at its edge. A kernel-weighted refit over all
  // rounds' points then picks the final candidate.
  std::vector<double> response_surface() {
    const std::size_t d = coords_.dim();
    const int ncoef = coefficient_count();
    Eigen::VectorXd center = Eigen::Map<const Eigen::VectorXd>(inc_.z.data(), static_cast<Eigen::Index>(d));
    // box axes in search coordinates, one per column
    Eigen::MatrixXd axes = Eigen::MatrixXd::Identity(d, d) * 0.3;
    const double target = std::clamp(std::sqrt(noise_var()), 1.0, 20.0);
    Rng rng(derive_seed(seed_, 0x5EED5));
    const int rounds = kSurfaceRounds;
    for (int round = 0; round < rounds; ++round) {
      const int left = budget_ - used_;
      const int n = round == rounds - 1 ? left : left / (rounds - round);
      if (n < ncoef + 2) break;

      const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> axes_qr(axes);
      Eigen::MatrixXd X(n, ncoef);
      Eigen::VectorXd y(n);
      for (int i = 0; i < n; ++i) {
        Eigen::VectorXd u(d);
        for (std::size_t j = 0; j < d; ++j) u(j) = 2.0 * rng.uniform() - 1.0;
        const Eigen::VectorXd zv = center + axes * u;
        std::vector<double> z(zv.data(), zv.data() + d);
        coords_.clamp(z);
        // design coordinates of the point actually evaluated
        u = axes_qr.solve(Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(d)) - center);
        y(i) = eval(z).value;
        pts_.push_back(Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(d)));
        vals_.push_back(y(i));
        int col = 0;
        X(i, col++) = 1.0;
        for (std::size_t j = 0; j < d; ++j) X(i, col++) = u(j);
        for (std::size_t j = 0; j < d; ++j) {
          for (std::size_t k = j; k < d; ++k) X(i, col++) = u(j) * u(k);
        }
      }
      const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
      Eigen::VectorXd g(d);
      Eigen::MatrixXd H(d, d);
      int col = 1;
      for (std::size_t j = 0; j < d; ++j) g(j) = beta(col++);
      for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t k = j; k < d; ++k) {
          const double c = beta(col++);
          if (j == k) {
            H(j, j) = 2.0 * c;
          } else {
            H(j, k) = c;
            H(k, j) = c;
          }
        }
      }

      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(-H);
      const Eigen::VectorXd lambda = eig.eigenvalues();
      Eigen::VectorXd step(d);
      if (lambda.minCoeff() > 0.0) {
        step = H.ldlt().solve(-g);
      } else {
        // no interior maximum: take the best fitted design point
        double best = -std::numeric_limits<double>::infinity();
        step.setZero();
        const Eigen::VectorXd fitted = X * beta;
        for (int i = 0; i < n; ++i) {
          if (fitted(i) > best) {
            best = fitted(i);
            step = X.row(i).segment(1, static_cast<Eigen::Index>(d)).transpose();
          }
        }
      }
      // stay within the sampled box
      const double overshoot = step.cwiseAbs().maxCoeff();
      if (overshoot > 1.0) step /= overshoot;
      center += axes * step;
      std::vector<double> cz(center.data(), center.data() + d);
      coords_.clamp(cz);
      center = Eigen::Map<const Eigen::VectorXd>(cz.data(), static_cast<Eigen::Index>(d));

      // curvature along V_k in box units is lambda_k; the drop at distance s is lambda_k s^2 / 2
      Eigen::VectorXd scale(d);
      for (std::size_t k = 0; k < d; ++k) {
        scale(k) = lambda(k) > 0.0 ? std::clamp(std::sqrt(2.0 * target / lambda(k)), 0.25, 4.0) : 2.0;
      }
      axes = axes * eig.eigenvectors() * scale.asDiagonal();
      for (std::size_t k = 0; k < d; ++k) {
        const double len = axes.col(k).norm();
        axes.col(k) *= std::clamp(len, 0.01, 1.0) / len;
      }
    }
    if (!pts_.empty()) center = local_refit(center, axes);
    return {center.data(), center.data() + d};
  }

  // Kernel-weighted quadratic refits over every surface evaluation, each
  // centered on the previous maximizer. Pooling the rounds triples the data
  // behind the final fit while the kernel keeps the skew bias of distant
  // points out of it.
  Eigen::VectorXd local_refit(Eigen::VectorXd center, const Eigen::MatrixXd& axes) const {
    const std::size_t d = coords_.dim();
    const int ncoef = coefficient_count();
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> axes_qr(axes);
    const auto n = static_cast<Eigen::Index>(pts_.size());
    for (int it = 0; it < 10; ++it) {
      Eigen::MatrixXd X(n, ncoef);
      Eigen::VectorXd y(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd u = axes_qr.solve(pts_[static_cast<std::size_t>(i)] - center);
        const double w = std::sqrt(std::exp(-0.5 * u.squaredNorm() / (kKernelWidth * kKernelWidth)));
        int col = 0;
        X(i, col++) = w;
        for (std::size_t j = 0; j < d; ++j) X(i, col++) = w * u(j);
        for (std::size_t j = 0; j < d; ++j) {
          for (std::size_t k = j; k < d; ++k) X(i, col++) = w * u(j) * u(k);
        }
        y(i) = w * vals_[static_cast<std::size_t>(i)];
      }
      const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
      Eigen::VectorXd g(d);
      Eigen::MatrixXd H(d, d);
      int col = 1;
      for (std::size_t j = 0; j < d; ++j) g(j) = beta(col++);
      for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t k = j; k < d; ++k) {
          const double c = beta(col++);
          H(j, k) = j == k ? 2.0 * c : c;
          H(k, j) = H(j, k);
        }
      }
      if (Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(-H).eigenvalues().minCoeff() <= 0.0) break;
      Eigen::VectorXd step = H.ldlt().solve(-g);
      const double overshoot = step.cwiseAbs().maxCoeff();
      if (overshoot > kKernelWidth) step *= kKernelWidth / overshoot;
      center += axes * step;
      std::vector<double> cz(center.data(), center.data() + d);
      coords_.clamp(cz);
      center = Eigen::Map<const Eigen::VectorXd>(cz.data(), static_cast<Eigen::Index>(d));
      if (step.norm() < 1e-3) break;
    }
    return center;
  }

  const Objective& f_;
  const Coordinates& coords_;
  const OptimizerConfig& cfg_;
  std::uint64_t seed_;
  int budget_;
  std::vector<Eigen::VectorXd> pts_;
  std::vector<double> vals_;
  int used_ = 0;
  std::int64_t samples_ = 0;
  PointStats inc_;
  bool noisy_ = false;
  bool reported_variance_ = true;
  double pooled_ss_ = 0.0;
  int pooled_df_ = 0;
};

}  // namespace

std::string describe(const EstimatorSpec& spec) {
  std::ostringstream os;
  if (const auto* ibs = std::get_if<IbsEstimator>(&spec)) {
    os << "ibs(R=" << ibs->repeats << ")";
  } else if (const auto* fixed = std::get_if<FixedEstimator>(&spec)) {
    os << "fixed(M=" << fixed->samples << ")";
  } else {
    os << "exact";
  }
  return os.str();
}

EstimatorSpec scale_precision(const EstimatorSpec& spec, int multiplier) {
  if (multiplier < 1) throw std::invalid_argument("scale_precision: multiplier must be >= 1");
  if (const auto* ibs = std::get_if<IbsEstimator>(&spec)) {
    auto out = *ibs;
    out.repeats *= multiplier;
    return out;
  }
  if (const auto* fixed = std::get_if<FixedEstimator>(&spec)) {
    auto out = *fixed;
    out.samples *= multiplier;
    return out;
  }
  return spec;
}

std::vector<std::vector<double>> default_starts(const ParameterSpace& space) {
  const std::size_t d = space.dim();
  if (d == 0) throw std::invalid_argument("default_starts: empty parameter space");
  if (d > 20) throw std::invalid_argument("default_starts: too many parameters for a full factorial");
  std::vector<std::vector<double>> out;
  for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
    std::vector<double> x(d);
    for (std::size_t j = 0; j < d; ++j) {
      const auto& b = space[j];
      // the first parameter varies slowest
      const bool upper = (mask >> (d - 1 - j)) & 1U;
      x[j] = b.plb + (upper ? 2.0 : 1.0) * (b.pub - b.plb) / 3.0;
    }
    out.push_back(std::move(x));
  }
  return out;
}

FitResult maximize(const Objective& search, const Objective& final_estimate, const ParameterSpace& space,
                   const OptimizerConfig& cfg) {
  const std::size_t d = space.dim();
  if (d == 0) throw std::invalid_argument("maximize: empty parameter space");
  const auto starts = cfg.starts.empty() ? default_starts(space) : cfg.starts;
  for (const auto& s : starts) {
    if (s.size() != d) throw std::invalid_argument("maximize: start point has the wrong dimension");
    space.validate(s);
  }
  const int budget = cfg.max_evaluations > 0 ? cfg.max_evaluations : 500 * static_cast<int>(d);
  const Coordinates coords(space, logit_mask(space, cfg));

  FitResult result;
  for (std::size_t s = 0; s < starts.size(); ++s) {
    StartSearch search_run(search, coords, cfg, derive_seed(cfg.seed, s, 1), budget);
    auto rep = search_run.run(starts[s]);
    const Evaluation fin = final_estimate(rep.candidate, derive_seed(cfg.seed, s, 2));
    rep.reestimated = fin.value;
    rep.reestimated_se = std::sqrt(fin.variance);
    rep.samples += fin.samples;
    result.evaluations_used += rep.evaluations;
    result.samples_used += rep.samples;
    result.starts.push_back(std::move(rep));
  }

  // highest re-estimate, then fewest samples, then lowest start index
  std::size_t best = 0;
  for (std::size_t s = 1; s < result.starts.size(); ++s) {
    const auto& a = result.starts[s];
    const auto& b = result.starts[best];
    if (a.reestimated > b.reestimated || (a.reestimated == b.reestimated && a.samples < b.samples)) best = s;
  }
  const auto& win = result.starts[best];
  result.best_start = best;
  result.theta_hat = win.candidate;
  result.loglik = win.reestimated;
  result.loglik_se = win.reestimated_se;
  result.budget_exhausted = win.budget_exhausted;
  return result;
}

std::vector<double> compass_search(const std::function<double(std::span<const double>)>& f,
                                   const ParameterSpace& space, std::span<const double> x0, double initial_step,
                                   double tolerance, int max_evaluations) {
  const std::size_t d = space.dim();
  if (x0.size() != d) throw std::invalid_argument("compass_search: start has the wrong dimension");
  std::vector<double> x = space.clamp(x0);
  double fx = f(x);
  int used = 1;
  double step = initial_step;
  while (step >= tolerance && used < max_evaluations) {
    bool improved = false;
    for (std::size_t j = 0; j < d && !improved; ++j) {
      for (double sign : {1.0, -1.0}) {
        auto y = x;
        y[j] += sign * step * (space[j].pub - space[j].plb);
        y = space.clamp(y);
        if (y == x) continue;
        const double fy = f(y);
        ++used;
        if (fy > fx) {
          x = std::move(y);
          fx = fy;
          improved = true;
          break;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return x;
}

}  // namespace ibs
