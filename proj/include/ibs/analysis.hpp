#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ibs/engine.hpp"
#include "ibs/optimizer.hpp"
#include "ibs/special_functions.hpp"

namespace ibs {

/// Rows of numbers, optionally keyed by text labels (method names and the
/// like). Every row records how many Monte Carlo replications produced it
/// (0 for exact computations) and the seed of its streams.
class CurveTable {
 public:
  CurveTable() = default;
  CurveTable(std::vector<std::string> label_columns, std::vector<std::string> value_columns);

  /// Throws std::invalid_argument when the row does not match the columns.
  void add_row(std::vector<std::string> labels, std::vector<double> values, std::int64_t replications = 0,
               std::uint64_t seed = 0);

  [[nodiscard]] std::size_t rows() const noexcept { return values_.size(); }
  [[nodiscard]] const std::vector<std::string>& label_columns() const noexcept { return label_columns_; }
  [[nodiscard]] const std::vector<std::string>& value_columns() const noexcept { return value_columns_; }
  [[nodiscard]] const std::vector<std::string>& labels(std::size_t row) const { return labels_.at(row); }
  [[nodiscard]] const std::vector<double>& values(std::size_t row) const { return values_.at(row); }
  [[nodiscard]] std::int64_t replications(std::size_t row) const { return replications_.at(row); }
  [[nodiscard]] std::uint64_t seed(std::size_t row) const { return seeds_.at(row); }

  /// Whole value column; throws std::out_of_range for an unknown name.
  [[nodiscard]] std::vector<double> column(std::string_view name) const;
  [[nodiscard]] std::size_t value_index(std::string_view name) const;

  /// Header row, then one line per row; numbers round-trip exactly.
  [[nodiscard]] std::string to_csv() const;

 private:
  std::vector<std::string> label_columns_;
  std::vector<std::string> value_columns_;
  std::vector<std::vector<std::string>> labels_;
  std::vector<std::vector<double>> values_;
  std::vector<std::int64_t> replications_;
  std::vector<std::uint64_t> seeds_;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

struct SampleSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  double skew = 0.0;
  double excess_kurtosis = 0.0;
};

SampleSummary summarize(std::span<const double> x);

/// Linear-interpolation quantile (the common "type 7" definition).
double quantile(std::vector<double> x, double q);

/// n points from lo to hi, equally spaced in log.
std::vector<double> log_grid(double lo, double hi, std::size_t n);

// ---------------------------------------------------------------------------
// Bias and variance curves

/// Exact curves over p: IBS (zero bias, sd sqrt(Li2(1-p)/R), 1/p samples per
/// repeat) for every R, and fixed sampling (exact binomial bias and sd, M
/// samples) for every M. Columns are named ibs_R<r>_{bias,sd,samples} and
/// fixed_M<m>_{bias,sd,samples}.
CurveTable bias_variance_curves(std::span<const double> p_grid, std::span<const std::int64_t> m_list,
                                std::span<const int> r_list);

/// Monte Carlo counterpart of bias_variance_curves: per cell the mean error,
/// its standard error, and the sample sd, from `replications` runs.
CurveTable bias_variance_monte_carlo(std::span<const double> p_grid, std::span<const std::int64_t> m_list,
                                     std::span<const int> r_list, std::int64_t replications, std::uint64_t seed);

/// Fixed-sampling exact bias at p = lambda / M next to the master curve.
CurveTable master_curve_table(std::span<const double> lambda_grid, std::span<const std::int64_t> m_list);

/// sqrt(Li2(1-p)) / sqrt(1-p): IBS standard deviation over the information
/// lower bound for an unbiased estimator.
CurveTable info_bound_table(std::span<const double> p_grid);

// ---------------------------------------------------------------------------
// Calibration

inline constexpr double kCoverageBetas[3] = {1.0, 1.96, 2.58};

struct CalibrationSide {
  std::vector<double> z;
  /// Fraction of |z| <= beta for each entry of kCoverageBetas.
  std::vector<double> coverage;
  SampleSummary summary;
};

struct CalibrationReport {
  /// z from the exact variance sum Li2(1-p_i) / R.
  CalibrationSide exact_variance;
  /// z from the variance the estimator reports about itself.
  CalibrationSide estimated_variance;
  /// Standardized total sample counts.
  SampleSummary total_samples;
  std::vector<double> exact_loglik;
  std::vector<double> estimate;
  std::uint64_t seed = 0;

  [[nodiscard]] CurveTable coverage_table() const;
  [[nodiscard]] CurveTable dataset_table() const;
};

CalibrationSide calibration_side(std::vector<double> z);

/// Dataset d is generated from derive_seed(seed, d, 0) and estimated with
/// master seed derive_seed(seed, d, 1).
template <ExactLikelihoodModel M>
CalibrationReport calibration_experiment(const M& model, std::span<const double> theta_true, int n_trials,
                                         int n_datasets, const EngineConfig& engine, std::uint64_t seed) {
  if (n_datasets < 2) throw std::invalid_argument("calibration_experiment: need at least two datasets");
  CalibrationReport out;
  out.seed = seed;
  std::vector<double> z_exact;
  std::vector<double> z_est;
  std::vector<double> k_tot;
  const auto params = model.prepare(theta_true);
  for (int d = 0; d < n_datasets; ++d) {
    const auto data = model.generate(n_trials, theta_true, derive_seed(seed, static_cast<std::uint64_t>(d), 0));
    double exact = 0.0;
    double var_exact = 0.0;
    for (const auto& t : data.trials) {
      const double l = model.exact_trial_loglik(t.stimulus, t.response, params);
      exact += l;
      var_exact += dilog_one_minus(std::exp(l));
    }
    EngineConfig cfg = engine;
    cfg.master_seed = derive_seed(seed, static_cast<std::uint64_t>(d), 1);
    cfg.record_trials = false;
    const auto rep = estimate_parallel(model, data, theta_true, cfg);
    if (rep.stopped_early) throw std::runtime_error("calibration_experiment: run stopped early");
    var_exact /= static_cast<double>(cfg.repeats);
    out.exact_loglik.push_back(exact);
    out.estimate.push_back(rep.loglik);
    z_exact.push_back((rep.loglik - exact) / std::sqrt(var_exact));
    z_est.push_back((rep.loglik - exact) / std::sqrt(rep.variance));
    k_tot.push_back(static_cast<double>(rep.total_samples));
  }
  out.exact_variance = calibration_side(std::move(z_exact));
  out.estimated_variance = calibration_side(std::move(z_est));
  const auto ks = summarize(k_tot);
  for (double& k : k_tot) k = (k - ks.mean) / ks.sd;
  out.total_samples = summarize(k_tot);
  return out;
}

// ---------------------------------------------------------------------------
// Parameter recovery

struct RecoveryFit {
  std::size_t theta_index = 0;
  std::size_t dataset = 0;
  std::string method;
  std::vector<double> theta_true;
  std::vector<double> theta_hat;
  double loglik = std::numeric_limits<double>::quiet_NaN();
  double loglik_se = std::numeric_limits<double>::quiet_NaN();
  /// Exact log-likelihood at theta_hat; NaN for simulator-only models.
  double exact_loglik_at_hat = std::numeric_limits<double>::quiet_NaN();
  /// Simulator samples per trial per evaluation during the search.
  double samples_per_trial = 0.0;
  int evaluations = 0;
  bool budget_exhausted = false;
  /// "ok", or the error that stopped this cell.
  std::string status = "ok";
};

struct RecoveryStudy {
  std::vector<std::string> parameter_names;
  std::vector<std::string> methods;
  std::vector<RecoveryFit> fits;
  std::uint64_t seed = 0;

  /// Fits of `method` in (theta, dataset) order.
  [[nodiscard]] std::vector<const RecoveryFit*> of(std::string_view method) const;
  /// One row per fit.
  [[nodiscard]] CurveTable fits_table() const;
  /// One row per (theta, method): bias, sd and RMSE per parameter, average
  /// samples per trial, median log-likelihood loss and the failure count.
  [[nodiscard]] CurveTable summary_table() const;
  /// Exact log-likelihood lost by each fit relative to the best exact value
  /// any method reached on the same dataset. NaN without an exact likelihood.
  [[nodiscard]] double loss(const RecoveryFit& fit) const;
};

/// Fits every estimator variant to n_datasets synthetic datasets per grid
/// point. Dataset (t, d) comes from derive_seed(seed, t, d, 0); variant v is
/// fitted with optimizer seed derive_seed(seed, t, d, 1 + v). Errors are
/// recorded per cell and do not abort the sweep.
template <SimulatorModel M>
RecoveryStudy rmse_sweep(const M& model, const std::vector<std::vector<double>>& theta_grid,
                         const std::vector<EstimatorSpec>& variants, int n_datasets, int n_trials,
                         const OptimizerConfig& optimizer, std::uint64_t seed, int threads = 0) {
  RecoveryStudy out;
  out.seed = seed;
  const auto space = model.parameter_space();
  for (const auto& p : space.params()) out.parameter_names.push_back(p.name);
  for (const auto& v : variants) out.methods.push_back(describe(v));
  for (std::size_t t = 0; t < theta_grid.size(); ++t) {
    space.validate(theta_grid[t]);
    for (int d = 0; d < n_datasets; ++d) {
      const auto ud = static_cast<std::uint64_t>(d);
      const auto data = model.generate(n_trials, theta_grid[t], derive_seed(seed, t, ud, 0));
      for (std::size_t v = 0; v < variants.size(); ++v) {
        RecoveryFit rec;
        rec.theta_index = t;
        rec.dataset = static_cast<std::size_t>(d);
        rec.method = out.methods[v];
        rec.theta_true = theta_grid[t];
        try {
          OptimizerConfig cfg = optimizer;
          cfg.seed = derive_seed(seed, t, ud, 1 + v);
          const auto fit = fit_mle(model, data, variants[v], cfg, threads);
          rec.theta_hat = fit.theta_hat;
          rec.loglik = fit.loglik;
          rec.loglik_se = fit.loglik_se;
          rec.evaluations = fit.evaluations_used;
          rec.budget_exhausted = fit.budget_exhausted;
          if (fit.evaluations_used > 0) {
            rec.samples_per_trial = static_cast<double>(fit.samples_used) /
                                    (static_cast<double>(fit.evaluations_used) * static_cast<double>(data.size()));
          }
          if constexpr (ExactLikelihoodModel<M>) rec.exact_loglik_at_hat = exact_loglik(model, data, fit.theta_hat);
        } catch (const std::exception& e) {
          rec.status = e.what();
        }
        out.fits.push_back(std::move(rec));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Log-likelihood RMSE at equal sample budgets

/// RMSE of whole-dataset log-likelihood estimates for N trials whose
/// probabilities are drawn (with replacement) from `p_pool`. IBS runs with
/// each R in r_list, fixed sampling with each M in m_list. Columns: N,
/// samples_per_trial, rmse, bias, sd; label: method.
CurveTable estimator_rmse_study(std::span<const double> p_pool, std::span<const int> n_list,
                                std::span<const int> r_list, std::span<const std::int64_t> m_list,
                                std::int64_t replications, std::uint64_t seed);

/// Per-trial exact response probabilities of a dataset under theta.
template <ExactLikelihoodModel M>
std::vector<double> trial_probabilities(const M& model, const DatasetFor<M>& data, std::span<const double> theta) {
  const auto params = model.prepare(theta);
  std::vector<double> p;
  p.reserve(data.size());
  for (const auto& t : data.trials) p.push_back(std::exp(model.exact_trial_loglik(t.stimulus, t.response, params)));
  return p;
}

// ---------------------------------------------------------------------------
// Repeat allocation

struct QuantileSummary {
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  double min = 0.0;
  double max = 0.0;
};

QuantileSummary quantile_summary(std::vector<double> x);

struct AllocationGainStudy {
  std::vector<double> continuous;
  /// Realized gains of the rounded-up integer allocation.
  std::vector<double> rounded;
  QuantileSummary continuous_summary;
  QuantileSummary rounded_summary;
  double budget_multiplier = 0.0;
  std::uint64_t seed = 0;

  [[nodiscard]] CurveTable table() const;
};

/// Draw d takes N probabilities from Uniform(p_lo, 1) with stream
/// derive_seed(seed, d). The integer allocation spends budget_multiplier
/// times the minimum expected cost sum 1/p.
AllocationGainStudy allocation_gain_study(int n_trials, int n_draws, std::uint64_t seed,
                                          double budget_multiplier = 10.0, double p_lo = 0.0);

// ---------------------------------------------------------------------------
// Entropy and divergence

struct DivergenceEstimate {
  EntropyEstimate cross_entropy;
  EntropyEstimate entropy;
  double kl = 0.0;
  double kl_variance = 0.0;
};

/// H(P,Q) and H(P) by IBS from independent streams (seed, 0) and (seed, 1);
/// KL(P||Q) = H(P,Q) - H(P).
template <class SampleP, class SampleQ>
DivergenceEstimate kl_and_cross_entropy(SampleP&& sample_p, SampleQ&& sample_q, std::int64_t runs, std::uint64_t seed,
                                        std::optional<std::int64_t> cap = std::nullopt) {
  DivergenceEstimate out;
  out.cross_entropy = estimate_cross_entropy(sample_p, sample_q, runs, derive_seed(seed, 0), cap);
  out.entropy = estimate_entropy(sample_p, runs, derive_seed(seed, 1), cap);
  out.kl = out.cross_entropy.estimate - out.entropy.estimate;
  out.kl_variance = out.cross_entropy.variance + out.entropy.variance;
  return out;
}

/// Sampler for a finite distribution over 0..n-1 by inverse CDF.
class DiscreteSampler {
 public:
  explicit DiscreteSampler(std::vector<double> probabilities);
  int operator()(Rng& rng) const;
  [[nodiscard]] const std::vector<double>& probabilities() const noexcept { return p_; }
  [[nodiscard]] double entropy() const;
  [[nodiscard]] double cross_entropy(const DiscreteSampler& q) const;

 private:
  std::vector<double> p_;
  std::vector<double> cdf_;
};

}  // namespace ibs
