#include "ibs/analysis.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "ibs/estimator.hpp"
#include "ibs/text_format.hpp"

namespace ibs {

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void require_grid(std::span<const double> p_grid, bool allow_one, const char* name) {
  for (double p : p_grid) {
    if (!(p > 0.0 && (allow_one ? p <= 1.0 : p < 1.0))) {
      throw std::domain_error(std::string(name) + ": grid value " + format_number(p) + " out of range");
    }
  }
}

std::int64_t geometric_count(double p, Rng& rng) {
  std::int64_t k = 1;
  while (!rng.bernoulli(p)) ++k;
  return k;
}

std::int64_t binomial_count(double p, std::int64_t m, Rng& rng) {
  std::int64_t hits = 0;
  for (std::int64_t j = 0; j < m; ++j) hits += rng.bernoulli(p);
  return hits;
}

}  // namespace

CurveTable::CurveTable(std::vector<std::string> label_columns, std::vector<std::string> value_columns)
    : label_columns_(std::move(label_columns)), value_columns_(std::move(value_columns)) {}

void CurveTable::add_row(std::vector<std::string> labels, std::vector<double> values, std::int64_t replications,
                         std::uint64_t seed) {
  if (labels.size() != label_columns_.size() || values.size() != value_columns_.size()) {
    throw std::invalid_argument("CurveTable: row does not match the column layout");
  }
  if (replications < 0) throw std::invalid_argument("CurveTable: negative replication count");
  labels_.push_back(std::move(labels));
  values_.push_back(std::move(values));
  replications_.push_back(replications);
  seeds_.push_back(seed);
}

std::size_t CurveTable::value_index(std::string_view name) const {
  const auto it = std::find(value_columns_.begin(), value_columns_.end(), name);
  if (it == value_columns_.end()) throw std::out_of_range("CurveTable: no column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - value_columns_.begin());
}

std::vector<double> CurveTable::column(std::string_view name) const {
  const std::size_t j = value_index(name);
  std::vector<double> out;
  out.reserve(values_.size());
  for (const auto& row : values_) out.push_back(row[j]);
  return out;
}

std::string CurveTable::to_csv() const {
  std::string out;
  bool first = true;
  auto sep = [&] {
    if (!first) out.push_back(',');
    first = false;
  };
  for (const auto& c : label_columns_) sep(), out += csv_field(c);
  for (const auto& c : value_columns_) sep(), out += csv_field(c);
  sep(), out += "replications";
  sep(), out += "seed";
  out.push_back('\n');
  for (std::size_t r = 0; r < values_.size(); ++r) {
    first = true;
    for (const auto& l : labels_[r]) sep(), out += csv_field(l);
    for (double v : values_[r]) sep(), append_number(out, v);
    sep(), append_number(out, replications_[r]);
    sep(), out += std::to_string(seeds_[r]);
    out.push_back('\n');
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

SampleSummary summarize(std::span<const double> x) {
  SampleSummary s;
  s.n = x.size();
  if (x.empty()) return s;
  s.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(s.n);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - s.mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  const double n = static_cast<double>(s.n);
  if (s.n > 1) s.sd = std::sqrt(m2 / (n - 1.0));
  if (m2 > 0.0) {
    m2 /= n;
    s.skew = (m3 / n) / std::pow(m2, 1.5);
    s.excess_kurtosis = (m4 / n) / (m2 * m2) - 3.0;
  }
  return s;
}

double quantile(std::vector<double> x, double q) {
  if (x.empty()) throw std::invalid_argument("quantile: empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::domain_error("quantile: q must lie in [0, 1]");
  std::sort(x.begin(), x.end());
  const double h = q * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0 && hi >= lo) || n == 0) throw std::invalid_argument("log_grid: need 0 < lo <= hi and n > 0");
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

CurveTable bias_variance_curves(std::span<const double> p_grid, std::span<const std::int64_t> m_list,
                                std::span<const int> r_list) {
  require_grid(p_grid, true, "bias_variance_curves");
  std::vector<std::string> cols = {"p"};
  for (int r : r_list) {
    if (r < 1) throw std::invalid_argument("bias_variance_curves: R must be >= 1");
    const std::string pre = "ibs_R" + std::to_string(r) + "_";
    cols.insert(cols.end(), {pre + "bias", pre + "sd", pre + "samples"});
  }
  for (auto m : m_list) {
    if (m < 1) throw std::invalid_argument("bias_variance_curves: M must be >= 1");
    const std::string pre = "fixed_M" + std::to_string(m) + "_";
    cols.insert(cols.end(), {pre + "bias", pre + "sd", pre + "samples"});
  }
  CurveTable table({}, cols);
  for (double p : p_grid) {
    std::vector<double> row = {p};
    for (int r : r_list) {
      row.insert(row.end(), {0.0, std::sqrt(dilog_one_minus(p) / r), r / p});
    }
    for (auto m : m_list) {
      row.insert(row.end(),
                 {fixed_bias_exact(p, m), std::sqrt(fixed_variance_exact(p, m)), static_cast<double>(m)});
    }
    table.add_row({}, std::move(row));
  }
  return table;
}

CurveTable bias_variance_monte_carlo(std::span<const double> p_grid, std::span<const std::int64_t> m_list,
                                     std::span<const int> r_list, std::int64_t replications, std::uint64_t seed) {
  require_grid(p_grid, true, "bias_variance_monte_carlo");
  if (replications < 2) throw std::invalid_argument("bias_variance_monte_carlo: need at least two replications");
  CurveTable table({"method"}, {"p", "mean_error", "se", "sd", "mean_samples"});
  for (std::size_t i = 0; i < p_grid.size(); ++i) {
    const double p = p_grid[i];
    const double truth = std::log(p);
    std::size_t cell = 0;
    auto run = [&](const std::string& name, auto&& draw) {
      const std::uint64_t cell_seed = derive_seed(seed, i, cell++);
      Rng rng(cell_seed);
      double mean = 0.0, m2 = 0.0, samples = 0.0;
      for (std::int64_t j = 0; j < replications; ++j) {
        const auto [value, used] = draw(rng);
        const double e = value - truth;
        const double d = e - mean;
        mean += d / static_cast<double>(j + 1);
        m2 += d * (e - mean);
        samples += static_cast<double>(used);
      }
      const double sd = std::sqrt(m2 / static_cast<double>(replications - 1));
      table.add_row({name},
                    {p, mean, sd / std::sqrt(static_cast<double>(replications)), sd,
                     samples / static_cast<double>(replications)},
                    replications, cell_seed);
    };
    for (int r : r_list) {
      run("ibs_R" + std::to_string(r), [&](Rng& rng) {
        double sum = 0.0;
        std::int64_t used = 0;
        for (int k = 0; k < r; ++k) {
          const auto kk = geometric_count(p, rng);
          sum += ibs_value_from_k(kk);
          used += kk;
        }
        return std::pair{sum / r, used};
      });
    }
    for (auto m : m_list) {
      run("fixed_M" + std::to_string(m),
          [&](Rng& rng) { return std::pair{fixed_estimate(binomial_count(p, m, rng), m), m}; });
    }
  }
  return table;
}

CurveTable master_curve_table(std::span<const double> lambda_grid, std::span<const std::int64_t> m_list) {
  std::vector<std::string> cols = {"lambda", "master"};
  for (auto m : m_list) {
    cols.push_back("fixed_M" + std::to_string(m) + "_bias");
    cols.push_back("fixed_M" + std::to_string(m) + "_gap");
  }
  CurveTable table({}, cols);
  for (double lambda : lambda_grid) {
    const double master = bias_master_curve(lambda);
    std::vector<double> row = {lambda, master};
    for (auto m : m_list) {
      const double p = lambda / static_cast<double>(m);
      if (!(p > 0.0 && p <= 1.0)) throw std::domain_error("master_curve_table: lambda / M outside (0, 1]");
      const double b = fixed_bias_exact(p, m);
      row.push_back(b);
      row.push_back(b - master);
    }
    table.add_row({}, std::move(row));
  }
  return table;
}

CurveTable info_bound_table(std::span<const double> p_grid) {
  require_grid(p_grid, false, "info_bound_table");
  CurveTable table({}, {"p", "ibs_sd", "bound_sd", "ratio"});
  for (double p : p_grid) {
    const double sd = std::sqrt(dilog_one_minus(p));
    const double bound = std::sqrt(1.0 - p);
    table.add_row({}, {p, sd, bound, sd / bound});
  }
  return table;
}

CalibrationSide calibration_side(std::vector<double> z) {
  CalibrationSide out;
  for (double beta : kCoverageBetas) {
    const auto inside = std::count_if(z.begin(), z.end(), [beta](double v) { return std::abs(v) <= beta; });
    out.coverage.push_back(z.empty() ? 0.0 : static_cast<double>(inside) / static_cast<double>(z.size()));
  }
  out.summary = summarize(z);
  out.z = std::move(z);
  return out;
}

CurveTable CalibrationReport::coverage_table() const {
  CurveTable table({}, {"beta", "nominal", "coverage_exact_variance", "coverage_estimated_variance"});
  for (std::size_t i = 0; i < std::size(kCoverageBetas); ++i) {
    const double beta = kCoverageBetas[i];
    table.add_row({},
                  {beta, 2.0 * normal_cdf(beta) - 1.0, exact_variance.coverage[i], estimated_variance.coverage[i]},
                  static_cast<std::int64_t>(exact_variance.z.size()), seed);
  }
  return table;
}

CurveTable CalibrationReport::dataset_table() const {
  CurveTable table({}, {"dataset", "exact_loglik", "estimate", "z_exact_variance", "z_estimated_variance"});
  for (std::size_t d = 0; d < estimate.size(); ++d) {
    table.add_row({},
                  {static_cast<double>(d), exact_loglik[d], estimate[d], exact_variance.z[d], estimated_variance.z[d]},
                  1, derive_seed(seed, d, 1));
  }
  return table;
}

std::vector<const RecoveryFit*> RecoveryStudy::of(std::string_view method) const {
  std::vector<const RecoveryFit*> out;
  for (const auto& f : fits) {
    if (f.method == method) out.push_back(&f);
  }
  return out;
}

double RecoveryStudy::loss(const RecoveryFit& fit) const {
  if (fit.status != "ok" || std::isnan(fit.exact_loglik_at_hat)) return std::numeric_limits<double>::quiet_NaN();
  double best = -INFINITY;
  for (const auto& f : fits) {
    if (f.theta_index == fit.theta_index && f.dataset == fit.dataset && f.status == "ok") {
      best = std::max(best, f.exact_loglik_at_hat);
    }
  }
  return best - fit.exact_loglik_at_hat;
}

CurveTable RecoveryStudy::fits_table() const {
  std::vector<std::string> cols = {"theta_index", "dataset"};
  for (const auto& n : parameter_names) cols.push_back(n + "_true");
  for (const auto& n : parameter_names) cols.push_back(n + "_hat");
  cols.insert(cols.end(), {"loglik", "loglik_se", "exact_loglik_at_hat", "loglik_loss", "samples_per_trial",
                           "evaluations", "budget_exhausted"});
  CurveTable table({"method", "status"}, cols);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& f : fits) {
    std::vector<double> row = {static_cast<double>(f.theta_index), static_cast<double>(f.dataset)};
    row.insert(row.end(), f.theta_true.begin(), f.theta_true.end());
    for (std::size_t j = 0; j < parameter_names.size(); ++j) row.push_back(j < f.theta_hat.size() ? f.theta_hat[j] : nan);
    row.insert(row.end(), {f.loglik, f.loglik_se, f.exact_loglik_at_hat, loss(f), f.samples_per_trial,
                           static_cast<double>(f.evaluations), f.budget_exhausted ? 1.0 : 0.0});
    table.add_row({f.method, f.status}, std::move(row), 1, seed);
  }
  return table;
}

CurveTable RecoveryStudy::summary_table() const {
  std::vector<std::string> cols = {"theta_index"};
  for (const auto& n : parameter_names) cols.push_back(n + "_true");
  for (const auto& n : parameter_names) cols.insert(cols.end(), {n + "_bias", n + "_sd", n + "_rmse"});
  cols.insert(cols.end(), {"samples_per_trial", "median_loglik_loss", "fits_ok", "fits_failed"});
  CurveTable table({"method"}, cols);
  std::size_t n_theta = 0;
  for (const auto& f : fits) n_theta = std::max(n_theta, f.theta_index + 1);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t t = 0; t < n_theta; ++t) {
    for (const auto& method : methods) {
      std::vector<const RecoveryFit*> ok;
      std::size_t failed = 0;
      std::vector<double> truth;
      for (const auto& f : fits) {
        if (f.theta_index != t || f.method != method) continue;
        truth = f.theta_true;
        if (f.status == "ok") {
          ok.push_back(&f);
        } else {
          ++failed;
        }
      }
      if (truth.empty()) continue;
      std::vector<double> row = {static_cast<double>(t)};
      row.insert(row.end(), truth.begin(), truth.end());
      for (std::size_t j = 0; j < parameter_names.size(); ++j) {
        std::vector<double> err;
        for (const auto* f : ok) err.push_back(f->theta_hat[j] - truth[j]);
        const auto s = summarize(err);
        double ms = 0.0;
        for (double e : err) ms += e * e;
        row.insert(row.end(), {err.empty() ? nan : s.mean, err.size() > 1 ? s.sd : nan,
                               err.empty() ? nan : std::sqrt(ms / static_cast<double>(err.size()))});
      }
      double spt = 0.0;
      std::vector<double> losses;
      for (const auto* f : ok) {
        spt += f->samples_per_trial;
        const double l = loss(*f);
        if (!std::isnan(l)) losses.push_back(l);
      }
      row.push_back(ok.empty() ? nan : spt / static_cast<double>(ok.size()));
      row.push_back(losses.empty() ? nan : quantile(losses, 0.5));
      row.push_back(static_cast<double>(ok.size()));
      row.push_back(static_cast<double>(failed));
      table.add_row({method}, std::move(row), static_cast<std::int64_t>(ok.size()), seed);
    }
  }
  return table;
}

CurveTable estimator_rmse_study(std::span<const double> p_pool, std::span<const int> n_list,
                                std::span<const int> r_list, std::span<const std::int64_t> m_list,
                                std::int64_t replications, std::uint64_t seed) {
  if (p_pool.empty()) throw std::invalid_argument("estimator_rmse_study: empty probability pool");
  require_grid(p_pool, true, "estimator_rmse_study");
  if (replications < 2) throw std::invalid_argument("estimator_rmse_study: need at least two replications");
  CurveTable table({"method"}, {"N", "samples_per_trial", "rmse", "bias", "sd"});
  for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
    const int n = n_list[ni];
    if (n < 1) throw std::invalid_argument("estimator_rmse_study: N must be >= 1");
    std::size_t method = 0;
    auto run = [&](const std::string& name, auto&& estimate) {
      const std::uint64_t cell_seed = derive_seed(seed, ni, 1 + method++);
      std::vector<double> err(static_cast<std::size_t>(replications));
      double samples = 0.0;
      std::vector<double> p(static_cast<std::size_t>(n));
      for (std::int64_t j = 0; j < replications; ++j) {
        // the same trial probabilities for every method, so comparisons are paired
        Rng draw(derive_seed(seed, ni, 0, static_cast<std::uint64_t>(j)));
        double truth = 0.0;
        for (auto& v : p) {
          v = p_pool[std::min(p_pool.size() - 1, static_cast<std::size_t>(draw.uniform() * p_pool.size()))];
          truth += std::log(v);
        }
        auto hit = [&p](std::size_t i, Rng& rng) { return rng.bernoulli(p[i]); };
        const auto rep = estimate(hit, derive_seed(cell_seed, static_cast<std::uint64_t>(j)));
        err[static_cast<std::size_t>(j)] = rep.loglik - truth;
        samples += static_cast<double>(rep.total_samples);
      }
      const auto s = summarize(err);
      double ms = 0.0;
      for (double e : err) ms += e * e;
      table.add_row({name},
                    {static_cast<double>(n), samples / (static_cast<double>(replications) * n),
                     std::sqrt(ms / static_cast<double>(replications)), s.mean, s.sd},
                    replications, cell_seed);
    };
    for (int r : r_list) {
      run("ibs_R" + std::to_string(r), [&](auto& hit, std::uint64_t s) {
        EngineConfig cfg;
        cfg.repeats = r;
        cfg.master_seed = s;
        cfg.threads = 1;
        cfg.record_trials = false;
        return estimate_sequential_hits(static_cast<std::size_t>(n), hit, cfg);
      });
    }
    for (auto m : m_list) {
      run("fixed_M" + std::to_string(m), [&](auto& hit, std::uint64_t s) {
        FixedConfig cfg;
        cfg.samples = m;
        cfg.master_seed = s;
        cfg.threads = 1;
        return estimate_fixed_hits(static_cast<std::size_t>(n), hit, cfg, false);
      });
    }
  }
  return table;
}

QuantileSummary quantile_summary(std::vector<double> x) {
  if (x.empty()) throw std::invalid_argument("quantile_summary: empty sample");
  std::sort(x.begin(), x.end());
  return {quantile(x, 0.5), quantile(x, 0.25), quantile(x, 0.75), x.front(), x.back()};
}

AllocationGainStudy allocation_gain_study(int n_trials, int n_draws, std::uint64_t seed, double budget_multiplier,
                                          double p_lo) {
  if (n_trials < 1 || n_draws < 1) throw std::invalid_argument("allocation_gain_study: need trials and draws");
  if (!(budget_multiplier >= 1.0)) throw std::invalid_argument("allocation_gain_study: budget multiplier must be >= 1");
  if (!(p_lo >= 0.0 && p_lo < 1.0)) throw std::domain_error("allocation_gain_study: p_lo must lie in [0, 1)");
  AllocationGainStudy out;
  out.budget_multiplier = budget_multiplier;
  out.seed = seed;
  out.continuous.resize(static_cast<std::size_t>(n_draws));
  out.rounded.resize(static_cast<std::size_t>(n_draws));
#pragma omp parallel for schedule(dynamic)
  for (int d = 0; d < n_draws; ++d) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(d)));
    std::vector<double> p(static_cast<std::size_t>(n_trials));
    double cost = 0.0;
    for (auto& v : p) {
      v = p_lo + (1.0 - p_lo) * (1.0 - rng.uniform());  // (p_lo, 1], never 0
      cost += 1.0 / v;
    }
    out.continuous[static_cast<std::size_t>(d)] = allocation_gain(p);
    const auto repeats = allocate_repeats(p, budget_multiplier * cost);
    out.rounded[static_cast<std::size_t>(d)] = realized_allocation_gain(p, repeats);
  }
  out.continuous_summary = quantile_summary(out.continuous);
  out.rounded_summary = quantile_summary(out.rounded);
  return out;
}

CurveTable AllocationGainStudy::table() const {
  CurveTable t({}, {"draw", "continuous_gain", "rounded_gain"});
  for (std::size_t d = 0; d < continuous.size(); ++d) {
    t.add_row({}, {static_cast<double>(d), continuous[d], rounded[d]}, 1, derive_seed(seed, d));
  }
  return t;
}

DiscreteSampler::DiscreteSampler(std::vector<double> probabilities) : p_(std::move(probabilities)) {
  if (p_.empty()) throw std::invalid_argument("DiscreteSampler: empty distribution");
  double total = 0.0;
  for (double v : p_) {
    if (!(v >= 0.0)) throw std::domain_error("DiscreteSampler: negative probability");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::domain_error("DiscreteSampler: probabilities must sum to 1");
  cdf_.resize(p_.size());
  std::partial_sum(p_.begin(), p_.end(), cdf_.begin());
}

int DiscreteSampler::operator()(Rng& rng) const {
  const double u = rng.uniform() * cdf_.back();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  auto i = static_cast<std::size_t>(it - cdf_.begin());
  if (i >= p_.size()) i = p_.size() - 1;
  while (p_[i] == 0.0 && i > 0) --i;  // rounding at the top must not pick an impossible outcome
  return static_cast<int>(i);
}

double DiscreteSampler::entropy() const { return cross_entropy(*this); }

double DiscreteSampler::cross_entropy(const DiscreteSampler& q) const {
  if (q.p_.size() != p_.size()) throw std::invalid_argument("DiscreteSampler: support sizes differ");
  double h = 0.0;
  for (std::size_t i = 0; i < p_.size(); ++i) {
    if (p_[i] == 0.0) continue;
    if (q.p_[i] == 0.0) return INFINITY;
    h -= p_[i] * std::log(q.p_[i]);
  }
  return h;
}

}  // namespace ibs
