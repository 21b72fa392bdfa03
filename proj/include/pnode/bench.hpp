#pragma once

// Benchmark harness behind the pnode_bench tool: run configuration, config
// files, single trajectories and evaluation-budget sweeps, all written as CSV.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pnode/bayes_quad.hpp"
#include "pnode/errors.hpp"
#include "pnode/gauss_filter.hpp"
#include "pnode/measurements.hpp"
#include "pnode/perturb_sampler.hpp"
#include "pnode/problems.hpp"
#include "pnode/state_model.hpp"
#include "pnode/trajectory.hpp"

namespace pnode::bench {

inline constexpr std::string_view kConfigMarker = "# pnode-bench configuration";

struct RunConfig {
  std::string problem = "vdp";
  std::string method = "bq";  // ml, mc-filter, taylor, bq, mc-sampler
  std::size_t q = 3;
  double h = 0.01;
  double sigma2 = 0.1;
  std::vector<double> damping;  // empty: f_i = i
  double lambda = 1.0;
  double theta2 = 1.0;
  std::size_t nodes = 5;  // evaluations per step for bq and mc-filter
  NodeScheme node_scheme = NodeScheme::Grid;
  double spread = 2.0;
  std::size_t samples = 5;  // sample paths for mc-sampler
  std::uint64_t seed = 0;
  double noise_scale = 1.0;
  std::size_t replicates = 5;  // mc-sampler repetitions in a sweep
  std::size_t sweep_from = 0;  // sweep over N in [sweep_from, sweep_to]; 0 = no sweep
  std::size_t sweep_to = 0;
  std::vector<double> eval_times{18.0, 54.0};
  double h_ref = 1e-4;
  std::string out = "-";

  [[nodiscard]] bool is_sweep() const noexcept { return sweep_from > 0; }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(trim(cur));
  return parts;
}

inline double parse_double(const std::string& key, const std::string& value) {
  double v = 0.0;
  const auto* first = value.data();
  const auto* last = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (value.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw UsageError(key, "invalid value for '" + key + "': expected a number, got '" + value + "'");
  }
  return v;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto* last = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), last, v);
  if (value.empty() || ec != std::errc() || ptr != last) {
    throw UsageError(key, "invalid value for '" + key + "': expected a non-negative integer, got '" + value + "'");
  }
  return v;
}

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

}  // namespace detail

/// Keys accepted in config files and as --flags, in the order they are echoed.
inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "problem", "method", "q",     "h",          "sigma2",  "damping",     "lambda",     "theta2", "nodes",
      "node-scheme", "spread", "samples", "seed", "noise-scale", "replicates", "sweep", "eval-times", "h-ref", "out"};
  return keys;
}

/// Applies one key/value pair. Throws UsageError naming the key.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_double;
  using detail::parse_uint;
  const auto positive = [&](double v) {
    if (!(v > 0.0)) throw UsageError(key, "'" + key + "' must be positive, got '" + value + "'");
    return v;
  };
  const auto at_least = [&](std::uint64_t v, std::uint64_t lo) {
    if (v < lo) throw UsageError(key, "'" + key + "' must be >= " + std::to_string(lo) + ", got '" + value + "'");
    return static_cast<std::size_t>(v);
  };
  if (key == "problem") {
    if (value != "vdp" && value != "linear") throw UsageError(key, "unknown problem '" + value + "'");
    c.problem = value;
  } else if (key == "method") {
    static const std::vector<std::string> methods{"ml", "mc-filter", "taylor", "bq", "mc-sampler"};
    if (std::find(methods.begin(), methods.end(), value) == methods.end()) {
      throw UsageError(key, "unknown method '" + value + "' (ml, mc-filter, taylor, bq, mc-sampler)");
    }
    c.method = value;
  } else if (key == "q") {
    c.q = at_least(parse_uint(key, value), 1);
  } else if (key == "h") {
    c.h = positive(parse_double(key, value));
  } else if (key == "sigma2") {
    c.sigma2 = positive(parse_double(key, value));
  } else if (key == "damping") {
    c.damping.clear();
    if (value != "default") {
      for (const auto& part : detail::split(value, ',')) c.damping.push_back(parse_double(key, part));
    }
  } else if (key == "lambda") {
    c.lambda = positive(parse_double(key, value));
  } else if (key == "theta2") {
    c.theta2 = positive(parse_double(key, value));
  } else if (key == "nodes") {
    c.nodes = at_least(parse_uint(key, value), 1);
  } else if (key == "node-scheme") {
    if (value == "grid") {
      c.node_scheme = NodeScheme::Grid;
    } else if (value == "hermite") {
      c.node_scheme = NodeScheme::Hermite;
    } else {
      throw UsageError(key, "unknown node scheme '" + value + "' (grid, hermite)");
    }
  } else if (key == "spread") {
    c.spread = positive(parse_double(key, value));
  } else if (key == "samples") {
    c.samples = at_least(parse_uint(key, value), 2);
  } else if (key == "seed") {
    c.seed = parse_uint(key, value);
  } else if (key == "noise-scale") {
    c.noise_scale = parse_double(key, value);
    if (c.noise_scale < 0.0) throw UsageError(key, "'noise-scale' must be non-negative");
  } else if (key == "replicates") {
    c.replicates = at_least(parse_uint(key, value), 1);
  } else if (key == "sweep") {
    if (value.empty() || value == "none") {
      c.sweep_from = c.sweep_to = 0;
      return;
    }
    const auto parts = detail::split(value, ':');
    if (parts.size() != 2) throw UsageError(key, "'sweep' expects FROM:TO, got '" + value + "'");
    c.sweep_from = at_least(parse_uint(key, parts[0]), 1);
    c.sweep_to = at_least(parse_uint(key, parts[1]), c.sweep_from);
    if (c.sweep_to > 64) throw UsageError(key, "'sweep' range must lie within [1, 64]");
  } else if (key == "eval-times") {
    c.eval_times.clear();
    for (const auto& part : detail::split(value, ',')) c.eval_times.push_back(parse_double(key, part));
    if (c.eval_times.empty()) throw UsageError(key, "'eval-times' needs at least one time");
  } else if (key == "h-ref") {
    c.h_ref = positive(parse_double(key, value));
  } else if (key == "out") {
    c.out = value;
  } else {
    throw UsageError(key, "unknown configuration key '" + key + "'");
  }
}

/// Cross-field checks once every setting is applied.
inline void validate(const RunConfig& c) {
  if (!c.damping.empty() && c.damping.size() + 1 != c.q) {
    throw UsageError("damping", "'damping' needs q-1 = " + std::to_string(c.q - 1) + " values");
  }
  if (c.method == "mc-filter" && c.nodes < 2) throw UsageError("nodes", "mc-filter needs at least 2 samples");
  if (c.is_sweep() && c.method == "mc-filter" && c.sweep_from < 2) {
    throw UsageError("sweep", "mc-filter sweeps must start at N >= 2");
  }
  if (c.is_sweep() && c.method == "mc-sampler" && c.sweep_from < 2) {
    throw UsageError("sweep", "mc-sampler sweeps must start at N >= 2");
  }
}

/// Reads `key = value` lines. '#' starts a comment, except in a CSV written by
/// this tool, where the '#' header lines carry the embedded configuration and
/// the data rows are skipped.
[[nodiscard]] inline std::vector<std::pair<std::string, std::string>> read_config_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream in(text);
  std::string line;
  bool embedded = false;
  bool first = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (first) {
      embedded = detail::trim(line) == kConfigMarker;
      first = false;
      if (embedded) continue;
    }
    std::string body = detail::trim(line);
    if (embedded) {
      if (body.rfind('#', 0) != 0) continue;
      body = detail::trim(body.substr(1));
    } else {
      if (const auto hash = body.find('#'); hash != std::string::npos) body = detail::trim(body.substr(0, hash));
    }
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw UsageError(body, "config line " + std::to_string(lineno) + ": expected 'key = value', got '" + body + "'");
    }
    entries.emplace_back(detail::trim(body.substr(0, eq)), detail::trim(body.substr(eq + 1)));
  }
  return entries;
}

[[nodiscard]] inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("config", "cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Resolves a configuration: defaults, then `file_entries`, then `flag_entries`.
[[nodiscard]] inline RunConfig resolve_config(const std::vector<std::pair<std::string, std::string>>& file_entries,
                                              const std::vector<std::pair<std::string, std::string>>& flag_entries) {
  RunConfig c;
  for (const auto& [k, v] : file_entries) apply_setting(c, k, v);
  for (const auto& [k, v] : flag_entries) apply_setting(c, k, v);
  validate(c);
  return c;
}

/// `key = value` lines for every setting except the output path.
[[nodiscard]] inline std::vector<std::pair<std::string, std::string>> describe(const RunConfig& c) {
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("problem", c.problem);
  kv.emplace_back("method", c.method);
  kv.emplace_back("q", std::to_string(c.q));
  kv.emplace_back("h", detail::format_double(c.h));
  kv.emplace_back("sigma2", detail::format_double(c.sigma2));
  kv.emplace_back("damping", c.damping.empty() ? "default" : detail::join_doubles(c.damping));
  kv.emplace_back("lambda", detail::format_double(c.lambda));
  kv.emplace_back("theta2", detail::format_double(c.theta2));
  kv.emplace_back("nodes", std::to_string(c.nodes));
  kv.emplace_back("node-scheme", c.node_scheme == NodeScheme::Grid ? "grid" : "hermite");
  kv.emplace_back("spread", detail::format_double(c.spread));
  kv.emplace_back("samples", std::to_string(c.samples));
  kv.emplace_back("seed", std::to_string(c.seed));
  kv.emplace_back("noise-scale", detail::format_double(c.noise_scale));
  kv.emplace_back("replicates", std::to_string(c.replicates));
  kv.emplace_back("sweep", c.is_sweep() ? std::to_string(c.sweep_from) + ":" + std::to_string(c.sweep_to) : "none");
  kv.emplace_back("eval-times", detail::join_doubles(c.eval_times));
  kv.emplace_back("h-ref", detail::format_double(c.h_ref));
  return kv;
}

inline void write_config_header(std::ostream& os, const RunConfig& c) {
  os << kConfigMarker << '\n';
  for (const auto& [k, v] : describe(c)) os << "# " << k << " = " << v << '\n';
}

[[nodiscard]] inline IWPModel make_model(const RunConfig& c) {
  if (c.damping.empty()) return IWPModel::with_default_damping(c.q, c.sigma2);
  return IWPModel(c.q, c.sigma2, c.damping);
}

/// Measurement generator for the filter methods with N evaluations per step.
[[nodiscard]] inline MeasurementGenerator make_generator(const RunConfig& c, std::size_t N) {
  if (c.method == "ml") return MaxLikelihood{};
  if (c.method == "mc-filter") return MonteCarloIntegration{N, c.seed};
  if (c.method == "taylor") return TaylorLinearization{};
  if (c.method == "bq") return BayesianQuadrature{N, SEKernel{c.lambda, c.theta2}, c.node_scheme, c.spread};
  throw UsageError("method", "method '" + c.method + "' is not a filter");
}

[[nodiscard]] inline PerturbedSolverConfig make_sampler(const RunConfig& c, std::size_t S, std::uint64_t seed) {
  return PerturbedSolverConfig{make_model(c), S, seed, c.noise_scale, std::nullopt};
}

/// Runs the configured method once and returns its trajectory (for
/// mc-sampler: the empirical mean with pointwise empirical variance).
[[nodiscard]] inline SolutionTrajectory run_method(const RunConfig& c, const IVProblem& problem, std::size_t N,
                                                   std::uint64_t seed) {
  if (c.method == "mc-sampler") return empirical_measure(make_sampler(c, N, seed), problem, c.h).summary();
  RunConfig local = c;
  local.seed = seed;
  return solve(problem, make_model(c), make_generator(local, N), c.h);
}

namespace detail {

inline std::string derivative_label(std::size_t k) {
  if (k == 0) return "u";
  if (k == 1) return "du";
  return "d" + std::to_string(k) + "u";
}

inline std::string column(const std::string& base, std::size_t d, std::size_t D) {
  return D == 1 ? base : base + "_" + std::to_string(d + 1);
}

}  // namespace detail

/// Trajectory CSV: t, mean of every modeled derivative, sd_u, ref_u, error and,
/// for problems of order >= 2, ref_du and error_du.
inline void run_trajectory(const RunConfig& c, std::ostream& os) {
  const IVProblem problem = problem_by_name(c.problem);
  const std::size_t N = c.method == "mc-sampler" ? c.samples : c.nodes;
  const SolutionTrajectory tr = run_method(c, problem, N, c.seed);
  const ReferenceSolution ref(problem, c.h_ref);
  const std::size_t D = problem.dim;
  const std::size_t q = c.q;
  const bool with_du = problem.order >= 2;

  write_config_header(os, c);
  os << "t";
  for (std::size_t k = 0; k < q; ++k) {
    for (std::size_t d = 0; d < D; ++d) os << ",mean_" << detail::column(detail::derivative_label(k), d, D);
  }
  for (std::size_t d = 0; d < D; ++d) os << ',' << detail::column("sd_u", d, D);
  for (std::size_t d = 0; d < D; ++d) os << ',' << detail::column("ref_u", d, D);
  os << ",error";
  if (with_du) {
    for (std::size_t d = 0; d < D; ++d) os << ',' << detail::column("ref_du", d, D);
    os << ",error_du";
  }
  os << '\n';

  const auto fmt = detail::format_double;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const GaussianState& s = tr.states[i];
    const Eigen::VectorXd r = ref.value(s.t);
    os << fmt(s.t);
    for (std::size_t k = 0; k < q; ++k) {
      for (std::size_t d = 0; d < D; ++d) {
        os << ',' << fmt(s.mean(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d)));
      }
    }
    for (std::size_t d = 0; d < D; ++d) os << ',' << fmt(std::sqrt(std::max(0.0, s.cov[d](0, 0))));
    for (std::size_t d = 0; d < D; ++d) os << ',' << fmt(r(static_cast<Eigen::Index>(d)));
    const auto Di = static_cast<Eigen::Index>(D);
    os << ',' << fmt((s.mean.row(0).transpose() - r.head(Di)).norm());
    if (with_du) {
      for (std::size_t d = 0; d < D; ++d) os << ',' << fmt(r(Di + static_cast<Eigen::Index>(d)));
      os << ',' << fmt((s.mean.row(1).transpose() - r.segment(Di, Di)).norm());
    }
    os << '\n';
  }
}

struct SweepRow {
  std::string method;
  std::size_t N;
  double t_eval;
  double error;
  std::string replicate;  // "0" for deterministic methods, 1..R and "mean" for mc-sampler
};

/// Errors at the configured evaluation times as a function of the per-step
/// evaluation budget N. The ML filter is always included as a baseline; the
/// configured method uses N nodes (bq), N samples (mc-filter) or N sample
/// paths per replicate (mc-sampler).
[[nodiscard]] inline std::vector<SweepRow> sweep_rows(const RunConfig& c) {
  if (!c.is_sweep()) throw UsageError("sweep", "no sweep range configured");
  const IVProblem problem = problem_by_name(c.problem);
  const ReferenceSolution ref(problem, c.h_ref);
  std::vector<double> times = c.eval_times;
  std::sort(times.begin(), times.end());
  std::vector<SweepRow> rows;

  RunConfig ml = c;
  ml.method = "ml";
  const SolutionTrajectory baseline = run_method(ml, problem, 1, c.seed);
  for (std::size_t N = c.sweep_from; N <= c.sweep_to; ++N) {
    for (double t : times) rows.push_back({"ml", N, t, error_at(baseline, ref, t), "0"});
  }
  if (c.method == "ml") return rows;

  for (std::size_t N = c.sweep_from; N <= c.sweep_to; ++N) {
    if (c.method != "mc-sampler") {
      const SolutionTrajectory tr = run_method(c, problem, N, c.seed);
      for (double t : times) rows.push_back({c.method, N, t, error_at(tr, ref, t), "0"});
      continue;
    }
    std::vector<std::vector<double>> errors(c.replicates);
    for (std::size_t r = 0; r < c.replicates; ++r) {
      const SolutionTrajectory tr = run_method(c, problem, N, c.seed + r);
      for (double t : times) errors[r].push_back(error_at(tr, ref, t));
    }
    for (std::size_t r = 0; r < c.replicates; ++r) {
      for (std::size_t j = 0; j < times.size(); ++j) {
        rows.push_back({c.method, N, times[j], errors[r][j], std::to_string(r + 1)});
      }
    }
    for (std::size_t j = 0; j < times.size(); ++j) {
      double sum = 0.0;
      for (std::size_t r = 0; r < c.replicates; ++r) sum += errors[r][j];
      rows.push_back({c.method, N, times[j], sum / static_cast<double>(c.replicates), "mean"});
    }
  }
  return rows;
}

inline void run_sweep(const RunConfig& c, std::ostream& os) {
  const auto rows = sweep_rows(c);
  write_config_header(os, c);
  os << "method,N,t_eval,error,replicate\n";
  for (const auto& r : rows) {
    os << r.method << ',' << r.N << ',' << detail::format_double(r.t_eval) << ',' << detail::format_double(r.error)
       << ',' << r.replicate << '\n';
  }
}

inline void run(const RunConfig& c, std::ostream& os) {
  if (c.is_sweep()) {
    run_sweep(c, os);
  } else {
    run_trajectory(c, os);
  }
}

}  // namespace pnode::bench
