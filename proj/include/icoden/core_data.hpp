#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace icoden {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// One interval-censored, possibly left-truncated observation. The event is
// known to lie in (l, r]; r = +inf encodes right censoring, l = 0 left
// censoring, and v > 0 conditions the likelihood on survival past v.
struct Subject {
  double v = 0.0;
  double l = 0.0;
  double r = kInf;
  Eigen::VectorXd x;

  bool right_censored() const { return !std::isfinite(r); }
};

struct CovariateSchema {
  enum class Kind { kContinuous, kBinary, kMultinomial };

  int p = 0;
  std::vector<std::string> names;
  std::vector<Kind> kinds;

  static CovariateSchema continuous(int p);
  void validate() const;
};

struct Dataset {
  CovariateSchema schema;
  std::vector<Subject> subjects;
  bool has_truncation = false;

  std::size_t size() const { return subjects.size(); }
  int p() const { return schema.p; }
  void validate() const;

  // Covariates stacked row-per-subject, for batched solver queries.
  Eigen::MatrixXd covariate_matrix() const;
  Dataset subset(const std::vector<std::size_t>& indices) const;
};

// Survival values on a time grid; times strictly increase from 0 and values
// fall from 1.
struct SurvivalCurve {
  Eigen::VectorXd times;
  Eigen::VectorXd values;

  void validate() const;
};

Dataset load_dataset(const std::string& path, bool has_truncation);
void write_dataset(const std::string& path, const Dataset& d);

// Deterministic shuffled partition; fractions must each lie in (0,1) and sum
// to 1 within 1e-9. Sizes follow largest-remainder apportionment.
std::vector<Dataset> split_dataset(const Dataset& d, const std::vector<double>& fractions,
                                   std::uint64_t seed);

// Shortest decimal form that parses back to the same double; used by every
// CSV/JSON writer so emitted files are byte-stable.
std::string format_double(double value);

}  // namespace icoden
