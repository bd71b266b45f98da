#include "icoden/core_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "icoden/rng.hpp"

namespace icoden {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("icoden: " + msg); }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& raw, double* out) {
  const std::string s = trim(raw);
  if (s == "inf" || s == "+inf") {
    *out = kInf;
    return true;
  }
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, *out);
  return ec == std::errc{} && ptr == end;
}

}  // namespace

std::string format_double(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  (void)ec;
  return std::string(buf, ptr);
}

CovariateSchema CovariateSchema::continuous(int p) {
  CovariateSchema s;
  s.p = p;
  for (int j = 0; j < p; ++j) s.names.push_back("x" + std::to_string(j + 1));
  s.kinds.assign(p, Kind::kContinuous);
  return s;
}

void CovariateSchema::validate() const {
  if (p < 1) fail("covariate count must be >= 1");
  if (static_cast<int>(names.size()) != p || static_cast<int>(kinds.size()) != p)
    fail("schema names/kinds length must equal p");
  std::set<std::string> unique(names.begin(), names.end());
  if (static_cast<int>(unique.size()) != p) fail("covariate names must be unique");
}

void Dataset::validate() const {
  schema.validate();
  if (subjects.empty()) fail("dataset must be nonempty");
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const Subject& s = subjects[i];
    const std::string at = " (subject " + std::to_string(i) + ")";
    if (!(s.v >= 0.0)) fail("v must be >= 0" + at);
    if (!(s.v <= s.l)) fail("v must be <= l" + at);
    if (!(s.l < s.r)) fail("l must be strictly less than r" + at);
    if (std::isnan(s.r)) fail("r must be finite or +inf" + at);
    if (s.x.size() != schema.p) fail("covariate length mismatch" + at);
    for (int j = 0; j < s.x.size(); ++j)
      if (!std::isfinite(s.x[j])) fail("non-finite covariate" + at);
  }
}

Eigen::MatrixXd Dataset::covariate_matrix() const {
  Eigen::MatrixXd X(subjects.size(), schema.p);
  for (std::size_t i = 0; i < subjects.size(); ++i) X.row(i) = subjects[i].x.transpose();
  return X;
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.schema = schema;
  out.has_truncation = has_truncation;
  out.subjects.reserve(indices.size());
  for (std::size_t i : indices) out.subjects.push_back(subjects.at(i));
  return out;
}

void SurvivalCurve::validate() const {
  if (times.size() < 1 || times.size() != values.size()) fail("curve grid/value size mismatch");
  if (times[0] != 0.0) fail("curve must start at t=0");
  if (values[0] != 1.0) fail("curve must start at S=1");
  for (int i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) fail("curve times must strictly increase");
    if (values[i] > values[i - 1]) fail("curve values must be non-increasing");
  }
  for (int i = 0; i < values.size(); ++i)
    if (!(values[i] >= 0.0 && values[i] <= 1.0)) fail("survival values must lie in [0,1]");
}

Dataset load_dataset(const std::string& path, bool has_truncation) {
  std::ifstream in(path);
  if (!in) fail("cannot open dataset file: " + path);

  std::string line;
  if (!std::getline(in, line)) fail("empty dataset file: " + path);
  const auto header = split_csv_line(line);
  const std::size_t fixed = has_truncation ? 3 : 2;
  if (header.size() < fixed + 1) fail("header must list v/l/r and at least one covariate");
  const std::vector<std::string> expected =
      has_truncation ? std::vector<std::string>{"v", "l", "r"} : std::vector<std::string>{"l", "r"};
  for (std::size_t k = 0; k < expected.size(); ++k)
    if (trim(header[k]) != expected[k])
      fail("header column " + std::to_string(k + 1) + " must be '" + expected[k] + "'");

  Dataset d;
  d.has_truncation = has_truncation;
  d.schema.p = static_cast<int>(header.size() - fixed);
  for (std::size_t k = fixed; k < header.size(); ++k) d.schema.names.push_back(trim(header[k]));
  d.schema.kinds.assign(d.schema.p, CovariateSchema::Kind::kContinuous);

  std::size_t row = 1;       // header was row 1
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      fail("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
           " fields, got " + std::to_string(fields.size()));
    Subject s;
    std::size_t k = 0;
    if (has_truncation) {
      if (!parse_double(fields[k], &s.v)) fail("row " + std::to_string(row) + ": bad v");
      ++k;
    }
    if (!parse_double(fields[k++], &s.l)) fail("row " + std::to_string(row) + ": bad l");
    if (!parse_double(fields[k++], &s.r)) fail("row " + std::to_string(row) + ": bad r");
    s.x.resize(d.schema.p);
    for (int j = 0; j < d.schema.p; ++j, ++k) {
      if (!parse_double(fields[k], &s.x[j]) || !std::isfinite(s.x[j]))
        fail("row " + std::to_string(row) + ": non-numeric covariate '" + fields[k] + "'");
    }
    if (!(s.v >= 0.0)) fail("row " + std::to_string(row) + ": v must be >= 0");
    if (!(s.v <= s.l)) fail("row " + std::to_string(row) + ": v must be <= l");
    if (!(s.l < s.r)) fail("row " + std::to_string(row) + ": l must be strictly less than r");
    d.subjects.push_back(std::move(s));
  }
  d.validate();
  return d;
}

void write_dataset(const std::string& path, const Dataset& d) {
  d.validate();
  std::ofstream out(path);
  if (!out) fail("cannot write dataset file: " + path);
  if (d.has_truncation) out << "v,";
  out << "l,r";
  for (const auto& name : d.schema.names) out << ',' << name;
  out << '\n';
  for (const Subject& s : d.subjects) {
    if (d.has_truncation) out << format_double(s.v) << ',';
    out << format_double(s.l) << ',' << format_double(s.r);
    for (int j = 0; j < s.x.size(); ++j) out << ',' << format_double(s.x[j]);
    out << '\n';
  }
}

std::vector<Dataset> split_dataset(const Dataset& d, const std::vector<double>& fractions,
                                   std::uint64_t seed) {
  d.validate();
  if (fractions.empty()) fail("split needs at least one fraction");
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0 && f < 1.0)) fail("each split fraction must lie in (0,1)");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) fail("split fractions must sum to 1");

  const std::size_t n = d.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng rng(seed, /*stream=*/0xD5A7);
  for (std::size_t i = n; i > 1; --i)
    std::swap(order[i - 1], order[rng.below(i)]);

  // Largest-remainder apportionment of n across the fractions.
  const std::size_t k = fractions.size();
  std::vector<std::size_t> sizes(k);
  std::vector<std::pair<double, std::size_t>> remainders(k);
  std::size_t assigned = 0;
  for (std::size_t j = 0; j < k; ++j) {
    const double quota = fractions[j] * static_cast<double>(n);
    sizes[j] = static_cast<std::size_t>(std::floor(quota));
    assigned += sizes[j];
    remainders[j] = {quota - std::floor(quota), j};
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::size_t j = 0; assigned < n; ++j, ++assigned) sizes[remainders[j % k].second] += 1;

  std::vector<Dataset> parts;
  std::size_t cursor = 0;
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<std::size_t> idx(order.begin() + cursor, order.begin() + cursor + sizes[j]);
    cursor += sizes[j];
    parts.push_back(d.subset(idx));
  }
  return parts;
}

}  // namespace icoden
