#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <set>
#include <string>

#include "icoden/core_data.hpp"

using namespace icoden;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const std::string path = "/tmp/" + name;
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("infinity sentinel parses and truncation column is honored") {
  const auto path = write_temp("icoden_core1.csv", "v,l,r,x1\n0,2.5,inf,1.0\n");
  const Dataset d = load_dataset(path, true);
  REQUIRE(d.size() == 1);
  CHECK(d.subjects[0].v == 0.0);
  CHECK(d.subjects[0].l == 2.5);
  CHECK(std::isinf(d.subjects[0].r));
  CHECK(d.subjects[0].x[0] == 1.0);
  CHECK(d.has_truncation);
}

TEST_CASE("degenerate interval is rejected with the invariant message") {
  const auto path = write_temp("icoden_core2.csv", "v,l,r,x1\n0,1.0,1.0,0\n");
  CHECK_THROWS_WITH_AS(load_dataset(path, true),
                       doctest::Contains("l must be strictly less than r"), std::runtime_error);
}

TEST_CASE("well-formed file loads in order") {
  const auto path = write_temp("icoden_core3.csv",
                               "l,r,x1,x2\n0,1,0.5,1\n1,2,-0.25,0\n2,inf,0.125,1\n");
  const Dataset d = load_dataset(path, false);
  REQUIRE(d.size() == 3);
  CHECK(d.p() == 2);
  CHECK(d.subjects[0].l == 0.0);
  CHECK(d.subjects[1].l == 1.0);
  CHECK(d.subjects[2].right_censored());
  CHECK_FALSE(d.has_truncation);
}

TEST_CASE("malformed rows report their row number") {
  const auto path = write_temp("icoden_core4.csv", "l,r,x1\n0,1,0.5\n1,2\n");
  CHECK_THROWS_WITH_AS(load_dataset(path, false), doctest::Contains("row 3"),
                       std::runtime_error);
  const auto path2 = write_temp("icoden_core5.csv", "l,r,x1\n0,1,abc\n");
  CHECK_THROWS_WITH_AS(load_dataset(path2, false), doctest::Contains("non-numeric"),
                       std::runtime_error);
}

TEST_CASE("write/load round trip preserves values and the sentinel") {
  const auto path = write_temp(
      "icoden_core6.csv",
      "v,l,r,x1\n0.125,0.333333333333333314829616256247,inf,1.0000000000000002\n"
      "0,1e-12,2.7182818284590452,-3.25\n");
  const Dataset d = load_dataset(path, true);
  write_dataset("/tmp/icoden_core6_out.csv", d);
  const Dataset d2 = load_dataset("/tmp/icoden_core6_out.csv", true);
  REQUIRE(d2.size() == d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(d2.subjects[i].v == d.subjects[i].v);
    CHECK(d2.subjects[i].l == d.subjects[i].l);
    if (std::isfinite(d.subjects[i].r)) CHECK(d2.subjects[i].r == d.subjects[i].r);
    else CHECK(std::isinf(d2.subjects[i].r));
    CHECK(d2.subjects[i].x == d.subjects[i].x);
  }
  // The sentinel must be the literal string.
  std::ifstream in("/tmp/icoden_core6_out.csv");
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(all.find(",inf") != std::string::npos);
}

TEST_CASE("truncation ordering violations are rejected") {
  const auto path = write_temp("icoden_core7.csv", "v,l,r,x1\n2,1,3,0\n");
  CHECK_THROWS_WITH_AS(load_dataset(path, true), doctest::Contains("v must be <= l"),
                       std::runtime_error);
}

namespace {

Dataset tagged_dataset(int n) {
  Dataset d;
  d.schema = CovariateSchema::continuous(1);
  for (int i = 0; i < n; ++i) {
    Subject s;
    s.l = i;
    s.r = i + 1;
    s.x = Eigen::VectorXd::Constant(1, static_cast<double>(i));
    d.subjects.push_back(s);
  }
  return d;
}

std::multiset<double> tags(const Dataset& d) {
  std::multiset<double> out;
  for (const Subject& s : d.subjects) out.insert(s.x[0]);
  return out;
}

}  // namespace

TEST_CASE("split sizes follow largest-remainder apportionment") {
  const Dataset d = tagged_dataset(10);
  const auto parts = split_dataset(d, {0.8, 0.2}, 7);
  REQUIRE(parts.size() == 2);
  CHECK(parts[0].size() == 8);
  CHECK(parts[1].size() == 2);
}

TEST_CASE("split is deterministic per seed") {
  const Dataset d = tagged_dataset(23);
  const auto a = split_dataset(d, {0.5, 0.3, 0.2}, 99);
  const auto b = split_dataset(d, {0.5, 0.3, 0.2}, 99);
  for (std::size_t j = 0; j < a.size(); ++j) CHECK(tags(a[j]) == tags(b[j]));
  const auto c = split_dataset(d, {0.5, 0.3, 0.2}, 100);
  bool any_diff = false;
  for (std::size_t j = 0; j < a.size(); ++j) any_diff = any_diff || tags(a[j]) != tags(c[j]);
  CHECK(any_diff);
}

TEST_CASE("bad fractions are rejected") {
  const Dataset d = tagged_dataset(4);
  CHECK_THROWS(split_dataset(d, {0.5, 0.6}, 1));
  CHECK_THROWS(split_dataset(d, {1.0}, 1));
  CHECK_THROWS(split_dataset(d, {0.9, 0.2, -0.1}, 1));
}

TEST_CASE("split parts are disjoint and exhaustive for every seed") {
  const Dataset d = tagged_dataset(31);
  const std::multiset<double> all = tags(d);
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto parts = split_dataset(d, {0.4, 0.35, 0.25}, seed);
    std::multiset<double> merged;
    std::size_t total = 0;
    for (const Dataset& part : parts) {
      total += part.size();
      for (double v : tags(part)) merged.insert(v);
    }
    CHECK(total == d.size());
    CHECK(merged == all);  // multiset equality = disjoint + exhaustive
  }
}

TEST_CASE("survival curve invariants are enforced") {
  SurvivalCurve curve;
  curve.times.resize(3);
  curve.values.resize(3);
  curve.times << 0.0, 1.0, 2.0;
  curve.values << 1.0, 0.7, 0.7;
  CHECK_NOTHROW(curve.validate());
  curve.values << 1.0, 0.7, 0.8;
  CHECK_THROWS(curve.validate());
  curve.times << 0.0, 1.0, 1.0;
  curve.values << 1.0, 0.7, 0.6;
  CHECK_THROWS(curve.validate());
}
