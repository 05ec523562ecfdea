#include <doctest.h>

#include <cmath>
#include <vector>

#include "fairpfn/metrics.hpp"
#include "fairpfn/rng.hpp"

using namespace fairpfn;

namespace {

// brute-force pairwise AUC: count positive-negative score orderings
double auc_bruteforce(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      ++pairs;
      if (s[i] > s[j]) wins += 1.0;
      else if (s[i] == s[j]) wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("auc basics") {
  CHECK(auc({0.9, 0.8, 0.3, 0.2}, {1, 1, 0, 0}).value == doctest::Approx(1.0).epsilon(1e-15));
  const AucResult ties = auc({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0});
  CHECK(ties.value == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_FALSE(ties.degenerate);
  const AucResult degen = auc({0.1, 0.2}, {1, 1});
  CHECK(degen.value == 0.5);
  CHECK(degen.degenerate);
  CHECK_THROWS(auc({0.1}, {1, 0}));
}

TEST_CASE("auc equals brute-force pairwise count on random instances") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 50;
    std::vector<double> s(n);
    std::vector<int> y(n);
    bool both = false;
    while (!both) {
      int pos = 0;
      for (std::size_t i = 0; i < n; ++i) {
        // coarse grid so ties actually occur
        s[i] = std::floor(rng.uniform() * 8.0) / 8.0;
        y[i] = rng.bernoulli(0.4) ? 1 : 0;
        pos += y[i];
      }
      both = pos > 0 && pos < static_cast<int>(n);
    }
    CHECK(std::fabs(auc(s, y).value - auc_bruteforce(s, y)) < 1e-12);
  }
}

TEST_CASE("auc is invariant under strictly increasing transforms") {
  Rng rng(3);
  std::vector<double> s(60);
  std::vector<int> y(60);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.normal();
    y[i] = rng.bernoulli(0.5) ? 1 : 0;
  }
  y[0] = 1;
  y[1] = 0;
  std::vector<double> t(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) t[i] = std::exp(3.0 * s[i]) + 7.0;
  CHECK(auc(s, y).value == doctest::Approx(auc(t, y).value).epsilon(1e-14));
}

TEST_CASE("tce examples and symmetry") {
  CHECK(tce({0.2, 0.4}, {0.2, 0.4}) == 0.0);
  CHECK(tce({0, 0, 0}, {1, 1, 1}) == doctest::Approx(1.0).epsilon(1e-15));
  Rng rng(4);
  std::vector<double> a(31), b(31);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = rng.uniform();
    b[i] = rng.uniform();
  }
  CHECK(tce(a, b) == doctest::Approx(tce(b, a)).epsilon(1e-14));
  CHECK_THROWS(tce({}, {}));

  // two-pass oracle
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  CHECK(std::fabs(tce(a, b) - std::fabs(mb / 31 - ma / 31)) < 1e-12);
}

TEST_CASE("cf_mae examples, oracle, and the tce lower bound") {
  CHECK(cf_mae({0.3, 0.6}, {0.3, 0.6}) == 0.0);
  CHECK(cf_mae({1, 0}, {0, 1}) == doctest::Approx(1.0).epsilon(1e-15));
  Rng rng(5);
  std::vector<double> a(57), b(57);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = rng.uniform();
    b[i] = rng.uniform();
  }
  double oracle = 0;
  for (std::size_t i = 0; i < a.size(); ++i) oracle += std::fabs(b[i] - a[i]);
  oracle /= 57;
  CHECK(std::fabs(cf_mae(a, b) - oracle) < 1e-12);
  CHECK(cf_mae(a, b) >= tce(a, b));
  CHECK(cf_mae(a, b) == doctest::Approx(cf_mae(b, a)).epsilon(1e-14));
}

TEST_CASE("dp_gap examples and oracle") {
  CHECK(dp_gap({0.5, 0.5, 0.5, 0.5}, {0, 0, 1, 1}) == 0.0);
  CHECK(dp_gap({0, 0, 1, 1}, {0, 0, 1, 1}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS(dp_gap({0.1, 0.2}, {1, 1}));

  Rng rng(6);
  std::vector<double> s(83);
  std::vector<int> g(83);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.uniform();
    g[i] = rng.bernoulli(0.3) ? 1 : 0;
  }
  g[0] = 0;
  g[1] = 1;
  double s0 = 0, s1 = 0;
  int n0 = 0, n1 = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (g[i]) {
      s1 += s[i];
      ++n1;
    } else {
      s0 += s[i];
      ++n0;
    }
  CHECK(std::fabs(dp_gap(s, g) - std::fabs(s1 / n1 - s0 / n0)) < 1e-12);
}

TEST_CASE("de_ie: absent twins are omitted, not zeroed") {
  const std::vector<double> f = {0.1, 0.2, 0.3};
  const std::vector<double> d = {0.1, 0.2, 0.3};
  const std::vector<double> ind = {0.4, 0.5, 0.6};
  auto [de, ie] = de_ie(f, &d, &ind);
  REQUIRE(de.has_value());
  REQUIRE(ie.has_value());
  CHECK(*de == 0.0);
  CHECK(*ie == doctest::Approx(0.3).epsilon(1e-12));
  auto [de2, ie2] = de_ie(f, nullptr, &ind);
  CHECK_FALSE(de2.has_value());
  CHECK(ie2.has_value());
}

TEST_CASE("metrics are invariant under joint row permutation") {
  Rng rng(7);
  const std::size_t n = 64;
  std::vector<double> f(n), t(n);
  std::vector<int> y(n), g(n);
  for (std::size_t i = 0; i < n; ++i) {
    f[i] = rng.uniform();
    t[i] = rng.uniform();
    y[i] = rng.bernoulli(0.5) ? 1 : 0;
    g[i] = rng.bernoulli(0.5) ? 1 : 0;
  }
  y[0] = 1;
  y[1] = 0;
  g[0] = 1;
  g[1] = 0;
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n - 1; i > 0; --i)
    std::swap(perm[i], perm[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)))]);
  std::vector<double> f2(n), t2(n);
  std::vector<int> y2(n), g2(n);
  for (std::size_t i = 0; i < n; ++i) {
    f2[i] = f[perm[i]];
    t2[i] = t[perm[i]];
    y2[i] = y[perm[i]];
    g2[i] = g[perm[i]];
  }
  CHECK(auc(f, y).value == doctest::Approx(auc(f2, y2).value).epsilon(1e-14));
  CHECK(tce(f, t) == doctest::Approx(tce(f2, t2)).epsilon(1e-14));
  CHECK(cf_mae(f, t) == doctest::Approx(cf_mae(f2, t2)).epsilon(1e-14));
  CHECK(dp_gap(f, g) == doctest::Approx(dp_gap(f2, g2)).epsilon(1e-14));
}

TEST_CASE("median") {
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(median({4, 1, 3, 2}) == doctest::Approx(2.5));
  CHECK_THROWS(median({}));
}
