#include <catch_amalgamated.hpp>

#include <array>
#include <set>

#include "ovemo/rng.hpp"

using namespace ovemo::rng;

// Reference outputs of splitmix64 (Vigna's reference generator seeded with 0
// emits splitmix64(0), splitmix64(golden), ...).
TEST_CASE("splitmix64 matches the reference sequence") {
  CHECK(splitmix64(0) == 0xE220A8397B1DCDAFULL);
  CHECK(splitmix64(kGolden) == 0x6E789E6AA1B965F4ULL);
  CHECK(splitmix64(2 * kGolden) == 0x06C45D188009454FULL);
}

TEST_CASE("fnv1a64 known vectors") {
  CHECK(fnv1a64("") == 0xCBF29CE484222325ULL);
  CHECK(fnv1a64("a") == 0xAF63DC4C8601EC8CULL);
  CHECK(fnv1a64("foobar") == 0x85944171F73967E8ULL);
  CHECK(fnv1a64("bar", fnv1a64("foo")) == fnv1a64("foobar"));
}

TEST_CASE("streams are deterministic and position-keyed") {
  Stream a(42, 3), b(42, 3), c(42, 4), d(43, 3);
  std::array<std::uint64_t, 4> xa{}, xb{}, xc{}, xd{};
  for (int i = 0; i < 4; ++i) {
    xa[i] = a.next();
    xb[i] = b.next();
    xc[i] = c.next();
    xd[i] = d.next();
  }
  CHECK(xa == xb);
  CHECK(xa != xc);
  CHECK(xa != xd);
}

TEST_CASE("uniform_below stays in range and hits every value") {
  for (std::uint64_t bound : {1ULL, 2ULL, 3ULL, 7ULL, 10ULL}) {
    Stream s(1, bound);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 2000; ++i) {
      const auto v = s.uniform_below(bound);
      REQUIRE(v < bound);
      seen.insert(v);
    }
    CHECK(seen.size() == bound);
  }
  Stream z(5, 5);
  CHECK(z.uniform_below(0) == 0);
}

TEST_CASE("uniform_below is roughly uniform") {
  Stream s(2024, 0);
  std::array<int, 6> counts{};
  const int n = 60000;
  for (int i = 0; i < n; ++i) ++counts[s.uniform_below(6)];
  // chi-square with 5 dof; 20.5 is the 0.999 quantile
  double chi = 0;
  for (int c : counts) chi += (c - n / 6.0) * (c - n / 6.0) / (n / 6.0);
  CHECK(chi < 20.5);
}

TEST_CASE("coin is balanced") {
  int heads = 0;
  for (std::uint64_t i = 0; i < 10000; ++i) heads += Stream(9, i).coin();
  CHECK(heads > 4700);
  CHECK(heads < 5300);
}
