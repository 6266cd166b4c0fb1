#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fsl/errors.hpp"
#include "fsl/rng.hpp"

using fsl::Rng;

TEST_CASE("same seed gives identical streams") {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("uniform01 stays in [0, 1)") {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    double u = rng.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("normal has roughly unit variance") {
  Rng rng(9);
  double sum = 0.0;
  double sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  double mean = sum / n;
  double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.03);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("below is bounded and rejects zero") {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) CHECK(rng.below(7) < 7);
  CHECK_THROWS_AS(rng.below(0), fsl::ArgumentError);
}

TEST_CASE("forked streams differ from the parent and are reproducible") {
  Rng parent(1234);
  Rng fork1 = parent.fork(1);
  Rng fork2 = parent.fork(2);
  Rng fork1_again = Rng(1234).fork(1);
  CHECK(fork1.next_u64() == fork1_again.next_u64());
  CHECK(Rng(1234).fork(1).next_u64() != fork2.next_u64());
}

TEST_CASE("shuffle is a deterministic permutation") {
  std::vector<int> v1 = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<int> v2 = v1;
  Rng a(5);
  Rng b(5);
  a.shuffle(v1);
  b.shuffle(v2);
  CHECK(v1 == v2);
  std::sort(v1.begin(), v1.end());
  CHECK(v1 == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
}
