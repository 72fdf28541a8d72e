#include <doctest.h>

#include <random>
#include <set>

#include "etsi/parallel.hpp"
#include "etsi/rng.hpp"

using namespace etsi;

TEST_SUITE("rng") {

// Known-answer vectors published with the reference Philox implementation.
TEST_CASE("philox4x32-10 known-answer vectors") {
  const auto zero = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
  CHECK(zero == Philox4x32::Block{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  const auto ones = Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                         {0xffffffffu, 0xffffffffu});
  CHECK(ones == Philox4x32::Block{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  const auto pi = Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                       {0xa4093822u, 0x299f31d0u});
  CHECK(pi == Philox4x32::Block{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("a stream is a pure function of seed and stream id") {
  Philox4x32 a(7, 3), b(7, 3), c(7, 4), d(8, 3);
  bool differs_c = false, differs_d = false;
  for (int i = 0; i < 64; ++i) {
    const auto x = a();
    CHECK(x == b());
    differs_c = differs_c || x != c();
    differs_d = differs_d || x != d();
  }
  CHECK(differs_c);
  CHECK(differs_d);
}

TEST_CASE("discard_blocks skips whole 128-bit blocks") {
  Philox4x32 a(1, 1), b(1, 1);
  for (int i = 0; i < 12; ++i) a();
  b.discard_blocks(3);
  for (int i = 0; i < 8; ++i) CHECK(a() == b());
}

TEST_CASE("stream ids keep domains apart") {
  std::set<std::uint64_t> ids;
  for (std::uint8_t d = 0; d < 4; ++d) {
    for (std::uint64_t i = 0; i < 50; ++i) {
      for (std::uint32_t att = 0; att < 3; ++att) ids.insert(stream_id(d, i, att));
    }
  }
  CHECK(ids.size() == 4u * 50u * 3u);
}

TEST_CASE("uniform draws look uniform") {
  Philox4x32 rng(42, 0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 200000;
  double sum = 0.0;
  int bins[10] = {};
  for (int i = 0; i < n; ++i) {
    const double x = u(rng);
    sum += x;
    ++bins[static_cast<int>(x * 10.0)];
  }
  CHECK(std::abs(sum / n - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
  for (int b : bins) CHECK(std::abs(b - n / 10) < 5 * std::sqrt(n / 10.0));
}

TEST_CASE("parallel_for visits each index once and propagates errors") {
  for (std::size_t threads : {1u, 2u, 5u}) {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; }, threads);
    for (int h : hits) CHECK(h == 1);
    CHECK_THROWS_AS(parallel_for(
                        100,
                        [](std::size_t i) {
                          if (i == 37) throw std::runtime_error("boom");
                        },
                        threads),
                    std::runtime_error);
  }
}

}
