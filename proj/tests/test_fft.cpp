// tests/test_fft.cpp

// Copyright 2026  The farfield authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <vector>

#include "farfield/fft.hpp"
#include "farfield/rng.hpp"
#include "oracles.hpp"

using farfield::cplx;

namespace {

double max_err(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  double mx = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    mx = std::max(mx, std::abs(a[i] - b[i]));
  return mx;
}

double max_mag(const std::vector<cplx>& a) {
  double mx = 0.0;
  for (const cplx& v : a) mx = std::max(mx, std::abs(v));
  return mx;
}

}  // namespace

TEST_CASE("radix-2 transform matches the direct transform", "[fft]") {
  farfield::Rng rng(101);
  for (int n : {1, 2, 4, 8, 64, 256}) {
    std::vector<cplx> x(static_cast<std::size_t>(n));
    for (cplx& v : x) v = rng.gaussian_cplx();

    std::vector<cplx> fwd = x;
    farfield::fft_inplace(&fwd, false);
    const std::vector<cplx> fwd_ref = oracle::naive_dft(x, false);
    REQUIRE(max_err(fwd, fwd_ref) <= 1e-10 * std::max(1.0, max_mag(fwd_ref)));

    std::vector<cplx> inv = x;
    farfield::fft_inplace(&inv, true);
    const std::vector<cplx> inv_ref = oracle::naive_dft(x, true);
    REQUIRE(max_err(inv, inv_ref) <= 1e-10 * std::max(1.0, max_mag(fwd_ref)));
  }
}

TEST_CASE("forward then inverse transform returns the input", "[fft]") {
  farfield::Rng rng(202);
  std::vector<cplx> x(512);
  for (cplx& v : x) v = rng.gaussian_cplx();
  std::vector<cplx> y = x;
  farfield::fft_inplace(&y, false);
  farfield::fft_inplace(&y, true);
  REQUIRE(max_err(x, y) <= 1e-12 * max_mag(x) * 512);
}

TEST_CASE("transform of a unit impulse is flat", "[fft]") {
  std::vector<cplx> x(16, cplx(0.0, 0.0));
  x[0] = cplx(1.0, 0.0);
  farfield::fft_inplace(&x, false);
  for (const cplx& v : x) REQUIRE(std::abs(v - cplx(1.0, 0.0)) <= 1e-14);
}

TEST_CASE("convolution matches the direct sum", "[fft][oracle]") {
  farfield::Rng rng(303);
  std::vector<double> a(17), b(9);
  for (double& v : a) v = rng.gaussian();
  for (double& v : b) v = rng.gaussian();
  const std::vector<double> got = farfield::fft_convolve(a, b);
  const std::vector<double> want = oracle::naive_convolve(a, b);
  REQUIRE(got.size() == want.size());
  REQUIRE(got.size() == a.size() + b.size() - 1);
  for (std::size_t i = 0; i < got.size(); ++i)
    REQUIRE(std::abs(got[i] - want[i]) <= 1e-10);
}

TEST_CASE("convolution with a delta is a copy", "[fft]") {
  std::vector<double> a = {1.0, -2.0, 3.0, 0.5};
  std::vector<double> delta = {1.0};
  const std::vector<double> got = farfield::fft_convolve(a, delta);
  REQUIRE(got.size() == a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    REQUIRE(std::abs(got[i] - a[i]) <= 1e-14);
}

TEST_CASE("convolution of empty inputs is empty", "[fft]") {
  REQUIRE(farfield::fft_convolve({}, {1.0, 2.0}).empty());
  REQUIRE(farfield::fft_convolve({1.0}, {}).empty());
}

TEST_CASE("non-power-of-two sizes are rejected", "[fft]") {
  std::vector<cplx> x(12, cplx(0.0, 0.0));
  REQUIRE_THROWS_AS(farfield::fft_inplace(&x, false), std::invalid_argument);
}

TEST_CASE("next_power_of_two rounds up", "[fft]") {
  REQUIRE(farfield::next_power_of_two(1) == 1);
  REQUIRE(farfield::next_power_of_two(2) == 2);
  REQUIRE(farfield::next_power_of_two(3) == 4);
  REQUIRE(farfield::next_power_of_two(513) == 1024);
}
