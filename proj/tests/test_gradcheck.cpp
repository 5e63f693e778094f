// tests/test_gradcheck.cpp

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

#include <cmath>
#include <complex>
#include <vector>

#include "farfield/gradcheck.hpp"
#include "farfield/rng.hpp"
#include "test_util.hpp"

using farfield::cplx;
using farfield::DerivativeRecord;
using farfield::GraphProbe;
using farfield::MaskParam;
using farfield::MaskPoint;
using farfield::MaskTensor;
using farfield::ProbeLoss;
using farfield::ProbePipeline;
using farfield::ProbeRunner;
using farfield::StftTensor;

namespace {

GraphProbe small_probe(ProbePipeline pipeline) {
  GraphProbe p;
  p.pipeline = pipeline;
  p.seed = 5;
  p.channels = 2;
  p.duration = 0.4;
  p.t60 = 0.25;
  p.snr_db = 10.0;
  p.fft_size = 128;
  p.hop = 64;
  return p;
}

}  // namespace

TEST_CASE("spectrogram loss is zero on identity and counts one cell",
          "[gradcheck]") {
  farfield::Rng rng(81);
  const StftTensor x = testutil::random_tensor(6, 4, 2, &rng);
  REQUIRE(farfield::scalar_loss_stft_mse(x, x) == 0.0);

  StftTensor y = x;
  y.at(2, 1, 1) += cplx(0.3, 0.4);
  REQUIRE(farfield::scalar_loss_stft_mse(y, x) ==
          Catch::Approx(0.25 / (6 * 4 * 2)).epsilon(1e-13));
}

TEST_CASE("loss values match their loop definitions", "[gradcheck][oracle]") {
  farfield::Rng rng(82);
  const StftTensor x = testutil::random_tensor(7, 5, 2, &rng);
  const StftTensor target = testutil::random_tensor(7, 5, 2, &rng);

  double acc = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i)
    acc += std::norm(x.data[i] - target.data[i]);
  REQUIRE(farfield::scalar_loss_stft_mse(x, target) ==
          Catch::Approx(acc / (7 * 5 * 2)).epsilon(1e-13));

  double pw = 0.0;
  for (const cplx& v : x.data) pw += std::norm(v);
  REQUIRE(farfield::scalar_loss_output_power(x) ==
          Catch::Approx(pw / (7 * 5 * 2)).epsilon(1e-13));

  farfield::FeatureMatrix f = farfield::FeatureMatrix::zeros(4, 3);
  farfield::FeatureMatrix g = farfield::FeatureMatrix::zeros(4, 3);
  for (double& v : f.values) v = rng.gaussian();
  for (double& v : g.values) v = rng.gaussian();
  double facc = 0.0;
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    const double d = f.values[i] - g.values[i];
    facc += d * d;
  }
  REQUIRE(farfield::scalar_loss_feature_mse(f, g) ==
          Catch::Approx(facc / 12.0).epsilon(1e-13));
}

TEST_CASE("an even loss has an exactly zero central quotient", "[gradcheck]") {
  // L(h) = mse(h v, 0) is even in h and both endpoints see the same
  // magnitudes bit for bit, so the symmetric difference cancels exactly;
  // this is the stationary-point contract of the central quotient
  farfield::Rng rng(83);
  const StftTensor x = testutil::make_tensor(5, 4, 1);
  const StftTensor v = testutil::random_tensor(5, 4, 1, &rng);
  for (double h : {1e-1, 1e-3}) {
    StftTensor plus = x, minus = x;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      plus.data[i] += h * v.data[i];
      minus.data[i] -= h * v.data[i];
    }
    const double lp = farfield::scalar_loss_stft_mse(plus, x);
    const double lm = farfield::scalar_loss_stft_mse(minus, x);
    REQUIRE((lp - lm) / (2.0 * h) == 0.0);
  }
}

TEST_CASE("activation mapping clamps pre-activations", "[gradcheck]") {
  MaskTensor z = MaskTensor::tf(1, 3, 1);
  z.ref(0, 0, 0) = -0.5;
  z.ref(0, 1, 0) = 0.5;
  z.ref(0, 2, 0) = 1.5;

  const MaskTensor relu =
      farfield::grad_detail::map_activation(z, MaskParam::kClippedRelu);
  REQUIRE(relu.values == std::vector<double>{0.0, 0.5, 1.0});

  const MaskTensor sig =
      farfield::grad_detail::map_activation(z, MaskParam::kSigmoid);
  REQUIRE(sig.at(0, 1, 0) == Catch::Approx(1.0 / (1.0 + std::exp(-0.5))).epsilon(1e-15));

  // the direct parametrization refuses out-of-range values instead
  REQUIRE_THROWS_AS(farfield::grad_detail::map_activation(z, MaskParam::kDirect),
                    std::invalid_argument);
}

TEST_CASE("point arithmetic walks only the masks the point carries",
          "[gradcheck]") {
  MaskPoint p;
  p.wpe = MaskTensor::tf(2, 2, 1, 0.5);
  MaskPoint d;
  d.wpe = MaskTensor::tf(2, 2, 1, 1.0);
  d.speech = MaskTensor::tf(2, 2, 1, 1.0);  // ignored: the point has no speech

  const MaskPoint out = farfield::grad_detail::axpy(p, d, 0.25);
  for (double v : out.wpe->values) REQUIRE(v == 0.75);
  REQUIRE_FALSE(out.speech.has_value());

  MaskPoint missing;  // direction lacking a carried mask is a contract error
  REQUIRE_THROWS_AS(farfield::grad_detail::axpy(p, missing, 0.1),
                    std::invalid_argument);
}

TEST_CASE("probe validation rejects malformed step ladders", "[gradcheck]") {
  GraphProbe p = small_probe(ProbePipeline::kFull);
  p.steps = {1e-2, 1e-3};
  REQUIRE_THROWS_AS(p.validate(), std::invalid_argument);
  p.steps = {1e-2, 1e-3, 1e-3};
  REQUIRE_THROWS_AS(p.validate(), std::invalid_argument);
  p.steps = {1e-2, 1e-3, 1e-13};
  REQUIRE_THROWS_AS(p.validate(), std::invalid_argument);
  p.steps = {1e-2, 1e-3, 1e-4};
  p.validate();
}

TEST_CASE("a zero direction has a zero quotient", "[gradcheck]") {
  const GraphProbe probe = small_probe(ProbePipeline::kWpeOnly);
  ProbeRunner runner(probe);
  farfield::Rng rng(84);
  const MaskPoint point = runner.sample_point(&rng);
  MaskPoint zero = point;
  for (double& v : zero.wpe->values) v = 0.0;
  REQUIRE(runner.directional_derivative(point, zero, 1e-3) == 0.0);
}

TEST_CASE("the quotient is antisymmetric in the direction", "[gradcheck]") {
  const GraphProbe probe = small_probe(ProbePipeline::kWpeOnly);
  ProbeRunner runner(probe);
  farfield::Rng rng(85);
  const MaskPoint point = runner.sample_point(&rng);
  const MaskPoint dir = runner.sample_direction(point, &rng);
  MaskPoint neg = dir;
  for (double& v : neg.wpe->values) v = -v;

  const double fwd = runner.directional_derivative(point, dir, 1e-3);
  const double bwd = runner.directional_derivative(point, neg, 1e-3);
  REQUIRE(fwd == -bwd);
  REQUIRE(fwd != 0.0);
}

TEST_CASE("interior probes of the full pipeline converge", "[gradcheck]") {
  GraphProbe probe = small_probe(ProbePipeline::kFull);
  probe.loss = ProbeLoss::kStftMse;
  ProbeRunner runner(probe);
  farfield::Rng rng(86);
  const MaskPoint point = runner.sample_point(&rng);
  const MaskPoint dir = runner.sample_direction(point, &rng);
  const DerivativeRecord rec = runner.derivative_record(point, dir);
  REQUIRE(rec.quotients.size() == 3);
  REQUIRE(rec.converged);
  REQUIRE(std::isfinite(rec.extrapolated));
  REQUIRE(rec.loss_scale > 0.0);
}

TEST_CASE("sigmoid parametrization stays smooth across a sweep", "[gradcheck]") {
  GraphProbe probe = small_probe(ProbePipeline::kFull);
  probe.param = MaskParam::kSigmoid;
  probe.loss = ProbeLoss::kOutputPower;
  const std::vector<DerivativeRecord> recs = farfield::smoothness_sweep(probe, 5);
  REQUIRE(recs.size() == 5);
  for (const DerivativeRecord& r : recs)
    REQUIRE((r.converged || r.fallback_flagged));
}

TEST_CASE("an empty sweep yields an empty report", "[gradcheck]") {
  const GraphProbe probe = small_probe(ProbePipeline::kWpeOnly);
  REQUIRE(farfield::smoothness_sweep(probe, 0).empty());
  REQUIRE_THROWS_AS(farfield::smoothness_sweep(probe, -1), std::invalid_argument);
}

TEST_CASE("a clamp boundary shows first-order behaviour at coarse steps",
          "[gradcheck]") {
  // pre-activations pinned exactly on the clipped-relu corner: one side of
  // every central difference is clamped, so the quotient error falls as h
  // instead of h^2. Coarse steps keep that signature above the numerical
  // noise; tiny steps would let it hide under the floor.
  GraphProbe probe = small_probe(ProbePipeline::kWpeOnly);
  probe.param = MaskParam::kClippedRelu;
  probe.steps = {0.2, 0.1, 0.05};
  ProbeRunner runner(probe);
  farfield::Rng rng(87);

  MaskPoint boundary;
  boundary.wpe = farfield::constant_mask(runner.input(), 1.0);
  const MaskPoint dir = runner.sample_direction(boundary, &rng);
  const DerivativeRecord rec = runner.derivative_record(boundary, dir);
  REQUIRE_FALSE(rec.converged);
  REQUIRE_FALSE(rec.fallback_flagged);
  REQUIRE(rec.observed_order < 1.6);

  // the same regime applied to an interior point keeps its second order,
  // so the flag above is the kink, not the coarse steps
  const MaskPoint interior = runner.sample_point(&rng);
  const MaskPoint dir2 = runner.sample_direction(interior, &rng);
  const DerivativeRecord ok = runner.derivative_record(interior, dir2);
  REQUIRE(ok.converged);
}

TEST_CASE("the one-call quotient helper matches the runner", "[gradcheck]") {
  const GraphProbe probe = small_probe(ProbePipeline::kWpeOnly);
  ProbeRunner runner(probe);
  farfield::Rng rng(88);
  const MaskPoint point = runner.sample_point(&rng);
  const MaskPoint dir = runner.sample_direction(point, &rng);
  const double a = runner.directional_derivative(point, dir, 1e-2);
  const double b = farfield::directional_derivative(probe, point, dir, 1e-2);
  REQUIRE(a == b);
}
