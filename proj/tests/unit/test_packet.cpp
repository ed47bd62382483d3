#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qsplit/packet.hpp"

using namespace qsplit;

namespace {

PotentialSpec free_space() { return make_piecewise(-1.0, {{2.0, 0.0}}); }
PotentialSpec canonical() { return make_rectangular(1.0, 2.0, -1.0); }

double closed_form_T(double k) { return oracle::rectangular_T(1.0, 2.0, 0.5 * k * k); }

class CanonicalPacket : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    synth_ = new Synthesizer(canonical(), PacketSpec{}, default_position_grid(canonical(), {}));
  }
  static void TearDownTestSuite() { delete synth_; }
  static Synthesizer* synth_;
};
Synthesizer* CanonicalPacket::synth_ = nullptr;

}  // namespace

TEST(PacketSpec, SpectrumIsNormalized) {
  const PacketSpec p;
  const double norm = oracle::gaussian_average([](double) { return 1.0; }, p.k0, p.sigma_k);
  EXPECT_NEAR(norm, 1.0, 1e-12);
  EXPECT_NEAR(std::norm(p.spectrum(p.k0)), 1.0 / (std::sqrt(2.0 * std::numbers::pi) * p.sigma_k), 1e-12);
}

TEST(PacketSpec, Validation) {
  const auto spec = canonical();
  try {
    validate_packet({0.2, 0.05, -60.0}, spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SpectrumDomainError);
  }
  try {
    validate_packet({1.0, 0.05, -40.0}, spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
  }
  EXPECT_NO_THROW(validate_packet({}, spec));
}

TEST(SpectralGrid, RequiresPowerOfTwoPlusOne) {
  SynthesisOptions opt;
  opt.n_k = 500;
  EXPECT_THROW(make_spectral_grid({}, opt), Error);
  opt.n_k = 129;
  const auto g = make_spectral_grid({}, opt);
  EXPECT_EQ(g.k.size(), 129u);
  double sum = 0.0;
  for (double w : g.weights) sum += w;
  EXPECT_NEAR(sum, 16.0 * 0.05, 1e-14);
}

TEST(PositionGrid, DefaultIsAnchoredPowerOfTwo) {
  const auto x = default_position_grid(canonical(), {});
  EXPECT_DOUBLE_EQ(grid_spacing(x), 1.0 / 32.0);
  EXPECT_DOUBLE_EQ(x.front(), -160.0);
  EXPECT_DOUBLE_EQ(x.back(), 160.0);
  EXPECT_TRUE(kink_index(x, 0.0).has_value());
}

TEST(Synthesis, FreePacketMatchesClosedForm) {
  const PacketSpec p;
  const auto x = default_position_grid(free_space(), p);
  const Synthesizer s(free_space(), p, x);
  for (double t : {0.0, 25.0, 60.0}) {
    const auto f = s.snapshot(t);
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      worst = std::max(worst, std::abs(f.full[i] - oracle::free_gaussian(x[i], t, p.k0, p.sigma_k, p.x0)));
    EXPECT_LT(worst, 1e-8) << "t = " << t;
    const auto n = norms(f);
    EXPECT_NEAR(n.total, 1.0, 1e-8);
    EXPECT_NEAR(n.T, 1.0, 1e-8);
    EXPECT_LT(n.R, 1e-28);
  }
}

TEST(Synthesis, FreeRefComponentVanishes) {
  const auto x = uniform_grid(-100.0, 20.0, 601);
  const auto f = synthesize(free_space(), {}, Component::ref, 10.0, x);
  // Zero up to rounding in the reflection amplitude of an empty barrier.
  for (const auto& v : f.values) EXPECT_LT(std::abs(v), 1e-15);
  EXPECT_LT(std::abs(overlap(Synthesizer(free_space(), {}, x).snapshot(10.0))), 1e-14);
}

TEST(Moments, FreeGaussianAtStart) {
  const PacketSpec p;
  const auto x = default_position_grid(free_space(), p);
  const auto f = Synthesizer(free_space(), p, x).snapshot(0.0);
  const auto m = moments(f, Component::full);
  EXPECT_NEAR(m.xbar, p.x0, 1e-6);
  EXPECT_NEAR(m.pbar, p.k0, 1e-6);
  EXPECT_NEAR(m.var_x, 1.0 / (4.0 * p.sigma_k * p.sigma_k), 1e-6);
}

TEST(Moments, FreeSpreading) {
  // var_x(t) = s0^2 (1 + t^2 / (4 s0^4)) for s0 = 1/(2 sigma_k).
  const PacketSpec p;
  const auto x = default_position_grid(free_space(), p);
  const auto f = Synthesizer(free_space(), p, x).snapshot(40.0);
  const auto m = moments(f, Component::full);
  const double s0 = 0.5 / p.sigma_k;
  EXPECT_NEAR(m.var_x, s0 * s0 + 40.0 * 40.0 / (4.0 * s0 * s0), 1e-6);
  EXPECT_NEAR(m.xbar, p.x0 + 40.0 * p.k0, 1e-6);
}

TEST(Moments, EmptyComponentRaisesZeroNorm) {
  const auto x = uniform_grid(-100.0, 20.0, 601);
  const auto f = Synthesizer(free_space(), {}, x).snapshot(0.0);
  try {
    moments(f, Component::ref);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ZeroNorm);
  }
}

TEST(Norms, CoarseGridRaises) {
  const auto x = uniform_grid(-160.0, 160.0, 161);
  const auto f = Synthesizer(canonical(), {}, x).snapshot(70.0);
  try {
    norms(f);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::GridTooCoarse);
  }
}

TEST_F(CanonicalPacket, TransmittedNormMatchesSpectralAverage) {
  const double expected = oracle::gaussian_average(closed_form_T, 1.0, 0.05);
  // Before the packet reaches the barrier and after it has left.
  for (double t : {0.0, 10.0, 130.0}) {
    const auto n = norms(synth_->snapshot(t));
    EXPECT_NEAR(n.T, expected, 1e-4) << "t = " << t;
    EXPECT_NEAR(n.total, 1.0, 1e-4);
  }
  EXPECT_NEAR(synth_->transmission_weight(), expected, 1e-8);
}

TEST_F(CanonicalPacket, ReflectedNormIsConstant) {
  const double r0 = norms(synth_->snapshot(0.0)).R;
  for (double t : {20.0, 50.0, 60.0, 80.0}) EXPECT_NEAR(norms(synth_->snapshot(t)).R, r0, 1e-6);
}

TEST_F(CanonicalPacket, PiecewiseSumIsFullField) {
  for (double t : {0.0, 55.0, 80.0}) {
    const auto f = synth_->snapshot(t);
    double worst = 0.0;
    for (std::size_t i = 0; i < f.x.size(); ++i)
      worst = std::max(worst, std::abs(f.tr[i] + f.ref[i] - f.full[i]));
    EXPECT_LT(worst, 1e-8);
  }
}

TEST_F(CanonicalPacket, OverlapImaginaryAtStartAndDecays) {
  const auto f0 = synth_->snapshot(0.0);
  const cplx o0 = overlap(f0);
  EXPECT_LT(std::abs(o0.real()), 1e-6);
  EXPECT_GT(std::abs(o0.imag()), 0.1);

  const auto f80 = synth_->snapshot(80.0);
  const auto n = norms(f80);
  EXPECT_LT(std::abs(overlap(f80)), 0.05 * std::sqrt(n.T * n.R));
}

TEST_F(CanonicalPacket, InterferenceTermIntegratesToOverlap) {
  const auto f = synth_->snapshot(50.0);
  const auto term = interference_term(f);
  EXPECT_NEAR(trapezoid<double>(f.x, term), 2.0 * overlap(f).real(), 1e-12);
}

TEST_F(CanonicalPacket, TransmittedMomentumApproachesWeightedMean) {
  const double w = oracle::gaussian_average(closed_form_T, 1.0, 0.05);
  const double kw =
      oracle::gaussian_average([](double k) { return k * closed_form_T(k); }, 1.0, 0.05);
  const auto m = moments(synth_->snapshot(130.0), Component::tr);
  EXPECT_NEAR(m.pbar, kw / w, 1e-5);
}

TEST_F(CanonicalPacket, WorkerCountDoesNotChangeValues) {
  const auto x = uniform_grid(-40.0, 40.0, 2561);
  const auto one = Synthesizer(canonical(), {}, x, {}, Executor{1}).snapshot(55.0);
  const auto three = Synthesizer(canonical(), {}, x, {}, Executor{3}).snapshot(55.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_EQ(one.full[i], three.full[i]);
    EXPECT_EQ(one.tr[i], three.tr[i]);
    EXPECT_EQ(one.ref[i], three.ref[i]);
  }
}

TEST(PiecewiseDerivative, OneSidedAtKink) {
  // |x| has slope -1 left of the kink and +1 right of it.
  const auto x = uniform_grid(-1.0, 1.0, 201);
  std::vector<cplx> f(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) f[i] = std::abs(x[i]);
  const auto kink = kink_index(x, 0.0);
  ASSERT_TRUE(kink.has_value());
  const auto d = piecewise_derivative(f, grid_spacing(x), kink);
  EXPECT_NEAR(d[*kink].real(), -1.0, 1e-12);
  EXPECT_NEAR(d[*kink + 1].real(), 1.0, 1e-12);
  EXPECT_NEAR(d[*kink - 1].real(), -1.0, 1e-12);
}

TEST(Continuity, FreeResidualSmallAtBaseline) {
  const double r = continuity_residual(free_space(), {}, Component::full, 20.0, 0.01, -80.0, -20.0);
  EXPECT_LT(r, 1e-6);
}

TEST(Continuity, WindowMustAvoidCut) {
  try {
    continuity_residual(canonical(), {}, Component::ref, 60.0, 0.01, -10.0, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
  }
}

TEST(Continuity, FullFieldConvergesThroughCut) {
  double previous = 0.0;
  for (double h : {0.1, 0.05, 0.025}) {
    ContinuityOptions opt;
    opt.h = h;
    const double r = continuity_residual(canonical(), {}, Component::full, 60.0, h / 5.0, -11.0, 11.0, opt);
    if (previous > 0.0) EXPECT_GT(std::log2(previous / r), 1.8);
    previous = r;
  }
}
