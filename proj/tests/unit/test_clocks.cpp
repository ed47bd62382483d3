#include <cmath>
#include <optional>
#include <vector>

#include <gtest/gtest.h>

#include "qsplit/clocks.hpp"

using namespace qsplit;

namespace {

const std::vector<double> kFactors{1e-2, 1e-3, 1e-4};

PotentialSpec canonical() { return make_rectangular(1.0, 2.0, -1.0); }

template <class F>
std::optional<ErrorKind> kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

}  // namespace

TEST(Clocks, FreeSpaceTimesEqualLengthOverVelocity) {
  const std::vector<std::pair<double, double>> cases{
      {0.5, 0.3}, {1.0, 1.0}, {2.0, 1.0}, {4.0, 2.5}, {7.5, 0.8}};
  for (auto [l, k] : cases) {
    const auto spec = make_piecewise(-0.5 * l, {{l, 0.0}});
    const auto mode = EnergyMode::from_wavenumber(k);
    const auto r = clock_times(spec, mode, ClockConfig::relative(mode.energy(), kFactors));
    ASSERT_TRUE(r.dwell_tr && r.larmor_tr);
    EXPECT_NEAR(*r.dwell_tr, l / k, 1e-6 * l / k) << l << " " << k;
    EXPECT_NEAR(r.larmor_tr->limit, l / k, 1e-6 * l / k) << l << " " << k;
    EXPECT_FALSE(r.dwell_ref.has_value());
    EXPECT_FALSE(r.larmor_ref.has_value());
  }
}

TEST(Clocks, FreeSpaceReflectionHasNoFlux) {
  const auto spec = make_piecewise(0.0, {{2.0, 0.0}});
  const auto mode = EnergyMode::from_energy(0.5);
  const auto sub = select_odd_split(spec, mode);
  EXPECT_EQ(kind_of([&] { dwell_time(sub, Subprocess::Reflection); }), ErrorKind::ZeroFlux);
  EXPECT_EQ(kind_of([&] {
              larmor_times(spec, mode, ClockConfig::relative(0.5, kFactors), Subprocess::Reflection);
            }),
            ErrorKind::ZeroFlux);
}

TEST(Clocks, DwellQuadratureConverged) {
  const auto sub = select_odd_split(canonical(), EnergyMode::from_energy(0.5));
  for (Subprocess s : {Subprocess::Transmission, Subprocess::Reflection}) {
    const double base = dwell_time(sub, s);
    const double fine = dwell_time(sub, s, 20480);
    EXPECT_NEAR(base / fine - 1.0, 0.0, 1e-6) << to_string(s);
    EXPECT_GT(base, 0.0);
  }
}

TEST(Clocks, DwellTimesOfCanonicalBarrier) {
  // Independent check: integrate |psi_tr|^2 by the trapezoid rule on a fine grid.
  const auto mode = EnergyMode::from_energy(0.5);
  const auto sub = select_odd_split(canonical(), mode);
  const std::size_t n = 400001;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
    const double w = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
    sum += w * std::norm(sub.evaluate(Component::tr, x).value);
  }
  sum *= 2.0 / static_cast<double>(n - 1);
  const double expected = sum / (mode.k() * std::norm(sub.split().tr_in));
  EXPECT_NEAR(dwell_time(sub, Subprocess::Transmission), expected, 1e-8 * expected);
}

TEST(Clocks, ExtrapolationResidualsShrink) {
  const auto mode = EnergyMode::from_energy(0.5);
  const auto config = ClockConfig::relative(0.5, kFactors);
  for (Subprocess s : {Subprocess::Transmission, Subprocess::Reflection}) {
    const auto e = larmor_times(canonical(), mode, config, s);
    ASSERT_EQ(e.residuals.size(), 3u);
    EXPECT_LE(e.residuals[1], e.residuals[0]);
    EXPECT_LE(e.residuals[2], e.residuals[1]);
    EXPECT_TRUE(e.within_spread);
    EXPECT_GT(e.limit, 0.0);
  }
}

TEST(Clocks, RichardsonRemovesQuadraticTerm) {
  const std::vector<double> w{0.1, 0.05, 0.025};
  std::vector<double> raw;
  for (double x : w) raw.push_back(3.0 + 2.0 * x * x + 5.0 * x * x * x * x);
  const auto r = richardson(w, raw, 2);
  EXPECT_NEAR(r.limit, 3.0, 1e-12);
  EXPECT_TRUE(r.monotone);
}

TEST(Clocks, FieldIsNonInvasive) {
  const std::vector<double> omegas{5e-3, 1e-3, 5e-4, 1e-4};
  const auto r = non_invasiveness(canonical(), EnergyMode::from_energy(0.5), omegas);
  EXPECT_GE(r.exponent, 1.9);
}

TEST(Clocks, OmegaValidation) {
  const auto mode = EnergyMode::from_energy(0.5);
  auto kind = [&](std::vector<double> omegas) {
    ClockConfig c;
    c.omegas = std::move(omegas);
    return kind_of([&] { larmor_times(canonical(), mode, c, Subprocess::Transmission); });
  };
  EXPECT_EQ(kind({}), ErrorKind::InvalidArgument);
  EXPECT_EQ(kind({1e-3, 0.0}), ErrorKind::InvalidArgument);
  EXPECT_EQ(kind({1e-4, 1e-3}), ErrorKind::InvalidArgument);
  EXPECT_EQ(kind({0.02}), ErrorKind::InvalidArgument);
  // The bound itself is allowed.
  EXPECT_EQ(kind({0.005, 1e-4}), std::nullopt);
}

TEST(Clocks, HartmanSweepDwellIncreases) {
  const std::vector<double> kl{2.0, 4.0, 6.0, 8.0, 10.0};
  const auto rows = hartman_sweep(1.0, 0.5, kl, kFactors);
  EXPECT_TRUE(strictly_increasing_dwell(rows));
  for (const auto& r : rows) {
    ASSERT_TRUE(r.times.dwell_tr && r.times.larmor_tr);
    EXPECT_GT(*r.times.dwell_tr, 0.0);
    EXPECT_GT(*r.times.dwell_ref, 0.0);
  }
}

TEST(Clocks, TimesArePositiveAcrossEnergies) {
  const auto spec = make_piecewise(-1.5, {{1.0, 1.2}, {1.0, 0.3}, {1.0, 1.2}});
  for (double e : {0.3, 0.9, 1.5, 3.0}) {
    const auto mode = EnergyMode::from_energy(e);
    const auto r = clock_times(spec, mode, ClockConfig::relative(e, kFactors));
    ASSERT_TRUE(r.dwell_tr && r.dwell_ref);
    EXPECT_GT(*r.dwell_tr, 0.0);
    EXPECT_GT(*r.dwell_ref, 0.0);
  }
}

TEST(PacketReadout, TooEarlyIsRejected) {
  const PacketSpec p;
  const auto config = ClockConfig::relative(0.5, kFactors);
  EXPECT_EQ(kind_of([&] {
              larmor_packet_readout(canonical(), p, config, Subprocess::Transmission, 0.0,
                                    default_position_grid(canonical(), p));
            }),
            ErrorKind::PrematureReadout);
}

TEST(PacketReadout, AgreesWithSpectralAverage) {
  const PacketSpec p;
  const auto config = ClockConfig::relative(0.5, kFactors);
  for (Subprocess s : {Subprocess::Transmission, Subprocess::Reflection}) {
    const auto r = larmor_packet_readout(canonical(), p, config, s, 100.0,
                                         default_position_grid(canonical(), p));
    const double avg = spectral_average_larmor(canonical(), p, kFactors, s);
    EXPECT_NEAR(r.estimate.limit / avg - 1.0, 0.0, 0.05) << to_string(s);
  }
}

TEST(PacketReadout, FreePacketReadsLengthOverVelocity) {
  const auto spec = make_piecewise(-1.0, {{2.0, 0.0}});
  const PacketSpec p;
  const auto r = larmor_packet_readout(spec, p, ClockConfig::relative(0.5, kFactors),
                                       Subprocess::Transmission, 100.0,
                                       default_position_grid(spec, p));
  EXPECT_NEAR(r.estimate.limit / 2.0 - 1.0, 0.0, 0.01);
}
