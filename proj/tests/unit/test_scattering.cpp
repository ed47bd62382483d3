#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qsplit/scattering.hpp"

using namespace qsplit;

TEST(EnergyMode, RejectsNonPositiveEnergy) {
  for (double e : {0.0, -0.5}) {
    try {
      EnergyMode::from_energy(e);
      FAIL();
    } catch (const Error& err) {
      EXPECT_EQ(err.kind(), ErrorKind::InvalidArgument);
    }
  }
  EXPECT_DOUBLE_EQ(EnergyMode::from_wavenumber(2.0).energy(), 2.0);
  EXPECT_DOUBLE_EQ(EnergyMode::from_energy(0.5).k(), 1.0);
}

TEST(Scattering, FreeSpaceIsTransparent) {
  const auto spec = make_piecewise(0.0, {{3.0, 0.0}});
  const auto amp = solve_full(spec, EnergyMode::from_energy(0.7));
  EXPECT_NEAR(amp.T, 1.0, 1e-14);
  EXPECT_NEAR(std::abs(amp.reflected), 0.0, 1e-14);
  EXPECT_NEAR(std::abs(amp.transmitted - 1.0), 0.0, 1e-13);
}

TEST(Scattering, TransferMatrixIsUnimodular) {
  const auto spec = make_piecewise(-1.0, {{0.5, 2.0}, {1.0, -0.5}, {0.5, 2.0}});
  for (double e : {0.1, 0.5, 2.0, 3.7}) {
    const auto m = total_transfer(spec, EnergyMode::from_energy(e));
    EXPECT_NEAR(std::abs(m.det() - 1.0), 0.0, 1e-12) << "E = " << e;
  }
}

TEST(Scattering, MatchesClosedFormRectangle) {
  for (double v0 : {0.25, 1.0, 4.0})
    for (double l : {0.5, 2.0, 5.0})
      for (double ratio : {0.1, 0.5, 0.99, 1.0, 1.01, 2.0, 5.0}) {
        const double e = ratio * v0;
        const auto amp = solve_full(make_rectangular(v0, l, 0.3), EnergyMode::from_energy(e));
        const double ref = oracle::rectangular_T(v0, l, e);
        EXPECT_NEAR(amp.T / ref - 1.0, 0.0, 1e-12) << v0 << " " << l << " " << e;
      }
}

TEST(Scattering, TransmissionAmplitudeMatchesClosedForm) {
  // The closed form is written for a barrier starting at the origin.
  for (double e : {0.3, 1.0, 2.5}) {
    const auto amp = solve_full(make_rectangular(1.0, 2.0, 0.0), EnergyMode::from_energy(e));
    const auto ref = oracle::rectangular_t(1.0, 2.0, e);
    EXPECT_NEAR(std::abs(amp.transmitted - ref), 0.0, 1e-12 * std::abs(ref)) << e;
  }
}

TEST(Scattering, AgreesWithDirectOdeIntegration) {
  const auto spec = make_piecewise(-1.5, {{1.0, 1.2}, {1.0, 0.3}, {1.0, 1.2}});
  for (double e : {0.4, 0.9, 1.6}) {
    const auto mode = EnergyMode::from_energy(e);
    const auto amp = solve_full(spec, mode);
    const auto ode = oracle::integrate_left_incident([&](double x) { return spec(x); },
                                                     spec.left_edge(), spec.right_edge(), e,
                                                     amp.transmitted, 4000);
    EXPECT_NEAR(std::abs(ode.reflected - amp.reflected), 0.0, 1e-9) << e;
    const ScatteringStates states(spec, mode);
    for (std::size_t i = 0; i < ode.x.size(); i += 500)
      EXPECT_NEAR(std::abs(states.left_incident(ode.x[i]).value - ode.psi[i]), 0.0, 1e-9);
  }
}

TEST(Scattering, DegenerateSegmentIsContinuous) {
  // E exactly at the barrier top versus a hair above and below.
  const auto spec = make_rectangular(1.0, 2.0, 0.0);
  const double at = solve_full(spec, EnergyMode::from_energy(1.0)).T;
  const double below = solve_full(spec, EnergyMode::from_energy(1.0 - 1e-9)).T;
  const double above = solve_full(spec, EnergyMode::from_energy(1.0 + 1e-9)).T;
  EXPECT_NEAR(at, 1.0 / 3.0, 1e-14);
  EXPECT_NEAR(at, below, 1e-8);
  EXPECT_NEAR(at, above, 1e-8);
}

TEST(Scattering, OverflowGuard) {
  const auto spec = make_rectangular(50.0, 50.0, 0.0);
  try {
    solve_full(spec, EnergyMode::from_energy(0.5));
    FAIL() << "expected NumericalOverflow";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NumericalOverflow);
  }
}

TEST(Scattering, OpaqueBarrierStillUnitary) {
  const auto spec = make_rectangular(8.0, 8.0, -4.0);
  const auto amp = solve_full(spec, EnergyMode::from_energy(0.1));
  EXPECT_GT(amp.T, 0.0);
  EXPECT_NEAR(amp.T + amp.R, 1.0, 1e-12);
}

TEST(ScatteringStates, RightIncidentReciprocity) {
  const auto spec = make_piecewise(0.0, {{0.7, 1.5}, {0.4, 3.0}, {0.7, 1.5}});
  const ScatteringStates states(spec, EnergyMode::from_energy(1.1));
  const auto& amp = states.amplitudes();
  EXPECT_NEAR(std::abs(states.right_transmitted() - amp.transmitted), 0.0, 1e-13);
  EXPECT_NEAR(std::abs(states.right_reflected()), std::abs(amp.reflected), 1e-13);
}

TEST(ScatteringStates, MatchPlaneWavesAndAreSmooth) {
  const auto spec = make_piecewise(-1.0, {{0.5, 2.0}, {1.0, 0.5}, {0.5, 2.0}});
  const auto mode = EnergyMode::from_energy(0.8);
  const ScatteringStates states(spec, mode);
  const double k = mode.k();
  const cplx i(0.0, 1.0);
  const auto& amp = states.amplitudes();
  const double xl = -3.0, xr = 2.5;
  EXPECT_NEAR(std::abs(states.left_incident(xl).value -
                       (std::exp(i * k * xl) + amp.reflected * std::exp(-i * k * xl))),
              0.0, 1e-13);
  EXPECT_NEAR(std::abs(states.left_incident(xr).value - amp.transmitted * std::exp(i * k * xr)),
              0.0, 1e-13);
  // Value and slope continuous across every boundary.
  for (double b : spec.boundaries()) {
    for (auto f : {&ScatteringStates::left_incident, &ScatteringStates::right_incident}) {
      const auto lo = (states.*f)(b - 1e-9);
      const auto hi = (states.*f)(b);
      EXPECT_NEAR(std::abs(lo.value - hi.value), 0.0, 1e-8);
      EXPECT_NEAR(std::abs(lo.slope - hi.slope), 0.0, 1e-7);
    }
  }
}

TEST(ScatteringStates, FluxIsConserved) {
  const auto spec = make_rectangular(2.0, 1.5, 0.0);
  const ScatteringStates states(spec, EnergyMode::from_energy(0.6));
  const auto& amp = states.amplitudes();
  const double expected = states.mode().k() * amp.T;
  for (double x : {-2.0, 0.1, 0.75, 1.4, 3.0}) {
    const auto s = states.left_incident(x);
    EXPECT_NEAR(std::imag(std::conj(s.value) * s.slope), expected, 1e-12) << x;
  }
}

TEST(EvaluateState, BoundaryPairsRoundTrip) {
  const auto spec = make_rectangular(1.0, 2.0, -1.0);
  const auto mode = EnergyMode::from_energy(0.5);
  const ScatteringStates states(spec, mode);
  const auto& amp = states.amplitudes();
  const std::vector<double> x{-4.0, -1.0, 0.0, 0.6, 1.0, 4.0};
  const auto full = evaluate_state(spec, mode, {1.0, amp.reflected, Side::Left}, x);
  const auto from_right = evaluate_state(spec, mode, {0.0, amp.transmitted, Side::Right}, x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(std::abs(full.values[i] - states.left_incident(x[i]).value), 0.0, 1e-13);
    EXPECT_NEAR(std::abs(from_right.values[i] - full.values[i]), 0.0, 1e-12);
  }
}
