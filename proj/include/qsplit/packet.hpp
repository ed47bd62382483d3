#pragma once

// Time-dependent packets built by superposing stationary states,
//
//   psi(x, t) = (2 pi)^{-1/2} sum_j w_j f(k_j) phi(x; k_j) exp(-i k_j^2 t / 2),
//
// with composite Simpson weights w_j on a uniform k-grid and phi one of the
// stationary components of the split. Time is a parameter, not an evolution
// variable, so each snapshot is exact in t.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qsplit/error.hpp"
#include "qsplit/field.hpp"
#include "qsplit/parallel.hpp"
#include "qsplit/potential.hpp"
#include "qsplit/scattering.hpp"
#include "qsplit/splitting.hpp"

namespace qsplit {

inline constexpr double kNormTolerance = 1e-4;
inline constexpr double kOverlapRealTolerance = 1e-6;
inline constexpr double kOverlapDecayFraction = 0.05;
inline constexpr double kZeroNorm = 1e-12;

/// Gaussian packet: |f(k)|^2 is a normal density of mean k0 and standard
/// deviation sigma_k; the position width at t = 0 is 1/(2 sigma_k).
struct PacketSpec {
  double k0 = 1.0;
  double sigma_k = 0.05;
  double x0 = -60.0;

  double position_width() const noexcept { return 0.5 / sigma_k; }

  cplx spectrum(double k) const {
    const double norm = std::pow(2.0 * std::numbers::pi * sigma_k * sigma_k, -0.25);
    const double d = k - k0;
    return norm * std::exp(-d * d / (4.0 * sigma_k * sigma_k)) * std::polar(1.0, -k * x0);
  }
};

/// Rejects packets with backward-moving content or overlapping the barrier
/// at t = 0.
inline void validate_packet(const PacketSpec& p, const PotentialSpec& spec) {
  if (!(p.sigma_k > 0.0) || !std::isfinite(p.k0) || !std::isfinite(p.x0))
    throw Error(ErrorKind::InvalidArgument, "validate_packet", "sigma_k must be positive");
  if (!(p.k0 - 5.0 * p.sigma_k > 0.0))
    throw Error(ErrorKind::SpectrumDomainError, "validate_packet",
                "k0 - 5 sigma_k = " + std::to_string(p.k0 - 5.0 * p.sigma_k) + " is not positive");
  if (!(p.x0 + 5.0 * p.position_width() < spec.left_edge()))
    throw Error(ErrorKind::InvalidArgument, "validate_packet",
                "packet starts inside the barrier: x0 + 5/(2 sigma_k) >= a");
}

struct SynthesisOptions {
  std::size_t n_k = 513;
  double span_sigmas = 8.0;  // k-grid covers k0 +- span_sigmas * sigma_k
};

struct SpectralGrid {
  std::vector<double> k;
  std::vector<double> weights;
};

inline SpectralGrid make_spectral_grid(const PacketSpec& p, const SynthesisOptions& opt) {
  const std::size_t n = opt.n_k;
  if (n < 65 || ((n - 1) & (n - 2)) != 0)
    throw Error(ErrorKind::InvalidArgument, "synthesize",
                "n_k must be a power of two plus one and at least 65");
  if (opt.span_sigmas < 5.0)
    throw Error(ErrorKind::InvalidArgument, "synthesize", "k-grid must span at least 5 sigma_k");
  const double lo = p.k0 - opt.span_sigmas * p.sigma_k;
  const double hi = p.k0 + opt.span_sigmas * p.sigma_k;
  if (!(lo > 0.0))
    throw Error(ErrorKind::SpectrumDomainError, "synthesize",
                "k-grid reaches k = " + std::to_string(lo) + " <= 0");
  SpectralGrid g;
  g.k = uniform_grid(lo, hi, n);
  g.weights = simpson_weights(n, (hi - lo) / static_cast<double>(n - 1));
  return g;
}

/// Default position grid: spacing min(2 pi/(8 k_max), L/64) and extent from
/// x0 - 10/(2 sigma_k) to its mirror image about x_c, anchored on x_c.
inline std::vector<double> default_position_grid(const PotentialSpec& spec, const PacketSpec& p,
                                                 const SynthesisOptions& opt = {}) {
  const double k_max = p.k0 + opt.span_sigmas * p.sigma_k;
  const double h_wave = 2.0 * std::numbers::pi / (8.0 * k_max);
  const double h_barrier = spec.length() / 64.0;
  double h = std::min(h_wave, h_barrier);
  // Power-of-two spacing keeps the grid nodes exact binary fractions.
  h = std::exp2(std::floor(std::log2(h)));
  const double xc = spec.midpoint();
  const double lo = p.x0 - 10.0 * p.position_width();
  return anchored_grid(lo, 2.0 * xc - lo, h, xc);
}

/// All components of the packet at one time. tr and ref are the piecewise
/// components psi_tr, psi_ref; tr_state and ref_state are Psi_tr, Psi_ref.
struct EvolvedField {
  std::vector<double> x;
  double t = 0.0;
  double x_c = 0.0;
  std::vector<cplx> full;
  std::vector<cplx> tr_state;
  std::vector<cplx> ref_state;
  std::vector<cplx> tr;
  std::vector<cplx> ref;

  std::span<const cplx> component(Component c) const {
    switch (c) {
      case Component::full: return full;
      case Component::tr_state: return tr_state;
      case Component::ref_state: return ref_state;
      case Component::tr: return tr;
      case Component::ref: return ref;
    }
    return full;
  }
};

/// Stationary components of every spectral node, sampled once on a fixed
/// x-grid, so that snapshots at many times cost one weighted sum each.
class Synthesizer {
 public:
  Synthesizer(const PotentialSpec& spec, const PacketSpec& packet, std::vector<double> x_grid,
              SynthesisOptions options = {}, Executor exec = {})
      : spec_(spec), packet_(packet), x_(std::move(x_grid)), exec_(exec) {
    if (!spec.symmetric())
      throw Error(ErrorKind::AsymmetricPotential, "synthesize",
                  "packet decomposition requires a symmetric barrier");
    if (!(packet.sigma_k > 0.0))
      throw Error(ErrorKind::InvalidArgument, "synthesize", "sigma_k must be positive");
    grid_ = make_spectral_grid(packet, options);
    const std::size_t nk = grid_.k.size();
    const std::size_t nx = x_.size();
    left_.resize(nk * nx);
    right_.resize(nk * nx);
    nodes_.resize(nk);
    exec_.for_each(nk, [&](std::size_t j) {
      auto states = std::make_shared<const ScatteringStates>(
          spec_, EnergyMode::from_wavenumber(grid_.k[j]));
      const SubprocessStates sub = select_odd_split(states);
      Node& node = nodes_[j];
      node.amplitudes = sub.amplitudes();
      node.split = sub.split();
      node.tr = sub.coefficients(Component::tr_state);
      node.ref = sub.coefficients(Component::ref_state);
      node.spectral_weight = grid_.weights[j] * packet_.spectrum(grid_.k[j]) /
                             std::sqrt(2.0 * std::numbers::pi);
      cplx* l = &left_[j * nx];
      cplx* r = &right_[j * nx];
      for (std::size_t i = 0; i < nx; ++i) {
        l[i] = states->left_incident(x_[i]).value;
        r[i] = states->right_incident(x_[i]).value;
      }
    });
  }

  const std::vector<double>& x() const noexcept { return x_; }
  const SpectralGrid& spectral_grid() const noexcept { return grid_; }
  const PotentialSpec& spec() const noexcept { return spec_; }
  const PacketSpec& packet() const noexcept { return packet_; }
  const Executor& executor() const noexcept { return exec_; }

  /// Spectral averages <g> = sum w_j |f(k_j)|^2 g_j over the k-grid.
  double transmission_weight() const {
    double s = 0.0;
    for (std::size_t j = 0; j < nodes_.size(); ++j)
      s += grid_.weights[j] * std::norm(packet_.spectrum(grid_.k[j])) * nodes_[j].amplitudes.T;
    return s;
  }

  EvolvedField snapshot(double t) const {
    const std::size_t nk = grid_.k.size();
    const std::size_t nx = x_.size();
    EvolvedField out;
    out.x = x_;
    out.t = t;
    out.x_c = spec_.midpoint();
    out.full.assign(nx, 0.0);
    out.tr_state.assign(nx, 0.0);
    out.ref_state.assign(nx, 0.0);

    struct Weights {
      cplx full, tr_l, tr_r, ref_l, ref_r;
    };
    std::vector<Weights> w(nk);
    for (std::size_t j = 0; j < nk; ++j) {
      const double k = grid_.k[j];
      const cplx c = nodes_[j].spectral_weight * std::polar(1.0, -0.5 * k * k * t);
      w[j] = {c, c * nodes_[j].tr.alpha, c * nodes_[j].tr.beta, c * nodes_[j].ref.alpha,
              c * nodes_[j].ref.beta};
    }
    exec_.for_blocks(nx, [&](std::size_t begin, std::size_t end) {
      for (std::size_t j = 0; j < nk; ++j) {
        const cplx* l = &left_[j * nx];
        const cplx* r = &right_[j * nx];
        const Weights& wj = w[j];
        for (std::size_t i = begin; i < end; ++i) {
          out.full[i] += wj.full * l[i];
          out.tr_state[i] += wj.tr_l * l[i] + wj.tr_r * r[i];
          out.ref_state[i] += wj.ref_l * l[i] + wj.ref_r * r[i];
        }
      }
    });
    out.tr.resize(nx);
    out.ref.resize(nx);
    for (std::size_t i = 0; i < nx; ++i) {
      const bool left_piece = x_[i] <= out.x_c;
      out.tr[i] = left_piece ? out.tr_state[i] : out.full[i];
      out.ref[i] = left_piece ? out.ref_state[i] : cplx(0.0);
    }
    return out;
  }

  struct Node {
    ScatteringAmplitudes amplitudes;
    SplitAmplitudes split;
    StateCoefficients tr;
    StateCoefficients ref;
    cplx spectral_weight;
  };
  const std::vector<Node>& nodes() const noexcept { return nodes_; }

 private:
  PotentialSpec spec_;
  PacketSpec packet_;
  std::vector<double> x_;
  Executor exec_;
  SpectralGrid grid_;
  std::vector<Node> nodes_;
  std::vector<cplx> left_;
  std::vector<cplx> right_;
};

/// One component of the packet at time t on x_grid.
inline ComponentField synthesize(const PotentialSpec& spec, const PacketSpec& packet,
                                 Component component, double t, std::span<const double> x_grid,
                                 std::size_t n_k = 513, Executor exec = {}) {
  SynthesisOptions opt;
  opt.n_k = n_k;
  const Synthesizer s(spec, packet, std::vector<double>(x_grid.begin(), x_grid.end()), opt, exec);
  const auto snap = s.snapshot(t);
  const auto values = snap.component(component);
  return {snap.x, std::vector<cplx>(values.begin(), values.end())};
}

struct Norms {
  double T = 0.0;      // <psi_tr|psi_tr>
  double R = 0.0;      // <psi_ref|psi_ref>
  double total = 0.0;  // <Psi_full|Psi_full>
};

namespace detail {

inline double density_integral(std::span<const double> x, std::span<const cplx> f,
                               std::size_t stride = 1) {
  double sum = 0.0;
  for (std::size_t i = stride; i < x.size(); i += stride)
    sum += 0.5 * (x[i] - x[i - stride]) * (std::norm(f[i]) + std::norm(f[i - stride]));
  return sum;
}

}  // namespace detail

inline Norms norms(const EvolvedField& field) {
  const std::span<const double> x = field.x;
  Norms n{detail::density_integral(x, field.tr), detail::density_integral(x, field.ref),
          detail::density_integral(x, field.full)};
  if ((x.size() - 1) % 2 == 0) {
    // Halving the sampling estimates the trapezoid error as |I_h - I_2h| / 3.
    const double coarse = detail::density_integral(x, field.full, 2);
    const double bound = std::abs(n.total - coarse) / 3.0;
    if (bound > kNormTolerance)
      throw Error(ErrorKind::GridTooCoarse, "norms",
                  "estimated quadrature error " + std::to_string(bound) + " exceeds " +
                      std::to_string(kNormTolerance));
  }
  return n;
}

/// <psi_tr|psi_ref> by trapezoidal quadrature.
inline cplx overlap(const EvolvedField& field) {
  const std::span<const double> x = field.x;
  cplx sum = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i)
    sum += 0.5 * (x[i] - x[i - 1]) *
           (std::conj(field.tr[i]) * field.ref[i] + std::conj(field.tr[i - 1]) * field.ref[i - 1]);
  return sum;
}

/// 2 Re(psi_tr^* psi_ref)(x); integrates to 2 Re<psi_tr|psi_ref>.
inline std::vector<double> interference_term(const EvolvedField& field) {
  std::vector<double> out(field.x.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = 2.0 * std::real(std::conj(field.tr[i]) * field.ref[i]);
  return out;
}

/// First derivative on a uniform grid: five-point central stencils where
/// they fit inside a piece, three-point one-sided stencils at piece ends.
/// With a kink index m the pieces are [0, m] and [m, n-1] and the value at m
/// takes the left-piece derivative.
inline std::vector<cplx> piecewise_derivative(std::span<const cplx> f, double h,
                                              std::optional<std::size_t> kink = std::nullopt) {
  const std::size_t n = f.size();
  std::vector<cplx> d(n, 0.0);
  auto fill = [&](std::size_t lo, std::size_t hi) {  // inclusive piece [lo, hi]
    if (hi - lo < 2) {
      if (hi > lo) d[lo] = d[hi] = (f[hi] - f[lo]) / h;
      return;
    }
    for (std::size_t i = lo; i <= hi; ++i) {
      if (i >= lo + 2 && i + 2 <= hi)
        d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
      else if (i >= lo + 1 && i + 1 <= hi)
        d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
      else if (i == lo)
        d[i] = (-3.0 * f[i] + 4.0 * f[i + 1] - f[i + 2]) / (2.0 * h);
      else
        d[i] = (3.0 * f[i] - 4.0 * f[i - 1] + f[i - 2]) / (2.0 * h);
    }
  };
  if (n < 2) return d;
  if (kink && *kink > 0 && *kink + 1 < n) {
    fill(*kink, n - 1);
    fill(0, *kink);
  } else {
    fill(0, n - 1);
  }
  return d;
}

struct Moments {
  double norm = 0.0;
  double xbar = 0.0;
  double pbar = 0.0;
  double var_x = 0.0;
};

/// Index of x_c on the grid, if x_c is a node.
inline std::optional<std::size_t> kink_index(std::span<const double> x, double xc) {
  auto it = std::lower_bound(x.begin(), x.end(), xc);
  if (it == x.end()) return std::nullopt;
  const auto i = static_cast<std::size_t>(it - x.begin());
  const double h = grid_spacing(x);
  if (std::abs(x[i] - xc) <= 1e-9 * h) return i;
  return std::nullopt;
}

/// Position mean, momentum mean and position variance relative to the
/// component's own norm. Pass kink = x_c for the piecewise components.
inline Moments moments(std::span<const double> x, std::span<const cplx> psi,
                       std::optional<double> kink = std::nullopt) {
  Moments m;
  const std::size_t n = x.size();
  std::vector<double> rho(n), xrho(n), x2rho(n);
  for (std::size_t i = 0; i < n; ++i) {
    rho[i] = std::norm(psi[i]);
    xrho[i] = x[i] * rho[i];
  }
  m.norm = trapezoid<double>(x, rho);
  if (!(m.norm >= kZeroNorm))
    throw Error(ErrorKind::ZeroNorm, "moments", "component norm " + std::to_string(m.norm) +
                                                    " is below " + std::to_string(kZeroNorm));
  m.xbar = trapezoid<double>(x, xrho) / m.norm;
  for (std::size_t i = 0; i < n; ++i) x2rho[i] = (x[i] - m.xbar) * (x[i] - m.xbar) * rho[i];
  m.var_x = trapezoid<double>(x, x2rho) / m.norm;
  std::optional<std::size_t> k_index;
  if (kink) k_index = kink_index(x, *kink);
  const auto d = piecewise_derivative(psi, grid_spacing(x), k_index);
  std::vector<double> current(n);
  for (std::size_t i = 0; i < n; ++i) current[i] = std::imag(std::conj(psi[i]) * d[i]);
  m.pbar = trapezoid<double>(x, current) / m.norm;
  return m;
}

inline Moments moments(const EvolvedField& field, Component c) {
  const bool piecewise = c == Component::tr || c == Component::ref;
  return moments(field.x, field.component(c),
                 piecewise ? std::optional<double>(field.x_c) : std::nullopt);
}

/// Positions where the potential height changes.
inline std::vector<double> potential_jumps(const PotentialSpec& spec) {
  std::vector<double> jumps;
  const auto bounds = spec.boundaries();
  const auto segs = spec.segments();
  for (std::size_t j = 0; j < bounds.size(); ++j) {
    const double lo = j == 0 ? 0.0 : segs[j - 1].height;
    const double hi = j == segs.size() ? 0.0 : segs[j].height;
    if (lo != hi) jumps.push_back(bounds[j]);
  }
  return jumps;
}

struct ContinuityOptions {
  double h = 1.0 / 32.0;  // x spacing of the residual stencils
  SynthesisOptions synthesis{};
  Executor exec{};
};

/// max over the window of |d rho/dt + dj/dx|, both by central differences
/// (time step dt, space step h) on freshly synthesized samples. For the
/// piecewise components the window has to stay 2h clear of x_c. Nodes within
/// 2h of a jump in V are left out.
inline double continuity_residual(const PotentialSpec& spec, const PacketSpec& packet,
                                  Component component, double t, double dt, double window_lo,
                                  double window_hi, const ContinuityOptions& opt = {}) {
  const double h = opt.h;
  if (!(h > 0.0) || !(dt > 0.0) || !(window_hi > window_lo))
    throw Error(ErrorKind::InvalidArgument, "continuity_residual",
                "need h > 0, dt > 0 and a nonempty window");
  const double xc = spec.midpoint();
  if ((component == Component::tr || component == Component::ref) &&
      !(window_hi <= xc - 2.0 * h || window_lo >= xc + 2.0 * h))
    throw Error(ErrorKind::InvalidArgument, "continuity_residual",
                "window must exclude a neighbourhood of x_c of half-width 2h");
  const auto count = static_cast<std::size_t>(std::llround((window_hi - window_lo) / h));
  std::vector<double> x(count + 5);
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = window_lo + (static_cast<double>(i) - 2.0) * h;
  const Synthesizer s(spec, packet, x, opt.synthesis, opt.exec);
  const auto snap_before = s.snapshot(t - dt);
  const auto snap_now = s.snapshot(t);
  const auto snap_after = s.snapshot(t + dt);
  const auto before = snap_before.component(component);
  const auto after = snap_after.component(component);
  const auto psi = snap_now.component(component);

  std::vector<double> current(x.size(), 0.0);
  for (std::size_t i = 1; i + 1 < x.size(); ++i)
    current[i] = std::imag(std::conj(psi[i]) * (psi[i + 1] - psi[i - 1])) / (2.0 * h);
  // psi'' jumps wherever V does, which costs the difference stencils an
  // order; nodes whose stencil straddles a height jump are skipped.
  const auto jumps = potential_jumps(spec);
  double worst = 0.0;
  for (std::size_t i = 2; i + 2 < x.size(); ++i) {
    if (std::any_of(jumps.begin(), jumps.end(),
                    [&](double b) { return std::abs(x[i] - b) < 2.0 * h; }))
      continue;
    const double drho = (std::norm(after[i]) - std::norm(before[i])) / (2.0 * dt);
    const double dj = (current[i + 1] - current[i - 1]) / (2.0 * h);
    worst = std::max(worst, std::abs(drho + dj));
  }
  return worst;
}

}  // namespace qsplit
