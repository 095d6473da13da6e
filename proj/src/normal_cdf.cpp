#include "kinsdf/normal_cdf.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

namespace kinsdf {

namespace {

// erfc(a) = t * exp(-a^2 + h(t)) with t = 2 / (2 + a), a >= 0. h is smooth on
// t in (0, 1] and is expanded in Chebyshev polynomials over [kT0, 1], which
// covers a <= kMaxA. The coefficients are fitted once from std::erfc.
constexpr double kMaxA = 26.0;
constexpr double kT0 = 2.0 / (2.0 + kMaxA);
constexpr int kNodes = 80;
constexpr double kInvSqrt2 = 0.70710678118654752440;

constexpr std::size_t kTerms = 30;  // later coefficients are below rounding

struct Expansion {
  std::vector<double> c;
};

// exp(a^2) erfc(a) without cancellation: direct for small a, otherwise the
// continued fraction a + (1/2)/(a + 1/(a + (3/2)/(a + ...))), evaluated
// backwards from a fixed depth.
double scaled_erfc(double a) {
  if (a < 2.0) return std::erfc(a) * std::exp(a * a);
  double f = a;
  for (int k = 2000; k >= 1; --k) f = a + 0.5 * k / f;
  return 1.0 / (std::sqrt(std::numbers::pi) * f);
}

Expansion fit() {
  std::array<double, kNodes> h{};
  for (int j = 0; j < kNodes; ++j) {
    const double u = std::cos(std::numbers::pi * (j + 0.5) / kNodes);
    const double t = kT0 + (1.0 - kT0) * 0.5 * (u + 1.0);
    const double a = 2.0 / t - 2.0;
    h[static_cast<std::size_t>(j)] = std::log(scaled_erfc(a) / t);
  }
  Expansion e;
  for (int k = 0; k < static_cast<int>(kTerms); ++k) {
    double s = 0.0;
    for (int j = 0; j < kNodes; ++j) s += h[static_cast<std::size_t>(j)] * std::cos(std::numbers::pi * k * (j + 0.5) / kNodes);
    e.c.push_back(2.0 * s / kNodes);
  }
  e.c[0] *= 0.5;
  return e;
}

const Expansion& expansion() {
  static const Expansion e = fit();
  return e;
}

constexpr int kBlock = 64;
using Block = Eigen::Array<double, kBlock, 1>;

// Phi and (optionally) phi for one block of inputs.
void block(const Block& xv, const std::vector<double>& c, Block& cdf, Block* density) {
  const Block a = (xv.abs() * kInvSqrt2).min(kMaxA);
  const Block t = 2.0 / (2.0 + a);
  const Block u2 = 2.0 * ((t - kT0) * (2.0 / (1.0 - kT0)) - 1.0);
  Block b1 = Block::Zero(), b2 = Block::Zero();
  for (std::size_t k = c.size() - 1; k >= 1; --k) {
    const Block b0 = u2 * b1 - b2 + c[k];
    b2 = b1;
    b1 = b0;
  }
  const Block h = 0.5 * u2 * b1 - b2 + c[0];
  // Past kMaxA the clamped exponent leaves a tail below 1e-290, and the
  // 700 clamp keeps every exp argument out of the subnormal range.
  const Block half_sq = (0.5 * xv.square()).min(700.0);
  const Block tail = t * (h - half_sq).exp();  // erfc(|x| / sqrt 2)
  // Eigen's select and comparisons run per coefficient; plain loops vectorize.
  for (int i = 0; i < kBlock; ++i) cdf[i] = xv[i] <= 0.0 ? 0.5 * tail[i] : 1.0 - 0.5 * tail[i];
  if (density) *density = (-half_sq).exp() * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

// Calls emit(offset, x, cdf, density, len) per block; the trailing partial
// block is zero padded.
template <class Emit>
void for_blocks(const double* x, std::size_t n, bool with_density, Emit emit) {
  const std::vector<double>& c = expansion().c;
  Block cdf;
  Block density;
  std::size_t i = 0;
  for (; i + kBlock <= n; i += kBlock) {
    const Block xv = Eigen::Map<const Block>(x + i);
    block(xv, c, cdf, with_density ? &density : nullptr);
    emit(i, xv, cdf, density, kBlock);
  }
  if (i < n) {
    const int len = static_cast<int>(n - i);
    Block rest = Block::Zero();
    for (int j = 0; j < len; ++j) rest[j] = x[i + j];
    block(rest, c, cdf, with_density ? &density : nullptr);
    emit(i, rest, cdf, density, len);
  }
}

}  // namespace

void normal_cdf(const double* x, double* cdf, double* density, std::size_t n) {
  for_blocks(x, n, density != nullptr, [&](std::size_t i, const Block&, const Block& p, const Block& d, int len) {
    for (int j = 0; j < len; ++j) cdf[i + j] = p[j];
    if (density) {
      for (int j = 0; j < len; ++j) density[i + j] = d[j];
    }
  });
}

void gelu(double* z, double* slope, std::size_t n) {
  for_blocks(z, n, slope != nullptr, [&](std::size_t i, const Block& x, const Block& p, const Block& d, int len) {
    for (int j = 0; j < len; ++j) z[i + j] = x[j] * p[j];
    if (slope) {
      for (int j = 0; j < len; ++j) slope[i + j] = p[j] + x[j] * d[j];
    }
  });
}

}  // namespace kinsdf
