#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"

namespace sincfb {

inline constexpr double kSiSnrEps = 1e-8;

namespace detail {

inline std::vector<double> centered(std::span<const double> v) {
  double mean = 0.0;
  for (double s : v) mean += s;
  mean /= static_cast<double>(v.size());
  std::vector<double> out(v.begin(), v.end());
  for (double& s : out) s -= mean;
  return out;
}

inline void check_pair(std::span<const double> est, std::span<const double> ref) {
  if (est.size() != ref.size()) throw InvalidParameter("si_snr: length mismatch");
  if (est.size() < 2) throw InvalidParameter("si_snr: need at least 2 samples");
}

}  // namespace detail

/// Scale-invariant SNR in dB. Both signals are mean-centred; eps enters numerator and
/// denominator so a perfect estimate saturates instead of diverging.
inline double si_snr(std::span<const double> est, std::span<const double> ref, double eps = kSiSnrEps) {
  detail::check_pair(est, ref);
  const auto e = detail::centered(est);
  const auto r = detail::centered(ref);
  const double rr = detail::dot(r, r);
  const double er = detail::dot(e, r);
  const double a = er / (rr + eps);
  double target = 0.0, noise = 0.0;
  for (std::size_t k = 0; k < e.size(); ++k) {
    const double s = a * r[k];
    target += s * s;
    noise += (e[k] - s) * (e[k] - s);
  }
  return 10.0 * std::log10((target + eps) / (noise + eps));
}

struct SiSnrGradient {
  double value = 0.0;
  std::vector<double> d_est;  // d(si_snr)/d(est)
};

inline SiSnrGradient si_snr_with_gradient(std::span<const double> est, std::span<const double> ref,
                                          double eps = kSiSnrEps) {
  detail::check_pair(est, ref);
  const auto e = detail::centered(est);
  const auto r = detail::centered(ref);
  const std::size_t n = e.size();
  const double rr = detail::dot(r, r);
  const double er = detail::dot(e, r);
  const double a = er / (rr + eps);
  double target = 0.0, noise = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double s = a * r[k];
    target += s * s;
    noise += (e[k] - s) * (e[k] - s);
  }
  const double num = target + eps;
  const double den = noise + eps;

  // target = a^2 rr, noise = |e - a r|^2, da/de = r / (rr + eps).
  //   d target/de = 2 a rr r / (rr + eps)
  //   d noise/de  = 2 (e - a r) - 2 <e - a r, r> r / (rr + eps)
  const double c = 10.0 / std::numbers::ln10;
  const double resid_r = er - a * rr;
  const double coef_r = c * (2.0 * a * rr / (rr + eps) / num + 2.0 * a / den + 2.0 * resid_r / (rr + eps) / den);
  SiSnrGradient g;
  g.value = 10.0 * std::log10(num / den);
  g.d_est.resize(n);
  double mean = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    g.d_est[k] = coef_r * r[k] - c * 2.0 * e[k] / den;
    mean += g.d_est[k];
  }
  mean /= static_cast<double>(n);
  for (double& v : g.d_est) v -= mean;
  return g;
}

}  // namespace sincfb
