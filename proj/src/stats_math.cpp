#include "hdmt/stats_math.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hdmt {

namespace {
constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kInvSqrt2Pi = 0.3989422804014327;
}  // namespace

double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_sf(double x) { return 0.5 * std::erfc(x / kSqrt2); }

double normal_upper_quantile(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("normal_upper_quantile: alpha must be in (0,1)");
  }
  // Acklam's rational approximation for the lower quantile, then one
  // Halley step against erfc to get close to machine precision.
  const double p = 1.0 - alpha;
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    double q = p - 0.5;
    double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  for (int it = 0; it < 2; ++it) {
    double e = normal_cdf(x) - p;
    double u = e / normal_pdf(x);
    x = x - u / (1.0 + 0.5 * x * u);
  }
  return x;
}

NullMoments null_moments(double s, int p) {
  if (!(s > 0.0 && s <= 1.0)) {
    throw std::invalid_argument("null_moments: s must be in (0,1], got " + std::to_string(s));
  }
  if (p < 2) {
    throw std::invalid_argument("null_moments: p must be >= 2");
  }
  const double lam = 2.0 * s * std::log(static_cast<double>(p));
  const double tail = std::pow(static_cast<double>(p), 1.0 - s);
  const double c = 2.0 * kInvSqrt2Pi;
  const double mu0 = c * std::sqrt(lam) * tail;
  const double var0 = c * (std::pow(lam, 1.5) + std::sqrt(lam)) * tail;
  return NullMoments{mu0, std::sqrt(var0), s, p};
}

NullMoments null_moments_full(double s, int p) {
  NullMoments nm = null_moments(s, p);
  const double lam = 2.0 * s * std::log(static_cast<double>(p));
  const double var0 = nm.sigma0 * nm.sigma0 + 4.0 * p * normal_sf(std::sqrt(lam));
  nm.sigma0 = std::sqrt(var0);
  return nm;
}

double gumbel_a(double y) { return std::sqrt(2.0 * std::log(y)); }

double gumbel_b(double y, double eta) {
  const double one_minus = 1.0 - eta;
  return 2.0 * std::log(y) + 0.5 * std::log(std::log(y)) -
         0.5 * std::log(4.0 * M_PI / (one_minus * one_minus));
}

namespace {
void check_gumbel_args(double alpha, int p) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("critical value: alpha must be in (0,1)");
  }
  if (p <= 2) {
    throw std::invalid_argument(
        "critical value: p <= 2 leaves log log p undefined; use bootstrap calibration");
  }
}
}  // namespace

double gumbel_critical(double alpha, int p, double eta) {
  check_gumbel_args(alpha, p);
  const double lp = std::log(static_cast<double>(p));
  const double q_alpha = -std::log(-std::log(1.0 - alpha));
  return (q_alpha + gumbel_b(lp, eta)) / gumbel_a(lp);
}

double gumbel_upper_tail(double m, int p, double eta) {
  if (p <= 2) return 1.0;
  const double lp = std::log(static_cast<double>(p));
  const double x = gumbel_a(lp) * m - gumbel_b(lp, eta);
  // 1 - exp(-e^{-x}), computed stably for large x.
  const double t = std::exp(-x);
  return -std::expm1(-t);
}

double clx_center(int p) {
  const double lp = std::log(static_cast<double>(p));
  return 2.0 * lp - std::log(lp);
}

double clx_critical(double alpha, int p) {
  check_gumbel_args(alpha, p);
  return -2.0 * std::log(std::sqrt(M_PI) * (-std::log(1.0 - alpha)));
}

double clx_upper_tail(double g, int p) {
  if (p <= 2) return 1.0;
  const double t = std::exp(-g / 2.0) / std::sqrt(M_PI);
  return -std::expm1(-t);
}

namespace {
double rho_plain(double beta) {
  if (beta <= 0.75) return beta - 0.5;
  const double u = 1.0 - std::sqrt(1.0 - beta);
  return u * u;
}

double rho_transformed(double beta, double theta) {
  const double knee = (3.0 - theta) / 4.0;
  if (beta <= knee) {
    const double u = std::sqrt(1.0 - theta) - std::sqrt(1.0 - beta - theta / 2.0);
    return u * u;
  }
  return rho_plain(beta);
}
}  // namespace

BoundaryValue detection_boundary(const DetectionPoint& pt) {
  if (!(pt.beta > 0.5 && pt.beta < 1.0)) {
    throw std::invalid_argument("detection_boundary: beta must be in (1/2, 1)");
  }
  BoundaryValue out;
  out.rho = rho_plain(pt.beta);
  if (pt.theta) {
    const double theta = *pt.theta;
    if (!(theta > 0.0 && theta < 1.0)) {
      throw std::invalid_argument("detection_boundary: theta must be in (0,1)");
    }
    out.rho_theta = rho_transformed(pt.beta, theta);
  }
  return out;
}

}  // namespace hdmt
