#pragma once

#include "qecho/fermion_dynamics.hpp"

#include <algorithm>
#include <utility>

namespace qecho {

// ---------------------------------------------------------------- concurrence

inline double concurrence_from_echo(double echo) {
  if (echo < -1e-12 || echo > 1 + 1e-12) throw ValidationError("echo outside [0, 1]");
  return std::sqrt(std::clamp(echo, 0.0, 1.0));
}

// Concurrence of the dephased Bell state evaluated the long way round: build the
// reduced density matrix, conjugate with sigma_y (x) sigma_y, and run the
// R-matrix recipe. Serves as an independent cross-check of the closed form
// C = |D|, which the direct route must reproduce to 1e-12.
inline double wootters_concurrence(double decoherence_modulus) {
  if (decoherence_modulus < 0 || decoherence_modulus > 1)
    throw ValidationError("decoherence modulus outside [0, 1]");
  const double d = decoherence_modulus;
  MatrixXd rho = MatrixXd::Zero(4, 4);
  rho(0, 0) = rho(3, 3) = 0.5;
  rho(0, 3) = rho(3, 0) = 0.5 * d;

  MatrixXd yy = MatrixXd::Zero(4, 4);
  yy(0, 3) = yy(3, 0) = -1;
  yy(1, 2) = yy(2, 1) = 1;
  const MatrixXd rho_tilde = yy * rho * yy;  // rho is real, so rho* = rho
  const MatrixXd r = rho * rho_tilde;

  Eigen::EigenSolver<MatrixXd> es(r);
  if (es.info() != Eigen::Success) throw NumericError("R-matrix eigensolver failed");
  std::vector<double> roots(4);
  for (int k = 0; k < 4; ++k) roots[k] = std::sqrt(std::max(0.0, es.eigenvalues()[k].real()));
  std::sort(roots.begin(), roots.end(), std::greater<>());
  return std::max(0.0, roots[0] - roots[1] - roots[2] - roots[3]);
}

// ------------------------------------------------------------ spin correlators

// sigma^z_j = 2 c_j^dag c_j - 1, read off the <c^dag c> block.
template <typename Derived>
double sigma_z_expectation(const Eigen::MatrixBase<Derived>& c, int site) {
  const int n = static_cast<int>(c.rows()) / 2;
  if (site < 0 || site >= n) throw ValidationError("site index out of range");
  return 2.0 * std::real(cplx(c(site, site))) - 1.0;
}

// Connected <sz_i sz_j> by Wick's theorem; sigma^z is a fermion bilinear so no
// Jordan-Wigner string enters.
template <typename Derived>
double sigma_zz_connected(const Eigen::MatrixBase<Derived>& c, int i, int j) {
  const int n = static_cast<int>(c.rows()) / 2;
  if (i < 0 || i >= n || j < 0 || j >= n) throw ValidationError("site index out of range");
  if (i == j) throw ValidationError("connected correlator requires distinct sites");
  const cplx hop = cplx(c(i, j)) * cplx(c(n + i, n + j));      // <c_i^dag c_j><c_i c_j^dag>
  const cplx pair = cplx(c(i, n + j)) * cplx(c(n + i, j));     // <c_i^dag c_j^dag><c_i c_j>
  return 4.0 * std::real(hop - pair);
}

// --------------------------------------------------------------- Gaussian rate

enum class RateMethod { mode_sum, correlator, short_time_fit };

struct GaussianRate {
  double alpha = 0;
  RateMethod method = RateMethod::mode_sum;
  double residual = 0;  // RMS fit residual; zero for the algebraic routes
};

// Variance of the interaction Hamiltonian as an explicit double sum over the
// normal modes of the initial chain:
//   alpha = 4 eps^2 sum_{k != l} [ (u_0k v_0l + u_dk v_dl)^2
//                                  - 2 v_dk v_0l u_dl u_0k
//                                  - v_0k v_0l u_0k u_0l
//                                  - v_dk v_dl u_dk u_dl ].
inline GaussianRate gaussian_rate_mode_sum(const BdGDecomposition& initial, double epsilon, int d) {
  const int n = initial.n_sites;
  if (d < 0 || d >= n) throw ValidationError("separation out of range");
  const VectorXd u0 = initial.u.row(0), v0 = initial.v.row(0);
  const VectorXd ud = initial.u.row(d), vd = initial.v.row(d);
  double sum = 0;
  for (int k = 0; k < n; ++k) {
    for (int l = 0; l < n; ++l) {
      if (k == l) continue;
      const double cross = u0[k] * v0[l] + ud[k] * vd[l];
      sum += cross * cross - 2.0 * vd[k] * v0[l] * ud[l] * u0[k] - v0[k] * v0[l] * u0[k] * u0[l] -
             vd[k] * vd[l] * ud[k] * ud[l];
    }
  }
  return {4.0 * epsilon * epsilon * sum, RateMethod::mode_sum, 0.0};
}

// Same quantity through the ground-state correlators:
//   alpha = 2 eps^2 ( <sz_0 sz_d>_c + 1 - <sz_0><sz_d> ).
// At d = 0 the self term <sz sz>_c = 1 - <sz>^2 reproduces the single defect of
// doubled strength.
inline GaussianRate gaussian_rate_correlator(const MatrixXd& c0, double epsilon, int d) {
  const int n = static_cast<int>(c0.rows()) / 2;
  if (d < 0 || d >= n) throw ValidationError("separation out of range");
  const double m0 = sigma_z_expectation(c0, 0);
  const double md = sigma_z_expectation(c0, d);
  const double czz = d == 0 ? 1.0 - m0 * m0 : sigma_zz_connected(c0, 0, d);
  return {2.0 * epsilon * epsilon * (czz + 1.0 - m0 * md), RateMethod::correlator, 0.0};
}

// Least-squares fit of L(t) = 1 - alpha t^2 on the window t <= 0.1 t_typ.
inline GaussianRate fit_short_time_rate(const EchoSeries& series, double t_typ) {
  if (!(t_typ > 0)) throw ValidationError("typical time must be positive");
  const double window = 0.1 * t_typ;
  double st4 = 0, st2d = 0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < series.times.size(); ++i) {
    const double t = series.times[i];
    if (t > window * (1 + 1e-12)) continue;
    const double t2 = t * t;
    st4 += t2 * t2;
    st2d += t2 * (1.0 - series.echo[i]);
    ++used;
  }
  if (used < 10 || st4 == 0)
    throw ValidationError("insufficient resolution: need at least 10 samples below 0.1 t_typ");
  const double alpha = st2d / st4;
  double ss = 0;
  for (std::size_t i = 0; i < series.times.size(); ++i) {
    const double t = series.times[i];
    if (t > window * (1 + 1e-12)) continue;
    const double r = series.echo[i] - (1.0 - alpha * t * t);
    ss += r * r;
  }
  return {alpha, RateMethod::short_time_fit, std::sqrt(ss / static_cast<double>(used))};
}

// -------------------------------------------------------- characteristic times

// Crossover convention: t_typ = min(1, 1/eps), matching both asymptotic regimes.
inline double typical_time(double epsilon) {
  if (epsilon < 0) throw ValidationError("epsilon must be non-negative");
  return epsilon <= 1.0 ? 1.0 : 1.0 / epsilon;
}

// Maximal quasiparticle velocity after the quench: 2 J lambda_f below the
// critical field, 2 J above.
inline double group_velocity(double lambda_f, double j = 1.0) {
  if (lambda_f < 0) throw ValidationError("field must be non-negative");
  return 2.0 * j * std::min(lambda_f, 1.0);
}

struct CharacteristicTimes {
  double t_typ = 0;
  double v_g = 0;
  double t_star = 0;              // quench revival, N / (2 v_g)
  double tau_star = 0;            // opposite-site interference, t_star / 2
  double t_ind = 0;               // independence time, d / (2 v_g)
  double t_star_equilibrium = 0;  // unquenched revival, 2 t_star
};

inline CharacteristicTimes characteristic_times(const QuenchProtocol& p) {
  p.validate();
  CharacteristicTimes out;
  out.t_typ = typical_time(p.epsilon);
  out.v_g = group_velocity(p.lambda_final, p.coupling_j);
  const double inf = std::numeric_limits<double>::infinity();
  out.t_star = out.v_g > 0 ? p.n_sites / (2.0 * out.v_g) : inf;
  out.tau_star = out.t_star / 2.0;
  out.t_star_equilibrium = 2.0 * out.t_star;
  out.t_ind = out.v_g > 0 ? p.separation / (2.0 * out.v_g) : inf;
  return out;
}

// ------------------------------------------------------- independent-bath gap

// Delta L(t) = L(t) - L_single(t)^2: independent baths factorize, so the
// single-defect echo squared is the uncorrelated reference.
inline std::vector<double> delta_echo(const EchoSeries& common, const EchoSeries& single_defect) {
  if (common.times.size() != single_defect.times.size())
    throw ValidationError("time grid mismatch between common and single-defect series");
  for (std::size_t i = 0; i < common.times.size(); ++i)
    if (common.times[i] != single_defect.times[i])
      throw ValidationError("time grid mismatch between common and single-defect series");
  std::vector<double> delta(common.times.size());
  for (std::size_t i = 0; i < delta.size(); ++i)
    delta[i] = common.echo[i] - single_defect.echo[i] * single_defect.echo[i];
  return delta;
}

// ---------------------------------------------------- derivatives and scaling

// Second-order central differences on a uniform grid, one-sided at the ends.
inline std::vector<double> field_derivative(const std::vector<double>& x, const std::vector<double>& f) {
  const std::size_t n = x.size();
  if (n < 3 || f.size() != n) throw ValidationError("derivative needs at least 3 points on matching grids");
  const double h = x[1] - x[0];
  if (!(h > 0)) throw ValidationError("grid must be strictly increasing");
  for (std::size_t i = 0; i + 1 < n; ++i)
    if (std::abs(x[i + 1] - x[i] - h) > 1e-9 * std::max(1.0, std::abs(h)))
      throw ValidationError("non-uniform grid rejected");
  std::vector<double> df(n);
  df[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h);
  for (std::size_t i = 1; i + 1 < n; ++i) df[i] = (f[i + 1] - f[i - 1]) / (2 * h);
  df[n - 1] = (3 * f[n - 1] - 4 * f[n - 2] + f[n - 3]) / (2 * h);
  return df;
}

struct PeakLocation {
  double position = 0;
  double height = 0;
};

// Quadratic interpolation around the grid maximum; a maximum on the boundary
// means the window missed the peak and is rejected.
inline PeakLocation locate_peak(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() < 3 || x.size() != y.size()) throw ValidationError("peak location needs at least 3 points");
  std::size_t imax = 0;
  for (std::size_t i = 1; i < y.size(); ++i)
    if (y[i] > y[imax]) imax = i;
  if (imax == 0 || imax + 1 == y.size()) throw ValidationError("peak at grid boundary");
  const double h = x[imax + 1] - x[imax];
  const double ym = y[imax - 1], y0 = y[imax], yp = y[imax + 1];
  const double curvature = ym - 2 * y0 + yp;
  if (curvature >= 0) return {x[imax], y0};
  const double shift = 0.5 * (ym - yp) / curvature;
  return {x[imax] + shift * h, y0 - 0.25 * (ym - yp) * shift};
}

struct ScalingFit {
  double exponent = 0;
  double prefactor = 0;
  double residual = 0;  // RMS residual of the fitted relation
};

namespace detail {

struct LineFit {
  double slope = 0, intercept = 0, rms = 0;
  std::vector<double> residuals;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  LineFit fit;
  const double denom = n * sxx - sx * sx;
  if (denom == 0) throw ValidationError("degenerate abscissae in line fit");
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  double ss = 0;
  fit.residuals.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    fit.residuals[i] = y[i] - (fit.intercept + fit.slope * x[i]);
    ss += fit.residuals[i] * fit.residuals[i];
  }
  fit.rms = std::sqrt(ss / n);
  return fit;
}

// Drop the smallest-size point when its residual exceeds 3x the mean magnitude
// (strong corrections to scaling at small N).
inline LineFit fit_line_robust(std::vector<double> x, std::vector<double> y) {
  LineFit fit = fit_line(x, y);
  if (x.size() > 3) {
    double mean_abs = 0;
    for (double r : fit.residuals) mean_abs += std::abs(r);
    mean_abs /= static_cast<double>(fit.residuals.size());
    if (mean_abs > 0 && std::abs(fit.residuals.front()) > 3.0 * mean_abs) {
      x.erase(x.begin());
      y.erase(y.begin());
      fit = fit_line(x, y);
    }
  }
  return fit;
}

}  // namespace detail

// Finite-size scaling of the derivative peak: |lambda_c - lambda_max| ~ N^gamma
// on log-log, and peak height ~ a + b ln N. Sizes must come sorted ascending
// with one located peak each.
inline std::pair<ScalingFit, ScalingFit> fit_peak_scaling(const std::vector<int>& sizes,
                                                          const std::vector<PeakLocation>& peaks,
                                                          double lambda_c = 1.0) {
  if (sizes.size() < 4 || sizes.size() != peaks.size())
    throw ValidationError("scaling fit needs at least 4 sizes with matching peaks");
  std::vector<double> log_n(sizes.size()), log_dist(sizes.size()), height(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i > 0 && sizes[i] <= sizes[i - 1]) throw ValidationError("sizes must be strictly ascending");
    const double dist = std::abs(lambda_c - peaks[i].position);
    if (dist <= 0) throw ValidationError("peak coincides with the critical field; cannot fit power law");
    log_n[i] = std::log(static_cast<double>(sizes[i]));
    log_dist[i] = std::log(dist);
    height[i] = peaks[i].height;
  }
  const auto power = detail::fit_line_robust(log_n, log_dist);
  const auto logdiv = detail::fit_line_robust(log_n, height);
  ScalingFit distance_fit{power.slope, std::exp(power.intercept), power.rms};
  ScalingFit height_fit{logdiv.slope, logdiv.intercept, logdiv.rms};
  return {distance_fit, height_fit};
}

// Peak per size, then both scaling fits in one step. grids[i]/derivatives[i]
// belong to sizes[i].
inline std::pair<ScalingFit, ScalingFit> locate_peak_and_fit_scaling(
    const std::vector<int>& sizes, const std::vector<std::vector<double>>& grids,
    const std::vector<std::vector<double>>& derivatives, double lambda_c = 1.0) {
  if (grids.size() != sizes.size() || derivatives.size() != sizes.size())
    throw ValidationError("one derivative sweep per size required");
  std::vector<PeakLocation> peaks;
  peaks.reserve(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) peaks.push_back(locate_peak(grids[i], derivatives[i]));
  return fit_peak_scaling(sizes, peaks, lambda_c);
}

inline double correlation_length(double lambda_initial) {
  if (!(lambda_initial > 0)) throw ValidationError("correlation length requires lambda_i > 0");
  if (lambda_initial == 1.0) return std::numeric_limits<double>::infinity();
  return 1.0 / std::abs(std::log(lambda_initial));
}

// ------------------------------------------------------------ event detectors

// Central-difference time derivative smoothed with a 5-point moving average
// (window shrinks at the edges).
inline std::vector<double> smoothed_time_derivative(const EchoSeries& series) {
  const auto raw = field_derivative(series.times, series.echo);
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(raw.size());
  std::vector<double> smooth(raw.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - 2);
    const std::ptrdiff_t hi = std::min(n - 1, i + 2);
    double acc = 0;
    for (std::ptrdiff_t k = lo; k <= hi; ++k) acc += raw[k];
    smooth[i] = acc / static_cast<double>(hi - lo + 1);
  }
  return smooth;
}

// Revival onset: the first time beyond t_min at which the smoothed derivative
// reaches 75% of its maximum positive value over the observed window, linearly
// interpolated, with at least one decaying sample before it. A bare
// negative-to-positive sign change is not enough: counter-propagating fronts
// meeting at the opposite side of the ring produce a shallow real minimum well
// before the revival proper, so the onset is anchored to the strong rise
// instead. Returns NaN when the series never turns upward.
inline double detect_revival_onset(const EchoSeries& series, double t_min = 5.0) {
  const auto sd = smoothed_time_derivative(series);
  double rise_max = 0;
  bool decayed = false;
  for (std::size_t i = 0; i < sd.size(); ++i) {
    if (series.times[i] <= t_min) continue;
    rise_max = std::max(rise_max, sd[i]);
  }
  if (rise_max <= 0) return std::numeric_limits<double>::quiet_NaN();
  const double threshold = 0.75 * rise_max;
  for (std::size_t i = 1; i < sd.size(); ++i) {
    if (sd[i] < 0) decayed = true;
    if (series.times[i] <= t_min) continue;
    if (!decayed || sd[i] < threshold) continue;
    const double prev = sd[i - 1];
    const double frac = sd[i] != prev ? std::clamp((threshold - prev) / (sd[i] - prev), 0.0, 1.0) : 0.0;
    return series.times[i - 1] + frac * (series.times[i] - series.times[i - 1]);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

// Derivative-magnitude step: baseline is the median |dL/dt| on
// [baseline_begin, baseline_end]; the event is the first time in
// (baseline_end, search_end] where the magnitude exceeds factor * baseline for
// three consecutive samples. Returns NaN when absent.
inline double detect_derivative_step(const EchoSeries& series, double baseline_begin,
                                     double baseline_end, double search_end, double factor = 2.0) {
  const auto sd = smoothed_time_derivative(series);
  std::vector<double> base;
  for (std::size_t i = 0; i < sd.size(); ++i)
    if (series.times[i] >= baseline_begin && series.times[i] <= baseline_end)
      base.push_back(std::abs(sd[i]));
  if (base.size() < 3) throw ValidationError("baseline window too short for step detection");
  std::sort(base.begin(), base.end());
  const double baseline = base[base.size() / 2];
  const double threshold = factor * baseline;
  for (std::size_t i = 0; i + 2 < sd.size(); ++i) {
    const double t = series.times[i];
    if (t <= baseline_end || t > search_end) continue;
    if (std::abs(sd[i]) >= threshold && std::abs(sd[i + 1]) >= threshold && std::abs(sd[i + 2]) >= threshold)
      return t;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace qecho
