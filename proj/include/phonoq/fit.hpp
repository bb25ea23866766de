#pragma once

// Bounded Levenberg-Marquardt least squares with finite-difference Jacobians.
//
// Parameters live in an internal coordinate system where every component is
// O(1): log-scaled parameters are fit as ln(p), linear ones as p / typical.
// Bounds are enforced by projecting each trial step onto the box. The
// covariance is the asymptotic estimate s^2 (J^T J)^-1 mapped back to
// external coordinates with the transform's derivative.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace phonoq::fit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ResidualFn = std::function<Vector(const Vector&)>;

class fit_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Scale { linear, log };

struct Tolerances {
  double step = 1e-10;
  double gradient = 1e-10;
  double cost = 1e-14;
  int max_iterations = 200;
};

struct FitProblem {
  ResidualFn residual;
  Vector initial;
  Vector lower;
  Vector upper;
  std::vector<Scale> scales;       // empty: all linear
  Vector typical;                  // linear-parameter scale; empty: ones
  std::vector<std::string> names;  // optional, used in diagnostics
  Tolerances tolerances;
  // When true the residuals are taken to be normalized by their true sigma
  // and the covariance is (J^T J)^-1 without the cost/(N-k) factor.
  bool absolute_sigma = false;
};

struct FitResult {
  Vector params;
  Vector sigma;
  Matrix covariance;
  double cost = 0.0;  // sum of squared residuals
  bool converged = false;
  int iterations = 0;
  std::size_t n_residuals = 0;
  std::string status;
  std::vector<std::string> warnings;

  std::size_t dof() const {
    return n_residuals > static_cast<std::size_t>(params.size())
               ? n_residuals - static_cast<std::size_t>(params.size())
               : 0;
  }
  double reduced_chi2() const {
    return dof() > 0 ? cost / static_cast<double>(dof())
                     : std::numeric_limits<double>::quiet_NaN();
  }
};

enum class Difference { central, forward };

struct StepScheme {
  Difference kind = Difference::central;
  double relative = 6.0554544523933395e-06;  // cbrt(DBL_EPSILON)
  // Step is relative * max(|p|, floor); with floor == 0 a zero parameter
  // falls back to an absolute step of `relative`.
  double floor = 0.0;
};

inline std::string param_label(std::span<const std::string> names, Eigen::Index j) {
  if (static_cast<std::size_t>(j) < names.size()) return names[static_cast<std::size_t>(j)];
  return "p[" + std::to_string(j) + "]";
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline Matrix finite_difference_jacobian(const ResidualFn& fn, const Vector& params,
                                         StepScheme scheme = {},
                                         std::span<const std::string> names = {},
                                         const Vector* f0_hint = nullptr) {
  if (!params.allFinite()) throw fit_error("finite_difference_jacobian: non-finite parameters");
  Vector f0;
  if (scheme.kind == Difference::forward) {
    f0 = f0_hint ? *f0_hint : fn(params);
    if (!f0.allFinite()) throw fit_error("finite_difference_jacobian: non-finite residual at base point");
  }
  Matrix jac;
  Vector p = params;
  for (Eigen::Index j = 0; j < params.size(); ++j) {
    double mag = std::abs(params[j]);
    if (scheme.floor > 0.0) mag = std::max(mag, scheme.floor);
    double h = mag > 0.0 ? scheme.relative * mag : scheme.relative;
    // Make h exactly representable relative to p[j].
    volatile double tmp = params[j] + h;
    h = tmp - params[j];

    Vector col;
    if (scheme.kind == Difference::central) {
      p[j] = params[j] + h;
      Vector fp = fn(p);
      p[j] = params[j] - h;
      Vector fm = fn(p);
      p[j] = params[j];
      if (!fp.allFinite() || !fm.allFinite())
        throw fit_error("finite_difference_jacobian: non-finite residual when perturbing " +
                        param_label(names, j));
      col = (fp - fm) / (2.0 * h);
    } else {
      p[j] = params[j] + h;
      Vector fp = fn(p);
      p[j] = params[j];
      if (!fp.allFinite())
        throw fit_error("finite_difference_jacobian: non-finite residual when perturbing " +
                        param_label(names, j));
      col = (fp - f0) / h;
    }
    if (j == 0) jac.resize(col.size(), params.size());
    jac.col(j) = col;
  }
  return jac;
}

namespace detail {

struct Transform {
  std::vector<Scale> scales;
  Vector typical;

  double to_internal(Eigen::Index j, double p) const {
    return scales[static_cast<std::size_t>(j)] == Scale::log ? std::log(p) : p / typical[j];
  }
  double to_external(Eigen::Index j, double u) const {
    return scales[static_cast<std::size_t>(j)] == Scale::log ? std::exp(u) : u * typical[j];
  }
  // dp/du
  double derivative(Eigen::Index j, double p) const {
    return scales[static_cast<std::size_t>(j)] == Scale::log ? p : typical[j];
  }
  Vector internal(const Vector& p) const {
    Vector u(p.size());
    for (Eigen::Index j = 0; j < p.size(); ++j) u[j] = to_internal(j, p[j]);
    return u;
  }
  Vector external(const Vector& u) const {
    Vector p(u.size());
    for (Eigen::Index j = 0; j < u.size(); ++j) p[j] = to_external(j, u[j]);
    return p;
  }
};

inline void check_problem(const FitProblem& pb, Transform& tr) {
  const auto n = pb.initial.size();
  if (n == 0) throw fit_error("least_squares_fit: no free parameters");
  if (!pb.residual) throw fit_error("least_squares_fit: missing residual function");
  if (pb.lower.size() != n || pb.upper.size() != n)
    throw fit_error("least_squares_fit: bound vectors have wrong size");
  tr.scales = pb.scales.empty() ? std::vector<Scale>(static_cast<std::size_t>(n), Scale::linear)
                                : pb.scales;
  if (tr.scales.size() != static_cast<std::size_t>(n))
    throw fit_error("least_squares_fit: scale vector has wrong size");
  tr.typical = pb.typical.size() == 0 ? Vector::Ones(n) : pb.typical;
  if (tr.typical.size() != n) throw fit_error("least_squares_fit: typical vector has wrong size");
  const auto& t = pb.tolerances;
  if (!(t.step > 0 && t.gradient > 0 && t.cost > 0 && t.max_iterations > 0))
    throw fit_error("least_squares_fit: tolerances must be positive");
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto label = param_label(pb.names, j);
    if (!(pb.lower[j] <= pb.initial[j] && pb.initial[j] <= pb.upper[j]))
      throw fit_error("least_squares_fit: initial value of " + label + " outside bounds");
    if (tr.scales[static_cast<std::size_t>(j)] == Scale::log && !(pb.lower[j] > 0.0 || pb.initial[j] > 0.0))
      throw fit_error("least_squares_fit: log-scaled " + label + " must be positive");
    if (!(tr.typical[j] > 0.0)) throw fit_error("least_squares_fit: typical scale of " + label + " must be > 0");
  }
}

// Pseudo-inverse of a symmetric PSD matrix. Returns the indices of
// parameters with substantial weight in the numerical null space.
inline std::vector<Eigen::Index> psd_pseudo_inverse(const Matrix& a, Matrix& out) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  const Vector& ev = es.eigenvalues();
  const Matrix& v = es.eigenvectors();
  const double vmax = ev.size() ? std::max(ev.maxCoeff(), 0.0) : 0.0;
  const double cut = vmax * 1e-13 * static_cast<double>(a.rows());
  Vector inv = Vector::Zero(ev.size());
  std::vector<Eigen::Index> weak;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] > cut && ev[i] > 0.0) {
      inv[i] = 1.0 / ev[i];
    } else {
      for (Eigen::Index j = 0; j < v.rows(); ++j)
        if (std::abs(v(j, i)) > 0.1 && std::find(weak.begin(), weak.end(), j) == weak.end())
          weak.push_back(j);
    }
  }
  out = v * inv.asDiagonal() * v.transpose();
  return weak;
}

}  // namespace detail

inline FitResult least_squares_fit(const FitProblem& pb) {
  detail::Transform tr;
  detail::check_problem(pb, tr);
  const auto n = pb.initial.size();
  const auto& tol = pb.tolerances;

  Vector lo(n), hi(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const bool lg = tr.scales[static_cast<std::size_t>(j)] == Scale::log;
    lo[j] = lg ? (pb.lower[j] > 0 ? std::log(pb.lower[j]) : -std::numeric_limits<double>::infinity())
               : pb.lower[j] / tr.typical[j];
    hi[j] = lg ? std::log(pb.upper[j]) : pb.upper[j] / tr.typical[j];
  }

  ResidualFn internal_fn = [&](const Vector& u) { return pb.residual(tr.external(u)); };
  const StepScheme internal_step{Difference::central, 6.0554544523933395e-06, 1.0};

  Vector u = tr.internal(pb.initial);
  Vector r = internal_fn(u);
  if (!r.allFinite() || r.size() == 0)
    throw fit_error("least_squares_fit: residual is not finite at the initial parameters");
  double cost = r.squaredNorm();

  FitResult res;
  res.n_residuals = static_cast<std::size_t>(r.size());

  auto clamp = [&](Vector v) {
    for (Eigen::Index j = 0; j < n; ++j) v[j] = std::clamp(v[j], lo[j], hi[j]);
    return v;
  };

  Matrix jac = finite_difference_jacobian(internal_fn, u, internal_step, pb.names);
  double mu = -1.0;
  double nu = 2.0;
  int iter = 0;
  bool converged = false;
  std::string status = "iteration limit reached";

  auto gradient_small = [&](const Matrix& j, const Vector& rr) {
    const double rn = rr.norm();
    if (rn == 0.0) return true;
    const Vector g = j.transpose() * rr;
    for (Eigen::Index k = 0; k < n; ++k) {
      const double cn = j.col(k).norm();
      if (cn == 0.0) continue;
      // Gradient components pointing out of an active bound do not count.
      const bool at_lo = u[k] <= lo[k] && g[k] > 0.0;
      const bool at_hi = u[k] >= hi[k] && g[k] < 0.0;
      if (at_lo || at_hi) continue;
      if (std::abs(g[k]) / (cn * rn) > tol.gradient) return false;
    }
    return true;
  };

  if (gradient_small(jac, r)) {
    converged = true;
    status = "gradient tolerance satisfied";
  }

  while (!converged && iter < tol.max_iterations) {
    ++iter;
    const Matrix a = jac.transpose() * jac;
    const Vector g = jac.transpose() * r;
    Vector d = a.diagonal();
    const double dmax = std::max(d.maxCoeff(), 1e-300);
    for (Eigen::Index k = 0; k < n; ++k) d[k] = std::max(d[k], 1e-12 * dmax);
    if (mu < 0.0) mu = 1e-3;

    bool accepted = false;
    while (!accepted) {
      Matrix lhs = a;
      lhs.diagonal() += mu * d;
      Vector delta = lhs.ldlt().solve(-g);
      if (!delta.allFinite()) {
        mu *= nu;
        nu *= 2.0;
        if (mu > 1e30) break;
        continue;
      }
      const Vector trial = clamp(u + delta);
      const Vector step = trial - u;
      const double step_norm = step.norm();
      const bool small_step = step_norm <= tol.step * (u.norm() + tol.step);

      Vector r_trial = internal_fn(trial);
      const double cost_trial = r_trial.allFinite() ? r_trial.squaredNorm()
                                                    : std::numeric_limits<double>::infinity();
      const double predicted = -(2.0 * g.dot(step) + step.dot(a * step));
      if (cost_trial < cost) {
        const double rho = predicted > 0.0 ? (cost - cost_trial) / predicted : 0.0;
        const double reduction = cost - cost_trial;
        u = trial;
        r = std::move(r_trial);
        const double old_cost = cost;
        cost = cost_trial;
        accepted = true;
        mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
        nu = 2.0;
        if (cost == 0.0) {
          converged = true;
          status = "zero residual";
        } else if (reduction <= tol.cost * old_cost) {
          converged = true;
          status = "cost tolerance satisfied";
        } else if (small_step) {
          converged = true;
          status = "step tolerance satisfied";
        }
        if (!converged) {
          jac = finite_difference_jacobian(internal_fn, u, internal_step, pb.names);
          if (gradient_small(jac, r)) {
            converged = true;
            status = "gradient tolerance satisfied";
          }
        }
      } else {
        if (small_step) {
          converged = true;
          status = "step tolerance satisfied";
          break;
        }
        mu *= nu;
        nu *= 2.0;
        if (mu > 1e30) {
          converged = true;
          status = "no further reduction possible";
          break;
        }
      }
    }
  }

  res.params = tr.external(u);
  res.cost = cost;
  res.converged = converged;
  res.iterations = iter;
  res.status = status;

  // Covariance in internal coordinates, then the delta-method map.
  const Matrix j_final = finite_difference_jacobian(internal_fn, u, internal_step, pb.names);
  Matrix cov_int;
  const auto weak = detail::psd_pseudo_inverse(j_final.transpose() * j_final, cov_int);
  double s2 = 1.0;
  if (!pb.absolute_sigma) {
    s2 = res.dof() > 0 ? cost / static_cast<double>(res.dof())
                       : std::numeric_limits<double>::quiet_NaN();
  }
  Vector dpdu(n);
  for (Eigen::Index j = 0; j < n; ++j) dpdu[j] = tr.derivative(j, res.params[j]);
  res.covariance = s2 * (dpdu.asDiagonal() * cov_int * dpdu.asDiagonal());
  res.covariance = 0.5 * (res.covariance + res.covariance.transpose()).eval();
  res.sigma = res.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  for (auto j : weak) {
    res.sigma[j] = std::numeric_limits<double>::infinity();
    res.warnings.push_back(param_label(pb.names, j) + " is not identifiable from the data");
  }
  if (!converged) res.warnings.push_back("fit did not converge: " + status);
  return res;
}

// Named parameter with optional pinning; fitters describe their model with
// a list of these and get full-length results back.
struct Param {
  std::string name;
  double value = 0.0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  Scale scale = Scale::linear;
  double typical = 1.0;
  bool fixed = false;
};

using FullResidualFn = std::function<Vector(const Vector& full)>;

inline FitResult fit_params(const std::vector<Param>& params, const FullResidualFn& residual,
                            Tolerances tol = {}, bool absolute_sigma = false) {
  const auto n_all = static_cast<Eigen::Index>(params.size());
  std::vector<Eigen::Index> free;
  Vector full(n_all);
  for (Eigen::Index i = 0; i < n_all; ++i) {
    full[i] = params[static_cast<std::size_t>(i)].value;
    if (!params[static_cast<std::size_t>(i)].fixed) free.push_back(i);
  }
  const auto nf = static_cast<Eigen::Index>(free.size());

  FitProblem pb;
  pb.initial.resize(nf);
  pb.lower.resize(nf);
  pb.upper.resize(nf);
  pb.typical.resize(nf);
  for (Eigen::Index k = 0; k < nf; ++k) {
    const auto& p = params[static_cast<std::size_t>(free[static_cast<std::size_t>(k)])];
    pb.initial[k] = std::clamp(p.value, p.lower, p.upper);
    pb.lower[k] = p.lower;
    pb.upper[k] = p.upper;
    pb.typical[k] = p.typical;
    pb.scales.push_back(p.scale);
    pb.names.push_back(p.name);
  }
  pb.tolerances = tol;
  pb.absolute_sigma = absolute_sigma;
  pb.residual = [&](const Vector& x) {
    Vector f = full;
    for (Eigen::Index k = 0; k < nf; ++k) f[free[static_cast<std::size_t>(k)]] = x[k];
    return residual(f);
  };

  FitResult inner = least_squares_fit(pb);
  FitResult out;
  out.params = full;
  out.sigma = Vector::Zero(n_all);
  out.covariance = Matrix::Zero(n_all, n_all);
  for (Eigen::Index k = 0; k < nf; ++k) {
    const auto i = free[static_cast<std::size_t>(k)];
    out.params[i] = inner.params[k];
    out.sigma[i] = inner.sigma[k];
    for (Eigen::Index l = 0; l < nf; ++l)
      out.covariance(i, free[static_cast<std::size_t>(l)]) = inner.covariance(k, l);
  }
  out.cost = inner.cost;
  out.converged = inner.converged;
  out.iterations = inner.iterations;
  out.n_residuals = inner.n_residuals + static_cast<std::size_t>(n_all - nf);
  out.status = inner.status;
  out.warnings = inner.warnings;
  // dof() must count only free parameters.
  out.n_residuals = inner.n_residuals - static_cast<std::size_t>(nf) + static_cast<std::size_t>(n_all);
  return out;
}

}  // namespace phonoq::fit
