#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "constants.hpp"
#include "fit.hpp"
#include "resonance.hpp"

namespace phonoq {

// One conjugate pair, stored as its upper-half-plane member.
struct PolePair {
  cplx pole;     // rad/s
  cplx residue;  // A/(V s)

  double frequency_hz() const { return rad_to_hz(std::abs(pole.imag())); }
};

struct PoleResidueModel {
  std::vector<PolePair> pairs;
  double e = 0.0;  // F

  bool stable() const {
    for (const auto& pr : pairs)
      if (!(pr.pole.real() < 0.0)) return false;
    return true;
  }

  // Admittance at complex frequency s.
  cplx at(cplx s) const {
    cplx y = e * s;
    for (const auto& pr : pairs)
      y += pr.residue / (s - pr.pole) + std::conj(pr.residue) / (s - std::conj(pr.pole));
    return y;
  }
};

struct BvdCircuit {
  double r = 0.0;   // ohm
  double l = 0.0;   // H
  double c = 0.0;   // F
  double c0 = 0.0;  // F
  double b = 0.0;   // A rad^2/s^2 (VCCS numerator)
  double g = 0.0;   // A/V, equals b L C

  double omega_r() const { return 1.0 / std::sqrt(l * c); }
  double impedance() const { return std::sqrt(l / c); }

  void validate() const {
    if (!(r >= 0.0 && l > 0.0 && c > 0.0 && c0 >= 0.0) || !std::isfinite(b))
      throw std::invalid_argument("circuit: need R >= 0, L > 0, C > 0, C0 >= 0 and finite b");
  }

  cplx at(cplx s) const {
    const cplx den = s * s + s * (r / l) + 1.0 / (l * c);
    return (s / l) / den + c0 * s + b / den;
  }
};

inline cplx eval_admittance(const PoleResidueModel& m, double omega) {
  if (!(omega > 0.0)) throw std::invalid_argument("eval_admittance: omega must be > 0");
  return m.at(cplx(0.0, omega));
}

inline cplx eval_admittance(const BvdCircuit& c, double omega) {
  if (!(omega > 0.0)) throw std::invalid_argument("eval_admittance: omega must be > 0");
  return c.at(cplx(0.0, omega));
}

// Admittance of a sum of BVD branches sharing one C0 (each branch's c0 ignored).
inline cplx eval_admittance(const std::vector<BvdCircuit>& branches, double c0, double omega) {
  if (!(omega > 0.0)) throw std::invalid_argument("eval_admittance: omega must be > 0");
  const cplx s(0.0, omega);
  cplx y = c0 * s;
  for (auto br : branches) {
    br.c0 = 0.0;
    y += br.at(s);
  }
  return y;
}

// Exact pole/residue pair of an underdamped BVD branch (including b).
inline PolePair circuit_to_pole_pair(const BvdCircuit& c) {
  c.validate();
  const double re = -c.r / (2.0 * c.l);
  const double w2 = 1.0 / (c.l * c.c) - re * re;
  if (!(w2 > 0.0)) throw std::invalid_argument("circuit_to_pole_pair: branch is overdamped");
  const cplx p(re, std::sqrt(w2));
  const cplx res = (p / c.l + c.b) / cplx(0.0, 2.0 * p.imag());
  return {p, res};
}

inline BvdCircuit to_equivalent_circuit(const PolePair& pr, double e) {
  const double cr = pr.residue.real();
  const double ci = pr.residue.imag();
  const double pr_ = pr.pole.real();
  const double pi_ = pr.pole.imag();
  if (!(cr > 0.0)) throw fit::fit_error("to_equivalent_circuit: non-passive pair (Re residue <= 0 gives L <= 0)");
  BvdCircuit out;
  out.l = 1.0 / (2.0 * cr);
  out.r = -pr_ / cr;
  out.c = 2.0 * cr / std::norm(pr.pole);
  out.c0 = e;
  out.b = -2.0 * (cr * pr_ + ci * pi_);
  out.g = out.b * out.l * out.c;
  return out;
}

inline ResonanceParams circuit_to_resonance(const BvdCircuit& c, double z0) {
  c.validate();
  if (!(z0 > 0.0)) throw std::invalid_argument("circuit_to_resonance: Z0 must be > 0");
  const double zc = c.impedance();
  ResonanceParams p;
  p.f_r = rad_to_hz(c.omega_r());
  p.q_i = c.r > 0.0 ? zc / c.r : INFINITY;
  p.qe_mag = zc / z0;
  p.phi = 0.0;
  return p;
}

// |Y_VCCS| / |Y_BVD| for one pair at angular frequency omega.
inline double vccs_ratio(const PolePair& pr, double omega) {
  if (!(omega > 0.0)) throw std::invalid_argument("vccs_ratio: omega must be > 0");
  const double a = 2.0 * pr.residue.real();
  const double b = -2.0 * (pr.residue.real() * pr.pole.real() + pr.residue.imag() * pr.pole.imag());
  return std::abs(b) / (std::abs(a) * omega);
}

// Largest ratio over all pairs.
inline double vccs_ratio(const PoleResidueModel& m, double omega) {
  double out = 0.0;
  for (const auto& pr : m.pairs) out = std::max(out, vccs_ratio(pr, omega));
  return out;
}

enum class VfWeighting { inverse_magnitude, uniform };

struct VectorFitOptions {
  int iterations = 100;
  double pole_tolerance = 1e-9;  // relative pole movement
  VfWeighting weighting = VfWeighting::inverse_magnitude;
  double rank_threshold = 1e-13;
};

struct VectorFit {
  PoleResidueModel model;
  int iterations = 0;
  bool converged = false;
  bool flipped_final = false;  // relocation produced unstable poles on the last pass
  double max_rel_error = 0.0;  // on the fit grid
  double rms_rel_error = 0.0;
  std::vector<std::string> warnings;
};

namespace detail {

struct VfSystem {
  std::vector<cplx> s;  // normalized complex frequencies
  std::vector<cplx> y;
  std::vector<double> w;
};

// Real basis for a conjugate pair: phi1 = 1/(s-p) + 1/(s-p*), phi2 = i/(s-p) - i/(s-p*).
inline void pair_basis(cplx s, cplx p, cplx& phi1, cplx& phi2) {
  const cplx u = 1.0 / (s - p);
  const cplx v = 1.0 / (s - std::conj(p));
  phi1 = u + v;
  phi2 = cplx(0.0, 1.0) * (u - v);
}

// Column-scaled least squares; throws on rank deficiency.
inline Eigen::VectorXd vf_solve(Eigen::MatrixXd a, const Eigen::VectorXd& rhs, double thresh) {
  Eigen::VectorXd norms(a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    norms[j] = a.col(j).norm();
    if (!(norms[j] > 0.0)) throw fit::fit_error("vector_fit: empty basis column; try fewer pole pairs");
    a.col(j) /= norms[j];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(thresh);
  if (qr.rank() < a.cols())
    throw fit::fit_error("vector_fit: rank-deficient system (rank " + std::to_string(qr.rank()) + " of " +
                    std::to_string(a.cols()) + "); try fewer pole pairs");
  Eigen::VectorXd x = qr.solve(rhs);
  return x.cwiseQuotient(norms);
}

inline std::vector<cplx> initial_poles(double w_lo, double w_hi, int n) {
  std::vector<cplx> out;
  for (int k = 0; k < n; ++k) {
    const double t = n == 1 ? 0.5 : static_cast<double>(k) / (n - 1);
    const double w = std::exp(std::log(w_lo) + t * (std::log(w_hi) - std::log(w_lo)));
    out.emplace_back(-w / 100.0, w);
  }
  return out;
}

// Upper-half poles from eigenvalues of a real matrix; real eigenvalues are merged pairwise.
inline std::vector<cplx> pair_up(const Eigen::VectorXcd& ev) {
  std::vector<cplx> upper;
  std::vector<double> reals;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    const cplx z = ev[i];
    if (std::abs(z.imag()) <= 1e-12 * std::abs(z))
      reals.push_back(z.real());
    else if (z.imag() > 0.0)
      upper.push_back(z);
  }
  std::sort(reals.begin(), reals.end());
  for (std::size_t i = 0; i + 1 < reals.size(); i += 2) {
    const double m = 0.5 * (reals[i] + reals[i + 1]);
    const double h = std::max(0.5 * std::abs(reals[i + 1] - reals[i]), 1e-3 * std::abs(m));
    upper.emplace_back(m, h);
  }
  std::sort(upper.begin(), upper.end(), [](cplx a, cplx b) { return a.imag() < b.imag(); });
  return upper;
}

// Fixed-pole residue solve; returns [r1, r2 per pair..., e].
inline Eigen::VectorXd vf_residues(const VfSystem& sys, const std::vector<cplx>& poles, double thresh) {
  const auto k = static_cast<Eigen::Index>(sys.s.size());
  const auto n = static_cast<Eigen::Index>(poles.size());
  Eigen::MatrixXd a(2 * k, 2 * n + 1);
  Eigen::VectorXd rhs(2 * k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    const double w = sys.w[ii];
    for (Eigen::Index j = 0; j < n; ++j) {
      cplx f1, f2;
      pair_basis(sys.s[ii], poles[static_cast<std::size_t>(j)], f1, f2);
      a(2 * i, 2 * j) = w * f1.real();
      a(2 * i + 1, 2 * j) = w * f1.imag();
      a(2 * i, 2 * j + 1) = w * f2.real();
      a(2 * i + 1, 2 * j + 1) = w * f2.imag();
    }
    a(2 * i, 2 * n) = w * sys.s[ii].real();
    a(2 * i + 1, 2 * n) = w * sys.s[ii].imag();
    rhs[2 * i] = w * sys.y[ii].real();
    rhs[2 * i + 1] = w * sys.y[ii].imag();
  }
  return vf_solve(a, rhs, thresh);
}

}  // namespace detail

inline VectorFit vector_fit(const ComplexTrace& tr, int n_pairs, const VectorFitOptions& opt = {}) {
  tr.validate();
  if (n_pairs < 0) throw std::invalid_argument("vector_fit: n_pairs must be >= 0");
  if (opt.iterations < 0) throw std::invalid_argument("vector_fit: iterations must be >= 0");
  if (!(tr.freq.front() > 0.0)) throw std::invalid_argument("vector_fit: frequencies must be > 0");
  const std::size_t k = tr.size();
  if (k * 2 < static_cast<std::size_t>(4 * n_pairs + 1))
    throw fit::fit_error("vector_fit: too few samples for the requested pole pairs");

  const double w_lo = hz_to_rad(tr.freq.front());
  const double w_hi = hz_to_rad(tr.freq.back());
  const double ws = w_hi;  // frequency normalization

  detail::VfSystem sys;
  sys.s.resize(k);
  sys.y = tr.value;
  sys.w.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    sys.s[i] = cplx(0.0, hz_to_rad(tr.freq[i]) / ws);
    const double mag = std::abs(tr.value[i]);
    if (opt.weighting == VfWeighting::inverse_magnitude) {
      if (!(mag > 0.0)) throw fit::fit_error("vector_fit: zero admittance sample with 1/|Y| weighting");
      sys.w[i] = 1.0 / mag;
    } else {
      sys.w[i] = 1.0;
    }
  }

  VectorFit out;
  std::vector<cplx> poles = detail::initial_poles(w_lo / ws, w_hi / ws, n_pairs);
  const auto n = static_cast<Eigen::Index>(n_pairs);

  for (int it = 0; it < opt.iterations && n_pairs > 0; ++it) {
    // Unknowns: residues (2n), e, sigma residues (2n).
    const auto kk = static_cast<Eigen::Index>(k);
    Eigen::MatrixXd a(2 * kk, 4 * n + 1);
    Eigen::VectorXd rhs(2 * kk);
    for (Eigen::Index i = 0; i < kk; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      const double w = sys.w[ii];
      const cplx y = sys.y[ii];
      for (Eigen::Index j = 0; j < n; ++j) {
        cplx f1, f2;
        detail::pair_basis(sys.s[ii], poles[static_cast<std::size_t>(j)], f1, f2);
        const cplx g1 = -y * f1;
        const cplx g2 = -y * f2;
        a(2 * i, 2 * j) = w * f1.real();
        a(2 * i + 1, 2 * j) = w * f1.imag();
        a(2 * i, 2 * j + 1) = w * f2.real();
        a(2 * i + 1, 2 * j + 1) = w * f2.imag();
        a(2 * i, 2 * n + 1 + 2 * j) = w * g1.real();
        a(2 * i + 1, 2 * n + 1 + 2 * j) = w * g1.imag();
        a(2 * i, 2 * n + 2 + 2 * j) = w * g2.real();
        a(2 * i + 1, 2 * n + 2 + 2 * j) = w * g2.imag();
      }
      a(2 * i, 2 * n) = w * sys.s[ii].real();
      a(2 * i + 1, 2 * n) = w * sys.s[ii].imag();
      rhs[2 * i] = w * y.real();
      rhs[2 * i + 1] = w * y.imag();
    }
    const Eigen::VectorXd x = detail::vf_solve(a, rhs, opt.rank_threshold);

    // Zeros of sigma: eig(A - b c^T) in real block form.
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const cplx p = poles[static_cast<std::size_t>(j)];
      h(2 * j, 2 * j) = p.real();
      h(2 * j, 2 * j + 1) = p.imag();
      h(2 * j + 1, 2 * j) = -p.imag();
      h(2 * j + 1, 2 * j + 1) = p.real();
    }
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index m = 0; m < 2 * n; ++m) h(2 * j, m) -= 2.0 * x[2 * n + 1 + m];
    Eigen::EigenSolver<Eigen::MatrixXd> es(h, false);
    if (es.info() != Eigen::Success) throw fit::fit_error("vector_fit: eigenvalue solve failed");
    std::vector<cplx> next = detail::pair_up(es.eigenvalues());
    if (static_cast<Eigen::Index>(next.size()) != n) throw fit::fit_error("vector_fit: lost a pole during relocation");

    bool flipped = false;
    for (auto& p : next)
      if (p.real() > 0.0) {
        p = cplx(-p.real(), p.imag());
        flipped = true;
      }
    std::sort(next.begin(), next.end(), [](cplx a, cplx b) { return a.imag() < b.imag(); });

    double move = 0.0;
    for (std::size_t j = 0; j < next.size(); ++j)
      move = std::max(move, std::abs(next[j] - poles[j]) / std::abs(next[j]));
    poles = next;
    out.iterations = it + 1;
    out.flipped_final = flipped;
    if (move < opt.pole_tolerance) {
      out.converged = true;
      break;
    }
  }
  if (n_pairs == 0) out.converged = true;

  const Eigen::VectorXd x = detail::vf_residues(sys, poles, opt.rank_threshold);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    out.model.pairs.push_back({poles[jj] * ws, cplx(x[2 * j], x[2 * j + 1]) * ws});
  }
  out.model.e = x[2 * n] / ws;

  double worst = 0.0, acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const cplx fit = out.model.at(sys.s[i] * ws);
    const double rel = std::abs(fit - tr.value[i]) / std::abs(tr.value[i]);
    worst = std::max(worst, rel);
    acc += rel * rel;
  }
  out.max_rel_error = worst;
  out.rms_rel_error = std::sqrt(acc / static_cast<double>(k));
  if (!out.converged)
    out.warnings.push_back("pole relocation did not reach tolerance in " + std::to_string(opt.iterations) +
                           " iterations");
  if (out.flipped_final) out.warnings.push_back("unstable poles were flipped on the final relocation");
  return out;
}

struct CircuitExtraction {
  PolePair pair;
  BvdCircuit circuit;
  ResonanceParams resonance;
  double vccs_ratio = 0.0;  // at the pole frequency
};

// Map every fitted pair to a BVD branch and resonance parameters.
inline std::vector<CircuitExtraction> extract_circuits(const PoleResidueModel& m, double z0) {
  std::vector<CircuitExtraction> out;
  for (const auto& pr : m.pairs) {
    CircuitExtraction ex;
    ex.pair = pr;
    ex.circuit = to_equivalent_circuit(pr, m.e);
    ex.resonance = circuit_to_resonance(ex.circuit, z0);
    ex.vccs_ratio = vccs_ratio(pr, std::abs(pr.pole.imag()));
    out.push_back(ex);
  }
  return out;
}

}  // namespace phonoq
