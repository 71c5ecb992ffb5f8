#pragma once

// Independent reference computations used by the tests. Nothing here calls
// the library's transfer, kernel or analysis code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "ruelle/configuration.hpp"
#include "ruelle/potentials.hpp"
#include "ruelle/state_space.hpp"

namespace oracle {

using ruelle::ConfigView;
using ruelle::Configuration;
using ruelle::Index;
using ruelle::Potential;
using ruelle::StateSpace;

inline double measure(const StateSpace& s, Index a) {
  const double mass = s.convention() == ruelle::MassConvention::counting ? static_cast<double>(s.size()) : 1.0;
  return mass * s.weights()[a];
}

inline std::size_t ipow(std::size_t b, std::size_t e) {
  std::size_t r = 1;
  while (e--) r *= b;
  return r;
}

inline std::vector<Index> digits(std::size_t i, std::size_t base, std::size_t len) {
  std::vector<Index> w(len);
  for (std::size_t k = 0; k < len; ++k) {
    w[len - 1 - k] = static_cast<Index>(i % base);
    i /= base;
  }
  return w;
}

inline std::size_t number(const std::vector<Index>& w, std::size_t base) {
  std::size_t i = 0;
  for (Index a : w) i = i * base + a;
  return i;
}

/// Dense matrix of L_f on functions of the first m coordinates:
/// (A phi)(x) = sum_a mu_a exp(f(a x)) phi(a x_1..x_{m-1}), f evaluated on
/// (a, x_1..x_m) followed by pad 0.
inline Eigen::MatrixXd transfer_matrix(const StateSpace& s, const Potential& f, std::size_t m) {
  const std::size_t n_alpha = s.size();
  const std::size_t n = ipow(n_alpha, m);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t x = 0; x < n; ++x) {
    const auto w = digits(x, n_alpha, m);
    for (Index a = 0; a < n_alpha; ++a) {
      std::vector<Index> ax{a};
      ax.insert(ax.end(), w.begin(), w.end());
      const double weight = measure(s, a) * std::exp(f(ConfigView{ax, 0}));
      std::vector<Index> y(ax.begin(), ax.begin() + static_cast<std::ptrdiff_t>(m));
      A(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(number(y, n_alpha))) += weight;
    }
  }
  return A;
}

struct Perron {
  double lambda = 0.0;
  std::vector<double> h;   ///< right vector, sum h nu = 1
  std::vector<double> nu;  ///< left vector, sum nu = 1
  std::vector<double> moduli;  ///< all eigenvalue moduli, descending
};

inline std::vector<double> perron_vector(const Eigen::MatrixXd& M, double& lambda, std::vector<double>* moduli) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(M);
  const auto ev = es.eigenvalues();
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < ev.size(); ++i)
    if (ev[i].real() > ev[best].real()) best = i;
  lambda = ev[best].real();
  if (moduli) {
    moduli->clear();
    for (Eigen::Index i = 0; i < ev.size(); ++i) moduli->push_back(std::abs(ev[i]));
    std::sort(moduli->rbegin(), moduli->rend());
  }
  const Eigen::MatrixXcd vecs = es.eigenvectors();
  const Eigen::VectorXcd vec = vecs.col(best);
  std::vector<double> v(static_cast<std::size_t>(vec.size()));
  double s = 0.0;
  for (Eigen::Index i = 0; i < vec.size(); ++i) s += vec[i].real();
  for (Eigen::Index i = 0; i < vec.size(); ++i) v[static_cast<std::size_t>(i)] = vec[i].real() / s;
  return v;
}

inline Perron perron(const Eigen::MatrixXd& A) {
  Perron p;
  double lt = 0.0;
  p.h = perron_vector(A, p.lambda, &p.moduli);
  p.nu = perron_vector(A.transpose(), lt, nullptr);
  double pairing = 0.0;
  for (std::size_t i = 0; i < p.h.size(); ++i) pairing += p.h[i] * p.nu[i];
  for (auto& v : p.h) v /= pairing;
  return p;
}

/// Brute-force K_n(phi, x) with y = sigma^n x:
/// sum_w exp(S_n f(w y)) prod mu(w_i) phi(w y) / sum_w exp(S_n f(w y)) prod mu(w_i).
inline double kernel(const StateSpace& s, const Potential& f, std::size_t n,
                     const std::function<double(ConfigView)>& phi, const Configuration& x) {
  const std::size_t count = ipow(s.size(), n);
  std::vector<double> logw(count), vals(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto w = digits(i, s.size(), n);
    double lw = 0.0;
    for (Index a : w) lw += std::log(measure(s, a));
    const auto tail = ruelle::shift(x, n);
    w.insert(w.end(), tail.prefix().begin(), tail.prefix().end());
    const ConfigView wx{w, x.pad()};
    for (std::size_t j = 0; j < n; ++j) lw += f(wx.shifted(j));
    logw[i] = lw;
    vals[i] = phi(wx);
  }
  const double hi = *std::max_element(logw.begin(), logw.end());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double e = std::exp(logw[i] - hi);
    num += e * vals[i];
    den += e;
  }
  return num / den;
}

}  // namespace oracle
