#pragma once

// Restricted fractional Laplacian on uniform grids over intervals and boxes (u = 0 outside D),
// its spectrum, the spectral trace and counting-function diagnostics.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "stabletrace/core.hpp"
#include "stabletrace/geometry.hpp"
#include "stabletrace/quadrature.hpp"
#include "stabletrace/stable_kernel.hpp"

namespace stabletrace {

/// Discretized generator. Interior nodes lo + j h, j = 1..n-1 per axis, x-fastest ordering.
/// Storage depends on the case: a tridiagonal (interval, alpha = 2), a dense matrix (interval,
/// alpha < 2), or for boxes the translation-invariant kernel k(|di|, |dj|) of the block-Toeplitz
/// matrix, which is never formed in full unless dense() is called.
struct GeneratorMatrix {
  enum class Storage { tridiagonal, dense, box_kernel };
  Storage storage = Storage::dense;
  Eigen::MatrixXd matrix;
  Eigen::VectorXd diag;
  Eigen::VectorXd sub;
  std::vector<double> kernel;  ///< k(di, dj) at index dj * nx + di
  Domain domain = Domain::interval(0.0, 1.0);
  double grid_h = 0.0;
  double alpha = 2.0;
  std::vector<int> nodes_per_axis;

  Eigen::Index size() const {
    Eigen::Index n = 1;
    for (int m : nodes_per_axis) n *= m;
    return n;
  }

  double box_entry(int i1, int j1, int i2, int j2) const {
    return kernel[static_cast<std::size_t>(std::abs(j1 - j2)) * static_cast<std::size_t>(nodes_per_axis[0]) +
                  static_cast<std::size_t>(std::abs(i1 - i2))];
  }

  Eigen::MatrixXd dense() const {
    const Eigen::Index N = size();
    switch (storage) {
      case Storage::dense:
        return matrix;
      case Storage::tridiagonal: {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(N, N);
        m.diagonal() = diag;
        m.diagonal(1) = sub;
        m.diagonal(-1) = sub;
        return m;
      }
      case Storage::box_kernel: {
        if (N > 20000) throw std::domain_error("GeneratorMatrix::dense: too large to form");
        const int nx = nodes_per_axis[0], ny = nodes_per_axis[1];
        Eigen::MatrixXd m(N, N);
        for (int j1 = 0; j1 < ny; ++j1)
          for (int i1 = 0; i1 < nx; ++i1)
            for (int j2 = 0; j2 < ny; ++j2)
              for (int i2 = 0; i2 < nx; ++i2) m(j1 * nx + i1, j2 * nx + i2) = box_entry(i1, j1, i2, j2);
        return m;
      }
    }
    return {};
  }

  /// Sum of row i, i.e. the operator applied to 1 on the grid (0 outside).
  double row_sum(Eigen::Index i) const {
    switch (storage) {
      case Storage::dense:
        return matrix.row(i).sum();
      case Storage::tridiagonal:
        return diag(i) + (i > 0 ? sub(i - 1) : 0.0) + (i + 1 < diag.size() ? sub(i) : 0.0);
      case Storage::box_kernel: {
        const int nx = nodes_per_axis[0], ny = nodes_per_axis[1];
        const int i1 = static_cast<int>(i % nx), j1 = static_cast<int>(i / nx);
        CompensatedSum s;
        for (int j2 = 0; j2 < ny; ++j2)
          for (int i2 = 0; i2 < nx; ++i2) s.add(box_entry(i1, j1, i2, j2));
        return s.value();
      }
    }
    return 0.0;
  }

  Vec node(Eigen::Index i) const {
    Vec x(domain.dim());
    Vec lo(domain.dim());
    if (const auto* I = std::get_if<Interval>(&domain.shape())) lo[0] = I->a;
    if (const auto* B = std::get_if<Box>(&domain.shape())) lo = B->lo;
    for (int a = 0; a < domain.dim(); ++a) {
      const int n = nodes_per_axis[static_cast<std::size_t>(a)];
      x[a] = lo[a] + grid_h * static_cast<double>(1 + i % n);
      i /= n;
    }
    return x;
  }
};

namespace spectral_detail {

inline int intervals_along(double length, double h) {
  const double n = length / h;
  const long r = std::lround(n);
  if (std::abs(n - static_cast<double>(r)) > 1e-6 * n) throw std::domain_error("assemble_generator: h must divide every side length");
  if (r - 1 < 16) throw std::domain_error("assemble_generator: grid too coarse (fewer than 16 interior nodes per side)");
  return static_cast<int>(r);
}

// int over [m-1/2, m+1/2] x [n-1/2, n+1/2] minus the unit disk of |s|^{-2-alpha}
inline double cell_weight_2d(int m, int n, double alpha) {
  if (m == 0 && n == 0) return 0.0;
  const double x0 = m - 0.5, x1 = m + 0.5, y0 = n - 0.5, y1 = n + 0.5;
  if (std::max(std::abs(m), std::abs(n)) > 4) {
    static const quad::GaussRule g = quad::gauss_legendre(4);
    double s = 0.0;
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
      for (std::size_t j = 0; j < g.nodes.size(); ++j) {
        const double x = m + 0.5 * g.nodes[i], y = n + 0.5 * g.nodes[j];
        s += 0.25 * g.weights[i] * g.weights[j] * std::pow(x * x + y * y, -1.0 - 0.5 * alpha);
      }
    return s;
  }
  // polar about the origin: radial part in closed form, angle by panels between kinks
  auto radial = [alpha](double a, double b) {
    a = std::max(a, 1.0);
    if (b <= a) return 0.0;
    return (std::pow(a, -alpha) - std::pow(b, -alpha)) / alpha;
  };
  auto segment = [&](double th) {
    const double c = std::cos(th), s = std::sin(th);
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    auto slab = [&](double dir, double a, double b) {
      if (std::abs(dir) < 1e-300) {
        if (a > 0.0 || b < 0.0) hi = -1.0;
        return;
      }
      double t0 = a / dir, t1 = b / dir;
      if (t0 > t1) std::swap(t0, t1);
      lo = std::max(lo, t0);
      hi = std::min(hi, t1);
    };
    slab(c, x0, x1);
    slab(s, y0, y1);
    return hi > lo ? radial(lo, hi) : 0.0;
  };
  std::vector<double> breaks;
  const double xs[2] = {x0, x1}, ys[2] = {y0, y1};
  for (double x : xs)
    for (double y : ys) breaks.push_back(std::atan2(y, x));
  for (double x : xs)
    if (std::abs(x) <= 1.0) {
      const double y = std::sqrt(1.0 - x * x);
      for (double yy : {y, -y})
        if (yy >= y0 && yy <= y1) breaks.push_back(std::atan2(yy, x));
    }
  for (double y : ys)
    if (std::abs(y) <= 1.0) {
      const double x = std::sqrt(1.0 - y * y);
      for (double xx : {x, -x})
        if (xx >= x0 && xx <= x1) breaks.push_back(std::atan2(y, xx));
    }
  // the cell never contains the origin, so its angular span is below pi; unwrap around its center
  const double center = std::atan2(static_cast<double>(n), static_cast<double>(m));
  for (double& b : breaks) {
    while (b - center > std::numbers::pi) b -= 2.0 * std::numbers::pi;
    while (b - center < -std::numbers::pi) b += 2.0 * std::numbers::pi;
  }
  std::sort(breaks.begin(), breaks.end());
  return quad::over_panels(segment, breaks, 1e-12, 10).value;
}

inline double near_coefficient(int d, double alpha, double A, double h) {
  return 0.5 / d * A * unit_sphere_area(d) * std::pow(h, 2.0 - alpha) / (2.0 - alpha);
}

}  // namespace spectral_detail

/// Generator matrix on D (interval or box) with spacing h. alpha = 2 gives the second-difference
/// Laplacian; alpha < 2 splits the principal-value integral at radius h: a Taylor term on the ball,
/// exact cell integrals of the Levy density outside it, and the Levy tail mass on the diagonal.
inline GeneratorMatrix assemble_generator(const Domain& D, double h, double alpha) {
  const int d = D.dim();
  StableParams p{d, alpha};
  p.validate();
  if (!(h > 0.0)) throw std::domain_error("assemble_generator: h must be positive");
  GeneratorMatrix G;
  G.domain = D;
  G.grid_h = h;
  G.alpha = alpha;

  if (const auto* I = std::get_if<Interval>(&D.shape())) {
    const int n = spectral_detail::intervals_along(I->b - I->a, h) - 1;
    G.nodes_per_axis = {n};
    if (p.is_gaussian()) {
      G.storage = GeneratorMatrix::Storage::tridiagonal;
      G.diag = Eigen::VectorXd::Constant(n, -2.0 / (h * h));
      G.sub = Eigen::VectorXd::Constant(n - 1, 1.0 / (h * h));
      return G;
    }
    const double A = levy_density(1.0, p);
    const double c = spectral_detail::near_coefficient(1, alpha, A, h) / (h * h);
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int k = 1; k < n; ++k) {
      const double a = (k == 1) ? 1.0 : k - 0.5;
      w[static_cast<std::size_t>(k)] = A / alpha * std::pow(h, -alpha) * (std::pow(a, -alpha) - std::pow(k + 0.5, -alpha));
    }
    const double tail = levy_tail_mass(h, p);
    G.storage = GeneratorMatrix::Storage::dense;
    G.matrix.resize(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) G.matrix(i, j) = (i == j) ? -2.0 * c - tail : w[static_cast<std::size_t>(std::abs(i - j))];
    for (int i = 0; i + 1 < n; ++i) {
      G.matrix(i, i + 1) += c;
      G.matrix(i + 1, i) += c;
    }
    return G;
  }

  const auto* B = std::get_if<Box>(&D.shape());
  if (B == nullptr || d != 2) throw std::domain_error("assemble_generator: supported domains are intervals and 2D boxes");
  const int nx = spectral_detail::intervals_along(B->hi[0] - B->lo[0], h) - 1;
  const int ny = spectral_detail::intervals_along(B->hi[1] - B->lo[1], h) - 1;
  G.nodes_per_axis = {nx, ny};
  G.storage = GeneratorMatrix::Storage::box_kernel;
  G.kernel.assign(static_cast<std::size_t>(nx) * ny, 0.0);
  double c = 1.0 / (h * h);
  G.kernel[0] = -4.0 / (h * h);
  if (!p.is_gaussian()) {
    const double A = levy_density(1.0, p);
    c = spectral_detail::near_coefficient(2, alpha, A, h) / (h * h);
    for (int n = 0; n < ny; ++n)
      for (int m = 0; m < nx; ++m)
        G.kernel[static_cast<std::size_t>(n) * nx + m] = A * std::pow(h, -alpha) * spectral_detail::cell_weight_2d(m, n, alpha);
    G.kernel[0] = -4.0 * c - levy_tail_mass(h, p);
  }
  G.kernel[1] += c;
  G.kernel[static_cast<std::size_t>(nx)] += c;
  return G;
}

struct Spectrum {
  std::vector<double> eigenvalues;
  double grid_h = 0.0;
  Domain domain = Domain::interval(0.0, 1.0);
  double alpha = 2.0;
  int truncation_count = 0;
};

namespace spectral_detail {

inline Eigen::VectorXd solve_symmetric(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    es.compute(m, Eigen::ComputeEigenvectors);
    const Eigen::VectorXd res =
        (m * es.eigenvectors() - es.eigenvectors() * es.eigenvalues().asDiagonal()).colwise().norm().transpose();
    throw ConvergenceError("eigen_spectrum: eigensolver did not converge, max residual " + std::to_string(res.maxCoeff()),
                           res.maxCoeff());
  }
  return es.eigenvalues();
}

inline Eigen::VectorXd solve_tridiagonal(const Eigen::VectorXd& diag, const Eigen::VectorXd& sub) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw ConvergenceError("eigen_spectrum: tridiagonal QL did not converge", 0.0);
  return es.eigenvalues();
}

// Reflection-symmetric basis on n points: pairs (i, n-1-i) with parity sign, plus the middle
// point in the even sector when n is odd.
struct Member {
  int index;
  double coef;
};
using ParityBasis = std::vector<std::vector<Member>>;

inline ParityBasis parity_basis(int n, bool odd) {
  ParityBasis b;
  const double r = std::sqrt(0.5);
  for (int i = 0; i < n - 1 - i; ++i) b.push_back({{i, r}, {n - 1 - i, odd ? -r : r}});
  if (n % 2 == 1 && !odd) b.push_back({{n / 2, 1.0}});
  return b;
}

// -G restricted to one parity sector of a box kernel
inline Eigen::MatrixXd sector_matrix(const GeneratorMatrix& G, const ParityBasis& bx, const ParityBasis& by) {
  const auto mx = static_cast<Eigen::Index>(bx.size()), my = static_cast<Eigen::Index>(by.size());
  Eigen::MatrixXd m(mx * my, mx * my);
  for (Eigen::Index b = 0; b < my; ++b)
    for (Eigen::Index a = 0; a < mx; ++a)
      for (Eigen::Index dd = 0; dd < my; ++dd)
        for (Eigen::Index c = 0; c < mx; ++c) {
          if (b * mx + a > dd * mx + c) continue;
          double v = 0.0;
          for (const auto& i : bx[static_cast<std::size_t>(a)])
            for (const auto& i2 : bx[static_cast<std::size_t>(c)])
              for (const auto& j : by[static_cast<std::size_t>(b)])
                for (const auto& j2 : by[static_cast<std::size_t>(dd)])
                  v += i.coef * i2.coef * j.coef * j2.coef * G.box_entry(i.index, j.index, i2.index, j2.index);
          m(b * mx + a, dd * mx + c) = -v;
          m(dd * mx + c, b * mx + a) = -v;
        }
  return m;
}

}  // namespace spectral_detail

/// The k smallest eigenvalues of -G. Boxes are split exactly into the four reflection-parity
/// sectors; at alpha = 2 the box operator is a Kronecker sum and its spectrum is formed from
/// the two one-dimensional spectra.
inline Spectrum eigen_spectrum(const GeneratorMatrix& G, int k) {
  if (k < 1 || k > G.size()) throw std::domain_error("eigen_spectrum: need 1 <= k <= matrix size");
  std::vector<double> all;
  switch (G.storage) {
    case GeneratorMatrix::Storage::tridiagonal: {
      const Eigen::VectorXd ev = spectral_detail::solve_tridiagonal(-G.diag, -G.sub);
      all.assign(ev.data(), ev.data() + ev.size());
      break;
    }
    case GeneratorMatrix::Storage::dense: {
      const Eigen::VectorXd ev = spectral_detail::solve_symmetric(-G.matrix);
      all.assign(ev.data(), ev.data() + ev.size());
      break;
    }
    case GeneratorMatrix::Storage::box_kernel: {
      const int nx = G.nodes_per_axis[0], ny = G.nodes_per_axis[1];
      if (G.alpha == 2.0) {
        const double h2 = G.grid_h * G.grid_h;
        const Eigen::VectorXd mx = spectral_detail::solve_tridiagonal(Eigen::VectorXd::Constant(nx, 2.0 / h2),
                                                                      Eigen::VectorXd::Constant(nx - 1, -1.0 / h2));
        const Eigen::VectorXd my = spectral_detail::solve_tridiagonal(Eigen::VectorXd::Constant(ny, 2.0 / h2),
                                                                      Eigen::VectorXd::Constant(ny - 1, -1.0 / h2));
        all.reserve(static_cast<std::size_t>(nx) * ny);
        for (Eigen::Index j = 0; j < my.size(); ++j)
          for (Eigen::Index i = 0; i < mx.size(); ++i) {
            if (mx(i) + my(j) > mx(std::min<Eigen::Index>(k, nx) - 1) + my(std::min<Eigen::Index>(k, ny) - 1)) break;
            all.push_back(mx(i) + my(j));
          }
      } else {
        for (bool ox : {false, true})
          for (bool oy : {false, true}) {
            const auto bx = spectral_detail::parity_basis(nx, ox), by = spectral_detail::parity_basis(ny, oy);
            if (bx.empty() || by.empty()) continue;
            const Eigen::VectorXd ev = spectral_detail::solve_symmetric(spectral_detail::sector_matrix(G, bx, by));
            all.insert(all.end(), ev.data(), ev.data() + ev.size());
          }
      }
      break;
    }
  }
  std::sort(all.begin(), all.end());
  Spectrum s;
  s.grid_h = G.grid_h;
  s.domain = G.domain;
  s.alpha = G.alpha;
  s.truncation_count = k;
  s.eigenvalues.assign(all.begin(), all.begin() + k);
  if (!(s.eigenvalues.front() > 0.0)) throw ConvergenceError("eigen_spectrum: nonpositive eigenvalue", s.eigenvalues.front());
  if (k > 1 && !(s.eigenvalues[1] > s.eigenvalues[0] * (1.0 + 1e-10)))
    throw ConvergenceError("eigen_spectrum: lowest eigenvalue is not simple", s.eigenvalues[1] - s.eigenvalues[0]);
  return s;
}

inline Spectrum eigen_spectrum(const GeneratorMatrix& G) { return eigen_spectrum(G, static_cast<int>(G.size())); }

/// Bound on the discarded part of the trace, e^{-lambda_k t} k / (lambda_k t).
inline double trace_truncation_bound(const Spectrum& s, double t) {
  const double lk = s.eigenvalues.back();
  return std::exp(-lk * t) * static_cast<double>(s.eigenvalues.size()) / (lk * t);
}

/// Smallest t at which the truncation bound falls to tol.
inline double trace_t_min(const Spectrum& s, double tol) {
  double lo = 1e-12, hi = 1.0;
  while (trace_truncation_bound(s, hi) > tol) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = std::sqrt(lo * hi);
    (trace_truncation_bound(s, mid) > tol ? lo : hi) = mid;
  }
  return hi;
}

struct TraceValue {
  double value = 0.0;
  double truncation_bound = 0.0;
};

/// sum_{n <= k} e^{-lambda_n t}; refuses t below t_min(tol), naming a sufficient k.
inline TraceValue trace_from_spectrum(const Spectrum& s, double t, double tol = 1e-8) {
  if (!(t > 0.0)) throw std::domain_error("trace_from_spectrum: t must be positive");
  const double bound = trace_truncation_bound(s, t);
  if (bound > tol) {
    // Weyl growth lambda_n ~ (n Gamma(d/alpha+1) / (C1 |D|))^{alpha/d} to estimate the k needed
    const StableParams p{s.domain.dim(), s.alpha};
    const double scale = c1_constant(p) * s.domain.measures().volume / std::tgamma(p.d / p.alpha + 1.0);
    double k = static_cast<double>(s.eigenvalues.size());
    for (int it = 0; it < 200; ++it) {
      const double lk = std::pow(k / scale, p.alpha / p.d);
      if (std::exp(-lk * t) * k / (lk * t) <= tol) break;
      k *= 1.25;
    }
    throw std::domain_error("trace_from_spectrum: t = " + std::to_string(t) + " is below t_min = " +
                            std::to_string(trace_t_min(s, tol)) + "; roughly k = " +
                            std::to_string(static_cast<long>(std::ceil(k))) + " eigenvalues are needed");
  }
  CompensatedSum sum;
  for (double l : s.eigenvalues) sum.add(std::exp(-l * t));
  return {sum.value(), bound};
}

/// N(lam) = #{n : lambda_n <= lam}.
inline long counting_function(const Spectrum& s, double lam) {
  if (lam > s.eigenvalues.back()) throw std::domain_error("counting_function: lam beyond the computed spectrum");
  return static_cast<long>(std::upper_bound(s.eigenvalues.begin(), s.eigenvalues.end(), lam) - s.eigenvalues.begin());
}

/// N(lam) Gamma(d/alpha + 1) / (C1 |D| lam^{d/alpha}); tends to 1 as lam grows.
inline double karamata_ratio(const Spectrum& s, double lam) {
  const StableParams p{s.domain.dim(), s.alpha};
  const double g = p.d / p.alpha;
  return static_cast<double>(counting_function(s, lam)) * std::tgamma(g + 1.0) /
         (c1_constant(p) * s.domain.measures().volume * std::pow(lam, g));
}

/// Least-squares slope of log N(lambda_n) against log lambda_n over the top fraction of the spectrum.
inline double counting_slope(const Spectrum& s, double upper_fraction = 0.5) {
  const std::size_t k = s.eigenvalues.size();
  const auto first = static_cast<std::size_t>(std::floor((1.0 - upper_fraction) * static_cast<double>(k)));
  double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
  for (std::size_t i = std::max<std::size_t>(first, 1); i < k; ++i) {
    const double x = std::log(s.eigenvalues[i]);
    const double y = std::log(static_cast<double>(counting_function(s, s.eigenvalues[i])));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    n += 1;
  }
  if (n < 3) throw std::domain_error("counting_slope: too few eigenvalues");
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct GridConvergence {
  double lambda1_h = 0.0;
  double lambda1_half = 0.0;
  double relative_change = 0.0;
  bool flagged = false;  ///< change of 2% or more
};

inline GridConvergence lambda1_convergence(const Domain& D, double h, double alpha) {
  GridConvergence g;
  g.lambda1_h = eigen_spectrum(assemble_generator(D, h, alpha), 1).eigenvalues[0];
  g.lambda1_half = eigen_spectrum(assemble_generator(D, 0.5 * h, alpha), 1).eigenvalues[0];
  g.relative_change = std::abs(g.lambda1_half - g.lambda1_h) / g.lambda1_half;
  g.flagged = g.relative_change >= 0.02;
  return g;
}

struct RefinedTrace {
  double value = 0.0;  ///< at spacing h/2
  double coarse_value = 0.0;
  double truncation_bound = 0.0;
  double discretization_error = 0.0;  ///< |Z_h - Z_{h/2}|
};

/// Spectral trace at h and h/2 with all eigenvalues retained.
inline RefinedTrace refined_trace(const Domain& D, double h, double alpha, double t, double tol = 1e-8) {
  const TraceValue c = trace_from_spectrum(eigen_spectrum(assemble_generator(D, h, alpha)), t, tol);
  const TraceValue f = trace_from_spectrum(eigen_spectrum(assemble_generator(D, 0.5 * h, alpha)), t, tol);
  return {f.value, c.value, f.truncation_bound, std::abs(f.value - c.value)};
}

}  // namespace stabletrace
