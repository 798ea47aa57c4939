#pragma once

// Domains with closed-form distance functions, measures and parallel sets.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "stabletrace/core.hpp"
#include "stabletrace/rng.hpp"
#include "stabletrace/stable_kernel.hpp"

namespace stabletrace {

struct Ball {
  Vec center;
  double radius = 1.0;
};
struct Annulus {
  Vec center;
  double r_inner = 1.0;
  double r_outer = 2.0;
};
struct Box {
  Vec lo;
  Vec hi;
};
/// {x : x[axis] > offset}
struct HalfSpace {
  int axis = 0;
  double offset = 0.0;
};
struct Interval {
  double a = 0.0;
  double b = 1.0;
};
/// The whole space R^d; nothing ever exits.
struct WholeSpace {};

struct Measures {
  double volume = 0.0;
  double surface_area = 0.0;
  double smoothness_radius = 0.0;
  bool r_smooth = false;
};

struct ParallelSetReport {
  double q = 0.0;
  double boundary_area_q = 0.0;
  double volume_q = 0.0;
};

class Domain {
 public:
  using Shape = std::variant<Ball, Annulus, Box, HalfSpace, Interval, WholeSpace>;

  static Domain ball(Vec center, double radius) {
    if (!(radius > 0.0)) throw std::domain_error("ball: radius must be positive");
    return Domain(center.dim(), Ball{center, radius});
  }
  static Domain annulus(Vec center, double r_inner, double r_outer) {
    if (!(r_inner > 0.0 && r_inner < r_outer)) throw std::domain_error("annulus: need 0 < r_inner < r_outer");
    if (center.dim() < 2) throw std::domain_error("annulus: dimension must be at least 2");
    return Domain(center.dim(), Annulus{center, r_inner, r_outer});
  }
  static Domain box(Vec lo, Vec hi) {
    if (lo.dim() != hi.dim()) throw std::domain_error("box: corner dimensions differ");
    for (int i = 0; i < lo.dim(); ++i)
      if (!(lo[i] < hi[i])) throw std::domain_error("box: need lo < hi componentwise");
    return Domain(lo.dim(), Box{lo, hi});
  }
  static Domain half_space(int d, int axis = 0, double offset = 0.0) {
    if (axis < 0 || axis >= d) throw std::domain_error("half_space: axis out of range");
    return Domain(d, HalfSpace{axis, offset});
  }
  static Domain interval(double a, double b) {
    if (!(a < b)) throw std::domain_error("interval: need a < b");
    return Domain(1, Interval{a, b});
  }
  static Domain whole_space(int d) { return Domain(d, WholeSpace{}); }

  int dim() const noexcept { return d_; }
  const Shape& shape() const noexcept { return shape_; }
  bool bounded() const noexcept {
    return !std::holds_alternative<HalfSpace>(shape_) && !std::holds_alternative<WholeSpace>(shape_);
  }
  std::string name() const {
    return std::visit(
        [](const auto& s) -> std::string {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Ball>) return "ball";
          else if constexpr (std::is_same_v<S, Annulus>) return "annulus";
          else if constexpr (std::is_same_v<S, Box>) return "box";
          else if constexpr (std::is_same_v<S, HalfSpace>) return "half_space";
          else if constexpr (std::is_same_v<S, Interval>) return "interval";
          else return "whole_space";
        },
        shape_);
  }

  /// Signed distance: positive inside (= distance to the boundary), negative outside.
  double signed_distance(const Vec& x) const {
    return std::visit(
        [&](const auto& s) -> double {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Ball>) {
            return s.radius - (x - s.center).norm();
          } else if constexpr (std::is_same_v<S, Annulus>) {
            const double r = (x - s.center).norm();
            return std::min(r - s.r_inner, s.r_outer - r);
          } else if constexpr (std::is_same_v<S, Box>) {
            double inside = std::numeric_limits<double>::infinity();
            double out2 = 0.0;
            bool outside = false;
            for (int i = 0; i < d_; ++i) {
              const double m = std::min(x[i] - s.lo[i], s.hi[i] - x[i]);
              inside = std::min(inside, m);
              if (m < 0.0) {
                outside = true;
                out2 += m * m;
              }
            }
            return outside ? -std::sqrt(out2) : inside;
          } else if constexpr (std::is_same_v<S, HalfSpace>) {
            return x[s.axis] - s.offset;
          } else if constexpr (std::is_same_v<S, Interval>) {
            return std::min(x[0] - s.a, s.b - x[0]);
          } else {
            return std::numeric_limits<double>::infinity();
          }
        },
        shape_);
  }

  bool contains(const Vec& x) const { return signed_distance(x) > 0.0; }

  /// delta_D(x) for x in D; 0 outside by convention.
  double distance_to_boundary(const Vec& x) const { return std::max(0.0, signed_distance(x)); }

  Measures measures() const {
    return std::visit(
        [&](const auto& s) -> Measures {
          using S = std::decay_t<decltype(s)>;
          const double wd = unit_sphere_area(d_);
          if constexpr (std::is_same_v<S, Ball>) {
            return {wd * std::pow(s.radius, d_) / d_, wd * std::pow(s.radius, d_ - 1), s.radius, true};
          } else if constexpr (std::is_same_v<S, Annulus>) {
            return {wd * (std::pow(s.r_outer, d_) - std::pow(s.r_inner, d_)) / d_,
                    wd * (std::pow(s.r_outer, d_ - 1) + std::pow(s.r_inner, d_ - 1)),
                    std::min(s.r_inner, 0.5 * (s.r_outer - s.r_inner)), true};
          } else if constexpr (std::is_same_v<S, Box>) {
            Measures m;
            m.volume = 1.0;
            for (int i = 0; i < d_; ++i) m.volume *= s.hi[i] - s.lo[i];
            for (int i = 0; i < d_; ++i) m.surface_area += 2.0 * m.volume / (s.hi[i] - s.lo[i]);
            return m;  // corners: not R-smooth
          } else if constexpr (std::is_same_v<S, Interval>) {
            return {s.b - s.a, 2.0, 0.5 * (s.b - s.a), true};
          } else {
            throw std::domain_error("measures: unbounded domain has no finite volume");
          }
        },
        shape_);
  }

  /// D_q = {x in D : delta_D(x) > q}.
  ParallelSetReport parallel_set(double q) const {
    if (!(q >= 0.0)) throw std::domain_error("parallel_set: q must be nonnegative");
    return std::visit(
        [&](const auto& s) -> ParallelSetReport {
          using S = std::decay_t<decltype(s)>;
          const double wd = unit_sphere_area(d_);
          if constexpr (std::is_same_v<S, Ball>) {
            if (!(q < s.radius)) throw std::domain_error("parallel_set: q must be below the radius");
            const double r = s.radius - q;
            return {q, wd * std::pow(r, d_ - 1), wd * std::pow(r, d_) / d_};
          } else if constexpr (std::is_same_v<S, Annulus>) {
            const double half = 0.5 * (s.r_outer - s.r_inner);
            if (!(q < half)) throw std::domain_error("parallel_set: q must be below half the shell width");
            const double a = s.r_inner + q, b = s.r_outer - q;
            return {q, wd * (std::pow(a, d_ - 1) + std::pow(b, d_ - 1)), wd * (std::pow(b, d_) - std::pow(a, d_)) / d_};
          } else if constexpr (std::is_same_v<S, Box>) {
            ParallelSetReport r{q, 0.0, 1.0};
            for (int i = 0; i < d_; ++i) {
              const double w = s.hi[i] - s.lo[i] - 2.0 * q;
              if (!(w > 0.0)) throw std::domain_error("parallel_set: q must be below half the shortest side");
              r.volume_q *= w;
            }
            for (int i = 0; i < d_; ++i) r.boundary_area_q += 2.0 * r.volume_q / (s.hi[i] - s.lo[i] - 2.0 * q);
            return r;
          } else if constexpr (std::is_same_v<S, Interval>) {
            if (!(2.0 * q < s.b - s.a)) throw std::domain_error("parallel_set: q must be below half the length");
            return {q, 2.0, s.b - s.a - 2.0 * q};
          } else {
            throw std::domain_error("parallel_set: unbounded domain");
          }
        },
        shape_);
  }

  /// Smallest radius of curvature of the boundary (infinite for flat boundaries).
  double curvature_radius() const {
    if (const auto* b = std::get_if<Ball>(&shape_)) return b->radius;
    if (const auto* a = std::get_if<Annulus>(&shape_)) return a->r_inner;
    return std::numeric_limits<double>::infinity();
  }

  /// Largest q for which D_q is nonempty.
  double inradius() const {
    return std::visit(
        [&](const auto& s) -> double {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Ball>) return s.radius;
          else if constexpr (std::is_same_v<S, Annulus>) return 0.5 * (s.r_outer - s.r_inner);
          else if constexpr (std::is_same_v<S, Box>) {
            double m = std::numeric_limits<double>::infinity();
            for (int i = 0; i < d_; ++i) m = std::min(m, 0.5 * (s.hi[i] - s.lo[i]));
            return m;
          } else if constexpr (std::is_same_v<S, Interval>) return 0.5 * (s.b - s.a);
          else return std::numeric_limits<double>::infinity();
        },
        shape_);
  }

  /// Uniform point on the level set {delta_D = q} (surface measure).
  Vec sample_level_set(double q, RngStream& rng) const {
    return std::visit(
        [&](const auto& s) -> Vec {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Ball>) {
            return s.center + sample_unit_vector(d_, rng) * (s.radius - q);
          } else if constexpr (std::is_same_v<S, Annulus>) {
            const double a = s.r_inner + q, b = s.r_outer - q;
            const double wa = std::pow(a, d_ - 1), wb = std::pow(b, d_ - 1);
            const double r = (rng.uniform() * (wa + wb) < wa) ? a : b;
            return s.center + sample_unit_vector(d_, rng) * r;
          } else if constexpr (std::is_same_v<S, Box>) {
            // faces of the shrunken box, chosen by area
            Vec lo = s.lo, hi = s.hi;
            double vol = 1.0;
            for (int i = 0; i < d_; ++i) {
              lo[i] += q;
              hi[i] -= q;
              vol *= hi[i] - lo[i];
            }
            double total = 0.0;
            for (int i = 0; i < d_; ++i) total += 2.0 * vol / (hi[i] - lo[i]);
            double pick = rng.uniform() * total;
            int face = d_ - 1;
            for (int i = 0; i < d_; ++i) {
              const double area = 2.0 * vol / (hi[i] - lo[i]);
              if (pick < area) {
                face = i;
                break;
              }
              pick -= area;
            }
            Vec x(d_);
            for (int i = 0; i < d_; ++i) x[i] = lo[i] + rng.uniform() * (hi[i] - lo[i]);
            x[face] = (rng.uniform() < 0.5) ? lo[face] : hi[face];
            return x;
          } else if constexpr (std::is_same_v<S, Interval>) {
            Vec x(1);
            x[0] = (rng.uniform() < 0.5) ? s.a + q : s.b - q;
            return x;
          } else {
            throw std::domain_error("sample_level_set: unbounded domain");
          }
        },
        shape_);
  }

  /// Nearest boundary point (used to report the exit point of continuous paths).
  Vec project_to_boundary(const Vec& x) const {
    return std::visit(
        [&](const auto& s) -> Vec {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Ball>) {
            const Vec w = x - s.center;
            const double n = w.norm();
            return n > 0 ? s.center + w * (s.radius / n) : s.center + Vec::axis(d_, 0, s.radius);
          } else if constexpr (std::is_same_v<S, Annulus>) {
            const Vec w = x - s.center;
            const double n = w.norm();
            const double r = (std::abs(n - s.r_inner) < std::abs(n - s.r_outer)) ? s.r_inner : s.r_outer;
            return n > 0 ? s.center + w * (r / n) : s.center + Vec::axis(d_, 0, s.r_inner);
          } else if constexpr (std::is_same_v<S, Box>) {
            Vec y = x;
            bool outside = false;
            for (int i = 0; i < d_; ++i) {
              if (y[i] < s.lo[i]) { y[i] = s.lo[i]; outside = true; }
              if (y[i] > s.hi[i]) { y[i] = s.hi[i]; outside = true; }
            }
            if (outside) return y;
            int face = 0;
            double best = std::numeric_limits<double>::infinity();
            bool low = true;
            for (int i = 0; i < d_; ++i) {
              if (x[i] - s.lo[i] < best) { best = x[i] - s.lo[i]; face = i; low = true; }
              if (s.hi[i] - x[i] < best) { best = s.hi[i] - x[i]; face = i; low = false; }
            }
            y[face] = low ? s.lo[face] : s.hi[face];
            return y;
          } else if constexpr (std::is_same_v<S, HalfSpace>) {
            Vec y = x;
            y[s.axis] = s.offset;
            return y;
          } else if constexpr (std::is_same_v<S, Interval>) {
            Vec y = x;
            y[0] = (std::abs(x[0] - s.a) < std::abs(x[0] - s.b)) ? s.a : s.b;
            return y;
          } else {
            return x;
          }
        },
        shape_);
  }

  /// Probability that a Brownian bridge with per-coordinate variance v, joining two interior points
  /// a and b, leaves the domain. Exact for half-spaces; for curved or cornered boundaries it uses
  /// the tangent half-spaces of the nearest faces, accurate when v is small against the curvature
  /// radius.
  double bridge_exit_probability(const Vec& a, const Vec& b, double v) const {
    double stay = 1.0;
    for (const auto& f : faces(a, b)) stay *= 1.0 - through(f, v);
    return 1.0 - stay;
  }

  /// Mirror image of b in the tangent plane of one face, the face drawn (by u in [0,1)) with
  /// probability proportional to its crossing probability. A bridge from a to the image crosses
  /// surely and, up to its first hit, has the law of the a -> b bridge conditioned to cross.
  Vec reflect_for_crossing(const Vec& a, const Vec& b, double v, double u) const {
    const auto fs = faces(a, b);
    double total = 0.0;
    for (const auto& f : fs) total += through(f, v);
    if (!(total > 0.0)) return b;
    double acc = 0.0;
    for (const auto& f : fs) {
      acc += through(f, v);
      if (u * total < acc) return b + f.normal * (2.0 * f.db);
    }
    return b + fs.back().normal * (2.0 * fs.back().db);
  }

  /// The domain mapped by x -> s x (used for scaling identities).
  Domain scaled(double s) const {
    return std::visit(
        [&](const auto& sh) -> Domain {
          using S = std::decay_t<decltype(sh)>;
          if constexpr (std::is_same_v<S, Ball>) return ball(sh.center * s, sh.radius * s);
          else if constexpr (std::is_same_v<S, Annulus>) return annulus(sh.center * s, sh.r_inner * s, sh.r_outer * s);
          else if constexpr (std::is_same_v<S, Box>) return box(sh.lo * s, sh.hi * s);
          else if constexpr (std::is_same_v<S, HalfSpace>) return half_space(d_, sh.axis, sh.offset * s);
          else if constexpr (std::is_same_v<S, Interval>) return interval(sh.a * s, sh.b * s);
          else return whole_space(d_);
        },
        shape_);
  }

 private:
  Domain(int d, Shape s) : d_(d), shape_(std::move(s)) {}

  // distances of a and b to one flat or tangent face, with its outward normal
  struct Face {
    double da;
    double db;
    Vec normal;
  };

  static double through(const Face& f, double v) {
    return (f.da <= 0 || f.db <= 0) ? 1.0 : std::exp(-2.0 * f.da * f.db / v);
  }

  std::vector<Face> faces(const Vec& a, const Vec& b) const {
    std::vector<Face> out;
    auto radial = [&](const Vec& c) {
      const Vec r = b - c;
      const double n = r.norm();
      return n > 0.0 ? r * (1.0 / n) : Vec::axis(d_, 0);
    };
    std::visit(
        [&](const auto& s) {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Ball>) {
            out.push_back({s.radius - (a - s.center).norm(), s.radius - (b - s.center).norm(), radial(s.center)});
          } else if constexpr (std::is_same_v<S, Annulus>) {
            const double ra = (a - s.center).norm(), rb = (b - s.center).norm();
            const Vec n = radial(s.center);
            out.push_back({ra - s.r_inner, rb - s.r_inner, n * -1.0});
            out.push_back({s.r_outer - ra, s.r_outer - rb, n});
          } else if constexpr (std::is_same_v<S, Box>) {
            for (int i = 0; i < d_; ++i) {
              out.push_back({a[i] - s.lo[i], b[i] - s.lo[i], Vec::axis(d_, i) * -1.0});
              out.push_back({s.hi[i] - a[i], s.hi[i] - b[i], Vec::axis(d_, i)});
            }
          } else if constexpr (std::is_same_v<S, HalfSpace>) {
            out.push_back({a[s.axis] - s.offset, b[s.axis] - s.offset, Vec::axis(d_, s.axis) * -1.0});
          } else if constexpr (std::is_same_v<S, Interval>) {
            out.push_back({a[0] - s.a, b[0] - s.a, Vec::axis(1, 0) * -1.0});
            out.push_back({s.b - a[0], s.b - b[0], Vec::axis(1, 0)});
          }
        },
        shape_);
    return out;
  }

  int d_ = 1;
  Shape shape_;
};

}  // namespace stabletrace
