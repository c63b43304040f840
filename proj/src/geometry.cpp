#include "htm/geometry.hpp"

#include <algorithm>
#include <vector>

namespace htm {

double point_rect_distance(Vec2 p, const Rect& r) {
  const double dx = std::max({r.x0() - p.x, 0.0, p.x - r.x1()});
  const double dy = std::max({r.y0() - p.y, 0.0, p.y - r.y1()});
  return std::hypot(dx, dy);
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 == 0.0) return distance(p, a);
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return distance(p, a + t * ab);
}

bool segment_intersects_rect(Vec2 a, Vec2 b, const Rect& r) {
  // Liang-Barsky clipping of the parametric segment against the box.
  double t0 = 0.0;
  double t1 = 1.0;
  const double d[2] = {b.x - a.x, b.y - a.y};
  const double lo[2] = {r.x0() - a.x, r.y0() - a.y};
  const double hi[2] = {r.x1() - a.x, r.y1() - a.y};
  for (int k = 0; k < 2; ++k) {
    if (d[k] == 0.0) {
      if (lo[k] > 0.0 || hi[k] < 0.0) return false;
      continue;
    }
    double ta = lo[k] / d[k];
    double tb = hi[k] / d[k];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

double segment_rect_distance(Vec2 a, Vec2 b, const Rect& r) {
  if (segment_intersects_rect(a, b, r)) return 0.0;
  double best = std::min(point_rect_distance(a, r), point_rect_distance(b, r));
  const Vec2 corners[4] = {
      {r.x0(), r.y0()}, {r.x1(), r.y0()}, {r.x0(), r.y1()}, {r.x1(), r.y1()}};
  for (const Vec2& c : corners) {
    best = std::min(best, point_segment_distance(c, a, b));
  }
  return best;
}

namespace {

// Antiderivative of sqrt(R^2 - u^2).
double half_chord_integral(double u, double radius) {
  const double r2 = radius * radius;
  const double s = std::clamp(u / radius, -1.0, 1.0);
  const double root = std::sqrt(std::max(0.0, r2 - u * u));
  return 0.5 * (u * root + r2 * std::asin(s));
}

}  // namespace

double disc_rect_area(Vec2 center, double radius, double x0, double x1,
                      double y0, double y1) {
  if (radius <= 0.0 || x1 <= x0 || y1 <= y0) return 0.0;
  const double ua = std::max(x0 - center.x, -radius);
  const double ub = std::min(x1 - center.x, radius);
  if (ub <= ua) return 0.0;

  // The integrand (clipped chord length) has a fixed algebraic form between
  // consecutive breakpoints.
  std::vector<double> breaks = {ua, ub};
  for (double y : {y0, y1}) {
    const double d = y - center.y;
    if (std::abs(d) < radius) {
      const double u = std::sqrt(radius * radius - d * d);
      for (double v : {-u, u}) {
        if (v > ua && v < ub) breaks.push_back(v);
      }
    }
  }
  std::sort(breaks.begin(), breaks.end());

  double area = 0.0;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double a = breaks[k];
    const double b = breaks[k + 1];
    if (b <= a) continue;
    const double mid = 0.5 * (a + b);
    const double hh = std::sqrt(std::max(0.0, radius * radius - mid * mid));
    const bool upper_is_rect = y1 <= center.y + hh;
    const bool lower_is_rect = y0 >= center.y - hh;
    const double upper = upper_is_rect ? y1 : center.y + hh;
    const double lower = lower_is_rect ? y0 : center.y - hh;
    if (upper <= lower) continue;
    const double c0 = (upper_is_rect ? y1 : center.y) - (lower_is_rect ? y0 : center.y);
    const double c1 = (upper_is_rect ? 0.0 : 1.0) + (lower_is_rect ? 0.0 : 1.0);
    area += c0 * (b - a);
    if (c1 != 0.0) {
      area += c1 * (half_chord_integral(b, radius) - half_chord_integral(a, radius));
    }
  }
  return std::max(0.0, area);
}

double box_overlap_area(double ax0, double ax1, double ay0, double ay1,
                        double bx0, double bx1, double by0, double by1) {
  const double w = std::min(ax1, bx1) - std::max(ax0, bx0);
  const double h = std::min(ay1, by1) - std::max(ay0, by0);
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

}  // namespace htm
