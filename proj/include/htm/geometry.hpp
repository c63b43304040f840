#pragma once

#include <cmath>

namespace htm {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

/// Axis-aligned rectangle given by center and half extents.
struct Rect {
  double cx = 0.0;
  double cy = 0.0;
  double half_w = 0.0;
  double half_h = 0.0;

  double x0() const { return cx - half_w; }
  double x1() const { return cx + half_w; }
  double y0() const { return cy - half_h; }
  double y1() const { return cy + half_h; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

double point_rect_distance(Vec2 p, const Rect& r);
double point_segment_distance(Vec2 p, Vec2 a, Vec2 b);
bool segment_intersects_rect(Vec2 a, Vec2 b, const Rect& r);
/// Minimum distance between segment [a,b] and the closed rectangle.
double segment_rect_distance(Vec2 a, Vec2 b, const Rect& r);

/// Area of disc(center, radius) intersected with the rectangle [x0,x1]x[y0,y1].
double disc_rect_area(Vec2 center, double radius, double x0, double x1,
                      double y0, double y1);

/// Area of the overlap of two axis-aligned boxes.
double box_overlap_area(double ax0, double ax1, double ay0, double ay1,
                        double bx0, double bx1, double by0, double by1);

}  // namespace htm
