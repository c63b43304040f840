#include "doctest.h"
#include "htm/config.hpp"
#include "htm/errors.hpp"
#include "htm/render.hpp"

using namespace htm;

namespace {

Matrix plan_rows(const World& w, std::initializer_list<Vec2> points) {
  Matrix m(static_cast<Eigen::Index>(points.size()), 2);
  Eigen::Index k = 0;
  for (Vec2 p : points) m.row(k++) = row_vector(w.observe_position(p).data);
  return m;
}

}  // namespace

TEST_SUITE("render") {

TEST_CASE("one panel per plan node") {
  const World w;
  const Context c = w.generate_context(42);
  const std::string one = render_plan(w, plan_rows(w, {{0.5, 0.5}}), c, {2.0, 2.0}, RenderOptions{32});
  const std::string header = "P6\n32 32\n255\n";
  CHECK(one.substr(0, header.size()) == header);
  CHECK(one.size() == header.size() + 32 * 32 * 3);

  const std::string three =
      render_plan(w, plan_rows(w, {{0.5, 0.5}, {1.0, 0.6}, {2.0, 2.0}}), c, {2.0, 2.0}, RenderOptions{32});
  const std::string header3 = "P6\n96 32\n255\n";
  CHECK(three.substr(0, header3.size()) == header3);
  CHECK(three.size() == header3.size() + 96 * 32 * 3);
}

TEST_CASE("agent, wall and goal pixels carry their colors") {
  const World w;
  Context c;
  c.walls.push_back(Rect{1.4, 1.4, 0.2, 0.8});
  const std::string img = render_plan(w, plan_rows(w, {{0.7, 0.7}}), c, {2.1, 2.1}, RenderOptions{28});
  const std::size_t base = std::string("P6\n28 28\n255\n").size();
  const auto pixel = [&](double x, double y) {
    const int px = static_cast<int>(x / 0.1);
    const int py = static_cast<int>((2.8 - y) / 0.1);
    const std::size_t at = base + (static_cast<std::size_t>(py) * 28 + px) * 3;
    return std::array<int, 3>{static_cast<unsigned char>(img[at]), static_cast<unsigned char>(img[at + 1]),
                              static_cast<unsigned char>(img[at + 2])};
  };
  CHECK(pixel(0.7, 0.7) == std::array<int, 3>{240, 240, 200});
  CHECK(pixel(1.4, 1.4) == std::array<int, 3>{30, 30, 40});
  CHECK(pixel(0.3, 2.5) == std::array<int, 3>{150, 150, 150});
  CHECK(pixel(2.15, 2.15) == std::array<int, 3>{220, 40, 40});
}

TEST_CASE("golden bytes for a fixed fixture") {
  const World w;
  const Context c = w.generate_context(42);
  const std::string img = render_plan(w, plan_rows(w, {{0.4, 0.4}, {0.9, 2.3}, {2.4, 2.4}}), c, {2.4, 2.4});
  CHECK(hex64(fnv1a64(img)) == "6253de5a775c8d27");
  CHECK(img == render_plan(w, plan_rows(w, {{0.4, 0.4}, {0.9, 2.3}, {2.4, 2.4}}), c, {2.4, 2.4}));
}

TEST_CASE("render rejects empty plans and tiny panels") {
  const World w;
  const Context c;
  CHECK_THROWS_AS(render_plan(w, Matrix(0, 2), c, {1.0, 1.0}), UsageError);
  CHECK_THROWS_AS(render_plan(w, plan_rows(w, {{1.0, 1.0}}), c, {1.0, 1.0}, RenderOptions{2}), UsageError);
}

}
