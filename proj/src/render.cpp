#include "htm/render.hpp"

#include <array>
#include <cmath>
#include <fstream>

#include "htm/errors.hpp"

namespace htm {

namespace {

using Rgb = std::array<unsigned char, 3>;

constexpr Rgb kFloor{150, 150, 150};
constexpr Rgb kWall{30, 30, 40};
constexpr Rgb kAgent{240, 240, 200};
constexpr Rgb kGoal{220, 40, 40};

}  // namespace

std::string render_plan(const World& world, const Matrix& plan_observations, const Context& context,
                        Vec2 goal, const RenderOptions& options) {
  if (options.panel < 4) throw UsageError("render: panel must be at least 4 pixels");
  const auto panels = static_cast<int>(plan_observations.rows());
  if (panels == 0) throw UsageError("render: empty plan");
  const int P = options.panel;
  const int width = P * panels;
  const double S = context.arena_size;
  const double rho = world.params().agent_radius;
  const double px = S / P;  // arena units per pixel
  const auto dim = static_cast<std::size_t>(plan_observations.cols());

  const std::string header = "P6\n" + std::to_string(width) + " " + std::to_string(P) + "\n255\n";
  std::string out = header;
  out.resize(header.size() + static_cast<std::size_t>(width) * P * 3);
  const auto put = [&](int x, int y, const Rgb& c) {
    const std::size_t at = header.size() + (static_cast<std::size_t>(y) * width + x) * 3;
    out[at] = static_cast<char>(c[0]);
    out[at + 1] = static_cast<char>(c[1]);
    out[at + 2] = static_cast<char>(c[2]);
  };

  for (int k = 0; k < panels; ++k) {
    const Vec2 agent = world.decode(std::span<const double>(plan_observations.row(k).data(), dim));
    for (int y = 0; y < P; ++y) {
      for (int x = 0; x < P; ++x) {
        // Pixel centers; image rows run top to bottom, arena y runs upward.
        const Vec2 p{(x + 0.5) * px, S - (y + 0.5) * px};
        Rgb c = kFloor;
        for (const Rect& w : context.walls) {
          if (point_rect_distance(p, w) == 0.0) c = kWall;
        }
        if (distance(p, agent) <= rho) c = kAgent;
        const double dg = distance(p, goal);
        if (dg <= rho && dg >= rho - 1.5 * px) c = kGoal;
        put(k * P + x, y, c);
      }
    }
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing", path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed", path.string());
}

}  // namespace htm
