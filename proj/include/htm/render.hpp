#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "htm/planner.hpp"
#include "htm/world.hpp"

namespace htm {

struct RenderOptions {
  int panel = 64;  // panel width and height in pixels
};

/// Binary PPM (P6) strip with one panel per plan node: walls dark, the agent
/// disc at the node light, and a ring marking the goal.
std::string render_plan(const World& world, const Matrix& plan_observations, const Context& context,
                        Vec2 goal, const RenderOptions& options = {});

void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace htm
