// Scene files (JSON), PFM and PNG images.

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "gaussrt/scene.h"

namespace gaussrt {

inline constexpr int scene_schema_version = 1;

// Missing, unreadable or unwritable files.
struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Files that were read but do not describe a valid scene.
struct schema_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Parses, validates and builds the scene. Relative environment-map paths are
// resolved against base_dir.
Scene scene_from_json(const std::string& text, const std::string& base_dir = ".");
std::string scene_to_json(const Scene& scene);

Scene load_scene(const std::string& path);
void  save_scene(const std::string& path, const Scene& scene);

struct Image {
  int                width = 0, height = 0, channels = 0;
  std::vector<float> data; // row-major, row 0 at the top
};

// Little-endian PFM; 1 or 3 channels.
void  write_pfm(const std::string& path, const Image& image);
Image read_pfm(const std::string& path);

// 8-bit sRGB after clamping to [0, 1]; 1 or 3 channels.
void write_png(const std::string& path, const Image& image);

Image image_from_rgb(int width, int height, const std::vector<float>& rgb);
Image image_from_gray(int width, int height, const std::vector<double>& values);

// Lat-long environment map from a PFM file.
Environment load_environment(const std::string& path);

}  // namespace gaussrt
