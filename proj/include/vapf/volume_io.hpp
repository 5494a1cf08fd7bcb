#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <vector>

#include "vapf/tensor.hpp"

namespace vapf {

/// A D x H x W scalar volume stored as float32, row-major (W fastest).
struct Volume {
  std::array<std::size_t, 3> dims{0, 0, 0};
  std::vector<float> voxels;

  std::size_t size() const { return dims[0] * dims[1] * dims[2]; }
  Tensor to_tensor() const;
};

/// `vol-f32-v1`: raw little-endian float32 payload plus a text sidecar
/// holding two lines, "vol-f32-v1" and "D H W".
void write_volume(const std::filesystem::path& payload, const std::filesystem::path& header,
                  const Volume& vol);
Volume read_volume(const std::filesystem::path& payload, const std::filesystem::path& header);

}  // namespace vapf
