#include "vapf/volume_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vapf/errors.hpp"

namespace vapf {

static_assert(std::endian::native == std::endian::little, "payload I/O assumes a little-endian host");

Tensor Volume::to_tensor() const {
  std::vector<double> d(voxels.begin(), voxels.end());
  return Tensor(Shape{dims[0], dims[1], dims[2]}, std::move(d));
}

void write_volume(const std::filesystem::path& payload, const std::filesystem::path& header,
                  const Volume& vol) {
  if (vol.voxels.size() != vol.size()) throw ShapeError("volume voxel count does not match dims");
  {
    std::ofstream hs(header, std::ios::binary);
    if (!hs) throw IoError("cannot write " + header.string());
    hs << "vol-f32-v1\n" << vol.dims[0] << ' ' << vol.dims[1] << ' ' << vol.dims[2] << '\n';
    if (!hs) throw IoError("write failed for " + header.string());
  }
  std::ofstream ps(payload, std::ios::binary);
  if (!ps) throw IoError("cannot write " + payload.string());
  ps.write(reinterpret_cast<const char*>(vol.voxels.data()),
           static_cast<std::streamsize>(vol.voxels.size() * sizeof(float)));
  if (!ps) throw IoError("write failed for " + payload.string());
}

Volume read_volume(const std::filesystem::path& payload, const std::filesystem::path& header) {
  std::ifstream hs(header);
  if (!hs) throw IoError("cannot read " + header.string());
  std::string magic;
  std::getline(hs, magic);
  if (magic != "vol-f32-v1") throw InputError(header.string() + ": not a vol-f32-v1 header");
  Volume vol;
  if (!(hs >> vol.dims[0] >> vol.dims[1] >> vol.dims[2]) || vol.size() == 0) {
    throw InputError(header.string() + ": bad dimensions line");
  }
  std::ifstream ps(payload, std::ios::binary | std::ios::ate);
  if (!ps) throw IoError("cannot read " + payload.string());
  const auto bytes = static_cast<std::size_t>(ps.tellg());
  if (bytes != vol.size() * sizeof(float)) {
    throw InputError(payload.string() + ": payload has " + std::to_string(bytes) +
                     " bytes, header implies " + std::to_string(vol.size() * sizeof(float)));
  }
  ps.seekg(0);
  vol.voxels.resize(vol.size());
  ps.read(reinterpret_cast<char*>(vol.voxels.data()), static_cast<std::streamsize>(bytes));
  if (!ps) throw IoError("read failed for " + payload.string());
  return vol;
}

}  // namespace vapf
