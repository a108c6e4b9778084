#pragma once

#include "ttfe/volume.hpp"

#include <filesystem>
#include <variant>

namespace ttfe {

/// VVOL1 container: one JSON header line
///   {"dims":[nx,ny,nz],"dtype":"u8"|"f32","kind":"labels"|"scalar",
///    "magic":"VVOL1","spacing_mm":[sx,sy,sz],"unit":...}
/// followed by the raw little-endian payload in x-fastest order. Scalar
/// payloads are 32-bit floats, so doubles are rounded on save.
using Volume = std::variant<LabelVolume, ScalarField>;

void save_volume(const std::filesystem::path& path, const LabelVolume& vol);
void save_volume(const std::filesystem::path& path, const ScalarField& field);

Volume load_volume(const std::filesystem::path& path);
LabelVolume load_labels(const std::filesystem::path& path);
ScalarField load_scalar(const std::filesystem::path& path);

}  // namespace ttfe
