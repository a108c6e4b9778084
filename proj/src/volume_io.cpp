#include "ttfe/volume_io.hpp"

#include "ttfe/errors.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "VVOL1 payloads are written in host order; big-endian hosts need byte swapping");

namespace ttfe {

using nlohmann::json;

namespace {

constexpr const char* kMagic = "VVOL1";

json header_for(const GridMeta& meta) {
  return {{"magic", kMagic},
          {"dims", {meta.dims[0], meta.dims[1], meta.dims[2]}},
          {"spacing_mm", {meta.spacing[0], meta.spacing[1], meta.spacing[2]}}};
}

void write_file(const std::filesystem::path& path, const json& header, const char* data,
                std::size_t bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  const std::string line = header.dump() + "\n";
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  out.write(data, static_cast<std::streamsize>(bytes));
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace

void save_volume(const std::filesystem::path& path, const LabelVolume& vol) {
  if (vol.labels.size() != vol.meta.size()) throw DataError("label array length mismatch");
  json h = header_for(vol.meta);
  h["kind"] = "labels";
  h["dtype"] = "u8";
  write_file(path, h, reinterpret_cast<const char*>(vol.labels.data()),
             static_cast<std::size_t>(vol.labels.size()));
}

void save_volume(const std::filesystem::path& path, const ScalarField& field) {
  if (field.values.size() != field.meta.size()) throw DataError("scalar array length mismatch");
  if (!field.all_finite()) {
    throw DataError("refusing to save non-finite scalar field to " + path.string());
  }
  json h = header_for(field.meta);
  h["kind"] = "scalar";
  h["dtype"] = "f32";
  h["unit"] = std::string(unit_name(field.unit));
  const Eigen::ArrayXf payload = field.values.cast<float>();
  write_file(path, h, reinterpret_cast<const char*>(payload.data()),
             static_cast<std::size_t>(payload.size()) * sizeof(float));
}

Volume load_volume(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open volume " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": missing header line");

  json h;
  GridMeta meta;
  std::string kind;
  std::string dtype;
  try {
    h = json::parse(line);
    if (h.at("magic").get<std::string>() != kMagic) throw DataError("bad magic");
    const auto d = h.at("dims").get<std::vector<int>>();
    const auto s = h.at("spacing_mm").get<std::vector<double>>();
    if (d.size() != 3 || s.size() != 3) throw DataError("dims and spacing_mm need 3 entries");
    meta = GridMeta(d[0], d[1], d[2], s[0], s[1], s[2]);
    kind = h.at("kind").get<std::string>();
    dtype = h.at("dtype").get<std::string>();
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": malformed header: " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": malformed header: " + e.what());
  }

  const std::vector<char> payload((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  const auto expect = [&](std::size_t elem) {
    const std::size_t want = static_cast<std::size_t>(meta.size()) * elem;
    if (payload.size() != want) {
      throw DataError(path.string() + ": payload length " + std::to_string(payload.size()) +
                      " bytes, header requires " + std::to_string(want));
    }
  };

  if (kind == "labels") {
    if (dtype != "u8") throw DataError(path.string() + ": labels require dtype u8");
    expect(1);
    LabelVolume vol(meta);
    std::memcpy(vol.labels.data(), payload.data(), payload.size());
    for (Index i = 0; i < vol.labels.size(); ++i) {
      if (!is_valid_tissue_code(vol.labels[i])) {
        throw DataError(path.string() + ": unknown label code " +
                        std::to_string(vol.labels[i]) + " at voxel " + std::to_string(i));
      }
    }
    return vol;
  }
  if (kind == "scalar") {
    if (dtype != "f32") throw DataError(path.string() + ": scalar fields require dtype f32");
    Unit unit = Unit::Dimensionless;
    try {
      unit = parse_unit(h.at("unit").get<std::string>());
    } catch (const json::exception& e) {
      throw DataError(path.string() + ": malformed header: " + e.what());
    }
    expect(sizeof(float));
    Eigen::ArrayXf raw(meta.size());
    std::memcpy(raw.data(), payload.data(), payload.size());
    if (!raw.isFinite().all()) throw DataError(path.string() + ": non-finite payload value");
    return ScalarField(meta, raw.cast<double>(), unit);
  }
  throw DataError(path.string() + ": unknown volume kind '" + kind + "'");
}

LabelVolume load_labels(const std::filesystem::path& path) {
  auto v = load_volume(path);
  if (auto* l = std::get_if<LabelVolume>(&v)) return std::move(*l);
  throw DataError(path.string() + ": expected a label volume");
}

ScalarField load_scalar(const std::filesystem::path& path) {
  auto v = load_volume(path);
  if (auto* f = std::get_if<ScalarField>(&v)) return std::move(*f);
  throw DataError(path.string() + ": expected a scalar volume");
}

}  // namespace ttfe
