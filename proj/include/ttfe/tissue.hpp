#pragma once

#include "ttfe/volume.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <utility>

namespace ttfe {

struct TissueProperties {
  double sigma = 0.0;  ///< conductivity, S/m
  double eps_rel = 1.0;
  std::string name;
};

/// Electrical properties per label code.
class TissueTable {
 public:
  TissueTable() = default;

  /// Typical 200 kHz literature values. These are implementer defaults, not
  /// measured data; override with a JSON table for real studies.
  static TissueTable defaults();

  /// Throws DataError when the entry is non-finite, negative, or an air entry
  /// is not (0, 1).
  void set(std::uint8_t code, TissueProperties props);
  bool contains(std::uint8_t code) const { return entries_.count(code) != 0; }
  const TissueProperties& at(std::uint8_t code) const;
  const std::map<std::uint8_t, TissueProperties>& entries() const { return entries_; }

  static TissueTable load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  static TissueTable from_json_text(const std::string& text);
  std::string to_json_text() const;

 private:
  std::map<std::uint8_t, TissueProperties> entries_;
};

/// Per-voxel conductivity (S/m) and relative permittivity maps.
std::pair<ScalarField, ScalarField> lookup_properties(const TissueTable& table,
                                                      const LabelVolume& vol);

}  // namespace ttfe
