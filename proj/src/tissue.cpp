#include "ttfe/tissue.hpp"

#include "ttfe/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace ttfe {

using nlohmann::json;

TissueTable TissueTable::defaults() {
  TissueTable t;
  t.set(0, {0.0, 1.0, "air"});
  t.set(1, {0.4, 1100.0, "skin"});
  t.set(2, {0.008, 200.0, "skull"});
  t.set(3, {1.79, 110.0, "csf"});
  t.set(4, {0.12, 2000.0, "white_matter"});
  t.set(5, {0.25, 3000.0, "grey_matter"});
  t.set(6, {0.24, 2000.0, "tumor_enhancing"});
  t.set(7, {1.0, 110.0, "tumor_necrotic"});
  t.set(8, {1.79, 110.0, "resection_cavity"});
  return t;
}

void TissueTable::set(std::uint8_t code, TissueProperties props) {
  if (!is_valid_tissue_code(code)) {
    throw DataError("tissue code " + std::to_string(code) + " outside 0.." +
                    std::to_string(kMaxTissueCode));
  }
  if (!std::isfinite(props.sigma) || !std::isfinite(props.eps_rel) || props.sigma < 0.0 ||
      props.eps_rel < 0.0) {
    throw DataError("tissue " + std::to_string(code) + ": sigma and eps must be finite and >= 0");
  }
  if (code == 0 && (props.sigma != 0.0 || props.eps_rel != 1.0)) {
    throw DataError("air entry must carry sigma = 0 and eps = 1");
  }
  if (code != 0 && (props.sigma <= 0.0 || props.eps_rel < 1.0)) {
    throw DataError("tissue " + std::to_string(code) + ": requires sigma > 0 and eps >= 1");
  }
  if (props.name.empty()) props.name = std::string(tissue_name(code));
  entries_[code] = std::move(props);
}

const TissueProperties& TissueTable::at(std::uint8_t code) const {
  auto it = entries_.find(code);
  if (it == entries_.end()) {
    throw DataError("tissue table has no entry for label " + std::to_string(code));
  }
  return it->second;
}

TissueTable TissueTable::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("tissue table: ") + e.what());
  }
  if (!j.is_object()) throw DataError("tissue table must be a JSON object");
  TissueTable t;
  for (const auto& [key, value] : j.items()) {
    int code = -1;
    try {
      code = std::stoi(key);
    } catch (const std::exception&) {
      throw DataError("tissue table key '" + key + "' is not a label code");
    }
    if (code < 0 || code > 255) throw DataError("tissue table key out of range: " + key);
    try {
      t.set(static_cast<std::uint8_t>(code),
            {value.at("sigma_S_per_m").get<double>(), value.at("eps_rel").get<double>(),
             value.value("name", std::string())});
    } catch (const json::exception& e) {
      throw DataError("tissue table entry " + key + ": " + e.what());
    }
  }
  return t;
}

std::string TissueTable::to_json_text() const {
  json j = json::object();
  for (const auto& [code, p] : entries_) {
    j[std::to_string(code)] = {{"sigma_S_per_m", p.sigma}, {"eps_rel", p.eps_rel}, {"name", p.name}};
  }
  return j.dump(2);
}

TissueTable TissueTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open tissue table " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

void TissueTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write tissue table " + path.string());
  out << to_json_text() << '\n';
}

std::pair<ScalarField, ScalarField> lookup_properties(const TissueTable& table,
                                                      const LabelVolume& vol) {
  std::array<double, 256> sigma{};
  std::array<double, 256> eps{};
  std::array<bool, 256> known{};
  for (const auto& [code, p] : table.entries()) {
    sigma[code] = p.sigma;
    eps[code] = p.eps_rel;
    known[code] = true;
  }
  ScalarField s(vol.meta, Unit::Dimensionless);
  ScalarField e(vol.meta, Unit::Dimensionless);
  for (Index i = 0; i < vol.meta.size(); ++i) {
    const std::uint8_t code = vol.labels[i];
    if (!known[code]) {
      throw DataError("tissue table has no entry for label " + std::to_string(code) +
                      " present in volume");
    }
    s[i] = sigma[code];
    e[i] = eps[code];
  }
  return {std::move(s), std::move(e)};
}

}  // namespace ttfe
