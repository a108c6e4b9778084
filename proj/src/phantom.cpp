#include "ttfe/phantom.hpp"

#include "ttfe/errors.hpp"
#include "ttfe/random.hpp"

#include <json.hpp>

#include <optional>
#include <random>

namespace ttfe {

using nlohmann::json;

namespace {

constexpr int kMaxRedraws = 256;

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

std::uint8_t base_label(const Eigen::Vector3d& q, const Eigen::Vector3d& axes,
                        const std::array<double, 5>& depth) {
  // depth[k] is the inward offset of boundary k; innermost containing shell wins.
  static constexpr std::array<Tissue, 6> kOrder{Tissue::Air,   Tissue::Skin,       Tissue::Skull,
                                                Tissue::Csf,   Tissue::GreyMatter, Tissue::WhiteMatter};
  int level = 0;
  for (int k = 0; k < 5; ++k) {
    const Eigen::Vector3d a = axes.array() - depth[k];
    if ((q.array() / a.array()).square().sum() <= 1.0) {
      level = k + 1;
    } else {
      break;
    }
  }
  return static_cast<std::uint8_t>(kOrder[level]);
}

std::optional<LabelVolume> rasterize(const PhantomSpec& s) {
  const GridMeta& m = s.meta;
  const Eigen::Vector3d center = ((m.dims - 1).cast<double>() * m.spacing * 0.5).matrix();
  const Eigen::Vector3d tumor = center + s.tumor_offset_mm;
  const std::array<double, 5> depth{0.0, s.skin_mm, s.skin_mm + s.skull_mm,
                                    s.skin_mm + s.skull_mm + s.csf_mm,
                                    s.skin_mm + s.skull_mm + s.csf_mm + s.grey_mm};
  const double r_enh2 = s.tumor_enhancing_radius_mm * s.tumor_enhancing_radius_mm;
  const double r_nec2 = s.tumor_necrotic_radius_mm * s.tumor_necrotic_radius_mm;

  LabelVolume vol(m);
  for (int z = 0; z < m.dims[2]; ++z) {
    for (int y = 0; y < m.dims[1]; ++y) {
      for (int x = 0; x < m.dims[0]; ++x) {
        const Eigen::Vector3d p = m.world(Eigen::Array3i(x, y, z));
        std::uint8_t label = base_label(p - center, s.semi_axes_mm, depth);
        const bool boundary = x == 0 || y == 0 || z == 0 || x == m.dims[0] - 1 ||
                              y == m.dims[1] - 1 || z == m.dims[2] - 1;
        if (boundary && label != 0) return std::nullopt;  // head must fit in the grid
        const double t2 = (p - tumor).squaredNorm();
        if (t2 <= r_enh2) {
          if (label != static_cast<std::uint8_t>(Tissue::WhiteMatter) &&
              label != static_cast<std::uint8_t>(Tissue::GreyMatter)) {
            return std::nullopt;
          }
          label = static_cast<std::uint8_t>(t2 <= r_nec2 ? Tissue::TumorNecrotic
                                                         : Tissue::TumorEnhancing);
        }
        vol(x, y, z) = label;
      }
    }
  }
  return vol;
}

}  // namespace

void PhantomSpec::validate() const {
  meta.validate();
  if (!semi_axes_mm.allFinite() || (semi_axes_mm.array() <= 0.0).any()) {
    throw DataError("phantom: semi-axes must be positive");
  }
  for (double t : {skin_mm, skull_mm, csf_mm, grey_mm}) {
    if (!finite_positive(t)) throw DataError("phantom: layer thicknesses must be positive");
  }
  if (skin_mm + skull_mm + csf_mm + grey_mm >= semi_axes_mm.minCoeff()) {
    throw DataError("phantom: layer thicknesses must sum to less than the smallest semi-axis");
  }
  if (!finite_positive(tumor_necrotic_radius_mm) || !finite_positive(tumor_enhancing_radius_mm) ||
      tumor_necrotic_radius_mm >= tumor_enhancing_radius_mm) {
    throw DataError("phantom: require 0 < necrotic radius < enhancing radius");
  }
  if (!tumor_offset_mm.allFinite()) throw DataError("phantom: tumor offset must be finite");
  for (double j : {jitter_semi_axes_mm, jitter_tumor_offset_mm, jitter_tumor_radius_mm}) {
    if (!std::isfinite(j) || j < 0.0) throw DataError("phantom: jitter must be >= 0");
  }
  if (!rasterize(*this)) {
    throw DataError("phantom: head must fit inside the grid and the tumor inside grey/white matter");
  }
}

PhantomSpec jittered_spec(const PhantomSpec& spec) {
  spec.validate();
  const bool no_jitter = spec.jitter_semi_axes_mm == 0.0 && spec.jitter_tumor_offset_mm == 0.0 &&
                         spec.jitter_tumor_radius_mm == 0.0;
  if (no_jitter) return spec;

  std::mt19937_64 rng(derive_seed(spec.seed, 0x9a7e));
  const auto draw = [&](double half) {
    return std::uniform_real_distribution<double>(-half, half)(rng);
  };
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    PhantomSpec s = spec;
    for (int k = 0; k < 3; ++k) s.semi_axes_mm[k] += draw(spec.jitter_semi_axes_mm);
    for (int k = 0; k < 3; ++k) s.tumor_offset_mm[k] += draw(spec.jitter_tumor_offset_mm);
    s.tumor_enhancing_radius_mm += draw(spec.jitter_tumor_radius_mm);
    s.tumor_necrotic_radius_mm += draw(spec.jitter_tumor_radius_mm);
    try {
      s.validate();
      return s;
    } catch (const DataError&) {
      continue;
    }
  }
  throw DataError("phantom: jitter amplitudes too large, no valid draw in " +
                  std::to_string(kMaxRedraws) + " attempts");
}

LabelVolume make_phantom(const PhantomSpec& spec) { return *rasterize(jittered_spec(spec)); }

PhantomSpec cohort_member_spec(const PhantomSpec& base, std::uint64_t master_seed, int index) {
  PhantomSpec s = base;
  s.seed = derive_seed(master_seed, static_cast<std::uint64_t>(index));
  return s;
}

std::vector<LabelVolume> make_cohort(int n, const PhantomSpec& base, std::uint64_t master_seed) {
  if (n < 1) throw DataError("cohort size must be >= 1");
  std::vector<LabelVolume> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(make_phantom(cohort_member_spec(base, master_seed, i)));
  return out;
}

std::string PhantomSpec::to_json_text() const {
  const auto v3 = [](const auto& v) { return json::array({v[0], v[1], v[2]}); };
  json j = {{"dims", v3(meta.dims)},
            {"spacing_mm", v3(meta.spacing)},
            {"seed", seed},
            {"semi_axes_mm", v3(semi_axes_mm)},
            {"skin_mm", skin_mm},
            {"skull_mm", skull_mm},
            {"csf_mm", csf_mm},
            {"grey_mm", grey_mm},
            {"tumor_offset_mm", v3(tumor_offset_mm)},
            {"tumor_enhancing_radius_mm", tumor_enhancing_radius_mm},
            {"tumor_necrotic_radius_mm", tumor_necrotic_radius_mm},
            {"jitter_semi_axes_mm", jitter_semi_axes_mm},
            {"jitter_tumor_offset_mm", jitter_tumor_offset_mm},
            {"jitter_tumor_radius_mm", jitter_tumor_radius_mm}};
  return j.dump(2);
}

PhantomSpec PhantomSpec::from_json_text(const std::string& text) {
  PhantomSpec s;
  try {
    const json j = json::parse(text);
    const auto vec3 = [&](const char* key, Eigen::Vector3d& dst) {
      if (!j.contains(key)) return;
      const auto v = j.at(key).get<std::vector<double>>();
      if (v.size() != 3) throw DataError(std::string("phantom: ") + key + " needs 3 entries");
      dst = Eigen::Vector3d(v[0], v[1], v[2]);
    };
    if (j.contains("dims")) {
      const auto d = j.at("dims").get<std::vector<int>>();
      if (d.size() != 3) throw DataError("phantom: dims needs 3 entries");
      s.meta.dims = Eigen::Array3i(d[0], d[1], d[2]);
    }
    Eigen::Vector3d sp = s.meta.spacing.matrix();
    vec3("spacing_mm", sp);
    s.meta.spacing = sp.array();
    s.meta.validate();
    s.seed = j.value("seed", s.seed);
    vec3("semi_axes_mm", s.semi_axes_mm);
    s.skin_mm = j.value("skin_mm", s.skin_mm);
    s.skull_mm = j.value("skull_mm", s.skull_mm);
    s.csf_mm = j.value("csf_mm", s.csf_mm);
    s.grey_mm = j.value("grey_mm", s.grey_mm);
    vec3("tumor_offset_mm", s.tumor_offset_mm);
    s.tumor_enhancing_radius_mm = j.value("tumor_enhancing_radius_mm", s.tumor_enhancing_radius_mm);
    s.tumor_necrotic_radius_mm = j.value("tumor_necrotic_radius_mm", s.tumor_necrotic_radius_mm);
    s.jitter_semi_axes_mm = j.value("jitter_semi_axes_mm", s.jitter_semi_axes_mm);
    s.jitter_tumor_offset_mm = j.value("jitter_tumor_offset_mm", s.jitter_tumor_offset_mm);
    s.jitter_tumor_radius_mm = j.value("jitter_tumor_radius_mm", s.jitter_tumor_radius_mm);
  } catch (const json::exception& e) {
    throw DataError(std::string("phantom spec: ") + e.what());
  }
  return s;
}

}  // namespace ttfe
