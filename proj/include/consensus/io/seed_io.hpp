#ifndef CONSENSUS_IO_SEED_IO_HPP
#define CONSENSUS_IO_SEED_IO_HPP

#include "consensus/io/image_io.hpp"
#include "consensus/sgm_seed.hpp"

#include <cmath>
#include <algorithm>
#include <filesystem>
#include <string>

namespace consensus::io {

/// "seed.png" -> "seed.weights.png"
inline std::string weight_sidecar_path(const std::string& path) {
  std::filesystem::path p(path);
  const std::string stem = p.stem().string();
  return (p.parent_path() / (stem + ".weights.png")).string();
}

inline std::uint8_t encode_weight(float w) {
  if (w <= 0.0f) return 0;
  if (w < 1.0f) return 64;
  return 255;
}

/// Disparity as a 16-bit PNG (round(d * 256), 0 = invalid) plus an 8-bit
/// weight sidecar {0, 64, 255} <-> {0, 1/4, 1}. A valid disparity that
/// does not fit in 16 bits is an error. Valid disparities below 1/512 px
/// are stored as 1/256 px so they stay valid.
inline void save_seed(const SeedField& seed, const std::string& path) {
  Grid<std::uint16_t> disp(seed.width(), seed.height(), 0);
  Grid<std::uint8_t> weights(seed.width(), seed.height(), 0);
  for (std::size_t i = 0; i < disp.size(); ++i) {
    if (!seed.valid[i]) continue;
    const double v = std::round(static_cast<double>(seed.z[i]) * 256.0);
    if (v > 65535.0 || v < 0.0) {
      throw DataError("save_seed: disparity " + std::to_string(seed.z[i]) +
                      " does not fit the 16-bit encoding");
    }
    disp[i] = static_cast<std::uint16_t>(std::max(v, 1.0));
    weights[i] = encode_weight(seed.weight[i]);
  }
  write_png16(path, disp);
  write_png8(weight_sidecar_path(path), weights);
}

/// Loads a seed written by save_seed or by an external matcher. Without a
/// sidecar the weights are classified from the disparities.
inline SeedField load_seed(const std::string& path,
                           double jump_threshold = 1.0) {
  auto [disp, valid] = load_disparity(path);
  SeedField seed(disp.width(), disp.height());
  seed.z = std::move(disp);
  seed.valid = std::move(valid);
  const std::string side = weight_sidecar_path(path);
  if (!std::filesystem::exists(side)) {
    return classify_weights(std::move(seed), jump_threshold);
  }
  const RawImage w = read_raw(side);
  if (w.channels != 1 || w.width != seed.width() || w.height != seed.height()) {
    throw DataError("load_seed: weight sidecar does not match " + path);
  }
  for (std::size_t i = 0; i < seed.z.size(); ++i) {
    float weight = 0.0f;
    switch (w.samples[i]) {
      case 0: weight = 0.0f; break;
      case 64: weight = 0.25f; break;
      case 255: weight = 1.0f; break;
      default:
        throw DataError("load_seed: unexpected weight code " +
                        std::to_string(w.samples[i]) + " in " + side);
    }
    if ((weight > 0.0f) != (seed.valid[i] != 0)) {
      throw DataError("load_seed: weight sidecar disagrees with validity in " + side);
    }
    seed.weight[i] = weight;
  }
  return seed;
}

}  // namespace consensus::io

#endif  // CONSENSUS_IO_SEED_IO_HPP
