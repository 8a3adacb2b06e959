#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "occdist/rng.hpp"

namespace occdist {

// Class-structured 28x28 grayscale images for the ordering experiments.
//
// Each class plants two signals: a bright, low-noise square in the upper half
// whose grid position encodes the class directly, and a weaker vertical bar
// in the lower half whose column encodes (class mod 5) and whose texture
// (solid vs dashed) encodes (class / 5). A network trained on full images
// latches onto the easy upper square, so zeroing the upper half costs it
// heavily; the lower-half signal alone still supports a good classifier,
// with the solid/dashed distinction noisy enough to leave headroom.
struct SyntheticConfig {
  std::size_t train_count = 10000;
  std::size_t test_count = 2000;
  std::size_t classes = 10;
  double noise = 0.12;
  std::uint64_t seed = 1234;
};

struct SyntheticSplit {
  std::vector<std::uint8_t> pixels;  // [N*H*W]
  std::vector<std::uint8_t> labels;  // [N]
  std::size_t count = 0;
  std::size_t height = 28;
  std::size_t width = 28;
};

namespace detail {

inline void render_synthetic_image(std::vector<double>& img, std::size_t h, std::size_t w,
                                   std::size_t cls, double noise, Rng& rng) {
  std::fill(img.begin(), img.end(), 0.05);
  auto splat = [&](std::size_t r0, std::size_t c0, std::size_t rows, std::size_t cols,
                   double value) {
    for (std::size_t r = r0; r < std::min(h, r0 + rows); ++r) {
      for (std::size_t c = c0; c < std::min(w, c0 + cols); ++c) {
        img[r * w + c] = std::max(img[r * w + c], value);
      }
    }
  };
  auto jitter = [&]() { return static_cast<std::ptrdiff_t>(rng.bounded(3)) - 1; };
  auto clamp_pos = [](std::ptrdiff_t v, std::size_t hi) {
    return static_cast<std::size_t>(std::max<std::ptrdiff_t>(
        0, std::min<std::ptrdiff_t>(v, static_cast<std::ptrdiff_t>(hi))));
  };

  // Upper-half square: position encodes the class, high contrast.
  const std::size_t row_band = cls / 5;
  const std::size_t col_slot = cls % 5;
  const double square_value = 0.7 + 0.3 * rng.uniform();
  const std::size_t sq_r = clamp_pos(static_cast<std::ptrdiff_t>(2 + 5 * row_band) + jitter(), h / 2 - 4);
  const std::size_t sq_c = clamp_pos(static_cast<std::ptrdiff_t>(2 + 5 * col_slot) + jitter(), w - 4);
  splat(sq_r, sq_c, 4, 4, square_value);

  // Lower-half bar: column encodes (class mod 5), texture encodes (class/5).
  const double bar_value = 0.55 + 0.4 * rng.uniform();
  const std::size_t bar_c = clamp_pos(static_cast<std::ptrdiff_t>(3 + 5 * col_slot) + jitter(), w - 2);
  const std::size_t bar_top = h / 2 + 2;
  const bool dashed = row_band == 1;
  for (std::size_t r = bar_top; r < h - 1; ++r) {
    if (dashed && ((r - bar_top) / 2) % 2 == 1) continue;
    for (std::size_t c = bar_c; c < bar_c + 2; ++c) {
      img[r * w + c] = std::max(img[r * w + c], bar_value);
    }
  }

  // Two faint distractor blobs anywhere.
  for (int blob = 0; blob < 2; ++blob) {
    const std::size_t br = rng.bounded(h - 3);
    const std::size_t bc = rng.bounded(w - 3);
    splat(br, bc, 3, 3, 0.3);
  }

  for (auto& v : img) {
    v += noise * rng.normal();
    v = std::min(1.0, std::max(0.0, v));
  }
}

inline SyntheticSplit render_synthetic_split(std::size_t count, const SyntheticConfig& cfg,
                                             Rng& rng) {
  SyntheticSplit split;
  split.count = count;
  split.pixels.resize(count * split.height * split.width);
  split.labels.resize(count);
  std::vector<std::size_t> class_of(count);
  for (std::size_t i = 0; i < count; ++i) class_of[i] = i % cfg.classes;
  rng.shuffle(class_of);

  std::vector<double> img(split.height * split.width);
  for (std::size_t i = 0; i < count; ++i) {
    render_synthetic_image(img, split.height, split.width, class_of[i], cfg.noise, rng);
    split.labels[i] = static_cast<std::uint8_t>(class_of[i]);
    for (std::size_t p = 0; p < img.size(); ++p) {
      split.pixels[i * img.size() + p] =
          static_cast<std::uint8_t>(std::llround(img[p] * 255.0));
    }
  }
  return split;
}

inline void write_u32_be(std::ofstream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>((v >> 24) & 0xff), static_cast<char>((v >> 16) & 0xff),
                         static_cast<char>((v >> 8) & 0xff), static_cast<char>(v & 0xff)};
  out.write(bytes, 4);
}

}  // namespace detail

inline std::pair<SyntheticSplit, SyntheticSplit> generate_synthetic(const SyntheticConfig& cfg) {
  Rng train_rng = Rng::derived(cfg.seed, 0x5713u);
  Rng test_rng = Rng::derived(cfg.seed, 0x7e57u);
  return {detail::render_synthetic_split(cfg.train_count, cfg, train_rng),
          detail::render_synthetic_split(cfg.test_count, cfg, test_rng)};
}

// Standard IDX encoding: images magic 0x00000803 with dims [N,H,W].
inline void write_idx_images(const SyntheticSplit& split, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("idx: cannot open \"" + path + "\" for writing");
  detail::write_u32_be(out, 0x00000803u);
  detail::write_u32_be(out, static_cast<std::uint32_t>(split.count));
  detail::write_u32_be(out, static_cast<std::uint32_t>(split.height));
  detail::write_u32_be(out, static_cast<std::uint32_t>(split.width));
  out.write(reinterpret_cast<const char*>(split.pixels.data()),
            static_cast<std::streamsize>(split.pixels.size()));
  if (!out) throw FormatError("idx: write failed for \"" + path + "\"");
}

inline void write_idx_labels(const SyntheticSplit& split, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("idx: cannot open \"" + path + "\" for writing");
  detail::write_u32_be(out, 0x00000801u);
  detail::write_u32_be(out, static_cast<std::uint32_t>(split.count));
  out.write(reinterpret_cast<const char*>(split.labels.data()),
            static_cast<std::streamsize>(split.labels.size()));
  if (!out) throw FormatError("idx: write failed for \"" + path + "\"");
}

}  // namespace occdist
