#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "occdist/rng.hpp"
#include "occdist/tensor.hpp"

namespace occdist {

// `None` is the teacher's privileged view. UpperHalfOccluded is the
// VR-headset view (lower half visible); LowerHalfOccluded is the eyes-region
// view.
enum class OcclusionMode { None, UpperHalfOccluded, LowerHalfOccluded };

inline const char* occlusion_name(OcclusionMode m) {
  switch (m) {
    case OcclusionMode::None: return "none";
    case OcclusionMode::UpperHalfOccluded: return "upper_half_occluded";
    case OcclusionMode::LowerHalfOccluded: return "lower_half_occluded";
  }
  return "none";
}

inline OcclusionMode occlusion_from_name(const std::string& name) {
  if (name == "none") return OcclusionMode::None;
  if (name == "upper_half_occluded") return OcclusionMode::UpperHalfOccluded;
  if (name == "lower_half_occluded") return OcclusionMode::LowerHalfOccluded;
  throw ParameterError("occlusion: unknown mode \"" + name + "\"");
}

// The occluded "half" is rows [0, floor(H/2)) for upper, [floor(H/2), H) for
// lower; odd heights leave the middle row with the lower half.
inline std::pair<std::size_t, std::size_t> occluded_row_range(std::size_t height,
                                                              OcclusionMode mode) {
  switch (mode) {
    case OcclusionMode::UpperHalfOccluded: return {0, height / 2};
    case OcclusionMode::LowerHalfOccluded: return {height / 2, height};
    case OcclusionMode::None: break;
  }
  return {0, 0};
}

struct OccludedDataset {
  Tensor images;            // [N,C,H,W], pixel values in [0,1]
  std::vector<int> labels;  // class ids in [0, class_count)
  std::size_t class_count = 0;
  OcclusionMode mode = OcclusionMode::None;
  std::string split_tag = "full";

  std::size_t size() const { return labels.size(); }
  std::size_t channels() const { return images.dim(1); }
  std::size_t height() const { return images.dim(2); }
  std::size_t width() const { return images.dim(3); }
  std::size_t image_size() const { return channels() * height() * width(); }
};

inline OccludedDataset make_dataset(Tensor images, std::vector<int> labels,
                                    std::size_t class_count,
                                    OcclusionMode mode = OcclusionMode::None,
                                    std::string split_tag = "full") {
  if (images.rank() != 4) {
    throw DimensionError("dataset: images must be [N,C,H,W], got " +
                         shape_to_string(images.shape()));
  }
  if (images.dim(0) != labels.size()) {
    throw ConsistencyError("dataset: " + std::to_string(images.dim(0)) + " images but " +
                           std::to_string(labels.size()) + " labels");
  }
  for (const int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= class_count) {
      throw ConsistencyError("dataset: label " + std::to_string(y) +
                             " outside [0," + std::to_string(class_count) + ")");
    }
  }
  OccludedDataset ds;
  ds.images = std::move(images);
  ds.labels = std::move(labels);
  ds.class_count = class_count;
  ds.mode = mode;
  ds.split_tag = std::move(split_tag);
  return ds;
}

namespace detail {

inline std::uint32_t read_u32_be(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw FormatError("idx: truncated header in \"" + path + "\"");
  }
  return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

}  // namespace detail

// Reads the MNIST-family IDX pair. Images: magic 0x00000803 with dims [N,H,W]
// (single channel) or 0x00000804 with dims [N,C,H,W]; labels: magic
// 0x00000801 with dims [N]. Pixels are scaled to [0,1] by dividing by 255.
// With per_class_cap set, at most that many images per class are kept, in
// file order.
inline OccludedDataset load_idx_dataset(const std::string& images_path,
                                        const std::string& labels_path,
                                        std::optional<std::size_t> per_class_cap = {}) {
  if (per_class_cap && *per_class_cap == 0) {
    throw DatasetError("idx: per-class cap of 0 would produce an empty dataset");
  }

  std::ifstream img_in(images_path, std::ios::binary);
  if (!img_in) throw FormatError("idx: cannot open \"" + images_path + "\"");
  const std::uint32_t img_magic = detail::read_u32_be(img_in, images_path);
  std::size_t n = 0, c = 1, h = 0, w = 0;
  if (img_magic == 0x00000803u) {
    n = detail::read_u32_be(img_in, images_path);
    h = detail::read_u32_be(img_in, images_path);
    w = detail::read_u32_be(img_in, images_path);
  } else if (img_magic == 0x00000804u) {
    n = detail::read_u32_be(img_in, images_path);
    c = detail::read_u32_be(img_in, images_path);
    h = detail::read_u32_be(img_in, images_path);
    w = detail::read_u32_be(img_in, images_path);
  } else {
    throw FormatError("idx: bad image magic in \"" + images_path + "\"");
  }
  const std::size_t image_size = c * h * w;
  std::vector<unsigned char> pixels(n * image_size);
  if (!img_in.read(reinterpret_cast<char*>(pixels.data()),
                   static_cast<std::streamsize>(pixels.size()))) {
    throw FormatError("idx: truncated image payload in \"" + images_path + "\"");
  }

  std::ifstream lab_in(labels_path, std::ios::binary);
  if (!lab_in) throw FormatError("idx: cannot open \"" + labels_path + "\"");
  if (detail::read_u32_be(lab_in, labels_path) != 0x00000801u) {
    throw FormatError("idx: bad label magic in \"" + labels_path + "\"");
  }
  const std::uint32_t label_count = detail::read_u32_be(lab_in, labels_path);
  if (label_count != n) {
    throw ConsistencyError("idx: " + std::to_string(n) + " images in \"" + images_path +
                           "\" but " + std::to_string(label_count) + " labels in \"" +
                           labels_path + "\"");
  }
  std::vector<unsigned char> raw_labels(label_count);
  if (!lab_in.read(reinterpret_cast<char*>(raw_labels.data()),
                   static_cast<std::streamsize>(raw_labels.size()))) {
    throw FormatError("idx: truncated label payload in \"" + labels_path + "\"");
  }

  std::vector<std::size_t> keep;
  keep.reserve(n);
  if (per_class_cap) {
    std::map<int, std::size_t> counts;
    for (std::size_t i = 0; i < n; ++i) {
      if (counts[raw_labels[i]]++ < *per_class_cap) keep.push_back(i);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) keep.push_back(i);
  }
  if (keep.empty()) throw DatasetError("idx: no images retained from \"" + images_path + "\"");

  Tensor images({keep.size(), c, h, w});
  std::vector<int> labels(keep.size());
  int max_label = 0;
  for (std::size_t row = 0; row < keep.size(); ++row) {
    const std::size_t src = keep[row];
    labels[row] = raw_labels[src];
    max_label = std::max(max_label, labels[row]);
    float* dst = images.data().data() + row * image_size;
    const unsigned char* s = pixels.data() + src * image_size;
    for (std::size_t i = 0; i < image_size; ++i) dst[i] = static_cast<float>(s[i]) / 255.0f;
  }

  return make_dataset(std::move(images), std::move(labels),
                      static_cast<std::size_t>(max_label) + 1, OcclusionMode::None);
}

// Zeroes the occluded half. The input must be un-occluded and is not mutated.
inline OccludedDataset apply_occlusion(const OccludedDataset& ds, OcclusionMode mode) {
  if (ds.mode != OcclusionMode::None) {
    throw ContractError("occlusion: dataset is already occluded (" +
                        std::string(occlusion_name(ds.mode)) + ")");
  }
  if (mode == OcclusionMode::None) return ds;
  OccludedDataset out = ds;
  out.images = ds.images.clone();
  out.mode = mode;
  const auto [row_begin, row_end] = occluded_row_range(ds.height(), mode);
  const std::size_t n = ds.size(), c = ds.channels(), h = ds.height(), w = ds.width();
  float* data = out.images.data().data();
  for (std::size_t img = 0; img < n; ++img) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      float* plane = data + (img * c + ch) * h * w;
      std::fill(plane + row_begin * w, plane + row_end * w, 0.0f);
    }
  }
  return out;
}

// Stratified train/validation split, deterministic given the seed. The split
// depends only on labels and seed, so it commutes with apply_occlusion.
inline std::pair<OccludedDataset, OccludedDataset> split(const OccludedDataset& ds,
                                                         double validation_fraction,
                                                         std::uint64_t seed) {
  if (!(validation_fraction > 0.0) || !(validation_fraction < 1.0)) {
    throw ParameterError("split: validation fraction must be in (0,1)");
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);
  for (const auto& [cls, idx] : by_class) {
    if (idx.size() < 2) {
      throw StratificationError("split: class " + std::to_string(cls) + " has only " +
                                std::to_string(idx.size()) + " sample(s)");
    }
  }

  Rng rng = Rng::derived(seed, 0x5b17u);
  std::vector<std::size_t> train_idx, val_idx;
  for (auto& [cls, idx] : by_class) {
    rng.shuffle(idx);
    const auto n_val = static_cast<std::size_t>(
        std::llround(validation_fraction * static_cast<double>(idx.size())));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      (i < n_val ? val_idx : train_idx).push_back(idx[i]);
    }
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());

  auto take = [&](const std::vector<std::size_t>& idx, const char* tag) {
    Tensor images({idx.size(), ds.channels(), ds.height(), ds.width()});
    std::vector<int> labels(idx.size());
    const std::size_t isz = ds.image_size();
    for (std::size_t row = 0; row < idx.size(); ++row) {
      labels[row] = ds.labels[idx[row]];
      std::copy_n(ds.images.data().data() + idx[row] * isz, isz,
                  images.data().data() + row * isz);
    }
    OccludedDataset out = ds;
    out.images = std::move(images);
    out.labels = std::move(labels);
    out.split_tag = tag;
    return out;
  };
  return {take(train_idx, "train"), take(val_idx, "validation")};
}

// Nearest-neighbor resize. Provided for parity with pipelines that rescale to
// a fixed backbone input; not applied by default.
inline OccludedDataset resize_nearest(const OccludedDataset& ds, std::size_t new_h,
                                      std::size_t new_w) {
  if (new_h == 0 || new_w == 0) throw ParameterError("resize: target size must be positive");
  const std::size_t n = ds.size(), c = ds.channels(), h = ds.height(), w = ds.width();
  Tensor images({n, c, new_h, new_w});
  for (std::size_t img = 0; img < n; ++img) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const float* src = ds.images.data().data() + (img * c + ch) * h * w;
      float* dst = images.data().data() + (img * c + ch) * new_h * new_w;
      for (std::size_t i = 0; i < new_h; ++i) {
        const std::size_t si = std::min(h - 1, i * h / new_h);
        for (std::size_t j = 0; j < new_w; ++j) {
          const std::size_t sj = std::min(w - 1, j * w / new_w);
          dst[i * new_w + j] = src[si * w + sj];
        }
      }
    }
  }
  OccludedDataset out = ds;
  out.images = std::move(images);
  return out;
}

// Copies the selected rows into a [B,C,H,W] batch tensor.
inline Tensor make_batch(const OccludedDataset& ds, const std::vector<std::size_t>& indices) {
  Tensor batch({indices.size(), ds.channels(), ds.height(), ds.width()});
  const std::size_t isz = ds.image_size();
  for (std::size_t row = 0; row < indices.size(); ++row) {
    std::copy_n(ds.images.data().data() + indices[row] * isz, isz,
                batch.data().data() + row * isz);
  }
  return batch;
}

// One-hot matrix [B,K] for a label slice.
template <typename T = float>
BasicTensor<T> one_hot(const std::vector<int>& labels, std::size_t class_count) {
  BasicTensor<T> out({labels.size(), class_count});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out.data()[i * class_count + static_cast<std::size_t>(labels[i])] = T(1);
  }
  return out;
}

}  // namespace occdist
