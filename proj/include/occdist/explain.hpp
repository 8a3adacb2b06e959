#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "occdist/network.hpp"

namespace occdist {

struct SaliencyMap {
  Tensor map;  // [H,W], values in [0,1]
  int target_class = 0;
  int conv_layer_index = 0;
};

struct MassSplit {
  double upper_mass = 0.0;
  double lower_mass = 0.0;
  bool defined = true;
  std::string reason;
};

inline int last_conv_layer_index(const NetworkSpec& spec) {
  for (int i = static_cast<int>(spec.layers.size()) - 1; i >= 0; --i) {
    if (spec.layers[static_cast<std::size_t>(i)].kind == LayerKind::Conv) return i;
  }
  throw ContractError("grad_cam: network has no convolutional layer");
}

// ReLU(sum_k weight_k * A_k) with weight_k the spatial mean of the gradient
// of channel k. Both inputs are [C,h,w]; the result is the unnormalized
// [h,w] class activation map.
inline Tensor cam_from_activations(const Tensor& activations, const Tensor& gradients) {
  if (activations.rank() != 3 || activations.shape() != gradients.shape()) {
    throw DimensionError("grad_cam: activations " + shape_to_string(activations.shape()) +
                         " and gradients " + shape_to_string(gradients.shape()) +
                         " must be matching [C,h,w]");
  }
  const std::size_t c = activations.dim(0), h = activations.dim(1), w = activations.dim(2);
  const std::size_t plane = h * w;
  Tensor cam({h, w});
  std::vector<double> acc(plane, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const float* g = gradients.data().data() + ch * plane;
    double weight = 0.0;
    for (std::size_t i = 0; i < plane; ++i) weight += static_cast<double>(g[i]);
    weight /= static_cast<double>(plane);
    const float* a = activations.data().data() + ch * plane;
    for (std::size_t i = 0; i < plane; ++i) acc[i] += weight * static_cast<double>(a[i]);
  }
  for (std::size_t i = 0; i < plane; ++i) {
    cam.data()[i] = acc[i] > 0.0 ? static_cast<float>(acc[i]) : 0.0f;
  }
  return cam;
}

// Min-max normalization to [0,1]. A constant positive map becomes all ones;
// an all-zero map stays all zero.
inline Tensor normalize_minmax(const Tensor& map) {
  Tensor out(map.shape());
  float lo = map.data().empty() ? 0.0f : map.data()[0];
  float hi = lo;
  for (const float v : map.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi > lo) {
    const float inv = 1.0f / (hi - lo);
    for (std::size_t i = 0; i < map.size(); ++i) out.data()[i] = (map.data()[i] - lo) * inv;
  } else if (hi > 0.0f) {
    std::fill(out.data().begin(), out.data().end(), 1.0f);
  }
  return out;
}

// Bilinear upsampling with the half-pixel-center convention.
inline Tensor upsample_bilinear(const Tensor& map, std::size_t out_h, std::size_t out_w) {
  if (map.rank() != 2) throw DimensionError("grad_cam: upsample expects a [h,w] map");
  const std::size_t h = map.dim(0), w = map.dim(1);
  Tensor out({out_h, out_w});
  const double sy = static_cast<double>(h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(w) / static_cast<double>(out_w);
  for (std::size_t i = 0; i < out_h; ++i) {
    double fy = (static_cast<double>(i) + 0.5) * sy - 0.5;
    fy = std::min(std::max(fy, 0.0), static_cast<double>(h - 1));
    const std::size_t y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t j = 0; j < out_w; ++j) {
      double fx = (static_cast<double>(j) + 0.5) * sx - 0.5;
      fx = std::min(std::max(fx, 0.0), static_cast<double>(w - 1));
      const std::size_t x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - static_cast<double>(x0);
      const double top = (1.0 - wx) * map.data()[y0 * w + x0] + wx * map.data()[y0 * w + x1];
      const double bot = (1.0 - wx) * map.data()[y1 * w + x0] + wx * map.data()[y1 * w + x1];
      out.data()[i * out_w + j] = static_cast<float>((1.0 - wy) * top + wy * bot);
    }
  }
  return out;
}

// Grad-CAM saliency for one [C,H,W] image: channel weights are the spatial
// means of d(score[target])/d(activation) at the chosen conv layer; the
// weighted activation sum is rectified, min-max normalized and bilinearly
// upsampled to the input resolution.
inline SaliencyMap grad_cam(const ParameterSet& params, const NetworkSpec& spec,
                            const Tensor& image, int target_class, int conv_layer_index) {
  if (image.rank() != 3) {
    throw DimensionError("grad_cam: image must be [C,H,W], got " +
                         shape_to_string(image.shape()));
  }
  if (target_class < 0 || static_cast<std::size_t>(target_class) >= spec.class_count) {
    throw ParameterError("grad_cam: target class " + std::to_string(target_class) +
                         " outside [0," + std::to_string(spec.class_count) + ")");
  }
  if (conv_layer_index < 0 ||
      static_cast<std::size_t>(conv_layer_index) >= spec.layers.size() ||
      spec.layers[static_cast<std::size_t>(conv_layer_index)].kind != LayerKind::Conv) {
    throw ContractError("grad_cam: layer index " + std::to_string(conv_layer_index) +
                        " does not address a convolutional activation");
  }

  Tensor batch = reshape(image, {1, image.dim(0), image.dim(1), image.dim(2)});
  Tape tape;
  ForwardTrace<float> trace = run_forward(params, spec, batch, &tape, true);
  Tensor score = pick(trace.logits, static_cast<std::size_t>(target_class), &tape);
  tape.backward(score);

  const Tensor& act = trace.layer_outputs[static_cast<std::size_t>(conv_layer_index)];
  const std::size_t c = act.dim(1), h = act.dim(2), w = act.dim(3);
  Tensor activations = Tensor::from_data({c, h, w}, act.data());
  Tensor gradients = Tensor::from_data({c, h, w}, act.grad());

  const Tensor raw = cam_from_activations(activations, gradients);
  const Tensor normalized = normalize_minmax(raw);
  SaliencyMap out;
  // Bilinear interpolation cannot leave the [0,1] range of its inputs.
  out.map = upsample_bilinear(normalized, image.dim(1), image.dim(2));
  out.target_class = target_class;
  out.conv_layer_index = conv_layer_index;
  return out;
}

// Saliency mass of the two half-images, normalized to sum to 1 when the map
// is not identically zero.
inline MassSplit saliency_mass_split(const SaliencyMap& saliency) {
  const Tensor& map = saliency.map;
  if (map.rank() != 2) throw DimensionError("saliency_mass_split: map must be [H,W]");
  const std::size_t h = map.dim(0), w = map.dim(1);
  const std::size_t mid = h / 2;
  double upper = 0.0, lower = 0.0;
  for (std::size_t i = 0; i < h; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < w; ++j) row += static_cast<double>(map.data()[i * w + j]);
    (i < mid ? upper : lower) += row;
  }
  MassSplit split;
  const double total = upper + lower;
  if (total <= 0.0) {
    split.defined = false;
    split.reason = "all-zero saliency map";
    return split;
  }
  split.upper_mass = upper / total;
  split.lower_mass = lower / total;
  return split;
}

// Binary PGM (P5), maxval 255; values scaled by 255 and rounded half-up.
inline void write_pgm(const SaliencyMap& saliency, const std::string& path) {
  const Tensor& map = saliency.map;
  if (map.rank() != 2) throw DimensionError("write_pgm: map must be [H,W]");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("pgm: cannot open \"" + path + "\" for writing");
  out << "P5\n" << map.dim(1) << " " << map.dim(0) << "\n255\n";
  for (const float v : map.data()) {
    const double scaled = std::floor(static_cast<double>(v) * 255.0 + 0.5);
    out.put(static_cast<char>(static_cast<unsigned char>(
        std::min(255.0, std::max(0.0, scaled)))));
  }
  if (!out) throw FormatError("pgm: write failed for \"" + path + "\"");
}

}  // namespace occdist
