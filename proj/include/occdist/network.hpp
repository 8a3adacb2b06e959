#pragma once

#include <json.hpp>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "occdist/ops.hpp"
#include "occdist/rng.hpp"
#include "occdist/tensor.hpp"

namespace occdist {

enum class LayerKind { Conv, Relu, MaxPool, Dense };

struct LayerDesc {
  LayerKind kind = LayerKind::Relu;
  int out_channels = 0;  // conv
  int kernel = 0;        // conv kernel size / pool window
  int stride = 1;        // conv and pool
  int padding = 0;       // conv
  int units = 0;         // dense
};

inline LayerDesc conv_layer(int out_channels, int kernel, int stride = 1, int padding = 0) {
  LayerDesc d;
  d.kind = LayerKind::Conv;
  d.out_channels = out_channels;
  d.kernel = kernel;
  d.stride = stride;
  d.padding = padding;
  return d;
}
inline LayerDesc relu_layer() {
  LayerDesc d;
  d.kind = LayerKind::Relu;
  return d;
}
inline LayerDesc maxpool_layer(int window, int stride) {
  LayerDesc d;
  d.kind = LayerKind::MaxPool;
  d.kernel = window;
  d.stride = stride;
  return d;
}
inline LayerDesc dense_layer(int units) {
  LayerDesc d;
  d.kind = LayerKind::Dense;
  d.units = units;
  return d;
}

// Layered CNN description. The last layer must be a dense layer producing
// `class_count` logits; the activation feeding it is the embedding.
struct NetworkSpec {
  std::vector<std::size_t> input_shape;  // [C,H,W]
  std::size_t class_count = 0;
  std::vector<LayerDesc> layers;

  // Shape after every layer; index 0 is the input shape. Dense layers report
  // [units]. Throws on any incompatibility.
  std::vector<std::vector<std::size_t>> propagate_shapes() const {
    if (input_shape.size() != 3 || input_shape[0] == 0 || input_shape[1] == 0 ||
        input_shape[2] == 0) {
      throw DimensionError("network: input shape must be [C,H,W], got " +
                           shape_to_string(input_shape));
    }
    if (class_count == 0) throw ParameterError("network: class count must be positive");
    if (layers.empty() || layers.back().kind != LayerKind::Dense ||
        static_cast<std::size_t>(layers.back().units) != class_count) {
      throw ContractError("network: the final layer must be dense(class_count)");
    }
    std::vector<std::vector<std::size_t>> shapes{input_shape};
    bool seen_dense = false;
    for (std::size_t li = 0; li < layers.size(); ++li) {
      const LayerDesc& l = layers[li];
      const auto& cur = shapes.back();
      switch (l.kind) {
        case LayerKind::Conv: {
          if (seen_dense) throw ContractError("network: conv layer after a dense layer");
          if (cur.size() != 3) throw DimensionError("network: conv layer needs [C,H,W] input");
          if (l.out_channels < 1 || l.kernel < 1 || l.stride < 1 || l.padding < 0) {
            throw ParameterError("network: bad conv layer parameters at index " +
                                 std::to_string(li));
          }
          const std::size_t kh = static_cast<std::size_t>(l.kernel);
          const std::size_t pad = static_cast<std::size_t>(l.padding);
          if (kh > cur[1] + 2 * pad || kh > cur[2] + 2 * pad) {
            throw DimensionError("network: conv kernel exceeds padded input at layer " +
                                 std::to_string(li));
          }
          const std::size_t oh = (cur[1] + 2 * pad - kh) / l.stride + 1;
          const std::size_t ow = (cur[2] + 2 * pad - kh) / l.stride + 1;
          shapes.push_back({static_cast<std::size_t>(l.out_channels), oh, ow});
          break;
        }
        case LayerKind::Relu:
          shapes.push_back(cur);
          break;
        case LayerKind::MaxPool: {
          if (seen_dense) throw ContractError("network: maxpool layer after a dense layer");
          if (cur.size() != 3) throw DimensionError("network: maxpool needs [C,H,W] input");
          if (l.kernel < 1 || l.stride < 1) {
            throw ParameterError("network: bad maxpool parameters at index " +
                                 std::to_string(li));
          }
          const std::size_t win = static_cast<std::size_t>(l.kernel);
          if (win > cur[1] || win > cur[2]) {
            throw DimensionError("network: pool window exceeds input at layer " +
                                 std::to_string(li));
          }
          shapes.push_back({cur[0], (cur[1] - win) / l.stride + 1, (cur[2] - win) / l.stride + 1});
          break;
        }
        case LayerKind::Dense: {
          if (l.units < 1) {
            throw ParameterError("network: bad dense units at index " + std::to_string(li));
          }
          seen_dense = true;
          shapes.push_back({static_cast<std::size_t>(l.units)});
          break;
        }
      }
    }
    return shapes;
  }

  // Width of the activation vector feeding the final dense layer.
  std::size_t embedding_width() const {
    const auto shapes = propagate_shapes();
    const auto& pre = shapes[shapes.size() - 2];
    std::size_t d = 1;
    for (const std::size_t v : pre) d *= v;
    return d;
  }

  nlohmann::json to_json() const {
    nlohmann::json layers_json = nlohmann::json::array();
    for (const LayerDesc& l : layers) {
      nlohmann::json j;
      switch (l.kind) {
        case LayerKind::Conv:
          j["type"] = "conv";
          j["out_channels"] = l.out_channels;
          j["kernel"] = l.kernel;
          j["stride"] = l.stride;
          j["padding"] = l.padding;
          break;
        case LayerKind::Relu:
          j["type"] = "relu";
          break;
        case LayerKind::MaxPool:
          j["type"] = "maxpool";
          j["window"] = l.kernel;
          j["stride"] = l.stride;
          break;
        case LayerKind::Dense:
          j["type"] = "dense";
          j["units"] = l.units;
          break;
      }
      layers_json.push_back(std::move(j));
    }
    return nlohmann::json{
        {"classes", class_count}, {"input", input_shape}, {"layers", layers_json}};
  }

  static NetworkSpec from_json(const nlohmann::json& j) {
    NetworkSpec spec;
    spec.class_count = j.at("classes").get<std::size_t>();
    spec.input_shape = j.at("input").get<std::vector<std::size_t>>();
    for (const auto& lj : j.at("layers")) {
      const std::string type = lj.at("type").get<std::string>();
      if (type == "conv") {
        spec.layers.push_back(conv_layer(lj.at("out_channels").get<int>(),
                                         lj.at("kernel").get<int>(), lj.at("stride").get<int>(),
                                         lj.at("padding").get<int>()));
      } else if (type == "relu") {
        spec.layers.push_back(relu_layer());
      } else if (type == "maxpool") {
        spec.layers.push_back(maxpool_layer(lj.at("window").get<int>(),
                                            lj.at("stride").get<int>()));
      } else if (type == "dense") {
        spec.layers.push_back(dense_layer(lj.at("units").get<int>()));
      } else {
        throw FormatError("network: unknown layer type \"" + type + "\"");
      }
    }
    return spec;
  }

  // nlohmann::json keeps object keys sorted, so dump() is canonical.
  std::string canonical_string() const { return to_json().dump(); }

  std::string fingerprint() const {
    const std::string s = canonical_string();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
      out[static_cast<std::size_t>(i)] = hex[h & 0xf];
      h >>= 4;
    }
    return out;
  }

  bool operator==(const NetworkSpec& other) const {
    return canonical_string() == other.canonical_string();
  }
};

// conv(32,3x3)-relu-maxpool(2)-conv(64,3x3)-relu-maxpool(2)-dense(128)-relu-dense(K).
inline NetworkSpec desk_backbone(std::vector<std::size_t> input_shape, std::size_t classes) {
  NetworkSpec spec;
  spec.input_shape = std::move(input_shape);
  spec.class_count = classes;
  spec.layers = {conv_layer(32, 3, 1, 1), relu_layer(), maxpool_layer(2, 2),
                 conv_layer(64, 3, 1, 1), relu_layer(), maxpool_layer(2, 2),
                 dense_layer(128),        relu_layer(), dense_layer(static_cast<int>(classes))};
  return spec;
}

enum class Role { Teacher, Student };

inline const char* role_name(Role r) { return r == Role::Teacher ? "teacher" : "student"; }

// Named trainable tensors for a NetworkSpec, in layer order.
template <typename T>
struct BasicParameterSet {
  struct Named {
    std::string name;
    BasicTensor<T> tensor;
  };
  std::vector<Named> params;
  Role role = Role::Student;
  std::string architecture_fingerprint;

  BasicTensor<T>& find(const std::string& name) {
    for (auto& p : params)
      if (p.name == name) return p.tensor;
    throw ContractError("parameters: no tensor named \"" + name + "\"");
  }
  const BasicTensor<T>& find(const std::string& name) const {
    for (const auto& p : params)
      if (p.name == name) return p.tensor;
    throw ContractError("parameters: no tensor named \"" + name + "\"");
  }

  void zero_grads() {
    for (auto& p : params) p.tensor.zero_grad();
  }

  BasicParameterSet clone() const {
    BasicParameterSet c;
    c.role = role;
    c.architecture_fingerprint = architecture_fingerprint;
    c.params.reserve(params.size());
    for (const auto& p : params) c.params.push_back({p.name, p.tensor.clone()});
    return c;
  }

  bool bit_identical(const BasicParameterSet& other) const {
    if (params.size() != other.params.size()) return false;
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i].name != other.params[i].name) return false;
      if (params[i].tensor.data() != other.params[i].tensor.data()) return false;
    }
    return true;
  }
};

using ParameterSet = BasicParameterSet<float>;

// He fan-in initialization with a seeded generator; biases start at zero.
template <typename T = float>
BasicParameterSet<T> init_params(const NetworkSpec& spec, std::uint64_t seed,
                                 Role role = Role::Student) {
  const auto shapes = spec.propagate_shapes();
  BasicParameterSet<T> ps;
  ps.role = role;
  ps.architecture_fingerprint = spec.fingerprint();
  Rng rng = Rng::derived(seed, 0x1317u);
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const LayerDesc& l = spec.layers[li];
    if (l.kind == LayerKind::Conv) {
      const std::size_t cin = shapes[li].at(0);
      const std::size_t kh = static_cast<std::size_t>(l.kernel);
      const std::size_t cout = static_cast<std::size_t>(l.out_channels);
      BasicTensor<T> w({cout, cin, kh, kh}, true);
      const double stddev = std::sqrt(2.0 / static_cast<double>(cin * kh * kh));
      for (auto& v : w.data()) v = static_cast<T>(rng.normal() * stddev);
      BasicTensor<T> b({cout}, true);
      const std::string base = "conv" + std::to_string(li);
      ps.params.push_back({base + ".weight", std::move(w)});
      ps.params.push_back({base + ".bias", std::move(b)});
    } else if (l.kind == LayerKind::Dense) {
      std::size_t in_features = 1;
      for (const std::size_t v : shapes[li]) in_features *= v;
      const std::size_t units = static_cast<std::size_t>(l.units);
      BasicTensor<T> w({in_features, units}, true);
      const double stddev = std::sqrt(2.0 / static_cast<double>(in_features));
      for (auto& v : w.data()) v = static_cast<T>(rng.normal() * stddev);
      BasicTensor<T> b({units}, true);
      const std::string base = "dense" + std::to_string(li);
      ps.params.push_back({base + ".weight", std::move(w)});
      ps.params.push_back({base + ".bias", std::move(b)});
    }
  }
  return ps;
}

template <typename T>
struct ForwardResult {
  BasicTensor<T> logits;     // [B,K], pre-softmax
  BasicTensor<T> embedding;  // [B,D], input of the final dense layer
};

template <typename T>
struct ForwardTrace {
  BasicTensor<T> logits;
  BasicTensor<T> embedding;
  std::vector<BasicTensor<T>> layer_outputs;  // aligned with spec.layers
};

// Runs the network on a [B,C,H,W] batch. Records on `tape` when given;
// keep_activations retains every layer output (used by Grad-CAM).
template <typename T>
ForwardTrace<T> run_forward(const BasicParameterSet<T>& params, const NetworkSpec& spec,
                            const BasicTensor<T>& batch, BasicTape<T>* tape = nullptr,
                            bool keep_activations = false) {
  if (batch.rank() != 4 || batch.dim(1) != spec.input_shape[0] ||
      batch.dim(2) != spec.input_shape[1] || batch.dim(3) != spec.input_shape[2]) {
    throw DimensionError("forward: batch " + shape_to_string(batch.shape()) +
                         " does not match network input " + shape_to_string(spec.input_shape));
  }
  if (params.architecture_fingerprint != spec.fingerprint()) {
    throw IncompatibilityError("forward: parameter fingerprint " +
                               params.architecture_fingerprint + " does not match spec " +
                               spec.fingerprint());
  }
  const std::size_t batch_size = batch.dim(0);
  ForwardTrace<T> trace;
  BasicTensor<T> cur = batch;
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const LayerDesc& l = spec.layers[li];
    const bool final_layer = li + 1 == spec.layers.size();
    switch (l.kind) {
      case LayerKind::Conv: {
        const auto& w = params.find("conv" + std::to_string(li) + ".weight");
        const auto& b = params.find("conv" + std::to_string(li) + ".bias");
        cur = add_channel_bias(conv2d(cur, w, l.stride, l.padding, tape), b, tape);
        break;
      }
      case LayerKind::Relu:
        cur = relu(cur, tape);
        break;
      case LayerKind::MaxPool:
        cur = maxpool2d(cur, l.kernel, l.stride, tape);
        break;
      case LayerKind::Dense: {
        if (cur.rank() != 2) {
          cur = reshape(cur, {batch_size, cur.size() / batch_size}, tape);
        }
        if (final_layer) trace.embedding = cur;
        const auto& w = params.find("dense" + std::to_string(li) + ".weight");
        const auto& b = params.find("dense" + std::to_string(li) + ".bias");
        cur = add_bias(matmul(cur, w, tape), b, tape);
        break;
      }
    }
    if (keep_activations) trace.layer_outputs.push_back(cur);
  }
  trace.logits = cur;
  return trace;
}

template <typename T>
ForwardResult<T> forward(const BasicParameterSet<T>& params, const NetworkSpec& spec,
                         const BasicTensor<T>& batch, BasicTape<T>* tape = nullptr) {
  ForwardTrace<T> trace = run_forward(params, spec, batch, tape, false);
  return {trace.logits, trace.embedding};
}

// SGD-with-momentum state. The learning rate may only decrease over a run.
struct OptimizerState {
  double momentum = 0.9;
  double learning_rate = 0.0;
  int patience_counter = 0;
  double best_validation_error = std::numeric_limits<double>::infinity();
  std::vector<std::pair<std::string, Tensor>> velocity;
};

inline OptimizerState make_optimizer_state(const ParameterSet& params, double learning_rate,
                                           double momentum = 0.9) {
  if (momentum < 0.0 || momentum >= 1.0) {
    throw ParameterError("optimizer: momentum must be in [0,1)");
  }
  if (!(learning_rate > 0.0)) {
    throw ParameterError("optimizer: learning rate must be positive");
  }
  OptimizerState state;
  state.momentum = momentum;
  state.learning_rate = learning_rate;
  for (const auto& p : params.params) {
    state.velocity.emplace_back(p.name, Tensor(p.tensor.shape()));
  }
  return state;
}

// v <- mu*v + g;  w <- w - lr*v. Gradients must be present on every parameter.
inline void sgd_momentum_step(ParameterSet& params, OptimizerState& state) {
  if (state.velocity.size() != params.params.size()) {
    throw ContractError("sgd: optimizer state does not match parameter set");
  }
  const float mu = static_cast<float>(state.momentum);
  const float lr = static_cast<float>(state.learning_rate);
  for (std::size_t i = 0; i < params.params.size(); ++i) {
    auto& p = params.params[i].tensor;
    if (!p.requires_grad() || !p.has_grad()) {
      throw ContractError("sgd: missing gradient for parameter \"" +
                          params.params[i].name + "\"");
    }
    auto& v = state.velocity[i].second.data();
    const auto& g = p.grad();
    auto& w = p.data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      v[j] = mu * v[j] + g[j];
      w[j] -= lr * v[j];
    }
  }
}

// Multiplies the learning rate by `factor` after `patience` consecutive
// epochs without strict improvement of the validation error.
inline void decay_on_plateau(OptimizerState& state, double validation_error, int patience = 10,
                             double factor = 0.1) {
  if (validation_error < state.best_validation_error) {
    state.best_validation_error = validation_error;
    state.patience_counter = 0;
    return;
  }
  ++state.patience_counter;
  if (state.patience_counter >= patience) {
    state.learning_rate *= factor;
    state.patience_counter = 0;
  }
}

}  // namespace occdist
