#pragma once

#include <vector>

#include "occdist/dataset.hpp"
#include "occdist/network.hpp"

namespace occdist {

// Fixed evaluation batch size. Per-image results do not depend on how the
// batch is sliced, but a fixed size keeps whole-run outputs byte-stable.
inline constexpr std::size_t kInferenceBatch = 256;

namespace detail {

template <typename F>
void for_each_batch(std::size_t n, F&& f) {
  for (std::size_t begin = 0; begin < n; begin += kInferenceBatch) {
    const std::size_t end = std::min(n, begin + kInferenceBatch);
    std::vector<std::size_t> idx(end - begin);
    for (std::size_t i = begin; i < end; ++i) idx[i - begin] = i;
    f(begin, idx);
  }
}

}  // namespace detail

// Penultimate-layer activations for every image, row i = image i.
inline Tensor compute_embeddings(const ParameterSet& params, const NetworkSpec& spec,
                                 const OccludedDataset& ds) {
  const std::size_t d = spec.embedding_width();
  Tensor out({ds.size(), d});
  detail::for_each_batch(ds.size(), [&](std::size_t begin, const std::vector<std::size_t>& idx) {
    const auto res = forward(params, spec, make_batch(ds, idx));
    std::copy_n(res.embedding.data().begin(), idx.size() * d,
                out.data().begin() + begin * d);
  });
  return out;
}

// Pre-softmax logits for every image.
inline Tensor compute_logits(const ParameterSet& params, const NetworkSpec& spec,
                             const OccludedDataset& ds) {
  const std::size_t k = spec.class_count;
  Tensor out({ds.size(), k});
  detail::for_each_batch(ds.size(), [&](std::size_t begin, const std::vector<std::size_t>& idx) {
    const auto res = forward(params, spec, make_batch(ds, idx));
    std::copy_n(res.logits.data().begin(), idx.size() * k, out.data().begin() + begin * k);
  });
  return out;
}

// Argmax-of-logits class predictions; ties resolve to the lowest class id.
inline std::vector<int> predict(const ParameterSet& params, const NetworkSpec& spec,
                                const OccludedDataset& ds) {
  const Tensor logits = compute_logits(params, spec, ds);
  const std::size_t k = spec.class_count;
  std::vector<int> preds(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const float* row = logits.data().data() + i * k;
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (row[j] > row[best]) best = j;
    preds[i] = static_cast<int>(best);
  }
  return preds;
}

inline double accuracy_of(const std::vector<int>& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size() || preds.empty()) {
    throw ConsistencyError("accuracy: prediction/label size mismatch");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

}  // namespace occdist
