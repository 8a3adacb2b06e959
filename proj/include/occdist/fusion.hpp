#pragma once

#include <Eigen/Core>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "occdist/inference.hpp"

namespace occdist {

// Penultimate-layer activations for a whole dataset split.
struct EmbeddingSet {
  Tensor matrix;  // [N,D]
  std::vector<int> labels;
  std::string source_tag;

  std::size_t size() const { return matrix.dim(0); }
  std::size_t width() const { return matrix.dim(1); }
};

inline EmbeddingSet extract_embeddings(const ParameterSet& params, const NetworkSpec& spec,
                                       const OccludedDataset& ds, std::string source_tag = "") {
  EmbeddingSet set;
  set.matrix = compute_embeddings(params, spec, ds);
  set.labels = ds.labels;
  set.source_tag = std::move(source_tag);
  return set;
}

// Row-wise [a_i || b_i]. Labels must agree element-wise.
inline EmbeddingSet concat_embeddings(const EmbeddingSet& a, const EmbeddingSet& b) {
  if (a.size() != b.size() || a.labels != b.labels) {
    throw ConsistencyError("concat_embeddings: label vectors do not match");
  }
  const std::size_t n = a.size(), da = a.width(), db = b.width();
  EmbeddingSet out;
  out.labels = a.labels;
  out.source_tag = a.source_tag.empty() ? b.source_tag : a.source_tag + "+" + b.source_tag;
  out.matrix = Tensor({n, da + db});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(a.matrix.data().data() + i * da, da, out.matrix.data().data() + i * (da + db));
    std::copy_n(b.matrix.data().data() + i * db, db,
                out.matrix.data().data() + i * (da + db) + da);
  }
  return out;
}

// One-vs-rest linear SVM: one weight row and bias per class.
struct LinearSVMModel {
  Tensor weights;  // [K, D]
  Tensor bias;     // [K]
  double c = 1.0;

  std::size_t class_count() const { return weights.dim(0); }
  std::size_t width() const { return weights.dim(1); }
};

// Minimizes (1/2)||w||^2 + C * sum_i max(0, 1 - s_i (w.x_i + b)) per class by
// deterministic full-batch subgradient descent with step 1/(iteration+1).
// The solver is seed-independent (zero initialization, fixed iteration count);
// the seed parameter is kept for interface stability.
inline LinearSVMModel train_linear_svm(const EmbeddingSet& train, double c = 1.0,
                                       int iterations = 5000, std::uint64_t seed = 0) {
  (void)seed;
  if (!(c > 0.0)) throw ParameterError("svm: regularization C must be positive");
  if (iterations < 1) throw ParameterError("svm: iteration count must be positive");
  const std::size_t n = train.size();
  const std::size_t d = train.width();
  if (n == 0) throw TrainingError("svm: empty training set");
  int max_label = 0, min_label = train.labels[0];
  for (const int y : train.labels) {
    max_label = std::max(max_label, y);
    min_label = std::min(min_label, y);
  }
  const std::size_t k = static_cast<std::size_t>(max_label) + 1;
  bool multi_class = false;
  for (const int y : train.labels) {
    if (y != train.labels[0]) multi_class = true;
  }
  if (!multi_class) throw TrainingError("svm: training set contains a single class");

  using Mat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const Mat> x(train.matrix.data().data(), static_cast<Eigen::Index>(n),
                          static_cast<Eigen::Index>(d));
  Mat sign(n, k);  // s_ik in {-1,+1}
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t cls = 0; cls < k; ++cls) {
      sign(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(cls)) =
          train.labels[i] == static_cast<int>(cls) ? 1.0f : -1.0f;
    }
  }

  Mat w = Mat::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
  Eigen::RowVectorXf bias = Eigen::RowVectorXf::Zero(static_cast<Eigen::Index>(k));
  Mat scores(n, k), coef(n, k);
  const float cf = static_cast<float>(c);
  for (int it = 0; it < iterations; ++it) {
    scores.noalias() = x * w.transpose();
    scores.rowwise() += bias;
    // coef_ik = -C * s_ik where the margin is violated, else 0.
    coef = ((sign.array() * scores.array()) < 1.0f).select(-cf * sign, Mat::Zero(n, k));
    const float step = 1.0f / static_cast<float>(it + 1);
    w.noalias() -= step * (coef.transpose() * x + w);
    bias -= step * coef.colwise().sum();
  }

  LinearSVMModel model;
  model.c = c;
  model.weights = Tensor({k, d});
  model.bias = Tensor({k});
  Eigen::Map<Mat>(model.weights.data().data(), static_cast<Eigen::Index>(k),
                  static_cast<Eigen::Index>(d)) = w;
  for (std::size_t cls = 0; cls < k; ++cls) {
    model.bias.data()[cls] = bias(static_cast<Eigen::Index>(cls));
  }
  return model;
}

// argmax_k (w_k . x + b_k); ties resolve to the lowest class id.
inline std::vector<int> svm_predict(const LinearSVMModel& model, const Tensor& embeddings) {
  if (embeddings.rank() != 2 || embeddings.dim(1) != model.width()) {
    throw DimensionError("svm_predict: embeddings " + shape_to_string(embeddings.shape()) +
                         " do not match model width " + std::to_string(model.width()));
  }
  const std::size_t n = embeddings.dim(0), d = model.width(), k = model.class_count();
  std::vector<int> preds(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float* row = embeddings.data().data() + i * d;
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t cls = 0; cls < k; ++cls) {
      const float* wk = model.weights.data().data() + cls * d;
      double s = static_cast<double>(model.bias.data()[cls]);
      for (std::size_t j = 0; j < d; ++j) {
        s += static_cast<double>(wk[j]) * static_cast<double>(row[j]);
      }
      if (s > best_score) {
        best_score = s;
        best = static_cast<int>(cls);
      }
    }
    preds[i] = best;
  }
  return preds;
}

inline std::vector<int> svm_predict(const LinearSVMModel& model, const EmbeddingSet& set) {
  return svm_predict(model, set.matrix);
}

// CSV export: header `label,e0,...,e{D-1}`, 9 significant digits per value.
inline void write_embeddings_csv(const EmbeddingSet& set, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("embeddings: cannot open \"" + path + "\" for writing");
  out << "label";
  for (std::size_t j = 0; j < set.width(); ++j) out << ",e" << j;
  out << "\n";
  char buf[64];
  for (std::size_t i = 0; i < set.size(); ++i) {
    out << set.labels[i];
    const float* row = set.matrix.data().data() + i * set.width();
    for (std::size_t j = 0; j < set.width(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(row[j]));
      out << ',' << buf;
    }
    out << "\n";
  }
  if (!out) throw FormatError("embeddings: write failed for \"" + path + "\"");
}

}  // namespace occdist
