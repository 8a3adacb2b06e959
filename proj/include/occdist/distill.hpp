#pragma once

#include <cmath>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "occdist/inference.hpp"
#include "occdist/ops.hpp"
#include "occdist/parallel.hpp"
#include "occdist/rng.hpp"

namespace occdist {

// Soft-target distillation weights. Defaults: lambda 0.7, temperature 20.
struct KDConfig {
  double lambda_kd = 0.7;
  double tau = 20.0;

  void validate() const {
    if (lambda_kd < 0.0 || lambda_kd > 1.0) {
      throw ParameterError("kd config: lambda must be in [0,1]");
    }
    if (!(tau > 1.0)) throw ParameterError("kd config: tau must be greater than 1");
  }
};

// Triplet distillation settings. Defaults: margin 0.1, loss weight 0.5,
// per-anchor candidate subsets of one tenth of each pool.
struct TripletConfig {
  double alpha = 0.1;
  double lambda_triplet = 0.5;
  double subset_fraction = 0.1;

  void validate() const {
    if (!(alpha > 0.0)) throw ParameterError("triplet config: alpha must be positive");
    if (lambda_triplet < 0.0) {
      throw ParameterError("triplet config: lambda must be non-negative");
    }
    if (!(subset_fraction > 0.0) || subset_fraction > 1.0) {
      throw ParameterError("triplet config: subset fraction must be in (0,1]");
    }
  }
};

// (anchor a', positive p, negative n'): anchor and negative index the
// occluded training set, positive indexes the fully-visible one.
struct Triplet {
  std::size_t anchor_index = 0;
  std::size_t positive_index = 0;
  std::size_t negative_index = 0;
  int epoch = 0;
};

// Mean over the batch of -sum(target * log(prob + eps)), eps = 1e-12.
// Probabilities must be rows of a probability simplex; targets may be one-hot
// or any distribution (e.g. softened teacher outputs).
template <typename T>
BasicTensor<T> cross_entropy(const BasicTensor<T>& probabilities, const BasicTensor<T>& targets,
                             BasicTape<T>* tape = nullptr) {
  if (probabilities.shape() != targets.shape()) {
    throw DimensionError("cross_entropy: shape mismatch " +
                         shape_to_string(probabilities.shape()) + " vs " +
                         shape_to_string(targets.shape()));
  }
  const bool batched = probabilities.rank() == 2;
  if (!batched && probabilities.rank() != 1) {
    throw DimensionError("cross_entropy: input must be [K] or [B,K]");
  }
  const std::size_t rows = batched ? probabilities.dim(0) : 1;
  const std::size_t k = probabilities.dim(batched ? 1 : 0);
  constexpr double kEps = 1e-12;

  const auto& pd = probabilities.data();
  const auto& td = targets.data();
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double row_sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double p = static_cast<double>(pd[r * k + i]);
      if (p < 0.0) {
        throw DomainError("cross_entropy: negative probability at row " + std::to_string(r));
      }
      row_sum += p;
    }
    if (std::abs(row_sum - 1.0) > 1e-5) {
      throw ContractError("cross_entropy: probability row " + std::to_string(r) +
                          " sums to " + std::to_string(row_sum));
    }
    for (std::size_t i = 0; i < k; ++i) {
      total -= static_cast<double>(td[r * k + i]) *
               std::log(static_cast<double>(pd[r * k + i]) + kEps);
    }
  }
  BasicTensor<T> out = BasicTensor<T>::scalar(static_cast<T>(total / rows));

  if (detail::track(tape, probabilities.requires_grad() || targets.requires_grad())) {
    out.set_requires_grad(true);
    tape->record([probabilities = probabilities, targets = targets, out, rows, k]() mutable {
      const T g = out.grad()[0];
      const T inv_rows = T(1) / static_cast<T>(rows);
      const auto& pd = probabilities.data();
      const auto& td = targets.data();
      if (probabilities.requires_grad()) {
        auto& pg = probabilities.grad();
        for (std::size_t i = 0; i < pd.size(); ++i) {
          pg[i] -= g * inv_rows * td[i] / (pd[i] + static_cast<T>(kEps));
        }
      }
      if (targets.requires_grad()) {
        auto& tg = targets.grad();
        for (std::size_t i = 0; i < pd.size(); ++i) {
          tg[i] -= g * inv_rows * std::log(pd[i] + static_cast<T>(kEps));
        }
      }
    });
  }
  return out;
}

// (1-lambda) * CE(y, softmax(A_S)) + lambda * CE(softmax(A_T/tau), softmax(A_S/tau)).
// Teacher logits must be gradient-free; nothing is ever backpropagated into
// them. With lambda 0 this is exactly the plain hard-label cross-entropy.
template <typename T>
BasicTensor<T> kd_loss(const BasicTensor<T>& student_logits,
                       const BasicTensor<T>& teacher_logits, const std::vector<int>& labels,
                       const KDConfig& cfg, BasicTape<T>* tape = nullptr) {
  cfg.validate();
  if (student_logits.shape() != teacher_logits.shape()) {
    throw DimensionError("kd_loss: student logits " + shape_to_string(student_logits.shape()) +
                         " vs teacher logits " + shape_to_string(teacher_logits.shape()));
  }
  if (teacher_logits.requires_grad()) {
    throw ContractError("kd_loss: teacher logits must not carry gradients");
  }
  const bool batched = student_logits.rank() == 2;
  const std::size_t rows = batched ? student_logits.dim(0) : 1;
  const std::size_t k = student_logits.dim(batched ? 1 : 0);
  if (labels.size() != rows) {
    throw ConsistencyError("kd_loss: " + std::to_string(rows) + " logit rows but " +
                           std::to_string(labels.size()) + " labels");
  }
  BasicTensor<T> hard_targets = one_hot<T>(labels, k);
  if (!batched) hard_targets = hard_targets.reshaped({k});

  auto hard_term = [&] {
    return cross_entropy(softmax_with_temperature(student_logits, 1.0, tape), hard_targets,
                         tape);
  };
  auto soft_term = [&] {
    // Teacher soft targets are plain data; no tape involvement.
    BasicTensor<T> soft_targets =
        softmax_with_temperature(teacher_logits, cfg.tau, static_cast<BasicTape<T>*>(nullptr));
    return cross_entropy(softmax_with_temperature(student_logits, cfg.tau, tape), soft_targets,
                         tape);
  };
  if (cfg.lambda_kd == 0.0) return hard_term();
  if (cfg.lambda_kd == 1.0) return soft_term();
  return add(scale(hard_term(), 1.0 - cfg.lambda_kd, tape),
             scale(soft_term(), cfg.lambda_kd, tape), tape);
}

// sqrt(sum((u-v)^2) + eps), eps = 1e-12; differentiable everywhere.
template <typename T>
BasicTensor<T> euclidean_distance(const BasicTensor<T>& u, const BasicTensor<T>& v,
                                  BasicTape<T>* tape = nullptr) {
  if (u.shape() != v.shape()) {
    throw DimensionError("euclidean_distance: shape mismatch " + shape_to_string(u.shape()) +
                         " vs " + shape_to_string(v.shape()));
  }
  constexpr double kEps = 1e-12;
  double sq = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = static_cast<double>(u.data()[i]) - static_cast<double>(v.data()[i]);
    sq += d * d;
  }
  const T dist = static_cast<T>(std::sqrt(sq + kEps));
  BasicTensor<T> out = BasicTensor<T>::scalar(dist);
  if (detail::track(tape, u.requires_grad() || v.requires_grad())) {
    out.set_requires_grad(true);
    tape->record([u = u, v = v, out, dist]() mutable {
      const T g = out.grad()[0] / dist;
      if (u.requires_grad()) {
        auto& ug = u.grad();
        for (std::size_t i = 0; i < ug.size(); ++i) ug[i] += g * (u.data()[i] - v.data()[i]);
      }
      if (v.requires_grad()) {
        auto& vg = v.grad();
        for (std::size_t i = 0; i < vg.size(); ++i) vg[i] += g * (v.data()[i] - u.data()[i]);
      }
    });
  }
  return out;
}

// sum_i [ d(a_i, p_i) - d(a_i, n_i) + alpha ]_+ over the batch. The positive
// embeddings come from the frozen teacher and must be gradient-free; the
// gradient flows through the anchor and negative student embeddings only.
template <typename T>
BasicTensor<T> triplet_loss(const BasicTensor<T>& anchor, const BasicTensor<T>& positive,
                            const BasicTensor<T>& negative, double alpha,
                            BasicTape<T>* tape = nullptr) {
  if (positive.requires_grad()) {
    throw ContractError("triplet_loss: positive embeddings must not carry gradients");
  }
  const bool batched = anchor.rank() == 2;
  if (!batched && anchor.rank() != 1) {
    throw DimensionError("triplet_loss: embeddings must be [D] or [B,D]");
  }
  const std::size_t rows = batched ? anchor.dim(0) : 1;
  const std::size_t d = anchor.dim(batched ? 1 : 0);
  if (anchor.rank() != positive.rank() || anchor.rank() != negative.rank() ||
      (batched && (positive.dim(0) != rows || negative.dim(0) != rows))) {
    throw ContractError("triplet_loss: mismatched batch lengths");
  }
  if (positive.dim(batched ? 1 : 0) != d || negative.dim(batched ? 1 : 0) != d) {
    throw DimensionError("triplet_loss: embedding width mismatch");
  }

  constexpr double kEps = 1e-12;
  std::vector<T> d_pos(rows), d_neg(rows);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double sp = 0.0, sn = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double ap = static_cast<double>(anchor.data()[r * d + i]) -
                        static_cast<double>(positive.data()[r * d + i]);
      const double an = static_cast<double>(anchor.data()[r * d + i]) -
                        static_cast<double>(negative.data()[r * d + i]);
      sp += ap * ap;
      sn += an * an;
    }
    d_pos[r] = static_cast<T>(std::sqrt(sp + kEps));
    d_neg[r] = static_cast<T>(std::sqrt(sn + kEps));
    const double hinge = static_cast<double>(d_pos[r]) - static_cast<double>(d_neg[r]) + alpha;
    if (hinge > 0.0) total += hinge;
  }
  BasicTensor<T> out = BasicTensor<T>::scalar(static_cast<T>(total));

  if (detail::track(tape, anchor.requires_grad() || negative.requires_grad())) {
    out.set_requires_grad(true);
    const T alpha_t = static_cast<T>(alpha);
    auto dp = std::make_shared<std::vector<T>>(std::move(d_pos));
    auto dn = std::make_shared<std::vector<T>>(std::move(d_neg));
    tape->record([anchor = anchor, positive = positive, negative = negative, out, dp, dn, rows,
                  d, alpha_t]() mutable {
      const T g = out.grad()[0];
      for (std::size_t r = 0; r < rows; ++r) {
        if ((*dp)[r] - (*dn)[r] + alpha_t <= T(0)) continue;
        const T inv_dp = T(1) / (*dp)[r];
        const T inv_dn = T(1) / (*dn)[r];
        for (std::size_t i = 0; i < d; ++i) {
          const std::size_t j = r * d + i;
          const T a = anchor.data()[j];
          const T diff_p = a - positive.data()[j];
          const T diff_n = a - negative.data()[j];
          if (anchor.requires_grad()) {
            anchor.grad()[j] += g * (diff_p * inv_dp - diff_n * inv_dn);
          }
          if (negative.requires_grad()) {
            negative.grad()[j] += g * diff_n * inv_dn;
          }
        }
      }
    });
  }
  return out;
}

// CE(y, softmax(A_S)) + lambda_triplet * triplet_term.
template <typename T>
BasicTensor<T> combined_kd_triplet_loss(const BasicTensor<T>& logits,
                                        const std::vector<int>& labels,
                                        const BasicTensor<T>& triplet_term,
                                        const TripletConfig& cfg,
                                        BasicTape<T>* tape = nullptr) {
  cfg.validate();
  const bool batched = logits.rank() == 2;
  const std::size_t k = logits.dim(batched ? 1 : 0);
  BasicTensor<T> targets = one_hot<T>(labels, k);
  if (!batched) targets = targets.reshaped({k});
  BasicTensor<T> ce =
      cross_entropy(softmax_with_temperature(logits, 1.0, tape), targets, tape);
  if (cfg.lambda_triplet == 0.0) return ce;
  return add(ce, scale(triplet_term, cfg.lambda_triplet, tape), tape);
}

// Per-epoch mining summary alongside the mined triplets.
struct MiningResult {
  std::vector<Triplet> triplets;
  double mean_d_pos = 0.0;
  double mean_d_neg = 0.0;
};

// Mines one triplet per anchor from precomputed embedding matrices.
// Candidate subsets are drawn per anchor from one seeded per-epoch stream;
// selection scans squared distances (argmax for the positive over same-class
// visible images, argmin for the negative over different-class occluded
// images) with ties resolved to the lowest dataset index.
inline MiningResult mine_triplets_from_embeddings(const Tensor& student_embeddings,
                                                  const Tensor& teacher_embeddings,
                                                  const std::vector<int>& labels,
                                                  std::size_t class_count,
                                                  const TripletConfig& cfg, std::uint64_t seed,
                                                  int epoch) {
  cfg.validate();
  const std::size_t n = labels.size();
  if (student_embeddings.dim(0) != n || teacher_embeddings.dim(0) != n) {
    throw ConsistencyError("mine_triplets: embedding row count does not match labels");
  }
  const std::size_t d = student_embeddings.dim(1);
  if (teacher_embeddings.dim(1) != d) {
    throw DimensionError("mine_triplets: teacher embedding width mismatch");
  }

  std::vector<std::vector<std::size_t>> same(class_count), diff(class_count);
  for (std::size_t i = 0; i < n; ++i) {
    same[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  for (std::size_t cls = 0; cls < class_count; ++cls) {
    for (std::size_t i = 0; i < n; ++i) {
      if (static_cast<std::size_t>(labels[i]) != cls) diff[cls].push_back(i);
    }
  }

  auto subset_size = [&](std::size_t pool) {
    const auto k = static_cast<std::size_t>(
        std::llround(cfg.subset_fraction * static_cast<double>(pool)));
    return std::min(pool, std::max<std::size_t>(1, k));
  };

  Rng rng = Rng::derived(seed, mix64(0x7a1fu + static_cast<std::uint64_t>(epoch)));
  const float* semb = student_embeddings.data().data();
  const float* temb = teacher_embeddings.data().data();
  auto sq_dist = [d](const float* a, const float* b) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double diff_i = static_cast<double>(a[i]) - static_cast<double>(b[i]);
      s += diff_i * diff_i;
    }
    return s;
  };

  MiningResult result;
  result.triplets.resize(n);
  std::vector<double> best_dp(n), best_dn(n);

  // Subsets are drawn sequentially (single RNG stream, anchors in index
  // order); the argmax/argmin scans then run in parallel per anchor.
  constexpr std::size_t kBlock = 1024;
  std::vector<std::vector<std::size_t>> pos_subset(kBlock), neg_subset(kBlock);
  for (std::size_t block = 0; block < n; block += kBlock) {
    const std::size_t count = std::min(kBlock, n - block);
    for (std::size_t b = 0; b < count; ++b) {
      const std::size_t anchor = block + b;
      const auto cls = static_cast<std::size_t>(labels[anchor]);
      const auto& pos_pool = same[cls];
      const auto& neg_pool = diff[cls];
      if (neg_pool.empty()) {
        throw DatasetError("mine_triplets: no different-class candidates for class " +
                           std::to_string(cls));
      }
      auto draw = [&](const std::vector<std::size_t>& pool) {
        std::vector<std::size_t> out;
        const std::size_t k = subset_size(pool.size());
        if (k == pool.size()) {
          out = pool;
        } else {
          const auto picks = rng.sample_indices(pool.size(), k);
          out.reserve(k);
          for (const std::size_t p : picks) out.push_back(pool[p]);
        }
        return out;
      };
      pos_subset[b] = draw(pos_pool);
      if (pos_subset[b].empty()) {
        // Contract fallback; unreachable while the pool contains the anchor itself.
        std::clog << "mine_triplets: empty positive subset for anchor " << anchor
                  << ", falling back to the full same-class pool\n";
        pos_subset[b] = pos_pool;
      }
      neg_subset[b] = draw(neg_pool);
    }
    parallel_for(count, [&](std::size_t b) {
      const std::size_t anchor = block + b;
      const float* a = semb + anchor * d;
      std::size_t best_pos = pos_subset[b][0];
      double best_pos_d = sq_dist(a, temb + best_pos * d);
      for (std::size_t ci = 1; ci < pos_subset[b].size(); ++ci) {
        const std::size_t cand = pos_subset[b][ci];
        const double dist = sq_dist(a, temb + cand * d);
        if (dist > best_pos_d || (dist == best_pos_d && cand < best_pos)) {
          best_pos_d = dist;
          best_pos = cand;
        }
      }
      std::size_t best_neg = neg_subset[b][0];
      double best_neg_d = sq_dist(a, semb + best_neg * d);
      for (std::size_t ci = 1; ci < neg_subset[b].size(); ++ci) {
        const std::size_t cand = neg_subset[b][ci];
        const double dist = sq_dist(a, semb + cand * d);
        if (dist < best_neg_d || (dist == best_neg_d && cand < best_neg)) {
          best_neg_d = dist;
          best_neg = cand;
        }
      }
      result.triplets[anchor] = Triplet{anchor, best_pos, best_neg, epoch};
      best_dp[anchor] = std::sqrt(best_pos_d);
      best_dn[anchor] = std::sqrt(best_neg_d);
    });
  }

  double sum_dp = 0.0, sum_dn = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum_dp += best_dp[i];
    sum_dn += best_dn[i];
  }
  result.mean_d_pos = sum_dp / static_cast<double>(n);
  result.mean_d_neg = sum_dn / static_cast<double>(n);
  return result;
}

// Spec-level entry: computes the embeddings from the current student/teacher
// weights (once, at epoch start) and mines over them.
inline std::vector<Triplet> mine_triplets(const ParameterSet& student_params,
                                          const ParameterSet& teacher_params,
                                          const NetworkSpec& spec,
                                          const OccludedDataset& occluded_train,
                                          const OccludedDataset& visible_train,
                                          const TripletConfig& cfg, std::uint64_t seed,
                                          int epoch) {
  if (occluded_train.size() != visible_train.size() ||
      occluded_train.labels != visible_train.labels) {
    throw ConsistencyError("mine_triplets: occluded and visible sets must be index-aligned "
                           "with identical labels");
  }
  const Tensor student_emb = compute_embeddings(student_params, spec, occluded_train);
  const Tensor teacher_emb = compute_embeddings(teacher_params, spec, visible_train);
  return mine_triplets_from_embeddings(student_emb, teacher_emb, occluded_train.labels,
                                       occluded_train.class_count, cfg, seed, epoch)
      .triplets;
}

// One JSON object per epoch, appended to the metrics file by the callers.
struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double lr = 0.0;
  std::optional<double> mean_d_pos;
  std::optional<double> mean_d_neg;

  nlohmann::json to_json() const {
    nlohmann::json j{{"epoch", epoch},
                     {"train_loss", train_loss},
                     {"val_accuracy", val_accuracy},
                     {"lr", lr}};
    if (mean_d_pos) j["mean_d_pos"] = *mean_d_pos;
    if (mean_d_neg) j["mean_d_neg"] = *mean_d_neg;
    return j;
  }
};

struct TrainConfig {
  int epochs = 10;
  std::size_t batch_size = 64;
  double learning_rate = 0.01;
  double momentum = 0.9;
  int patience = 10;
  double decay_factor = 0.1;
  std::function<void(const EpochMetrics&)> on_epoch;  // optional live metrics sink
};

struct TrainOutcome {
  ParameterSet best_params;
  double best_val_accuracy = -1.0;
  std::vector<EpochMetrics> metrics;
};

namespace detail {

inline void check_trainable(const OccludedDataset& train, const OccludedDataset& val) {
  if (train.size() == 0 || val.size() == 0) {
    throw DatasetError("train: empty training or validation set");
  }
  if (train.class_count != val.class_count) {
    throw ConsistencyError("train: class count differs between train and validation sets");
  }
}

inline std::vector<int> slice_labels(const std::vector<int>& labels,
                                     const std::vector<std::size_t>& idx) {
  std::vector<int> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = labels[idx[i]];
  return out;
}

// Shared mini-batch loop for plain cross-entropy training and soft-target
// distillation. With kd == nullptr (or lambda 0) the teacher is never
// consulted, so a KD run with lambda 0 follows the baseline trajectory
// bit for bit.
inline TrainOutcome train_classifier_loop(ParameterSet student, const NetworkSpec& spec,
                                          const OccludedDataset& student_train,
                                          const OccludedDataset& val,
                                          const ParameterSet* teacher,
                                          const OccludedDataset* teacher_train,
                                          const KDConfig* kd, const TrainConfig& tc,
                                          std::uint64_t seed) {
  check_trainable(student_train, val);
  const bool use_teacher = teacher != nullptr && kd != nullptr && kd->lambda_kd > 0.0;
  ParameterSet teacher_snapshot;
  if (use_teacher) {
    if (teacher->architecture_fingerprint != student.architecture_fingerprint) {
      throw IncompatibilityError("train: teacher fingerprint " +
                                 teacher->architecture_fingerprint +
                                 " does not match student " +
                                 student.architecture_fingerprint);
    }
    if (teacher_train == nullptr || teacher_train->size() != student_train.size() ||
        teacher_train->labels != student_train.labels) {
      throw ConsistencyError("train: teacher inputs must be index-aligned with the student's");
    }
    teacher_snapshot = teacher->clone();
  }

  OptimizerState state = make_optimizer_state(student, tc.learning_rate, tc.momentum);
  TrainOutcome outcome;
  outcome.best_params = student.clone();

  const std::size_t n = student_train.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    Rng shuffle_rng = Rng::derived(seed, 0xe90cull + static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < n; begin += tc.batch_size) {
      const std::size_t end = std::min(n, begin + tc.batch_size);
      const std::vector<std::size_t> idx(order.begin() + begin, order.begin() + end);
      const std::vector<int> batch_labels = slice_labels(student_train.labels, idx);
      const Tensor batch = make_batch(student_train, idx);

      Tape tape;
      const auto res = forward(student, spec, batch, &tape);
      Tensor loss;
      if (use_teacher) {
        const Tensor teacher_batch = make_batch(*teacher_train, idx);
        const Tensor teacher_logits = forward(*teacher, spec, teacher_batch).logits;
        loss = kd_loss(res.logits, teacher_logits, batch_labels, *kd, &tape);
      } else {
        Tensor targets = one_hot<float>(batch_labels, spec.class_count);
        loss = cross_entropy(softmax_with_temperature(res.logits, 1.0, &tape), targets, &tape);
      }
      student.zero_grads();
      tape.backward(loss);
      sgd_momentum_step(student, state);
      loss_sum += static_cast<double>(loss.item()) * static_cast<double>(idx.size());
    }

    const double val_acc = accuracy_of(predict(student, spec, val), val.labels);
    if (val_acc > outcome.best_val_accuracy) {
      outcome.best_val_accuracy = val_acc;
      outcome.best_params = student.clone();
    }
    decay_on_plateau(state, 1.0 - val_acc, tc.patience, tc.decay_factor);

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(n);
    m.val_accuracy = val_acc;
    m.lr = state.learning_rate;
    if (tc.on_epoch) tc.on_epoch(m);
    outcome.metrics.push_back(std::move(m));
  }

  if (use_teacher && !teacher->bit_identical(teacher_snapshot)) {
    throw ContractError("train: teacher parameters were modified during distillation");
  }
  return outcome;
}

}  // namespace detail

// Plain cross-entropy training on fully-visible images; the result acts as
// the frozen teacher for the distillation runs.
inline TrainOutcome train_teacher(const NetworkSpec& spec, const OccludedDataset& visible_train,
                                  const OccludedDataset& visible_val, const TrainConfig& tc,
                                  std::uint64_t seed) {
  ParameterSet init = init_params(spec, seed, Role::Teacher);
  return detail::train_classifier_loop(std::move(init), spec, visible_train, visible_val,
                                       nullptr, nullptr, nullptr, tc, seed);
}

// Plain cross-entropy training on occluded images (the no-distillation baseline).
inline TrainOutcome train_student_baseline(const NetworkSpec& spec,
                                           const OccludedDataset& occluded_train,
                                           const OccludedDataset& occluded_val,
                                           const TrainConfig& tc, std::uint64_t seed) {
  ParameterSet init = init_params(spec, seed, Role::Student);
  return detail::train_classifier_loop(std::move(init), spec, occluded_train, occluded_val,
                                       nullptr, nullptr, nullptr, tc, seed);
}

// Soft-target teacher-student training: the student sees occluded images, the
// frozen teacher sees the index-aligned fully-visible ones.
inline TrainOutcome train_student_kd(ParameterSet student_init, const ParameterSet& teacher,
                                     const NetworkSpec& spec,
                                     const OccludedDataset& occluded_train,
                                     const OccludedDataset& visible_train,
                                     const OccludedDataset& occluded_val, const KDConfig& kd,
                                     const TrainConfig& tc, std::uint64_t seed) {
  kd.validate();
  return detail::train_classifier_loop(std::move(student_init), spec, occluded_train,
                                       occluded_val, &teacher, &visible_train, &kd, tc, seed);
}

// Triplet-loss teacher-student training. Per epoch: embeddings are computed
// once from the current weights, triplets are mined once, then Eq.-style
// CE + lambda * triplet hinge is minimized over triplet mini-batches.
// Intended to start from a converged baseline student at a reduced rate.
inline TrainOutcome train_student_triplet(ParameterSet student_init,
                                          const ParameterSet& teacher, const NetworkSpec& spec,
                                          const OccludedDataset& occluded_train,
                                          const OccludedDataset& visible_train,
                                          const OccludedDataset& occluded_val,
                                          const TripletConfig& cfg, const TrainConfig& tc,
                                          std::uint64_t seed) {
  cfg.validate();
  detail::check_trainable(occluded_train, occluded_val);
  if (teacher.architecture_fingerprint != student_init.architecture_fingerprint) {
    throw IncompatibilityError("train: teacher fingerprint " +
                               teacher.architecture_fingerprint +
                               " does not match student " +
                               student_init.architecture_fingerprint);
  }
  if (occluded_train.size() != visible_train.size() ||
      occluded_train.labels != visible_train.labels) {
    throw ConsistencyError("train: occluded and visible sets must be index-aligned");
  }

  ParameterSet student = std::move(student_init);
  const ParameterSet teacher_snapshot = teacher.clone();
  OptimizerState state = make_optimizer_state(student, tc.learning_rate, tc.momentum);
  TrainOutcome outcome;
  outcome.best_params = student.clone();

  // The teacher is frozen, so its embeddings are constant across epochs.
  const Tensor teacher_emb = compute_embeddings(teacher, spec, visible_train);
  const std::size_t emb_width = spec.embedding_width();
  const std::size_t n = occluded_train.size();

  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    const Tensor student_emb = compute_embeddings(student, spec, occluded_train);
    MiningResult mined = mine_triplets_from_embeddings(
        student_emb, teacher_emb, occluded_train.labels, occluded_train.class_count, cfg, seed,
        epoch);

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng shuffle_rng = Rng::derived(seed, 0x3b9dull + static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < n; begin += tc.batch_size) {
      const std::size_t end = std::min(n, begin + tc.batch_size);
      std::vector<std::size_t> anchor_idx(end - begin), neg_idx(end - begin);
      Tensor positive({end - begin, emb_width});
      std::vector<int> batch_labels(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        const Triplet& t = mined.triplets[order[i]];
        anchor_idx[i - begin] = t.anchor_index;
        neg_idx[i - begin] = t.negative_index;
        batch_labels[i - begin] = occluded_train.labels[t.anchor_index];
        std::copy_n(teacher_emb.data().data() + t.positive_index * emb_width, emb_width,
                    positive.data().data() + (i - begin) * emb_width);
      }

      Tape tape;
      const auto anchors = forward(student, spec, make_batch(occluded_train, anchor_idx), &tape);
      const auto negatives =
          forward(student, spec, make_batch(occluded_train, neg_idx), &tape);
      const Tensor hinge =
          triplet_loss(anchors.embedding, positive, negatives.embedding, cfg.alpha, &tape);
      Tensor loss = combined_kd_triplet_loss(anchors.logits, batch_labels, hinge, cfg, &tape);
      student.zero_grads();
      tape.backward(loss);
      sgd_momentum_step(student, state);
      loss_sum += static_cast<double>(loss.item()) * static_cast<double>(end - begin);
    }

    const double val_acc = accuracy_of(predict(student, spec, occluded_val), occluded_val.labels);
    if (val_acc > outcome.best_val_accuracy) {
      outcome.best_val_accuracy = val_acc;
      outcome.best_params = student.clone();
    }
    decay_on_plateau(state, 1.0 - val_acc, tc.patience, tc.decay_factor);

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(n);
    m.val_accuracy = val_acc;
    m.lr = state.learning_rate;
    m.mean_d_pos = mined.mean_d_pos;
    m.mean_d_neg = mined.mean_d_neg;
    if (tc.on_epoch) tc.on_epoch(m);
    outcome.metrics.push_back(std::move(m));
  }

  if (!teacher.bit_identical(teacher_snapshot)) {
    throw ContractError("train: teacher parameters were modified during distillation");
  }
  return outcome;
}

}  // namespace occdist
