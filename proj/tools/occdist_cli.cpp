// Command-line front end for the occlusion-distillation pipeline:
//   train-teacher, train-student, distill-kd, distill-triplet,
//   fuse, evaluate, compare, explain
// One JSON config per invocation; artifact names are derived from the config
// hash so identical configs always map to identical output paths.

#include <CLI11.hpp>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>

#include "occdist/checkpoint.hpp"
#include "occdist/distill.hpp"
#include "occdist/eval.hpp"
#include "occdist/explain.hpp"
#include "occdist/fusion.hpp"
#include "occdist/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitUsage = 64;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fnv1a_hex12(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  static const char* hex = "0123456789abcdef";
  std::string out(12, '0');
  for (int i = 11; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = hex[h & 0xf];
    h >>= 4;
  }
  return out;
}

const json& require_field(const json& obj, const std::string& path) {
  const json* cur = &obj;
  std::string walked;
  std::size_t begin = 0;
  while (begin <= path.size()) {
    const std::size_t dot = path.find('.', begin);
    const std::string key = path.substr(begin, dot == std::string::npos ? dot : dot - begin);
    walked = walked.empty() ? key : walked + "." + key;
    if (!cur->is_object() || !cur->contains(key)) {
      throw ConfigError("missing required field \"" + walked + "\"");
    }
    cur = &(*cur)[key];
    if (dot == std::string::npos) break;
    begin = dot + 1;
  }
  return *cur;
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
  if (!obj.is_object() || !obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("field \"" + key + "\" has the wrong type");
  }
}

std::string require_existing_path(const json& cfg, const std::string& path) {
  const json& v = require_field(cfg, path);
  if (!v.is_string()) throw ConfigError("field \"" + path + "\" must be a path string");
  const std::string p = v.get<std::string>();
  if (!fs::exists(p)) throw ConfigError("field \"" + path + "\": path \"" + p + "\" does not exist");
  return p;
}

// Shared per-invocation context: parsed config, output naming, sidecar log.
struct RunContext {
  json cfg;
  std::string command;
  std::string hash;
  fs::path outdir;
  std::uint64_t seed = 0;
  std::ofstream log;

  fs::path artifact(const std::string& suffix) const {
    return outdir / (command + "-" + hash + suffix);
  }

  void log_line(const std::string& msg) {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
    log << buf << " " << msg << "\n";
    log.flush();
  }
};

RunContext make_context(const std::string& command, const std::string& config_path) {
  std::ifstream in(config_path);
  if (!in) throw ConfigError("cannot open config file \"" + config_path + "\"");
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  RunContext ctx;
  ctx.command = command;
  const json& seed = require_field(cfg, "seed");
  if (!seed.is_number_unsigned() && !seed.is_number_integer()) {
    throw ConfigError("field \"seed\" must be an integer");
  }
  ctx.seed = seed.get<std::uint64_t>();
  const json& outdir = require_field(cfg, "output_dir");
  if (!outdir.is_string()) throw ConfigError("field \"output_dir\" must be a string");
  ctx.outdir = outdir.get<std::string>();
  ctx.cfg = std::move(cfg);
  ctx.hash = fnv1a_hex12(command + "\n" + ctx.cfg.dump());
  fs::create_directories(ctx.outdir);
  ctx.log.open(ctx.artifact(".log"), std::ios::trunc);
  return ctx;
}

occdist::TrainConfig train_config_from(const json& cfg) {
  const json train = cfg.contains("train") ? cfg.at("train") : json::object();
  occdist::TrainConfig tc;
  tc.epochs = get_or<int>(train, "epochs", 10);
  tc.batch_size = get_or<std::size_t>(train, "batch_size", 64);
  tc.learning_rate = get_or<double>(train, "learning_rate", 0.01);
  tc.momentum = get_or<double>(train, "momentum", 0.9);
  tc.patience = get_or<int>(train, "patience", 10);
  tc.decay_factor = get_or<double>(train, "decay_factor", 0.1);
  if (tc.epochs < 1) throw ConfigError("field \"train.epochs\" must be positive");
  if (tc.batch_size < 1) throw ConfigError("field \"train.batch_size\" must be positive");
  return tc;
}

occdist::KDConfig kd_config_from(const json& cfg) {
  const json kd = cfg.contains("kd") ? cfg.at("kd") : json::object();
  occdist::KDConfig out;
  out.lambda_kd = get_or<double>(kd, "lambda", 0.7);
  out.tau = get_or<double>(kd, "tau", 20.0);
  return out;
}

occdist::TripletConfig triplet_config_from(const json& cfg) {
  const json tr = cfg.contains("triplet") ? cfg.at("triplet") : json::object();
  occdist::TripletConfig out;
  out.alpha = get_or<double>(tr, "alpha", 0.1);
  out.lambda_triplet = get_or<double>(tr, "lambda", 0.5);
  out.subset_fraction = get_or<double>(tr, "subset_fraction", 0.1);
  return out;
}

occdist::OcclusionMode occlusion_from(const json& cfg) {
  const json& mode = require_field(cfg, "data.occlusion");
  if (!mode.is_string()) throw ConfigError("field \"data.occlusion\" must be a string");
  try {
    return occdist::occlusion_from_name(mode.get<std::string>());
  } catch (const occdist::ParameterError& e) {
    throw ConfigError(std::string("field \"data.occlusion\": ") + e.what());
  }
}

// Loads one IDX pair named by `<split>_images` / `<split>_labels`.
occdist::OccludedDataset load_split(const json& cfg, const std::string& split) {
  const std::string images = require_existing_path(cfg, "data." + split + "_images");
  const std::string labels = require_existing_path(cfg, "data." + split + "_labels");
  std::optional<std::size_t> cap;
  const json data = cfg.at("data");
  if (data.contains("per_class_cap") && !data.at("per_class_cap").is_null()) {
    cap = data.at("per_class_cap").get<std::size_t>();
  }
  occdist::OccludedDataset ds = occdist::load_idx_dataset(images, labels, cap);
  if (data.contains("resize") && !data.at("resize").is_null()) {
    const auto hw = data.at("resize").get<std::vector<std::size_t>>();
    if (hw.size() != 2) throw ConfigError("field \"data.resize\" must be [height,width]");
    ds = occdist::resize_nearest(ds, hw[0], hw[1]);
  }
  return ds;
}

occdist::NetworkSpec spec_from_config(const json& cfg, const occdist::OccludedDataset& ds) {
  const json net = cfg.contains("network") ? cfg.at("network") : json::object();
  const std::string arch = get_or<std::string>(net, "arch", "desk");
  const auto classes = get_or<std::size_t>(net, "classes", ds.class_count);
  const std::vector<std::size_t> input{ds.channels(), ds.height(), ds.width()};
  if (arch == "desk") return occdist::desk_backbone(input, classes);
  if (arch == "custom") {
    occdist::NetworkSpec spec;
    spec.input_shape = input;
    spec.class_count = classes;
    const json& layers = require_field(cfg, "network.layers");
    spec.layers = occdist::NetworkSpec::from_json(
                      json{{"classes", classes}, {"input", input}, {"layers", layers}})
                      .layers;
    return spec;
  }
  throw ConfigError("field \"network.arch\" must be \"desk\" or \"custom\"");
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(2) << "\n";
  if (!out) throw occdist::FormatError("cannot write \"" + path.string() + "\"");
}

void write_predictions_file(const fs::path& path, const std::vector<int>& labels,
                            const std::vector<int>& preds, const std::string& source) {
  write_json_file(path, json{{"labels", labels}, {"predictions", preds}, {"source", source}});
}

// Appends live per-epoch metric rows and prints progress.
struct MetricsSink {
  std::ofstream out;
  explicit MetricsSink(const fs::path& path) : out(path, std::ios::trunc) {}
  void operator()(const occdist::EpochMetrics& m) {
    out << m.to_json().dump() << "\n";
    out.flush();
    std::cout << "  epoch " << m.epoch << ": train_loss=" << m.train_loss
              << " val_accuracy=" << m.val_accuracy << " lr=" << m.lr << "\n";
  }
};

int cmd_train(RunContext& ctx, bool teacher_role) {
  const occdist::TrainConfig base_tc = train_config_from(ctx.cfg);
  const occdist::OcclusionMode mode = occlusion_from(ctx.cfg);
  const double val_fraction = get_or<double>(ctx.cfg.at("data"), "validation_fraction", 0.1);

  occdist::OccludedDataset full = load_split(ctx.cfg, "train");
  if (!teacher_role) full = occdist::apply_occlusion(full, mode);
  auto [train, val] = occdist::split(full, val_fraction, ctx.seed);

  const occdist::NetworkSpec spec = spec_from_config(ctx.cfg, train);
  ctx.log_line(ctx.command + " started: n_train=" + std::to_string(train.size()) +
               " n_val=" + std::to_string(val.size()));

  occdist::TrainConfig tc = base_tc;
  MetricsSink sink(ctx.artifact(".metrics.jsonl"));
  tc.on_epoch = std::ref(sink);

  occdist::TrainOutcome outcome =
      teacher_role ? occdist::train_teacher(spec, train, val, tc, ctx.seed)
                   : occdist::train_student_baseline(spec, train, val, tc, ctx.seed);

  occdist::OptimizerState state =
      occdist::make_optimizer_state(outcome.best_params, tc.learning_rate, tc.momentum);
  occdist::save_checkpoint(outcome.best_params, spec, state, ctx.artifact(".ckpt").string());
  std::cout << "checkpoint: " << ctx.artifact(".ckpt").string() << "\n"
            << "best validation accuracy: " << outcome.best_val_accuracy << "\n";
  ctx.log_line(ctx.command + " finished");
  return kExitOk;
}

int cmd_distill_kd(RunContext& ctx) {
  const std::string teacher_path = require_existing_path(ctx.cfg, "inputs.teacher_checkpoint");
  const occdist::TrainConfig base_tc = train_config_from(ctx.cfg);
  const occdist::KDConfig kd = kd_config_from(ctx.cfg);
  kd.validate();
  const occdist::OcclusionMode mode = occlusion_from(ctx.cfg);
  const double val_fraction = get_or<double>(ctx.cfg.at("data"), "validation_fraction", 0.1);

  const occdist::Checkpoint teacher = occdist::load_checkpoint(teacher_path);
  const occdist::OccludedDataset full_visible = load_split(ctx.cfg, "train");
  const occdist::OccludedDataset full_occluded = occdist::apply_occlusion(full_visible, mode);
  auto [occluded_train, occluded_val] = occdist::split(full_occluded, val_fraction, ctx.seed);
  auto [visible_train, visible_val] = occdist::split(full_visible, val_fraction, ctx.seed);
  (void)visible_val;

  ctx.log_line("distill-kd started");
  occdist::TrainConfig tc = base_tc;
  MetricsSink sink(ctx.artifact(".metrics.jsonl"));
  tc.on_epoch = std::ref(sink);

  occdist::ParameterSet student_init =
      occdist::init_params(teacher.spec, ctx.seed, occdist::Role::Student);
  occdist::TrainOutcome outcome =
      occdist::train_student_kd(std::move(student_init), teacher.params, teacher.spec,
                                occluded_train, visible_train, occluded_val, kd, tc, ctx.seed);

  occdist::OptimizerState state =
      occdist::make_optimizer_state(outcome.best_params, tc.learning_rate, tc.momentum);
  occdist::save_checkpoint(outcome.best_params, teacher.spec, state,
                           ctx.artifact(".ckpt").string());
  std::cout << "checkpoint: " << ctx.artifact(".ckpt").string() << "\n"
            << "best validation accuracy: " << outcome.best_val_accuracy << "\n";
  ctx.log_line("distill-kd finished");
  return kExitOk;
}

int cmd_distill_triplet(RunContext& ctx) {
  const std::string teacher_path = require_existing_path(ctx.cfg, "inputs.teacher_checkpoint");
  const std::string baseline_path =
      require_existing_path(ctx.cfg, "inputs.baseline_checkpoint");
  const occdist::TrainConfig base_tc = train_config_from(ctx.cfg);
  const occdist::TripletConfig tcfg = triplet_config_from(ctx.cfg);
  tcfg.validate();
  const occdist::OcclusionMode mode = occlusion_from(ctx.cfg);
  const double val_fraction = get_or<double>(ctx.cfg.at("data"), "validation_fraction", 0.1);

  const occdist::Checkpoint teacher = occdist::load_checkpoint(teacher_path);
  occdist::ParameterSet student =
      occdist::load_checkpoint_params(baseline_path, teacher.spec);
  student.role = occdist::Role::Student;

  const occdist::OccludedDataset full_visible = load_split(ctx.cfg, "train");
  const occdist::OccludedDataset full_occluded = occdist::apply_occlusion(full_visible, mode);
  auto [occluded_train, occluded_val] = occdist::split(full_occluded, val_fraction, ctx.seed);
  auto [visible_train, visible_val] = occdist::split(full_visible, val_fraction, ctx.seed);
  (void)visible_val;

  ctx.log_line("distill-triplet started");
  occdist::TrainConfig tc = base_tc;
  MetricsSink sink(ctx.artifact(".metrics.jsonl"));
  tc.on_epoch = std::ref(sink);

  occdist::TrainOutcome outcome = occdist::train_student_triplet(
      std::move(student), teacher.params, teacher.spec, occluded_train, visible_train,
      occluded_val, tcfg, tc, ctx.seed);

  occdist::OptimizerState state =
      occdist::make_optimizer_state(outcome.best_params, tc.learning_rate, tc.momentum);
  occdist::save_checkpoint(outcome.best_params, teacher.spec, state,
                           ctx.artifact(".ckpt").string());
  std::cout << "checkpoint: " << ctx.artifact(".ckpt").string() << "\n"
            << "best validation accuracy: " << outcome.best_val_accuracy << "\n";
  ctx.log_line("distill-triplet finished");
  return kExitOk;
}

int cmd_fuse(RunContext& ctx) {
  const std::string kd_path = require_existing_path(ctx.cfg, "inputs.kd_checkpoint");
  const std::string triplet_path = require_existing_path(ctx.cfg, "inputs.triplet_checkpoint");
  const occdist::OcclusionMode mode = occlusion_from(ctx.cfg);
  const json svm = ctx.cfg.contains("svm") ? ctx.cfg.at("svm") : json::object();
  const double c = get_or<double>(svm, "c", 1.0);
  const int iterations = get_or<int>(svm, "iterations", 5000);

  const occdist::Checkpoint kd_ckpt = occdist::load_checkpoint(kd_path);
  const occdist::ParameterSet triplet_params =
      occdist::load_checkpoint_params(triplet_path, kd_ckpt.spec);
  const occdist::NetworkSpec& spec = kd_ckpt.spec;

  const occdist::OccludedDataset train =
      occdist::apply_occlusion(load_split(ctx.cfg, "train"), mode);
  const occdist::OccludedDataset test =
      occdist::apply_occlusion(load_split(ctx.cfg, "test"), mode);

  ctx.log_line("fuse started");
  const occdist::EmbeddingSet train_fused = occdist::concat_embeddings(
      occdist::extract_embeddings(kd_ckpt.params, spec, train, "kd"),
      occdist::extract_embeddings(triplet_params, spec, train, "triplet"));
  const occdist::EmbeddingSet test_fused = occdist::concat_embeddings(
      occdist::extract_embeddings(kd_ckpt.params, spec, test, "kd"),
      occdist::extract_embeddings(triplet_params, spec, test, "triplet"));

  const occdist::LinearSVMModel model =
      occdist::train_linear_svm(train_fused, c, iterations, ctx.seed);
  const std::vector<int> preds = occdist::svm_predict(model, test_fused);
  const occdist::EvalReport report =
      occdist::evaluate_predictions(preds, test.labels, spec.class_count);

  occdist::write_embeddings_csv(train_fused, ctx.artifact(".train.csv").string());
  occdist::write_embeddings_csv(test_fused, ctx.artifact(".test.csv").string());
  write_json_file(ctx.artifact(".report.json"), report.to_json());
  write_predictions_file(ctx.artifact(".predictions.json"), test.labels, preds,
                         ctx.command + "-" + ctx.hash);
  std::cout << "fused test accuracy: " << report.accuracy << "\n"
            << "report: " << ctx.artifact(".report.json").string() << "\n";
  ctx.log_line("fuse finished");
  return kExitOk;
}

int cmd_evaluate(RunContext& ctx) {
  const std::string ckpt_path = require_existing_path(ctx.cfg, "inputs.checkpoint");
  const occdist::OcclusionMode mode = occlusion_from(ctx.cfg);
  const occdist::Checkpoint ckpt = occdist::load_checkpoint(ckpt_path);
  occdist::OccludedDataset test = load_split(ctx.cfg, "test");
  if (mode != occdist::OcclusionMode::None) test = occdist::apply_occlusion(test, mode);

  ctx.log_line("evaluate started");
  const std::vector<int> preds = occdist::predict(ckpt.params, ckpt.spec, test);
  const occdist::EvalReport report =
      occdist::evaluate_predictions(preds, test.labels, ckpt.spec.class_count);
  write_json_file(ctx.artifact(".report.json"), report.to_json());
  write_predictions_file(ctx.artifact(".predictions.json"), test.labels, preds,
                         ctx.command + "-" + ctx.hash);
  std::cout << "accuracy: " << report.accuracy << "\n"
            << "report: " << ctx.artifact(".report.json").string() << "\n";
  ctx.log_line("evaluate finished");
  return kExitOk;
}

int cmd_compare(RunContext& ctx) {
  const std::string path_a = require_existing_path(ctx.cfg, "inputs.predictions_a");
  const std::string path_b = require_existing_path(ctx.cfg, "inputs.predictions_b");
  auto load_preds = [](const std::string& path) {
    std::ifstream in(path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw occdist::FormatError("predictions file \"" + path + "\" is not valid JSON: " +
                                 e.what());
    }
    return std::pair<std::vector<int>, std::vector<int>>{
        j.at("labels").get<std::vector<int>>(), j.at("predictions").get<std::vector<int>>()};
  };
  const auto [labels_a, preds_a] = load_preds(path_a);
  const auto [labels_b, preds_b] = load_preds(path_b);
  if (labels_a != labels_b) {
    throw occdist::ConsistencyError("compare: prediction files carry different label vectors");
  }
  const double level = get_or<double>(ctx.cfg, "significance_level", 0.05);
  const occdist::McNemarResult result = occdist::mcnemar_test(preds_a, preds_b, labels_a, level);
  write_json_file(ctx.artifact(".mcnemar.json"), result.to_json());
  std::cout << "b=" << result.b << " c=" << result.c << " statistic="
            << (result.defined ? std::to_string(result.statistic) : std::string("undefined"))
            << " significant=" << (result.significant ? "true" : "false") << "\n"
            << "result: " << ctx.artifact(".mcnemar.json").string() << "\n";
  ctx.log_line("compare finished");
  return kExitOk;
}

int cmd_explain(RunContext& ctx) {
  const std::string ckpt_path = require_existing_path(ctx.cfg, "inputs.checkpoint");
  const occdist::OcclusionMode mode = occlusion_from(ctx.cfg);
  const occdist::Checkpoint ckpt = occdist::load_checkpoint(ckpt_path);
  occdist::OccludedDataset test = load_split(ctx.cfg, "test");
  if (mode != occdist::OcclusionMode::None) test = occdist::apply_occlusion(test, mode);

  const json ex = ctx.cfg.contains("explain") ? ctx.cfg.at("explain") : json::object();
  std::vector<std::size_t> indices;
  if (ex.contains("image_indices")) {
    indices = ex.at("image_indices").get<std::vector<std::size_t>>();
  } else {
    const auto count = std::min<std::size_t>(get_or<std::size_t>(ex, "count", 8), test.size());
    for (std::size_t i = 0; i < count; ++i) indices.push_back(i);
  }
  int layer = get_or<int>(ex, "conv_layer_index", -1);
  if (layer < 0) layer = occdist::last_conv_layer_index(ckpt.spec);
  const int target_override = get_or<int>(ex, "target_class", -1);

  ctx.log_line("explain started");
  const std::vector<int> preds = occdist::predict(ckpt.params, ckpt.spec, test);
  json images = json::array();
  double mean_upper = 0.0, mean_lower = 0.0;
  std::size_t defined_count = 0;
  for (const std::size_t idx : indices) {
    if (idx >= test.size()) {
      throw occdist::DatasetError("explain: image index " + std::to_string(idx) +
                                  " out of range");
    }
    const occdist::Tensor image = occdist::Tensor::from_data(
        {test.channels(), test.height(), test.width()},
        std::vector<float>(
            test.images.data().begin() + static_cast<std::ptrdiff_t>(idx * test.image_size()),
            test.images.data().begin() +
                static_cast<std::ptrdiff_t>((idx + 1) * test.image_size())));
    const int target = target_override >= 0 ? target_override : preds[idx];
    const occdist::SaliencyMap map =
        occdist::grad_cam(ckpt.params, ckpt.spec, image, target, layer);
    const occdist::MassSplit split = occdist::saliency_mass_split(map);
    const fs::path pgm = ctx.artifact(".img" + std::to_string(idx) + ".pgm");
    occdist::write_pgm(map, pgm.string());
    images.push_back(json{{"index", idx},
                          {"target_class", target},
                          {"upper_mass", split.upper_mass},
                          {"lower_mass", split.lower_mass},
                          {"defined", split.defined},
                          {"pgm", pgm.filename().string()}});
    if (split.defined) {
      mean_upper += split.upper_mass;
      mean_lower += split.lower_mass;
      ++defined_count;
    }
  }
  json masses{{"conv_layer_index", layer}, {"images", images}};
  if (defined_count > 0) {
    masses["mean_upper_mass"] = mean_upper / static_cast<double>(defined_count);
    masses["mean_lower_mass"] = mean_lower / static_cast<double>(defined_count);
  }
  write_json_file(ctx.artifact(".masses.json"), masses);
  std::cout << "saliency masses: " << ctx.artifact(".masses.json").string() << "\n";
  ctx.log_line("explain finished");
  return kExitOk;
}

int dispatch(const std::string& command, const std::string& config_path) {
  RunContext ctx = make_context(command, config_path);
  if (command == "train-teacher") return cmd_train(ctx, true);
  if (command == "train-student") return cmd_train(ctx, false);
  if (command == "distill-kd") return cmd_distill_kd(ctx);
  if (command == "distill-triplet") return cmd_distill_triplet(ctx);
  if (command == "fuse") return cmd_fuse(ctx);
  if (command == "evaluate") return cmd_evaluate(ctx);
  if (command == "compare") return cmd_compare(ctx);
  if (command == "explain") return cmd_explain(ctx);
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Teacher-student distillation for classification under half-image occlusion"};
  app.require_subcommand(1);
  const std::vector<std::string> commands = {"train-teacher", "train-student", "distill-kd",
                                             "distill-triplet", "fuse",        "evaluate",
                                             "compare",        "explain"};
  std::string config_path;
  for (const auto& name : commands) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("config", config_path, "JSON run configuration")->required();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError&) {
    std::cerr << "usage: occdist <command> <config.json>\n"
              << "commands: train-teacher train-student distill-kd distill-triplet fuse "
                 "evaluate compare explain\n";
    return kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return dispatch(command, config_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const occdist::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
