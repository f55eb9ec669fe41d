// SPDX-License-Identifier: Apache-2.0
#include "msgl/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>

#include "msgl/checkpoint.hpp"
#include "msgl/errors.hpp"
#include "msgl/evaluation.hpp"
#include "msgl/ops.hpp"
#include "msgl/report.hpp"

namespace msgl {
namespace fs = std::filesystem;
using nlohmann::json;

void ExperimentConfig::validate() const {
  if (dataset != "ratsi" && dataset != "calms21") {
    throw ConfigError("dataset must be 'ratsi' or 'calms21', got '" + dataset + "'");
  }
  if (root.empty()) throw ConfigError("dataset root is not set");
  if (stride == 0) throw ConfigError("stride must be at least 1");
  auto check_unique = [](const std::vector<std::string>& ids, const char* what) {
    std::set<std::string> seen;
    for (const auto& id : ids) {
      if (!seen.insert(id).second) throw ConfigError(std::string(what) + " lists '" + id + "' twice");
    }
  };
  check_unique(split.train_videos, "train_videos");
  check_unique(split.val_videos, "val_videos");
  check_unique(split.test_videos, "test_videos");
  const std::vector<std::pair<const char*, const std::vector<std::string>*>> parts = {
      {"train", &split.train_videos}, {"val", &split.val_videos}, {"test", &split.test_videos}};
  for (std::size_t a = 0; a < parts.size(); ++a) {
    for (std::size_t b = a + 1; b < parts.size(); ++b) {
      for (const auto& id : *parts[a].second) {
        if (std::find(parts[b].second->begin(), parts[b].second->end(), id) != parts[b].second->end()) {
          throw ConfigError("video '" + id + "' is in both the " + parts[a].first + " and " + parts[b].first +
                            " splits");
        }
      }
    }
  }
  train.validate();
  ModelConfig probe = with_variant(model, variant);
  probe.validate();
}

void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"dataset", {{"name", c.dataset}, {"root", c.root.generic_string()}}},
           {"split",
            {{"train_videos", c.split.train_videos},
             {"val_videos", c.split.val_videos},
             {"test_videos", c.split.test_videos}}},
           {"variant", std::string(variant_name(c.variant))},
           {"model", c.model},
           {"train", c.train},
           {"stride", c.stride},
           {"seed", c.seed},
           {"out", c.out.generic_string()}};
  if (c.expected_counts) j["expected_counts"] = c.expected_counts->generic_string();
}

void from_json(const json& j, ExperimentConfig& c) {
  c = ExperimentConfig{};
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    c.dataset = d.value("name", c.dataset);
    c.root = d.value("root", std::string());
  }
  if (j.contains("split")) {
    const auto& s = j.at("split");
    c.split.train_videos = s.value("train_videos", std::vector<std::string>{});
    c.split.val_videos = s.value("val_videos", std::vector<std::string>{});
    c.split.test_videos = s.value("test_videos", std::vector<std::string>{});
  }
  if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
  if (j.contains("model")) c.model = j.at("model").get<ModelConfig>();
  if (j.contains("train")) c.train = j.at("train").get<TrainConfig>();
  c.stride = j.value("stride", c.stride);
  c.seed = j.value("seed", c.train.seed);
  c.train.seed = c.seed;
  c.out = j.value("out", c.out.generic_string());
  if (j.contains("expected_counts")) c.expected_counts = j.at("expected_counts").get<std::string>();
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open config");
  try {
    return json::parse(in).get<ExperimentConfig>();
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": invalid config (" + e.what() + ")");
  }
}

namespace {

std::vector<VideoRecord> take(std::vector<VideoRecord>& pool, const std::vector<std::string>& ids,
                              const std::string& where) {
  std::vector<VideoRecord> out;
  for (const auto& id : ids) {
    auto it = std::find_if(pool.begin(), pool.end(), [&](const VideoRecord& v) { return v.video_id == id; });
    if (it == pool.end()) throw ConfigError("video '" + id + "' not found in " + where);
    out.push_back(std::move(*it));
    pool.erase(it);
  }
  return out;
}

void check_counts(const DatasetManifest& m, std::vector<ExpectedCount> rows, const fs::path& source) {
  const auto report = validate_manifest(m, rows);
  if (report.ok()) return;
  std::string msg = source.string() + ": dataset counts differ from expectation";
  for (const auto& mm : report.mismatches) {
    msg += "\n  " + mm.video_id + " / " + mm.class_name + ": expected " + std::to_string(mm.expected) + ", found " +
           std::to_string(mm.actual);
  }
  throw IngestionError(msg);
}

ResolvedSplits resolve_ratsi(const ExperimentConfig& cfg) {
  const auto all = ratsi_video_ids();
  const auto& s = cfg.split;
  if (s.test_videos.empty() || s.val_videos.empty()) {
    throw ConfigError("ratsi experiments need test and validation videos");
  }
  for (const auto* ids : {&s.train_videos, &s.val_videos, &s.test_videos}) {
    for (const auto& id : *ids) {
      if (std::find(all.begin(), all.end(), id) == all.end()) throw ConfigError("unknown RatSI video '" + id + "'");
      if (!fs::exists(cfg.root / (id + ".csv"))) {
        throw ConfigError("video '" + id + "' has no file under " + cfg.root.string());
      }
    }
  }
  std::vector<std::string> train_ids = s.train_videos;
  if (train_ids.empty()) {
    for (const auto& id : all) {
      const bool held_out = std::find(s.val_videos.begin(), s.val_videos.end(), id) != s.val_videos.end() ||
                            std::find(s.test_videos.begin(), s.test_videos.end(), id) != s.test_videos.end();
      if (!held_out) {
        if (!fs::exists(cfg.root / (id + ".csv"))) {
          throw ConfigError("video '" + id + "' has no file under " + cfg.root.string());
        }
        train_ids.push_back(id);
      }
    }
  }
  std::vector<std::string> ids = train_ids;
  ids.insert(ids.end(), s.val_videos.begin(), s.val_videos.end());
  ids.insert(ids.end(), s.test_videos.begin(), s.test_videos.end());
  DatasetManifest m = load_ratsi(cfg.root, ids);
  if (cfg.expected_counts) {
    std::vector<ExpectedCount> rows;
    for (const auto& r : read_expected_counts(*cfg.expected_counts)) {
      const bool loaded = std::find(ids.begin(), ids.end(), r.video_id) != ids.end();
      if (loaded || (r.video_id == "*" && ids.size() == all.size())) rows.push_back(r);
    }
    check_counts(m, std::move(rows), *cfg.expected_counts);
  }
  ResolvedSplits out;
  out.kept_classes = m.kept_classes;
  out.train = take(m.videos, train_ids, "the training set");
  out.val = take(m.videos, s.val_videos, "the validation set");
  out.test = take(m.videos, s.test_videos, "the test set");
  return out;
}

ResolvedSplits resolve_calms21(const ExperimentConfig& cfg) {
  const auto& s = cfg.split;
  for (const char* f : {"train.json", "test.json"}) {
    if (!fs::exists(cfg.root / f)) throw ConfigError(std::string(f) + " not found under " + cfg.root.string());
  }
  Calms21Splits data = load_calms21(cfg.root);
  if (cfg.expected_counts) {
    std::vector<ExpectedCount> train_rows, test_rows;
    for (auto r : read_expected_counts(*cfg.expected_counts)) {
      const std::string which = r.video_id;
      r.video_id = "*";
      if (which == "train") train_rows.push_back(r);
      if (which == "test") test_rows.push_back(r);
    }
    check_counts(data.train, std::move(train_rows), *cfg.expected_counts);
    check_counts(data.test, std::move(test_rows), *cfg.expected_counts);
  }
  ResolvedSplits out;
  out.kept_classes = data.train.kept_classes;
  auto by_id = [](const VideoRecord& a, const VideoRecord& b) { return a.video_id < b.video_id; };
  std::sort(data.train.videos.begin(), data.train.videos.end(), by_id);
  std::sort(data.test.videos.begin(), data.test.videos.end(), by_id);

  if (s.test_videos.empty()) {
    out.test = std::move(data.test.videos);
  } else {
    out.test = take(data.test.videos, s.test_videos, "test.json");
  }
  std::vector<std::string> val_ids = s.val_videos;
  if (val_ids.empty()) {
    for (std::size_t i = 9; i < data.train.videos.size(); i += 10) val_ids.push_back(data.train.videos[i].video_id);
    if (val_ids.empty() && data.train.videos.size() > 1) val_ids.push_back(data.train.videos.back().video_id);
  }
  out.val = take(data.train.videos, val_ids, "train.json");
  out.train = s.train_videos.empty() ? std::move(data.train.videos) : take(data.train.videos, s.train_videos, "train.json");
  return out;
}

std::vector<std::string> ids_of(const std::vector<VideoRecord>& videos) {
  std::vector<std::string> ids;
  for (const auto& v : videos) ids.push_back(v.video_id);
  return ids;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PersistenceError(path.string() + ": cannot open for writing");
  out << content;
  if (!out) throw PersistenceError(path.string() + ": write failed");
}

struct PreparedData {
  PreprocessArtifacts artifacts;
  ResolvedSplits raw;
  WindowedDataset train, val, test;
};

PreparedData load_prepared(const ExperimentConfig& cfg) {
  const fs::path artifacts = cfg.out / kArtifactsFile;
  if (!fs::exists(artifacts)) {
    throw PersistenceError(artifacts.string() + ": not found; run 'prepare' with this config first");
  }
  PreparedData p;
  p.artifacts = load_artifacts(artifacts);
  p.raw = resolve_splits(cfg);
  const std::size_t t = cfg.model.window;
  p.train = transform(p.artifacts, p.raw.train, t, cfg.stride);
  p.val = transform(p.artifacts, p.raw.val, t, cfg.stride);
  p.test = transform(p.artifacts, p.raw.test, t, cfg.stride);
  return p;
}

}  // namespace

ResolvedSplits resolve_splits(const ExperimentConfig& cfg) {
  cfg.validate();
  return cfg.dataset == "ratsi" ? resolve_ratsi(cfg) : resolve_calms21(cfg);
}

ModelConfig effective_model_config(const ExperimentConfig& cfg, std::size_t input_dim, std::size_t num_classes) {
  ModelConfig m = with_variant(cfg.model, cfg.variant);
  m.input_dim = input_dim;
  m.num_classes = num_classes;
  m.validate();
  return m;
}

void cmd_prepare(const ExperimentConfig& cfg, std::ostream& log) {
  ResolvedSplits splits = resolve_splits(cfg);
  if (splits.train.empty()) throw ConfigError("training split is empty");
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (ec) throw PersistenceError(cfg.out.string() + ": cannot create output directory (" + ec.message() + ")");

  const PreprocessArtifacts artifacts = fit_artifacts(splits.train, splits.kept_classes);
  persist_artifacts(artifacts, cfg.out / kArtifactsFile);

  json summary;
  summary["dataset"] = cfg.dataset;
  summary["window"] = cfg.model.window;
  summary["stride"] = cfg.stride;
  summary["classes"] = artifacts.labels.names();
  log << "split   videos  frames    windows\n";
  for (auto [name, videos] : {std::pair<const char*, const std::vector<VideoRecord>*>{"train", &splits.train},
                              {"val", &splits.val},
                              {"test", &splits.test}}) {
    const WindowedDataset ds = transform(artifacts, *videos, cfg.model.window, cfg.stride);
    std::size_t frames = 0;
    for (const auto& v : *videos) frames += v.num_frames();
    std::vector<std::size_t> per_class(artifacts.labels.size(), 0);
    for (int y : ds.labels()) ++per_class[static_cast<std::size_t>(y)];
    summary[name] = {{"videos", ids_of(*videos)},
                     {"frames", frames},
                     {"windows", ds.size()},
                     {"windows_per_class", per_class},
                     {"content_hash", hex64(ds.content_hash())}};
    char line[128];
    std::snprintf(line, sizeof(line), "%-7s %6zu %7zu %10zu\n", name, videos->size(), frames, ds.size());
    log << line;
  }
  write_text(cfg.out / kSplitsFile, summary.dump(2) + "\n");
  json resolved = cfg;
  write_text(cfg.out / "config.json", resolved.dump(2) + "\n");
  log << "artifacts written to " << (cfg.out / kArtifactsFile).string() << '\n';
}

void cmd_train(const ExperimentConfig& cfg, std::ostream& log) {
  PreparedData data = load_prepared(cfg);
  const ModelConfig mc = effective_model_config(cfg, data.artifacts.scaler.mu.size(), data.artifacts.labels.size());
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  log << "training variant '" << variant_name(cfg.variant) << "' on " << data.train.size() << " windows ("
      << data.val.size() << " validation)\n";
  FitResult r = fit(mc, data.train, data.val, tc);
  for (const auto& e : r.log.epochs) {
    char line[160];
    std::snprintf(line, sizeof(line), "epoch %3zu  train %.5f  val %.5f  acc %.4f  lr %.2e\n", e.epoch, e.train_loss,
                  e.val_loss, e.val_acc, e.lr);
    log << line;
  }
  save_checkpoint(cfg.out / kBestCheckpoint, r.best);
  save_checkpoint(cfg.out / kLastCheckpoint, r.last);
  r.log.write_csv(cfg.out / kTrainLogFile);
  log << "best epoch " << r.best_epoch << (r.stopped_early ? " (stopped early)" : "") << "; checkpoints in "
      << cfg.out.string() << '\n';
}

fs::path cmd_evaluate(const ExperimentConfig& cfg, const std::optional<fs::path>& checkpoint, bool boundary,
                      std::ostream& log) {
  PreparedData data = load_prepared(cfg);
  const fs::path ckpt = checkpoint.value_or(cfg.out / kBestCheckpoint);
  const Model model = load_checkpoint(ckpt);
  const ModelConfig expected =
      effective_model_config(cfg, data.artifacts.scaler.mu.size(), data.artifacts.labels.size());
  auto mismatch = [&](const char* field, std::size_t have, std::size_t want) {
    if (have != want) {
      throw ConfigError(ckpt.string() + ": checkpoint " + field + " is " + std::to_string(have) +
                        " but the experiment expects " + std::to_string(want));
    }
  };
  mismatch("window", model.config.window, expected.window);
  mismatch("input_dim", model.config.input_dim, expected.input_dim);
  mismatch("num_classes", model.config.num_classes, expected.num_classes);
  if (data.test.empty()) throw UsageError("test split has no windows");

  const DatasetScores scores = score_dataset(model, data.test, cfg.train.smoothing);
  const std::string split_name =
      cfg.split.test_videos.empty() ? std::string("test") : "test=" + cfg.split.test_videos.front();
  EvalReport report = make_eval_report(cfg.dataset, split_name, data.artifacts.labels, data.test.labels(),
                                       scores.predictions, scores.probabilities);
  for (const auto& w : report.metrics.warnings) log << "warning: " << w << '\n';
  if (boundary) {
    std::vector<WindowPrediction> preds;
    for (std::size_t i = 0; i < data.test.size(); ++i) {
      const auto& o = data.test.origins()[i];
      preds.push_back({o.video_id, o.end_frame, data.test.labels()[i], scores.predictions[i]});
    }
    report.boundary = boundary_analysis(data.raw.test, preds, data.artifacts.labels.size());
  }
  const fs::path dir = cfg.out / kEvalDir;
  emit_report(report, dir);
  char line[160];
  std::snprintf(line, sizeof(line), "windows %zu  accuracy %.4f  weighted F1 %.4f  macro recall %.4f\n",
                data.test.size(), report.metrics.accuracy, report.metrics.weighted.f1, report.metrics.macro_recall);
  log << line;
  if (report.boundary) {
    const auto& b = *report.boundary;
    std::snprintf(line, sizeof(line), "transitions %zu  at 0: %.3f  <=5: %.3f  >10: %.3f\n", b.transitions,
                  b.at_transition.accuracy(), b.near.accuracy(), b.far.accuracy());
    log << line;
  }
  log << "report written to " << dir.string() << '\n';
  return dir;
}

ModelConfig gradcheck_model_config(Variant v) {
  ModelConfig c;
  c.window = 8;
  c.input_dim = 6;
  c.num_classes = 3;
  c.d_model = 16;
  c.d_ff = 32;
  c.heads = 4;
  c.layers = 2;
  c.bam_hidden = 16;
  return with_variant(c, v);
}

bool VariantGradcheck::passed() const { return report.max_rel_error < tolerance; }

std::vector<VariantGradcheck> run_gradcheck(const GradcheckOptions& opts) {
  std::vector<VariantGradcheck> out;
  for (Variant v : {Variant::base, Variant::msa, Variant::bam, Variant::full}) {
    const ModelConfig cfg = gradcheck_model_config(v);
    const RngStream root(opts.seed);
    RngStream init = root.fork(0);
    ModelParams params = init_params(cfg, init);
    RngStream data_rng = root.fork(1);
    std::vector<Tensor> windows;
    std::vector<std::size_t> targets;
    for (std::size_t k = 0; k < 2; ++k) {
      std::vector<double> x(cfg.window * cfg.input_dim);
      for (auto& e : x) e = data_rng.normal(0.0, 1.0);
      windows.push_back(Tensor::from_data({cfg.window, cfg.input_dim}, std::move(x)));
      targets.push_back(static_cast<std::size_t>(data_rng.below(cfg.num_classes)));
    }
    const RngStream dropout_seed = root.fork(2);
    auto loss = [&]() {
      RngStream drop = dropout_seed;  // identical mask on every evaluation
      const ForwardContext ctx{true, &drop};
      Tensor total;
      for (std::size_t k = 0; k < windows.size(); ++k) {
        Tensor l = label_smoothing_ce(classify(params, cfg, windows[k], ctx), targets[k], 0.1);
        total = total.defined() ? add(total, l) : l;
      }
      return total;
    };
    VariantGradcheck result;
    result.variant = v;
    result.tolerance = opts.tolerance;
    result.report = check_gradients(loss, params.entries(), opts.step);
    out.push_back(std::move(result));
  }
  return out;
}

bool cmd_gradcheck(const GradcheckOptions& opts, std::ostream& log) {
  const auto results = run_gradcheck(opts);
  bool ok = true;
  for (const auto& r : results) {
    char line[200];
    std::snprintf(line, sizeof(line), "%-5s max_rel_error %.3e  worst %s  %s\n",
                  std::string(variant_name(r.variant)).c_str(), r.report.max_rel_error, r.report.worst_param.c_str(),
                  r.passed() ? "PASS" : "FAIL");
    log << line;
    if (!r.passed()) {
      ok = false;
      for (const auto& p : r.report.per_param) {
        if (p.max_rel_error >= r.tolerance) {
          std::snprintf(line, sizeof(line), "  %s[%zu]: analytic %.6e numeric %.6e (rel %.3e)\n", p.name.c_str(),
                        p.worst_index, p.analytic, p.numeric, p.max_rel_error);
          log << line;
        }
      }
    }
  }
  return ok;
}

}  // namespace msgl
