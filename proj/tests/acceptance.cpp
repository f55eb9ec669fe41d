// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion. Items 1-10 decide the
// exit status; item 11 needs the real datasets and is reported as SKIP
// unless MSGL_RATSI_ROOT or MSGL_CALMS21_ROOT points at them.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "msgl/checkpoint.hpp"
#include "msgl/dataset.hpp"
#include "msgl/evaluation.hpp"
#include "msgl/experiment.hpp"
#include "msgl/model.hpp"
#include "msgl/ops.hpp"
#include "msgl/preprocessing.hpp"
#include "msgl/report.hpp"
#include "msgl/synthetic.hpp"
#include "msgl/training.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace msgl;
namespace fs = std::filesystem;

namespace {

enum class Verdict { pass, fail, skip };

struct Outcome {
  Verdict verdict = Verdict::fail;
  std::string detail;
};

Outcome fail(std::string d) { return {Verdict::fail, std::move(d)}; }
Outcome verdict(bool ok, std::string d) { return {ok ? Verdict::pass : Verdict::fail, std::move(d)}; }

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c, d);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1 ---------------------------------------------------------------------------
Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = run_gradcheck({});
  const double secs = seconds_since(t0);
  bool ok = results.size() == 4 && secs < 120.0;
  std::ostringstream d;
  for (const auto& r : results) {
    ok = ok && r.passed();
    d << variant_name(r.variant) << ' ' << fmt("%.2e", r.report.max_rel_error) << " (" << r.report.worst_param
      << "; " << r.report.floored_entries << '/' << r.report.entries << " entries below floor, abs err "
      << fmt("%.1e", r.report.max_abs_error_below_floor) << ", rel err above floor "
      << fmt("%.1e", r.report.max_rel_error_above_floor) << "); ";
  }
  d << fmt("%.1f s", secs);
  return verdict(ok, d.str());
}

// 2 ---------------------------------------------------------------------------
Outcome causality() {
  ModelConfig cfg;  // T=35, d=64
  RngStream rng(2024);
  ModelParams params = init_params(cfg, rng);
  const std::size_t rows = cfg.window + 1, d = cfg.d_model, half = cfg.window / 2;
  std::size_t compared = 0, differing = 0;
  for (int w = 0; w < 100; ++w) {
    Tensor z = msgl::testing::random_tensor({rows, d}, rng);
    const std::size_t t = rng.below(cfg.window - 1);  // frame index, later frames exist
    MsaTrace before, after;
    multi_scale_attention(params, cfg, z, {}, &before);
    std::vector<double> changed = z.to_vector();
    for (std::size_t i = (t + 2) * d; i < changed.size(); ++i) changed[i] += rng.normal(0.0, 2.0);
    multi_scale_attention(params, cfg, Tensor::from_data(z.shape(), changed), {}, &after);
    for (std::size_t r = 0; r <= t; ++r) {
      for (std::size_t j = 0; j < d; ++j) {
        ++compared;
        differing += before.medium_branch.at(r, j) != after.medium_branch.at(r, j);
        if (r < half) {
          ++compared;
          differing += before.short_branch.at(r, j) != after.short_branch.at(r, j);
        }
      }
    }
  }
  return verdict(differing == 0, std::to_string(compared) + " causal outputs compared, " +
                                     std::to_string(differing) + " differ");
}

// 3 ---------------------------------------------------------------------------
Outcome parameter_slope() {
  auto count = [](std::size_t window, bool extra) {
    ModelConfig c;
    c.window = window;
    c.input_dim = 28;
    c.num_classes = 4;
    c.msa_ffn = c.final_norm = extra;
    RngStream rng(0);
    return count_params(init_params(c, rng));
  };
  const std::size_t a = count(35, false), b = count(50, false);
  const std::size_t ax = count(35, true), bx = count(50, true);
  const long long dev = static_cast<long long>(a) - 285892;
  std::ostringstream d;
  d << "slope " << (b - a) << " (extended layout " << (bx - ax) << "); count(T=35) " << a << ", deviation " << dev
    << " from 285892; extended layout " << ax;
  return verdict(b - a == 62400 && bx - ax == 62400, d.str());
}

// 4 ---------------------------------------------------------------------------
Outcome preprocessing_identities() {
  RngStream rng(4);
  auto videos = synthetic::ratsi_like(600, rng, 0.03);
  std::vector<VideoRecord> train(videos.begin(), videos.begin() + 7);
  std::vector<VideoRecord> test(videos.begin() + 7, videos.end());
  const auto& kept = ratsi_kept_behaviors();
  const auto artifacts = fit_artifacts(train, kept);
  const auto scaled = apply_scaler(artifacts.scaler, apply_imputer(artifacts.imputer, train));
  const std::size_t dims = train[0].dims;
  double worst_mean = 0.0, worst_std = 0.0;
  for (std::size_t j = 0; j < dims; ++j) {
    double s = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (const auto& v : scaled)
      for (std::size_t t = 0; t < v.num_frames(); ++t, ++n) s += v.at(t, j);
    const double mean = s / n;
    for (const auto& v : scaled)
      for (std::size_t t = 0; t < v.num_frames(); ++t) sq += (v.at(t, j) - mean) * (v.at(t, j) - mean);
    worst_mean = std::max(worst_mean, std::abs(mean));
    worst_std = std::max(worst_std, std::abs(std::sqrt(sq / n) - 1.0));
  }
  bool ok = worst_mean <= 1e-9 && worst_std <= 1e-9;

  // Leakage: the fitted state ignores test data, and test windows are
  // standardized with the training statistics.
  std::vector<VideoRecord> mutated = test;
  for (auto& v : mutated)
    for (auto& x : v.frames)
      if (!is_missing(x)) x = 50.0 * x + 3.0;
  const WindowedDataset test_ds = transform(artifacts, mutated, 35);
  const bool unchanged = fit_artifacts(train, kept) == artifacts;
  bool uses_train_stats = true;
  {
    const auto& o = test_ds.origins()[0];
    const VideoRecord* src = nullptr;
    for (const auto& v : mutated)
      if (v.video_id == o.video_id) src = &v;
    const Tensor w = test_ds.window_tensor(0);
    for (std::size_t j = 0; j < dims; ++j) {
      double x = src->at(o.end_frame, j);
      if (is_missing(x)) x = artifacts.imputer.means[j];
      uses_train_stats = uses_train_stats && w.at(34, j) == (x - artifacts.scaler.mu[j]) / artifacts.scaler.sigma[j];
    }
  }
  ok = ok && unchanged && uses_train_stats;

  bool counts_ok = true;
  for (std::size_t n : {35u, 36u, 100u, 517u}) {
    VideoRecord v;
    v.video_id = "v";
    v.dims = 2;
    v.labels.assign(n, "Solitary");
    v.frames.assign(n * 2, 0.5);
    counts_ok = counts_ok && build_windows({v}, LabelMap({"Solitary"}), 35, 1).size() == n - 34;
  }
  ok = ok && counts_ok;

  std::string calms = "CalMS21 window count not checked (dataset absent; set MSGL_CALMS21_ROOT)";
  if (const char* root = std::getenv("MSGL_CALMS21_ROOT")) {
    const Calms21Splits s = load_calms21(root);
    const auto a = fit_artifacts(s.train.videos, s.train.kept_classes);
    const std::size_t windows = transform(a, s.test.videos, 35).size();
    calms = "CalMS21 test windows " + std::to_string(windows) + " (expected 261442)";
    ok = ok && windows == 261442;
  }
  std::ostringstream d;
  d << "max |mean| " << fmt("%.1e", worst_mean) << ", max |std-1| " << fmt("%.1e", worst_std) << "; leakage "
    << (unchanged && uses_train_stats ? "none" : "DETECTED") << "; N-34 windows " << (counts_ok ? "ok" : "WRONG")
    << "; " << calms;
  return verdict(ok, d.str());
}

// 5 ---------------------------------------------------------------------------
Outcome loss_closed_forms() {
  double worst_uniform = 0.0, worst_grad = 0.0;
  RngStream rng(5);
  for (std::size_t c : {2u, 4u, 5u, 10u}) {
    for (double eps : {0.0, 0.1, 0.3}) {
      const double loss = label_smoothing_ce(Tensor::full({c}, rng.normal(0.0, 1.0)), rng.below(c), eps).item();
      worst_uniform = std::max(worst_uniform, std::abs(loss - std::log(static_cast<double>(c))));
    }
    for (int trial = 0; trial < 20; ++trial) {
      Tensor z = msgl::testing::random_tensor({c}, rng, true, 3.0);
      const std::size_t target = rng.below(c);
      label_smoothing_ce(z, target, 0.0).backward();
      const auto p = softmax(z.detach(), 0).to_vector();
      const auto g = z.grad();
      for (std::size_t k = 0; k < c; ++k) {
        worst_grad = std::max(worst_grad, std::abs(g[k] - (p[k] - (k == target ? 1.0 : 0.0))));
      }
    }
  }
  return verdict(worst_uniform <= 1e-12 && worst_grad <= 1e-10,
                 fmt("uniform-logit |loss - ln C| max %.1e; gradient vs softmax-onehot max %.1e", worst_uniform,
                     worst_grad));
}

// 6 ---------------------------------------------------------------------------
Outcome optimizer_contracts() {
  double worst_adam = 0.0;
  for (double g : {0.5, -3.0, 2e-7, 40.0}) {
    ModelParams p;
    p.add("w", Tensor::from_data({1}, {1.0}, true));
    auto state = make_optimizer_state(p.entries());
    sum(scale(p.get("w"), g)).backward();
    adam_step(p.entries(), state, {}, 1e-3);
    worst_adam = std::max(worst_adam, std::abs((p.get("w").at(0) - 1.0) - (-1e-3 * g / (std::abs(g) + 1e-8))));
  }

  PlateauScheduler sched(1e-3, 0.5, 5, 1e-6);
  std::size_t halved_at = 0;
  for (std::size_t epoch = 1; epoch <= 20 && !halved_at; ++epoch) {
    sched.step(1.0);
    if (sched.lr() < 1e-3) halved_at = epoch;
  }
  const bool halving_ok = halved_at == 7 && sched.lr() == 5e-4;

  EarlyStopping stop(25);
  ModelParams params;
  params.add("w", Tensor::from_data({3}, {0.0, 0.0, 0.0}, true));
  RngStream rng(6);
  ModelParams best;
  std::size_t stopped_at = 0;
  const std::size_t best_epoch = 4;
  for (std::size_t epoch = 1; epoch <= 100 && !stopped_at; ++epoch) {
    for (double& v : params.get("w").mutable_data()) v = rng.normal(0.0, 1.0);
    const double loss = epoch <= best_epoch ? 1.0 / static_cast<double>(epoch) : 0.9;
    if (epoch == best_epoch) best = params.clone();
    if (stop.update(loss, params, epoch) == StopDecision::stop) stopped_at = epoch;
  }
  stop.restore(params);
  const bool restored = params.identical_to(best);
  const std::size_t non_improving = stopped_at - best_epoch;

  EarlyStopping flat(25);
  std::size_t flat_stop = 0;
  for (std::size_t epoch = 1; epoch <= 100 && !flat_stop; ++epoch) {
    if (flat.update(0.5, params, epoch) == StopDecision::stop) flat_stop = epoch;
  }

  std::ostringstream d;
  d << "Adam first-step error " << fmt("%.1e", worst_adam) << "; lr halved at epoch " << halved_at
    << " (6th non-improving); early stop after " << non_improving << " non-improving epochs (flat loss: epoch "
    << flat_stop << "), restore " << (restored ? "bit-exact" : "MISMATCH");
  return verdict(worst_adam <= 1e-12 && halving_ok && non_improving == 25 && flat_stop == 26 && restored, d.str());
}

// 7 ---------------------------------------------------------------------------
Outcome metric_oracles() {
  RngStream rng(7);
  double worst = 0.0;
  std::size_t confusion_mismatch = 0, identity_breaks = 0, aucs = 0;
  for (int inst = 0; inst < 1000; ++inst) {
    const std::size_t c = 2 + rng.below(5), n = 10 + rng.below(190);
    std::vector<int> y(n), p(n);
    for (auto& v : y) v = static_cast<int>(rng.below(c));
    for (std::size_t i = 0; i < n; ++i) p[i] = rng.uniform() < 0.6 ? y[i] : static_cast<int>(rng.below(c));
    std::vector<double> s(n * c);
    const bool ties = inst % 3 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      double z = 0.0;
      for (std::size_t k = 0; k < c; ++k) {
        double v = ties ? 1.0 + rng.below(3) : rng.uniform() + 1e-3;
        if (static_cast<int>(k) == y[i]) v *= 1.5;
        z += (s[i * c + k] = v);
      }
      for (std::size_t k = 0; k < c; ++k) s[i * c + k] /= z;
    }

    const auto cm = compute_confusion(y, p, c);
    const auto oc = oracle::confusion(y, p, c);
    for (std::size_t a = 0; a < c; ++a)
      for (std::size_t b = 0; b < c; ++b) confusion_mismatch += cm.at(a, b) != oc[a][b];
    const auto r = class_report(cm);
    const auto o = oracle::metrics(y, p, c);
    for (std::size_t k = 0; k < c; ++k) {
      worst = std::max({worst, std::abs(r.per_class[k].precision - o.precision[k]),
                        std::abs(r.per_class[k].recall - o.recall[k]), std::abs(r.per_class[k].f1 - o.f1[k])});
      const auto pos = std::count(y.begin(), y.end(), static_cast<int>(k));
      if (pos > 0 && pos < static_cast<long>(n)) {
        worst = std::max(worst, std::abs(roc_auc(y, s, c, k).auc - oracle::auc(y, s, c, k)));
        ++aucs;
      }
    }
    worst = std::max({worst, std::abs(r.accuracy - o.accuracy), std::abs(r.weighted.precision - o.w_precision),
                      std::abs(r.weighted.recall - o.w_recall), std::abs(r.weighted.f1 - o.w_f1),
                      std::abs(r.macro_recall - o.macro_recall)});
    identity_breaks += r.weighted.recall != r.accuracy;
  }
  std::ostringstream d;
  d << "1000 instances, " << aucs << " AUCs; max deviation " << fmt("%.1e", worst) << "; confusion mismatches "
    << confusion_mismatch << "; weighted recall != accuracy on " << identity_breaks << " instances";
  return verdict(worst <= 1e-12 && confusion_mismatch == 0 && identity_breaks == 0, d.str());
}

// 8 ---------------------------------------------------------------------------
Outcome boundary_oracle() {
  RngStream rng(8);
  std::size_t mismatches = 0, windows = 0;
  for (int stream = 0; stream < 200; ++stream) {
    const std::size_t n = 1 + rng.below(120);
    const double stay = stream % 10 == 0 ? 1.0 : 0.7 + 0.29 * rng.uniform();
    VideoRecord v;
    v.video_id = "s" + std::to_string(stream);
    v.dims = 1;
    for (std::size_t t = 0; t < n; ++t) {
      v.labels.push_back(t && rng.uniform() < stay ? v.labels.back() : std::string(1, 'A' + rng.below(4)));
    }
    v.frames.assign(n, 0.0);
    std::vector<WindowPrediction> preds;
    for (std::size_t t = rng.below(std::min<std::size_t>(n, 10)); t < n; ++t) {
      const int y = v.labels[t][0] - 'A';
      preds.push_back({v.video_id, t, y, rng.uniform() < 0.6 ? y : static_cast<int>(rng.below(4))});
    }
    windows += preds.size();
    if (transition_distances(v.labels) != oracle::distances(v.labels)) ++mismatches;
    const std::vector<VideoRecord> videos = {v};
    const auto report = boundary_analysis(videos, preds, 4);
    const auto expect = oracle::boundary_bins(videos, preds);
    if (report.bins.size() != expect.size()) {
      ++mismatches;
      continue;
    }
    std::size_t i = 0;
    for (const auto& [dist, bin] : expect) {
      const auto& got = report.bins[i++];
      const double oracle_acc = static_cast<double>(bin.correct) / static_cast<double>(bin.samples);
      if (got.distance.value_or(static_cast<std::size_t>(-1)) != dist || got.samples != bin.samples ||
          got.correct != bin.correct || got.accuracy() != oracle_acc) {
        ++mismatches;
      }
    }
  }
  return verdict(mismatches == 0, "200 streams, " + std::to_string(windows) + " windows; " +
                                      std::to_string(mismatches) + " mismatches");
}

// 9 ---------------------------------------------------------------------------
double nearest_centroid_accuracy(const WindowedDataset& train, const WindowedDataset& test) {
  const std::size_t len = train.window() * train.dims();
  std::vector<std::vector<double>> centroid(2, std::vector<double>(len, 0.0));
  std::vector<std::size_t> n(2, 0);
  std::vector<double> buf(len);
  for (std::size_t i = 0; i < train.size(); ++i) {
    train.copy_window(i, buf);
    const auto y = static_cast<std::size_t>(train.labels()[i]);
    for (std::size_t k = 0; k < len; ++k) centroid[y][k] += buf[k];
    ++n[y];
  }
  for (std::size_t y = 0; y < 2; ++y)
    for (double& v : centroid[y]) v /= static_cast<double>(n[y]);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    test.copy_window(i, buf);
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      d0 += (buf[k] - centroid[0][k]) * (buf[k] - centroid[0][k]);
      d1 += (buf[k] - centroid[1][k]) * (buf[k] - centroid[1][k]);
    }
    correct += static_cast<int>(d1 < d0) == test.labels()[i];
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

Outcome desk_scale_learning() {
  const auto t0 = std::chrono::steady_clock::now();
  RngStream rng(9);
  const std::size_t T = 35, D = 12;
  auto train_raw = synthetic::drift_windows(200, T, D, rng);
  auto val_raw = synthetic::drift_windows(40, T, D, rng);
  auto test_raw = synthetic::drift_windows(100, T, D, rng);
  const std::vector<std::string> classes = {"down", "up"};
  const auto artifacts = fit_artifacts(train_raw, classes);
  const auto train = transform(artifacts, train_raw, T);
  const auto val = transform(artifacts, val_raw, T);
  const auto test = transform(artifacts, test_raw, T);
  const double centroid = nearest_centroid_accuracy(train, test);

  ModelConfig mc;  // full model, paper-size widths
  mc.window = T;
  mc.input_dim = D;
  mc.num_classes = 2;
  TrainConfig tc;  // 50 epochs, lr 1e-3, batch 32
  const FitResult r = fit(mc, train, val, tc);
  const double train_acc = score_dataset(r.best, train, tc.smoothing).accuracy;
  const double test_acc = score_dataset(r.best, test, tc.smoothing).accuracy;
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << "nearest-centroid held-out " << fmt("%.3f", centroid) << "; train acc " << fmt("%.3f", train_acc)
    << ", held-out acc " << fmt("%.3f", test_acc) << " after " << r.log.epochs.size() << " epochs (best "
    << r.best_epoch << "), " << fmt("%.0f s", secs);
  return verdict(centroid >= 0.9 && train_acc >= 0.95 && test_acc >= 0.90 && r.log.epochs.size() <= 50 &&
                     secs < 300.0,
                 d.str());
}

// 10 --------------------------------------------------------------------------
Outcome determinism() {
  msgl::testing::TempDir dir("acceptance_e2e");
  RngStream rng(10);
  fs::create_directories(dir.path() / "data");
  for (const auto& v : synthetic::ratsi_like(160, rng)) {
    write_ratsi_csv(dir.path() / "data" / (v.video_id + ".csv"), v);
  }
  auto config = [&](const std::string& out) {
    ExperimentConfig c;
    c.dataset = "ratsi";
    c.root = dir.path() / "data";
    c.split.val_videos = {"Observation08"};
    c.split.test_videos = {"Observation02"};
    c.model.window = 12;
    c.model.d_model = 32;
    c.model.d_ff = 32;
    c.model.bam_hidden = 16;
    c.train.max_epochs = 3;
    c.stride = 2;
    c.seed = 11;
    c.train.seed = 11;
    c.out = dir.path() / out;
    return c;
  };
  std::ostringstream sink;
  for (const char* out : {"a", "b"}) {
    const auto c = config(out);
    cmd_prepare(c, sink);
    cmd_train(c, sink);
    cmd_evaluate(c, std::nullopt, true, sink);
  }
  using msgl::testing::read_file;
  const auto same = [&](const std::string& rel) {
    return read_file(dir.path() / "a" / rel) == read_file(dir.path() / "b" / rel) &&
           !read_file(dir.path() / "a" / rel).empty();
  };
  const bool best = same("best.ckpt"), last = same("last.ckpt"), metrics = same("eval/metrics.json");
  std::ostringstream d;
  d << "best.ckpt " << (best ? "identical" : "DIFFERS") << ", last.ckpt " << (last ? "identical" : "DIFFERS")
    << ", metrics.json " << (metrics ? "identical" : "DIFFERS");
  return verdict(best && last && metrics, d.str());
}

// 11 --------------------------------------------------------------------------
Outcome reproduction_targets() {
  const char* ratsi = std::getenv("MSGL_RATSI_ROOT");
  const char* calms = std::getenv("MSGL_CALMS21_ROOT");
  if (!ratsi && !calms) return {Verdict::skip, "real datasets absent (set MSGL_RATSI_ROOT / MSGL_CALMS21_ROOT)"};
  msgl::testing::TempDir dir("acceptance_repro");
  std::ostringstream sink, d;
  bool ok = true;
  if (calms) {
    ExperimentConfig c;
    c.dataset = "calms21";
    c.root = calms;
    c.model.input_dim = 28;
    c.model.num_classes = 4;
    c.out = dir.path() / "calms21";
    cmd_prepare(c, sink);
    cmd_train(c, sink);
    const auto eval = cmd_evaluate(c, std::nullopt, true, sink);
    const auto m = load_metrics(eval / "metrics.json");
    const double attack = m.per_class.at("Attack").f1;
    ok = ok && std::abs(m.accuracy - 0.8709) <= 0.02 && std::abs(attack - 0.583) <= 0.05;
    d << "CalMS21 accuracy " << fmt("%.4f", m.accuracy) << " (0.8709), Attack F1 " << fmt("%.4f", attack)
      << " (0.583); ";
  }
  if (ratsi) {
    ExperimentConfig c;
    c.dataset = "ratsi";
    c.root = ratsi;
    c.split.val_videos = {"Observation08"};
    c.split.test_videos = {"Observation02"};
    c.out = dir.path() / "ratsi";
    cmd_prepare(c, sink);
    cmd_train(c, sink);
    const auto m = load_metrics(cmd_evaluate(c, std::nullopt, false, sink) / "metrics.json");
    ok = ok && std::abs(m.accuracy - 0.8148) <= 0.03;
    d << "RatSI Valid-8/Test-2 accuracy " << fmt("%.4f", m.accuracy) << " (0.8148)";
  }
  return verdict(ok, d.str());
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
    bool binding;
  };
  const Criterion criteria[] = {
      {1, "gradient correctness", gradient_correctness, true},
      {2, "causality", causality, true},
      {3, "parameter-count slope", parameter_slope, true},
      {4, "preprocessing identities", preprocessing_identities, true},
      {5, "loss closed forms", loss_closed_forms, true},
      {6, "optimizer/scheduler contracts", optimizer_contracts, true},
      {7, "metric oracles", metric_oracles, true},
      {8, "boundary analysis oracle", boundary_oracle, true},
      {9, "desk-scale learning", desk_scale_learning, true},
      {10, "determinism", determinism, true},
      {11, "reproduction targets (optional)", reproduction_targets, false},
  };
  int binding_failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    const char* tag = o.verdict == Verdict::pass ? "PASS" : o.verdict == Verdict::skip ? "SKIP" : "FAIL";
    std::cout << tag << ' ' << c.id << ' ' << c.name << ": " << o.detail << std::endl;
    if (c.binding && o.verdict != Verdict::pass) ++binding_failures;
  }
  std::cout << (binding_failures == 0 ? "ACCEPTED" : "REJECTED") << " (" << binding_failures
            << " binding failures)" << std::endl;
  return binding_failures == 0 ? 0 : 1;
}
