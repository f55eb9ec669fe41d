// SPDX-License-Identifier: Apache-2.0
// msgl: prepare / train / evaluate / gradcheck driver.
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "msgl/errors.hpp"
#include "msgl/experiment.hpp"
#include "msgl/tensor.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string dataset;
  std::string root;
  std::string test_video;
  std::string val_video;
  std::string variant;
  std::optional<std::size_t> window;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "experiment config (JSON)");
  cmd->add_option("--dataset", o.dataset, "ratsi | calms21")->check(CLI::IsMember({"ratsi", "calms21"}));
  cmd->add_option("--root", o.root, "dataset directory");
  cmd->add_option("--test-video", o.test_video, "test video id");
  cmd->add_option("--val-video", o.val_video, "validation video id");
  cmd->add_option("--variant", o.variant, "base | msa | bam | full")
      ->check(CLI::IsMember({"base", "msa", "bam", "full"}));
  cmd->add_option("--window", o.window, "window length T");
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--out", o.out, "output directory");
}

msgl::ExperimentConfig resolve(const Overrides& o) {
  msgl::ExperimentConfig cfg = o.config.empty() ? msgl::ExperimentConfig{} : msgl::load_experiment_config(o.config);
  if (!o.dataset.empty()) cfg.dataset = o.dataset;
  if (!o.root.empty()) cfg.root = o.root;
  if (!o.test_video.empty()) cfg.split.test_videos = {o.test_video};
  if (!o.val_video.empty()) cfg.split.val_videos = {o.val_video};
  if (!o.variant.empty()) cfg.variant = msgl::parse_variant(o.variant);
  if (o.window) cfg.model.window = *o.window;
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.train.seed = *o.seed;
  }
  if (!o.out.empty()) cfg.out = o.out;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-scale transformer for pose-based behavior recognition"};
  app.require_subcommand(1);
  Overrides o;

  auto* prepare = app.add_subcommand("prepare", "fit preprocessing on the training split and window all splits");
  add_common(prepare, o);
  auto* train = app.add_subcommand("train", "train a model variant from prepared data");
  add_common(train, o);
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint on the test split");
  add_common(evaluate, o);
  std::string checkpoint;
  bool boundary = false;
  evaluate->add_option("--checkpoint", checkpoint, "checkpoint (default: <out>/best.ckpt)");
  evaluate->add_flag("--boundary", boundary, "also write the transition-distance analysis");
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every variant's gradients");
  msgl::GradcheckOptions gopts;
  std::string fault;
  gradcheck->add_option("--seed", gopts.seed, "random seed");
  gradcheck->add_option("--inject-fault", fault, "scale one op's backward rule (harness self-test)")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*prepare) {
      msgl::cmd_prepare(resolve(o), std::cout);
    } else if (*train) {
      msgl::cmd_train(resolve(o), std::cout);
    } else if (*evaluate) {
      std::optional<std::filesystem::path> ckpt;
      if (!checkpoint.empty()) ckpt = checkpoint;
      msgl::cmd_evaluate(resolve(o), ckpt, boundary, std::cout);
    } else if (*gradcheck) {
      if (!fault.empty()) msgl::debug::set_backward_fault(fault);
      return msgl::cmd_gradcheck(gopts, std::cout) ? 0 : 1;
    }
  } catch (const msgl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const msgl::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
