/* Copyright (c) 2026 The i2imix Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

// Command-line front end: synth / select / train / eval.
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "i2imix/data.hpp"
#include "i2imix/evaluation.hpp"
#include "i2imix/plot.hpp"
#include "i2imix/selection.hpp"
#include "i2imix/trainer.hpp"

namespace fs = std::filesystem;
using namespace i2imix;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

void check_device_env() {
  const char* device = std::getenv("I2IMIX_DEVICE");
  if (device && std::string(device) != "cpu")
    throw ConfigError(std::string("unsupported I2IMIX_DEVICE '") + device +
                      "' (this build is CPU-only)");
}

struct SynthArgs {
  int n_paired = 1;
  int n_unpaired = 10;
  int size = 64;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_synth(const SynthArgs& args) {
  const DatasetManifest m =
      synth_toy_dataset(args.n_paired, args.n_unpaired, args.size, args.seed, args.out);
  const std::size_t files = m.paired.size() * 2 + m.unpaired_x.size() + m.unpaired_y.size();
  std::cout << "wrote " << files << " images (" << m.paired.size() << " pairs, "
            << m.unpaired_x.size() << "+" << m.unpaired_y.size()
            << " unpaired), manifest + colormap under " << args.out << "\n";
  return kExitOk;
}

struct SelectArgs {
  std::string manifest;
  int budget = 1;
  std::string strategy = "kmedoids";
  std::uint64_t seed = 0;
  std::string out;
  std::string backbone = "random_projection";
  int backbone_dim = 64;
  int backbone_input = 32;
  std::string backbone_weights;
};

int cmd_select(const SelectArgs& args) {
  const DatasetManifest manifest = DatasetManifest::load(args.manifest);
  std::unique_ptr<EmbeddingBackbone> backbone;
  if (args.backbone == "random_projection") {
    backbone = std::make_unique<RandomProjectionBackbone>(args.backbone_dim, args.backbone_input,
                                                          args.seed);
  } else if (args.backbone == "cnn") {
    backbone = std::make_unique<CnnBackbone>(args.backbone_input, 8, 3, args.seed,
                                             args.backbone_weights);
  } else {
    throw ConfigError("unknown backbone: " + args.backbone);
  }
  if (args.budget > static_cast<int>(manifest.paired.size()))
    std::cerr << "warning: budget " << args.budget << " exceeds candidate count "
              << manifest.paired.size() << "; selecting all candidates\n";
  const SelectionResult result =
      select_paired_samples(manifest, args.budget, *backbone, args.seed, args.strategy);
  result.save(args.out);
  std::cout << "selected " << result.selected.size() << " of " << manifest.paired.size()
            << " candidates (" << result.strategy << ", seed " << result.seed << ") -> "
            << args.out << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string manifest;
  std::string selection;
  std::string config_path;
  std::string out;
  std::string resume;
  std::string profile = "desk";
  // flag overrides; only applied when the user passed them
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<int> iteration_budget;
  std::optional<double> lr;
  std::optional<int> checkpoint_interval;
  std::optional<int> load_size;
  std::optional<int> crop_size;
  std::optional<double> lambda1, lambda2, lambda3, lambda4;
  bool no_cycle = false;
  bool no_idt = false;
  bool unbalanced = false;
};

int cmd_train(const TrainArgs& args) {
  check_device_env();
  TrainingConfig config;
  if (args.profile == "paper")
    config = TrainingConfig::paper_profile();
  else if (args.profile == "desk")
    config = TrainingConfig::desk_profile();
  else
    throw ConfigError("unknown profile: " + args.profile);

  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in) throw ConfigError("cannot open config: " + args.config_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config parse error: " + std::string(e.what()));
    }
    config = j.get<TrainingConfig>();
  }

  if (args.seed) config.seed = *args.seed;
  if (args.epochs) config.epochs_total = *args.epochs;
  if (args.iteration_budget) config.iteration_budget = *args.iteration_budget;
  if (args.lr) config.lr_base = *args.lr;
  if (args.checkpoint_interval) config.checkpoint_interval = *args.checkpoint_interval;
  if (args.load_size) config.augment.load_size = *args.load_size;
  if (args.crop_size) config.augment.crop_size = *args.crop_size;
  if (args.lambda1) config.weights.lambda1 = *args.lambda1;
  if (args.lambda2) config.weights.lambda2 = *args.lambda2;
  if (args.lambda3) config.weights.lambda3 = *args.lambda3;
  if (args.lambda4) config.weights.lambda4 = *args.lambda4;
  if (args.no_cycle) config.disable_cycle = true;
  if (args.no_idt) config.disable_identity = true;
  if (args.unbalanced) config.balanced = false;
  config.validate();

  const DatasetManifest manifest = DatasetManifest::load(args.manifest);
  std::optional<SelectionResult> selection;
  if (!args.selection.empty()) selection = SelectionResult::load(args.selection);

  std::unique_ptr<TrainState<float>> resumed;
  if (!args.resume.empty()) {
    resumed = std::make_unique<TrainState<float>>(TrainState<float>::restore(args.resume));
    std::cout << "resuming from " << args.resume << " (epoch " << resumed->epoch << ", step "
              << resumed->step << ")\n";
  }

  const TrainResult result =
      train<float>(config, manifest, selection, args.out, resumed.get(),
                   [](int epoch, const LossReport& r) {
                     std::cout << "epoch " << epoch << ": total " << r.total << " (gan_g "
                               << r.gan_g << ", gan_d " << r.gan_d << ", cycle " << r.cycle
                               << ", idt " << r.identity << ", l1 " << r.l1_paired << ")\n";
                   });
  std::cout << "trained " << result.steps_run << " steps over " << result.epochs_run
            << " epochs; final checkpoint " << result.final_checkpoint << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string manifest;
  std::string protocol = "segmentation";
  std::string colormap;
  std::string out;
  double threshold = 20.0;
  bool plot = false;
};

int cmd_eval(const EvalArgs& args) {
  check_device_env();
  const DatasetManifest manifest = DatasetManifest::load(args.manifest);
  const EvalProtocol protocol = parse_protocol(args.protocol);

  ColorMap colormap;
  if (!args.colormap.empty())
    colormap = ColorMap::load(args.colormap);
  else if (!manifest.colormap_path.empty())
    colormap = ColorMap::load(manifest.resolve(manifest.colormap_path));
  else if (protocol == EvalProtocol::Segmentation)
    throw ConfigError("segmentation protocol needs a colormap (--colormap or manifest entry)");

  Checkpoint ck = Checkpoint::load(args.checkpoint);
  const int n_paired_train = ck.meta.value("n_paired", -1);
  ResnetGenerator<float> g = load_generator_xy<float>(args.checkpoint);

  EvalReport report = evaluate([&g](const Tensor<float>& x) { return translate(g, x); },
                               manifest, protocol, colormap, args.threshold);
  report.extra["checkpoint"] = args.checkpoint;
  if (n_paired_train >= 0) report.extra["n_paired_train"] = n_paired_train;

  fs::create_directories(args.out);
  char name[64];
  std::snprintf(name, sizeof(name), "report_p%04d.json", std::max(0, n_paired_train));
  const std::string report_path = (fs::path(args.out) / name).string();
  report.save(report_path);
  std::cout << "protocol " << report.protocol << ", " << report.n_images
            << " images: pixel_acc " << report.aggregate.pixel_accuracy;
  if (protocol == EvalProtocol::Segmentation)
    std::cout << ", mean_acc " << report.aggregate.mean_class_accuracy << ", mean_iou "
              << report.aggregate.mean_iou;
  std::cout << " -> " << report_path << "\n";

  if (args.plot) {
    // Chart this report against any sibling reports (metric vs paired count).
    std::vector<std::pair<int, double>> points;
    for (const auto& entry : fs::directory_iterator(args.out)) {
      if (entry.path().extension() != ".json") continue;
      if (entry.path().filename().string().rfind("report_", 0) != 0) continue;
      std::ifstream in(entry.path());
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception&) {
        continue;
      }
      if (!j.contains("n_paired_train") || !j.contains("aggregate")) continue;
      points.emplace_back(j["n_paired_train"].get<int>(),
                          j["aggregate"]["pixel_accuracy"].get<double>());
    }
    if (points.empty())
      points.emplace_back(std::max(0, n_paired_train), report.aggregate.pixel_accuracy);
    const std::string plot_path = (fs::path(args.out) / "pixel_accuracy_vs_paired.png").string();
    plot_metric_vs_paired(points, "pixel_accuracy", plot_path);
    std::cout << "plot -> " << plot_path << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid paired/unpaired image-to-image translation toolkit"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate the synthetic shapes dataset");
  synth->add_option("--n-paired", synth_args.n_paired, "paired candidate count")->required();
  synth->add_option("--n-unpaired", synth_args.n_unpaired, "unpaired count per domain")
      ->required();
  synth->add_option("--size", synth_args.size, "image side length (>= 16)");
  synth->add_option("--seed", synth_args.seed, "rng seed");
  synth->add_option("--out", synth_args.out, "output directory")->required();

  SelectArgs select_args;
  auto* select = app.add_subcommand("select", "choose paired samples under a budget");
  select->add_option("--manifest", select_args.manifest, "dataset manifest")->required();
  select->add_option("--budget", select_args.budget, "number of samples to select")->required();
  select->add_option("--strategy", select_args.strategy, "kmedoids | random")
      ->check(CLI::IsMember({"kmedoids", "random"}));
  select->add_option("--seed", select_args.seed, "rng seed");
  select->add_option("--out", select_args.out, "selection manifest path")->required();
  select->add_option("--backbone", select_args.backbone, "random_projection | cnn")
      ->check(CLI::IsMember({"random_projection", "cnn"}));
  select->add_option("--backbone-dim", select_args.backbone_dim,
                     "embedding dimension (random_projection)");
  select->add_option("--backbone-input", select_args.backbone_input,
                     "backbone input resolution");
  select->add_option("--backbone-weights", select_args.backbone_weights,
                     "checkpoint with cnn backbone weights");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "run hybrid training");
  train_cmd->add_option("--manifest", train_args.manifest, "dataset manifest")->required();
  train_cmd->add_option("--selection", train_args.selection,
                        "selection manifest marking the paired subset");
  train_cmd->add_option("--config", train_args.config_path, "TrainingConfig JSON file");
  train_cmd->add_option("--out", train_args.out, "output directory")->required();
  train_cmd->add_option("--resume", train_args.resume, "checkpoint to resume from");
  train_cmd->add_option("--profile", train_args.profile, "desk | paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  train_cmd->add_option("--seed", train_args.seed, "rng seed");
  train_cmd->add_option("--epochs", train_args.epochs, "total epochs (even)");
  train_cmd->add_option("--iteration-budget", train_args.iteration_budget,
                        "approximate total iterations when --epochs is unset");
  train_cmd->add_option("--lr", train_args.lr, "base learning rate");
  train_cmd->add_option("--checkpoint-interval", train_args.checkpoint_interval,
                        "epochs between checkpoints (0 = final only)");
  train_cmd->add_option("--load-size", train_args.load_size, "augmentation resize size");
  train_cmd->add_option("--crop-size", train_args.crop_size, "augmentation crop size");
  train_cmd->add_option("--lambda1", train_args.lambda1, "adversarial weight");
  train_cmd->add_option("--lambda2", train_args.lambda2, "cycle weight");
  train_cmd->add_option("--lambda3", train_args.lambda3, "identity weight");
  train_cmd->add_option("--lambda4", train_args.lambda4, "paired L1 weight");
  train_cmd->add_flag("--no-cycle", train_args.no_cycle, "ablation: drop the cycle term");
  train_cmd->add_flag("--no-idt", train_args.no_idt, "ablation: drop the identity term");
  train_cmd->add_flag("--unbalanced", train_args.unbalanced,
                      "list each paired sample once per epoch instead of replicating");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on an evaluation manifest");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "trained checkpoint")->required();
  eval_cmd->add_option("--manifest", eval_args.manifest, "manifest with evaluation pairs")
      ->required();
  eval_cmd->add_option("--protocol", eval_args.protocol, "segmentation | maps")
      ->check(CLI::IsMember({"segmentation", "maps"}));
  eval_cmd->add_option("--colormap", eval_args.colormap, "colormap file (else manifest's)");
  eval_cmd->add_option("--out", eval_args.out, "report directory")->required();
  eval_cmd->add_option("--threshold", eval_args.threshold,
                       "maps protocol per-channel threshold (0-255 scale)");
  eval_cmd->add_flag("--plot", eval_args.plot, "emit metric-vs-paired-count chart");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_args);
    if (select->parsed()) return cmd_select(select_args);
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (eval_cmd->parsed()) return cmd_eval(eval_args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvalidInputError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}
