// SPDX-License-Identifier: Apache-2.0
#include "lookaround/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lookaround/autodiff/checkpoint.hpp"
#include "lookaround/binary_io.hpp"
#include "lookaround/completer.hpp"
#include "lookaround/error.hpp"
#include "lookaround/evalsuite.hpp"
#include "lookaround/trainer.hpp"
#include "lookaround/viewgrid_io.hpp"
#include "lookaround/worlds.hpp"

namespace lookaround::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct Flags {
  bool out = false, data = false, test_data = false, checkpoint = false, T = false,
       preset = false, family = false, count = false, classes = false, class_range = false,
       updates = false, batch = false, lr = false, momentum = false, act_lr_scale = false,
       beta = false, mode = false;
};

const CLI::Validator kBetaRange(
    [](std::string& s) -> std::string {
      const double v = std::stod(s);
      if (!(v >= 0.0 && v < 1.0)) return "value " + s + " not in range [0, 1)";
      return {};
    },
    "[0, 1)", "BETA");

const CLI::Validator kMomentumRange(
    [](std::string& s) -> std::string {
      const double v = std::stod(s);
      if (!(v >= 0.0 && v < 1.0)) return "value " + s + " not in range [0, 1)";
      return {};
    },
    "[0, 1)", "MOMENTUM");

const CLI::Validator kPositive(
    [](std::string& s) -> std::string {
      const double v = std::stod(s);
      if (!(v > 0.0 && std::isfinite(v))) return "value " + s + " must be > 0";
      return {};
    },
    "> 0", "POSITIVE");

const CLI::Validator kClassRange(
    [](std::string& s) -> std::string {
      int lo = 0, hi = 0;
      char sep = 0;
      std::istringstream is(s);
      if (!(is >> lo >> sep >> hi) || sep != ':' || !is.eof() || lo < 0 || hi < lo)
        return "expected LO:HI with 0 <= LO <= HI, got '" + s + "'";
      return {};
    },
    "LO:HI", "CLASS_RANGE");

void add_flags(CLI::App* sub, Command& c, const Flags& f) {
  sub->add_option("--seed", c.seed, "Root seed for every random stream");
  if (f.out) sub->add_option("--out", c.out, "Output directory")->required();
  if (f.data) sub->add_option("--data", c.data, "Directory of .vgrd worlds")->required();
  if (f.test_data)
    sub->add_option("--test-data", c.test_data, "Directory of held-out .vgrd worlds")
        ->required();
  if (f.checkpoint) sub->add_option("--checkpoint", c.checkpoint, "GLMP1 checkpoint");
  if (f.T) sub->add_option("--T", c.T, "Episode length")->check(CLI::Range(1, 1 << 16));
  if (f.preset)
    sub->add_option("--preset", c.preset, "Motion preset")
        ->check(CLI::IsMember({"scene", "object"}));
  if (f.family)
    sub->add_option("--family", c.family, "World family")
        ->required()
        ->check(CLI::IsMember({"lighthouse", "gradient_sky", "textured_halves"}));
  if (f.count) sub->add_option("--count", c.count, "Number of items")->check(CLI::Range(1, 1 << 30));
  if (f.classes)
    sub->add_option("--classes", c.classes, "Class (or glyph) count K")
        ->check(CLI::Range(2, 1 << 20));
  if (f.class_range)
    sub->add_option("--class-range", c.class_range, "Inclusive class interval LO:HI")
        ->check(kClassRange);
  if (f.updates)
    sub->add_option("--updates", c.updates, "Parameter updates")->check(CLI::Range(0, 1 << 30));
  if (f.batch)
    sub->add_option("--batch,--episodes", c.batch, "Episodes per update")
        ->check(CLI::Range(1, 1 << 20));
  if (f.lr) sub->add_option("--lr", c.lr, "Learning rate")->check(kPositive);
  if (f.momentum) sub->add_option("--momentum", c.momentum, "Momentum")->check(kMomentumRange);
  if (f.act_lr_scale)
    sub->add_option("--act-lr-scale", c.act_lr_scale, "ACT learning-rate multiplier")
        ->check(kPositive);
  if (f.beta) sub->add_option("--beta", c.beta, "Baseline decay")->check(kBetaRange);
  if (f.mode)
    sub->add_option("--mode", c.mode, "Action selection at rollout")
        ->check(CLI::IsMember({"sample", "argmax"}));
}

json flags_json(const Command& c) {
  return json{{"seed", c.seed},         {"out", c.out},
              {"data", c.data},         {"test_data", c.test_data},
              {"checkpoint", c.checkpoint}, {"T", c.T},
              {"preset", c.preset},     {"family", c.family},
              {"count", c.count},       {"classes", c.classes},
              {"class_range", c.class_range}, {"updates", c.updates},
              {"batch", c.batch},       {"lr", c.lr},
              {"momentum", c.momentum}, {"act_lr_scale", c.act_lr_scale},
              {"beta", c.beta},
              {"mode", c.mode}};
}

std::string timestamp_utc() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Manifest {
  json doc;

  Manifest(const Command& c, std::string started) {
    doc["command"] = c.name;
    doc["flags"] = flags_json(c);
    doc["seed"] = c.seed;
    doc["inputs"] = json::array();
    doc["outputs"] = json::array();
    doc["format_versions"] = {{"viewgrid", kViewGridMagic},
                              {"checkpoint", ad::kCheckpointMagic},
                              {"metrics_csv", 1}};
    doc["started_at"] = std::move(started);
  }
  void input(const fs::path& p) { doc["inputs"].push_back(p.generic_string()); }
  void output(const fs::path& p) { doc["outputs"].push_back(p.generic_string()); }

  void write(const fs::path& dir) const {
    const std::string text = doc.dump(2) + "\n";
    io::write_file(dir / "manifest.json", std::span<const char>(text.data(), text.size()));
  }
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec && fs::is_directory(dir), ErrorCode::kIo,
          "cannot create directory " + dir.string());
}

std::vector<ViewGrid> load_worlds(const fs::path& dir, Manifest& m) {
  auto worlds = load_viewgrid_dir(dir);
  require(!worlds.empty(), ErrorCode::kInvalidArgument,
          "no .vgrd files in " + dir.string());
  m.input(dir);
  return worlds;
}

TrainState load_state(const Command& c, Manifest& m) {
  require(!c.checkpoint.empty(), ErrorCode::kInvalidArgument, "--checkpoint is required");
  m.input(c.checkpoint);
  return load_checkpoint(c.checkpoint);
}

ActMode parse_mode(const std::string& s) {
  return s == "argmax" ? ActMode::kArgmax : ActMode::kSample;
}

int updates_or(const Command& c, int fallback) { return c.updates >= 0 ? c.updates : fallback; }

int cmd_gen(const Command& c, Manifest& m, std::ostream& out) {
  WorldSpec spec;
  spec.family = parse_family(c.family);
  if (c.classes > 0) {
    spec.glyph_count = c.classes;
    spec.class_count = c.classes;
  }
  if (!c.class_range.empty()) {
    require(spec.family == WorldFamily::kTexturedHalves, ErrorCode::kInvalidArgument,
            "--class-range applies to textured_halves only");
    std::sscanf(c.class_range.c_str(), "%d:%d", &spec.class_lo, &spec.class_hi);
    require(spec.class_hi < spec.class_count, ErrorCode::kInvalidArgument,
            "--class-range exceeds the class count");
  }
  const int count = c.count > 0 ? c.count : 10;
  const fs::path dir(c.out);
  ensure_dir(dir);
  for (int i = 0; i < count; ++i) {
    spec.seed = RngStream(c.seed, StreamPurpose::kWorldGen, static_cast<uint64_t>(i)).next_u64();
    char name[32];
    std::snprintf(name, sizeof name, "world_%06d.vgrd", i);
    save_viewgrid(generate_world(spec), dir / name);
    m.output(dir / name);
  }
  out << "wrote " << count << " " << c.family << " worlds to " << dir.string() << "\n";
  return kExitOk;
}

TrainConfig train_config(const Command& c, std::ostream& out) {
  TrainConfig tc;
  if (c.lr > 0.0) tc.lr = c.lr;
  tc.momentum = c.momentum;
  if (c.act_lr_scale > 0.0) tc.act_lr_scale = c.act_lr_scale;
  tc.batch = c.batch;
  tc.beta = c.beta;
  tc.seed = c.seed;
  tc.mode = parse_mode(c.mode);
  tc.log = &out;
  return tc;
}

int cmd_pretrain(const Command& c, Manifest& m, std::ostream& out) {
  const auto worlds = load_worlds(c.data, m);
  TrainState state;
  if (!c.checkpoint.empty()) {
    state = load_state(c, m);
  } else {
    ModelConfig model = preset_config(c.preset, worlds.front().dims());
    if (c.T > 0) model.T = c.T;
    state = initial_state(model, c.seed);
  }
  TrainConfig tc = train_config(c, out);
  tc.pretrain_updates = updates_or(c, tc.pretrain_updates);
  out << "update\tmean_L\tmean_LT_x1000\tbaseline\twall_s\n";
  state = pretrain_t1(worlds, tc, std::move(state));
  const fs::path dir(c.out);
  ensure_dir(dir);
  save_checkpoint(state, dir / "checkpoint.glmp");
  m.output(dir / "checkpoint.glmp");
  return kExitOk;
}

int cmd_train(const Command& c, Manifest& m, std::ostream& out) {
  const auto worlds = load_worlds(c.data, m);
  TrainState state = load_state(c, m);
  TrainConfig tc = train_config(c, out);
  tc.updates = updates_or(c, tc.updates);
  tc.T = c.T > 0 ? c.T : state.model.T;
  out << "update\tmean_L\tmean_LT_x1000\tbaseline\twall_s\n";
  state = train_policy(worlds, tc, std::move(state));
  const fs::path dir(c.out);
  ensure_dir(dir);
  save_checkpoint(state, dir / "checkpoint.glmp");
  m.output(dir / "checkpoint.glmp");
  return kExitOk;
}

int cmd_eval(const Command& c, Manifest& m, std::ostream& out) {
  const auto worlds = load_worlds(c.data, m);
  const TrainState state = load_state(c, m);
  EvalOptions opt;
  opt.T = c.T > 0 ? c.T : state.model.T;
  opt.seed = c.seed;
  opt.mode = parse_mode(c.mode);
  const auto policies = standard_policies();
  const MetricTable table = evaluate_policies(policies, worlds, state, opt);
  const fs::path dir(c.out);
  ensure_dir(dir);
  save_csv(table, dir / "metrics.csv");
  m.output(dir / "metrics.csv");
  if (table.large_action_choice)
    m.doc["diagnostics"]["large_action"] = to_string(*table.large_action_choice);
  m.doc["diagnostics"]["elevation_histogram"] = table.elevation_histogram;
  write_completion_csv(out, table);
  return kExitOk;
}

int cmd_transfer(const Command& c, Manifest& m, std::ostream& out) {
  const auto train = load_worlds(c.data, m);
  const auto test = load_worlds(c.test_data, m);
  const TrainState completion = load_state(c, m);
  ModelConfig encoder = completion.model;
  encoder.T = c.T > 0 ? c.T : completion.model.T;
  ClassifierConfig cc;
  if (c.lr > 0.0) cc.lr = c.lr;
  cc.momentum = c.momentum;
  cc.batch = c.batch;
  cc.updates = updates_or(c, cc.updates);
  cc.seed = c.seed;
  cc.log = &out;
  const ClassifierModel model_a = train_classifier_random_policy(train, encoder, cc);
  const MetricTable table =
      run_transfer(model_a, completion, test, encoder.T, c.seed, parse_mode(c.mode));
  const fs::path dir(c.out);
  ensure_dir(dir);
  const auto bytes = encode_classifier(model_a);
  io::write_file(dir / "classifier.glmp", bytes);
  m.output(dir / "classifier.glmp");
  save_csv(table, dir / "transfer.csv");
  m.output(dir / "transfer.csv");
  write_accuracy_csv(out, table);
  return kExitOk;
}

/// Rows of view tiles: the rolled world first, then the prediction after
/// every step. Tiles are separated by one-pixel mid-gray lines; tiles whose
/// mask flag is set (observed cells) get a white frame.
void write_montage(const fs::path& path, const std::vector<ViewGrid>& rows_of_grids,
                   const std::vector<CellMask>& framed) {
  const GridDims& d = rows_of_grids.front().dims();
  require(d.view_c == 1 || d.view_c == 3, ErrorCode::kInvalidArgument,
          "montages support 1 or 3 channels");
  const int tile_h = d.view_h + 1, tile_w = d.view_w + 1;
  const int width = d.m_azim * tile_w + 1;
  const int height = static_cast<int>(rows_of_grids.size()) * d.n_elev * tile_h + 1;
  const int C = d.view_c;
  std::vector<unsigned char> px(static_cast<size_t>(width) * height * C, 128);
  for (size_t g = 0; g < rows_of_grids.size(); ++g)
    for (int e = 0; e < d.n_elev; ++e)
      for (int a = 0; a < d.m_azim; ++a) {
        const auto v = rows_of_grids[g].view(e, a);
        const int y0 = (static_cast<int>(g) * d.n_elev + e) * tile_h + 1;
        const int x0 = a * tile_w + 1;
        if (!framed[g].empty() && framed[g][e * d.m_azim + a]) {
          for (int y = y0 - 1; y <= y0 + d.view_h; ++y)
            for (int x = x0 - 1; x <= x0 + d.view_w; ++x)
              for (int ch = 0; ch < C; ++ch)
                px[(static_cast<size_t>(y) * width + x) * C + ch] = 255;
        }
        for (int y = 0; y < d.view_h; ++y)
          for (int x = 0; x < d.view_w; ++x)
            for (int ch = 0; ch < C; ++ch) {
              const float f = std::clamp(v[(static_cast<size_t>(y) * d.view_w + x) * C + ch], 0.0f, 1.0f);
              px[(static_cast<size_t>(y0 + y) * width + x0 + x) * C + ch] =
                  static_cast<unsigned char>(std::lround(f * 255.0f));
            }
      }
  std::string header = (C == 1 ? "P5\n" : "P6\n") + std::to_string(width) + " " +
                       std::to_string(height) + "\n255\n";
  std::vector<char> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), px.begin(), px.end());
  io::write_file(path, bytes);
}

int cmd_dump(const Command& c, Manifest& m, std::ostream& out) {
  const auto files = list_viewgrids(c.data);
  require(!files.empty(), ErrorCode::kInvalidArgument, "no .vgrd files in " + c.data);
  m.input(c.data);
  const TrainState state = load_state(c, m);
  ModelConfig config = state.model;
  if (c.T > 0) config.T = c.T;
  RolloutPolicy policy;
  policy.mode = parse_mode(c.mode);
  const int count = c.count > 0 ? c.count : 4;
  const fs::path dir(c.out);
  ensure_dir(dir);
  for (int i = 0; i < count; ++i) {
    const fs::path& file = files[static_cast<size_t>(i) % files.size()];
    const ViewGrid world = load_viewgrid(file);
    RngStream rng(c.seed, StreamPurpose::kDump, static_cast<uint64_t>(i));
    const Viewpoint start{rng.uniform_int(config.dims.n_elev), rng.uniform_int(config.dims.m_azim)};
    ad::Tape<float> tape(state.params);
    auto trace = rollout(tape, world, start, config, policy, rng);
    const ViewGrid target = roll_azimuth(world, trace.delta0);

    std::vector<ViewGrid> rows{target};
    std::vector<CellMask> framed{CellMask{}};
    std::ostringstream side;
    side << "world " << file.filename().string() << "\n";
    side << "start " << to_string(start) << "\n";
    side << "delta0 " << trace.delta0 << "\n";
    for (size_t t = 0; t < trace.steps.size(); ++t) {
      const auto& step = trace.steps[t];
      rows.push_back(prediction_grid(tape, step.prediction, config.dims));
      framed.push_back(step.prediction.pasted_mask);
      char mse[32];
      std::snprintf(mse, sizeof mse, "%.4f", 1000.0 * grid_mse(rows.back(), target));
      side << "t " << t + 1 << " viewpoint " << to_string(step.viewpoint) << " mse_x1000 "
           << mse;
      if (step.action) side << " action " << to_string(*step.action);
      if (step.log_prob.valid()) side << " log_prob " << tape.scalar(step.log_prob);
      side << "\n";
    }
    char stem[32];
    std::snprintf(stem, sizeof stem, "episode_%04d", i);
    const fs::path image = dir / (std::string(stem) + (config.dims.view_c == 1 ? ".pgm" : ".ppm"));
    write_montage(image, rows, framed);
    const std::string text = side.str();
    io::write_file(dir / (std::string(stem) + ".txt"), std::span<const char>(text.data(), text.size()));
    m.output(image);
    m.output(dir / (std::string(stem) + ".txt"));
  }
  out << "wrote " << count << " episode montages to " << dir.string() << "\n";
  return kExitOk;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return kExitUsage;
    case ErrorCode::kIo: return kExitIo;
    case ErrorCode::kBadMagic:
    case ErrorCode::kTruncated:
    case ErrorCode::kDimsOverflow:
    case ErrorCode::kUnknownName:
    case ErrorCode::kFormat: return kExitFormat;
    case ErrorCode::kShapeMismatch:
    case ErrorCode::kContract: return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace

Command parse_args(const std::vector<std::string>& args) {
  Command c;
  CLI::App app{"Active observation completion on synthetic viewgrids", "lookaround"};
  app.require_subcommand(1, 1);

  struct Sub {
    const char* name;
    const char* help;
    Flags flags;
  };
  Flags gen{.out = true, .family = true, .count = true, .classes = true, .class_range = true};
  Flags pretrain{.out = true, .data = true, .checkpoint = true, .T = true, .preset = true,
                 .updates = true, .batch = true, .lr = true, .momentum = true};
  Flags train{.out = true, .data = true, .checkpoint = true, .T = true, .updates = true,
              .batch = true, .lr = true, .momentum = true, .act_lr_scale = true, .beta = true,
              .mode = true};
  Flags eval{.out = true, .data = true, .checkpoint = true, .T = true, .mode = true};
  Flags transfer{.out = true, .data = true, .test_data = true, .checkpoint = true, .T = true,
                 .updates = true, .batch = true, .lr = true, .momentum = true, .mode = true};
  Flags dump{.out = true, .data = true, .checkpoint = true, .T = true, .count = true,
             .mode = true};
  const Sub subs[] = {
      {"gen", "Generate VGRD1 worlds", gen},
      {"pretrain", "Train all modules on T=1 episodes", pretrain},
      {"train", "Policy training with SENSE/FUSE/DECODE frozen", train},
      {"eval", "MSE-vs-t table for the learned policy and baselines", eval},
      {"transfer", "Train a random-policy classifier and drive it with the learned policy", transfer},
      {"dump", "Episode montages and sidecars", dump},
  };
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    add_flags(sub, c, s.flags);
    sub->callback([&c, name = std::string(s.name)] { c.name = name; });
    const std::string name = s.name;
    if (name == "train" || name == "eval" || name == "transfer" || name == "dump")
      sub->get_option("--checkpoint")->required();
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp& e) {
    std::ostringstream text, ignored;
    app.exit(e, text, ignored);
    throw HelpRequested{text.str()};
  }
  return c;
}

int run_command(const Command& c, std::ostream& out, std::ostream& err) {
  try {
    Manifest manifest(c, timestamp_utc());
    int status = kExitUsage;
    if (c.name == "gen") status = cmd_gen(c, manifest, out);
    else if (c.name == "pretrain") status = cmd_pretrain(c, manifest, out);
    else if (c.name == "train") status = cmd_train(c, manifest, out);
    else if (c.name == "eval") status = cmd_eval(c, manifest, out);
    else if (c.name == "transfer") status = cmd_transfer(c, manifest, out);
    else if (c.name == "dump") status = cmd_dump(c, manifest, out);
    else fail(ErrorCode::kInvalidArgument, "unknown command '" + c.name + "'");
    if (status == kExitOk) manifest.write(c.out);
    return status;
  } catch (const Error& e) {
    err << "error (" << error_code_name(e.code()) << "): " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Command c;
  try {
    c = parse_args(args);
  } catch (const HelpRequested& h) {
    out << h.text;
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }
  return run_command(c, out, err);
}

}  // namespace lookaround::cli
