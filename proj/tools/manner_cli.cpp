// Command-line entry point: train, enhance, eval and bench.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include "manner/audio.hpp"
#include "manner/bench.hpp"
#include "manner/checkpoint.hpp"
#include "manner/errors.hpp"
#include "manner/metrics.hpp"
#include "manner/run_config.hpp"
#include "manner/trainer.hpp"

namespace fs = std::filesystem;
using namespace manner;

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kDataError = 3, kRuntimeError = 4 };

struct Options {
  std::string config;
  std::string checkpoint;
  std::string variant;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string lengths = "1,2,3,4,5,6,7,8,9,10";
  std::string input;
  std::string noisy_dir;
  std::string clean_dir;
  int runs = 5;
};

RunConfig config_from(const Options& o) {
  RunConfig rc = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (!o.variant.empty() && o.variant != "both") rc.model.variant = parse_variant(o.variant);
  if (o.seed) rc.train.seed = *o.seed;
  if (!o.out.empty()) rc.output_dir = o.out;
  return rc;
}

Tensor as_batch(const AudioClip& clip) {
  return Tensor({1, 1, static_cast<std::int64_t>(clip.samples.size())}, clip.samples);
}

AudioClip enhance_clip(const MannerModel& model, const AudioClip& clip) {
  const Tensor out = model.forward(as_batch(clip), false);
  AudioClip result;
  result.sample_rate = clip.sample_rate;
  result.samples.assign(out.data().begin(), out.data().end());
  for (auto& v : result.samples) v = std::clamp(v, Scalar(-1), Scalar(1));
  return result;
}

int cmd_train(const Options& o) {
  if (o.config.empty()) throw ConfigError("train requires --config");
  const RunConfig rc = config_from(o);
  rc.validate(true);

  const auto train = pair_corpus(rc.data.train_noisy, rc.data.train_clean);
  std::vector<CorpusPair> valid;
  if (!rc.data.valid_noisy.empty()) valid = pair_corpus(rc.data.valid_noisy, rc.data.valid_clean);

  fs::create_directories(rc.output_dir);
  std::ofstream log(rc.output_dir / "train.log");
  if (!log) throw DataError("cannot write " + (rc.output_dir / "train.log").string());

  MannerModel model = build_model(rc.model, rc.train.seed);
  std::cerr << "model " << to_string(rc.model.variant) << ": " << model.parameters().parameter_count()
            << " parameters; " << train.size() << " training pairs, " << valid.size() << " validation pairs\n";
  Trainer trainer(model, rc.train);
  if (!o.checkpoint.empty()) {
    trainer.load(o.checkpoint);
    std::cerr << "resumed from " << o.checkpoint << " at step " << trainer.state().step << '\n';
  }
  TrainOutputs outputs{rc.output_dir / "best.ckpt", rc.output_dir / "last.ckpt", &log};
  const TrainResult result = trainer.fit(train, valid, outputs);
  std::cout << "steps=" << result.state.step << " epochs=" << result.state.epoch
            << " best_validation=" << result.state.best_validation << " best_epoch=" << result.state.best_epoch
            << " final_validation=" << result.final_validation << '\n'
            << "wrote " << outputs.best_checkpoint.string() << ", " << outputs.last_checkpoint.string() << ", "
            << (rc.output_dir / "train.log").string() << '\n';
  return kOk;
}

int cmd_enhance(const Options& o) {
  if (o.checkpoint.empty()) throw ConfigError("enhance requires --checkpoint");
  if (o.out.empty()) throw ConfigError("enhance requires --out");
  if (o.input.empty()) throw ConfigError("enhance requires an input file or directory");
  const auto inputs = list_wavs(o.input);
  if (inputs.empty()) throw DataError("no WAV files in " + o.input);
  const MannerModel model = load_model(o.checkpoint);
  fs::create_directories(o.out);
  for (const auto& path : inputs) {
    const AudioClip clip = read_wav(path);
    require_sample_rate(clip, kSampleRate, path.string());
    const fs::path target = fs::path(o.out) / path.filename();
    write_wav(target, enhance_clip(model, clip));
    std::cout << path.string() << " -> " << target.string() << '\n';
  }
  return kOk;
}

int cmd_eval(const Options& o) {
  if (o.checkpoint.empty()) throw ConfigError("eval requires --checkpoint");
  std::string noisy_dir = o.noisy_dir, clean_dir = o.clean_dir;
  if ((noisy_dir.empty() || clean_dir.empty()) && !o.config.empty()) {
    const RunConfig rc = config_from(o);
    const auto& d = rc.data;
    if (noisy_dir.empty()) noisy_dir = (d.valid_noisy.empty() ? d.train_noisy : d.valid_noisy).string();
    if (clean_dir.empty()) clean_dir = (d.valid_clean.empty() ? d.train_clean : d.valid_clean).string();
  }
  if (noisy_dir.empty() || clean_dir.empty()) throw ConfigError("eval requires --noisy and --clean (or --config)");
  const auto pairs = pair_corpus(noisy_dir, clean_dir);
  const MannerModel model = load_model(o.checkpoint);

  std::cout << std::left << std::setw(28) << "utterance" << std::right << std::setw(12) << "noisy_dB" << std::setw(12)
            << "enhanced_dB" << std::setw(12) << "gain_dB" << '\n'
            << std::fixed << std::setprecision(2);
  double sum_noisy = 0, sum_enhanced = 0;
  for (const auto& pair : pairs) {
    require_sample_rate(pair.noisy, kSampleRate, pair.id);
    const AudioClip enhanced = enhance_clip(model, pair.noisy);
    const double before = si_snr(pair.clean.samples, pair.noisy.samples);
    const double after = si_snr(pair.clean.samples, enhanced.samples);
    sum_noisy += before;
    sum_enhanced += after;
    std::cout << std::left << std::setw(28) << pair.id << std::right << std::setw(12) << before << std::setw(12)
              << after << std::setw(12) << after - before << '\n';
  }
  const double n = static_cast<double>(pairs.size());
  std::cout << std::left << std::setw(28) << "mean" << std::right << std::setw(12) << sum_noisy / n << std::setw(12)
            << sum_enhanced / n << std::setw(12) << (sum_enhanced - sum_noisy) / n << '\n';
  return kOk;
}

int cmd_bench(const Options& o) {
  BenchOptions bench;
  bench.lengths_s = parse_lengths(o.lengths);
  bench.runs = o.runs;
  if (o.seed) bench.seed = *o.seed;

  ModelConfig base;
  std::optional<MannerModel> loaded;
  if (!o.checkpoint.empty()) {
    loaded.emplace(load_model(o.checkpoint));
    base = loaded->config();
  } else if (!o.config.empty()) {
    const RunConfig rc = config_from(o);
    rc.validate(false);
    base = rc.model;
  }

  std::vector<Variant> variants;
  if (o.variant == "both") {
    variants = {Variant::kFull, Variant::kSmall};
  } else if (!o.variant.empty()) {
    variants = {parse_variant(o.variant)};
  } else {
    variants = {base.variant};
  }
  for (auto v : variants) {
    ModelConfig c = base;
    c.variant = v;
    c.validate();
  }

  std::vector<BenchReport> reports;
  for (auto v : variants) {
    if (loaded && loaded->config().variant == v) {
      reports.push_back(run_bench(*loaded, bench));
    } else {
      ModelConfig c = base;
      c.variant = v;
      const MannerModel model = build_model(c, 0);
      reports.push_back(run_bench(model, bench));
    }
  }

  for (const auto& r : reports) {
    if (reports.size() > 1) std::cout << "# " << r.label << '\n';
    std::cout << bench_csv(r);
    if (!o.out.empty()) {
      fs::create_directories(o.out);
      std::ofstream(fs::path(o.out) / ("bench_" + r.label + ".csv")) << bench_csv(r);
    }
  }
  std::cerr << bench_table(reports);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MANNER speech enhancement: train, enhance, evaluate and benchmark"};
  app.require_subcommand(1);
  Options o;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config, "INI run configuration");
    cmd->add_option("--checkpoint", o.checkpoint, "model checkpoint");
    cmd->add_option("--variant", o.variant, "model variant")->check(CLI::IsMember({"full", "small", "both"}));
    cmd->add_option("--seed", o.seed, "random seed");
    cmd->add_option("--out", o.out, "output directory");
  };

  auto* train = app.add_subcommand("train", "train a model from a run configuration");
  add_common(train);
  auto* enhance = app.add_subcommand("enhance", "enhance a WAV file or a directory of WAV files");
  add_common(enhance);
  enhance->add_option("input", o.input, "input WAV file or directory")->required();
  auto* eval = app.add_subcommand("eval", "report SI-SNR of noisy and enhanced speech");
  add_common(eval);
  eval->add_option("--noisy", o.noisy_dir, "directory of noisy WAV files");
  eval->add_option("--clean", o.clean_dir, "directory of clean WAV files");
  auto* bench = app.add_subcommand("bench", "time inference over signal lengths");
  add_common(bench);
  bench->add_option("--lengths", o.lengths, "comma-separated lengths in seconds");
  bench->add_option("--runs", o.runs, "timed runs per length (>= 5)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (o.variant == "both" && !bench->parsed()) throw ConfigError("--variant both is only valid for bench");
    if (train->parsed()) return cmd_train(o);
    if (enhance->parsed()) return cmd_enhance(o);
    if (eval->parsed()) return cmd_eval(o);
    return cmd_bench(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}
