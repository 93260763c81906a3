// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gradient_suite.hpp"
#include "manner/bench.hpp"
#include "manner/chunker.hpp"
#include "manner/loss.hpp"
#include "manner/metrics.hpp"
#include "manner/parallel.hpp"
#include "manner/trainer.hpp"
#include "support.hpp"

namespace {

using namespace manner;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

ModelConfig toy_model() {
  ModelConfig c;
  c.channels = 12;
  c.depth = 2;
  c.chunk_size = 16;
  return c;
}

Verdict gradients() {
  Verdict v;
  const auto check = [&](const std::vector<gradsuite::Outcome>& outcomes, double tol, const char* tag) {
    double worst = 0;
    for (const auto& o : outcomes) {
      worst = std::max(worst, o.max_relative_error);
      v.require(o.max_relative_error < tol, std::string(tag) + " " + o.name + fmt(" err %.3g", o.max_relative_error));
      v.require(static_cast<double>(o.skipped) <= gradsuite::kMaxSkippedFraction * o.coordinates,
                std::string(tag) + " " + o.name + " skipped too many coordinates");
    }
    v.note(std::string(tag) + ": " + std::to_string(outcomes.size()) + " checks, worst " + fmt("%.2e", worst));
  };
  const auto t0 = Clock::now();
  check(gradsuite::run_f32(), gradsuite::kTolerance32, "f32");
  check(gradsuite::run_f64(), gradsuite::kTolerance64, "f64");
  const double elapsed = seconds_since(t0);
  v.require(elapsed < 120, fmt("took %.0f s", elapsed));
  v.note(fmt("%.1f s", elapsed));
  return v;
}

Verdict chunker() {
  Verdict v;
  v.require(chunk_count(1000, 64) == 31, "P(1000, 64) = " + std::to_string(chunk_count(1000, 64)));
  std::mt19937_64 rng(2024);
  std::vector<std::pair<std::int64_t, std::int64_t>> cases = {{3, 10}, {2, 64}, {5, 1000}, {1, 1}, {4, 63}};
  for (int i = 0; i < 20; ++i) {
    cases.emplace_back(1 + static_cast<std::int64_t>(rng() % 8), 1 + static_cast<std::int64_t>(rng() % 3000));
  }
  double worst = 0;
  for (const auto& [ch, t] : cases) {
    for (const std::int64_t c : {16, 64}) {
      const Tensor x = test::random_tensor({2, ch, t}, rng());
      const Tensor back = merge(chunk(x, c));
      if (back.shape() != x.shape()) {
        v.require(false, "shape changed for T=" + std::to_string(t));
        continue;
      }
      worst = std::max(worst, test::max_abs_diff(back.data(), x.data()));
    }
  }
  v.require(worst <= 1e-6, fmt("max error %.3g", worst));
  v.note(std::to_string(cases.size() * 2) + " cases, max error " + fmt("%.1e", worst));
  return v;
}

Verdict shapes() {
  Verdict v;
  const ModelConfig cfg;
  v.require(cfg.kernel == 8 && cfg.stride == 4 && cfg.channels == 60 && cfg.depth == 4 && cfg.chunk_size == 64,
            "unexpected default configuration");
  const MannerModel model(cfg, 0);
  ForwardTrace trace;
  const Tensor out = model.forward(Tensor({1, 1, 64000}), false, &trace);
  const std::vector<std::int64_t> lengths = {16000, 4000, 1000, 250}, channels = {120, 240, 480, 960};
  v.require(trace.encoder_outputs.size() == 4, "encoder depth");
  for (std::size_t l = 0; l < trace.encoder_outputs.size() && l < 4; ++l) {
    const auto& s = trace.encoder_outputs[l];
    v.require(s[1] == channels[l] && s[2] == lengths[l], "encoder " + std::to_string(l + 1) + " is " + to_string(s));
  }
  v.require(out.shape() == Shape{1, 1, 64000}, "output " + to_string(out.shape()));
  ForwardTrace ragged;
  const Tensor r = model.forward(Tensor({1, 1, 63999}), false, &ragged);
  v.require(ragged.padded_input == Shape{1, 1, 64000}, "padded input " + to_string(ragged.padded_input));
  v.require(r.shape() == Shape{1, 1, 63999}, "ragged output " + to_string(r.shape()));
  v.note("encoder lengths 16000/4000/1000/250, channels 120/240/480/960, 63999 -> 64000 -> 63999");
  return v;
}

Verdict loss_identities() {
  Verdict v;
  const auto y = test::random_tensor({16000}, 4, 0.1);
  const auto n = test::random_tensor({16000}, 5, 0.05);
  const Tensor x = add(y, n);
  const LossOptions opts;
  const double same = combined_loss(y, y, opts).item();
  const double weighted = weighted_total_loss(x, y, y, opts).total.item();
  v.require(std::abs(same) <= 1e-6, fmt("L(y, y) = %.3g", same));
  v.require(std::abs(weighted) <= 1e-6, fmt("weighted L(y, y) = %.3g", weighted));
  const Tensor zero({16000});
  for (const auto& r : default_resolutions()) {
    const double sc = stft_loss(y, zero, r, opts.log_floor).spectral_convergence.item();
    v.require(sc == 1.0, "sc at fft " + std::to_string(r.fft_size) + fmt(" = %.9g", sc));
  }
  const std::vector<Scalar> clean = {1, 1, -1, 0}, noise = {0, 0, 0, 1}, silent(4);
  const double a = clean_weight(clean, noise);
  v.require(std::abs(a - 0.75) < 1e-6, fmt("alpha(3:1) = %.9g", a));
  v.require(clean_weight(clean, silent) == 1.0, "alpha with zero noise is not 1");
  v.note(fmt("L(y,y)=%.1e", same) + fmt(", alpha=%.6f", a));
  return v;
}

Verdict stft_oracle() {
  Verdict v;
  const Tensor x = test::random_tensor({256}, 9, 0.5);
  double worst = 0;
  for (const StftConfig cfg : {StftConfig{64, 16, 48}, StftConfig{128, 32, 128}, StftConfig{256, 64, 200}}) {
    const Tensor mag = stft_magnitude(x, cfg);
    const auto frames = stft_frame_count(256, cfg);
    const int bins = cfg.fft_size / 2 + 1;
    if (mag.shape() != Shape{frames, bins}) {
      v.require(false, "shape " + to_string(mag.shape()));
      continue;
    }
    for (std::int64_t f = 0; f < frames; ++f) {
      for (int k = 0; k < bins; ++k) {
        double re = 0, im = 0;
        for (int t = 0; t < cfg.window_length; ++t) {
          const double w = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * t / cfg.window_length);
          const double s = w * x.data()[f * cfg.hop + t];
          re += s * std::cos(2 * std::numbers::pi * k * t / cfg.fft_size);
          im -= s * std::sin(2 * std::numbers::pi * k * t / cfg.fft_size);
        }
        worst = std::max(worst, std::abs(std::hypot(re, im) - double(mag.data()[f * bins + k])));
      }
    }
  }
  v.require(worst < 1e-4, fmt("max deviation %.3g", worst));
  v.note(fmt("max deviation %.2e", worst));
  return v;
}

// One second of a voiced, speech-like signal: a gliding harmonic series with a
// syllable envelope over a colored broadband floor, mixed with white noise.
CorpusPair overfit_pair() {
  constexpr int kLength = kSampleRate;
  std::mt19937_64 floor_rng(3), noise_rng(7);
  std::normal_distribution<double> normal(0, 1);
  CorpusPair p;
  p.id = "overfit.wav";
  double a1 = 0, a2 = 0, phase = 0;
  for (int t = 0; t < kLength; ++t) {
    const double s = double(t) / kSampleRate;
    const double env = 0.2 + 0.8 * std::pow(std::sin(4 * std::numbers::pi * s), 2);
    const double ar = normal(floor_rng) + 1.6 * a1 - 0.8 * a2;
    a2 = a1;
    a1 = ar;
    phase += 2 * std::numbers::pi * (140 + 40 * std::sin(3 * std::numbers::pi * s)) / kSampleRate;
    double voiced = 0;
    for (int k = 1; k <= 12; ++k) voiced += std::sin(k * phase) / k;
    p.clean.samples.push_back(Scalar(0.08 * env * voiced + 0.01 * env * ar));
  }
  for (int t = 0; t < kLength; ++t) p.noisy.samples.push_back(p.clean.samples[t] + Scalar(0.02 * normal(noise_rng)));
  return p;
}

Verdict overfit() {
  Verdict v;
  const std::vector<CorpusPair> corpus = {overfit_pair()};
  MannerModel model(toy_model(), 1);
  TrainConfig tc;
  tc.epochs = 1000;
  tc.max_steps = 1000;
  tc.batch_size = 1;
  tc.seed = 1;
  tc.lr_max = 3e-3;
  tc.lr_min = 3e-5;
  tc.segment_seconds = 1;
  tc.segment_hop_seconds = 0.5;  // a 1 s utterance still yields one window
  tc.tempo_augment = false;
  tc.validate_every = tc.epochs;
  Trainer trainer(model, tc);
  const auto t0 = Clock::now();
  const TrainResult result = trainer.fit(corpus, corpus);
  const double elapsed = seconds_since(t0);
  const auto& losses = result.step_losses;
  const Tensor noisy({1, 1, kSampleRate}, corpus[0].noisy.samples);
  const Tensor enhanced = model.forward(noisy, false);
  const double before = si_snr(corpus[0].clean.samples, corpus[0].noisy.samples);
  const double after = si_snr(corpus[0].clean.samples, enhanced.data());
  const double ratio = losses.back() / losses.front();
  v.require(losses.size() <= 1000, std::to_string(losses.size()) + " steps");
  v.require(after >= 20, fmt("SI-SNR %.2f dB < 20 dB", after));
  v.require(ratio <= 0.25, fmt("loss ratio %.3f > 0.25", ratio));
  v.require(elapsed < 600, fmt("took %.0f s", elapsed));
  v.note(std::to_string(losses.size()) + " steps" + fmt(", SI-SNR %.2f dB", before) + fmt(" -> %.2f dB", after) +
         fmt(", loss ratio %.3f", ratio) + fmt(", %.0f s", elapsed));
  return v;
}

Verdict variants() {
  Verdict v;
  const auto t0 = Clock::now();
  BenchOptions opts;  // 1..10 s, five timed runs
  ModelConfig small_cfg;
  small_cfg.variant = Variant::kSmall;
  const MannerModel full(ModelConfig{}, 0), small(small_cfg, 0);
  const BenchReport rf = run_bench(full, opts, "full");
  const BenchReport rs = run_bench(small, opts, "small");
  std::fputs(bench_table({rf, rs}).c_str(), stdout);
  for (std::size_t i = 0; i < rf.rows.size(); ++i) {
    const auto& f = rf.rows[i];
    const auto& s = rs.rows[i];
    v.require(s.median_ms <= f.median_ms, fmt("small slower at %.0f s", f.length_s));
    if (i > 0) {
      v.require(f.peak_bytes >= rf.rows[i - 1].peak_bytes, fmt("full memory not monotone at %.0f s", f.length_s));
      v.require(s.peak_bytes >= rs.rows[i - 1].peak_bytes, fmt("small memory not monotone at %.0f s", s.length_s));
    }
  }
  // Least-squares slope of log time against log length.
  const auto exponent = [](const BenchReport& r) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(r.rows.size());
    for (const auto& row : r.rows) {
      const double lx = std::log(row.length_s), ly = std::log(row.median_ms);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
  };
  const double ef = exponent(rf), es = exponent(rs);
  v.require(ef <= 2 && es <= 2, fmt("scaling exponents %.2f", ef) + fmt(" / %.2f", es));
  const double elapsed = seconds_since(t0);
  v.require(elapsed < 300, fmt("took %.0f s", elapsed));
  v.note(fmt("time ~ length^%.2f (full)", ef) + fmt(", ^%.2f (small)", es) + fmt(", %.0f s", elapsed));
  return v;
}

std::vector<CorpusPair> small_corpus() {
  std::vector<CorpusPair> out;
  for (int i = 0; i < 2; ++i) {
    CorpusPair p;
    p.id = "utt" + std::to_string(i) + ".wav";
    p.clean.samples = test::random_signal(6000, 30 + i, 0.2);
    p.noisy.samples = p.clean.samples;
    const auto noise = test::random_signal(6000, 40 + i, 0.05);
    for (std::size_t t = 0; t < noise.size(); ++t) p.noisy.samples[t] += noise[t];
    out.push_back(std::move(p));
  }
  return out;
}

TrainConfig small_training() {
  TrainConfig t;
  t.epochs = 2;
  t.batch_size = 2;
  t.seed = 8;
  t.lr_min = 3e-5;
  t.lr_max = 3e-3;
  t.segment_seconds = 0.25;
  t.segment_hop_seconds = 0.125;
  t.loss.resolutions = {{256, 64, 200}, {512, 128, 400}};
  return t;
}

Verdict determinism() {
  Verdict v;
  const auto corpus = small_corpus();
  const auto dir = fs::temp_directory_path() / "manner_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);

  const auto run = [&](const TrainOutputs& outputs, std::string* log_text) {
    MannerModel model(toy_model(), 2);
    Trainer trainer(model, small_training());
    std::ostringstream log;
    TrainOutputs o = outputs;
    o.log = &log;
    const auto r = trainer.fit(corpus, {}, o);
    if (log_text) *log_text = log.str();
    return r.step_losses;
  };
  std::string log_a, log_b;
  const auto a = run({}, &log_a);
  const auto b = run({}, &log_b);
  v.require(!a.empty() && log_a == log_b, "fixed-seed logs differ");

  // Interrupt after k steps, reload the last checkpoint into a fresh model and
  // continue; every later step must reproduce the uninterrupted run exactly.
  const std::int64_t k = static_cast<std::int64_t>(a.size()) / 2;
  TrainOutputs first;
  first.last_checkpoint = dir / "last.ckpt";
  first.halt_at_step = k;
  const auto head = run(first, nullptr);
  v.require(static_cast<std::int64_t>(head.size()) == k, "halt did not stop at step " + std::to_string(k));

  MannerModel resumed(toy_model(), 99);
  Trainer trainer(resumed, small_training());
  trainer.load(dir / "last.ckpt");
  v.require(trainer.state().step == k, "checkpoint step " + std::to_string(trainer.state().step));
  const auto tail = trainer.fit(corpus, {}).step_losses;
  v.require(head.size() + tail.size() == a.size(), "resumed run has a different length");
  bool exact = true;
  for (std::size_t i = 0; i < tail.size() && k + i < a.size(); ++i) exact = exact && tail[i] == a[k + i];
  v.require(exact, "resumed losses differ from the uninterrupted run");
  v.note(std::to_string(a.size()) + " steps, resumed at step " + std::to_string(k) +
         (tail.empty() ? "" : fmt(", next loss %.9g", tail.front())));
  fs::remove_all(dir);
  return v;
}

Verdict ablations() {
  Verdict v;
  const auto corpus = small_corpus();
  const ModelConfig base = toy_model();
  const auto base_count = MannerModel(base, 0).parameters().parameter_count();

  // Disabling a path removes its own parameters and one third of every
  // block's exit projection weight.
  const auto expected_without = [&](const char* path) {
    const MannerModel m(base, 0);
    std::int64_t removed = 0;
    for (const auto& e : m.parameters().entries()) {
      if (e.name.find(path) != std::string::npos) removed += e.tensor.numel();
      if (e.name.size() > 12 && e.name.ends_with("exit.weight")) removed += e.tensor.numel() / 3;
    }
    return base_count - removed;
  };

  struct Case {
    const char* name;
    AttentionPaths paths;
    bool weighted;
    const char* path;
  };
  const Case cases[] = {{"no channel", {false, true, true}, true, "channel_path"},
                        {"no global", {true, false, true}, true, "global_path"},
                        {"no local", {true, true, false}, true, "local_path"},
                        {"unweighted", {true, true, true}, false, nullptr}};
  std::string counts = "full " + std::to_string(base_count);
  for (const auto& c : cases) {
    ModelConfig mc = base;
    mc.attention = c.paths;
    MannerModel model(mc, 0);
    const auto count = model.parameters().parameter_count();
    const auto want = c.path ? expected_without(c.path) : base_count;
    v.require(count == want, std::string(c.name) + ": " + std::to_string(count) + " parameters, expected " +
                                 std::to_string(want));
    TrainConfig tc = small_training();
    tc.loss.weighted = c.weighted;
    Trainer trainer(model, tc);
    const auto plan = plan_epoch(corpus, tc, 0);
    const LossReport r = trainer.step(make_batch(corpus, plan.batches[0], tc), 1e-3);
    v.require(std::isfinite(r.total.item()), std::string(c.name) + ": non-finite loss");
    v.require(c.weighted ? r.alpha < 1 : r.alpha == 1, std::string(c.name) + fmt(": alpha %.3f", r.alpha));
    counts += std::string(", ") + c.name + " " + std::to_string(count);
  }
  v.note(counts);
  return v;
}

}  // namespace

// Optional arguments select criteria by number; the default runs all of them.
int main(int argc, char** argv) {
  set_num_threads(1);
  struct Criterion {
    const char* name;
    std::function<Verdict()> run;
  };
  const Criterion criteria[] = {
      {"gradient correctness", gradients},  {"chunker roundtrip", chunker},
      {"shape suite", shapes},              {"loss identities", loss_identities},
      {"stft oracle", stft_oracle},         {"overfit convergence", overfit},
      {"variant ordering", variants},       {"determinism and persistence", determinism},
      {"ablation plumbing", ablations},
  };
  int failures = 0;
  int index = 0;
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  for (const auto& c : criteria) {
    ++index;
    if (!selected.empty() && std::find(selected.begin(), selected.end(), index) == selected.end()) continue;
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    failures += v.pass ? 0 : 1;
    std::printf("%s %d %s: %s\n", v.pass ? "PASS" : "FAIL", index, c.name, v.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
