#pragma once

#include <filesystem>
#include <string>

#include "manner/model_config.hpp"
#include "manner/trainer.hpp"

namespace manner {
inline namespace MANNER_ABI_NS {

struct DataPaths {
  std::filesystem::path train_noisy;
  std::filesystem::path train_clean;
  std::filesystem::path valid_noisy;  // optional, together with valid_clean
  std::filesystem::path valid_clean;
};

/// Everything a run needs, read from an INI file with the sections [model],
/// [train], [loss], [data] and [output]. See docs/config.md.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataPaths data;
  std::filesystem::path output_dir = "runs";

  /// Checks the model and trainer settings. With `need_training_data` the
  /// data directories must exist as well.
  void validate(bool need_training_data) const;
};

/// Parses INI text. Relative paths are resolved against `base_dir`. Unknown
/// sections or keys and malformed values throw ConfigError.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// "fft:hop:win,fft:hop:win,..."
std::vector<StftConfig> parse_resolutions(const std::string& text);

}  // namespace MANNER_ABI_NS
}  // namespace manner
