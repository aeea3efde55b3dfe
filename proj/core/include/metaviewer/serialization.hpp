#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "metaviewer/data.hpp"
#include "metaviewer/evaluation.hpp"
#include "metaviewer/fusion.hpp"
#include "metaviewer/model.hpp"
#include "metaviewer/trainer.hpp"

namespace metaviewer {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Config objects as JSON text. Parsing starts from the defaults, overrides
// the keys present, rejects unknown keys, and validates the result. A train
// config that sets inner_steps != 1 without naming meta_grad falls back to
// first-order meta-gradients, since exact-t1 only covers a single step.
std::string to_json(const ModelConfig& cfg);
std::string to_json(const LossConfig& cfg);
std::string to_json(const TrainConfig& cfg);
std::string to_json(const SynthSpec& spec);

/// `validate = false` allows views / input_dims to be filled in later.
ModelConfig model_config_from_json(std::string_view text, bool validate = true);
LossConfig loss_config_from_json(std::string_view text);
TrainConfig train_config_from_json(std::string_view text);
SynthSpec synth_spec_from_json(std::string_view text);

/// Checkpoint: fusion kind, model config, and every parameter as
/// {shape, values}. Doubles are written in shortest round-trip form, so a
/// save/load cycle is bit-exact.
std::string checkpoint_to_json(const FusionModel& m);
FusionModel checkpoint_from_json(std::string_view text);
void save_checkpoint(const FusionModel& m, const std::filesystem::path& path);
FusionModel load_checkpoint(const std::filesystem::path& path);

/// One training-log line (no trailing newline).
std::string log_line(const EpochRecord& rec, const std::optional<std::string>& fusion = std::nullopt);

std::string to_json(const EvalReport& report);
std::string to_json(const std::vector<EvalReport>& reports);
EvalReport eval_report_from_json(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace metaviewer
