#pragma once

#include <filesystem>
#include <string>

#include "pvtrade/training.hpp"

namespace pvtrade {

inline constexpr const char* kCheckpointFormat = "pvtrade-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  TrainedModel model;
  std::string config_hash;
  std::string code_version;
};

/// JSON text holding the policy, normalizer, feature options and provenance.
/// Doubles are written in shortest round-trip form, so loading restores the
/// parameters bit for bit.
std::string checkpoint_to_string(const TrainedModel& model, const std::string& config_hash);
Checkpoint checkpoint_from_string(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const TrainedModel& model, const std::string& config_hash);

/// Throws IoError when the file is missing, DataError when it is malformed or
/// its format/version/feature list does not match this build.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pvtrade
