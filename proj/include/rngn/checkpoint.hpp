#pragma once

// JSON checkpoints for the three model families.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rngn/data_io.hpp"
#include "rngn/models.hpp"

namespace rngn {

inline constexpr int kCheckpointFormatVersion = 1;

/// Context stored next to the parameters so a checkpoint can be re-priced on
/// the same sample set.
struct CheckpointMetadata {
    std::optional<double> spot;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n_samples;
    std::optional<double> tau;  ///< calibration maturity of single-maturity models
    std::vector<RatePoint> rate_curve;  ///< curve of the calibration chain; may be empty

    bool operator==(const CheckpointMetadata&) const = default;
};

struct Checkpoint {
    Model model;
    CheckpointMetadata metadata;
};

std::string save_checkpoint(const Model& model, const CheckpointMetadata& metadata = {});
/// Throws DataError on malformed JSON or a version mismatch and
/// UnsupportedModelError on an unknown model_type.
Checkpoint load_checkpoint(std::string_view text);

void write_checkpoint(const std::filesystem::path& path, const Model& model,
                      const CheckpointMetadata& metadata = {});
Checkpoint read_checkpoint(const std::filesystem::path& path);

} // namespace rngn
