#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "dtsl/divergence.hpp"

namespace dtsl {

enum class TrainMode { SemiDTSL, SupervisedDTSL, SupervisedPlain, VanillaMT, PlainDTSL };

std::string_view to_string(TrainMode m);
TrainMode parse_mode(std::string_view name);

struct TrainConfig {
    // optimisation
    std::size_t max_iter = 3000;
    std::size_t labeled_batch = 2;
    std::size_t unlabeled_batch = 2;
    double eta0 = 1e-3;
    double omega = 0.95;
    double kappa = 0.05;
    double alpha = 1.0;
    double beta = 0.05;
    // alpha and beta ramp in as exp(-5 (1 - t/rampup_iters)^2); 0 disables.
    std::size_t rampup_iters = 0;
    ClgStrategy strategy = ClgStrategy::Default;
    TrainMode mode = TrainMode::SemiDTSL;
    std::uint64_t seed = 1;
    std::size_t num_classes = 4;
    std::size_t base_channels = 8;
    std::size_t snapshot_every = 200;
    std::size_t probe_size = 4;

    // corpus
    std::size_t image_size = 64;
    std::size_t train_count = 200;
    std::size_t test_count = 50;
    double noise_sigma = 0.08;
    std::uint64_t data_seed = 20240;
    double labeled_fraction = 0.1;

    // Throws std::invalid_argument on any violated range.
    void validate() const;

    // Sets one field from its textual form; unknown keys throw.
    void set(std::string_view key, std::string_view value);
    std::map<std::string, std::string> to_map() const;
};

bool is_config_key(std::string_view key);

// key=value lines; blank lines and '#' comments are skipped. Keys outside
// TrainConfig are returned in `extra` when given, otherwise rejected.
TrainConfig parse_config(std::string_view text, std::map<std::string, std::string>* extra = nullptr);
TrainConfig load_config(const std::filesystem::path& path, std::map<std::string, std::string>* extra = nullptr);

// Sorted key=value lines for every config field.
std::string config_to_text(const TrainConfig& cfg);

inline constexpr std::string_view kToolVersion = "0.1.0";

// Config plus tool version and output layout; reloadable by load_config
// with `extra` supplied.
std::string manifest_text(const TrainConfig& cfg);

}  // namespace dtsl
