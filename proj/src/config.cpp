#include "dtsl/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dtsl {

std::string_view to_string(TrainMode m) {
    switch (m) {
        case TrainMode::SemiDTSL:
            return "semi";
        case TrainMode::SupervisedDTSL:
            return "supervised-dtsl";
        case TrainMode::SupervisedPlain:
            return "supervised";
        case TrainMode::VanillaMT:
            return "vanilla-mt";
        case TrainMode::PlainDTSL:
            return "plain-dtsl";
    }
    throw std::invalid_argument("unknown TrainMode");
}

TrainMode parse_mode(std::string_view name) {
    for (auto m : {TrainMode::SemiDTSL, TrainMode::SupervisedDTSL, TrainMode::SupervisedPlain, TrainMode::VanillaMT,
                   TrainMode::PlainDTSL}) {
        if (name == to_string(m)) return m;
    }
    if (name == "mt") return TrainMode::VanillaMT;
    throw std::invalid_argument("unknown mode '" + std::string(name) +
                                "' (semi, supervised-dtsl, supervised, vanilla-mt, plain-dtsl)");
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_unsigned(std::string_view key, std::string_view v) {
    T out{};
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) {
        throw std::invalid_argument("config: '" + std::string(key) + "' expects a non-negative integer, got '" +
                                    std::string(v) + "'");
    }
    return out;
}

double parse_double(std::string_view key, std::string_view v) {
    const std::string s(v);
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(s, &used);
    } catch (const std::exception&) {
        used = std::string::npos;
    }
    if (used != s.size() || s.empty()) {
        throw std::invalid_argument("config: '" + std::string(key) + "' expects a number, got '" + s + "'");
    }
    return out;
}

// Shortest text that reads back to the same double.
std::string exact(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

}  // namespace

void TrainConfig::set(std::string_view key, std::string_view value) {
    const std::string v = trim(value);
    if (key == "max_iter") max_iter = parse_unsigned<std::size_t>(key, v);
    else if (key == "labeled_batch") labeled_batch = parse_unsigned<std::size_t>(key, v);
    else if (key == "unlabeled_batch") unlabeled_batch = parse_unsigned<std::size_t>(key, v);
    else if (key == "eta0") eta0 = parse_double(key, v);
    else if (key == "omega") omega = parse_double(key, v);
    else if (key == "kappa") kappa = parse_double(key, v);
    else if (key == "alpha") alpha = parse_double(key, v);
    else if (key == "beta") beta = parse_double(key, v);
    else if (key == "rampup_iters") rampup_iters = parse_unsigned<std::size_t>(key, v);
    else if (key == "strategy") strategy = parse_strategy(v);
    else if (key == "mode") mode = parse_mode(v);
    else if (key == "seed") seed = parse_unsigned<std::uint64_t>(key, v);
    else if (key == "num_classes") num_classes = parse_unsigned<std::size_t>(key, v);
    else if (key == "base_channels") base_channels = parse_unsigned<std::size_t>(key, v);
    else if (key == "snapshot_every") snapshot_every = parse_unsigned<std::size_t>(key, v);
    else if (key == "probe_size") probe_size = parse_unsigned<std::size_t>(key, v);
    else if (key == "image_size") image_size = parse_unsigned<std::size_t>(key, v);
    else if (key == "train_count") train_count = parse_unsigned<std::size_t>(key, v);
    else if (key == "test_count") test_count = parse_unsigned<std::size_t>(key, v);
    else if (key == "noise_sigma") noise_sigma = parse_double(key, v);
    else if (key == "data_seed") data_seed = parse_unsigned<std::uint64_t>(key, v);
    else if (key == "labeled_fraction") labeled_fraction = parse_double(key, v);
    else throw std::invalid_argument("config: unknown key '" + std::string(key) + "'");
}

std::map<std::string, std::string> TrainConfig::to_map() const {
    return {
        {"max_iter", std::to_string(max_iter)},
        {"labeled_batch", std::to_string(labeled_batch)},
        {"unlabeled_batch", std::to_string(unlabeled_batch)},
        {"eta0", exact(eta0)},
        {"omega", exact(omega)},
        {"kappa", exact(kappa)},
        {"alpha", exact(alpha)},
        {"beta", exact(beta)},
        {"rampup_iters", std::to_string(rampup_iters)},
        {"strategy", std::string(to_string(strategy))},
        {"mode", std::string(to_string(mode))},
        {"seed", std::to_string(seed)},
        {"num_classes", std::to_string(num_classes)},
        {"base_channels", std::to_string(base_channels)},
        {"snapshot_every", std::to_string(snapshot_every)},
        {"probe_size", std::to_string(probe_size)},
        {"image_size", std::to_string(image_size)},
        {"train_count", std::to_string(train_count)},
        {"test_count", std::to_string(test_count)},
        {"noise_sigma", exact(noise_sigma)},
        {"data_seed", std::to_string(data_seed)},
        {"labeled_fraction", exact(labeled_fraction)},
    };
}

bool is_config_key(std::string_view key) { return TrainConfig{}.to_map().count(std::string(key)) > 0; }

void TrainConfig::validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("config: " + m); };
    if (max_iter == 0) fail("max_iter must be >= 1");
    if (labeled_batch == 0 || unlabeled_batch == 0) fail("batch sizes must be >= 1");
    if (!(eta0 > 0.0)) fail("eta0 must be positive");
    if (!(omega >= 0.0 && omega <= 1.0)) fail("omega must lie in [0,1]");
    if (!(kappa >= 0.0 && kappa <= 1.0)) fail("kappa must lie in [0,1]");
    if (!(alpha >= 0.0) || !(beta >= 0.0)) fail("alpha and beta must be non-negative");
    if (num_classes < 2 || num_classes > 6) fail("num_classes must be in 2..6");
    if (base_channels < 4) fail("base_channels must be >= 4");
    if (snapshot_every == 0) fail("snapshot_every must be >= 1");
    if (image_size == 0 || image_size % 4 != 0) fail("image_size must be a positive multiple of 4");
    if (train_count < 2 || test_count < 1) fail("need at least 2 training and 1 test sample");
    if (probe_size == 0 || probe_size > test_count) fail("probe_size must be in [1, test_count]");
    if (!(noise_sigma >= 0.0)) fail("noise_sigma must be non-negative");
    if (!(labeled_fraction > 0.0 && labeled_fraction < 1.0)) fail("labeled_fraction must lie in (0,1)");
}

TrainConfig parse_config(std::string_view text, std::map<std::string, std::string>* extra) {
    TrainConfig cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
        }
        const std::string key = trim(std::string_view(t).substr(0, eq));
        const std::string value = trim(std::string_view(t).substr(eq + 1));
        // manifests carry these alongside the config; accept them everywhere
        const bool manifest_key = key == "tool_version" || key.starts_with("layout.");
        if ((extra || manifest_key) && !is_config_key(key)) {
            if (extra) (*extra)[key] = value;
            continue;
        }
        cfg.set(key, value);
    }
    return cfg;
}

TrainConfig load_config(const std::filesystem::path& path, std::map<std::string, std::string>* extra) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), extra);
}

std::string config_to_text(const TrainConfig& cfg) {
    std::string out;
    for (const auto& [k, v] : cfg.to_map()) out += k + "=" + v + "\n";
    return out;
}

std::string manifest_text(const TrainConfig& cfg) {
    std::string out = "# run manifest\n";
    out += "tool_version=" + std::string(kToolVersion) + "\n";
    out += config_to_text(cfg);
    out += "layout.losses=losses.csv\n";
    out += "layout.metrics=metrics.csv\n";
    out += "layout.probe=probe.csv\n";
    out += "layout.snapshots=snapshots/agreement_XXXX.pgm\n";
    out += "layout.checkpoints=checkpoints/<model>.ckpt\n";
    return out;
}

}  // namespace dtsl
