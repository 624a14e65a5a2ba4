#include "dtsl/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "dtsl/checkpoint.hpp"
#include "dtsl/config.hpp"
#include "dtsl/csv.hpp"
#include "dtsl/pgm.hpp"
#include "dtsl/trainer.hpp"

namespace dtsl {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

std::size_t decimals_of(const std::string& s) {
    const auto dot = s.find('.');
    return dot == std::string::npos ? 0 : s.size() - dot - 1;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

}  // namespace

std::vector<std::string> expand_values(const std::string& spec) {
    std::vector<std::string> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        const auto dots = item.find("..");
        if (dots == std::string::npos) {
            out.push_back(item);
            continue;
        }
        const std::string a = item.substr(0, dots), b = item.substr(dots + 2);
        const std::size_t d = std::max(decimals_of(a), decimals_of(b));
        const double scale = std::pow(10.0, static_cast<double>(d));
        double fa = 0.0, fb = 0.0;
        try {
            fa = std::stod(a);
            fb = std::stod(b);
        } catch (const std::exception&) {
            throw std::invalid_argument("bad range '" + item + "'");
        }
        const auto ia = std::llround(fa * scale), ib = std::llround(fb * scale);
        if (ib < ia) throw std::invalid_argument("descending range '" + item + "'");
        for (long long k = ia; k <= ib; ++k) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.*f", static_cast<int>(d), static_cast<double>(k) / scale);
            out.push_back(buf);
        }
    }
    return out;
}

namespace {

// Flags shared by train, sweep and ablation. Each maps onto a config key so
// that the config file and the command line go through the same parser.
struct ConfigFlags {
    std::string config_path;
    std::map<std::string, std::string> values;

    void attach(CLI::App& app) {
        app.add_option("--config", config_path, "key=value config file (flags take precedence)");
        const std::pair<const char*, const char*> flags[] = {
            {"kappa", "consensus threshold on base-2 JS divergence"},
            {"omega", "EMA decay"},
            {"alpha", "weight of the CLG pseudo-label Dice term"},
            {"beta", "weight of the uniform regularization term"},
            {"rampup-iters", "iterations over which alpha and beta ramp in (0: constant)"},
            {"strategy", "default, strategy1, strategy2, strategy3"},
            {"mode", "semi, supervised-dtsl, supervised, vanilla-mt, plain-dtsl"},
            {"seed", "training seed (DTSL_SEED overrides)"},
            {"max-iter", "iterations"},
            {"labeled-fraction", "labeled share of the training pool"},
            {"eta0", "initial learning rate"},
            {"labeled-batch", "labeled samples per step"},
            {"unlabeled-batch", "unlabeled samples per step"},
            {"base-channels", "network width"},
            {"snapshot-every", "probe interval in iterations"},
            {"probe-size", "test samples in the probe batch"},
            {"num-classes", "classes including background"},
            {"image-size", "image side length"},
            {"train-count", "training pool size"},
            {"test-count", "test set size"},
            {"noise-sigma", "image noise"},
            {"data-seed", "corpus seed"},
        };
        for (const auto& [name, help] : flags) {
            std::string key = name;
            std::replace(key.begin(), key.end(), '-', '_');
            app.add_option_function<std::string>(
                std::string("--") + name, [this, key](const std::string& v) { values[key] = v; }, help);
        }
    }

    TrainConfig resolve() const {
        try {
            TrainConfig cfg = config_path.empty() ? TrainConfig{} : load_config(config_path);
            for (const auto& [k, v] : values) cfg.set(k, v);
            if (const char* env = std::getenv("DTSL_SEED"); env && *env) cfg.set("seed", env);
            cfg.validate();
            return cfg;
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        } catch (const std::runtime_error& e) {
            throw UsageError(e.what());
        }
    }
};

void print_summary(std::ostream& out, const TrainingReport& r) {
    for (const auto& m : r.metrics) {
        const ClassMetrics& f = m.report.foreground;
        out << m.model << ": dsc=" << csv::fmt(f.dsc) << " jaccard=" << csv::fmt(f.jaccard)
            << " hd95=" << (f.hd95 ? csv::fmt(*f.hd95) : "undefined") << " asd=" << (f.asd ? csv::fmt(*f.asd) : "undefined")
            << "\n";
    }
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream f(p);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << text;
}

int cmd_train(const ConfigFlags& flags, const std::string& out_dir, std::ostream& out) {
    const TrainConfig cfg = flags.resolve();
    const TrainingReport r = run_training(cfg, build_dataset(cfg), fs::path(out_dir));
    print_summary(out, r);
    return kExitOk;
}

int cmd_eval(const std::string& run_dir, const std::string& out_path, std::ostream& out) {
    const fs::path dir(run_dir);
    if (!fs::exists(dir / "manifest.txt")) throw UsageError("no manifest.txt in " + run_dir);
    std::map<std::string, std::string> extra;
    const TrainConfig cfg = load_config(dir / "manifest.txt", &extra);
    const DatasetSplit data = build_dataset(cfg);
    std::ostringstream csv;
    csv << metrics_csv_header() << "\n";
    std::size_t found = 0;
    for (const char* model : {"student0", "student1", "teacher0", "teacher1"}) {
        const fs::path ckpt = dir / "checkpoints" / (std::string(model) + ".ckpt");
        if (!fs::exists(ckpt)) continue;
        ++found;
        const MetricReport rep = evaluate_model(load_checkpoint(ckpt), data.test, cfg.num_classes);
        for (const auto& row : metrics_csv_rows(model, rep)) csv << row << "\n";
    }
    if (found == 0) throw std::runtime_error("no checkpoints under " + (dir / "checkpoints").string());
    if (out_path.empty()) out << csv.str();
    else write_file(out_path, csv.str());
    return kExitOk;
}

int cmd_sweep(const ConfigFlags& flags, const std::string& param_flag, const std::string& values_spec,
              std::size_t jobs, const std::string& out_dir, std::ostream& out) {
    const TrainConfig base = flags.resolve();
    std::string param = param_flag;
    std::replace(param.begin(), param.end(), '-', '_');
    if (!is_config_key(param)) throw UsageError("unknown sweep parameter '" + param_flag + "'");
    std::vector<std::string> values;
    try {
        values = expand_values(values_spec);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    if (values.empty()) throw UsageError("empty value list");
    for (const auto& v : values) {
        TrainConfig probe = base;
        try {
            probe.set(param, v);
            probe.validate();
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
    fs::create_directories(out_dir);
    const auto rows = sweep(base, param, values, jobs, fs::path(out_dir));
    std::ostringstream csv;
    csv << sweep_csv_header() << "\n";
    bool all_ok = true;
    for (const auto& r : rows) {
        csv << sweep_csv_row(r) << "\n";
        all_ok = all_ok && r.ok;
    }
    write_file(fs::path(out_dir) / "sweep.csv", csv.str());
    out << csv.str();
    return all_ok ? kExitOk : kExitFailure;
}

struct AblationRow {
    const char* name;
    TrainMode mode;
    bool url;
};

constexpr AblationRow kAblationRows[] = {
    {"MT", TrainMode::VanillaMT, false},
    {"Plain DTSL", TrainMode::PlainDTSL, false},
    {"CLG", TrainMode::SemiDTSL, false},
    {"Plain DTSL + URL", TrainMode::PlainDTSL, true},
    {"CLG + URL", TrainMode::SemiDTSL, true},
};

double median(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int cmd_ablation(const ConfigFlags& flags, const std::string& seeds_spec, std::size_t jobs, const std::string& out_dir,
                 std::ostream& out) {
    const TrainConfig base = flags.resolve();
    std::vector<std::string> seeds;
    try {
        seeds = expand_values(seeds_spec);
        for (const auto& s : seeds) TrainConfig{}.set("seed", s);
    } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("--seeds: ") + e.what());
    }
    if (seeds.empty()) throw UsageError("--seeds is empty");
    fs::create_directories(out_dir);

    struct Cell {
        std::vector<double> dsc, jaccard, hd95, asd;
        std::size_t failures = 0;
    };
    std::vector<Cell> cells(std::size(kAblationRows));
    std::ostringstream csv;
    csv << "configuration,mode,beta,dsc,jaccard,hd95,asd,runs,flag\n";
    for (std::size_t r = 0; r < std::size(kAblationRows); ++r) {
        TrainConfig cfg = base;
        cfg.mode = kAblationRows[r].mode;
        if (!kAblationRows[r].url) cfg.beta = 0.0;
        std::string slug = kAblationRows[r].name;
        std::replace(slug.begin(), slug.end(), ' ', '_');
        slug.erase(std::remove(slug.begin(), slug.end(), '+'), slug.end());
        const auto rows = sweep(cfg, "seed", seeds, jobs, fs::path(out_dir) / slug);
        for (const auto& row : rows) {
            if (!row.ok) {
                ++cells[r].failures;
                continue;
            }
            const ClassMetrics& f = row.report->headline().foreground;
            cells[r].dsc.push_back(f.dsc);
            cells[r].jaccard.push_back(f.jaccard);
            if (f.hd95) cells[r].hd95.push_back(*f.hd95);
            if (f.asd) cells[r].asd.push_back(*f.asd);
        }
    }
    const double plain = median(cells[1].dsc);
    for (std::size_t r = 0; r < std::size(kAblationRows); ++r) {
        const Cell& c = cells[r];
        std::string flag;
        if (r + 1 == std::size(kAblationRows)) {
            flag = median(c.dsc) >= plain ? "dsc>=plain_dtsl" : "dsc<plain_dtsl";
        }
        TrainConfig cfg = base;
        const double beta = kAblationRows[r].url ? cfg.beta : 0.0;
        csv << csv::join({kAblationRows[r].name, std::string(to_string(kAblationRows[r].mode)), csv::fmt(beta),
                          csv::fmt(median(c.dsc)), csv::fmt(median(c.jaccard)), csv::fmt(median(c.hd95)),
                          csv::fmt(median(c.asd)), std::to_string(c.dsc.size()), flag})
            << "\n";
    }
    write_file(fs::path(out_dir) / "ablation.csv", csv.str());
    out << csv.str();
    for (const auto& c : cells)
        if (c.failures) return kExitFailure;
    return kExitOk;
}

int cmd_gen_data(const ConfigFlags& flags, const std::string& out_dir, std::ostream& out) {
    const TrainConfig cfg = flags.resolve();
    const DatasetSplit d = build_dataset(cfg);
    const fs::path root(out_dir);
    std::ostringstream index;
    index << "set,sample,image,label\n";
    auto dump = [&](const char* set, const std::vector<SyntheticSample>& samples, const std::vector<std::size_t>& ids) {
        fs::create_directories(root / set);
        for (std::size_t i = 0; i < samples.size(); ++i) {
            char stem[32];
            std::snprintf(stem, sizeof stem, "%04zu", ids[i]);
            const std::string img = std::string(set) + "/image_" + stem + ".pgm";
            const std::string lab = std::string(set) + "/label_" + stem + ".pgm";
            write_pgm(root / img, image_to_gray(samples[i].image));
            write_pgm(root / lab, labels_to_gray(samples[i].label, 0, cfg.num_classes));
            index << set << "," << ids[i] << "," << img << "," << lab << "\n";
        }
    };
    dump("labeled", d.labeled, d.labeled_index);
    dump("unlabeled", d.unlabeled, d.unlabeled_index);
    dump("test", d.test, d.test_index);
    write_file(root / "index.csv", index.str());
    write_file(root / "corpus.txt", config_to_text(cfg));
    out << "labeled=" << d.labeled.size() << " unlabeled=" << d.unlabeled.size() << " test=" << d.test.size() << "\n";
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dual teacher-student semi-supervised segmentation on synthetic data", "dtsl"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    ConfigFlags train_flags, sweep_flags, ablation_flags, data_flags;
    std::string train_out, sweep_out, ablation_out, data_out, run_dir, eval_out, param, values, seeds = "1";
    std::size_t sweep_jobs = 1, ablation_jobs = 1;

    auto* train = app.add_subcommand("train", "train one configuration");
    train_flags.attach(*train);
    train->add_option("--out-dir", train_out, "run directory")->required();

    auto* eval = app.add_subcommand("eval", "re-evaluate a finished run from its checkpoints");
    eval->add_option("--run-dir", run_dir, "directory written by train")->required();
    eval->add_option("--out", eval_out, "metrics CSV path (default: stdout)");

    auto* sw = app.add_subcommand("sweep", "grid over one config key");
    sweep_flags.attach(*sw);
    sw->add_option("--param", param, "config key, e.g. kappa")->required();
    sw->add_option("--values", values, "comma list and/or a..b ranges")->required();
    sw->add_option("--jobs", sweep_jobs, "concurrent runs")->check(CLI::PositiveNumber);
    sw->add_option("--out-dir", sweep_out, "output directory")->required();

    auto* ab = app.add_subcommand("ablation", "the five module-toggle configurations");
    ablation_flags.attach(*ab);
    ab->add_option("--seeds", seeds, "seeds, comma list or range");
    ab->add_option("--jobs", ablation_jobs, "concurrent runs")->check(CLI::PositiveNumber);
    ab->add_option("--out-dir", ablation_out, "output directory")->required();

    auto* gd = app.add_subcommand("gen-data", "export the synthetic corpus as PGM pairs");
    data_flags.attach(*gd);
    gd->add_option("--out-dir", data_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*train) return cmd_train(train_flags, train_out, out);
        if (*eval) return cmd_eval(run_dir, eval_out, out);
        if (*sw) return cmd_sweep(sweep_flags, param, values, sweep_jobs, sweep_out, out);
        if (*ab) return cmd_ablation(ablation_flags, seeds, ablation_jobs, ablation_out, out);
        if (*gd) return cmd_gen_data(data_flags, data_out, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const TrainingDiverged& e) {
        err << "training diverged: " << e.what() << "\n" << e.diagnostics();
        return kExitFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"dtsl"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace dtsl
