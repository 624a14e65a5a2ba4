#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dtsl/config.hpp"
#include "dtsl/losses.hpp"
#include "dtsl/metrics.hpp"
#include "dtsl/models.hpp"
#include "dtsl/optimizer.hpp"
#include "dtsl/rng.hpp"
#include "dtsl/synthetic.hpp"

namespace dtsl {

struct TeacherStudentGroup {
    ModelParams student;
    ModelParams teacher;
    Adam optimizer;

    explicit TeacherStudentGroup(ModelParams s);
};

// Epoch-wise shuffled index stream over [0, n).
class BatchSampler {
public:
    BatchSampler(std::size_t n, std::uint64_t seed, std::uint64_t stream);
    std::vector<std::size_t> next(std::size_t count);

private:
    std::size_t n_;
    Rng rng_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
};

// Group 0 is PlainConvNet, group 1 ResidualConvNet. SupervisedPlain and
// VanillaMT keep only group 0.
struct TrainerState {
    TrainConfig cfg;
    std::vector<TeacherStudentGroup> groups;
    std::size_t iteration = 0;
    BatchSampler labeled_sampler;
    BatchSampler unlabeled_sampler;

    TrainerState(const TrainConfig& cfg, std::size_t labeled_count, std::size_t unlabeled_count);
};

// Multiplier on alpha and beta at a 0-based iteration.
double pace_rampup(const TrainConfig& cfg, std::size_t iteration);
bool uses_unlabeled(TrainMode m);
std::size_t group_count(TrainMode m);

struct Batch {
    Tensor images;   // [B,1,H,W]
    LabelMap labels; // ground truth; ignored for the unlabeled batch
};

// Raised when the objective turns non-finite; diagnostics() summarizes the
// divergence fields and loss terms at the failing step.
class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& what, std::string diagnostics)
        : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}
    const std::string& diagnostics() const { return diagnostics_; }

private:
    std::string diagnostics_;
};

// One optimisation step over both groups. `unlabeled` may be null for the
// supervised modes. Students step with the poly learning rate, then each
// teacher takes an EMA update.
LossBreakdown train_step(TrainerState& state, const Batch& labeled, const Batch* unlabeled);

struct ProbeRecord {
    std::size_t iteration = 0;
    double cons_fraction = 0.0;       // js(student1, teacher0) < kappa; single group: student0 vs teacher0
    double teacher_agreement = 0.0;   // argmax(teacher0) == ground truth
};

ProbeRecord probe(const TrainerState& state, const Batch& batch, LabelMap* teacher_labels = nullptr);

LabelMap predict(const ModelParams& params, const std::vector<SyntheticSample>& samples);
MetricReport evaluate_model(const ModelParams& params, const std::vector<SyntheticSample>& samples,
                            std::size_t num_classes);

struct NamedReport {
    std::string model;  // student0, student1, teacher0, teacher1
    MetricReport report;
};

struct TrainingReport {
    std::vector<LossBreakdown> losses;
    std::vector<ProbeRecord> probes;
    std::vector<NamedReport> metrics;  // student0 first: the headline model

    const MetricReport& headline() const { return metrics.at(0).report; }
};

DatasetSplit build_dataset(const TrainConfig& cfg);

// Full run. With an output directory, writes manifest.txt first, then
// losses.csv, probe.csv, snapshots/agreement_XXXX.pgm, checkpoints/*.ckpt
// and metrics.csv; a divergence also leaves diagnostics.txt.
TrainingReport run_training(const TrainConfig& cfg, const DatasetSplit& data,
                            const std::optional<std::filesystem::path>& out_dir = std::nullopt);

std::string probe_csv_header();
std::string probe_csv_row(const ProbeRecord& r);

struct SweepRow {
    std::string param;
    std::string value;
    bool ok = false;
    std::string error;
    std::optional<TrainingReport> report;
};

// Sets `param` to each value in turn on top of `base`; failing runs are
// recorded and the sweep continues. Up to `jobs` runs execute concurrently.
std::vector<SweepRow> sweep(const TrainConfig& base, const std::string& param, const std::vector<std::string>& values,
                            std::size_t jobs, const std::optional<std::filesystem::path>& out_dir = std::nullopt);

std::string sweep_csv_header();
std::string sweep_csv_row(const SweepRow& r);

}  // namespace dtsl
