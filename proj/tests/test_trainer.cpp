#include <gtest/gtest.h>

#include <cmath>

#include "dtsl/trainer.hpp"
#include "test_support.hpp"

using namespace dtsl;

namespace {

TrainConfig tiny(TrainMode mode) {
    TrainConfig c;
    c.mode = mode;
    c.image_size = 16;
    c.train_count = 20;
    c.test_count = 4;
    c.probe_size = 2;
    c.base_channels = 4;
    c.max_iter = 6;
    c.snapshot_every = 3;
    c.labeled_fraction = 0.2;
    return c;
}

const DatasetSplit& tiny_data() {
    static const DatasetSplit d = build_dataset(tiny(TrainMode::SemiDTSL));
    return d;
}

Batch batch(const std::vector<SyntheticSample>& s, std::vector<std::size_t> idx) {
    return {stack_images(s, idx), stack_labels(s, idx)};
}

std::vector<double> flat(const ModelParams& p) {
    std::vector<double> v;
    for (const auto& t : p.tensors) v.insert(v.end(), t.value.data().begin(), t.value.data().end());
    return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST(TrainerState, GroupsPerMode) {
    EXPECT_EQ(TrainerState(tiny(TrainMode::SemiDTSL), 4, 12).groups.size(), 2u);
    EXPECT_EQ(TrainerState(tiny(TrainMode::SupervisedDTSL), 4, 12).groups.size(), 2u);
    EXPECT_EQ(TrainerState(tiny(TrainMode::PlainDTSL), 4, 12).groups.size(), 2u);
    EXPECT_EQ(TrainerState(tiny(TrainMode::SupervisedPlain), 4, 12).groups.size(), 1u);
    EXPECT_EQ(TrainerState(tiny(TrainMode::VanillaMT), 4, 12).groups.size(), 1u);
    const TrainerState st(tiny(TrainMode::SemiDTSL), 4, 12);
    EXPECT_EQ(st.groups[0].student.architecture, ArchitectureKind::PlainConvNet);
    EXPECT_EQ(st.groups[1].student.architecture, ArchitectureKind::ResidualConvNet);
    EXPECT_EQ(flat(st.groups[0].student), flat(st.groups[0].teacher));
}

TEST(BatchSampler, CoversEachEpoch) {
    BatchSampler s(5, 1, 2);
    std::vector<std::size_t> seen;
    for (int i = 0; i < 5; ++i) seen.push_back(s.next(1)[0]);
    std::sort(seen.begin(), seen.end());
    EXPECT_EQ(seen, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
}

TEST(TrainStep, OptimizerOwnsOnlyStudents) {
    TrainerState st(tiny(TrainMode::SemiDTSL), 4, 12);
    for (const auto& g : st.groups) {
        for (const auto& t : g.student.tensors) EXPECT_TRUE(g.optimizer.owns(t.value));
        for (const auto& t : g.teacher.tensors) {
            EXPECT_FALSE(g.optimizer.owns(t.value));
            EXPECT_FALSE(t.value.requires_grad());
        }
    }
}

TEST(TrainStep, SupervisedPlainHasNoPace) {
    const auto& d = tiny_data();
    TrainerState st(tiny(TrainMode::SupervisedPlain), d.labeled.size(), d.unlabeled.size());
    const LossBreakdown b = train_step(st, batch(d.labeled, {0, 1}), nullptr);
    EXPECT_EQ(b.semi, 0.0);
    EXPECT_EQ(b.url, 0.0);
    EXPECT_EQ(b.pace, 0.0);
    EXPECT_EQ(b.total_labeled, b.sup);
    EXPECT_EQ(st.iteration, 1u);
}

TEST(TrainStep, PaceIdentityAndTotals) {
    const auto& d = tiny_data();
    for (auto mode : {TrainMode::SemiDTSL, TrainMode::PlainDTSL, TrainMode::SupervisedDTSL}) {
        TrainConfig c = tiny(mode);
        c.beta = 0.3;
        TrainerState st(c, d.labeled.size(), d.unlabeled.size());
        const Batch u = batch(d.unlabeled, {0, 1});
        for (int i = 0; i < 3; ++i) {
            const LossBreakdown b = train_step(st, batch(d.labeled, {0, 1}), uses_unlabeled(mode) ? &u : nullptr);
            const double pace = c.alpha * (b.semi_group[0] + b.semi_group[1]) + c.beta * (b.url_group[0] + b.url_group[1]);
            EXPECT_NEAR(b.pace, pace, 1e-12);
            EXPECT_NEAR(b.total_labeled + b.total_unlabeled, b.sup + b.pace, 1e-12);
            EXPECT_GT(b.semi, 0.0);
        }
    }
}

TEST(TrainStep, SemiModeNeedsUnlabeledBatch) {
    const auto& d = tiny_data();
    TrainerState st(tiny(TrainMode::SemiDTSL), d.labeled.size(), d.unlabeled.size());
    EXPECT_THROW(train_step(st, batch(d.labeled, {0}), nullptr), std::invalid_argument);
}

TEST(TrainStep, StopsAtMaxIter) {
    const auto& d = tiny_data();
    TrainConfig c = tiny(TrainMode::SupervisedPlain);
    c.max_iter = 1;
    TrainerState st(c, d.labeled.size(), d.unlabeled.size());
    train_step(st, batch(d.labeled, {0}), nullptr);
    EXPECT_THROW(train_step(st, batch(d.labeled, {0}), nullptr), std::logic_error);
}

TEST(TrainStep, ZeroWeightsMatchSupervisedPlain) {
    const auto& d = tiny_data();
    for (auto mode : {TrainMode::SupervisedDTSL, TrainMode::SemiDTSL}) {
        TrainConfig c = tiny(mode);
        c.alpha = 0.0;
        c.beta = 0.0;
        c.max_iter = 10;
        TrainConfig p = tiny(TrainMode::SupervisedPlain);
        p.max_iter = 10;
        TrainerState a(c, d.labeled.size(), d.unlabeled.size()), b(p, d.labeled.size(), d.unlabeled.size());
        for (int i = 0; i < 10; ++i) {
            const auto li = a.labeled_sampler.next(2);
            EXPECT_EQ(li, b.labeled_sampler.next(2));
            const Batch lb = batch(d.labeled, li);
            const Batch ub = batch(d.unlabeled, a.unlabeled_sampler.next(2));
            train_step(a, lb, uses_unlabeled(mode) ? &ub : nullptr);
            train_step(b, lb, nullptr);
        }
        EXPECT_LT(max_abs_diff(flat(a.groups[0].student), flat(b.groups[0].student)), 1e-10);
        EXPECT_LT(max_abs_diff(flat(a.groups[0].teacher), flat(b.groups[0].teacher)), 1e-10);
    }
}

TEST(TrainStep, NoGradientCrossesGroups) {
    // Group 0's gradient after a full step equals the gradient of group 0's
    // own objective rebuilt with group 1 held constant.
    const auto& d = tiny_data();
    TrainConfig c = tiny(TrainMode::SemiDTSL);
    c.beta = 0.5;
    TrainerState st(c, d.labeled.size(), d.unlabeled.size());
    const Batch lb = batch(d.labeled, {0, 1});
    const Batch ub = batch(d.unlabeled, {2, 3});

    ModelParams s0 = st.groups[0].student.clone(true);
    const ModelParams& t0 = st.groups[0].teacher;
    const ModelParams& s1 = st.groups[1].student;
    const ModelParams& t1 = st.groups[1].teacher;
    auto own = [&](const Tensor& x, const LabelMap* gt) {
        const Tensor logits = forward(s0, x);
        const ProbMap p = ProbMap::from_logits(logits);
        const ProbMap other = ProbMap::from_logits(forward(s1, x).detach());
        const ProbMap teacher0 = ProbMap::from_logits(forward(t0, x));
        const ProbMap teacher1 = ProbMap::from_logits(forward(t1, x));
        Tensor pace = add(mul(l_semi(p, clg(other, teacher0, c.kappa)), c.alpha),
                          mul(l_url(p, teacher1, c.kappa, c.num_classes), c.beta));
        return gt ? add(l_sup(logits, *gt), pace) : pace;
    };
    backward(add(own(lb.images, &lb.labels), own(ub.images, nullptr)));

    train_step(st, lb, &ub);
    double worst = 0;
    for (std::size_t i = 0; i < s0.tensors.size(); ++i) {
        const auto g = s0.tensors[i].value.grad(), h = st.groups[0].student.tensors[i].value.grad();
        for (std::size_t j = 0; j < g.size(); ++j)
            worst = std::max(worst, std::abs(g[j] - h[j]) / std::max(1e-8, std::abs(g[j])));
    }
    EXPECT_LT(worst, 1e-9);
}

TEST(TrainStep, KappaZeroStaysFinite) {
    const auto& d = tiny_data();
    TrainConfig c = tiny(TrainMode::SemiDTSL);
    c.kappa = 0.0;
    TrainerState st(c, d.labeled.size(), d.unlabeled.size());
    const Batch u = batch(d.unlabeled, {0, 1});
    for (int i = 0; i < 3; ++i) {
        const LossBreakdown b = train_step(st, batch(d.labeled, {0, 1}), &u);
        EXPECT_TRUE(std::isfinite(b.total_unlabeled));
        EXPECT_EQ(b.cons_fraction, 0.0);
    }
}

TEST(TrainStep, VanillaMtUsesOwnTeacherArgmax) {
    const auto& d = tiny_data();
    TrainerState st(tiny(TrainMode::VanillaMT), d.labeled.size(), d.unlabeled.size());
    const Batch l = batch(d.labeled, {0, 1});
    const Batch u = batch(d.unlabeled, {0, 1});
    const ModelParams& s = st.groups[0].student;
    const ModelParams& t = st.groups[0].teacher;
    auto semi = [&](const Batch& x) {
        return l_semi(ProbMap::from_logits(forward(s, x.images)), argmax(ProbMap::from_logits(forward(t, x.images)))).item();
    };
    const double expect = semi(l) + semi(u);
    const LossBreakdown b = train_step(st, l, &u);
    EXPECT_NEAR(b.semi_group[0], expect, 1e-12);
    EXPECT_EQ(b.semi_group[1], 0.0);
    EXPECT_EQ(b.url, 0.0);
}

TEST(TrainStep, RampupScalesPace) {
    TrainConfig c = tiny(TrainMode::SemiDTSL);
    EXPECT_EQ(pace_rampup(c, 0), 1.0);
    c.rampup_iters = 100;
    EXPECT_NEAR(pace_rampup(c, 0), std::exp(-5.0), 1e-15);
    EXPECT_NEAR(pace_rampup(c, 50), std::exp(-1.25), 1e-15);
    EXPECT_EQ(pace_rampup(c, 100), 1.0);
    EXPECT_EQ(pace_rampup(c, 1000), 1.0);
    for (std::size_t i = 1; i < 100; ++i) EXPECT_GT(pace_rampup(c, i), pace_rampup(c, i - 1));

    const auto& d = tiny_data();
    c.beta = 0.3;
    TrainerState st(c, d.labeled.size(), d.unlabeled.size());
    const Batch u = batch(d.unlabeled, {0, 1});
    const LossBreakdown b = train_step(st, batch(d.labeled, {0, 1}), &u);
    const double w = pace_rampup(c, 0);
    EXPECT_NEAR(b.pace, w * (c.alpha * b.semi + c.beta * b.url), 1e-12);
}

TEST(RunTraining, DeterministicAndWritesArtifacts) {
    const auto& d = tiny_data();
    const TrainConfig c = tiny(TrainMode::SemiDTSL);
    const auto dir1 = test::scratch_dir("run1"), dir2 = test::scratch_dir("run2");
    const TrainingReport r = run_training(c, d, dir1);
    run_training(c, d, dir2);
    for (const char* f : {"losses.csv", "metrics.csv", "probe.csv", "manifest.txt"}) {
        EXPECT_FALSE(test::read_file(dir1 / f).empty()) << f;
        EXPECT_EQ(test::read_file(dir1 / f), test::read_file(dir2 / f)) << f;
    }
    for (const char* f : {"student0", "student1", "teacher0", "teacher1"})
        EXPECT_TRUE(std::filesystem::exists(dir1 / "checkpoints" / (std::string(f) + ".ckpt")));
    EXPECT_TRUE(std::filesystem::exists(dir1 / "snapshots" / "agreement_0003.pgm"));
    EXPECT_TRUE(std::filesystem::exists(dir1 / "snapshots" / "agreement_0006.pgm"));
    EXPECT_EQ(r.losses.size(), 6u);
    EXPECT_EQ(r.probes.size(), 2u);
    ASSERT_EQ(r.metrics.size(), 4u);
    EXPECT_EQ(r.metrics[0].model, "student0");
}

TEST(RunTraining, SupervisedWritesSingleGroup) {
    const auto dir = test::scratch_dir("run_sup");
    const TrainingReport r = run_training(tiny(TrainMode::SupervisedPlain), tiny_data(), dir);
    ASSERT_EQ(r.metrics.size(), 2u);
    EXPECT_EQ(r.metrics[1].model, "teacher0");
    EXPECT_FALSE(std::filesystem::exists(dir / "checkpoints" / "student1.ckpt"));
}

TEST(RunTraining, SemiNeedsUnlabeledPool) {
    DatasetSplit d = tiny_data();
    d.unlabeled.clear();
    EXPECT_THROW(run_training(tiny(TrainMode::SemiDTSL), d), std::invalid_argument);
    EXPECT_NO_THROW(run_training(tiny(TrainMode::SupervisedDTSL), d));
}

TEST(Sweep, SingleValueMatchesRunTraining) {
    TrainConfig c = tiny(TrainMode::SemiDTSL);
    const auto rows = sweep(c, "kappa", {"0.05"}, 1);
    ASSERT_EQ(rows.size(), 1u);
    ASSERT_TRUE(rows[0].ok);
    const TrainingReport direct = run_training(c, build_dataset(c));
    EXPECT_EQ(rows[0].report->headline().foreground.dsc, direct.headline().foreground.dsc);
    EXPECT_EQ(loss_csv_row(rows[0].report->losses.back()), loss_csv_row(direct.losses.back()));
}

TEST(Sweep, FailuresRecordedAndParallelMatchesSerial) {
    TrainConfig c = tiny(TrainMode::SupervisedPlain);
    c.max_iter = 2;
    const auto serial = sweep(c, "kappa", {"0.01", "7", "0.1"}, 1);
    const auto parallel = sweep(c, "kappa", {"0.01", "7", "0.1"}, 3);
    ASSERT_EQ(serial.size(), 3u);
    EXPECT_TRUE(serial[0].ok);
    EXPECT_FALSE(serial[1].ok);
    EXPECT_FALSE(serial[1].error.empty());
    EXPECT_TRUE(serial[2].ok);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(sweep_csv_row(serial[i]), sweep_csv_row(parallel[i]));
    EXPECT_EQ(sweep_csv_row(serial[1]).substr(0, 15), "kappa,7,failed,");
    EXPECT_THROW(sweep(c, "kappa", {}, 1), std::invalid_argument);
    EXPECT_THROW(sweep(c, "nope", {"1"}, 1), std::invalid_argument);
}
