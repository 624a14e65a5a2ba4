#include "dtsl/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "dtsl/checkpoint.hpp"
#include "dtsl/csv.hpp"
#include "dtsl/divergence.hpp"
#include "dtsl/ema.hpp"
#include "dtsl/ops.hpp"
#include "dtsl/pgm.hpp"

namespace dtsl {

TeacherStudentGroup::TeacherStudentGroup(ModelParams s)
    : student(std::move(s)), teacher(make_teacher(student)), optimizer(student) {}

BatchSampler::BatchSampler(std::size_t n, std::uint64_t seed, std::uint64_t stream) : n_(n), rng_(seed, stream) {}

std::vector<std::size_t> BatchSampler::next(std::size_t count) {
    if (n_ == 0) throw std::logic_error("BatchSampler: empty pool");
    std::vector<std::size_t> out;
    out.reserve(count);
    while (out.size() < count) {
        if (cursor_ == order_.size()) {
            order_.resize(n_);
            for (std::size_t i = 0; i < n_; ++i) order_[i] = i;
            for (std::size_t i = n_; i > 1; --i) std::swap(order_[i - 1], order_[rng_.below(i)]);
            cursor_ = 0;
        }
        out.push_back(order_[cursor_++]);
    }
    return out;
}

double pace_rampup(const TrainConfig& cfg, std::size_t iteration) {
    if (cfg.rampup_iters == 0 || iteration >= cfg.rampup_iters) return 1.0;
    const double t = 1.0 - static_cast<double>(iteration) / static_cast<double>(cfg.rampup_iters);
    return std::exp(-5.0 * t * t);
}

bool uses_unlabeled(TrainMode m) {
    return m == TrainMode::SemiDTSL || m == TrainMode::PlainDTSL || m == TrainMode::VanillaMT;
}

std::size_t group_count(TrainMode m) {
    return (m == TrainMode::SupervisedPlain || m == TrainMode::VanillaMT) ? 1 : 2;
}

namespace {

constexpr std::uint64_t kInitStream[2] = {101, 102};
constexpr std::uint64_t kLabeledStream = 201;
constexpr std::uint64_t kUnlabeledStream = 202;

std::uint64_t init_seed(std::uint64_t seed, std::size_t group) { return Rng(seed, kInitStream[group]).raw(); }

}  // namespace

TrainerState::TrainerState(const TrainConfig& c, std::size_t labeled_count, std::size_t unlabeled_count)
    : cfg(c),
      labeled_sampler(labeled_count, c.seed, kLabeledStream),
      unlabeled_sampler(unlabeled_count, c.seed, kUnlabeledStream) {
    cfg.validate();
    const ArchitectureKind kinds[2] = {ArchitectureKind::PlainConvNet, ArchitectureKind::ResidualConvNet};
    for (std::size_t g = 0; g < group_count(cfg.mode); ++g) {
        groups.emplace_back(init_params(kinds[g], cfg.num_classes, cfg.base_channels, init_seed(cfg.seed, g)));
    }
}

namespace {

struct PartResult {
    Tensor objective;
    double sup = 0.0;
    double semi = 0.0;
    double url = 0.0;
    double pace = 0.0;
    double sup_group[2] = {0.0, 0.0};
    double semi_group[2] = {0.0, 0.0};
    double url_group[2] = {0.0, 0.0};
    double cons_fraction = 0.0;
    std::vector<DivergenceField> fields;  // kept for diagnostics
};

ProbMap teacher_probs(const ModelParams& teacher, const Tensor& images) {
    return ProbMap::from_logits(forward(teacher, images));
}

// Loss for one batch. With labels, L_sup is included (the L^l objective);
// without, only the pace regulator (L^u).
PartResult compute_part(const TrainerState& st, const Tensor& images, const LabelMap* labels) {
    const TrainConfig& cfg = st.cfg;
    const double ramp = pace_rampup(cfg, st.iteration);
    const double alpha = cfg.alpha * ramp, beta = cfg.beta * ramp;
    const std::size_t n = st.groups.size();
    PartResult r;
    std::vector<Tensor> logits;
    std::vector<ProbMap> probs;
    for (std::size_t i = 0; i < n; ++i) {
        logits.push_back(forward(st.groups[i].student, images));
        probs.push_back(ProbMap::from_logits(logits[i]));
    }
    Tensor sup_total = Tensor::scalar(0.0);
    if (labels) {
        for (std::size_t i = 0; i < n; ++i) {
            const Tensor s = l_sup(logits[i], *labels);
            r.sup_group[i] = s.item();
            r.sup += r.sup_group[i];
            sup_total = i == 0 ? s : add(sup_total, s);
        }
    }
    if (cfg.mode == TrainMode::SupervisedPlain) {
        r.objective = sup_total;
        r.cons_fraction = make_masks(js_divergence(probs[0].detached(), teacher_probs(st.groups[0].teacher, images)),
                                     cfg.kappa)
                              .cons_fraction();
        return r;
    }

    std::vector<ProbMap> teachers;
    std::vector<ProbMap> detached;
    for (std::size_t i = 0; i < n; ++i) {
        teachers.push_back(teacher_probs(st.groups[i].teacher, images));
        detached.push_back(probs[i].detached());
    }

    Tensor pace;
    if (cfg.mode == TrainMode::VanillaMT) {
        const Tensor semi = l_semi(probs[0], argmax(teachers[0]));
        r.semi_group[0] = semi.item();
        pace = mul(semi, alpha);
        r.fields.push_back(js_divergence(detached[0], teachers[0]));
        r.cons_fraction = make_masks(r.fields.back(), cfg.kappa).cons_fraction();
    } else {
        const GroupOutputs outputs{detached[0], detached[1], teachers[0], teachers[1]};
        Tensor semi[2], url[2];
        for (int i = 0; i < 2; ++i) {
            const int other = 1 - i;
            const LabelMap pseudo = cfg.mode == TrainMode::PlainDTSL
                                        ? argmax_of_mean(detached[other], teachers[i])
                                        : clg_strategy(cfg.strategy, outputs, i, cfg.kappa);
            semi[i] = l_semi(probs[i], pseudo);
            url[i] = l_url(probs[i], teachers[other], cfg.kappa, cfg.num_classes);
            r.semi_group[i] = semi[i].item();
            r.url_group[i] = url[i].item();
        }
        pace = l_pace(semi[0], semi[1], url[0], url[1], alpha, beta);
        r.fields.push_back(js_divergence(detached[1], teachers[0]));
        r.fields.push_back(js_divergence(detached[0], teachers[1]));
        r.cons_fraction = make_masks(r.fields[0], cfg.kappa).cons_fraction();
    }
    r.semi = r.semi_group[0] + r.semi_group[1];
    r.url = r.url_group[0] + r.url_group[1];
    r.pace = pace.item();
    r.objective = labels ? add(sup_total, pace) : pace;
    return r;
}

std::string summarize(const char* name, const DivergenceField& f) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, total = 0.0;
    std::size_t nan = 0;
    for (double v : f.values) {
        if (std::isnan(v)) {
            ++nan;
            continue;
        }
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        total += v;
    }
    std::ostringstream s;
    s << name << ": min=" << lo << " max=" << hi << " mean=" << total / static_cast<double>(f.values.size())
      << " nan=" << nan << "\n";
    return s.str();
}

std::string diagnostics(std::size_t iteration, const PartResult& l, const PartResult* u) {
    std::ostringstream s;
    s << "iteration=" << iteration << "\n";
    auto part = [&](const char* tag, const PartResult& p) {
        s << tag << " sup=" << p.sup_group[0] << "," << p.sup_group[1] << " semi=" << p.semi_group[0] << ","
          << p.semi_group[1] << " url=" << p.url_group[0] << "," << p.url_group[1] << "\n";
        const char* names[2] = {"js(student1,teacher0)", "js(student0,teacher1)"};
        for (std::size_t i = 0; i < p.fields.size(); ++i) s << tag << " " << summarize(names[i], p.fields[i]);
    };
    part("labeled", l);
    if (u) part("unlabeled", *u);
    return s.str();
}

}  // namespace

LossBreakdown train_step(TrainerState& st, const Batch& labeled, const Batch* unlabeled) {
    const TrainConfig& cfg = st.cfg;
    if (st.iteration >= cfg.max_iter) throw std::logic_error("train_step: max_iter reached");
    if (uses_unlabeled(cfg.mode) && !unlabeled) throw std::invalid_argument("train_step: mode needs an unlabeled batch");
    for (auto& g : st.groups) g.student.zero_grad();

    const PartResult l = compute_part(st, labeled.images, &labeled.labels);
    std::optional<PartResult> u;
    if (uses_unlabeled(cfg.mode)) u = compute_part(st, unlabeled->images, nullptr);

    const Tensor objective = u ? add(l.objective, u->objective) : l.objective;
    LossBreakdown b;
    b.iteration = st.iteration + 1;
    b.sup = l.sup;
    b.total_labeled = l.objective.item();
    b.total_unlabeled = u ? u->objective.item() : 0.0;
    b.cons_fraction = u ? u->cons_fraction : l.cons_fraction;
    for (int i = 0; i < 2; ++i) {
        b.sup_group[i] = l.sup_group[i];
        b.semi_group[i] = l.semi_group[i] + (u ? u->semi_group[i] : 0.0);
        b.url_group[i] = l.url_group[i] + (u ? u->url_group[i] : 0.0);
    }
    b.semi = b.semi_group[0] + b.semi_group[1];
    b.url = b.url_group[0] + b.url_group[1];
    b.pace = l.pace + (u ? u->pace : 0.0);

    if (!std::isfinite(objective.item())) {
        throw TrainingDiverged("non-finite loss at iteration " + std::to_string(b.iteration),
                               diagnostics(b.iteration, l, u ? &*u : nullptr));
    }
    backward(objective);
    const double lr = lr_schedule(cfg.eta0, st.iteration, cfg.max_iter);
    for (auto& g : st.groups) g.optimizer.step(lr);
    for (auto& g : st.groups) ema_update(g.teacher, g.student, cfg.omega);
    ++st.iteration;
    return b;
}

ProbeRecord probe(const TrainerState& st, const Batch& batch, LabelMap* teacher_labels) {
    ProbeRecord r;
    r.iteration = st.iteration;
    const ProbMap t0 = teacher_probs(st.groups[0].teacher, batch.images);
    const ModelParams& other = st.groups.size() > 1 ? st.groups[1].student : st.groups[0].student;
    const ProbMap s = ProbMap::from_logits(forward(other, batch.images));
    r.cons_fraction = make_masks(js_divergence(s, t0), st.cfg.kappa).cons_fraction();
    const LabelMap pred = argmax(t0);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < pred.labels.size(); ++i) agree += pred.labels[i] == batch.labels.labels[i];
    r.teacher_agreement = static_cast<double>(agree) / static_cast<double>(pred.labels.size());
    if (teacher_labels) *teacher_labels = pred;
    return r;
}

LabelMap predict(const ModelParams& params, const std::vector<SyntheticSample>& samples) {
    constexpr std::size_t kChunk = 10;
    if (samples.empty()) throw std::invalid_argument("predict: no samples");
    const LabelMap& first = samples[0].label;
    LabelMap out(samples.size(), first.height, first.width);
    const std::size_t plane = first.pixels_per_sample();
    for (std::size_t start = 0; start < samples.size(); start += kChunk) {
        std::vector<std::size_t> idx;
        for (std::size_t i = start; i < std::min(samples.size(), start + kChunk); ++i) idx.push_back(i);
        const LabelMap part = argmax(ProbMap::from_logits(forward(params, stack_images(samples, idx))));
        std::copy(part.labels.begin(), part.labels.end(), out.labels.begin() + static_cast<std::ptrdiff_t>(start * plane));
    }
    return out;
}

MetricReport evaluate_model(const ModelParams& params, const std::vector<SyntheticSample>& samples,
                            std::size_t num_classes) {
    std::vector<std::size_t> all(samples.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return evaluate_segmentation(predict(params, samples), stack_labels(samples, all), num_classes);
}

DatasetSplit build_dataset(const TrainConfig& cfg) {
    cfg.validate();
    SyntheticOptions o;
    o.seed = cfg.data_seed;
    o.count = cfg.train_count + cfg.test_count;
    o.height = o.width = cfg.image_size;
    o.num_classes = cfg.num_classes;
    o.noise_sigma = cfg.noise_sigma;
    const double test_fraction = static_cast<double>(cfg.test_count) / static_cast<double>(o.count);
    return split(generate(o), cfg.labeled_fraction, test_fraction, cfg.data_seed);
}

std::string probe_csv_header() { return "iter,cons_fraction,teacher_agreement"; }

std::string probe_csv_row(const ProbeRecord& r) {
    return csv::join({std::to_string(r.iteration), csv::fmt(r.cons_fraction), csv::fmt(r.teacher_agreement)});
}

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream f(p);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    return f;
}

GrayImage agreement_image(const LabelMap& pred, const LabelMap& gt) {
    std::vector<GrayImage> tiles;
    const std::size_t plane = gt.pixels_per_sample();
    for (std::size_t b = 0; b < gt.batch; ++b) {
        GrayImage g{gt.height, gt.width, std::vector<std::uint8_t>(plane)};
        for (std::size_t i = 0; i < plane; ++i) g.pixels[i] = pred.labels[b * plane + i] == gt.labels[b * plane + i] ? 255 : 0;
        tiles.push_back(std::move(g));
    }
    return tile_horizontal(tiles);
}

}  // namespace

TrainingReport run_training(const TrainConfig& cfg, const DatasetSplit& data,
                            const std::optional<std::filesystem::path>& out_dir) {
    cfg.validate();
    if (data.labeled.empty() || data.test.size() < cfg.probe_size) {
        throw std::invalid_argument("run_training: split lacks labeled or probe samples");
    }
    if (uses_unlabeled(cfg.mode) && data.unlabeled.empty()) {
        throw std::invalid_argument("run_training: mode " + std::string(to_string(cfg.mode)) + " needs unlabeled data");
    }
    std::ofstream losses_csv, probe_csv;
    if (out_dir) {
        std::filesystem::create_directories(*out_dir / "snapshots");
        std::filesystem::create_directories(*out_dir / "checkpoints");
        open_out(*out_dir / "manifest.txt") << manifest_text(cfg);
        losses_csv = open_out(*out_dir / "losses.csv");
        losses_csv << loss_csv_header() << "\n";
        probe_csv = open_out(*out_dir / "probe.csv");
        probe_csv << probe_csv_header() << "\n";
    }

    TrainerState st(cfg, data.labeled.size(), data.unlabeled.size());
    std::vector<std::size_t> probe_idx(cfg.probe_size);
    for (std::size_t i = 0; i < probe_idx.size(); ++i) probe_idx[i] = i;
    const Batch probe_batch{stack_images(data.test, probe_idx), stack_labels(data.test, probe_idx)};

    TrainingReport report;
    try {
        while (st.iteration < cfg.max_iter) {
            const auto li = st.labeled_sampler.next(cfg.labeled_batch);
            const Batch lb{stack_images(data.labeled, li), stack_labels(data.labeled, li)};
            LossBreakdown b;
            if (uses_unlabeled(cfg.mode)) {
                const auto ui = st.unlabeled_sampler.next(cfg.unlabeled_batch);
                const Batch ub{stack_images(data.unlabeled, ui), LabelMap()};
                b = train_step(st, lb, &ub);
            } else {
                b = train_step(st, lb, nullptr);
            }
            report.losses.push_back(b);
            if (out_dir) losses_csv << loss_csv_row(b) << "\n";
            if (st.iteration % cfg.snapshot_every == 0) {
                LabelMap pred;
                const ProbeRecord r = probe(st, probe_batch, &pred);
                report.probes.push_back(r);
                if (out_dir) {
                    probe_csv << probe_csv_row(r) << "\n";
                    char name[64];
                    std::snprintf(name, sizeof name, "agreement_%04zu.pgm", st.iteration);
                    write_pgm(*out_dir / "snapshots" / name, agreement_image(pred, probe_batch.labels));
                }
            }
        }
    } catch (const TrainingDiverged& e) {
        if (out_dir) open_out(*out_dir / "diagnostics.txt") << e.what() << "\n" << e.diagnostics();
        throw;
    }

    const char* names[2][2] = {{"student0", "teacher0"}, {"student1", "teacher1"}};
    std::vector<NamedReport> students, teachers;
    for (std::size_t g = 0; g < st.groups.size(); ++g) {
        students.push_back({names[g][0], evaluate_model(st.groups[g].student, data.test, cfg.num_classes)});
        teachers.push_back({names[g][1], evaluate_model(st.groups[g].teacher, data.test, cfg.num_classes)});
        if (out_dir) {
            save_checkpoint(*out_dir / "checkpoints" / (std::string(names[g][0]) + ".ckpt"), st.groups[g].student);
            save_checkpoint(*out_dir / "checkpoints" / (std::string(names[g][1]) + ".ckpt"), st.groups[g].teacher);
        }
    }
    report.metrics = students;
    report.metrics.insert(report.metrics.end(), teachers.begin(), teachers.end());
    if (out_dir) {
        std::ofstream m = open_out(*out_dir / "metrics.csv");
        m << metrics_csv_header() << "\n";
        for (const auto& nr : report.metrics)
            for (const auto& row : metrics_csv_rows(nr.model, nr.report)) m << row << "\n";
    }
    return report;
}

std::vector<SweepRow> sweep(const TrainConfig& base, const std::string& param, const std::vector<std::string>& values,
                            std::size_t jobs, const std::optional<std::filesystem::path>& out_dir) {
    if (values.empty()) throw std::invalid_argument("sweep: empty value grid");
    if (!is_config_key(param)) throw std::invalid_argument("sweep: unknown parameter '" + param + "'");
    std::vector<SweepRow> rows(values.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < values.size(); i = next++) {
            SweepRow& row = rows[i];
            row.param = param;
            row.value = values[i];
            try {
                TrainConfig cfg = base;
                cfg.set(param, values[i]);
                cfg.validate();
                std::optional<std::filesystem::path> dir;
                if (out_dir) dir = *out_dir / (param + "_" + values[i]);
                row.report = run_training(cfg, build_dataset(cfg), dir);
                row.ok = true;
            } catch (const std::exception& e) {
                row.error = e.what();
            }
        }
    };
    const std::size_t n = std::max<std::size_t>(1, std::min(jobs, values.size()));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return rows;
}

std::string sweep_csv_header() {
    return "param,value,status,dsc,jaccard,hd95,asd,student1_dsc,teacher0_dsc,teacher1_dsc,error";
}

std::string sweep_csv_row(const SweepRow& r) {
    if (!r.ok || !r.report) {
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        return csv::join({r.param, r.value, "failed", "", "", "", "", "", "", "", err});
    }
    auto opt = [](const std::optional<double>& v) { return v ? csv::fmt(*v) : std::string("undefined"); };
    auto dsc_of = [&](const std::string& name) {
        for (const auto& m : r.report->metrics)
            if (m.model == name) return csv::fmt(m.report.foreground.dsc);
        return std::string();
    };
    const ClassMetrics& h = r.report->headline().foreground;
    return csv::join({r.param, r.value, "ok", csv::fmt(h.dsc), csv::fmt(h.jaccard), opt(h.hd95), opt(h.asd),
                      dsc_of("student1"), dsc_of("teacher0"), dsc_of("teacher1"), ""});
}

}  // namespace dtsl
