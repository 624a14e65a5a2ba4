// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dtsl/divergence.hpp"
#include "dtsl/ema.hpp"
#include "dtsl/losses.hpp"
#include "dtsl/metrics.hpp"
#include "dtsl/models.hpp"
#include "dtsl/optimizer.hpp"
#include "dtsl/trainer.hpp"
#include "test_support.hpp"

using namespace dtsl;
namespace fs = std::filesystem;
using test::random_labels;
using test::random_probmap;
using test::random_tensor;

namespace {

int failures = 0;

void report(int n, bool ok, const std::string& detail, double secs) {
    std::printf("criterion %d %s %s (%.1f s)\n", n, ok ? "PASS" : "FAIL", detail.c_str(), secs);
    std::fflush(stdout);
    if (!ok) ++failures;
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double secs() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

double js_scalar(const std::vector<double>& p, const std::vector<double>& q) {
    double js = 0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double m = 0.5 * (p[k] + q[k]);
        if (p[k] > 0) js += 0.5 * p[k] * std::log2(p[k] / m);
        if (q[k] > 0) js += 0.5 * q[k] * std::log2(q[k] / m);
    }
    return js;
}

std::vector<double> at_pixel(const ProbMap& p, std::size_t b, std::size_t y, std::size_t x) {
    std::vector<double> v(p.classes());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = p.values().at({b, k, y, x});
    return v;
}

void criterion1() {
    Timer t;
    std::mt19937_64 rng(1);
    double asym = 0, lo = 0, hi = 0, self = 0;
    for (int i = 0; i < 1000; ++i) {
        const ProbMap p = random_probmap(rng, 1, 4, 2, 2, 4.0), q = random_probmap(rng, 1, 4, 2, 2, 4.0);
        const auto a = js_divergence(p, q).values, b = js_divergence(q, p).values, s = js_divergence(p, p).values;
        for (std::size_t j = 0; j < a.size(); ++j) {
            asym = std::max(asym, std::abs(a[j] - b[j]));
            lo = std::min(lo, a[j]);
            hi = std::max(hi, a[j]);
            self = std::max(self, s[j]);
        }
    }
    const ProbMap e0(Tensor({1, 2, 1, 1}, {1.0, 0.0})), e1(Tensor({1, 2, 1, 1}, {0.0, 1.0}));
    const double disjoint = js_divergence(e0, e1).values[0];
    const bool ok = asym < 1e-12 && lo >= 0 && hi <= 1 + 1e-12 && self < 1e-12 && disjoint == 1.0;
    const double secs = t.secs();
    report(1, ok && secs < 5, fmt("asym=%.3g self=%.3g max=%.17g", asym, self, hi), secs);
}

void criterion2() {
    Timer t;
    std::mt19937_64 rng(2);
    std::size_t mismatches = 0;
    for (int i = 0; i < 100; ++i) {
        const ProbMap a = random_probmap(rng, 2, 3, 8, 8, 2.0), b = random_probmap(rng, 2, 3, 8, 8, 2.0);
        for (double kappa : {0.0, 0.01, 0.05, 0.1, 1.0}) {
            const LabelMap got = clg(a, b, kappa);
            for (std::size_t n = 0; n < 2; ++n)
                for (std::size_t y = 0; y < 8; ++y)
                    for (std::size_t x = 0; x < 8; ++x) {
                        const auto p = at_pixel(a, n, y, x), q = at_pixel(b, n, y, x);
                        std::int32_t want = 0;
                        if (js_scalar(p, q) < kappa) {
                            std::size_t best = 0;
                            for (std::size_t k = 1; k < 3; ++k)
                                if (p[k] + q[k] > p[best] + q[best]) best = k;
                            want = std::int32_t(best);
                        }
                        if (got.at(n, y, x) != want) ++mismatches;
                    }
        }
    }
    const double secs = t.secs();
    report(2, mismatches == 0 && secs < 10, fmt("mismatched pixels=%.0f", double(mismatches)), secs);
}

void criterion3() {
    Timer t;
    std::mt19937_64 rng(3);
    const std::vector<double> kappas = {0.0, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0};
    std::size_t bad = 0;
    for (int i = 0; i < 100; ++i) {
        const auto js = js_divergence(random_probmap(rng, 2, 4, 8, 8), random_probmap(rng, 2, 4, 8, 8));
        std::vector<ConsistencyMask> masks;
        for (double k : kappas) masks.push_back(make_masks(js, k));
        for (std::size_t m = 0; m < masks.size(); ++m)
            for (std::size_t j = 0; j < js.values.size(); ++j) {
                if ((masks[m].cons[j] != 0) == (masks[m].diff[j] != 0)) ++bad;
                if (m > 0 && masks[m - 1].cons[j] && !masks[m].cons[j]) ++bad;
            }
    }
    report(3, bad == 0, fmt("violations=%.0f", double(bad)), t.secs());
}

double safe_kappa(const ProbMap& a, const ProbMap& b, double wanted) {
    const auto js = js_divergence(a, b).values;
    for (double k = wanted;; k += 0.003) {
        bool ok = true;
        for (double v : js) ok = ok && std::abs(v - k) > 1e-4;
        if (ok) return k;
    }
}

void criterion4() {
    Timer t;
    std::mt19937_64 rng(4);
    double worst = 0;
    Tensor logits = random_tensor(rng, {2, 4, 4, 4}, -2, 2, true);
    const LabelMap l = random_labels(rng, 2, 4, 4, 4);
    const ProbMap other = random_probmap(rng, 2, 4, 4, 4);
    const ProbMap own = ProbMap::from_logits(logits.detach());
    const LabelMap pseudo = clg(own, other, 0.3);
    const double kappa = safe_kappa(own, other, 0.1);
    using Leaves = std::vector<Tensor>;
    worst = std::max(worst, test::grad_check({logits}, [&](const Leaves& v) { return cross_entropy(v[0], l); }).max_rel_error);
    worst = std::max(worst, test::grad_check({logits}, [&](const Leaves& v) { return dice_loss(ProbMap::from_logits(v[0]), l); }).max_rel_error);
    worst = std::max(worst, test::grad_check({logits}, [&](const Leaves& v) { return l_semi(ProbMap::from_logits(v[0]), pseudo); }).max_rel_error);
    worst = std::max(worst, test::grad_check({logits}, [&](const Leaves& v) { return l_url(ProbMap::from_logits(v[0]), other, kappa, 4); }).max_rel_error);

    // full labeled objective through the plain network
    ModelParams s0 = init_params(ArchitectureKind::PlainConvNet, 3, 4, 1);
    const ModelParams s1 = init_params(ArchitectureKind::ResidualConvNet, 3, 4, 2);
    const ModelParams t1 = init_params(ArchitectureKind::ResidualConvNet, 3, 4, 3);
    for (auto& p : s0.tensors)
        if (p.value.dim() == 1)
            for (double& v : p.value.mutable_data()) v = std::uniform_real_distribution<double>(-0.1, 0.1)(rng);
    const Tensor x = random_tensor(rng, {1, 1, 8, 8}, 0, 1);
    const LabelMap gt = random_labels(rng, 1, 8, 8, 3);
    const ProbMap own_p = ProbMap::from_logits(forward(s0, x).detach());
    const ProbMap teacher1 = ProbMap::from_logits(forward(t1, x).detach());
    const LabelMap pl = clg(ProbMap::from_logits(forward(s1, x).detach()), own_p, 0.05);
    const double k2 = safe_kappa(own_p, teacher1, 0.05);
    Leaves leaves;
    for (const auto& p : s0.tensors) leaves.push_back(p.value);
    const auto net = test::grad_check(leaves, [&](const Leaves&) {
        Tensor lg = forward(s0, x);
        ProbMap p = ProbMap::from_logits(lg);
        return add(l_sup(lg, gt), add(mul(l_semi(p, pl), 1.0), mul(l_url(p, teacher1, k2, 3), 0.05)));
    });
    worst = std::max(worst, net.max_rel_error);
    const double secs = t.secs();
    report(4, worst < 1e-4 && secs < 120, fmt("max rel error=%.3g over %.0f network params", worst, double(net.checked)),
           secs);
}

void criterion5() {
    Timer t;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> lam(0, 2), coin(0, 1);
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
        const ProbMap p = random_probmap(rng, 2, 4, 6, 6);
        const LabelMap y = random_labels(rng, 2, 6, 6, 4);
        LabelMap th = random_labels(rng, 2, 6, 6, 4);
        for (std::size_t j = 0; j < th.labels.size(); ++j)
            if (coin(rng) < 0.5) th.labels[j] = y.labels[j];
        const auto s = mt_decomposition_check(p, y, th, lam(rng), pixel_cross_entropy);
        worst = std::max(worst, std::abs(s.lhs - s.rhs));
    }
    report(5, worst < 1e-12, fmt("max |lhs-rhs|=%.3g", worst), t.secs());
}

std::vector<double> flat(const ModelParams& p) {
    std::vector<double> v;
    for (const auto& x : p.tensors) v.insert(v.end(), x.value.data().begin(), x.value.data().end());
    return v;
}

void criterion6() {
    Timer t;
    const ModelParams s = init_params(ArchitectureKind::ResidualConvNet, 4, 4, 7);
    const ModelParams t0 = make_teacher(init_params(ArchitectureKind::ResidualConvNet, 4, 4, 8));
    double worst = 0;
    for (double omega : {0.90, 0.95, 0.99}) {
        ModelParams tt = t0.clone(false);
        for (int i = 0; i < 50; ++i) ema_update(tt, s, omega);
        const double w = std::pow(omega, 50);
        const auto got = flat(tt), a = flat(t0), b = flat(s);
        for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - (w * a[i] + (1 - w) * b[i])));
    }
    report(6, worst < 1e-10, fmt("max deviation=%.3g", worst), t.secs());
}

BinaryMask random_blobs(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0, 1);
    BinaryMask m(n, n);
    const int discs = 1 + int(u(rng) * 3);
    for (int d = 0; d < discs; ++d) {
        const double cy = u(rng) * n, cx = u(rng) * n, r = 1 + u(rng) * n / 4;
        for (std::size_t y = 0; y < n; ++y)
            for (std::size_t x = 0; x < n; ++x)
                if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r) m.set(y, x);
    }
    for (int i = 0; i < 4; ++i)
        if (u(rng) < 0.5) m.set(std::size_t(u(rng) * n), std::size_t(u(rng) * n));
    return m;
}

std::vector<std::pair<double, double>> edge_pixels(const BinaryMask& m) {
    std::vector<std::pair<double, double>> out;
    for (std::size_t y = 0; y < m.height; ++y)
        for (std::size_t x = 0; x < m.width; ++x) {
            if (!m.get(y, x)) continue;
            const bool edge = y == 0 || x == 0 || y + 1 == m.height || x + 1 == m.width;
            if (edge || !m.get(y - 1, x) || !m.get(y + 1, x) || !m.get(y, x - 1) || !m.get(y, x + 1)) out.push_back({y, x});
        }
    return out;
}

std::vector<double> pooled(const BinaryMask& a, const BinaryMask& b) {
    const auto pa = edge_pixels(a), pb = edge_pixels(b);
    std::vector<double> d;
    for (const auto* from : {&pa, &pb}) {
        const auto& to = from == &pa ? pb : pa;
        for (const auto& p : *from) {
            double best = 1e300;
            for (const auto& q : to) best = std::min(best, std::hypot(p.first - q.first, p.second - q.second));
            d.push_back(best);
        }
    }
    return d;
}

void criterion7() {
    Timer t;
    std::mt19937_64 rng(7);
    double worst_dist = 0, worst_identity = 0;
    std::size_t overlap_bad = 0;
    for (int i = 0; i < 200; ++i) {
        const BinaryMask a = random_blobs(rng, 32), b = random_blobs(rng, 32);
        std::size_t inter = 0, na = 0, nb = 0;
        for (std::size_t j = 0; j < a.bits.size(); ++j) {
            inter += a.bits[j] && b.bits[j];
            na += a.bits[j];
            nb += b.bits[j];
        }
        const double d = dsc(a, b), jac = jaccard(a, b);
        if (d != 100.0 * 2.0 * double(inter) / double(na + nb)) ++overlap_bad;
        if (jac != 100.0 * double(inter) / double(na + nb - inter)) ++overlap_bad;
        const double df = d / 100, jf = jac / 100;
        worst_identity = std::max(worst_identity, std::abs(jf - df / (2 - df)));
        auto dist = pooled(a, b);
        std::sort(dist.begin(), dist.end());
        const double h = dist[std::size_t(std::ceil(0.95 * double(dist.size()))) - 1];
        double mean = 0;
        for (double v : dist) mean += v;
        mean /= double(dist.size());
        worst_dist = std::max({worst_dist, std::abs(*hd95(a, b) - h), std::abs(*asd(a, b) - mean)});
    }
    const bool ok = overlap_bad == 0 && worst_dist < 1e-9 && worst_identity < 1e-12;
    report(7, ok,
           fmt("overlap mismatches=%.0f distance err=%.3g J-D identity err=%.3g", double(overlap_bad), worst_dist,
               worst_identity),
           t.secs());
}

void criterion8() {
    Timer t;
    const double eta0 = 1e-3;
    const std::size_t max = 2000;
    const bool ok = lr_schedule(eta0, 0, max) == eta0 && lr_schedule(eta0, max, max) == 0.0 &&
                    std::abs(lr_schedule(eta0, max / 2, max) - eta0 * std::pow(0.5, 0.9)) < 1e-12;
    report(8, ok, fmt("eta(max/2)=%.17g", lr_schedule(eta0, max / 2, max)), t.secs());
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct Runs {
    std::vector<double> dsc;
    std::vector<double> cons_early;
    std::vector<double> cons_late;
    double secs = 0;
};

struct Harness {
    fs::path work;
    TrainConfig base;
    std::vector<std::uint64_t> seeds;
    std::map<std::string, Runs> cache;

    const Runs& get(const std::string& name, TrainConfig cfg) {
        if (auto it = cache.find(name); it != cache.end()) return it->second;
        static const DatasetSplit data = build_dataset(base);
        Runs r;
        for (auto seed : seeds) {
            cfg.seed = seed;
            Timer t;
            const TrainingReport rep = run_training(cfg, data, work / name / ("seed_" + std::to_string(seed)));
            r.secs += t.secs();
            r.dsc.push_back(rep.headline().foreground.dsc);
            for (const auto& p : rep.probes) {
                if (p.iteration == 200) r.cons_early.push_back(p.cons_fraction);
                if (p.iteration == cfg.max_iter) r.cons_late.push_back(p.cons_fraction);
            }
            std::printf("  %s seed %llu: dsc=%.2f (%.0f s)\n", name.c_str(), static_cast<unsigned long long>(seed),
                        rep.headline().foreground.dsc, t.secs());
            std::fflush(stdout);
        }
        return cache.emplace(name, std::move(r)).first->second;
    }

    TrainConfig with_mode(TrainMode m) const {
        TrainConfig c = base;
        c.mode = m;
        return c;
    }
};

void criterion9(Harness& h) {
    const Runs& r = h.get("semi", h.with_mode(TrainMode::SemiDTSL));
    const bool have = r.cons_early.size() == h.seeds.size() && r.cons_late.size() == h.seeds.size();
    const double a = have ? median(r.cons_early) : 0, b = have ? median(r.cons_late) : 0;
    report(9, have && b > a && r.secs < 15 * 60,
           fmt("median consistent fraction iter 200=%.4f iter %.0f=%.4f", a, double(h.base.max_iter), b), r.secs);
}

void criterion10(Harness& h) {
    const Runs& plain = h.get("supervised", h.with_mode(TrainMode::SupervisedPlain));
    const Runs& sup = h.get("supervised-dtsl", h.with_mode(TrainMode::SupervisedDTSL));
    const Runs& semi = h.get("semi", h.with_mode(TrainMode::SemiDTSL));
    const double p = median(plain.dsc), s = median(sup.dsc), u = median(semi.dsc);
    const bool ok = p < s && s <= u && s - p >= 1.0;
    report(10, ok && plain.secs + sup.secs + semi.secs < 30 * 60,
           fmt("median dsc supervised=%.2f supervised-dtsl=%.2f semi=%.2f", p, s, u), plain.secs + sup.secs + semi.secs);
}

void criterion11(Harness& h) {
    TrainConfig plain_cfg = h.with_mode(TrainMode::PlainDTSL);
    plain_cfg.beta = 0.0;  // no URL in the plain row
    const Runs& plain = h.get("plain-dtsl", plain_cfg);
    const Runs& full = h.get("semi", h.with_mode(TrainMode::SemiDTSL));
    const double a = median(full.dsc), b = median(plain.dsc);
    report(11, a >= b, fmt("median dsc clg+url=%.2f plain-dtsl=%.2f", a, b), plain.secs + full.secs);
}

void criterion12(Harness& h) {
    Timer t;
    TrainConfig cfg = h.with_mode(TrainMode::SemiDTSL);
    cfg.max_iter = 60;
    cfg.snapshot_every = 20;
    const DatasetSplit data = build_dataset(cfg);
    const fs::path a = h.work / "determinism_a", b = h.work / "determinism_b";
    run_training(cfg, data, a);
    run_training(cfg, data, b);
    bool same = true;
    for (const char* f : {"losses.csv", "metrics.csv"}) {
        const std::string x = test::read_file(a / f), y = test::read_file(b / f);
        same = same && !x.empty() && x == y;
    }
    report(12, same, same ? "losses.csv and metrics.csv identical" : "outputs differ", t.secs());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dtsl acceptance checks"};
    std::string work = (fs::temp_directory_path() / "dtsl_acceptance").string();
    std::size_t max_iter = 2000, seeds = 3, base_channels = 4;
    app.add_option("--work-dir", work, "directory for training runs");
    app.add_option("--max-iter", max_iter, "iterations per training run");
    app.add_option("--seeds", seeds, "seeds per configuration");
    app.add_option("--base-channels", base_channels, "network width for training runs");
    bool fast = false;
    app.add_flag("--fast", fast, "criteria 1-8 only, no training runs");
    CLI11_PARSE(app, argc, argv);

    Harness h;
    h.work = work;
    fs::remove_all(h.work);
    fs::create_directories(h.work);
    h.base.max_iter = max_iter;
    h.base.base_channels = base_channels;
    for (std::size_t s = 1; s <= seeds; ++s) h.seeds.push_back(s);

    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    criterion6();
    criterion7();
    criterion8();
    if (fast) {
        std::printf("%d of 8 criteria failed\n", failures);
        return failures == 0 ? 0 : 1;
    }
    criterion9(h);
    criterion10(h);
    criterion11(h);
    criterion12(h);
    std::printf("%d of 12 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
