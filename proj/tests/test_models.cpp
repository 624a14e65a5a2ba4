#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "dtsl/checkpoint.hpp"
#include "dtsl/models.hpp"
#include "dtsl/ops.hpp"
#include "test_support.hpp"

using namespace dtsl;

namespace {

bool same_values(const ModelParams& a, const ModelParams& b) {
    if (!a.compatible_with(b)) return false;
    for (std::size_t i = 0; i < a.tensors.size(); ++i) {
        const auto x = a.tensors[i].value.data(), y = b.tensors[i].value.data();
        if (!std::equal(x.begin(), x.end(), y.begin(), y.end())) return false;
    }
    return true;
}

}  // namespace

TEST(InitParams, DeterministicPerSeed) {
    for (auto kind : {ArchitectureKind::PlainConvNet, ArchitectureKind::ResidualConvNet}) {
        EXPECT_TRUE(same_values(init_params(kind, 4, 8, 3), init_params(kind, 4, 8, 3)));
        EXPECT_FALSE(same_values(init_params(kind, 4, 8, 3), init_params(kind, 4, 8, 4)));
    }
}

TEST(InitParams, KernelsInsideFanInBound) {
    const ModelParams p = init_params(ArchitectureKind::ResidualConvNet, 3, 4, 9);
    for (const auto& t : p.tensors) {
        EXPECT_TRUE(t.value.requires_grad());
        const auto& s = t.value.shape();
        if (s.size() == 1) {
            for (double v : t.value.data()) EXPECT_EQ(v, 0.0);
            continue;
        }
        const double bound = std::sqrt(6.0 / double(s[1] * s[2] * s[3]));
        for (double v : t.value.data()) EXPECT_LE(std::abs(v), bound);
    }
}

TEST(InitParams, RejectsDegenerateSizes) {
    EXPECT_THROW(init_params(ArchitectureKind::PlainConvNet, 1, 8, 0), std::invalid_argument);
    EXPECT_THROW(init_params(ArchitectureKind::PlainConvNet, 4, 2, 0), std::invalid_argument);
}

TEST(Forward, OutputShape) {
    const ModelParams p = init_params(ArchitectureKind::PlainConvNet, 2, 4, 1);
    EXPECT_EQ(forward(p, Tensor::zeros({1, 1, 16, 16})).shape(), (Shape{1, 2, 16, 16}));
    EXPECT_EQ(forward(p, Tensor::zeros({3, 1, 8, 12})).shape(), (Shape{3, 2, 8, 12}));
}

TEST(Forward, ZeroInputIsFinite) {
    for (auto kind : {ArchitectureKind::PlainConvNet, ArchitectureKind::ResidualConvNet}) {
        Tensor out = forward(init_params(kind, 4, 8, 2), Tensor::zeros({1, 1, 16, 16}));
        for (double v : out.data()) EXPECT_TRUE(std::isfinite(v));
    }
}

TEST(Forward, Pure) {
    std::mt19937_64 rng(5);
    const ModelParams p = init_params(ArchitectureKind::ResidualConvNet, 4, 4, 5);
    Tensor x = test::random_tensor(rng, {2, 1, 16, 16}, 0, 1);
    Tensor a = forward(p, x), b = forward(p, x);
    EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST(Forward, ArchitecturesDiffer) {
    std::mt19937_64 rng(6);
    ModelParams plain = init_params(ArchitectureKind::PlainConvNet, 3, 4, 7);
    ModelParams res = plain.clone(false);
    res.architecture = ArchitectureKind::ResidualConvNet;
    Tensor x = test::random_tensor(rng, {1, 1, 8, 8}, 0, 1);
    Tensor a = forward(plain, x), b = forward(res, x);
    EXPECT_FALSE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST(Forward, RejectsBadInput) {
    const ModelParams p = init_params(ArchitectureKind::PlainConvNet, 2, 4, 1);
    EXPECT_THROW(forward(p, Tensor::zeros({1, 2, 16, 16})), std::invalid_argument);
    EXPECT_THROW(forward(p, Tensor::zeros({1, 1, 10, 16})), std::invalid_argument);
    EXPECT_THROW(forward(p, Tensor::zeros({1, 16, 16})), std::invalid_argument);
}

TEST(Forward, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(8);
    for (auto kind : {ArchitectureKind::PlainConvNet, ArchitectureKind::ResidualConvNet}) {
        ModelParams p = init_params(kind, 2, 4, 8);
        // non-zero biases so no ReLU sits exactly on its kink
        for (auto& t : p.tensors)
            if (t.value.dim() == 1)
                for (double& v : t.value.mutable_data()) v = std::uniform_real_distribution<double>(-0.1, 0.1)(rng);
        Tensor x = test::random_tensor(rng, {1, 1, 8, 8}, 0, 1);
        Tensor w = test::random_tensor(rng, {1, 2, 8, 8});
        std::vector<Tensor> leaves;
        for (const auto& t : p.tensors) leaves.push_back(t.value);
        auto r = test::grad_check(leaves, [&](const std::vector<Tensor>&) { return sum(forward(p, x) * w); });
        EXPECT_LT(r.max_rel_error, 1e-4) << to_string(kind);
    }
}

TEST(Checkpoint, RoundTripIsExact) {
    const ModelParams p = init_params(ArchitectureKind::ResidualConvNet, 4, 4, 21);
    std::stringstream buf;
    write_checkpoint(buf, p);
    const ModelParams q = read_checkpoint(buf);
    EXPECT_TRUE(same_values(p, q));
    for (const auto& t : q.tensors) EXPECT_FALSE(t.value.requires_grad());

    const auto dir = test::scratch_dir("ckpt");
    save_checkpoint(dir / "m.ckpt", p);
    EXPECT_TRUE(same_values(p, load_checkpoint(dir / "m.ckpt")));
}

TEST(Checkpoint, RejectsCorruptInput) {
    std::stringstream bad_magic("NOT-A-CHECKPOINT\n");
    EXPECT_THROW(read_checkpoint(bad_magic), std::runtime_error);

    std::stringstream full;
    write_checkpoint(full, init_params(ArchitectureKind::PlainConvNet, 2, 4, 1));
    const std::string s = full.str();
    std::stringstream truncated(s.substr(0, s.size() - 13));
    EXPECT_THROW(read_checkpoint(truncated), std::runtime_error);

    EXPECT_THROW(load_checkpoint("/nonexistent/dir/m.ckpt"), std::runtime_error);
}
