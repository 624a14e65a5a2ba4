#include <gtest/gtest.h>

#include <fstream>

#include "dtsl/config.hpp"
#include "test_support.hpp"

using namespace dtsl;

TEST(Config, Defaults) {
    const TrainConfig c;
    EXPECT_EQ(c.eta0, 1e-3);
    EXPECT_EQ(c.omega, 0.95);
    EXPECT_EQ(c.kappa, 0.05);
    EXPECT_EQ(c.alpha, 1.0);
    EXPECT_EQ(c.beta, 0.05);
    EXPECT_EQ(c.max_iter, 3000u);
    EXPECT_EQ(c.num_classes, 4u);
    EXPECT_EQ(c.image_size, 64u);
    EXPECT_EQ(c.train_count, 200u);
    EXPECT_EQ(c.test_count, 50u);
    EXPECT_EQ(c.noise_sigma, 0.08);
    EXPECT_EQ(c.mode, TrainMode::SemiDTSL);
    EXPECT_EQ(c.strategy, ClgStrategy::Default);
    EXPECT_NO_THROW(c.validate());
}

TEST(Config, TextRoundTripIsExact) {
    TrainConfig c;
    c.kappa = 0.1 + 0.2;  // not representable in short decimal
    c.omega = 0.93;
    c.mode = TrainMode::PlainDTSL;
    c.strategy = ClgStrategy::Strategy3;
    c.seed = 123456789012345ull;
    const TrainConfig back = parse_config(config_to_text(c));
    EXPECT_EQ(back.to_map(), c.to_map());
    EXPECT_EQ(back.kappa, c.kappa);
}

TEST(Config, ParseSkipsCommentsAndWhitespace) {
    const TrainConfig c = parse_config("# comment\n\n  kappa = 0.1 \nmode=vanilla-mt\n");
    EXPECT_EQ(c.kappa, 0.1);
    EXPECT_EQ(c.mode, TrainMode::VanillaMT);
}

TEST(Config, Rejects) {
    EXPECT_THROW(parse_config("kappa\n"), std::invalid_argument);
    EXPECT_THROW(parse_config("no_such_key=1\n"), std::invalid_argument);
    EXPECT_THROW(parse_config("max_iter=-3\n"), std::invalid_argument);
    EXPECT_THROW(parse_config("alpha=abc\n"), std::invalid_argument);
    EXPECT_THROW(parse_config("mode=bogus\n"), std::invalid_argument);
    for (const char* bad : {"kappa=1.5", "omega=-0.1", "beta=-1", "max_iter=0", "num_classes=1", "image_size=30",
                            "probe_size=100", "labeled_fraction=1"}) {
        EXPECT_THROW(parse_config(std::string(bad) + "\n").validate(), std::invalid_argument) << bad;
    }
}

TEST(Config, ModeNames) {
    for (auto m : {TrainMode::SemiDTSL, TrainMode::SupervisedDTSL, TrainMode::SupervisedPlain, TrainMode::VanillaMT,
                   TrainMode::PlainDTSL})
        EXPECT_EQ(parse_mode(to_string(m)), m);
    EXPECT_EQ(parse_mode("mt"), TrainMode::VanillaMT);
}

TEST(Config, ManifestReloads) {
    TrainConfig c;
    c.kappa = 0.15;
    c.seed = 4;
    const auto dir = test::scratch_dir("manifest");
    std::ofstream(dir / "manifest.txt") << manifest_text(c);
    std::map<std::string, std::string> extra;
    const TrainConfig back = load_config(dir / "manifest.txt", &extra);
    EXPECT_EQ(back.to_map(), c.to_map());
    EXPECT_EQ(extra.at("tool_version"), std::string(kToolVersion));
    EXPECT_EQ(extra.count("layout.losses"), 1u);
    EXPECT_EQ(load_config(dir / "manifest.txt").to_map(), c.to_map());
    EXPECT_THROW(parse_config("tool_versions=1\n"), std::invalid_argument);
    EXPECT_THROW(load_config(dir / "missing.txt"), std::runtime_error);
}
