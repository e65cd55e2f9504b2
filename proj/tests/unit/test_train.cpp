#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "blobgan/errors.hpp"
#include "blobgan/ops.hpp"
#include "blobgan/train.hpp"
#include "gradcheck.hpp"

namespace {

using namespace blobgan;
using blobgan::testing::tiny_model_config;

Model tiny_model(std::uint64_t seed = 3) {
    Model m = Model::create(tiny_model_config(), seed);
    m.train.batch = 2;
    m.train.steps = 6;
    m.train.seed = seed;
    return m;
}

// Log line without the trailing wall-clock column.
std::string strip_wall(const std::string& line) { return line.substr(0, line.rfind('\t')); }

TEST(Losses, NonSaturatingValuesAtZeroLogits) {
    Tape tape;
    Var zero = tape.constant(Tensor({4, 1}, 0.0f));
    EXPECT_NEAR(nonsat_d_loss(zero, zero).value().item(), 2.0 * std::log(2.0), 1e-6);
    EXPECT_NEAR(nonsat_g_loss(zero).value().item(), std::log(2.0), 1e-6);
}

TEST(Losses, NonSaturatingMatchesSoftplusOracle) {
    Tape tape;
    Tensor r({3, 1}, std::vector<float>{2.0f, -1.0f, 0.5f});
    Tensor f({3, 1}, std::vector<float>{-3.0f, 0.0f, 4.0f});
    auto sp = [](double x) { return std::log1p(std::exp(x)); };
    double want_d = 0.0, want_g = 0.0;
    for (int i = 0; i < 3; ++i) {
        want_d += (sp(-r[i]) + sp(f[i])) / 3.0;
        want_g += sp(-f[i]) / 3.0;
    }
    EXPECT_NEAR(nonsat_d_loss(tape.constant(r), tape.constant(f)).value().item(), want_d, 1e-5);
    EXPECT_NEAR(nonsat_g_loss(tape.constant(f)).value().item(), want_g, 1e-5);
}

TEST(Jitter, StaysInsideRangesAndLeavesFeatures) {
    Model m = tiny_model();
    auto scenes = sample_scenes(m, m.g_ema, {1, 2, 3, 4});
    Tape tape;
    SceneVars sv = scene_constants(tape, scenes);
    std::mt19937_64 rng(8);
    JitterRanges r{0.04f, 0.5f, 0.1f};
    SceneVars j = jitter_vars(sv, rng, r);
    auto within = [](const Var& a, const Var& b, float range) {
        float worst = 0.0f;
        for (std::int64_t i = 0; i < a.numel(); ++i) worst = std::max(worst, std::abs(a.value()[i] - b.value()[i]));
        return worst <= range * 1.0001f && worst > 0.0f;
    };
    EXPECT_TRUE(within(j.x, sv.x, r.dx));
    EXPECT_TRUE(within(j.s, sv.s, r.ds));
    EXPECT_TRUE(within(j.theta, sv.theta, r.dtheta));
    EXPECT_EQ(j.a.value(), sv.a.value());
    EXPECT_EQ(j.phi.value(), sv.phi.value());
    EXPECT_EQ(j.psi.value(), sv.psi.value());
}

TEST(Ema, DecayEndpoints) {
    Model m = tiny_model();
    Model live = tiny_model(4);
    ParamSet ema = m.g_params;
    ema_update(ema, live.g_params, 0.0f);
    EXPECT_EQ(ema.checksum(), live.g_params.checksum());
    ParamSet kept = m.g_params;
    ema_update(kept, live.g_params, 1.0f);
    EXPECT_EQ(kept.checksum(), m.g_params.checksum());
}

TEST(Ema, GeometricRecurrence) {
    ParamSet ema, live;
    ema.add("p", Tensor({3}, 0.0f));
    live.add("p", Tensor({3}, 1.0f));
    const float d = 0.9f;
    for (int n = 1; n <= 30; ++n) {
        ema_update(ema, live, d);
        for (int i = 0; i < 3; ++i) EXPECT_NEAR(ema.value(0)[i], 1.0 - std::pow(0.9, n), 1e-5) << n;
    }
}

TEST(Trainer, ZeroLearningRateLeavesParametersUnchanged) {
    Model m = tiny_model();
    m.train.lr = 0.0f;
    const auto g = m.g_params.checksum(), d = m.d_params.checksum();
    Trainer t(m);
    for (int i = 0; i < 3; ++i) t.step();
    EXPECT_EQ(m.g_params.checksum(), g);
    EXPECT_EQ(m.d_params.checksum(), d);
    EXPECT_EQ(m.step, 3);
    const Model fresh = tiny_model();
    for (std::size_t i = 0; i < m.g_ema.size(); ++i) {
        EXPECT_LT(max_abs_diff(m.g_ema.value(i), fresh.g_ema.value(i)), 1e-5f);
    }
}

TEST(Trainer, StepChangesParametersAndLogs) {
    Model m = tiny_model();
    const auto g = m.g_params.checksum(), d = m.d_params.checksum(), e = m.g_ema.checksum();
    Trainer t(m);
    StepLog log = t.step();
    EXPECT_NE(m.g_params.checksum(), g);
    EXPECT_NE(m.d_params.checksum(), d);
    EXPECT_NE(m.g_ema.checksum(), e);
    EXPECT_EQ(log.step, 0);
    EXPECT_GT(log.r1, 0.0);  // step 0 is an R1 step
    EXPECT_GT(log.grad_norm_g, 0.0);
    EXPECT_GT(log.grad_norm_d, 0.0);
    const std::string line = log.line();
    EXPECT_EQ(std::count(line.begin(), line.end(), '\t'), 6);
}

TEST(Trainer, LazyR1OnlyActsOnPeriodSteps) {
    // Off-period steps equal a run without R1; on-period steps do not.
    auto after_one_step = [](std::int64_t start, int period) {
        Model m = tiny_model();
        m.step = start;
        m.train.r1_period = period;
        Trainer t(m);
        StepLog log = t.step();
        return std::make_pair(m.d_params.checksum(), log.r1);
    };
    auto lazy_off = after_one_step(1, 16);
    auto none_off = after_one_step(1, 0);
    EXPECT_EQ(lazy_off.first, none_off.first);
    EXPECT_EQ(lazy_off.second, 0.0);
    auto lazy_on = after_one_step(16, 16);
    auto none_on = after_one_step(16, 0);
    EXPECT_NE(lazy_on.first, none_on.first);
    EXPECT_GT(lazy_on.second, 0.0);
}

TEST(Trainer, SeededRunsAreDeterministic) {
    auto run = [] {
        Model m = tiny_model();
        m.train.steps = 25;
        std::ostringstream log;
        Trainer(m).run(&log);
        std::istringstream in(log.str());
        std::vector<std::string> lines;
        for (std::string line; std::getline(in, line);) lines.push_back(strip_wall(line));
        return std::make_pair(lines, m.g_ema.checksum());
    };
    auto a = run();
    auto b = run();
    ASSERT_EQ(a.first.size(), 25u);
    EXPECT_EQ(a.first, b.first);
    EXPECT_EQ(a.second, b.second);
}

TEST(Trainer, CheckpointCadence) {
    Model m = tiny_model();
    m.train.steps = 7;
    m.train.checkpoint_every = 3;
    std::vector<std::int64_t> at;
    Trainer(m).run(nullptr, [&](const Model& mm, bool diagnostic) {
        EXPECT_FALSE(diagnostic);
        at.push_back(mm.step);
    });
    EXPECT_EQ(at, (std::vector<std::int64_t>{3, 6, 7}));
}

TEST(Trainer, NonFiniteLossWritesDiagnosticAndLeavesParameters) {
    Model m = tiny_model();
    m.d_params.value(0)[0] = std::numeric_limits<float>::quiet_NaN();
    const auto g = m.g_params.checksum(), d = m.d_params.checksum();
    int diagnostics = 0;
    Trainer t(m);
    EXPECT_THROW(t.run(nullptr, [&](const Model&, bool diagnostic) { diagnostics += diagnostic; }), StateError);
    EXPECT_EQ(diagnostics, 1);
    EXPECT_EQ(m.g_params.checksum(), g);
    EXPECT_EQ(m.d_params.checksum(), d);
    EXPECT_EQ(m.step, 0);
}

TEST(Trainer, StyleMixAndDropoutRun) {
    Model m = tiny_model();
    m.train.style_mix_prob = 1.0f;
    m.train.blob_dropout_prob = 0.5f;
    Trainer t(m);
    StepLog log = t.step();
    EXPECT_TRUE(std::isfinite(log.loss_g));
}

}  // namespace
