#include <cmath>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include "chp/size_model.hpp"
#include "test_models.hpp"

namespace {

using namespace chp;

std::vector<std::int64_t> draw(const SizeDistribution& d, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::int64_t> out(n);
    for (auto& x : out) x = d.sample(rng);
    return out;
}

TEST(SizeDistribution, PmfHasUnitMass) {
    for (double p : {0.5, 0.02, 0.001}) {
        const auto d = testing_models::spiked(p);
        double total = 0.0;
        const std::int64_t kmax = 1'000'000;
        for (std::int64_t k = 1; k <= kmax; ++k) {
            const double v = d.pmf(k);
            ASSERT_GE(v, 0.0);
            total += v;
        }
        total += d.body_weight * std::pow(1.0 - p, static_cast<double>(kmax));
        EXPECT_NEAR(total, 1.0, 1e-9) << p;
    }
}

TEST(SizeDistribution, DegenerateSamplers) {
    SizeDistribution one;
    one.spike_weights = {1, 0, 0, 0, 0, 0};
    one.body_weight = 0.0;
    for (auto x : draw(one, 1000, 1)) ASSERT_EQ(x, 1);

    SizeDistribution body;
    body.geom_p = 0.5;
    const auto xs = draw(body, 1'000'000, 2);
    double mean = 0.0;
    for (auto x : xs) mean += static_cast<double>(x);
    EXPECT_NEAR(mean / static_cast<double>(xs.size()), 2.0, 0.01);
}

TEST(SizeDistribution, SamplerMatchesPmfChiSquared) {
    const auto d = testing_models::spiked(0.05);
    const std::size_t n = 1'000'000;
    const auto h = make_histogram(draw(d, n, 3));
    // Cells: every k up to 120 plus each remaining spike and one tail cell.
    std::vector<double> obs, expct;
    double covered = 0.0;
    std::int64_t counted = 0;
    for (std::int64_t k = 1; k <= 120; ++k) {
        const auto it = h.find(k);
        obs.push_back(it == h.end() ? 0.0 : static_cast<double>(it->second));
        expct.push_back(n * d.pmf(k));
        covered += d.pmf(k);
        counted += it == h.end() ? 0 : it->second;
    }
    for (std::int64_t k : {200, 500}) {
        const auto it = h.find(k);
        obs.push_back(it == h.end() ? 0.0 : static_cast<double>(it->second));
        expct.push_back(n * d.pmf(k));
        covered += d.pmf(k);
        counted += it == h.end() ? 0 : it->second;
    }
    obs.push_back(static_cast<double>(static_cast<std::int64_t>(n) - counted));
    expct.push_back(n * (1.0 - covered));

    double chi2 = 0.0;
    std::size_t cells = 0;
    double pool_o = 0.0, pool_e = 0.0;
    for (std::size_t c = 0; c < obs.size(); ++c) {
        pool_o += obs[c];
        pool_e += expct[c];
        if (pool_e < 5.0) continue;
        chi2 += (pool_o - pool_e) * (pool_o - pool_e) / pool_e;
        ++cells;
        pool_o = pool_e = 0.0;
    }
    const boost::math::chi_squared dist(static_cast<double>(cells - 1));
    EXPECT_GT(boost::math::cdf(boost::math::complement(dist, chi2)), 0.01) << chi2 << " on " << cells;
}

TEST(FitSizes, RecoversParameters) {
    const auto truth = testing_models::spiked(0.02);
    const auto res = fit_sizes(draw(truth, 100'000, 4));
    ASSERT_TRUE(res.converged);
    EXPECT_NEAR(res.dist.geom_p, 0.02, 0.002);
    for (std::size_t s = 0; s < truth.spike_weights.size(); ++s)
        EXPECT_NEAR(res.dist.spike_weights[s], truth.spike_weights[s], 0.01) << s;
    EXPECT_NEAR(res.dist.body_weight, truth.body_weight, 0.01);
    EXPECT_NO_THROW(res.dist.validate());
}

TEST(FitSizes, LogLikelihoodIsMonotone) {
    const auto res = fit_sizes(draw(testing_models::spiked(0.1), 20'000, 5));
    ASSERT_GE(res.log_likelihood_trace.size(), 2u);
    for (std::size_t k = 1; k < res.log_likelihood_trace.size(); ++k)
        EXPECT_GE(res.log_likelihood_trace[k], res.log_likelihood_trace[k - 1] - 1e-9);
}

TEST(FitSizes, DegenerateAndMarketOrderLikeSamples) {
    const std::vector<std::int64_t> all100(500, 100);
    const auto res = fit_sizes(all100);
    EXPECT_DOUBLE_EQ(res.dist.spike_weight_at(100), 1.0);
    EXPECT_DOUBLE_EQ(res.dist.body_weight, 0.0);
    for (std::int64_t k : {1, 10, 50, 200, 500}) EXPECT_EQ(res.dist.spike_weight_at(k), 0.0);

    // 40% at 100 on top of a broad body.
    SizeDistribution mo;
    mo.spike_weights = {0, 0, 0, 0.4, 0, 0};
    mo.body_weight = 0.6;
    mo.geom_p = 0.01;
    const auto fit = fit_sizes(draw(mo, 50'000, 6));
    EXPECT_NEAR(fit.dist.spike_weight_at(100), 0.4, 0.01);

    EXPECT_THROW(fit_sizes(std::vector<std::int64_t>(50, 3)), ContractViolation);
    EXPECT_THROW(fit_sizes(std::vector<std::int64_t>(200, 0)), ContractViolation);
}

TEST(FitSizes, UniformSizesHaveNoSpikeExcess) {
    Rng rng(7);
    std::vector<std::int64_t> xs(100'000);
    for (auto& x : xs) x = 1 + static_cast<std::int64_t>(rng.index(1000));
    const auto fit = fit_sizes(xs);
    for (double w : fit.dist.spike_weights) EXPECT_LT(w, 0.01);
}

}  // namespace
