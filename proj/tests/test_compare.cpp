#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "semvar/compare.hpp"
#include "support.hpp"

using namespace semvar;

namespace {

TimeSeries series(const std::string& model, std::vector<float> v) { return {ModelId(model), "doc", std::move(v)}; }

std::vector<float> random_upper(std::mt19937_64& rng, std::size_t n)
{
    std::normal_distribution<float> g;
    std::vector<float> v(n * (n - 1) / 2);
    for (float& x : v) x = g(rng);
    return v;
}

} // namespace

TEST(Pearson, Examples)
{
    const std::vector<double> x{1, 2, 3, 4}, y{1, 2, 3, 5};
    std::vector<double> neg(x);
    for (double& v : neg) v = -v;
    EXPECT_NEAR(pearson(x, x), 1.0, 1e-12);
    EXPECT_NEAR(pearson(x, neg), -1.0, 1e-12);
    EXPECT_NEAR(pearson(x, y), 0.98270763, 1e-6);
}

TEST(Pearson, AffineTransform)
{
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    std::vector<double> x(100), y(100);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = g(rng);
        y[i] = 2 * x[i] + 3;
    }
    EXPECT_NEAR(pearson(x, y), 1.0, 1e-9);
}

TEST(Pearson, Errors)
{
    const std::vector<double> a{1, 2, 3}, b{1, 2}, c{4, 4, 4}, d{1, 2};
    EXPECT_THROW(pearson(a, b), Error);
    EXPECT_THROW(pearson(a, c), Error);
    EXPECT_THROW(pearson(d, d), Error);
}

TEST(CorrelationMap, IdenticalSeries)
{
    const std::vector<TimeSeries> s{series("a", {1, 3, 2, 5}), series("b", {1, 3, 2, 5})};
    const ModelMatrix m = correlation_map(s);
    for (double v : m.values) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(CorrelationMap, MatchesPairwisePearson)
{
    const std::vector<TimeSeries> s{series("a", {0.1f, -0.4f, 1.2f, 0.3f, -0.8f}),
                                    series("b", {0.5f, 0.2f, 0.9f, -0.1f, -0.3f}),
                                    series("c", {-1.0f, 0.7f, 0.0f, 0.4f, 1.1f})};
    const ModelMatrix m = correlation_map(s);
    ASSERT_EQ(m.size(), 3u);
    for (std::size_t a = 0; a < 3; ++a) {
        EXPECT_EQ(m.at(a, a), 1.0);
        for (std::size_t b = 0; b < 3; ++b) {
            if (a == b) continue;
            EXPECT_DOUBLE_EQ(m.at(a, b), pearson(std::span<const float>(s[a].values), std::span<const float>(s[b].values)));
            EXPECT_EQ(m.at(a, b), m.at(b, a));
        }
    }
}

TEST(CorrelationMap, EightModels)
{
    std::mt19937_64 rng(2);
    std::normal_distribution<float> g;
    std::vector<TimeSeries> s;
    for (int k = 0; k < 8; ++k) {
        std::vector<float> v(50);
        for (float& x : v) x = g(rng);
        s.push_back(series("m" + std::to_string(k), v));
    }
    const ModelMatrix m = correlation_map(s);
    EXPECT_EQ(m.size(), 8u);
    for (std::size_t a = 0; a < 8; ++a) EXPECT_NEAR(m.at(a, a), 1.0, 1e-9);
}

TEST(CorrelationMap, RejectsDuplicatesAndMixedDocs)
{
    std::vector<TimeSeries> s{series("a", {1, 2, 3}), series("a", {1, 2, 4})};
    EXPECT_THROW(correlation_map(s), Error);
    s[1].model = ModelId("b");
    s[1].doc_id = "other";
    EXPECT_THROW(correlation_map(s), Error);
}

TEST(FullSsmCorrelation, MatchesFlattenedPearson)
{
    std::mt19937_64 rng(3);
    const auto ua = random_upper(rng, 6);
    const auto ub = random_upper(rng, 6);
    const std::vector<StandardizedSSM> z{test::z_from_upper("a", 6, ua), test::z_from_upper("b", 6, ub)};
    const ModelMatrix m = full_ssm_correlation_map(z);
    EXPECT_NEAR(m.at(0, 1), pearson(std::span<const float>(ua), std::span<const float>(ub)), 1e-12);
}

TEST(MeanMap, SingleAndPair)
{
    ModelMatrix a(MatrixKind::correlation, {ModelId("x"), ModelId("y")}, "d1");
    a.values = {1, 0.2, 0.2, 1};
    ModelMatrix b = a;
    b.doc_id = "d2";
    b.values = {1, 0.6, 0.6, 1};
    const std::vector<ModelMatrix> one{a};
    EXPECT_EQ(mean_correlation_map(one).values, a.values);
    const std::vector<ModelMatrix> two{a, b};
    const ModelMatrix mean = mean_correlation_map(two);
    EXPECT_NEAR(mean.at(0, 1), 0.4, 1e-12);
    EXPECT_EQ(mean.doc_id, mean_doc_id);
}

TEST(MeanMap, InconsistentModels)
{
    ModelMatrix a(MatrixKind::correlation, {ModelId("x"), ModelId("y")}, "d1");
    ModelMatrix b(MatrixKind::correlation, {ModelId("y"), ModelId("x")}, "d2");
    const std::vector<ModelMatrix> maps{a, b};
    try {
        mean_correlation_map(maps);
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "inconsistent model lists across maps");
    }
}

TEST(SignSummary, SelfAndNegation)
{
    std::mt19937_64 rng(4);
    const auto u = random_upper(rng, 7);
    std::vector<float> neg(u);
    for (float& v : neg) v = -v;
    const auto a = test::z_from_upper("a", 7, u);
    const auto b = test::z_from_upper("b", 7, neg);
    const PairSignSummary self = sign_summary(a, a);
    EXPECT_EQ(self.pos_neg, 0u);
    EXPECT_EQ(self.neg_pos, 0u);
    const PairSignSummary opp = sign_summary(a, b);
    EXPECT_EQ(opp.pos_pos, 0u);
    EXPECT_EQ(opp.neg_neg, 0u);
    EXPECT_EQ(opp.total_pairs, 21u);
}

// Pairs in order (0,1) (0,2) (0,3) (1,2) (1,3) (2,3).
// a signs: + - + 0 - +      (0 counts as negative)
// b signs: + + - - - +
// pos_pos: (0,1) (2,3) = 2; neg_neg: (1,2) (1,3) = 2; pos_neg: (0,3) = 1; neg_pos: (0,2) = 1.
TEST(SignSummary, HandEnumeratedFourSentences)
{
    const auto a = test::z_from_upper("a", 4, {0.5f, -1.0f, 2.0f, 0.0f, -0.3f, 0.1f});
    const auto b = test::z_from_upper("b", 4, {1.5f, 0.2f, -0.4f, -2.0f, -0.1f, 0.9f});
    const PairSignSummary s = sign_summary(a, b);
    EXPECT_EQ(s.pos_pos, 2u);
    EXPECT_EQ(s.neg_neg, 2u);
    EXPECT_EQ(s.pos_neg, 1u);
    EXPECT_EQ(s.neg_pos, 1u);
    EXPECT_EQ(s.total_pairs, 6u);
}

TEST(Agreement, IdenticalModels)
{
    std::mt19937_64 rng(5);
    const auto u = random_upper(rng, 8);
    const std::vector<StandardizedSSM> z{test::z_from_upper("a", 8, u), test::z_from_upper("b", 8, u)};
    const AgreementMatrices am = agreement_matrices(z);
    EXPECT_DOUBLE_EQ(am.paf.at(0, 1) + am.naf.at(0, 1), 1.0);
    EXPECT_EQ(am.ddaf.at(0, 1), 0.0);
    EXPECT_EQ(am.ddaf.at(1, 0), 0.0);
}

TEST(Agreement, FiveSentenceThreeModelBruteForce)
{
    std::mt19937_64 rng(6);
    std::vector<std::vector<float>> uppers;
    std::vector<StandardizedSSM> z;
    for (const char* name : {"a", "b", "c"}) {
        uppers.push_back(random_upper(rng, 5));
        z.push_back(test::z_from_upper(name, 5, uppers.back()));
    }
    uppers[1][3] = 0.0f; // an exact zero counts as negative
    z[1] = test::z_from_upper("b", 5, uppers[1]);
    const AgreementMatrices am = agreement_matrices(z);
    for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t b = 0; b < 3; ++b) {
            int pp = 0, nn = 0, pn = 0;
            for (std::size_t k = 0; k < 10; ++k) {
                const bool pa = uppers[a][k] > 0, pb = uppers[b][k] > 0;
                pp += pa && pb;
                nn += !pa && !pb;
                pn += pa && !pb;
            }
            EXPECT_DOUBLE_EQ(am.paf.at(a, b), pp / 10.0);
            EXPECT_DOUBLE_EQ(am.naf.at(a, b), nn / 10.0);
            if (a != b) EXPECT_DOUBLE_EQ(am.ddaf.at(a, b), pn / 10.0);
            const PairSignSummary& s = am.summary(a, b);
            EXPECT_EQ(s.model_a, z[a].model);
            EXPECT_EQ(s.pos_neg, static_cast<std::uint64_t>(pn));
        }
    }
}

TEST(Agreement, PropertyPartitionIdentityOnCounts)
{
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 3 + rng() % 25;
        const std::size_t m = 2 + rng() % 4;
        std::vector<StandardizedSSM> z;
        for (std::size_t k = 0; k < m; ++k) {
            auto u = random_upper(rng, n);
            for (float& v : u) {
                if (rng() % 7 == 0) v = 0.0f;
            }
            z.push_back(test::z_from_upper("m" + std::to_string(k), n, u));
        }
        const AgreementMatrices am = agreement_matrices(z);
        for (std::size_t a = 0; a < m; ++a) {
            for (std::size_t b = 0; b < m; ++b) {
                const PairSignSummary& s = am.summary(a, b);
                EXPECT_EQ(s.pos_pos + s.neg_neg + s.pos_neg + s.neg_pos, s.total_pairs);
                EXPECT_EQ(am.summary(b, a).pos_neg, s.neg_pos);
                EXPECT_EQ(am.paf.at(a, b), am.paf.at(b, a));
                EXPECT_EQ(am.naf.at(a, b), am.naf.at(b, a));
            }
        }
    }
}

TEST(ModelMatrixCsv, ExactFormatAndRoundTrip)
{
    ModelMatrix m(MatrixKind::paf, {ModelId("MPNet"), ModelId("MiniLM")}, "carol");
    m.values = {0.44, 0.25, 0.25, 0.5};
    const std::string csv = model_matrix_csv(m);
    EXPECT_EQ(csv, "paf,carol\n,MPNet,MiniLM\nMPNet,0.440000,0.250000\nMiniLM,0.250000,0.500000\n");
    std::istringstream in(csv);
    const ModelMatrix back = read_model_matrix_csv(in);
    EXPECT_EQ(back.kind, MatrixKind::paf);
    EXPECT_EQ(back.doc_id, "carol");
    EXPECT_EQ(back.models, m.models);
    EXPECT_EQ(back.values, m.values);
}

TEST(ModelMatrixCsv, MalformedRejected)
{
    for (const char* bad : {"", "paf\n", "nope,d\n,a\na,1\n", "paf,d\n,a,b\na,1,2\n", "paf,d\n,a\na,x\n"}) {
        std::istringstream in(bad);
        EXPECT_THROW(read_model_matrix_csv(in), Error) << bad;
    }
}
