#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "semvar/providers.hpp"
#include "support.hpp"

using namespace semvar;

namespace {

double norm(const std::vector<float>& v)
{
    double s = 0.0;
    for (float x : v) s += static_cast<double>(x) * x;
    return std::sqrt(s);
}

} // namespace

// Bit patterns produced by tests/oracles/reference_embed_oracle.py.
TEST(ReferenceEmbed, MatchesFrozenOracle)
{
    std::ifstream in(test::data_dir() / "reference_golden.tsv");
    ASSERT_TRUE(in);
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto t1 = line.find('\t');
        const auto t2 = line.find('\t', t1 + 1);
        const std::string text = line.substr(0, t1);
        const std::size_t dim = std::stoul(line.substr(t1 + 1, t2 - t1 - 1));
        std::istringstream hex(line.substr(t2 + 1));
        const std::vector<float> v = reference_embed(text, dim);
        for (std::size_t k = 0; k < dim; ++k) {
            std::string h;
            hex >> h;
            EXPECT_EQ(std::bit_cast<std::uint32_t>(v[k]), std::stoul(h, nullptr, 16)) << text << " [" << k << "]";
        }
        ++rows;
    }
    EXPECT_GE(rows, 10);
}

TEST(ReferenceEmbed, Deterministic)
{
    EXPECT_EQ(reference_embed("The same sentence.", 64), reference_embed("The same sentence.", 64));
}

TEST(ReferenceEmbed, OrderInvariant)
{
    EXPECT_EQ(reference_embed("alpha beta", 32), reference_embed("beta alpha", 32));
}

TEST(ReferenceEmbed, CaseInsensitiveAscii)
{
    EXPECT_EQ(reference_embed("Alpha BETA", 16), reference_embed("alpha beta", 16));
}

TEST(ReferenceEmbed, EmptySentenceUsesPlaceholder)
{
    EXPECT_EQ(reference_embed("", 16), reference_embed("   ", 16));
    EXPECT_NEAR(norm(reference_embed("", 16)), 1.0, 1e-6);
}

TEST(ReferenceEmbed, RejectsTinyDim) { EXPECT_THROW(reference_embed("x", 1), Error); }

TEST(ReferenceEmbed, PropertyUnitNorm)
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 300; ++trial) {
        const std::string text = test::random_text(rng, 1, 20);
        const std::size_t dim = 2 + rng() % 400;
        EXPECT_NEAR(norm(reference_embed(text, dim)), 1.0, 1e-6) << text;
    }
}

TEST(ModelIdTest, Validation)
{
    EXPECT_NO_THROW(ModelId("MiniLM"));
    EXPECT_THROW(ModelId(""), Error);
    EXPECT_THROW(ModelId("has space"), Error);
    EXPECT_THROW(ModelId(std::string(33, 'x')), Error);
    EXPECT_NO_THROW(ModelId(std::string(32, 'x')));
}

TEST(EmbeddingMatrixTest, RejectsZeroRowAndNonFinite)
{
    EXPECT_THROW(EmbeddingMatrix(ModelId("m"), "d", 2, 2, {1, 0, 0, 0}), Error);
    EXPECT_THROW(EmbeddingMatrix(ModelId("m"), "d", 1, 2, {NAN, 1}), Error);
    EXPECT_THROW(EmbeddingMatrix(ModelId("m"), "d", 2, 2, {1, 0, 0}), Error);
}

TEST(Provider, ReferenceThreeSentences)
{
    const Document doc = make_document("d", "d", "One fish. Two fish. Red fish.", false);
    const EmbeddingMatrix m = embed_document(parse_provider_spec("reference:64"), doc, ModelId("ref"));
    EXPECT_EQ(m.n(), 3u);
    EXPECT_EQ(m.d(), 64u);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto r = m.row(i);
        EXPECT_NEAR(norm(std::vector<float>(r.begin(), r.end())), 1.0, 1e-6);
    }
}

TEST(Provider, SpecParsing)
{
    EXPECT_EQ(parse_provider_spec("reference:128").dim, 128u);
    EXPECT_EQ(parse_provider_spec("reference").dim, 64u);
    const ProviderConfig r = parse_provider_spec("remote:http://127.0.0.1:8000");
    EXPECT_EQ(r.kind, ProviderKind::remote);
    EXPECT_EQ(r.location, "http://127.0.0.1:8000");
    EXPECT_THROW(parse_provider_spec("bogus:1"), Error);
    EXPECT_THROW(parse_provider_spec("file"), Error);
    EXPECT_THROW(parse_provider_spec("reference:abc"), Error);
}

TEST(Provider, FileRowCountMismatch)
{
    const auto dir = test::scratch_dir("file_provider");
    const Document doc3 = make_document("doc", "d", "A. B. C.", false);
    const Document doc2 = make_document("doc", "d", "A. B.", false);
    write_embeddings(embed_with_reference(doc2, ModelId("m"), 8), dir / "doc.semv");
    ProviderConfig cfg{ProviderKind::file, (dir / "doc.semv").string()};
    try {
        embed_document(cfg, doc3, ModelId("m"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("row count mismatch"), std::string::npos);
    }
}

TEST(Provider, FileDirectoryResolvesByDocId)
{
    const auto dir = test::scratch_dir("file_provider_dir");
    const Document doc = make_document("doc", "d", "A. B. C.", false);
    const EmbeddingMatrix m = embed_with_reference(doc, ModelId("m"), 8);
    write_embeddings(m, dir / "doc.semv");
    const EmbeddingMatrix back = embed_document({ProviderKind::file, dir.string()}, doc, ModelId("m"));
    EXPECT_EQ(back, m);
}

TEST(EmbeddingFile, RoundTrip2x3)
{
    const EmbeddingMatrix m(ModelId("m"), "doc", 2, 3, {0.5f, -1.25f, 3.0f, 1e-7f, -2.5e10f, 0.1f});
    EXPECT_EQ(decode_embeddings(encode_embeddings(m)), m);
}

TEST(EmbeddingFile, RoundTripReferenceDoc)
{
    const Document doc = make_document("toy", "toy", "A b. C d e. F g. H i j k. L m n.", false);
    ASSERT_EQ(doc.size(), 5u);
    const EmbeddingMatrix m = embed_with_reference(doc, ModelId("ref"), 32);
    const auto dir = test::scratch_dir("emb_rt");
    write_embeddings(m, dir / "e.semv");
    EXPECT_EQ(read_embeddings(dir / "e.semv"), m);
}

TEST(EmbeddingFile, BadMagic)
{
    const EmbeddingMatrix m(ModelId("m"), "doc", 1, 2, {1.0f, 0.0f});
    std::string bytes = encode_embeddings(m);
    bytes[0] = 'X';
    try {
        decode_embeddings(bytes);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("bad magic"), std::string::npos);
    }
}

TEST(Provider, PreservesSentenceOrderUnderPermutation)
{
    std::mt19937_64 rng(5);
    const Document doc = make_document("d", "d", test::random_text(rng, 12), false);
    std::vector<std::size_t> perm(doc.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    Document shuffled = doc;
    for (std::size_t i = 0; i < perm.size(); ++i) {
        shuffled.sentences[i] = doc.sentences[perm[i]];
        shuffled.sentences[i].index = i;
    }
    const ProviderConfig cfg = parse_provider_spec("reference:24");
    const EmbeddingMatrix a = embed_document(cfg, doc, ModelId("m"));
    const EmbeddingMatrix b = embed_document(cfg, shuffled, ModelId("m"));
    for (std::size_t i = 0; i < perm.size(); ++i) {
        const auto ra = a.row(perm[i]);
        const auto rb = b.row(i);
        EXPECT_TRUE(std::equal(ra.begin(), ra.end(), rb.begin()));
    }
}
