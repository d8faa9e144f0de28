#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "semvar/providers.hpp"
#include "semvar/remote.hpp"

using namespace semvar;
using nlohmann::json;

namespace {

// In-process stand-in for the embedding service. Model names select
// behaviour: "ref" answers correctly, the others inject one fault each.
class MockService {
public:
    MockService()
    {
        server_.Get("/models", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(json{{"models", {{{"name", "ref"}, {"dim", 16}}}}}.dump(), "application/json");
        });
        server_.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
            ++requests;
            json body;
            try {
                body = json::parse(req.body);
            } catch (const std::exception&) {
                res.status = 400;
                res.set_content(R"({"error": "malformed body"})", "application/json");
                return;
            }
            const std::string model = body.at("model");
            const auto& sentences = body.at("sentences");
            max_batch = std::max<std::size_t>(max_batch, sentences.size());
            if (model == "missing") {
                res.status = 404;
                res.set_content(R"({"error": "unknown model missing"})", "application/json");
                return;
            }
            if (model == "boom") {
                res.status = 500;
                res.set_content(R"({"error": "inference failed"})", "application/json");
                return;
            }
            json vectors = json::array();
            std::size_t i = 0;
            for (const auto& s : sentences) {
                const std::size_t dim = (model == "ragged" && i == 1) ? 8 : 16;
                std::vector<float> v = reference_embed(s.get<std::string>(), dim);
                if (model == "zero" && i == 0) std::fill(v.begin(), v.end(), 0.0f);
                vectors.push_back(v);
                ++i;
            }
            if (model == "short") vectors.erase(vectors.end() - 1);
            res.set_content(json{{"model", model}, {"dim", model == "liar" ? 99 : 16}, {"vectors", vectors}}.dump(),
                            "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~MockService()
    {
        server_.stop();
        thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

    std::atomic<int> requests{0};
    std::atomic<std::size_t> max_batch{0};

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

Document five_sentences()
{
    return make_document("doc", "doc", "One fish. Two fish. Red fish. Blue fish. Old fish.", false);
}

std::string error_of(const std::string& url, const std::string& model, std::size_t batch = 32)
{
    try {
        RemoteEmbedder(url, batch).embed(five_sentences(), ModelId(model));
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST(Remote, ModelsEndpoint)
{
    MockService svc;
    const auto models = RemoteEmbedder(svc.url(), 4).models();
    ASSERT_EQ(models.size(), 1u);
    EXPECT_EQ(models[0].name, "ref");
    EXPECT_EQ(models[0].dim, 16u);
}

TEST(Remote, EmbedsInOrderAcrossBatches)
{
    MockService svc;
    const Document doc = five_sentences();
    const EmbeddingMatrix m = RemoteEmbedder(svc.url(), 2).embed(doc, ModelId("ref"));
    EXPECT_EQ(svc.requests.load(), 3);
    EXPECT_EQ(svc.max_batch.load(), 2u);
    ASSERT_EQ(m.n(), 5u);
    ASSERT_EQ(m.d(), 16u);
    for (std::size_t i = 0; i < 5; ++i) {
        const auto expect = reference_embed(doc.sentences[i].text, 16);
        for (std::size_t k = 0; k < 16; ++k) EXPECT_NEAR(m.row(i)[k], expect[k], 1e-6);
    }
}

TEST(Remote, ThroughProviderDispatch)
{
    MockService svc;
    ProviderConfig cfg{ProviderKind::remote, svc.url(), 64, 3};
    const EmbeddingMatrix m = embed_document(cfg, five_sentences(), ModelId("ref"));
    EXPECT_EQ(m.n(), 5u);
    EXPECT_EQ(m.model().str(), "ref");
}

TEST(Remote, ErrorsSurface)
{
    MockService svc;
    EXPECT_NE(error_of(svc.url(), "short").find("row count mismatch"), std::string::npos);
    EXPECT_NE(error_of(svc.url(), "ragged").find("dimension mismatch"), std::string::npos);
    EXPECT_NE(error_of(svc.url(), "liar").find("dimension mismatch"), std::string::npos);
    EXPECT_NE(error_of(svc.url(), "zero").find("zero vector"), std::string::npos);
    const std::string missing = error_of(svc.url(), "missing");
    EXPECT_NE(missing.find("404"), std::string::npos);
    EXPECT_NE(missing.find("unknown model missing"), std::string::npos);
    EXPECT_NE(error_of(svc.url(), "boom").find("inference failed"), std::string::npos);
}

TEST(Remote, DimensionChangeWithinBatch)
{
    MockService svc;
    EXPECT_NE(error_of(svc.url(), "ragged", 2).find("dimension mismatch"), std::string::npos);
}

TEST(Remote, Unreachable)
{
    // Nothing listens on port 1 in the test environment.
    EXPECT_NE(error_of("http://127.0.0.1:1", "ref").find("provider unreachable"), std::string::npos);
}

TEST(Remote, InvalidConfig)
{
    EXPECT_THROW(RemoteEmbedder("http://127.0.0.1:1", 0), Error);
}
