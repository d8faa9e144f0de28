#pragma once

// Client side of the embedding-service wire protocol:
//   POST /embed  {"model": name, "sentences": [...]}
//             -> {"model": name, "dim": D, "vectors": [[...], ...]}
//   GET /models -> {"models": [{"name": ..., "dim": D}, ...]}
// Errors come back as non-200 with {"error": "..."}.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "semvar/corpus.hpp"
#include "semvar/embedding.hpp"
#include "semvar/error.hpp"

namespace semvar {

struct RemoteModelInfo {
    std::string name;
    std::size_t dim = 0;
};

class RemoteEmbedder {
public:
    RemoteEmbedder(std::string base_url, std::size_t batch_size)
        : base_url_(std::move(base_url)), batch_size_(batch_size), client_(base_url_)
    {
        if (batch_size_ < 1) throw Error("batch_size must be >= 1");
        if (!client_.is_valid()) throw Error("invalid provider URL: " + base_url_);
        client_.set_connection_timeout(10);
        client_.set_read_timeout(600);
        client_.set_write_timeout(60);
    }

    std::vector<RemoteModelInfo> models()
    {
        const nlohmann::json body = get_json("/models");
        std::vector<RemoteModelInfo> out;
        try {
            for (const auto& entry : body.at("models")) {
                out.push_back({entry.at("name").get<std::string>(), entry.at("dim").get<std::size_t>()});
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error(std::string("malformed /models response: ") + e.what());
        }
        return out;
    }

    /// Sends the sentences in order, batch_size at a time, and stacks the
    /// returned vectors.
    EmbeddingMatrix embed(const Document& doc, const ModelId& model)
    {
        std::vector<float> values;
        std::size_t dim = 0;
        for (std::size_t begin = 0; begin < doc.size(); begin += batch_size_) {
            const std::size_t end = std::min(doc.size(), begin + batch_size_);
            nlohmann::json request = {{"model", model.str()}, {"sentences", nlohmann::json::array()}};
            for (std::size_t i = begin; i < end; ++i) request["sentences"].push_back(doc.sentences[i].text);
            const nlohmann::json reply = post_json("/embed", request);

            const nlohmann::json* vectors = nullptr;
            try {
                vectors = &reply.at("vectors");
            } catch (const nlohmann::json::exception&) {
                throw Error("malformed /embed response: missing vectors");
            }
            if (!vectors->is_array() || vectors->size() != end - begin) {
                throw Error("row count mismatch: requested " + std::to_string(end - begin) + " vectors, got " +
                            std::to_string(vectors->is_array() ? vectors->size() : 0));
            }
            if (reply.contains("dim") && reply["dim"].is_number_unsigned() && !vectors->empty() &&
                (*vectors)[0].is_array() && reply["dim"].get<std::size_t>() != (*vectors)[0].size()) {
                throw Error("dimension mismatch: response declares dim " + reply["dim"].dump() + " but sends " +
                            std::to_string((*vectors)[0].size()));
            }
            for (const auto& row : *vectors) {
                if (!row.is_array() || row.empty()) throw Error("malformed /embed response: bad vector");
                if (dim == 0) dim = row.size();
                if (row.size() != dim) {
                    throw Error("dimension mismatch: expected " + std::to_string(dim) + ", got " +
                                std::to_string(row.size()));
                }
                bool nonzero = false;
                for (const auto& x : row) {
                    if (!x.is_number()) throw Error("malformed /embed response: non-numeric entry");
                    const float v = static_cast<float>(x.get<double>());
                    nonzero = nonzero || v != 0.0f;
                    values.push_back(v);
                }
                if (!nonzero) throw Error("zero vector returned for sentence " +
                                          std::to_string(values.size() / dim - 1));
            }
        }
        return EmbeddingMatrix(model, doc.id, doc.size(), dim, std::move(values));
    }

private:
    static std::string error_text(const httplib::Result& res)
    {
        try {
            const auto body = nlohmann::json::parse(res->body);
            if (body.contains("error")) return body["error"].get<std::string>();
        } catch (const std::exception&) {
        }
        return res->body;
    }

    nlohmann::json check(const httplib::Result& res, const char* path)
    {
        if (!res) {
            throw Error("provider unreachable: " + base_url_ + " (" + httplib::to_string(res.error()) + ")");
        }
        if (res->status != 200) {
            throw Error(std::string(path) + " returned " + std::to_string(res->status) + ": " + error_text(res));
        }
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw Error(std::string("malformed JSON from ") + path + ": " + e.what());
        }
    }

    nlohmann::json get_json(const char* path) { return check(client_.Get(path), path); }

    nlohmann::json post_json(const char* path, const nlohmann::json& body)
    {
        return check(client_.Post(path, body.dump(), "application/json"), path);
    }

    std::string base_url_;
    std::size_t batch_size_;
    httplib::Client client_;
};

} // namespace semvar
