#pragma once

#include "semvar/corpus.hpp"
#include "semvar/embedding.hpp"
#include "semvar/remote.hpp"

namespace semvar {

/// Produces the embedding matrix for `doc` under `model`; row i is sentence i.
inline EmbeddingMatrix embed_document(const ProviderConfig& provider, const Document& doc, const ModelId& model)
{
    provider.validate();
    if (doc.sentences.empty()) throw Error("document has no sentences");
    switch (provider.kind) {
    case ProviderKind::reference: return embed_with_reference(doc, model, provider.dim);
    case ProviderKind::file: return embed_from_file(doc, model, provider.location);
    case ProviderKind::remote: return RemoteEmbedder(provider.location, provider.batch_size).embed(doc, model);
    }
    throw Error("unknown provider kind");
}

} // namespace semvar
