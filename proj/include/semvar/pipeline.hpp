#pragma once

// End-to-end corpus runs: ingest -> embed -> ssm -> compare -> novelty ->
// render, with per-stage content-hash stamps so unchanged work is skipped.
//
// Artifact tree under cache_dir:
//   <doc>/document.tsv
//   <doc>/<model>/embeddings.semv ssm.semv zssm.semv series.csv ssm.<ext>
//   <doc>/correlation.csv paf.csv naf.csv ddaf.csv (+ .svg/.ppm) timeseries.<ext>
//   <doc>/novelty.csv novelty.json
//   mean_correlation.csv mean_correlation.<ext>
//   <doc>/.stamps/*.key   (cache keys)

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <toml.hpp>

#include "semvar/compare.hpp"
#include "semvar/corpus.hpp"
#include "semvar/embedding.hpp"
#include "semvar/error.hpp"
#include "semvar/hash.hpp"
#include "semvar/io.hpp"
#include "semvar/log.hpp"
#include "semvar/novelty.hpp"
#include "semvar/providers.hpp"
#include "semvar/render.hpp"
#include "semvar/ssm.hpp"

namespace semvar {

enum class CorrelateMode { timeseries, full_ssm };

inline std::string_view to_string(CorrelateMode m) noexcept
{
    return m == CorrelateMode::timeseries ? "timeseries" : "full-ssm";
}

inline CorrelateMode parse_correlate_mode(std::string_view s)
{
    if (s == "timeseries") return CorrelateMode::timeseries;
    if (s == "full-ssm") return CorrelateMode::full_ssm;
    throw Error("unknown correlate mode (timeseries|full-ssm): " + std::string(s));
}

struct ProviderEntry {
    ModelId model;
    ProviderConfig config;
};

/// Parses "name=kind:location".
inline ProviderEntry parse_provider_entry(std::string_view text)
{
    const std::size_t eq = text.find('=');
    if (eq == std::string_view::npos) throw Error("provider must look like name=kind:location: " + std::string(text));
    return {ModelId(std::string(text.substr(0, eq))), parse_provider_spec(text.substr(eq + 1))};
}

struct NoveltyParams {
    double q = 0.05;
    std::optional<std::size_t> k; // default: ceil(M / 2)
};

struct PipelineConfig {
    std::vector<std::filesystem::path> documents;
    std::vector<ProviderEntry> providers;
    std::filesystem::path cache_dir = "semvar-out";
    bool strip_boilerplate = true;
    bool standardize_include_diagonal = false;
    CorrelateMode correlate_mode = CorrelateMode::timeseries;
    NoveltyParams novelty;
    RenderSpec render;
    std::string matrix_format = "svg"; // model matrices and time series
    std::string ssm_format = "ppm";    // per-model SSM heatmaps
    unsigned jobs = 0;                 // 0 = logical CPUs

    std::size_t min_agreement() const { return novelty.k.value_or(default_min_agreement(providers.size())); }

    void validate() const
    {
        if (documents.empty()) throw Error("config needs at least one document");
        if (providers.empty()) throw Error("config needs at least one provider");
        std::set<std::string> names;
        for (const ProviderEntry& p : providers) {
            const std::string& name = p.model.str();
            if (!names.insert(name).second) throw Error("duplicate model name " + name);
            if (name == "." || name == ".." || name.find('/') != std::string::npos || name.find('\\') != std::string::npos) {
                throw Error("model name cannot be used as a directory: " + name);
            }
            p.config.validate();
        }
        if (!(novelty.q > 0.0 && novelty.q < 1.0)) throw Error("novelty q must lie in (0, 1)");
        const std::size_t k = min_agreement();
        if (k < 1 || k > providers.size()) throw Error("novelty k must lie in [1, number of models]");
        render.validate();
        for (const std::string* f : {&matrix_format, &ssm_format}) {
            if (*f != "svg" && *f != "ppm") throw Error("image format must be svg or ppm: " + *f);
        }
    }
};

/// Reads a TOML pipeline config. Relative paths resolve against the
/// config file's directory.
inline PipelineConfig load_pipeline_config(const std::filesystem::path& path)
{
    toml::table root;
    try {
        root = toml::parse_file(path.string());
    } catch (const toml::parse_error& e) {
        throw Error("config " + path.string() + ": " + std::string(e.description()));
    }
    const std::filesystem::path base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    auto resolve = [&base](const std::string& p) {
        const std::filesystem::path fp(p);
        return fp.is_absolute() ? fp : base / fp;
    };

    PipelineConfig cfg;
    if (const toml::array* docs = root["documents"].as_array()) {
        for (const toml::node& d : *docs) {
            const auto s = d.value<std::string>();
            if (!s) throw Error("documents must be strings");
            cfg.documents.push_back(resolve(*s));
        }
    }
    if (auto dir = root["cache_dir"].value<std::string>()) cfg.cache_dir = resolve(*dir);
    cfg.strip_boilerplate = root["strip_boilerplate"].value_or(cfg.strip_boilerplate);
    cfg.standardize_include_diagonal = root["include_diagonal"].value_or(cfg.standardize_include_diagonal);
    if (auto mode = root["correlate"].value<std::string>()) cfg.correlate_mode = parse_correlate_mode(*mode);
    if (auto jobs = root["jobs"].value<std::int64_t>()) {
        if (*jobs < 0) throw Error("jobs must be >= 0");
        cfg.jobs = static_cast<unsigned>(*jobs);
    }

    cfg.novelty.q = root["novelty"]["q"].value_or(cfg.novelty.q);
    if (auto k = root["novelty"]["k"].value<std::int64_t>()) {
        if (*k < 1) throw Error("novelty k must be >= 1");
        cfg.novelty.k = static_cast<std::size_t>(*k);
    }

    if (auto p = root["render"]["palette"].value<std::string>()) cfg.render.palette = parse_palette(*p);
    cfg.render.width = static_cast<int>(root["render"]["width"].value_or(std::int64_t{cfg.render.width}));
    cfg.render.height = static_cast<int>(root["render"]["height"].value_or(std::int64_t{cfg.render.height}));
    cfg.render.downsample = static_cast<int>(root["render"]["downsample"].value_or(std::int64_t{cfg.render.downsample}));
    cfg.render.title = root["render"]["title"].value_or(cfg.render.title);
    cfg.matrix_format = root["render"]["matrix_format"].value_or(cfg.matrix_format);
    cfg.ssm_format = root["render"]["ssm_format"].value_or(cfg.ssm_format);

    if (const toml::array* providers = root["provider"].as_array()) {
        for (const toml::node& node : *providers) {
            const toml::table* t = node.as_table();
            if (t == nullptr) throw Error("[[provider]] entries must be tables");
            const auto name = (*t)["name"].value<std::string>();
            const auto kind = (*t)["kind"].value<std::string>();
            if (!name || !kind) throw Error("[[provider]] needs name and kind");
            ProviderConfig pc;
            pc.kind = parse_provider_kind(*kind);
            pc.location = (*t)["location"].value_or(std::string{});
            if (pc.kind == ProviderKind::file && !pc.location.empty()) pc.location = resolve(pc.location).string();
            const auto dim = (*t)["dim"].value_or(std::int64_t{64});
            const auto batch = (*t)["batch_size"].value_or(std::int64_t{32});
            if (dim < 0 || batch < 0) throw Error("dim and batch_size must be non-negative");
            pc.dim = static_cast<std::size_t>(dim);
            pc.batch_size = static_cast<std::size_t>(batch);
            cfg.providers.push_back({ModelId(*name), pc});
        }
    }
    return cfg;
}

// ---- run --------------------------------------------------------------------------

struct StageEvent {
    std::string stage;
    std::string doc;
    std::string model; // empty for document-level stages
    bool cached = false;
};

struct PipelineResult {
    int exit_code = 0;
    std::vector<std::string> failed_documents;
    std::vector<StageEvent> events;

    std::size_t computed_count() const
    {
        return static_cast<std::size_t>(std::count_if(events.begin(), events.end(), [](const StageEvent& e) { return !e.cached; }));
    }
};

namespace detail {

namespace fs = std::filesystem;

/// Skips `produce` when the stamp holds `key` and every output exists.
class StageRunner {
public:
    StageRunner(fs::path stamp_dir, std::string doc, Logger& log, std::vector<StageEvent>& events, std::mutex& events_mutex)
        : stamp_dir_(std::move(stamp_dir)), doc_(std::move(doc)), log_(log), events_(events), events_mutex_(events_mutex)
    {
    }

    template <typename Produce>
    bool run(const std::string& stage, const std::string& model, const std::string& key,
             const std::vector<fs::path>& outputs, Produce&& produce)
    {
        current_stage = stage;
        const fs::path stamp = stamp_dir_ / (model.empty() ? stage + ".key" : stage + "." + model + ".key");
        bool cached = fs::exists(stamp) &&
                      std::all_of(outputs.begin(), outputs.end(), [](const fs::path& p) { return fs::exists(p); });
        if (cached) cached = read_file(stamp) == key;
        if (!cached) {
            produce();
            write_file_atomic(stamp, key);
        }
        log_.info(stage, doc_, (model.empty() ? std::string() : model + ": ") + (cached ? "cached" : "computed"));
        std::lock_guard lock(events_mutex_);
        events_.push_back({stage, doc_, model, cached});
        return cached;
    }

    std::string current_stage = "ingest";

private:
    fs::path stamp_dir_;
    std::string doc_;
    Logger& log_;
    std::vector<StageEvent>& events_;
    std::mutex& events_mutex_;
};

inline std::string ext(const std::string& format) { return "." + format; }

inline RenderSpec titled(const RenderSpec& spec, const std::string& fallback)
{
    RenderSpec out = spec;
    if (out.title.empty()) out.title = fallback;
    return out;
}

inline void render_key_fields(ContentHasher& h, const RenderSpec& spec, const std::string& format)
{
    h.add(to_string(spec.palette)).add(std::to_string(spec.width)).add(std::to_string(spec.height));
    h.add(std::to_string(spec.downsample)).add(spec.title).add(format);
}

struct ModelArtifacts {
    fs::path dir;
    std::string z_key;
    std::optional<StandardizedSSM> z;
    std::optional<TimeSeries> series;

    const StandardizedSSM& standardized()
    {
        if (!z) z = read_standardized_ssm(dir / "zssm.semv");
        return *z;
    }

    const TimeSeries& time_series()
    {
        if (!series) {
            const StandardizedSSM& zz = standardized();
            series = successive_series(zz);
        }
        return *series;
    }
};

struct DocumentOutcome {
    bool ok = false;
    std::string doc_id;
    std::string correlation_key;
    std::optional<ModelMatrix> correlation;
};

inline DocumentOutcome run_document(const PipelineConfig& cfg, const fs::path& source, const std::string& doc_id,
                                    unsigned ssm_workers, Logger& log, std::vector<StageEvent>& events,
                                    std::mutex& events_mutex)
{
    DocumentOutcome outcome;
    outcome.doc_id = doc_id;
    const fs::path doc_dir = cfg.cache_dir / doc_id;
    StageRunner stages(doc_dir / ".stamps", doc_id, log, events, events_mutex);
    try {
        // ingest
        const std::string raw = read_file(source);
        const std::string doc_key =
            ContentHasher().add("ingest/1").add(raw).add(cfg.strip_boilerplate ? "strip" : "keep").hex();
        const fs::path doc_path = doc_dir / "document.tsv";
        std::optional<Document> doc;
        stages.run("ingest", "", doc_key, {doc_path}, [&] {
            doc = raw.starts_with("#doc ") ? load_any_document(source, cfg.strip_boilerplate)
                                           : detail::document_from_raw(source, raw, cfg.strip_boilerplate);
            doc->id = doc_id;
            write_file_atomic(doc_path, serialize_document(*doc));
        });
        if (!doc) {
            std::istringstream in(read_file(doc_path));
            doc = read_document(in, source.string());
        }
        if (doc->size() < 3) throw Error("document needs at least 3 sentences, has " + std::to_string(doc->size()));

        std::vector<ModelArtifacts> models;
        for (const ProviderEntry& p : cfg.providers) {
            const std::string& name = p.model.str();
            ModelArtifacts art;
            art.dir = doc_dir / name;

            ContentHasher eh;
            eh.add("embed/1").add(doc_key).add(name).add(to_string(p.config.kind)).add(p.config.location);
            eh.add(std::to_string(p.config.dim)).add(std::to_string(p.config.batch_size));
            if (p.config.kind == ProviderKind::file) {
                fs::path f = p.config.location;
                if (fs::is_directory(f)) f /= doc_id + ".semv";
                eh.add(read_file(f));
            }
            const std::string embed_key = eh.hex();
            std::optional<EmbeddingMatrix> emb;
            stages.run("embed", name, embed_key, {art.dir / "embeddings.semv"}, [&] {
                emb = embed_document(p.config, *doc, p.model);
                write_embeddings(*emb, art.dir / "embeddings.semv");
            });

            const std::string ssm_key = ContentHasher().add("ssm/1").add(embed_key).hex();
            std::optional<SSM> ssm;
            stages.run("ssm", name, ssm_key, {art.dir / "ssm.semv"}, [&] {
                if (!emb) emb = read_embeddings(art.dir / "embeddings.semv");
                ssm = build_ssm(*emb, ssm_workers);
                write_ssm(*ssm, art.dir / "ssm.semv");
            });
            emb.reset();

            art.z_key = ContentHasher()
                            .add("standardize/1")
                            .add(ssm_key)
                            .add(cfg.standardize_include_diagonal ? "diag" : "strict-upper")
                            .hex();
            stages.run("standardize", name, art.z_key, {art.dir / "zssm.semv", art.dir / "series.csv"}, [&] {
                if (!ssm) ssm = read_ssm(art.dir / "ssm.semv");
                art.z = standardize(*ssm, cfg.standardize_include_diagonal);
                write_ssm(*art.z, art.dir / "zssm.semv");
                art.series = successive_series(*art.z);
                write_file_atomic(art.dir / "series.csv", series_csv(*art.series));
            });
            ssm.reset();

            ContentHasher rh;
            rh.add("render-ssm/1").add(art.z_key);
            render_key_fields(rh, cfg.render, cfg.ssm_format);
            const fs::path ssm_img = art.dir / ("ssm" + ext(cfg.ssm_format));
            stages.run("render-ssm", name, rh.hex(), {ssm_img}, [&] {
                render_heatmap(art.standardized(), titled(cfg.render, doc_id + " " + name), ssm_img);
            });
            models.push_back(std::move(art));
        }

        // compare
        ContentHasher zh;
        for (const ModelArtifacts& a : models) zh.add(a.z_key);
        const std::string z_all = zh.hex();
        outcome.correlation_key = ContentHasher().add("compare/1").add(z_all).add(to_string(cfg.correlate_mode)).hex();
        const fs::path corr_csv = doc_dir / "correlation.csv";
        if (models.size() >= 2) {
            // Time-series Pearson needs at least 3 transitions.
            const bool correlate = cfg.correlate_mode == CorrelateMode::full_ssm || doc->size() >= 4;
            if (correlate) {
                stages.run("compare", "", outcome.correlation_key, {corr_csv}, [&] {
                    std::vector<StandardizedSSM> zs;
                    std::vector<TimeSeries> series;
                    for (ModelArtifacts& a : models) {
                        if (cfg.correlate_mode == CorrelateMode::full_ssm) zs.push_back(a.standardized());
                        else series.push_back(a.time_series());
                    }
                    const ModelMatrix m = cfg.correlate_mode == CorrelateMode::full_ssm ? full_ssm_correlation_map(zs)
                                                                                        : correlation_map(series);
                    write_file_atomic(corr_csv, model_matrix_csv(m));
                });
                // Reloaded even when just computed so the corpus mean sees the
                // same rounded values on fresh and cached runs.
                std::istringstream corr_in(read_file(corr_csv));
                outcome.correlation = read_model_matrix_csv(corr_in);
            } else {
                log.warn("compare", doc_id, "fewer than 4 sentences: correlation map skipped");
                fs::remove(corr_csv);
                fs::remove(doc_dir / ("correlation" + ext(cfg.matrix_format)));
            }

            const std::string agree_key = ContentHasher().add("agreement/1").add(z_all).hex();
            const std::vector<fs::path> agree_outputs = {doc_dir / "paf.csv", doc_dir / "naf.csv", doc_dir / "ddaf.csv"};
            stages.run("agreement", "", agree_key, agree_outputs, [&] {
                std::vector<StandardizedSSM> zs;
                for (ModelArtifacts& a : models) zs.push_back(a.standardized());
                const AgreementMatrices am = agreement_matrices(zs);
                write_file_atomic(agree_outputs[0], model_matrix_csv(am.paf));
                write_file_atomic(agree_outputs[1], model_matrix_csv(am.naf));
                write_file_atomic(agree_outputs[2], model_matrix_csv(am.ddaf));
            });

            std::vector<std::string> kinds = {"paf", "naf", "ddaf"};
            if (correlate) kinds.insert(kinds.begin(), "correlation");
            ContentHasher mh;
            mh.add("render-matrices/1").add(correlate ? outcome.correlation_key : "none").add(agree_key);
            render_key_fields(mh, cfg.render, cfg.matrix_format);
            std::vector<fs::path> images;
            for (const std::string& kind : kinds) images.push_back(doc_dir / (kind + ext(cfg.matrix_format)));
            stages.run("render-matrices", "", mh.hex(), images, [&] {
                for (std::size_t k = 0; k < kinds.size(); ++k) {
                    std::istringstream in(read_file(doc_dir / (kinds[k] + ".csv")));
                    const ModelMatrix m = read_model_matrix_csv(in);
                    render_heatmap(m, titled(cfg.render, doc_id + " " + kinds[k]), images[k]);
                }
            });
        } else {
            log.warn("compare", doc_id, "single model: correlation and agreement maps skipped");
        }

        ContentHasher th;
        th.add("render-timeseries/1").add(z_all);
        render_key_fields(th, cfg.render, cfg.matrix_format);
        const fs::path ts_img = doc_dir / ("timeseries" + ext(cfg.matrix_format));
        stages.run("render-timeseries", "", th.hex(), {ts_img}, [&] {
            std::vector<TimeSeries> series;
            for (ModelArtifacts& a : models) series.push_back(a.time_series());
            RenderSpec spec = titled(cfg.render, doc_id + " successive similarity");
            spec.height = std::max(spec.height, 120 * static_cast<int>(series.size()) / 2);
            render_timeseries(series, spec, ts_img);
        });

        // novelty
        const std::size_t k = cfg.min_agreement();
        const std::string novelty_key = ContentHasher()
                                            .add("novelty/1")
                                            .add(z_all)
                                            .add(doc_key)
                                            .add(format_shortest(cfg.novelty.q))
                                            .add(std::to_string(k))
                                            .hex();
        stages.run("novelty", "", novelty_key, {doc_dir / "novelty.csv", doc_dir / "novelty.json"}, [&] {
            std::vector<StandardizedSSM> zs;
            for (ModelArtifacts& a : models) zs.push_back(a.standardized());
            const NoveltyReport report = novelty_report(zs, cfg.novelty.q, k);
            write_file_atomic(doc_dir / "novelty.csv", novelty_csv(report, *doc));
            write_file_atomic(doc_dir / "novelty.json", novelty_json(report, *doc).dump(2) + "\n");
        });
        outcome.ok = true;
    } catch (const std::exception& e) {
        log.error(stages.current_stage, doc_id, e.what());
    }
    return outcome;
}

} // namespace detail

/// Runs every document through every provider. A failing document is logged
/// and skipped; the exit code is nonzero if any document failed.
inline PipelineResult run_pipeline(const PipelineConfig& cfg, Logger& log)
{
    cfg.validate();
    PipelineResult result;
    std::vector<std::string> ids;
    std::set<std::string> seen;
    for (const auto& path : cfg.documents) {
        std::string id = detail::sanitize_id(path.stem().string());
        if (!seen.insert(id).second) throw Error("two documents share the id " + id);
        ids.push_back(std::move(id));
    }
    std::filesystem::create_directories(cfg.cache_dir);

    const unsigned jobs = static_cast<unsigned>(
        std::min<std::size_t>(detail::resolve_workers(cfg.jobs), cfg.documents.size()));
    const unsigned ssm_workers = std::max(1u, detail::resolve_workers(0) / std::max(1u, jobs));
    std::vector<detail::DocumentOutcome> outcomes(cfg.documents.size());
    std::mutex events_mutex;
    detail::parallel_tasks(cfg.documents.size(), jobs, [&](std::size_t d) {
        outcomes[d] = detail::run_document(cfg, cfg.documents[d], ids[d], ssm_workers, log, result.events, events_mutex);
    });

    std::vector<ModelMatrix> maps;
    ContentHasher mean_hash;
    mean_hash.add("mean/1");
    for (const detail::DocumentOutcome& o : outcomes) {
        if (!o.ok) {
            result.failed_documents.push_back(o.doc_id);
            continue;
        }
        if (o.correlation) {
            maps.push_back(*o.correlation);
            mean_hash.add(o.doc_id).add(o.correlation_key);
        }
    }
    if (!maps.empty()) {
        detail::render_key_fields(mean_hash, cfg.render, cfg.matrix_format);
        const auto csv = cfg.cache_dir / "mean_correlation.csv";
        const auto img = cfg.cache_dir / ("mean_correlation" + detail::ext(cfg.matrix_format));
        detail::StageRunner stages(cfg.cache_dir / ".stamps", std::string(mean_doc_id), log, result.events, events_mutex);
        try {
            stages.run("mean-correlation", "", mean_hash.hex(), {csv, img}, [&] {
                const ModelMatrix mean = mean_correlation_map(maps);
                write_file_atomic(csv, model_matrix_csv(mean));
                render_heatmap(mean, detail::titled(cfg.render, "mean correlation (" + std::to_string(maps.size()) + " documents)"), img);
            });
        } catch (const std::exception& e) {
            log.error("mean-correlation", std::string(mean_doc_id), e.what());
            result.exit_code = 1;
        }
    }
    if (!result.failed_documents.empty()) result.exit_code = 1;
    return result;
}

} // namespace semvar
