// semvar command-line front end. Subcommands mirror the library modules.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "semvar/compare.hpp"
#include "semvar/corpus.hpp"
#include "semvar/embedding.hpp"
#include "semvar/log.hpp"
#include "semvar/novelty.hpp"
#include "semvar/pipeline.hpp"
#include "semvar/providers.hpp"
#include "semvar/render.hpp"
#include "semvar/ssm.hpp"

namespace fs = std::filesystem;
using namespace semvar;

namespace {

void add_render_options(CLI::App* cmd, RenderSpec& spec, std::string& palette)
{
    cmd->add_option("--palette", palette, "grayscale or viridis")->check(CLI::IsMember({"grayscale", "viridis"}));
    cmd->add_option("--width", spec.width, "image width in pixels");
    cmd->add_option("--height", spec.height, "image height in pixels");
    cmd->add_option("--downsample", spec.downsample, "max cells per side before block averaging");
    cmd->add_option("--title", spec.title, "title drawn above the plot");
}

bool is_series_csv(const fs::path& path)
{
    std::istringstream in(read_file(path));
    std::string first;
    std::getline(in, first);
    if (!first.empty() && first.back() == '\r') first.pop_back();
    return first == "index,z";
}

ModelMatrix read_matrix_file(const fs::path& path)
{
    std::istringstream in(read_file(path));
    return read_model_matrix_csv(in);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"semvar: semantic variation of documents across sentence-embedding models"};
    app.require_subcommand(1);
    Logger log(&std::cerr);

    // ingest
    fs::path ingest_in, ingest_out;
    bool ingest_keep = false;
    auto* ingest = app.add_subcommand("ingest", "segment a UTF-8 text into sentences");
    ingest->add_option("input", ingest_in, "plain-text file")->required();
    ingest->add_option("-o,--out", ingest_out, "document TSV (default: stdout)");
    ingest->add_flag("--keep-boilerplate", ingest_keep, "do not strip Gutenberg header/footer");

    // embed
    fs::path embed_in, embed_out;
    std::string embed_provider, embed_model;
    auto* embed = app.add_subcommand("embed", "embed a document with one provider");
    embed->add_option("input", embed_in, "document TSV or plain text")->required();
    embed->add_option("--provider", embed_provider, "kind:location, e.g. reference:64 or remote:http://host:port")
        ->required();
    embed->add_option("--model", embed_model, "model name")->required();
    embed->add_option("-o,--out", embed_out, "SEMV1 embedding file")->required();

    // ssm
    fs::path ssm_in, ssm_out, ssm_series;
    bool ssm_standardize = false, ssm_diag = false;
    unsigned ssm_jobs = 0;
    auto* ssm = app.add_subcommand("ssm", "build the cosine similarity matrix");
    ssm->add_option("input", ssm_in, "SEMV1 embedding file")->required();
    ssm->add_option("-o,--out", ssm_out, "SEMV1 similarity file")->required();
    ssm->add_flag("--standardize", ssm_standardize, "write z-scores instead of raw cosines");
    ssm->add_flag("--include-diagonal", ssm_diag, "standardize over all N^2 entries");
    ssm->add_option("--series", ssm_series, "also write the successive-sentence series CSV");
    ssm->add_option("--jobs", ssm_jobs, "worker threads (0 = logical CPUs)");

    // compare
    std::vector<fs::path> cmp_in;
    fs::path cmp_out, cmp_agreement;
    std::string cmp_mode = "timeseries";
    bool cmp_mean = false;
    auto* compare = app.add_subcommand("compare", "correlation and agreement maps across models");
    compare->add_option("inputs", cmp_in, "standardized SSMs of one document, or correlation CSVs with --mean")
        ->required();
    compare->add_option("-o,--out", cmp_out, "correlation CSV (default: stdout)");
    compare->add_option("--correlate", cmp_mode, "timeseries or full-ssm")
        ->check(CLI::IsMember({"timeseries", "full-ssm"}));
    compare->add_option("--agreement", cmp_agreement, "directory for paf.csv, naf.csv, ddaf.csv");
    compare->add_flag("--mean", cmp_mean, "average per-document correlation CSVs");

    // novelty
    fs::path nov_doc, nov_out, nov_json;
    std::vector<fs::path> nov_in;
    double nov_q = 0.05;
    std::optional<std::size_t> nov_k;
    auto* novelty = app.add_subcommand("novelty", "flag sentences that several models find novel");
    novelty->add_option("--document", nov_doc, "document TSV for excerpts")->required();
    novelty->add_option("inputs", nov_in, "standardized SSMs, one per model")->required();
    novelty->add_option("--q", nov_q, "quantile threshold");
    novelty->add_option("--k", nov_k, "minimum number of agreeing models (default ceil(M/2))");
    novelty->add_option("-o,--out", nov_out, "novelty CSV (default: stdout)");
    novelty->add_option("--json", nov_json, "also write a JSON report");

    // render
    std::vector<fs::path> ren_in;
    fs::path ren_out;
    RenderSpec ren_spec;
    std::string ren_palette = "viridis";
    auto* render = app.add_subcommand("render", "draw a heatmap or time-series plot (.svg or .ppm)");
    render->add_option("inputs", ren_in, "SEMV1 similarity file, model-matrix CSV, or series CSVs")->required();
    render->add_option("-o,--out", ren_out, "output image")->required();
    add_render_options(render, ren_spec, ren_palette);

    // pipeline
    fs::path pipe_config, pipe_out;
    std::optional<unsigned> pipe_jobs;
    std::vector<std::string> pipe_providers;
    std::vector<fs::path> pipe_docs;
    bool pipe_diag = false;
    std::optional<std::string> pipe_mode;
    std::optional<double> pipe_q;
    std::optional<std::size_t> pipe_k;
    auto* pipeline = app.add_subcommand("pipeline", "run every stage over a corpus with caching");
    pipeline->add_option("--config", pipe_config, "TOML config file");
    pipeline->add_option("--jobs", pipe_jobs, "documents processed in parallel (0 = logical CPUs)");
    pipeline->add_option("--provider", pipe_providers, "name=kind:location (repeatable, replaces config providers)");
    pipeline->add_option("--document", pipe_docs, "input text (repeatable, replaces config documents)");
    pipeline->add_flag("--include-diagonal", pipe_diag, "standardize over all N^2 entries");
    pipeline->add_option("--correlate", pipe_mode, "timeseries or full-ssm")
        ->check(CLI::IsMember({"timeseries", "full-ssm"}));
    pipeline->add_option("--novelty-q", pipe_q, "novelty quantile threshold");
    pipeline->add_option("--novelty-k", pipe_k, "minimum agreeing models");
    pipeline->add_option("--out", pipe_out, "artifact directory (overrides SEMVAR_CACHE and cache_dir)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (ingest->parsed()) {
            Document doc = load_document(ingest_in, !ingest_keep);
            const DocumentStats st = corpus_stats(doc);
            if (ingest_out.empty()) {
                write_document(std::cout, doc);
            } else {
                write_file_atomic(ingest_out, serialize_document(doc));
            }
            log.info("ingest", doc.id,
                     std::to_string(st.sentence_count) + " sentences, " + std::to_string(st.token_count) + " tokens");
            return 0;
        }
        if (embed->parsed()) {
            const Document doc = load_any_document(embed_in);
            const ModelId model(embed_model);
            const EmbeddingMatrix m = embed_document(parse_provider_spec(embed_provider), doc, model);
            write_embeddings(m, embed_out);
            log.info("embed", doc.id, model.str() + ": " + std::to_string(m.n()) + "x" + std::to_string(m.d()));
            return 0;
        }
        if (ssm->parsed()) {
            const EmbeddingMatrix m = read_embeddings(ssm_in);
            const SSM s = build_ssm(m, ssm_jobs);
            if (ssm_standardize || !ssm_series.empty()) {
                const StandardizedSSM z = standardize(s, ssm_diag);
                if (ssm_standardize) write_ssm(z, ssm_out);
                else write_ssm(s, ssm_out);
                if (!ssm_series.empty()) write_file_atomic(ssm_series, series_csv(successive_series(z)));
            } else {
                write_ssm(s, ssm_out);
            }
            log.info("ssm", m.doc_id(), m.model().str() + ": n=" + std::to_string(m.n()));
            return 0;
        }
        if (compare->parsed()) {
            ModelMatrix result;
            if (cmp_mean) {
                std::vector<ModelMatrix> maps;
                for (const fs::path& p : cmp_in) maps.push_back(read_matrix_file(p));
                result = mean_correlation_map(maps);
            } else {
                std::vector<StandardizedSSM> zs;
                for (const fs::path& p : cmp_in) zs.push_back(read_standardized_ssm(p));
                if (parse_correlate_mode(cmp_mode) == CorrelateMode::full_ssm) {
                    result = full_ssm_correlation_map(zs);
                } else {
                    std::vector<TimeSeries> series;
                    for (const StandardizedSSM& z : zs) series.push_back(successive_series(z));
                    result = correlation_map(series);
                }
                if (!cmp_agreement.empty()) {
                    const AgreementMatrices am = agreement_matrices(zs);
                    write_file_atomic(cmp_agreement / "paf.csv", model_matrix_csv(am.paf));
                    write_file_atomic(cmp_agreement / "naf.csv", model_matrix_csv(am.naf));
                    write_file_atomic(cmp_agreement / "ddaf.csv", model_matrix_csv(am.ddaf));
                }
            }
            if (cmp_out.empty()) write_model_matrix_csv(std::cout, result);
            else write_file_atomic(cmp_out, model_matrix_csv(result));
            return 0;
        }
        if (novelty->parsed()) {
            const Document doc = load_any_document(nov_doc);
            std::vector<StandardizedSSM> zs;
            for (const fs::path& p : nov_in) zs.push_back(read_standardized_ssm(p));
            const NoveltyReport r = novelty_report(zs, nov_q, nov_k.value_or(default_min_agreement(zs.size())));
            if (nov_out.empty()) write_novelty_csv(std::cout, r, doc);
            else write_file_atomic(nov_out, novelty_csv(r, doc));
            if (!nov_json.empty()) write_file_atomic(nov_json, novelty_json(r, doc).dump(2) + "\n");
            log.info("novelty", r.doc_id, std::to_string(r.flags.size()) + " sentences flagged");
            return 0;
        }
        if (render->parsed()) {
            ren_spec.palette = parse_palette(ren_palette);
            const fs::path& first = ren_in.front();
            if (first.extension() == ".semv") {
                if (ren_in.size() != 1) throw Error("render takes one similarity file at a time");
                if (is_standardized_file(first)) render_heatmap(read_standardized_ssm(first), ren_spec, ren_out);
                else render_heatmap(read_ssm(first), ren_spec, ren_out);
            } else if (is_series_csv(first)) {
                std::vector<TimeSeries> series;
                for (const fs::path& p : ren_in) {
                    std::istringstream in(read_file(p));
                    TimeSeries ts;
                    ts.model = ModelId(p.stem().string());
                    ts.values = read_series_csv(in);
                    series.push_back(std::move(ts));
                }
                render_timeseries(series, ren_spec, ren_out);
            } else {
                if (ren_in.size() != 1) throw Error("render takes one matrix CSV at a time");
                render_heatmap(read_matrix_file(first), ren_spec, ren_out);
            }
            return 0;
        }
        if (pipeline->parsed()) {
            PipelineConfig cfg;
            if (!pipe_config.empty()) cfg = load_pipeline_config(pipe_config);
            if (!pipe_docs.empty()) cfg.documents = pipe_docs;
            if (!pipe_providers.empty()) {
                cfg.providers.clear();
                for (const std::string& p : pipe_providers) cfg.providers.push_back(parse_provider_entry(p));
            }
            if (const char* env = std::getenv("SEMVAR_CACHE"); env != nullptr && *env != '\0') cfg.cache_dir = env;
            if (!pipe_out.empty()) cfg.cache_dir = pipe_out;
            if (pipe_jobs) cfg.jobs = *pipe_jobs;
            if (pipe_diag) cfg.standardize_include_diagonal = true;
            if (pipe_mode) cfg.correlate_mode = parse_correlate_mode(*pipe_mode);
            if (pipe_q) cfg.novelty.q = *pipe_q;
            if (pipe_k) cfg.novelty.k = *pipe_k;
            const PipelineResult result = run_pipeline(cfg, log);
            log.info("pipeline", "", std::to_string(result.computed_count()) + " stages computed, " +
                                         std::to_string(result.events.size() - result.computed_count()) + " cached, " +
                                         std::to_string(result.failed_documents.size()) + " documents failed");
            return result.exit_code;
        }
    } catch (const std::exception& e) {
        log.error(app.get_subcommands().front()->get_name(), "", e.what());
        return 1;
    }
    return 0;
}
