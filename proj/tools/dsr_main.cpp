// dsr: manage per-database domain-statement repositories and run the
// retrieval-augmented text-to-SQL pipeline stage by stage.

#include "dsr/errors.hpp"
#include "dsr/pipeline.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <functional>
#include <string>

namespace {

struct FlagOverrides {
    std::string config_path;
    std::string dataset, db_dir, out, cache, shots, method, ds_source, db;
    std::int64_t k = -1, n = -1, k_in = -1, k_out = -1, parallel = -1;
    double in_fraction = -1.0;
    std::int64_t seed = -1;
    std::string embed_endpoint, llm_endpoint;
};

void add_common_flags(CLI::App* cmd, FlagOverrides& flags) {
    cmd->add_option("--config", flags.config_path, "JSON config file");
    cmd->add_option("--dataset", flags.dataset, "BirdSQL-style JSON input");
    cmd->add_option("--db-dir", flags.db_dir, "directory of per-database SQLite files");
    cmd->add_option("--out", flags.out, "output directory (default: out)");
    cmd->add_option("--cache", flags.cache, "embedding cache file");
    cmd->add_option("--shots", flags.shots, "few-shot exemplars JSON (structure)");
    cmd->add_option("--method", flags.method, "sbr|bm25|dense-whole|sbsr")
        ->check(CLI::IsMember({"sbr", "bm25", "dense-whole", "sbsr"}));
    cmd->add_option("--ds-source", flags.ds_source, "str|nl statement text for matching")
        ->check(CLI::IsMember({"str", "nl"}));
    cmd->add_option("--db", flags.db, "restrict to one database id");
    cmd->add_option("--k", flags.k, "retrieval depth override for all splits");
    cmd->add_option("--k-in", flags.k_in, "retrieval depth for IN queries (default 4)");
    cmd->add_option("--k-out", flags.k_out, "retrieval depth for OUT queries (default 10)");
    cmd->add_option("--n", flags.n, "span length slack (default 3)");
    cmd->add_option("--seed", flags.seed, "split shuffle seed (default 13)");
    cmd->add_option("--in-fraction", flags.in_fraction, "IN split fraction (default 0.5)");
    cmd->add_option("--parallel", flags.parallel, "bounded worker count (default 1)");
    cmd->add_option("--embed-endpoint", flags.embed_endpoint,
                    "\"deterministic\" or embedding service URL");
    cmd->add_option("--llm-endpoint", flags.llm_endpoint, "generation service URL");
}

dsr::PipelineConfig resolve_config(const FlagOverrides& flags) {
    dsr::PipelineConfig config;
    if (!flags.config_path.empty()) config = dsr::load_config(flags.config_path);

    if (!flags.dataset.empty()) config.dataset = flags.dataset;
    if (!flags.db_dir.empty()) config.db_dir = flags.db_dir;
    if (!flags.out.empty()) config.out = flags.out;
    if (!flags.cache.empty()) config.cache = flags.cache;
    if (!flags.shots.empty()) config.shots = flags.shots;
    if (!flags.method.empty())
        config.method = dsr::retrieval_method_from_string(flags.method);
    if (!flags.ds_source.empty())
        config.ds_source = dsr::ds_text_source_from_string(flags.ds_source);
    if (!flags.db.empty()) config.db_filter = flags.db;
    if (flags.k >= 0) config.k_override = static_cast<std::size_t>(flags.k);
    if (flags.k_in >= 0) config.k_in = static_cast<std::size_t>(flags.k_in);
    if (flags.k_out >= 0) config.k_out = static_cast<std::size_t>(flags.k_out);
    if (flags.n >= 0) config.n = static_cast<std::size_t>(flags.n);
    if (flags.seed >= 0) config.seed = static_cast<std::uint64_t>(flags.seed);
    if (flags.in_fraction >= 0.0) config.in_fraction = flags.in_fraction;
    if (flags.parallel >= 0) config.parallel = static_cast<std::size_t>(flags.parallel);
    if (!flags.embed_endpoint.empty()) config.embedding.endpoint = flags.embed_endpoint;
    if (!flags.llm_endpoint.empty()) config.llm.endpoint = flags.llm_endpoint;
    return config;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"domain-statement repository pipeline for text-to-SQL"};
    app.require_subcommand(1);

    FlagOverrides flags;
    dsr::ReviewOptions review_options;
    int exit_code = 0;

    struct Stage {
        const char* name;
        const char* help;
        std::function<int(const dsr::PipelineConfig&)> run;
    };
    const Stage stages[] = {
        {"ingest", "load the dataset into out/examples.jsonl", dsr::run_ingest},
        {"split", "label IN/OUT splits and build per-DB NL repositories", dsr::run_split},
        {"structure", "translate NL statements into structured form via the LLM",
         dsr::run_structure},
        {"index", "embed repository statements into the cache", dsr::run_index},
        {"retrieve", "rank statements per query into out/retrievals.jsonl",
         dsr::run_retrieve},
        {"generate", "produce SQL per query into out/generations.jsonl",
         dsr::run_generate},
        {"eval", "score retrieval and execution into out/report.json", dsr::run_eval},
        {"tune", "sweep the span slack n on IN examples", dsr::run_tune},
    };

    for (const auto& stage : stages) {
        CLI::App* cmd = app.add_subcommand(stage.name, stage.help);
        add_common_flags(cmd, flags);
        cmd->callback([&flags, &stage, &exit_code]() {
            exit_code = stage.run(resolve_config(flags));
        });
    }

    CLI::App* review = app.add_subcommand("review", "accept or edit structured statements");
    add_common_flags(review, flags);
    review->add_flag("--list", review_options.list, "print pending (machine) statements");
    review->add_option("--accept", review_options.accept_ids, "statement id(s) to accept");
    review->add_option("--edit", review_options.edit_id, "statement id to edit");
    review->add_option("--text-part", review_options.edit_text_part, "replacement text part");
    review->add_option("--sql-part", review_options.edit_sql_part, "replacement SQL part");
    review->add_option("--edits-file", review_options.edits_file,
                       "JSONL of {\"id\",\"text_part\",\"sql_part\"} edits");
    review->callback([&flags, &review_options, &exit_code]() {
        std::string listing;
        exit_code = dsr::run_review(resolve_config(flags), review_options, listing);
        if (!listing.empty()) std::fputs(listing.c_str(), stdout);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const dsr::Error& e) {
        std::fprintf(stderr, "dsr: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "dsr: unexpected error: %s\n", e.what());
        return 1;
    }
    return exit_code;
}
