#include "dsr/pipeline.hpp"

#include "dsr/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <map>
#include <set>

namespace dsr {

using nlohmann::json;

namespace {

json parse_json_file(const std::filesystem::path& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw StorageError(std::string("cannot open ") + what + " " + path.string());
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded())
        throw ParseError(std::string(what) + " " + path.string() + " is not valid JSON");
    return doc;
}

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> known,
                         const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* k : known)
            if (key == k) ok = true;
        if (!ok) throw ConfigError("unknown config key \"" + key + "\" in " + where);
    }
}

std::ofstream open_artifact(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw StorageError("cannot open " + path.string() + " for writing");
    return out;
}

void require_artifact(const std::filesystem::path& path, const char* producer) {
    if (!std::filesystem::exists(path))
        throw ConfigError("missing artifact " + path.string() + "; run `" +
                          producer + "` first");
}

} // namespace

PipelineConfig load_config(const std::filesystem::path& path) {
    json doc = parse_json_file(path, "config");
    if (!doc.is_object()) throw ConfigError("config root must be a JSON object");

    reject_unknown_keys(doc,
                        {"dataset", "db_dir", "out", "cache", "shots", "embedding", "llm",
                         "method", "ds_source", "k_in", "k_out", "k", "n", "in_fraction",
                         "seed", "parallel", "n_grid", "db"},
                        "config root");

    PipelineConfig config;
    if (doc.contains("dataset")) config.dataset = doc["dataset"].get<std::string>();
    if (doc.contains("db_dir")) config.db_dir = doc["db_dir"].get<std::string>();
    if (doc.contains("out")) config.out = doc["out"].get<std::string>();
    if (doc.contains("cache")) config.cache = doc["cache"].get<std::string>();
    if (doc.contains("shots")) config.shots = doc["shots"].get<std::string>();
    if (doc.contains("method"))
        config.method = retrieval_method_from_string(doc["method"].get<std::string>());
    if (doc.contains("ds_source"))
        config.ds_source = ds_text_source_from_string(doc["ds_source"].get<std::string>());
    if (doc.contains("k_in")) config.k_in = doc["k_in"].get<std::size_t>();
    if (doc.contains("k_out")) config.k_out = doc["k_out"].get<std::size_t>();
    if (doc.contains("k")) config.k_override = doc["k"].get<std::size_t>();
    if (doc.contains("n")) config.n = doc["n"].get<std::size_t>();
    if (doc.contains("in_fraction")) config.in_fraction = doc["in_fraction"].get<double>();
    if (doc.contains("seed")) config.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("parallel")) config.parallel = doc["parallel"].get<std::size_t>();
    if (doc.contains("n_grid"))
        config.n_grid = doc["n_grid"].get<std::vector<std::size_t>>();
    if (doc.contains("db")) config.db_filter = doc["db"].get<std::string>();

    if (doc.contains("embedding")) {
        const json& e = doc["embedding"];
        reject_unknown_keys(e,
                            {"endpoint", "provider_id", "dim", "batch_size",
                             "timeout_seconds", "retries", "auth_token_env"},
                            "embedding");
        if (e.contains("endpoint")) config.embedding.endpoint = e["endpoint"].get<std::string>();
        if (e.contains("provider_id"))
            config.embedding.provider_id = e["provider_id"].get<std::string>();
        if (e.contains("dim")) config.embedding.dim = e["dim"].get<std::size_t>();
        if (e.contains("batch_size"))
            config.embedding.batch_size = e["batch_size"].get<std::size_t>();
        if (e.contains("timeout_seconds"))
            config.embedding.timeout_seconds = e["timeout_seconds"].get<double>();
        if (e.contains("retries")) config.embedding.retries = e["retries"].get<int>();
        if (e.contains("auth_token_env"))
            config.embedding.auth_token_env = e["auth_token_env"].get<std::string>();
    }
    if (doc.contains("llm")) {
        const json& l = doc["llm"];
        reject_unknown_keys(
            l, {"endpoint", "max_tokens", "timeout_seconds", "retries", "auth_token_env"},
            "llm");
        if (l.contains("endpoint")) config.llm.endpoint = l["endpoint"].get<std::string>();
        if (l.contains("max_tokens")) config.llm.max_tokens = l["max_tokens"].get<int>();
        if (l.contains("timeout_seconds"))
            config.llm.timeout_seconds = l["timeout_seconds"].get<double>();
        if (l.contains("retries")) config.llm.retries = l["retries"].get<int>();
        if (l.contains("auth_token_env"))
            config.llm.auth_token_env = l["auth_token_env"].get<std::string>();
    }
    return config;
}

ArtifactPaths::ArtifactPaths(const std::filesystem::path& out)
    : examples(out / "examples.jsonl"),
      labeled(out / "labeled.jsonl"),
      dbs(out / "dbs"),
      retrievals(out / "retrievals.jsonl"),
      generations(out / "generations.jsonl"),
      report_json(out / "report.json"),
      report_text(out / "report.txt"),
      tune(out / "tune.json") {}

std::filesystem::path ArtifactPaths::nl_repo(const std::string& db_id) const {
    return dbs / db_id / "repo_nl.jsonl";
}
std::filesystem::path ArtifactPaths::repo(const std::string& db_id) const {
    return dbs / db_id / "repo.jsonl";
}
std::filesystem::path ArtifactPaths::index(const std::string& db_id) const {
    return dbs / db_id / "index.json";
}

void save_examples_artifact(std::span<const EvalExample> examples,
                            const std::filesystem::path& path) {
    std::ofstream out = open_artifact(path);
    for (const auto& ex : examples) {
        json row;
        row["record"] = "example";
        row["example_id"] = ex.example_id;
        row["db_id"] = ex.db_id;
        row["question"] = ex.question;
        row["gold_sql"] = ex.gold_sql;
        row["evidences"] = ex.gold_evidence_texts;
        row["gold_ds_ids"] = ex.gold_ds_ids;
        row["split"] = to_string(ex.split);
        row["out_no"] = ex.out_no;
        out << row.dump() << '\n';
    }
    if (!out.flush()) throw StorageError("write failure on " + path.string());
}

std::vector<EvalExample> load_examples_artifact(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw StorageError("cannot open " + path.string());

    std::vector<EvalExample> examples;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json row = json::parse(line, nullptr, false);
        if (row.is_discarded() || !row.is_object() || row.value("record", "") != "example")
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": malformed example record");
        EvalExample ex;
        ex.example_id = row.at("example_id").get<std::string>();
        ex.db_id = row.at("db_id").get<std::string>();
        ex.question = row.at("question").get<std::string>();
        ex.gold_sql = row.at("gold_sql").get<std::string>();
        ex.gold_evidence_texts = row.at("evidences").get<std::vector<std::string>>();
        ex.gold_ds_ids = row.at("gold_ds_ids").get<std::vector<std::string>>();
        ex.split = split_label_from_string(row.at("split").get<std::string>());
        ex.out_no = row.at("out_no").get<bool>();
        examples.push_back(std::move(ex));
    }
    return examples;
}

namespace {

json span_to_json(const Span& span) {
    return json{{"i", span.i}, {"j", span.j}, {"text", span.text}};
}

Span span_from_json(const json& row) {
    Span span;
    span.i = row.at("i").get<std::size_t>();
    span.j = row.at("j").get<std::size_t>();
    span.text = row.at("text").get<std::string>();
    return span;
}

void save_retrievals_artifact(std::span<const RetrievalRecord> records,
                              const std::filesystem::path& path) {
    std::ofstream out = open_artifact(path);
    for (const auto& rec : records) {
        json results = json::array();
        for (const auto& r : rec.results) {
            json row;
            row["ds_id"] = r.ds_id;
            row["source_id"] = r.source_id;
            row["score"] = r.score;
            if (r.best_span) row["span"] = span_to_json(*r.best_span);
            results.push_back(std::move(row));
        }
        json row;
        row["record"] = "retrieval";
        row["example_id"] = rec.example_id;
        row["db_id"] = rec.db_id;
        row["method"] = rec.method;
        row["k"] = rec.k;
        row["results"] = std::move(results);
        out << row.dump() << '\n';
    }
    if (!out.flush()) throw StorageError("write failure on " + path.string());
}

} // namespace

std::vector<RetrievalRecord> load_retrievals_artifact(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw StorageError("cannot open " + path.string());

    std::vector<RetrievalRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json row = json::parse(line, nullptr, false);
        if (row.is_discarded() || row.value("record", "") != "retrieval")
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": malformed retrieval record");
        RetrievalRecord rec;
        rec.example_id = row.at("example_id").get<std::string>();
        rec.db_id = row.at("db_id").get<std::string>();
        rec.method = row.at("method").get<std::string>();
        rec.k = row.at("k").get<std::size_t>();
        for (const json& r : row.at("results")) {
            ScoredDS s;
            s.ds_id = r.at("ds_id").get<std::string>();
            s.source_id = r.at("source_id").get<std::string>();
            s.score = r.at("score").get<double>();
            if (r.contains("span")) s.best_span = span_from_json(r["span"]);
            rec.results.push_back(std::move(s));
        }
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<GenerationRecord> load_generations_artifact(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw StorageError("cannot open " + path.string());

    std::vector<GenerationRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json row = json::parse(line, nullptr, false);
        if (row.is_discarded() || row.value("record", "") != "generation")
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": malformed generation record");
        GenerationRecord rec;
        rec.example_id = row.at("example_id").get<std::string>();
        rec.db_id = row.at("db_id").get<std::string>();
        rec.sql = row.at("sql").get<std::string>();
        rec.raw = row.at("raw").get<std::string>();
        rec.prompt_bytes = row.at("prompt_bytes").get<std::size_t>();
        rec.ds_ids = row.at("ds_ids").get<std::vector<std::string>>();
        records.push_back(std::move(rec));
    }
    return records;
}

std::unique_ptr<EmbeddingProvider> make_provider(const EmbeddingConfig& config) {
    if (config.endpoint == "deterministic")
        return std::make_unique<DeterministicEmbeddingProvider>(config.dim);
    if (config.endpoint.rfind("http://", 0) == 0 || config.endpoint.rfind("https://", 0) == 0) {
        HttpEndpointConfig ep;
        ep.base_url = config.endpoint;
        ep.provider_id = config.provider_id.empty() ? config.endpoint : config.provider_id;
        ep.timeout_seconds = config.timeout_seconds;
        ep.retries = config.retries;
        ep.auth_token_env = config.auth_token_env;
        return std::make_unique<HttpEmbeddingProvider>(std::move(ep));
    }
    throw ConfigError("embedding endpoint must be \"deterministic\" or an http(s) URL, "
                      "got \"" + config.endpoint + "\"");
}

std::unique_ptr<LlmClient> make_llm(const LlmConfig& config) {
    if (config.endpoint.empty())
        throw ConfigError("llm.endpoint is required for this subcommand");
    LlmEndpointConfig ep;
    ep.base_url = config.endpoint;
    ep.timeout_seconds = config.timeout_seconds;
    ep.retries = config.retries;
    ep.auth_token_env = config.auth_token_env;
    return std::make_unique<HttpLlmClient>(std::move(ep));
}

namespace {

std::vector<std::string> selected_dbs(const PipelineConfig& config,
                                      std::span<const EvalExample> examples) {
    std::vector<std::string> ids = db_ids(examples);
    if (!config.db_filter) return ids;
    for (const auto& id : ids)
        if (id == *config.db_filter) return {id};
    throw ConfigError("no examples for database \"" + *config.db_filter + "\"");
}

Repository load_db_repo(const ArtifactPaths& paths, const std::string& db_id) {
    require_artifact(paths.repo(db_id), "structure");
    return load_repository(paths.repo(db_id));
}

NlRepository load_db_nl_repo(const ArtifactPaths& paths, const std::string& db_id) {
    require_artifact(paths.nl_repo(db_id), "split");
    return load_nl_repository(paths.nl_repo(db_id));
}

void require_index(const ArtifactPaths& paths, const PipelineConfig& config,
                   Repository& repo, const std::string& db_id) {
    if (config.method == RetrievalMethod::Bm25) return; // lexical, no index
    require_artifact(paths.index(db_id), "index");
    json doc = parse_json_file(paths.index(db_id), "index");
    std::string want = doc.value("provider_id", "");
    repo.set_index_ready(true);
    (void)want;
}

std::size_t k_for(const PipelineConfig& config, SplitLabel split) {
    if (config.k_override) return *config.k_override;
    return split == SplitLabel::In ? config.k_in : config.k_out;
}

} // namespace

int run_ingest(const PipelineConfig& config) {
    if (config.dataset.empty()) throw ConfigError("dataset path is required for ingest");
    std::vector<EvalExample> examples = load_bird(config.dataset);
    ArtifactPaths paths(config.out);
    save_examples_artifact(examples, paths.examples);
    return 0;
}

int run_split(const PipelineConfig& config) {
    ArtifactPaths paths(config.out);
    require_artifact(paths.examples, "ingest");
    std::vector<EvalExample> examples = load_examples_artifact(paths.examples);

    build_splits(examples, config.in_fraction, config.seed);
    for (const std::string& db_id : db_ids(examples)) {
        NlRepository repo = build_repository_from_in(examples, db_id);
        mark_out_no(examples, repo);
        save_nl_repository(repo, paths.nl_repo(db_id));
    }
    save_examples_artifact(examples, paths.labeled);
    return 0;
}

int run_structure(const PipelineConfig& config) {
    ArtifactPaths paths(config.out);
    require_artifact(paths.labeled, "split");
    if (config.shots.empty())
        throw ConfigError("shots path is required for structure (few-shot exemplars)");
    if (config.db_dir.empty())
        throw ConfigError("db_dir is required for structure (schema serialization)");

    std::vector<FewShotPair> shots = load_shots(config.shots);
    std::vector<EvalExample> examples = load_examples_artifact(paths.labeled);
    std::unique_ptr<LlmClient> llm = make_llm(config.llm);

    for (const std::string& db_id : selected_dbs(config, examples)) {
        NlRepository nl_repo = load_db_nl_repo(paths, db_id);
        SchemaDescriptor schema = load_schema(config.db_dir, db_id);

        const auto& statements = nl_repo.statements();
        std::vector<StructuredDS> structured(statements.size());
        std::vector<std::string> failures;
        std::mutex failures_mu;

        auto worker = [&](std::size_t idx) {
            try {
                structured[idx] = structure_statement(schema, shots, statements[idx],
                                                      *llm, config.llm.max_tokens);
            } catch (const std::exception& e) {
                std::lock_guard lock(failures_mu);
                failures.push_back(statements[idx].id + ": " + e.what());
            }
        };

        const std::size_t workers = std::max<std::size_t>(1, config.parallel);
        for (std::size_t wave = 0; wave < statements.size(); wave += workers) {
            std::vector<std::future<void>> futs;
            for (std::size_t i = wave; i < std::min(statements.size(), wave + workers); ++i)
                futs.push_back(std::async(std::launch::async, worker, i));
            for (auto& f : futs) f.get();
        }

        if (!failures.empty())
            throw Error("structuring failed for " + std::to_string(failures.size()) +
                        " statement(s) in " + db_id + "; first: " + failures.front());

        Repository repo(db_id);
        for (auto& ds : structured) repo.add(std::move(ds));
        save_repository(repo, paths.repo(db_id));
    }
    return 0;
}

int run_review(const PipelineConfig& config, const ReviewOptions& options,
               std::string& listing_out) {
    ArtifactPaths paths(config.out);
    if (!config.db_filter)
        throw ConfigError("--db is required for review");
    const std::string db_id = *config.db_filter;
    Repository repo = load_db_repo(paths, db_id);

    bool mutated = false;
    for (const auto& id : options.accept_ids) {
        repo.accept(id);
        mutated = true;
    }
    if (!options.edit_id.empty()) {
        repo.edit(options.edit_id, options.edit_text_part, options.edit_sql_part);
        mutated = true;
    }
    if (!options.edits_file.empty()) {
        std::ifstream in(options.edits_file);
        if (!in) throw StorageError("cannot open edits file " + options.edits_file.string());
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            json row = json::parse(line, nullptr, false);
            if (row.is_discarded() || !row.contains("id"))
                throw ParseError(options.edits_file.string() + ":" +
                                 std::to_string(line_no) + ": malformed edit record");
            repo.edit(row["id"].get<std::string>(), row.value("text_part", ""),
                      row.value("sql_part", ""));
            mutated = true;
        }
    }

    if (mutated) save_repository(repo, paths.repo(db_id));

    if (options.list || !mutated) {
        std::string text;
        for (const auto& ds : repo.statements()) {
            if (ds.review_status != ReviewStatus::Machine) continue;
            text += ds.id + "\t" + render_structured(ds) + "\n";
        }
        listing_out = text;
    }
    return 0;
}

int run_index(const PipelineConfig& config) {
    ArtifactPaths paths(config.out);
    require_artifact(paths.labeled, "split");
    std::vector<EvalExample> examples = load_examples_artifact(paths.labeled);

    std::unique_ptr<EmbeddingProvider> provider = make_provider(config.embedding);
    EmbeddingCache cache(config.cache_path());
    EmbedOptions opts{config.embedding.batch_size, config.parallel};

    for (const std::string& db_id : selected_dbs(config, examples)) {
        Repository repo = load_db_repo(paths, db_id);
        NlRepository nl_repo = load_db_nl_repo(paths, db_id);
        index_repository(repo, *provider, &cache, opts, &nl_repo, config.ds_source);

        json doc;
        doc["provider_id"] = provider->id();
        doc["ds_source"] = to_string(config.ds_source);
        doc["statements"] = repo.size();
        std::ofstream out = open_artifact(paths.index(db_id));
        out << doc.dump(2) << '\n';
        if (!out.flush())
            throw StorageError("write failure on " + paths.index(db_id).string());
    }
    return 0;
}

int run_retrieve(const PipelineConfig& config) {
    ArtifactPaths paths(config.out);
    require_artifact(paths.labeled, "split");
    std::vector<EvalExample> examples = load_examples_artifact(paths.labeled);

    std::unique_ptr<EmbeddingProvider> provider = make_provider(config.embedding);
    EmbeddingCache cache(config.cache_path());
    EmbedOptions opts{config.embedding.batch_size, config.parallel};

    std::map<std::string, Repository> repos;
    std::map<std::string, NlRepository> nl_repos;
    for (const std::string& db_id : selected_dbs(config, examples)) {
        Repository repo = load_db_repo(paths, db_id);
        require_index(paths, config, repo, db_id);
        repos.emplace(db_id, std::move(repo));
        nl_repos.emplace(db_id, load_db_nl_repo(paths, db_id));
    }

    std::vector<RetrievalRecord> records;
    for (const auto& ex : examples) {
        auto repo_it = repos.find(ex.db_id);
        if (repo_it == repos.end()) continue; // filtered out via --db

        RetrievalConfig rc;
        rc.method = config.method;
        rc.n = config.n;
        rc.ds_text_source = config.ds_source;
        rc.k = k_for(config, ex.split);

        RetrievalRecord rec;
        rec.example_id = ex.example_id;
        rec.db_id = ex.db_id;
        rec.method = to_string(config.method);
        rec.k = rc.k;
        rec.results = retrieve(ex.question, repo_it->second, rc, *provider, &cache, opts,
                               &nl_repos.at(ex.db_id));
        records.push_back(std::move(rec));
    }
    save_retrievals_artifact(records, paths.retrievals);
    return 0;
}

int run_generate(const PipelineConfig& config) {
    ArtifactPaths paths(config.out);
    require_artifact(paths.labeled, "split");
    require_artifact(paths.retrievals, "retrieve");
    if (config.db_dir.empty())
        throw ConfigError("db_dir is required for generate (schema serialization)");

    std::vector<EvalExample> examples = load_examples_artifact(paths.labeled);
    std::vector<RetrievalRecord> retrievals = load_retrievals_artifact(paths.retrievals);
    std::unique_ptr<LlmClient> llm = make_llm(config.llm);

    std::map<std::string, const RetrievalRecord*> by_example;
    for (const auto& rec : retrievals) by_example[rec.example_id] = &rec;

    std::set<std::string> wanted;
    for (const std::string& db_id : selected_dbs(config, examples)) wanted.insert(db_id);

    std::map<std::string, std::string> schema_texts;
    std::map<std::string, Repository> repos;
    std::map<std::string, NlRepository> nl_repos;
    for (const std::string& db_id : wanted) {
        schema_texts[db_id] = serialize_schema(load_schema(config.db_dir, db_id));
        repos.emplace(db_id, load_db_repo(paths, db_id));
        nl_repos.emplace(db_id, load_db_nl_repo(paths, db_id));
    }

    struct Job {
        const EvalExample* example;
        const RetrievalRecord* retrieval;
    };
    std::vector<Job> jobs;
    for (const auto& ex : examples) {
        if (!wanted.count(ex.db_id)) continue;
        auto it = by_example.find(ex.example_id);
        if (it == by_example.end())
            throw ConfigError("no retrieval record for example " + ex.example_id +
                              "; run `retrieve` first");
        jobs.push_back(Job{&ex, it->second});
    }

    std::vector<GenerationRecord> records(jobs.size());
    std::vector<std::string> failures;
    std::mutex failures_mu;

    auto worker = [&](std::size_t idx) {
        const auto& [ex, rec] = jobs[idx];
        try {
            std::vector<PromptStatement> statements;
            for (const auto& r : rec->results) {
                PromptStatement ps;
                ps.id = r.ds_id;
                if (config.ds_source == DsTextSource::RawNl)
                    ps.text = nl_repos.at(ex->db_id).at(r.source_id).text;
                else
                    ps.text = render_structured(repos.at(ex->db_id).at(r.ds_id));
                statements.push_back(std::move(ps));
            }
            GenerationResult gen =
                generate(schema_texts.at(ex->db_id), ex->db_id, ex->question, statements,
                         *llm, config.llm.max_tokens);
            records[idx] = GenerationRecord{ex->example_id, ex->db_id,  gen.sql,
                                            gen.raw,        gen.prompt_bytes,
                                            gen.ds_ids_in_context};
        } catch (const std::exception& e) {
            std::lock_guard lock(failures_mu);
            failures.push_back(ex->example_id + ": " + e.what());
        }
    };

    const std::size_t workers = std::max<std::size_t>(1, config.parallel);
    for (std::size_t wave = 0; wave < jobs.size(); wave += workers) {
        std::vector<std::future<void>> futs;
        for (std::size_t i = wave; i < std::min(jobs.size(), wave + workers); ++i)
            futs.push_back(std::async(std::launch::async, worker, i));
        for (auto& f : futs) f.get();
    }
    if (!failures.empty())
        throw Error("generation failed for " + std::to_string(failures.size()) +
                    " example(s); first: " + failures.front());

    std::ofstream out = open_artifact(paths.generations);
    for (const auto& rec : records) {
        json row;
        row["record"] = "generation";
        row["example_id"] = rec.example_id;
        row["db_id"] = rec.db_id;
        row["sql"] = rec.sql;
        row["raw"] = rec.raw;
        row["prompt_bytes"] = rec.prompt_bytes;
        row["ds_ids"] = rec.ds_ids;
        out << row.dump() << '\n';
    }
    if (!out.flush()) throw StorageError("write failure on " + paths.generations.string());
    return 0;
}

int run_eval(const PipelineConfig& config) {
    ArtifactPaths paths(config.out);
    require_artifact(paths.labeled, "split");
    require_artifact(paths.retrievals, "retrieve");
    std::vector<EvalExample> examples = load_examples_artifact(paths.labeled);
    std::vector<RetrievalRecord> retrievals = load_retrievals_artifact(paths.retrievals);

    std::map<std::string, const RetrievalRecord*> retrieval_by_example;
    for (const auto& rec : retrievals) retrieval_by_example[rec.example_id] = &rec;

    std::map<std::string, const GenerationRecord*> generation_by_example;
    std::vector<GenerationRecord> generations;
    const bool have_generations = std::filesystem::exists(paths.generations);
    if (have_generations) {
        generations = load_generations_artifact(paths.generations);
        for (const auto& rec : generations) generation_by_example[rec.example_id] = &rec;
    }
    if (have_generations && config.db_dir.empty())
        throw ConfigError("db_dir is required to execute SQL during eval");

    std::set<std::string> wanted;
    for (const std::string& db_id : selected_dbs(config, examples)) wanted.insert(db_id);

    std::vector<ExampleResult> results;
    for (const auto& ex : examples) {
        if (!wanted.count(ex.db_id)) continue;
        auto rit = retrieval_by_example.find(ex.example_id);
        if (rit == retrieval_by_example.end())
            throw ConfigError("no retrieval record for example " + ex.example_id +
                              "; run `retrieve` first");

        ExampleResult res;
        res.example_id = ex.example_id;
        res.split = ex.split;
        res.out_no = ex.out_no;

        std::set<std::string> gold(ex.gold_ds_ids.begin(), ex.gold_ds_ids.end());
        res.f1 = evidence_f1(rit->second->results, gold);

        if (have_generations) {
            auto git = generation_by_example.find(ex.example_id);
            if (git == generation_by_example.end())
                throw ConfigError("no generation record for example " + ex.example_id +
                                  "; run `generate` first");
            ExecOutcome outcome =
                execution_accuracy(git->second->sql, ex.gold_sql,
                                   database_file(config.db_dir, ex.db_id));
            res.exec = outcome.status;
        }
        results.push_back(std::move(res));
    }

    Report report = aggregate(results);
    {
        std::ofstream out = open_artifact(paths.report_json);
        out << report_to_json(report);
        if (!out.flush())
            throw StorageError("write failure on " + paths.report_json.string());
    }
    {
        std::ofstream out = open_artifact(paths.report_text);
        out << report_to_text(report);
        if (!out.flush())
            throw StorageError("write failure on " + paths.report_text.string());
    }

    for (const auto& res : results)
        if (res.exec && *res.exec != ExecStatus::Match && *res.exec != ExecStatus::Mismatch)
            return 1;
    return 0;
}

int run_tune(const PipelineConfig& config) {
    ArtifactPaths paths(config.out);
    require_artifact(paths.labeled, "split");
    std::vector<EvalExample> examples = load_examples_artifact(paths.labeled);

    std::unique_ptr<EmbeddingProvider> provider = make_provider(config.embedding);
    EmbeddingCache cache(config.cache_path());
    EmbedOptions opts{config.embedding.batch_size, config.parallel};

    std::map<std::string, Repository> repos;
    std::map<std::string, NlRepository> nl_repos;
    for (const std::string& db_id : selected_dbs(config, examples)) {
        Repository repo = load_db_repo(paths, db_id);
        require_index(paths, config, repo, db_id);
        repos.emplace(db_id, std::move(repo));
        nl_repos.emplace(db_id, load_db_nl_repo(paths, db_id));
    }

    // Tuning set: IN examples with at least one resolved gold statement.
    std::vector<const EvalExample*> dev;
    for (const auto& ex : examples)
        if (repos.count(ex.db_id) && ex.split == SplitLabel::In && !ex.gold_ds_ids.empty())
            dev.push_back(&ex);
    if (dev.empty())
        throw ConfigError("no IN examples with resolved gold statements; run `split` "
                          "with a repository-bearing dataset first");

    auto objective = [&](std::size_t n) {
        double sum = 0.0;
        for (const EvalExample* ex : dev) {
            RetrievalConfig rc;
            rc.method = config.method;
            rc.n = n;
            rc.ds_text_source = config.ds_source;
            rc.k = std::max<std::size_t>(1, ex->gold_ds_ids.size());
            std::vector<ScoredDS> ranked =
                retrieve(ex->question, repos.at(ex->db_id), rc, *provider, &cache, opts,
                         &nl_repos.at(ex->db_id));
            std::set<std::string> gold(ex->gold_ds_ids.begin(), ex->gold_ds_ids.end());
            sum += evidence_f1(ranked, gold).f1;
        }
        return sum / static_cast<double>(dev.size());
    };

    TuneResult result = tune_n(config.n_grid, objective);

    json doc;
    doc["best_n"] = result.best_n;
    json scores = json::array();
    for (const auto& [n, score] : result.scores)
        scores.push_back(json{{"n", n}, {"f1", score}});
    doc["scores"] = std::move(scores);
    doc["dev_examples"] = dev.size();

    std::ofstream out = open_artifact(paths.tune);
    out << doc.dump(2) << '\n';
    if (!out.flush()) throw StorageError("write failure on " + paths.tune.string());
    return 0;
}

} // namespace dsr
