#include "dsr/structure.hpp"

#include "dsr/errors.hpp"
#include "dsr/generate.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

namespace dsr {

using nlohmann::json;

std::vector<FewShotPair> load_shots(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw StorageError("cannot open shots file " + path.string());
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_array())
        throw ParseError("shots file " + path.string() + " is not a JSON array");

    std::vector<FewShotPair> shots;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const json& row = doc[i];
        if (!row.is_object() || !row.contains("nl") || !row.contains("structured"))
            throw ParseError("shots file " + path.string() + ": entry " +
                             std::to_string(i) + " needs \"nl\" and \"structured\"");
        shots.push_back(FewShotPair{row["nl"].get<std::string>(),
                                    row["structured"].get<std::string>()});
    }
    return shots;
}

std::string render_structured(std::string_view text_part, std::string_view sql_part) {
    std::string out = "\xe2\x80\x98"; // left single quote
    out += text_part;
    out += "\xe2\x80\x99"; // right single quote
    out += kRefersTo;
    out += sql_part;
    return out;
}

std::string render_structured(const StructuredDS& ds) {
    return render_structured(ds.text_part, ds.sql_part);
}

Prompt build_structuring_prompt(const SchemaDescriptor& schema,
                                std::span<const FewShotPair> shots,
                                const NLDomainStatement& d_nl) {
    if (shots.empty())
        throw ConfigError("structuring prompt needs at least one few-shot exemplar");

    Prompt prompt;
    prompt.system = "You are a database administrator. You have been given a few "
                    "examples of domain statement and their corresponding templatized "
                    "DSs. The DSs are for the database " + schema.db_id +
                    " whose schema is provided below:\n" + serialize_schema(schema);

    prompt.user = "For the given domain statement, you need to create a templatized "
                  "statement.\nProvide the statement in one sentence only. Generate "
                  "the templatized domain statement in the following form:"
                  "\xe2\x80\x98Relevant text component\xe2\x80\x99 refers to "
                  "\xe2\x80\x98corresponding SQL syntax\xe2\x80\x99 for each sample.\n"
                  "### Few Shot Exemplars\n";
    for (const auto& shot : shots) {
        prompt.user += "Example:\nDomain Statement: " + shot.nl +
                       "\nTemplatized Domain Statement: " + shot.structured + "\n";
    }
    prompt.user += "Example:\nDomain Statement: " + d_nl.text +
                   "\nTemplatized Domain Statement:";
    return prompt;
}

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

constexpr std::string_view kQuoteMarks[] = {
    "'", "\"", "`",
    "\xe2\x80\x98", "\xe2\x80\x99", "\xe2\x80\x9c", "\xe2\x80\x9d",
};

std::string strip_surrounding_quotes(std::string_view s) {
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::string_view q : kQuoteMarks) {
            if (s.size() >= q.size() && s.substr(0, q.size()) == q) {
                s.remove_prefix(q.size());
                changed = true;
            }
            if (s.size() >= q.size() && s.substr(s.size() - q.size()) == q) {
                s.remove_suffix(q.size());
                changed = true;
            }
        }
    }
    return trim(s);
}

} // namespace

StructuredDS parse_structured(const std::string& llm_output,
                              const NLDomainStatement& source) {
    std::string text = trim(llm_output);
    // The completion may repeat the field label it was primed with.
    constexpr std::string_view kLabel = "Templatized Domain Statement:";
    if (text.rfind(kLabel, 0) == 0) text = trim(std::string_view(text).substr(kLabel.size()));

    std::size_t pos = text.find(kRefersTo);
    std::size_t marker_size = kRefersTo.size();
    if (pos == std::string::npos) {
        // A marker at the very end lost its trailing space to the trim;
        // that is a successful split with an empty SQL part.
        constexpr std::string_view kBareMarker = " refers to";
        if (text.ends_with(kBareMarker)) {
            pos = text.size() - kBareMarker.size();
            marker_size = kBareMarker.size();
        } else {
            throw UnparseableOutputError("structuring output lacks \" refers to \"",
                                         llm_output);
        }
    }

    std::string text_part = strip_surrounding_quotes(trim(std::string_view(text).substr(0, pos)));
    std::string sql_part = trim(std::string_view(text).substr(pos + marker_size));
    if (text_part.empty())
        throw MalformedStatementError("structured statement has empty text part");
    if (sql_part.empty())
        throw MalformedStatementError("structured statement has empty SQL part");

    return make_structured(source.db_id, source.id, std::move(text_part),
                           std::move(sql_part), ReviewStatus::Machine);
}

StructuredDS structure_statement(const SchemaDescriptor& schema,
                                 std::span<const FewShotPair> shots,
                                 const NLDomainStatement& d_nl, LlmClient& llm,
                                 int max_tokens) {
    Prompt prompt = build_structuring_prompt(schema, shots, d_nl);
    LlmOptions opts;
    opts.temperature = 0.0;
    opts.max_tokens = max_tokens;
    return parse_structured(llm.complete(prompt, opts), d_nl);
}

double lexical_overlap(std::string_view a, std::string_view b) {
    auto fold_tokens = [](std::string_view s) {
        std::string lower;
        lower.reserve(s.size());
        for (char c : s) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return tokenize(lower);
    };
    std::vector<std::string> ta = fold_tokens(a);
    std::vector<std::string> tb = fold_tokens(b);
    if (ta.empty() && tb.empty()) return 1.0;
    if (ta.empty() || tb.empty()) return 0.0;

    std::map<std::string, std::size_t> bag;
    for (const auto& t : ta) ++bag[t];
    std::size_t overlap = 0;
    for (const auto& t : tb) {
        auto it = bag.find(t);
        if (it != bag.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    double precision = static_cast<double>(overlap) / static_cast<double>(tb.size());
    double recall = static_cast<double>(overlap) / static_cast<double>(ta.size());
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

double semantic_overlap(const std::string& a, const std::string& b,
                        EmbeddingProvider& provider, EmbeddingCache* cache) {
    std::vector<EmbeddingVector> vecs = embed_batch({a, b}, provider, cache);
    return cosine(vecs[0], vecs[1]);
}

} // namespace dsr
