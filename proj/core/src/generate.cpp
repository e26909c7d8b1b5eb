#include "dsr/generate.hpp"

#include "dsr/errors.hpp"

#include <array>
#include <cctype>

namespace dsr {

namespace {

bool plain_identifier(const std::string& name) {
    if (name.empty()) return false;
    if (std::isdigit(static_cast<unsigned char>(name.front()))) return false;
    for (char c : name)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    return true;
}

std::string quoted(const std::string& name) {
    return plain_identifier(name) ? name : "`" + name + "`";
}

} // namespace

std::string serialize_schema(const SchemaDescriptor& schema) {
    std::string out;
    for (const auto& table : schema.tables) {
        out += "CREATE TABLE " + quoted(table.name) + " (\n";
        for (const auto& col : table.columns) {
            out += quoted(col.name);
            if (!col.sql_type.empty()) out += " " + col.sql_type;
            if (col.is_primary_key) out += " PRIMARY KEY";
            out += ",";
            if (!col.description.empty() || !col.value_description.empty()) {
                out += " -- " + col.description;
                if (!col.value_description.empty()) {
                    if (!col.description.empty()) out += ";";
                    out += " " + col.value_description;
                }
                out += ";";
            }
            out += "\n";
        }
        out += ");\n";
    }
    return out;
}

Prompt build_sql_prompt(const std::string& schema_text, const std::string& db_id,
                        const std::string& query,
                        std::span<const PromptStatement> statements) {
    Prompt prompt;
    prompt.system = "You are a database administrator. You have designed the following "
                    "database for " + db_id + " whose schema is represented as:\n" +
                    schema_text;

    prompt.user = "Query: " + query + "\n";
    if (!statements.empty()) {
        prompt.user += "Domain Knowledge statements, some of which might or might not "
                       "be useful to generate the query:\n";
        for (std::size_t i = 0; i < statements.size(); ++i)
            prompt.user += std::to_string(i + 1) + ". " + statements[i].text + "\n";
    }
    prompt.user += "Generate a single SQL in SQLite format for the above query. "
                   "Do not include any extra text, tag or information other than "
                   "the SQL query itself.\nSQL:";
    return prompt;
}

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

bool starts_with_word(std::string_view text, std::string_view word) {
    if (text.size() < word.size()) return false;
    for (std::size_t i = 0; i < word.size(); ++i)
        if (std::toupper(static_cast<unsigned char>(text[i])) != word[i]) return false;
    if (text.size() == word.size()) return true;
    unsigned char next = static_cast<unsigned char>(text[word.size()]);
    return !std::isalnum(next) && next != '_';
}

// Statement-initial keywords a generated answer can legitimately start
// with; anything before the first one is prose.
constexpr std::array<std::string_view, 6> kSqlStarters = {
    "SELECT", "WITH", "INSERT", "UPDATE", "DELETE", "CREATE",
};

std::size_t first_sql_start(std::string_view text) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (i > 0) {
            unsigned char prev = static_cast<unsigned char>(text[i - 1]);
            if (std::isalnum(prev) || prev == '_') continue;
        }
        for (std::string_view kw : kSqlStarters)
            if (starts_with_word(text.substr(i), kw)) return i;
    }
    return std::string_view::npos;
}

// Cuts at the first semicolon that is outside single/double/backtick
// quotes. SQL escapes a quote inside a string by doubling it, which this
// scan handles naturally (the second quote reopens the state).
std::string_view until_unquoted_semicolon(std::string_view text) {
    char open = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (open) {
            if (c == open) open = 0;
        } else if (c == '\'' || c == '"' || c == '`') {
            open = c;
        } else if (c == ';') {
            return text.substr(0, i);
        }
    }
    return text;
}

} // namespace

std::string extract_sql(const std::string& raw) {
    std::string text = trim(raw);

    // Drop markdown fences anywhere; the fence language tag goes with its
    // opening line.
    std::string defenced;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t fence = text.find("```", pos);
        if (fence == std::string::npos) {
            defenced += text.substr(pos);
            break;
        }
        defenced += text.substr(pos, fence - pos);
        std::size_t after = fence + 3;
        // skip an info string such as "sql" up to end of line
        std::size_t eol = text.find('\n', after);
        std::size_t rest = after;
        if (eol != std::string::npos) {
            std::string info = trim(std::string_view(text).substr(after, eol - after));
            bool word = !info.empty();
            for (char c : info)
                if (!std::isalpha(static_cast<unsigned char>(c))) word = false;
            rest = word ? eol + 1 : after;
        }
        pos = rest;
    }
    text = trim(defenced);

    if (text.size() >= 4 && text[3] == ':' &&
        std::toupper(static_cast<unsigned char>(text[0])) == 'S' &&
        std::toupper(static_cast<unsigned char>(text[1])) == 'Q' &&
        std::toupper(static_cast<unsigned char>(text[2])) == 'L')
        text = trim(std::string_view(text).substr(4));

    std::size_t start = first_sql_start(text);
    if (start != std::string::npos) text = text.substr(start);

    text = trim(until_unquoted_semicolon(text));
    if (text.empty())
        throw EmptyGenerationError("model output contains no SQL: \"" + raw + "\"");
    return text;
}

GenerationResult generate(const std::string& schema_text, const std::string& db_id,
                          const std::string& query,
                          std::span<const PromptStatement> statements, LlmClient& llm,
                          int max_tokens) {
    Prompt prompt = build_sql_prompt(schema_text, db_id, query, statements);
    LlmOptions opts;
    opts.temperature = 0.0;
    opts.max_tokens = max_tokens;

    GenerationResult result;
    result.raw = llm.complete(prompt, opts);
    result.sql = extract_sql(result.raw);
    result.prompt_bytes = prompt.bytes();
    for (const auto& s : statements) result.ds_ids_in_context.push_back(s.id);
    return result;
}

} // namespace dsr
