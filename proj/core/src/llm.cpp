#include "ambivis/llm.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "ambivis/error.hpp"
#include "ambivis/vis.hpp"

namespace ambivis {

namespace {

using nlohmann::json;

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string spaced(const std::string& column) {
    std::string out;
    for (char c : column) out += (c == '_' || c == '-') ? ' ' : static_cast<char>(std::tolower(c));
    return out;
}

class semaphore {
  public:
    explicit semaphore(int count) : count_(count) {}
    void acquire() {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return count_ > 0; });
        --count_;
    }
    void release() {
        std::lock_guard lk(mu_);
        ++count_;
        cv_.notify_one();
    }

  private:
    std::mutex mu_;
    std::condition_variable cv_;
    int count_;
};

// Extracts the i-th fenced ```json block of a prompt.
std::string fenced_block(const std::string& text, std::size_t index) {
    const std::string open = "```json";
    const std::string close = "```";
    std::size_t pos = 0;
    for (std::size_t i = 0; i <= index; ++i) {
        pos = text.find(open, pos);
        if (pos == std::string::npos) return "";
        pos += open.size();
        if (i == index) {
            std::size_t end = text.find(close, pos);
            if (end == std::string::npos) return "";
            return text.substr(pos, end - pos);
        }
        pos = text.find(close, pos);
        if (pos == std::string::npos) return "";
        pos += close.size();
    }
    return "";
}

std::string line_after(const std::string& text, const std::string& label) {
    auto pos = text.find(label);
    if (pos == std::string::npos) return "";
    pos += label.size();
    auto end = text.find('\n', pos);
    std::string line = text.substr(pos, end == std::string::npos ? std::string::npos
                                                                 : end - pos);
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t'))
        line.erase(line.begin());
    while (!line.empty() && (line.back() == ' ' || line.back() == '\r')) line.pop_back();
    return line;
}

std::map<std::string, std::string> parse_schema_types(const std::string& schema_line) {
    // "Date (temporal), Genre (categorical), ..."
    std::map<std::string, std::string> out;
    std::istringstream in(schema_line);
    std::string entry;
    while (std::getline(in, entry, ',')) {
        auto open = entry.find('(');
        auto close = entry.find(')');
        if (open == std::string::npos || close == std::string::npos || close < open) continue;
        std::string name = entry.substr(0, open);
        while (!name.empty() && name.front() == ' ') name.erase(name.begin());
        while (!name.empty() && name.back() == ' ') name.pop_back();
        out[lower(name)] = entry.substr(open + 1, close - open - 1);
    }
    return out;
}

bool word_in(const std::string& text, const std::string& word) {
    if (word.empty()) return false;
    std::string t = lower(text), w = lower(word);
    std::size_t pos = 0;
    auto boundary = [&](std::size_t i) {
        return i >= t.size() || !(std::isalnum(static_cast<unsigned char>(t[i])) || t[i] == '_');
    };
    while ((pos = t.find(w, pos)) != std::string::npos) {
        bool left = pos == 0 || boundary(pos - 1);
        if (left && boundary(pos + w.size())) return true;
        ++pos;
    }
    return false;
}

// First word in `candidates` that is not a column name of the schema.
std::string pick_word(const std::vector<std::string>& candidates,
                      const std::map<std::string, std::string>& schema) {
    for (const auto& c : candidates) {
        bool collides = false;
        for (const auto& [col, ty] : schema)
            if (word_in(col, c) || col == lower(c)) collides = true;
        if (!collides) return c;
    }
    return candidates.front();
}

std::string shared_token(const std::vector<std::string>& columns) {
    if (columns.empty()) return "";
    auto tokens = [](const std::string& col) {
        std::set<std::string> out;
        std::istringstream in(spaced(col));
        std::string t;
        while (in >> t) out.insert(t);
        return out;
    };
    std::set<std::string> common = tokens(columns[0]);
    for (std::size_t i = 1; i < columns.size(); ++i) {
        std::set<std::string> next = tokens(columns[i]);
        std::set<std::string> inter;
        std::set_intersection(common.begin(), common.end(), next.begin(), next.end(),
                              std::inserter(inter, inter.begin()));
        common = inter;
    }
    return common.empty() ? "" : *common.begin();
}

std::string filter_op_word(const std::string& op) {
    if (op == "gt") return "above";
    if (op == "ge") return "at least";
    if (op == "lt") return "below";
    if (op == "le") return "at most";
    if (op == "eq") return "equal to";
    return "is";
}

std::string node_reference(const action_node& n,
                           const std::map<std::string, std::string>& schema) {
    auto dtype_phrase = [&](const std::string& col) {
        auto it = schema.find(lower(col));
        std::string ty = it == schema.end() ? "" : it->second;
        if (ty == "temporal") return std::string("over time");
        if (ty == "quantitative") return pick_word({"the measure", "the numbers"}, schema);
        return pick_word({"the categories", "the groups"}, schema);
    };
    switch (n.op) {
        case op_kind::mark:
            if (n.tag == ambiguity_tag::explicit_ && n.params.size() == 1)
                return n.params[0] + " chart";
            return "chart";
        case op_kind::task:
            return n.params.empty() ? "analysis" : n.params[0];
        case op_kind::channel_map:
        case op_kind::column_select: {
            if (n.tag == ambiguity_tag::explicit_ && n.params.size() == 1)
                return spaced(n.params[0]);
            if (n.tag == ambiguity_tag::ambiguous) {
                if (!n.nl_hint.empty()) return lower(n.nl_hint);
                std::string tok = shared_token(n.params);
                return tok.empty() ? pick_word({"the value", "the figure"}, schema) : tok;
            }
            if (!n.params.empty()) return dtype_phrase(n.params[0]);
            if (n.chan && *n.chan == channel::color)
                return pick_word({"broken down", "split up"}, schema);
            return pick_word({"the relevant field", "the needed field"}, schema);
        }
        case op_kind::value_filter: {
            if (!n.pred) return "filtered";
            std::string values;
            for (std::size_t i = 0; i < n.pred->values.size(); ++i) {
                if (i) values += " or ";
                values += n.pred->values[i];
            }
            if (n.tag == ambiguity_tag::implicit) return values.empty() ? "filtered" : values;
            return spaced(n.pred->column) + " " + filter_op_word(n.pred->op) + " " + values;
        }
        case op_kind::bin: {
            if (n.tag == ambiguity_tag::explicit_ && n.params.size() == 1)
                return "by " + n.params[0];
            return pick_word({"grouped over time", "bucketed"}, schema);
        }
        case op_kind::aggregate: {
            if (n.tag == ambiguity_tag::explicit_ && n.params.size() == 1) {
                const std::string& fn = n.params[0];
                if (fn == "mean") return pick_word({"average", "typical"}, schema);
                if (fn == "sum") return pick_word({"total", "combined"}, schema);
                if (fn == "count") return pick_word({"count", "tally"}, schema);
                if (fn == "min") return pick_word({"lowest", "smallest"}, schema);
                if (fn == "max") return pick_word({"highest", "largest"}, schema);
                return fn;
            }
            return pick_word({"summarized", "rolled up"}, schema);
        }
        case op_kind::sort: {
            if (n.tag == ambiguity_tag::explicit_ && n.params.size() == 1)
                return "in " + n.params[0] + " order";
            return pick_word({"arranged", "ordered"}, schema);
        }
    }
    return "the chart";
}

std::string compose_query(const std::string& style, const std::string& mark_ref,
                          const std::vector<std::string>& parts) {
    std::string joined;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) joined += ", ";
        joined += parts[i];
    }
    if (style == "question")
        return "Could you draw a " + mark_ref + " covering " + joined + "?";
    if (style == "caption") return "A " + mark_ref + " covering " + joined + ".";
    return "Show a " + mark_ref + " covering " + joined + ".";
}

std::string null_generate(const std::string& prompt) {
    std::string tree_text = fenced_block(prompt, 0);
    json nodes_json;
    try {
        json doc = json::parse(tree_text);
        nodes_json = doc.contains("nodes") ? doc["nodes"] : doc;
    } catch (const json::exception&) {
        return "NL: Show the data.\nReference Tree: []";
    }
    vis_tree tree;
    try {
        tree = tree_from_json(json{{"table", ""}, {"nodes", nodes_json}});
    } catch (const error&) {
        return "NL: Show the data.\nReference Tree: []";
    }
    auto schema = parse_schema_types(line_after(prompt, "Data Schema:"));
    std::string style = lower(line_after(prompt, "NL Style:"));

    std::string mark_ref = "chart";
    std::vector<std::string> parts;
    std::vector<std::string> refs;
    for (const auto& n : tree.nodes) {
        std::string ref = node_reference(n, schema);
        refs.push_back(ref);
        if (n.op == op_kind::mark)
            mark_ref = ref;
        else
            parts.push_back(ref);
    }
    std::string text = compose_query(style, mark_ref, parts);

    json out_nodes = json::array();
    json tree_json = tree_to_json(tree);
    for (std::size_t i = 0; i < refs.size(); ++i) {
        json jn = tree_json["nodes"][i];
        jn["nl_reference"] = refs[i];
        out_nodes.push_back(jn);
    }
    return "NL: " + text + "\nReference Tree: " + out_nodes.dump();
}

std::string null_verify(const std::string& prompt) {
    std::string refs_text = fenced_block(prompt, 1);
    json l1 = json::array();
    try {
        json refs = json::parse(refs_text);
        for (std::size_t i = 0; i < refs.size(); ++i)
            l1.push_back(json::array(
                {refs[i].value("nl_reference", ""), static_cast<int>(i)}));
    } catch (const json::exception&) {
    }
    return json{{"l1", l1}, {"l2", json::array()}}.dump();
}

}  // namespace

std::string message_digest(const std::vector<chat_message>& messages) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
    };
    for (const auto& m : messages) {
        mix(m.role);
        h ^= 0x1f;
        h *= 1099511628211ull;
        mix(m.content);
        h ^= 0x1e;
        h *= 1099511628211ull;
    }
    std::ostringstream out;
    out << std::hex << h;
    return out.str();
}

// ---- http backend ----

struct http_llm_client::impl {
    llm_options opts;
    std::string scheme_host;
    std::string base_path;
    semaphore sem;
    std::function<void(int)> sleeper;

    impl(llm_options o, std::function<void(int)> s)
        : opts(std::move(o)), sem(std::max(1, opts.max_concurrency)), sleeper(std::move(s)) {
        if (!sleeper)
            sleeper = [](int ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); };
        auto scheme_end = opts.base_url.find("://");
        std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
        auto path_start = opts.base_url.find('/', host_start);
        if (path_start == std::string::npos) {
            scheme_host = opts.base_url;
            base_path = "";
        } else {
            scheme_host = opts.base_url.substr(0, path_start);
            base_path = opts.base_url.substr(path_start);
        }
        while (!base_path.empty() && base_path.back() == '/') base_path.pop_back();
    }
};

http_llm_client::http_llm_client(llm_options opts, std::function<void(int)> sleeper)
    : impl_(std::make_unique<impl>(std::move(opts), std::move(sleeper))) {}

http_llm_client::~http_llm_client() = default;

std::string http_llm_client::chat(const std::vector<chat_message>& messages) {
    impl_->sem.acquire();
    struct releaser {
        semaphore& s;
        ~releaser() { s.release(); }
    } rel{impl_->sem};

    json body;
    body["model"] = impl_->opts.model;
    body["temperature"] = impl_->opts.temperature;
    json msgs = json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    body["messages"] = msgs;

    httplib::Client cli(impl_->scheme_host);
    cli.set_connection_timeout(0, impl_->opts.timeout_ms * 1000);
    cli.set_read_timeout(impl_->opts.timeout_ms / 1000, (impl_->opts.timeout_ms % 1000) * 1000);
    httplib::Headers headers;
    if (const char* key = std::getenv(impl_->opts.api_key_env.c_str());
        key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);

    std::string last_error;
    for (int attempt = 0; attempt <= impl_->opts.max_retries; ++attempt) {
        if (attempt > 0) {
            int backoff = impl_->opts.retry_backoff_ms * (1 << (attempt - 1));
            impl_->sleeper(backoff);
        }
        auto res = cli.Post(impl_->base_path + "/chat/completions", headers, body.dump(),
                            "application/json");
        if (!res) {
            last_error = "connection failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "http status " + std::to_string(res->status);
            if (res->has_header("Retry-After")) {
                int secs = std::atoi(res->get_header_value("Retry-After").c_str());
                if (secs > 0 && attempt < impl_->opts.max_retries)
                    impl_->sleeper(secs * 1000);
            }
            continue;
        }
        if (res->status != 200)
            throw backend_error("chat endpoint returned status " +
                                std::to_string(res->status) + ": " + res->body);
        try {
            json doc = json::parse(res->body);
            return doc.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception& e) {
            throw backend_error(std::string("malformed chat response: ") + e.what());
        }
    }
    throw backend_error("chat request failed after " +
                        std::to_string(impl_->opts.max_retries + 1) + " attempts: " +
                        last_error);
}

// ---- null backend ----

std::string null_llm_client::chat(const std::vector<chat_message>& messages) {
    std::string prompt;
    for (const auto& m : messages) prompt += m.content + "\n";
    if (prompt.find("Reference Tree:") != std::string::npos) return null_generate(prompt);
    if (prompt.find("\"l1\"") != std::string::npos) return null_verify(prompt);
    return "{}";
}

// ---- replay / record ----

replay_llm_client::replay_llm_client(const std::string& fixture_path) {
    std::ifstream in(fixture_path);
    if (!in) throw backend_error("cannot open replay fixture: " + fixture_path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json entry = json::parse(line, nullptr, false);
        if (entry.is_discarded()) throw backend_error("bad replay fixture line");
        responses_[entry.value("key", "")] = entry.value("response", "");
    }
}

std::string replay_llm_client::chat(const std::vector<chat_message>& messages) {
    auto it = responses_.find(message_digest(messages));
    if (it == responses_.end())
        throw backend_error("no recorded response for request digest " +
                            message_digest(messages));
    return it->second;
}

recording_llm_client::recording_llm_client(std::shared_ptr<llm_client> inner,
                                           std::string fixture_path)
    : inner_(std::move(inner)), path_(std::move(fixture_path)) {}

std::string recording_llm_client::chat(const std::vector<chat_message>& messages) {
    std::string response = inner_->chat(messages);
    std::string key = message_digest(messages);
    std::lock_guard lk(mu_);
    if (seen_.emplace(key, response).second) {
        std::ofstream out(path_, std::ios::app);
        if (!out) throw backend_error("cannot append to replay fixture: " + path_);
        out << json{{"key", key}, {"response", response}}.dump() << "\n";
    }
    return response;
}

}  // namespace ambivis
