#include "wrib/config.hpp"

#include "wrib/common.hpp"
#include "wrib/errors.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace wrib {
namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) {
        return {};
    }
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::string render_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v); // shortest round trip
    return std::string(buf, ptr);
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) {
            throw std::invalid_argument(value);
        }
        return v;
    } catch (const std::exception&) {
        throw BadConfig("config: bad number for '" + key + "': " + value);
    }
}

int64_t parse_int(const std::string& key, const std::string& value) {
    int64_t v = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw BadConfig("config: bad integer for '" + key + "': " + value);
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw BadConfig("config: bad boolean for '" + key + "': " + value);
}

struct Field {
    std::string key;
    std::function<std::string(const TrainConfig&)> get;
    std::function<void(TrainConfig&, const std::string&)> set;
};

#define WRIB_DOUBLE_FIELD(name)                                                       \
    Field{#name, [](const TrainConfig& c) { return render_double(c.name); },          \
          [](TrainConfig& c, const std::string& v) { c.name = parse_double(#name, v); }}
#define WRIB_INT_FIELD(name)                                                          \
    Field{#name, [](const TrainConfig& c) { return std::to_string(c.name); },         \
          [](TrainConfig& c, const std::string& v) { c.name = parse_int(#name, v); }}
#define WRIB_BOOL_FIELD(name)                                                         \
    Field{#name, [](const TrainConfig& c) { return c.name ? "true" : "false"; },      \
          [](TrainConfig& c, const std::string& v) { c.name = parse_bool(#name, v); }}
#define WRIB_STRING_FIELD(name)                                                       \
    Field{#name, [](const TrainConfig& c) { return c.name; },                         \
          [](TrainConfig& c, const std::string& v) { c.name = v; }}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        WRIB_DOUBLE_FIELD(lambda_pixel),
        WRIB_DOUBLE_FIELD(lambda_feat_rec),
        WRIB_DOUBLE_FIELD(lambda_mrf),
        WRIB_DOUBLE_FIELD(lambda_feat_con),
        WRIB_DOUBLE_FIELD(lambda_adv),
        WRIB_DOUBLE_FIELD(lr_g),
        WRIB_DOUBLE_FIELD(lr_d),
        WRIB_DOUBLE_FIELD(beta1),
        WRIB_DOUBLE_FIELD(beta2),
        WRIB_INT_FIELD(batch_size),
        WRIB_INT_FIELD(iters_sr),
        WRIB_INT_FIELD(iters_ft),
        WRIB_INT_FIELD(checkpoint_every),
        Field{"seed", [](const TrainConfig& c) { return std::to_string(c.seed); },
              [](TrainConfig& c, const std::string& v) {
                  c.seed = static_cast<uint64_t>(parse_int("seed", v));
              }},
        WRIB_INT_FIELD(bottleneck_channels),
        WRIB_INT_FIELD(lstm_hidden),
        WRIB_INT_FIELD(K),
        WRIB_INT_FIELD(attention_level),
        WRIB_BOOL_FIELD(use_attention),
        WRIB_INT_FIELD(disc_channels),
        WRIB_INT_FIELD(crops_per_image),
        WRIB_INT_FIELD(mining_k),
        WRIB_STRING_FIELD(vgg_weights),
        WRIB_STRING_FIELD(lpips_weights),
        WRIB_STRING_FIELD(inception_weights),
    };
    return table;
}

#undef WRIB_DOUBLE_FIELD
#undef WRIB_INT_FIELD
#undef WRIB_BOOL_FIELD
#undef WRIB_STRING_FIELD

} // namespace

void TrainConfig::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) {
            throw BadConfig("config: " + what);
        }
    };
    require(lambda_pixel >= 0 && lambda_feat_rec >= 0 && lambda_mrf >= 0 &&
                lambda_feat_con >= 0 && lambda_adv >= 0,
            "loss weights must be non-negative");
    require(lr_g > 0 && lr_d > 0, "learning rates must be positive");
    require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, "betas must lie in [0, 1)");
    require(batch_size >= 1, "batch_size must be at least 1");
    require(iters_sr >= 0 && iters_ft >= 0, "iteration counts must be non-negative");
    require(checkpoint_every >= 1, "checkpoint_every must be at least 1");
    require(bottleneck_channels >= 32 && bottleneck_channels % 32 == 0,
            "bottleneck_channels must be a positive multiple of 32");
    require(lstm_hidden >= 0, "lstm_hidden must be non-negative");
    require(K >= 1 && kBottleneckSize % K == 0,
            "K must divide the bottleneck width " + std::to_string(kBottleneckSize));
    require(attention_level == 2 || attention_level == 4 || attention_level == 8 ||
                attention_level == 16,
            "attention_level must be one of 2, 4, 8, 16");
    require(disc_channels >= 1, "disc_channels must be at least 1");
    require(crops_per_image >= 1, "crops_per_image must be at least 1");
    require(mining_k >= 1, "mining_k must be at least 1");
}

TrainConfig TrainConfig::parse_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw BadConfig("config: cannot open '" + path.string() + "'");
    }
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_text(ss.str());
}

TrainConfig TrainConfig::parse_text(const std::string& text) {
    TrainConfig config;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw BadConfig("config: line " + std::to_string(lineno) + " has no '='");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto& table = fields();
        auto it = std::find_if(table.begin(), table.end(),
                               [&](const Field& f) { return f.key == key; });
        if (it == table.end()) {
            throw BadConfig("config: unknown key '" + key + "'");
        }
        it->set(config, value);
    }
    config.validate();
    return config;
}

std::string TrainConfig::serialize() const {
    std::vector<std::pair<std::string, std::string>> pairs;
    pairs.reserve(fields().size());
    for (const auto& f : fields()) {
        pairs.emplace_back(f.key, f.get(*this));
    }
    std::sort(pairs.begin(), pairs.end());
    std::string out;
    for (const auto& [k, v] : pairs) {
        out += k + " = " + v + "\n";
    }
    return out;
}

std::vector<std::string> TrainConfig::diff(const TrainConfig& other) const {
    std::vector<std::string> out;
    for (const auto& f : fields()) {
        const std::string mine = f.get(*this);
        const std::string theirs = f.get(other);
        if (mine != theirs) {
            out.push_back(f.key + ": " + mine + " vs " + theirs);
        }
    }
    return out;
}

} // namespace wrib
