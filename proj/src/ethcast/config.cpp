#include "ethcast/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

namespace ethcast {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

bool known_key(std::string_view key) {
    const auto& keys = config_keys();
    return std::any_of(keys.begin(), keys.end(), [&](const ConfigKey& k) { return key == k.name; });
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
    fail(ErrorKind::Config,
         "config key " + std::string(key) + ": expected " + std::string(expected) + ", got \"" + std::string(value) + "\"");
}

class Reader {
public:
    explicit Reader(const ConfigFile& file) : file_(file) {}

    std::optional<std::string> text(std::string_view key) const { return file_.get(key); }

    std::optional<std::size_t> count(std::string_view key) const {
        const auto v = file_.get(key);
        if (!v) return std::nullopt;
        std::size_t out = 0;
        const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
        if (ec != std::errc{} || p != v->data() + v->size() || v->empty()) bad_value(key, *v, "a non-negative integer");
        return out;
    }

    std::optional<double> real(std::string_view key) const {
        const auto v = file_.get(key);
        if (!v) return std::nullopt;
        double out = 0.0;
        const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
        if (ec != std::errc{} || p != v->data() + v->size() || v->empty()) bad_value(key, *v, "a number");
        return out;
    }

    std::optional<std::vector<std::size_t>> counts(std::string_view key) const {
        const auto v = file_.get(key);
        if (!v) return std::nullopt;
        std::vector<std::size_t> out;
        std::string_view rest = *v;
        while (true) {
            const auto comma = rest.find(',');
            const auto item = trim(rest.substr(0, comma));
            std::size_t n = 0;
            const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), n);
            if (item.empty() || ec != std::errc{} || p != item.data() + item.size()) {
                bad_value(key, *v, "a comma-separated list of integers");
            }
            out.push_back(n);
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        return out;
    }

    // Runs parse(value) and rewrites any Config error so it names the key.
    template <typename F>
    auto parsed(std::string_view key, F parse) const -> std::optional<decltype(parse(std::string_view{}))> {
        const auto v = file_.get(key);
        if (!v) return std::nullopt;
        try {
            return parse(*v);
        } catch (const Error& e) {
            fail(ErrorKind::Config, "config key " + std::string(key) + ": " + e.what());
        }
    }

private:
    const ConfigFile& file_;
};

template <typename T>
void assign(T& target, const std::optional<T>& value) {
    if (value) target = *value;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = {
        {"data.path", "price CSV to ingest"},
        {"data.name", "dataset label used in records and tables (default: file stem)"},
        {"data.format", "kaggle (Date,Price,Open,High,Low,Vol.,Change %) or canonical"},
        {"data.date_column", "header of the date column"},
        {"data.open_column", "header of the open column"},
        {"data.high_column", "header of the high column"},
        {"data.low_column", "header of the low column"},
        {"data.close_column", "header of the close column"},
        {"data.volume_column", "header of the volume column (empty: absent)"},
        {"data.change_column", "header of the change-percent column (empty: absent)"},
        {"data.gap_policy", "ffill or strict"},
        {"data.channel", "open, high, low, close or volume"},
        {"data.seq_len", "input window length in days"},
        {"data.pred_len", "forecast horizon in days"},
        {"data.train_ratio", "chronological train fraction"},
        {"data.val_ratio", "chronological validation fraction"},
        {"data.test_ratio", "chronological test fraction"},
        {"model.kind", "gpt2, llama, ann, mlp, lstm or patchtst"},
        {"model.preset", "gpt2, llama2_70b or llama3_70b block shapes before overrides"},
        {"model.n_layers", "number of layers"},
        {"model.hidden", "hidden size"},
        {"model.n_heads", "attention heads"},
        {"model.n_kv_groups", "key/value heads (llama grouped-query attention)"},
        {"model.ffn_dim", "feed-forward dimension"},
        {"model.max_positions", "max embedding position"},
        {"model.vocab_size", "vocabulary size of the source checkpoint (recorded only)"},
        {"model.patch_len", "patch size"},
        {"model.stride", "patch stride"},
        {"model.activation", "gelu or swiglu"},
        {"model.rope_base", "rotary base frequency (llama)"},
        {"model.norm_eps", "normalization epsilon"},
        {"model.freeze", "fpt, full or linear_probe"},
        {"model.weights", "pretrained weight archive (.ecwa)"},
        {"model.hidden_sizes", "ann/mlp hidden widths, comma separated"},
        {"model.units", "lstm hidden units"},
        {"model.dropout", "mlp/lstm dropout rate"},
        {"train.lr", "learning rate (cosine schedule start)"},
        {"train.min_lr", "cosine schedule floor"},
        {"train.batch_size", "batch size"},
        {"train.epochs", "maximum epochs"},
        {"train.optimizer", "adam"},
        {"train.patience", "early stopping patience"},
        {"train.accum_steps", "gradient accumulation steps"},
        {"train.loss_scale", "loss scale for mixed-precision style scaling"},
        {"train.seed", "random seed"},
        {"train.protocol", "short_term or few_shot"},
        {"train.few_shot_fraction", "leading fraction of train timesteps kept in few_shot"},
        {"output.dir", "artifact directory"},
        {"output.registry", "registry file (default: $ETHCAST_REGISTRY/registry.jsonl, then <dir>/registry.jsonl)"},
        {"output.checkpoint", "checkpoint for evaluate / export-plot-data"},
    };
    return keys;
}

ConfigFile ConfigFile::parse(std::string_view text, std::string_view origin) {
    ConfigFile file;
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        const auto where = std::string(origin) + ":" + std::to_string(line_no) + ": ";

        const auto line = trim(raw);
        if (line.empty() || line.front() == '#' || line.front() == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(ErrorKind::Config, where + "unterminated section header");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            if (section.empty()) fail(ErrorKind::Config, where + "empty section name");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) fail(ErrorKind::Config, where + "expected key = value");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key.empty()) fail(ErrorKind::Config, where + "missing key");
        std::string full = key.find('.') != std::string_view::npos || section.empty()
                               ? std::string(key)
                               : section + "." + std::string(key);
        if (!known_key(full)) fail(ErrorKind::Config, where + "unknown config key \"" + full + "\"");
        file.values_[full] = std::string(value);
    }
    return file;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open config " + path.string());
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return parse(text, path.string());
}

void ConfigFile::set(std::string_view key, std::string value) {
    if (!known_key(key)) fail(ErrorKind::Config, "unknown config key \"" + std::string(key) + "\"");
    values_[std::string(key)] = std::move(value);
}

std::optional<std::string> ConfigFile::get(std::string_view key) const {
    const auto it = values_.find(std::string(key));
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

std::string ConfigFile::identity_text() const {
    std::ostringstream out;
    for (const auto& [k, v] : values_) {
        if (k.rfind("output.", 0) == 0 || k == "data.path" || k == "train.seed") continue;
        out << k << '=' << v << '\n';
    }
    return out.str();
}

std::string ConfigFile::text() const {
    std::ostringstream out;
    for (const auto& [k, v] : values_) out << k << '=' << v << '\n';
    return out.str();
}

ModelKind parse_model_kind(std::string_view name) {
    if (name == "gpt2") return ModelKind::Gpt2;
    if (name == "llama") return ModelKind::Llama;
    if (name == "ann") return ModelKind::Ann;
    if (name == "mlp") return ModelKind::Mlp;
    if (name == "lstm") return ModelKind::Lstm;
    if (name == "patchtst") return ModelKind::PatchTst;
    fail(ErrorKind::Config, "unknown model \"" + std::string(name) + "\" (gpt2|llama|ann|mlp|lstm|patchtst)");
}

const char* model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::Gpt2: return "gpt2";
        case ModelKind::Llama: return "llama";
        case ModelKind::Ann: return "ann";
        case ModelKind::Mlp: return "mlp";
        case ModelKind::Lstm: return "lstm";
        case ModelKind::PatchTst: return "patchtst";
    }
    return "?";
}

bool is_backbone(ModelKind kind) { return kind == ModelKind::Gpt2 || kind == ModelKind::Llama; }

ExperimentConfig resolve_config(const ConfigFile& file) {
    const Reader r(file);
    ExperimentConfig cfg;
    cfg.identity = file.identity_text();
    cfg.snapshot = file.text();

    // data
    auto& d = cfg.data;
    assign(d.path, r.text("data.path"));
    if (const auto fmt = r.text("data.format")) {
        if (*fmt == "canonical") {
            d.schema = ColumnSchema::canonical();
        } else if (*fmt != "kaggle") {
            bad_value("data.format", *fmt, "kaggle or canonical");
        }
    }
    assign(d.schema.date, r.text("data.date_column"));
    assign(d.schema.open, r.text("data.open_column"));
    assign(d.schema.high, r.text("data.high_column"));
    assign(d.schema.low, r.text("data.low_column"));
    assign(d.schema.close, r.text("data.close_column"));
    assign(d.schema.volume, r.text("data.volume_column"));
    assign(d.schema.change, r.text("data.change_column"));
    if (const auto g = r.text("data.gap_policy")) {
        if (*g == "ffill") d.gap_policy = GapPolicy::ForwardFill;
        else if (*g == "strict") d.gap_policy = GapPolicy::Strict;
        else bad_value("data.gap_policy", *g, "ffill or strict");
    }
    assign(d.channel, r.parsed("data.channel", parse_channel));
    assign(d.seq_len, r.count("data.seq_len"));
    assign(d.pred_len, r.count("data.pred_len"));
    assign(d.split.train_ratio, r.real("data.train_ratio"));
    assign(d.split.val_ratio, r.real("data.val_ratio"));
    assign(d.split.test_ratio, r.real("data.test_ratio"));
    if (d.seq_len < 1) bad_value("data.seq_len", "0", "at least 1");
    if (d.pred_len < 1) bad_value("data.pred_len", "0", "at least 1");
    if (const auto n = r.text("data.name")) {
        d.name = *n;
    } else if (!d.path.empty()) {
        d.name = std::filesystem::path(d.path).stem().string();
    }

    // model
    auto& m = cfg.model;
    assign(m.kind, r.parsed("model.kind", parse_model_kind));
    assign(m.freeze, r.parsed("model.freeze", parse_freeze_mode));
    assign(m.weights, r.text("model.weights"));
    assign(m.vocab_size, r.count("model.vocab_size"));
    if (is_backbone(m.kind)) {
        std::string preset = m.kind == ModelKind::Gpt2 ? "gpt2" : "llama3_70b";
        assign(preset, r.text("model.preset"));
        if (preset == "gpt2") m.backbone = BackboneConfig::gpt2();
        else if (preset == "llama2_70b") m.backbone = BackboneConfig::llama2_70b();
        else if (preset == "llama3_70b") m.backbone = BackboneConfig::llama3_70b();
        else bad_value("model.preset", preset, "gpt2, llama2_70b or llama3_70b");
        if ((m.backbone.variant == Variant::Gpt2) != (m.kind == ModelKind::Gpt2)) {
            fail(ErrorKind::Config, "config key model.preset: \"" + preset + "\" does not fit model kind " +
                                        model_kind_name(m.kind));
        }
        auto& b = m.backbone;
        const bool heads_given = file.has("model.n_heads");
        assign(b.n_layers, r.count("model.n_layers"));
        assign(b.hidden, r.count("model.hidden"));
        assign(b.n_heads, r.count("model.n_heads"));
        if (m.kind == ModelKind::Gpt2 && heads_given) b.n_kv_groups = b.n_heads;
        assign(b.n_kv_groups, r.count("model.n_kv_groups"));
        assign(b.ffn_dim, r.count("model.ffn_dim"));
        assign(b.max_positions, r.count("model.max_positions"));
        assign(b.patch_len, r.count("model.patch_len"));
        assign(b.stride, r.count("model.stride"));
        assign(b.activation, r.parsed("model.activation", parse_activation));
        assign(b.rope_base, r.real("model.rope_base"));
        assign(b.norm_eps, r.real("model.norm_eps"));
        b.seq_len = d.seq_len;
        b.pred_len = d.pred_len;
        try {
            b.validate();
        } catch (const Error& e) {
            fail(ErrorKind::Config, std::string("model: ") + e.what());
        }
    } else {
        const BaselineKind bk = m.kind == ModelKind::Ann   ? BaselineKind::Ann
                                : m.kind == ModelKind::Mlp ? BaselineKind::Mlp
                                : m.kind == ModelKind::Lstm ? BaselineKind::Lstm
                                                            : BaselineKind::PatchTst;
        auto& b = m.baseline;
        b = BaselineConfig::defaults(bk);
        assign(b.hidden_sizes, r.counts("model.hidden_sizes"));
        assign(b.units, r.count("model.units"));
        assign(b.dropout, r.real("model.dropout"));
        assign(b.n_layers, r.count("model.n_layers"));
        assign(b.hidden, r.count("model.hidden"));
        assign(b.n_heads, r.count("model.n_heads"));
        assign(b.ffn_dim, r.count("model.ffn_dim"));
        assign(b.patch_len, r.count("model.patch_len"));
        assign(b.stride, r.count("model.stride"));
        b.seq_len = d.seq_len;
        b.pred_len = d.pred_len;
        try {
            b.validate();
        } catch (const Error& e) {
            fail(ErrorKind::Config, std::string("model: ") + e.what());
        }
    }

    // train
    auto& t = cfg.train;
    assign(t.base_lr, r.real("train.lr"));
    assign(t.min_lr, r.real("train.min_lr"));
    assign(t.batch_size, r.count("train.batch_size"));
    assign(t.max_epochs, r.count("train.epochs"));
    assign(t.patience, r.count("train.patience"));
    assign(t.accum_steps, r.count("train.accum_steps"));
    assign(t.loss_scale, r.real("train.loss_scale"));
    if (const auto seed = r.count("train.seed")) t.seed = *seed;
    assign(t.protocol, r.parsed("train.protocol", parse_protocol));
    assign(t.few_shot_fraction, r.real("train.few_shot_fraction"));
    if (const auto opt = r.text("train.optimizer"); opt && *opt != "adam") {
        bad_value("train.optimizer", *opt, "adam");
    }
    if (!file.has("train.min_lr")) t.min_lr = t.base_lr / 100.0;
    try {
        t.validate();
    } catch (const Error& e) {
        fail(ErrorKind::Config, std::string("train: ") + e.what());
    }
    m.baseline.seed = t.seed;

    // output
    assign(cfg.output.dir, r.text("output.dir"));
    assign(cfg.output.registry, r.text("output.registry"));
    assign(cfg.output.checkpoint, r.text("output.checkpoint"));
    return cfg;
}

}  // namespace ethcast
