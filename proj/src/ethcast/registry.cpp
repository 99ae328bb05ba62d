#include "ethcast/registry.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "ethcast/common.hpp"

namespace ethcast {

namespace {

using ordered_json = nlohmann::ordered_json;

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new()) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) fail(ErrorKind::Io, "sha256 init failed");
    }
    ~Sha256() { EVP_MD_CTX_free(ctx_); }
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(const void* data, std::size_t len) {
        if (EVP_DigestUpdate(ctx_, data, len) != 1) fail(ErrorKind::Io, "sha256 update failed");
    }
    std::string hex() {
        std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx_, md.data(), &len) != 1) fail(ErrorKind::Io, "sha256 final failed");
        static constexpr char digits[] = "0123456789abcdef";
        std::string out;
        out.reserve(2 * len);
        for (unsigned int i = 0; i < len; ++i) {
            out.push_back(digits[md[i] >> 4]);
            out.push_back(digits[md[i] & 0xF]);
        }
        return out;
    }

private:
    EVP_MD_CTX* ctx_;
};

class FileLock {
public:
    explicit FileLock(const std::filesystem::path& path) {
        fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
        if (fd_ < 0) fail(ErrorKind::Io, "cannot open lock file " + path.string());
        if (::flock(fd_, LOCK_EX) != 0) {
            ::close(fd_);
            fail(ErrorKind::Io, "cannot lock " + path.string());
        }
    }
    ~FileLock() {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    FileLock(const FileLock&) = delete;
    FileLock& operator=(const FileLock&) = delete;

private:
    int fd_ = -1;
};

ordered_json metrics_to_json(const MetricReport& m) {
    ordered_json j;
    j["mse"] = m.mse;
    j["mae"] = m.mae;
    j["rmse"] = m.rmse;
    j["n"] = m.n;
    j["scale_label"] = m.scale_label;
    return j;
}

MetricReport metrics_from_json(const ordered_json& j) {
    MetricReport m;
    m.mse = j.at("mse").get<double>();
    m.mae = j.at("mae").get<double>();
    m.rmse = j.at("rmse").get<double>();
    m.n = j.at("n").get<std::size_t>();
    m.scale_label = j.at("scale_label").get<std::string>();
    return m;
}

std::string read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<ExperimentRecord> parse_registry(std::string_view bytes, const std::filesystem::path& path) {
    std::vector<ExperimentRecord> records;
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        const std::size_t nl = bytes.find('\n', pos);
        const std::size_t index = records.size();
        if (nl == std::string_view::npos) {
            fail(ErrorKind::Integrity, path.string() + ": record " + std::to_string(index) + " is truncated");
        }
        try {
            records.push_back(record_from_json(bytes.substr(pos, nl - pos)));
        } catch (const Error& e) {
            fail(ErrorKind::Integrity, path.string() + ": record " + std::to_string(index) + ": " + e.what());
        }
        pos = nl + 1;
    }
    return records;
}

}  // namespace

std::string sha256_hex(std::string_view data) {
    Sha256 h;
    h.update(data.data(), data.size());
    return h.hex();
}

std::string sha256_file_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
    Sha256 h;
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0) h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    return h.hex();
}

std::string experiment_hash(std::string_view config_text, std::uint64_t seed, std::string_view dataset_digest) {
    Sha256 h;
    const std::string seed_text = "\nseed=" + std::to_string(seed) + "\ndataset=";
    h.update(config_text.data(), config_text.size());
    h.update(seed_text.data(), seed_text.size());
    h.update(dataset_digest.data(), dataset_digest.size());
    return h.hex();
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string record_to_json(const ExperimentRecord& r) {
    ordered_json j;
    j["id"] = r.id;
    j["content_hash"] = r.content_hash;
    j["timestamp"] = r.timestamp;
    j["protocol"] = r.protocol;
    j["model"] = r.model;
    j["dataset"] = r.dataset;
    j["dataset_digest"] = r.dataset_digest;
    j["seed"] = r.seed;
    j["metrics"] = r.metrics ? metrics_to_json(*r.metrics) : ordered_json(nullptr);
    j["artifacts"] = {{"checkpoint", r.artifacts.checkpoint}, {"predictions", r.artifacts.predictions}};
    j["config"] = r.config_snapshot;
    return j.dump();
}

ExperimentRecord record_from_json(std::string_view line) {
    ordered_json j;
    try {
        j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Integrity, std::string("malformed JSON (") + e.what() + ")");
    }
    try {
        ExperimentRecord r;
        r.id = j.at("id").get<std::string>();
        r.content_hash = j.at("content_hash").get<std::string>();
        r.timestamp = j.at("timestamp").get<std::string>();
        r.protocol = j.at("protocol").get<std::string>();
        r.model = j.at("model").get<std::string>();
        r.dataset = j.at("dataset").get<std::string>();
        r.dataset_digest = j.at("dataset_digest").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        if (!j.at("metrics").is_null()) r.metrics = metrics_from_json(j.at("metrics"));
        r.artifacts.checkpoint = j.at("artifacts").at("checkpoint").get<std::string>();
        r.artifacts.predictions = j.at("artifacts").at("predictions").get<std::string>();
        r.config_snapshot = j.at("config").get<std::string>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Integrity, std::string("missing or mistyped field (") + e.what() + ")");
    }
}

std::vector<ExperimentRecord> read_registry(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) return {};
    return parse_registry(read_bytes(path), path);
}

std::vector<ExperimentRecord> registry_append(ExperimentRecord record, const std::filesystem::path& path) {
    if (record.content_hash.size() < 16) fail(ErrorKind::Usage, "record has no content hash");
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    FileLock lock(std::filesystem::path(path.string() + ".lock"));

    const std::string existing = std::filesystem::exists(path) ? read_bytes(path) : std::string{};
    std::vector<ExperimentRecord> records = parse_registry(existing, path);

    char ordinal[16];
    std::snprintf(ordinal, sizeof ordinal, "%04zu", records.size() + 1);
    record.id = record.content_hash.substr(0, 16) + "-" + ordinal;

    const std::filesystem::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::Io, "cannot write " + tmp.string());
        out << existing << record_to_json(record) << '\n';
        out.flush();
        if (!out) fail(ErrorKind::Io, "short write to " + tmp.string());
    }
    {
        const int fd = ::open(tmp.c_str(), O_RDONLY | O_CLOEXEC);
        if (fd >= 0) {
            ::fsync(fd);
            ::close(fd);
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        fail(ErrorKind::Io, "cannot replace " + path.string() + ": " + ec.message());
    }
    records.push_back(std::move(record));
    return records;
}

}  // namespace ethcast
