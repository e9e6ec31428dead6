#include "asyncra/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace asyncra::cfg {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

Config Config::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str());
}

Config Config::from_string(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::runtime_error("config line " + std::to_string(lineno) +
                                         ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(lineno) +
                                     ": expected key = value");
        cfg.set(section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

void Config::set(const std::string& section, const std::string& key,
                 const std::string& value) {
    sections_[section][key] = value;
}

std::optional<std::string> Config::get(const std::string& section,
                                       const std::string& key) const {
    const auto s = sections_.find(section);
    if (s == sections_.end()) return std::nullopt;
    const auto k = s->second.find(key);
    if (k == s->second.end()) return std::nullopt;
    return k->second;
}

double Config::get_double(const std::string& section, const std::string& key,
                          double fallback) const {
    const auto v = get(section, key);
    return v ? std::stod(*v) : fallback;
}

std::int64_t Config::get_int(const std::string& section, const std::string& key,
                             std::int64_t fallback) const {
    const auto v = get(section, key);
    return v ? std::stoll(*v) : fallback;
}

std::string Config::get_string(const std::string& section,
                               const std::string& key,
                               const std::string& fallback) const {
    const auto v = get(section, key);
    return v ? *v : fallback;
}

std::string Config::canonical() const {
    std::string out;
    for (const auto& [sec, kv] : sections_) {
        out += "[" + sec + "]\n";
        for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    }
    return out;
}

std::uint64_t Config::hash() const {
    const std::string text = canonical();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag_seed,
                           const Config& config) {
    if (flag_seed) return *flag_seed;
    if (const auto v = config.get("global", "seed"))
        return std::stoull(*v);
    if (const char* env = std::getenv("ASYNC_RA_SEED"))
        return std::stoull(env);
    return 1;
}

std::string format_double(double v) {
    char buf[64];
    // shortest representation that round-trips a double
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    double back = std::strtod(buf, nullptr);
    for (int prec = 1; prec < 17; ++prec) {
        char cand[64];
        std::snprintf(cand, sizeof(cand), "%.*g", prec, v);
        back = std::strtod(cand, nullptr);
        if (back == v) return cand;
    }
    return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::string& header,
                     std::uint64_t config_hash, std::uint64_t seed) {
    if (path == "-" || path.empty()) {
        out_ = &std::cout;
        owned_ = false;
    } else {
        auto* f = new std::ofstream(path);
        if (!*f) {
            delete f;
            throw std::runtime_error("cannot open output file: " + path);
        }
        out_ = f;
        owned_ = true;
    }
    char stamp[64];
    std::snprintf(stamp, sizeof(stamp), "%016llx",
                  static_cast<unsigned long long>(config_hash));
    *out_ << "# config_hash=" << stamp << " seed=" << seed << "\n" << header
          << "\n";
}

CsvWriter::~CsvWriter() {
    out_->flush();
    if (owned_) delete out_;
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i)
        *out_ << (i ? "," : "") << cells[i];
    *out_ << "\n";
}

std::ostream& CsvWriter::stream() { return *out_; }

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(std::stod(item));
    }
    if (out.empty())
        throw std::invalid_argument("expected a comma-separated list: " + csv);
    return out;
}

} // namespace asyncra::cfg
