#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace asyncra::cfg {

// Flat key=value store with [section] headers; '#' starts a comment.
// CLI flags override file values, so lookups go through set()/get().
class Config {
public:
    Config() = default;
    static Config from_file(const std::string& path);
    static Config from_string(const std::string& text);

    void set(const std::string& section, const std::string& key,
             const std::string& value);
    std::optional<std::string> get(const std::string& section,
                                   const std::string& key) const;
    double get_double(const std::string& section, const std::string& key,
                      double fallback) const;
    std::int64_t get_int(const std::string& section, const std::string& key,
                         std::int64_t fallback) const;
    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const;

    // canonical text (sorted sections/keys) and its FNV-1a hash, used to
    // stamp outputs for reproducibility
    std::string canonical() const;
    std::uint64_t hash() const;

private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

// master seed resolution: explicit flag > config > ASYNC_RA_SEED > default
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag_seed,
                           const Config& config);

// CSV writing with stable formatting (shortest round-trip representation,
// '.' decimal separator)
std::string format_double(double v);

class CsvWriter {
public:
    // opens the path (or stdout for "-") and writes the reproducibility
    // stamp plus the mandatory header row
    CsvWriter(const std::string& path, const std::string& header,
              std::uint64_t config_hash, std::uint64_t seed);
    ~CsvWriter();

    void row(const std::vector<std::string>& cells);
    std::ostream& stream();

private:
    std::ostream* out_;
    bool owned_;
};

std::vector<double> parse_double_list(const std::string& csv);

} // namespace asyncra::cfg
