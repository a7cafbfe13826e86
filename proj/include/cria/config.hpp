#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace cria {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat key=value configuration with declared keys and documented
// defaults. Precedence: command-line flag > config file > default.
class Config {
public:
    void define(const std::string& key, const std::string& default_value, const std::string& help);

    void load_file(const std::string& path);
    void set_flag(const std::string& key, const std::string& value);

    bool defined(const std::string& key) const { return schema_.count(key) != 0; }
    // true when the value came from a file or flag rather than the default
    bool overridden(const std::string& key) const;

    std::string get(const std::string& key) const;
    long long get_int(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    // key, default, help triples in definition order (for --help output)
    std::vector<std::array<std::string, 3>> describe() const;

private:
    struct Entry {
        std::string default_value, help;
        int order = 0;
    };
    std::map<std::string, Entry> schema_;
    std::map<std::string, std::string> file_values_, flag_values_;
    int next_order_ = 0;
};

}  // namespace cria
