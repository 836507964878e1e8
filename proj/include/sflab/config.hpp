#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace sflab {

struct ConfigError : std::runtime_error {
    std::string key;
    ConfigError(const std::string& k, const std::string& what) : std::runtime_error(what), key(k) {}
};

enum class KeyType { real, integer, string, boolean, list };

struct KeyDef {
    std::string name;
    KeyType type;
    std::string fallback;
    std::string help;
};

const std::vector<KeyDef>& config_schema();
const KeyDef* find_key(const std::string& name);

// resolved key -> textual value; every schema key present after resolution
class Config {
public:
    Config();  // built-in defaults

    void set(const std::string& key, const std::string& value);  // validates key and type
    const std::string& raw(const std::string& key) const;

    double real(const std::string& key) const;
    long integer(const std::string& key) const;
    std::uint64_t seed() const;
    bool boolean(const std::string& key) const;
    std::vector<double> list(const std::string& key) const;

    const std::map<std::string, std::string>& values() const { return values_; }
    bool operator==(const Config& o) const { return values_ == o.values_; }

private:
    std::map<std::string, std::string> values_;
};

// key = value lines, # comments; unknown keys rejected. Keys under "meta." are skipped.
void apply_config_text(Config& cfg, const std::string& text, const std::string& origin);
void apply_config_file(Config& cfg, const std::string& path);
std::string serialize(const Config& cfg);

std::vector<double> parse_list(const std::string& key, const std::string& text);

}  // namespace sflab
