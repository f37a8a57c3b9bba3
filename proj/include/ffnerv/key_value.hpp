#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace ffnerv {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// `key = value` lines; `#` starts a comment. Later keys override earlier ones.
class KeyValues {
public:
    static KeyValues parse(const std::string& text);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::string& get(const std::string& key) const;
    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
    void erase(const std::string& key) { values_.erase(key); }
    const std::map<std::string, std::string>& entries() const { return values_; }

    std::int64_t get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<std::int64_t> get_int_list(const std::string& key) const;
    std::vector<std::string> get_list(const std::string& key) const;

    // Sorted `key = value` lines.
    std::string to_text() const;

private:
    std::map<std::string, std::string> values_;
};

std::string join_ints(const std::vector<std::int64_t>& values);
std::string format_double(double v);

}  // namespace ffnerv
