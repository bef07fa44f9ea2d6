#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tapkin/csv.hpp"

namespace tapkin {

/// Flat key=value text file, insertion-ordered. Used for manifests and the
/// fit/baseline reports so runs stay diff-able.
class KeyValueFile {
public:
    void set(const std::string& key, const std::string& value) {
        if (!index_.count(key)) {
            order_.push_back(key);
        }
        index_[key] = value;
    }
    void set(const std::string& key, double value) { set(key, format_double(value)); }
    void set(const std::string& key, int value) { set(key, std::to_string(value)); }
    void set(const std::string& key, std::uint64_t value) { set(key, std::to_string(value)); }

    bool has(const std::string& key) const { return index_.count(key) > 0; }

    const std::string& get(const std::string& key) const {
        auto it = index_.find(key);
        if (it == index_.end()) throw std::runtime_error("missing report key: " + key);
        return it->second;
    }
    double get_double(const std::string& key) const { return std::stod(get(key)); }
    int get_int(const std::string& key) const { return std::stoi(get(key)); }

    std::string get_or(const std::string& key, const std::string& fallback) const {
        auto it = index_.find(key);
        return it == index_.end() ? fallback : it->second;
    }

    const std::vector<std::string>& keys() const { return order_; }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot open for writing: " + path);
        for (const auto& key : order_) out << key << " = " << index_.at(key) << "\n";
    }

    static KeyValueFile load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open for reading: " + path);
        KeyValueFile kv;
        std::string line;
        while (std::getline(in, line)) {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            std::string key = line.substr(0, eq);
            std::string value = line.substr(eq + 1);
            auto trim = [](std::string& s) {
                const auto a = s.find_first_not_of(" \t\r");
                const auto b = s.find_last_not_of(" \t\r");
                s = a == std::string::npos ? "" : s.substr(a, b - a + 1);
            };
            trim(key);
            trim(value);
            if (!key.empty()) kv.set(key, value);
        }
        return kv;
    }

private:
    std::vector<std::string> order_;
    std::map<std::string, std::string> index_;
};

}  // namespace tapkin
