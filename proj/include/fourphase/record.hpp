#pragma once

// Flat "key = value" text records. Vectors are whitespace-separated on one
// line; floats are written with 17 significant digits so they round-trip.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace fourphase {

std::string format_double(double x);

class Record {
public:
    void set(const std::string& key, const std::string& value);
    void set(const std::string& key, const char* value) { set(key, std::string(value)); }
    void set(const std::string& key, double value);
    void set(const std::string& key, std::int64_t value);
    void set(const std::string& key, int value) { set(key, static_cast<std::int64_t>(value)); }
    void set(const std::string& key, std::uint64_t value);
    void set(const std::string& key, bool value);
    void set(const std::string& key, const std::vector<double>& values);
    void set(const std::string& key, const std::vector<int>& values);

    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const;
    double get_double(const std::string& key) const;
    std::int64_t get_int(const std::string& key) const;
    std::uint64_t get_uint(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<double> get_doubles(const std::string& key) const;
    std::vector<int> get_ints(const std::string& key) const;

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

    void write(std::ostream& os) const;
    static Record parse(std::istream& is);
    static Record parse_string(const std::string& text);

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

// several records in one stream, separated by lines holding only "---"
void write_records(std::ostream& os, const std::vector<Record>& records);
std::vector<Record> parse_records(std::istream& is);

}  // namespace fourphase
