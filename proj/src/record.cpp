#include "fourphase/record.hpp"

#include <charconv>
#include <limits>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "fourphase/error.hpp"

namespace fourphase {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& text) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (trim(text.substr(used)).empty()) return v;
    } catch (const std::exception&) {
    }
    // stod rejects inf/nan spelled by printf on some platforms
    if (text == "inf") return std::numeric_limits<double>::infinity();
    if (text == "-inf") return -std::numeric_limits<double>::infinity();
    if (text == "nan" || text == "-nan") return std::numeric_limits<double>::quiet_NaN();
    throw ParseError("key '" + key + "' is not a number: '" + text + "'");
}

bool parse_line(const std::string& line, std::string& key, std::string& value) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') return false;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError("missing '=' in line: " + t);
    key = trim(t.substr(0, eq));
    value = trim(t.substr(eq + 1));
    if (key.empty()) throw ParseError("empty key in line: " + t);
    return true;
}

}  // namespace

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void Record::set(const std::string& key, const std::string& value) {
    for (auto& kv : entries_) {
        if (kv.first == key) {
            kv.second = value;
            return;
        }
    }
    entries_.emplace_back(key, value);
}

void Record::set(const std::string& key, double value) { set(key, format_double(value)); }
void Record::set(const std::string& key, std::int64_t value) { set(key, std::to_string(value)); }
void Record::set(const std::string& key, std::uint64_t value) { set(key, std::to_string(value)); }
void Record::set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }

void Record::set(const std::string& key, const std::vector<double>& values) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) s += ' ';
        s += format_double(values[i]);
    }
    set(key, s);
}

void Record::set(const std::string& key, const std::vector<int>& values) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) s += ' ';
        s += std::to_string(values[i]);
    }
    set(key, s);
}

bool Record::has(const std::string& key) const {
    for (const auto& kv : entries_)
        if (kv.first == key) return true;
    return false;
}

const std::string& Record::get(const std::string& key) const {
    for (const auto& kv : entries_)
        if (kv.first == key) return kv.second;
    throw ParseError("missing key '" + key + "'");
}

double Record::get_double(const std::string& key) const { return parse_double(key, get(key)); }

std::int64_t Record::get_int(const std::string& key) const {
    const std::string& s = get(key);
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError("key '" + key + "' is not an integer: '" + s + "'");
    return v;
}

std::uint64_t Record::get_uint(const std::string& key) const {
    const std::string& s = get(key);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError("key '" + key + "' is not an unsigned integer: '" + s + "'");
    return v;
}

bool Record::get_bool(const std::string& key) const {
    const std::string& s = get(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ParseError("key '" + key + "' is not a boolean: '" + s + "'");
}

std::vector<double> Record::get_doubles(const std::string& key) const {
    std::istringstream in(get(key));
    std::vector<double> out;
    std::string tok;
    while (in >> tok) out.push_back(parse_double(key, tok));
    return out;
}

std::vector<int> Record::get_ints(const std::string& key) const {
    std::istringstream in(get(key));
    std::vector<int> out;
    std::string tok;
    while (in >> tok) {
        int v = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || ptr != tok.data() + tok.size())
            throw ParseError("key '" + key + "' holds a non-integer: '" + tok + "'");
        out.push_back(v);
    }
    return out;
}

void Record::write(std::ostream& os) const {
    for (const auto& [k, v] : entries_) os << k << " = " << v << '\n';
}

Record Record::parse(std::istream& is) {
    Record r;
    std::string line, key, value;
    while (std::getline(is, line)) {
        if (trim(line) == "---") break;
        if (parse_line(line, key, value)) r.set(key, value);
    }
    return r;
}

Record Record::parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
}

void write_records(std::ostream& os, const std::vector<Record>& records) {
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (i) os << "---\n";
        records[i].write(os);
    }
}

std::vector<Record> parse_records(std::istream& is) {
    std::vector<Record> out;
    Record cur;
    bool any = false;
    std::string line, key, value;
    while (std::getline(is, line)) {
        if (trim(line) == "---") {
            out.push_back(std::move(cur));
            cur = Record();
            any = false;
            continue;
        }
        if (parse_line(line, key, value)) {
            cur.set(key, value);
            any = true;
        }
    }
    if (any || !out.empty()) out.push_back(std::move(cur));
    return out;
}

}  // namespace fourphase
