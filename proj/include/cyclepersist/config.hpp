#pragma once

// Reader for the key = value configuration format (a TOML subset):
//
//   # comment
//   [section]
//   key = "string" | number | true | false | [item, item, ...]
//
// Array items are numbers or strings. Keys outside any section go to "".
// Every error carries the 1-based line and column of the offending text.

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "errors.hpp"

namespace cyclepersist {

struct ConfigValue {
    using Array = std::vector<std::variant<double, std::string>>;
    std::variant<double, bool, std::string, Array> value;
    std::size_t line = 0;
    std::size_t column = 0;
};

class Config {
public:
    using Table = std::map<std::string, ConfigValue>;

    static Config parse(const std::string& text) {
        Config cfg;
        std::string section;
        std::istringstream in(text);
        std::string raw;
        std::size_t line_no = 0;
        std::size_t offset = 0;
        while (std::getline(in, raw)) {
            ++line_no;
            const std::size_t line_offset = offset;
            offset += raw.size() + 1;
            LineCursor c{raw, 0, line_no, line_offset};
            c.skip_ws();
            if (c.done() || c.peek() == '#') continue;
            if (c.peek() == '[') {
                c.advance();
                c.skip_ws();
                const std::size_t start = c.pos;
                while (!c.done() && c.peek() != ']') c.advance();
                if (c.done()) c.fail("unterminated section header");
                section = trim(raw.substr(start, c.pos - start));
                if (section.empty()) c.fail("empty section name", start);
                c.advance();
                c.expect_end();
                cfg.tables_[section];
                continue;
            }
            const std::size_t key_col = c.pos;
            while (!c.done() && (std::isalnum(static_cast<unsigned char>(c.peek())) || c.peek() == '_' ||
                                 c.peek() == '-')) {
                c.advance();
            }
            const std::string key = raw.substr(key_col, c.pos - key_col);
            if (key.empty()) c.fail("expected a key", key_col);
            c.skip_ws();
            if (c.done() || c.peek() != '=') c.fail("expected '=' after key '" + key + "'");
            c.advance();
            c.skip_ws();
            ConfigValue v;
            v.line = line_no;
            v.column = c.pos + 1;
            v.value = c.parse_value();
            c.expect_end();
            auto& table = cfg.tables_[section];
            if (table.count(key)) c.fail("duplicate key '" + key + "'", key_col);
            table.emplace(key, std::move(v));
        }
        return cfg;
    }

    static Config load(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw std::runtime_error("cannot read config file '" + path + "'");
        std::ostringstream ss;
        ss << f.rdbuf();
        return parse(ss.str());
    }

    bool has_section(const std::string& s) const { return tables_.count(s) != 0; }

    const ConfigValue* find(const std::string& section, const std::string& key) const {
        auto it = tables_.find(section);
        if (it == tables_.end()) return nullptr;
        auto kt = it->second.find(key);
        return kt == it->second.end() ? nullptr : &kt->second;
    }

    std::optional<std::string> get_string(const std::string& section, const std::string& key) const {
        const ConfigValue* v = find(section, key);
        if (!v) return std::nullopt;
        if (auto s = std::get_if<std::string>(&v->value)) return *s;
        throw type_error(section, key, *v, "a string");
    }

    std::optional<double> get_number(const std::string& section, const std::string& key) const {
        const ConfigValue* v = find(section, key);
        if (!v) return std::nullopt;
        if (auto d = std::get_if<double>(&v->value)) return *d;
        throw type_error(section, key, *v, "a number");
    }

    std::optional<std::vector<double>> get_numbers(const std::string& section,
                                                   const std::string& key) const {
        const ConfigValue* v = find(section, key);
        if (!v) return std::nullopt;
        if (auto d = std::get_if<double>(&v->value)) return std::vector<double>{*d};
        if (auto a = std::get_if<ConfigValue::Array>(&v->value)) {
            std::vector<double> out;
            for (const auto& item : *a) {
                if (auto d = std::get_if<double>(&item)) out.push_back(*d);
                else throw type_error(section, key, *v, "an array of numbers");
            }
            return out;
        }
        throw type_error(section, key, *v, "an array of numbers");
    }

    const std::map<std::string, Table>& tables() const { return tables_; }

private:
    struct LineCursor {
        const std::string& s;
        std::size_t pos;
        std::size_t line;
        std::size_t line_offset;

        bool done() const { return pos >= s.size(); }
        char peek() const { return s[pos]; }
        void advance() { ++pos; }
        void skip_ws() {
            while (!done() && (s[pos] == ' ' || s[pos] == '\t' || s[pos] == '\r')) ++pos;
        }
        [[noreturn]] void fail(const std::string& msg) const { fail(msg, pos); }
        [[noreturn]] void fail(const std::string& msg, std::size_t at) const {
            throw ParseError("config line " + std::to_string(line) + ", column " + std::to_string(at + 1) +
                                 ": " + msg,
                             line_offset + at, line, at + 1);
        }
        void expect_end() {
            skip_ws();
            if (!done() && peek() != '#') fail("unexpected trailing text");
        }

        std::string parse_string() {
            advance();  // opening quote
            std::string out;
            while (!done() && peek() != '"') {
                if (peek() == '\\') {
                    advance();
                    if (done()) break;
                    const char e = peek();
                    if (e == 'n') out += '\n';
                    else if (e == 't') out += '\t';
                    else if (e == '"' || e == '\\') out += e;
                    else fail(std::string("unknown escape '\\") + e + "'");
                } else {
                    out += peek();
                }
                advance();
            }
            if (done()) fail("unterminated string");
            advance();
            return out;
        }

        double parse_number() {
            const std::size_t start = pos;
            while (!done() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '.' ||
                               peek() == '+' || peek() == '-' || peek() == '_')) {
                advance();
            }
            std::string text = s.substr(start, pos - start);
            std::erase(text, '_');
            char* end = nullptr;
            const double v = std::strtod(text.c_str(), &end);
            if (text.empty() || end != text.c_str() + text.size()) fail("malformed value '" + text + "'", start);
            return v;
        }

        std::variant<double, bool, std::string, ConfigValue::Array> parse_value() {
            if (done()) fail("missing value");
            if (peek() == '"') return parse_string();
            if (peek() == '[') {
                advance();
                ConfigValue::Array arr;
                skip_ws();
                if (!done() && peek() == ']') { advance(); return arr; }
                for (;;) {
                    skip_ws();
                    if (done()) fail("unterminated array");
                    if (peek() == '"') arr.emplace_back(parse_string());
                    else arr.emplace_back(parse_number());
                    skip_ws();
                    if (done()) fail("unterminated array");
                    if (peek() == ',') { advance(); continue; }
                    if (peek() == ']') { advance(); break; }
                    fail("expected ',' or ']' in array");
                }
                return arr;
            }
            if (s.compare(pos, 4, "true") == 0) { pos += 4; return true; }
            if (s.compare(pos, 5, "false") == 0) { pos += 5; return false; }
            return parse_number();
        }
    };

    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t");
        if (b == std::string::npos) return {};
        const auto e = s.find_last_not_of(" \t");
        return s.substr(b, e - b + 1);
    }

    static ParseError type_error(const std::string& section, const std::string& key, const ConfigValue& v,
                                 const std::string& expected) {
        return ParseError("config line " + std::to_string(v.line) + ", column " + std::to_string(v.column) +
                              ": [" + section + "] " + key + " must be " + expected,
                          0, v.line, v.column);
    }

    std::map<std::string, Table> tables_;
};

}  // namespace cyclepersist
