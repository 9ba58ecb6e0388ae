#include "bnt/kvdoc.hpp"

#include <fstream>
#include <sstream>

#include "bnt/errors.hpp"

namespace bnt::io {

namespace {

std::string strip(const std::string& s) {
    size_t begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    size_t end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

bool valid_key(const std::string& key) {
    if (key.empty() || key.front() == '.' || key.back() == '.') return false;
    for (char c : key) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                  c == '.' || c == '_' || c == '-';
        if (!ok) return false;
    }
    return key.find("..") == std::string::npos;
}

}  // namespace

KvDoc KvDoc::parse(const std::string& text) {
    KvDoc doc;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = strip(line);
        if (s.empty() || s.front() == '#') continue;
        size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw ParseError("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = strip(s.substr(0, eq));
        std::string value = strip(s.substr(eq + 1));
        if (!valid_key(key))
            throw ParseError("line " + std::to_string(lineno) + ": bad key '" + key + "'");
        if (value.empty())
            throw ParseError("line " + std::to_string(lineno) + ": empty value for '" + key + "'");
        doc.entries_[key] = value;
    }
    return doc;
}

KvDoc KvDoc::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

const std::string& KvDoc::at(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ParseError("missing key '" + key + "'");
    return it->second;
}

std::optional<std::string> KvDoc::get(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::string KvDoc::get_or(const std::string& key, const std::string& fallback) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

std::vector<std::string> KvDoc::keys_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (auto it = entries_.lower_bound(prefix); it != entries_.end(); ++it) {
        if (it->first.compare(0, prefix.size(), prefix) != 0) break;
        if (it->first.size() > prefix.size()) out.push_back(it->first);
    }
    return out;
}

}  // namespace bnt::io
