#include "crseval/jsonl.hpp"

namespace crseval::jsonl {

void for_each(const std::string& path,
              const std::function<void(size_t, const nlohmann::json&)>& fn) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded()) throw ParseError(path, line_no, "invalid JSON");
        fn(line_no, obj);
    }
}

Writer::Writer(const std::string& path, bool append) : path_(path) {
    out_.open(path, append ? std::ios::app : std::ios::trunc);
    if (!out_) throw ConfigError("cannot open file for writing: " + path);
}

void Writer::write(const nlohmann::json& obj) {
    out_ << obj.dump() << '\n';
    out_.flush();
}

} // namespace crseval::jsonl
