#pragma once

#include <fstream>
#include <functional>
#include <string>

#include <json.hpp>

#include "crseval/errors.hpp"

namespace crseval::jsonl {

// Calls `fn(line_number, object)` for every non-blank line. Line numbers are
// 1-based. Malformed JSON raises ParseError at the offending line.
void for_each(const std::string& path,
              const std::function<void(size_t, const nlohmann::json&)>& fn);

// Append-mode JSONL writer that flushes after every line so a crash loses at
// most the line being written.
class Writer {
public:
    explicit Writer(const std::string& path, bool append = false);

    void write(const nlohmann::json& obj);
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::ofstream out_;
};

} // namespace crseval::jsonl
