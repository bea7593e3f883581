#pragma once

#include <map>
#include <string>
#include <vector>

namespace crseval::prompts {

// Replace each "{name}" placeholder with its slot value. Unknown
// placeholders are left intact so template mistakes stay visible.
std::string render(const std::string& tmpl, const std::map<std::string, std::string>& slots);

// Named prompt and rubric templates. Defaults are built in; a template
// directory with matching "<name>.txt" files overrides them, so prompts
// stay editable without rebuilding.
class PromptLibrary {
public:
    static PromptLibrary builtin();
    static PromptLibrary from_dir(const std::string& dir); // builtin + overrides

    const std::string& get(const std::string& name) const;
    bool has(const std::string& name) const;
    void set(const std::string& name, std::string text);
    std::vector<std::string> names() const;

    // Write every template to "<dir>/<name>.txt".
    void write_dir(const std::string& dir) const;

private:
    std::map<std::string, std::string> templates_;
};

} // namespace crseval::prompts
