#include "crseval/dialogue.hpp"

#include "crseval/errors.hpp"

namespace crseval::dialogue {

using nlohmann::json;

json to_json(const Utterance& u) {
    return json{{"role", u.role}, {"turn", u.turn}, {"text", u.text}};
}

Utterance utterance_from_json(const json& j) {
    Utterance u;
    u.role = j.at("role").get<std::string>();
    u.turn = j.at("turn").get<int>();
    u.text = j.at("text").get<std::string>();
    if (u.role != "user" && u.role != "system") throw DataError("bad utterance role: " + u.role);
    return u;
}

void DialogueContext::add_user(const std::string& text) {
    if (next_role() != "user") throw DataError("dialogue expected a system reply, got a user utterance");
    Utterance u;
    u.role = "user";
    u.turn = completed_turns() + 1;
    u.text = text;
    utterances_.push_back(std::move(u));
}

void DialogueContext::add_system(const std::string& text) {
    if (next_role() != "system") throw DataError("dialogue expected a user utterance, got a system reply");
    Utterance u;
    u.role = "system";
    u.turn = utterances_.back().turn;
    u.text = text;
    utterances_.push_back(std::move(u));
}

int DialogueContext::completed_turns() const {
    return static_cast<int>(utterances_.size() / 2);
}

std::string DialogueContext::next_role() const {
    return utterances_.size() % 2 == 0 ? "user" : "system";
}

std::string DialogueContext::render() const {
    return render_tail(completed_turns() + 1);
}

std::string DialogueContext::render_tail(int turns) const {
    if (turns < 0) turns = 0;
    int first_turn = completed_turns() + (utterances_.size() % 2) - turns + 1;
    std::string out;
    for (const auto& u : utterances_) {
        if (u.turn < first_turn) continue;
        if (!out.empty()) out += "\n";
        out += (u.role == "user" ? "User: " : "System: ") + u.text;
    }
    return out;
}

json DialogueContext::to_json() const {
    json arr = json::array();
    for (const auto& u : utterances_) arr.push_back(dialogue::to_json(u));
    return arr;
}

DialogueContext DialogueContext::from_json(const json& j) {
    DialogueContext ctx;
    for (const auto& e : j) {
        Utterance u = utterance_from_json(e);
        if (u.role == "user") ctx.add_user(u.text);
        else ctx.add_system(u.text);
    }
    return ctx;
}

} // namespace crseval::dialogue
