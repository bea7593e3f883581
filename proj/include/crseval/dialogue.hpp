#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace crseval::dialogue {

// One utterance in a user/system alternation. Turn t pairs user utterance u_t
// with the system reply that answers it.
struct Utterance {
    std::string role; // "user" or "system"
    int turn = 0;     // 1-based
    std::string text;
};

nlohmann::json to_json(const Utterance& u);
Utterance utterance_from_json(const nlohmann::json& j);

// Ordered dialogue history D_t. Enforces strict alternation starting with the
// user, so the recommender always answers the latest user utterance.
class DialogueContext {
public:
    void add_user(const std::string& text);
    void add_system(const std::string& text);

    const std::vector<Utterance>& utterances() const { return utterances_; }
    bool empty() const { return utterances_.empty(); }

    // Turns fully completed (user + system pair).
    int completed_turns() const;
    // Next role expected by the alternation.
    std::string next_role() const;

    // Plain-text rendering for prompt slots: "User: ...\nSystem: ...".
    std::string render() const;
    // Same, limited to the last `turns` completed turns plus any pending
    // user utterance.
    std::string render_tail(int turns) const;

    nlohmann::json to_json() const;
    static DialogueContext from_json(const nlohmann::json& j);

private:
    std::vector<Utterance> utterances_;
};

} // namespace crseval::dialogue
