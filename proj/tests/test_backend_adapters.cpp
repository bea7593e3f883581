#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "crseval/adapters.hpp"
#include "crseval/agents.hpp"
#include "crseval/backend.hpp"
#include "crseval/dialogue.hpp"
#include "crseval/errors.hpp"

#include "support.hpp"

using namespace crseval;
using nlohmann::json;
using testsupport::RecordedTransport;
using testsupport::SleepRecorder;
using testsupport::TempDir;

// ---------------------------------------------------------------------------
// dialogue context
// ---------------------------------------------------------------------------

TEST_CASE("dialogue enforces strict user/system alternation") {
    dialogue::DialogueContext ctx;
    CHECK(ctx.next_role() == "user");
    CHECK_THROWS_AS(ctx.add_system("premature"), DataError);

    ctx.add_user("hi");
    CHECK(ctx.next_role() == "system");
    CHECK_THROWS_AS(ctx.add_user("again"), DataError);
    CHECK(ctx.completed_turns() == 0);

    ctx.add_system("hello");
    CHECK(ctx.completed_turns() == 1);
    CHECK(ctx.utterances()[0].turn == 1);
    CHECK(ctx.utterances()[1].turn == 1);

    ctx.add_user("next");
    CHECK(ctx.utterances()[2].turn == 2);
    CHECK(ctx.completed_turns() == 1);
}

TEST_CASE("dialogue renders and windows its tail") {
    dialogue::DialogueContext ctx;
    ctx.add_user("u1");
    ctx.add_system("s1");
    ctx.add_user("u2");
    ctx.add_system("s2");
    ctx.add_user("u3");

    CHECK(ctx.render() == "User: u1\nSystem: s1\nUser: u2\nSystem: s2\nUser: u3");
    // the pending user utterance counts as the newest turn in the window
    CHECK(ctx.render_tail(1) == "User: u3");
    CHECK(ctx.render_tail(2) == "User: u2\nSystem: s2\nUser: u3");
    CHECK(ctx.render_tail(99) == ctx.render());

    auto back = dialogue::DialogueContext::from_json(ctx.to_json());
    CHECK(back.render() == ctx.render());
    CHECK(back.utterances().size() == 5);
}

// ---------------------------------------------------------------------------
// deterministic stub backend
// ---------------------------------------------------------------------------

TEST_CASE("stub backend is a pure function of its request") {
    agents::StubBackend a(1), b(1);
    agents::GenerationRequest req;
    req.stage = agents::Stage::user_response;
    req.slots = {{"general_preferences", "Enjoys slow cinema."}, {"dialogue_history", ""}};
    auto first = a.generate(req);
    CHECK(first == b.generate(req));
    CHECK(first == a.generate(req)); // no hidden state
    CHECK(first.find("slow cinema") != std::string::npos);
}

TEST_CASE("scripted backend replays in order then exhausts") {
    agents::ScriptedBackend backend({"one", "two"});
    agents::GenerationRequest req;
    CHECK(backend.generate(req) == "one");
    CHECK(backend.generate(req) == "two");
    CHECK(backend.remaining() == 0);
    CHECK_THROWS_AS(backend.generate(req), ScriptExhausted);
}

TEST_CASE("scripted backend loads replies from a file") {
    TempDir tmp("script");
    auto path = testsupport::write_lines(tmp.file("replies.jsonl"),
                                         {R"({"reply":"alpha"})", R"({"reply":"beta"})"});
    auto backend = agents::ScriptedBackend::from_file(path);
    agents::GenerationRequest req;
    CHECK(backend.generate(req) == "alpha");
    CHECK(backend.generate(req) == "beta");
}

// ---------------------------------------------------------------------------
// backoff and retry plumbing
// ---------------------------------------------------------------------------

TEST_CASE("backoff schedule is exponential and jitter-free by default") {
    agents::BackoffPolicy policy; // 1000ms base, factor 2
    CHECK(policy.delay_ms(1) == 1000);
    CHECK(policy.delay_ms(2) == 2000);
    CHECK(policy.delay_ms(3) == 4000);
    CHECK(policy.delay_ms(4) == 8000);

    agents::BackoffPolicy jittered;
    jittered.jitter = true;
    // seeded jitter replays exactly and stays within +-25% of the base curve
    CHECK(jittered.delay_ms(2, 99) == jittered.delay_ms(2, 99));
    for (int attempt = 1; attempt <= 4; ++attempt) {
        int d = jittered.delay_ms(attempt, 7);
        CHECK(d >= policy.delay_ms(attempt) * 3 / 4);
        CHECK(d <= policy.delay_ms(attempt) * 5 / 4);
    }
}

TEST_CASE("retryable statuses are transport failures, 429, and 5xx") {
    CHECK(agents::retryable_status(0));
    CHECK(agents::retryable_status(429));
    CHECK(agents::retryable_status(500));
    CHECK(agents::retryable_status(503));
    CHECK_FALSE(agents::retryable_status(200));
    CHECK_FALSE(agents::retryable_status(400));
    CHECK_FALSE(agents::retryable_status(401));
    CHECK_FALSE(agents::retryable_status(404));
}

// ---------------------------------------------------------------------------
// remote chat backend wire contract
// ---------------------------------------------------------------------------

static agents::GenerationRequest chat_request() {
    agents::GenerationRequest req;
    req.stage = agents::Stage::user_response;
    req.messages = {{"system", "You are a movie watcher."}, {"user", "Say hi."}};
    return req;
}

static std::string chat_ok(const std::string& content) {
    return json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}
        .dump();
}

TEST_CASE("chat backend posts the standard completion body") {
    agents::RemoteChatConfig cfg;
    cfg.endpoint = "http://llm.test";
    cfg.model = "test-model";
    cfg.api_key = "sk-secret";
    auto transport = std::make_unique<RecordedTransport>();
    auto* raw = transport.get();
    raw->push_response(200, chat_ok("hello there"));
    agents::RemoteChatBackend backend(cfg, std::move(transport), SleepRecorder().fn());

    CHECK(backend.generate(chat_request()) == "hello there");
    REQUIRE(raw->sent.size() == 1);
    const auto& sent = raw->sent[0];
    CHECK(sent.path == "/v1/chat/completions");

    auto body = json::parse(sent.body);
    CHECK(body.at("model") == "test-model");
    CHECK(body.at("temperature") == 0.0);
    REQUIRE(body.at("messages").size() == 2);
    CHECK(body["messages"][0]["role"] == "system");
    CHECK(body["messages"][1]["content"] == "Say hi.");

    bool saw_auth = false;
    for (const auto& [k, v] : sent.headers) {
        if (k == "Authorization") {
            saw_auth = true;
            CHECK(v == "Bearer sk-secret");
        }
    }
    CHECK(saw_auth);
}

TEST_CASE("chat backend omits the auth header without a key") {
    agents::RemoteChatConfig cfg;
    cfg.endpoint = "http://llm.test";
    cfg.model = "m";
    auto transport = std::make_unique<RecordedTransport>();
    auto* raw = transport.get();
    raw->push_response(200, chat_ok("ok"));
    agents::RemoteChatBackend backend(cfg, std::move(transport), SleepRecorder().fn());
    backend.generate(chat_request());
    for (const auto& [k, v] : raw->sent[0].headers) CHECK(k != "Authorization");
}

TEST_CASE("chat backend retries 429s on the backoff schedule then succeeds") {
    agents::RemoteChatConfig cfg;
    cfg.endpoint = "http://llm.test";
    cfg.model = "m";
    auto transport = std::make_unique<RecordedTransport>();
    auto* raw = transport.get();
    raw->push_response(429, "slow down");
    raw->push_response(429, "still busy");
    raw->push_response(200, chat_ok("finally"));
    SleepRecorder sleeps;
    agents::RemoteChatBackend backend(cfg, std::move(transport), sleeps.fn());

    CHECK(backend.generate(chat_request()) == "finally");
    CHECK(raw->sent.size() == 3);
    CHECK(*sleeps.delays == std::vector<int>{1000, 2000});
}

TEST_CASE("chat backend gives up after max_attempts with BackendUnavailable") {
    agents::RemoteChatConfig cfg;
    cfg.endpoint = "http://llm.test";
    cfg.model = "m";
    cfg.backoff.max_attempts = 3;
    auto transport = std::make_unique<RecordedTransport>();
    auto* raw = transport.get();
    for (int i = 0; i < 3; ++i) raw->push_response(503, "down");
    SleepRecorder sleeps;
    agents::RemoteChatBackend backend(cfg, std::move(transport), sleeps.fn());
    CHECK_THROWS_AS(backend.generate(chat_request()), BackendUnavailable);
    CHECK(raw->sent.size() == 3);
    CHECK(sleeps.delays->size() == 2); // no sleep after the final failure
}

TEST_CASE("chat backend treats non-retryable statuses and bad bodies as hard failures") {
    agents::RemoteChatConfig cfg;
    cfg.endpoint = "http://llm.test";
    cfg.model = "m";

    auto t1 = std::make_unique<RecordedTransport>();
    auto* r1 = t1.get();
    r1->push_response(400, "bad request");
    agents::RemoteChatBackend b1(cfg, std::move(t1), SleepRecorder().fn());
    CHECK_THROWS_AS(b1.generate(chat_request()), BackendUnavailable);
    CHECK(r1->sent.size() == 1); // no retry on 400

    auto t2 = std::make_unique<RecordedTransport>();
    t2->push_response(200, "this is not json");
    agents::RemoteChatBackend b2(cfg, std::move(t2), SleepRecorder().fn());
    CHECK_THROWS_AS(b2.generate(chat_request()), BackendUnavailable);

    auto t3 = std::make_unique<RecordedTransport>();
    t3->push_response(200, R"({"choices":[]})");
    agents::RemoteChatBackend b3(cfg, std::move(t3), SleepRecorder().fn());
    CHECK_THROWS_AS(b3.generate(chat_request()), BackendUnavailable);
}

// ---------------------------------------------------------------------------
// slate contract + built-in adapters
// ---------------------------------------------------------------------------

TEST_CASE("validate_slate rejects wrong sizes, duplicates, and unknown ids") {
    auto cat = testsupport::toy_catalog();
    CHECK_NOTHROW(adapters::validate_slate({"m1", "m2", "m3", "m4"}, cat, 4, "t"));
    CHECK_THROWS_AS(adapters::validate_slate({"m1", "m2", "m3"}, cat, 4, "t"),
                    AdapterContractViolation);
    CHECK_THROWS_AS(adapters::validate_slate({"m1", "m2", "m3", "m3"}, cat, 4, "t"),
                    AdapterContractViolation);
    CHECK_THROWS_AS(adapters::validate_slate({"m1", "m2", "m3", "zz"}, cat, 4, "t"),
                    AdapterContractViolation);
}

TEST_CASE("crs_turn requires a context awaiting the system") {
    auto cat = testsupport::toy_catalog();
    adapters::PopularityAdapter adapter(cat, std::vector<corpus::UserRecord>{});
    dialogue::DialogueContext ctx;
    CHECK_THROWS_AS(adapters::crs_turn(adapter, ctx, cat, 4), DataError);
    ctx.add_user("hi");
    auto reply = adapters::crs_turn(adapter, ctx, cat, 4);
    CHECK(reply.item_ids.size() == 4);
}

TEST_CASE("popularity ranks by interaction count with id tiebreaks") {
    auto cat = testsupport::toy_catalog();
    std::vector<corpus::UserRecord> users(3);
    users[0].user_id = "a";
    users[0].interactions = {testsupport::interaction("m5", 5, ""),
                             testsupport::interaction("m2", 5, "")};
    users[1].user_id = "b";
    users[1].interactions = {testsupport::interaction("m5", 5, ""),
                             testsupport::interaction("m7", 5, "")};
    users[2].user_id = "c";
    users[2].interactions = {testsupport::interaction("m5", 5, ""),
                             testsupport::interaction("m2", 5, "")};

    adapters::PopularityAdapter adapter(cat, users);
    // m5:3, m2:2, m7:1, everything else 0 in id order
    const auto& ranking = adapter.ranking();
    REQUIRE(ranking.size() == cat.size());
    CHECK(ranking[0] == "m5");
    CHECK(ranking[1] == "m2");
    CHECK(ranking[2] == "m7");
    CHECK(ranking[3] == "m1"); // zero-count ids ascending
    CHECK(ranking[4] == "m3");

    dialogue::DialogueContext ctx;
    ctx.add_user("anything");
    auto reply = adapter.respond(ctx, 3);
    CHECK(reply.item_ids == std::vector<std::string>{"m5", "m2", "m7"});
    // same answer every turn
    CHECK(adapter.respond(ctx, 3).item_ids == reply.item_ids);
    CHECK_THROWS_AS(adapter.respond(ctx, 99), AdapterContractViolation);
}

TEST_CASE("embedding adapter matches a brute-force cosine ranking") {
    auto cat = testsupport::toy_catalog();
    adapters::EmbeddingRetrievalAdapter adapter(cat, 128);

    dialogue::DialogueContext ctx;
    ctx.add_user("I want a scifi adventure race through space with rival pilots");

    adapters::HashEmbedder embedder(128);
    auto query = embedder.embed(ctx.render());
    std::vector<std::pair<double, std::string>> scored;
    for (const auto& item : cat.items()) {
        auto vec = embedder.embed(adapters::EmbeddingRetrievalAdapter::item_text(item));
        scored.emplace_back(adapters::cosine(query, vec), item.item_id);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });

    auto reply = adapter.respond(ctx, 5);
    REQUIRE(reply.item_ids.size() == 5);
    for (size_t i = 0; i < 5; ++i) CHECK(reply.item_ids[i] == scored[i].second);
    // the query words overlap m3's text most
    CHECK(reply.item_ids[0] == "m3");
}

TEST_CASE("cosine handles zero vectors and hash embedding is deterministic") {
    adapters::HashEmbedder e(64);
    auto a = e.embed("tense heist thriller");
    CHECK(a == e.embed("tense heist thriller"));
    CHECK(adapters::cosine(a, a) == doctest::Approx(1.0));
    std::vector<double> zero(64, 0.0);
    CHECK(adapters::cosine(a, zero) == 0.0);
    CHECK(e.embed("") == zero);
}

TEST_CASE("scripted CRS replays turns then reports exhaustion") {
    adapters::ScriptedCrs crs;
    crs.push({"first", {"m1", "m2"}});
    crs.push({"second", {"m3", "m4"}});
    dialogue::DialogueContext ctx;
    ctx.add_user("hi");
    CHECK(crs.respond(ctx, 2).item_ids == std::vector<std::string>{"m1", "m2"});
    CHECK(crs.respond(ctx, 2).utterance == "second");
    CHECK_THROWS_AS(crs.respond(ctx, 2), ScriptExhausted);

    TempDir tmp("crs");
    auto path = testsupport::write_lines(
        tmp.file("turns.jsonl"),
        {R"({"utterance":"from file","items":["m5","m6"]})"});
    auto loaded = adapters::ScriptedCrs::from_file(path);
    CHECK(loaded->respond(ctx, 2).item_ids == std::vector<std::string>{"m5", "m6"});
}

// ---------------------------------------------------------------------------
// remote CRS adapter wire contract
// ---------------------------------------------------------------------------

static std::string crs_ok(const std::vector<std::string>& ids) {
    json j;
    j["utterance"] = "try these";
    j["items"] = ids;
    return j.dump();
}

TEST_CASE("remote CRS posts the protocol body and parses the reply") {
    auto cat = testsupport::toy_catalog();
    adapters::RemoteCrsConfig cfg;
    cfg.endpoint = "http://crs.test";
    auto transport = std::make_shared<RecordedTransport>();
    transport->push_response(200, crs_ok({"m1", "m2", "m3", "m4"}));
    adapters::RemoteCrsAdapter adapter(cfg, cat, transport, SleepRecorder().fn());

    dialogue::DialogueContext ctx;
    ctx.add_user("hello");
    ctx.add_system("hi");
    ctx.add_user("recommend me something");

    auto reply = adapter.respond(ctx, 4);
    CHECK(reply.utterance == "try these");
    CHECK(reply.item_ids.size() == 4);

    REQUIRE(transport->sent.size() == 1);
    CHECK(transport->sent[0].path == "/crs/turn");
    auto body = json::parse(transport->sent[0].body);
    CHECK(body.at("protocol") == 1);
    CHECK(body.at("k") == 4);
    REQUIRE(body.at("dialogue").size() == 3);
    CHECK(body["dialogue"][0]["role"] == "user");
    CHECK(body["dialogue"][0]["text"] == "hello");
    CHECK(body["dialogue"][1]["role"] == "system");
    CHECK(body["dialogue"][2]["text"] == "recommend me something");
}

TEST_CASE("remote CRS retries retryable statuses and fails closed otherwise") {
    auto cat = testsupport::toy_catalog();
    adapters::RemoteCrsConfig cfg;
    cfg.endpoint = "http://crs.test";
    dialogue::DialogueContext ctx;
    ctx.add_user("hi");

    auto t1 = std::make_shared<RecordedTransport>();
    t1->push_response(429, "busy");
    t1->push_response(200, crs_ok({"m1", "m2"}));
    SleepRecorder sleeps;
    adapters::RemoteCrsAdapter a1(cfg, cat, t1, sleeps.fn());
    CHECK(a1.respond(ctx, 2).item_ids.size() == 2);
    CHECK(*sleeps.delays == std::vector<int>{1000});

    auto t2 = std::make_shared<RecordedTransport>();
    t2->push_response(404, "nope");
    adapters::RemoteCrsAdapter a2(cfg, cat, t2, SleepRecorder().fn());
    CHECK_THROWS_AS(a2.respond(ctx, 2), AdapterUnavailable);
    CHECK(t2->sent.size() == 1);

    auto t3 = std::make_shared<RecordedTransport>();
    t3->push_response(200, "not json");
    adapters::RemoteCrsAdapter a3(cfg, cat, t3, SleepRecorder().fn());
    CHECK_THROWS_AS(a3.respond(ctx, 2), AdapterContractViolation);

    agents::BackoffPolicy tight;
    tight.max_attempts = 2;
    cfg.backoff = tight;
    auto t4 = std::make_shared<RecordedTransport>();
    t4->push_response(500, "down");
    t4->push_response(500, "still down");
    adapters::RemoteCrsAdapter a4(cfg, cat, t4, SleepRecorder().fn());
    CHECK_THROWS_AS(a4.respond(ctx, 2), AdapterUnavailable);
    CHECK(t4->sent.size() == 2);
}

TEST_CASE("crs_turn surfaces short remote slates as contract violations") {
    auto cat = testsupport::toy_catalog();
    adapters::RemoteCrsConfig cfg;
    cfg.endpoint = "http://crs.test";
    auto transport = std::make_shared<RecordedTransport>();
    transport->push_response(200, crs_ok({"m1", "m2", "m3"})); // one short of K=4
    adapters::RemoteCrsAdapter adapter(cfg, cat, transport, SleepRecorder().fn());
    dialogue::DialogueContext ctx;
    ctx.add_user("hi");
    CHECK_THROWS_AS(adapters::crs_turn(adapter, ctx, cat, 4), AdapterContractViolation);
}

TEST_CASE("adapter contract holds across fuzzed dialogue contexts") {
    auto cat = testsupport::toy_catalog();
    std::vector<corpus::UserRecord> no_users;
    adapters::PopularityAdapter pop(cat, no_users);
    adapters::EmbeddingRetrievalAdapter emb(cat, 64);

    SeededRng rng(404);
    std::vector<std::string> words = {"space",  "heist", "quiet", "garden", "random",
                                      "zz9!!!", "",      "the",   "crown",  "réunion"};
    for (int i = 0; i < 200; ++i) {
        dialogue::DialogueContext ctx;
        int turns = static_cast<int>(rng.bounded(3));
        for (int t = 0; t < turns; ++t) {
            ctx.add_user(words[rng.bounded(words.size())] + " " + words[rng.bounded(words.size())]);
            ctx.add_system("noted");
        }
        ctx.add_user(words[rng.bounded(words.size())]);
        int k = 1 + static_cast<int>(rng.bounded(6));
        for (adapters::CrsAdapter* adapter : {(adapters::CrsAdapter*)&pop, (adapters::CrsAdapter*)&emb}) {
            auto reply = adapters::crs_turn(*adapter, ctx, cat, k);
            CHECK(reply.item_ids.size() == static_cast<size_t>(k));
            std::set<std::string> distinct(reply.item_ids.begin(), reply.item_ids.end());
            CHECK(distinct.size() == reply.item_ids.size());
            for (const auto& id : reply.item_ids) CHECK(cat.contains(id));
        }
    }
}

TEST_CASE("make_adapter dispatches on kind and validates config") {
    auto cat = testsupport::toy_catalog();
    std::vector<corpus::UserRecord> users;

    adapters::AdapterConfig pop;
    pop.kind = adapters::AdapterKind::popularity;
    CHECK(adapters::make_adapter(pop, cat, users)->describe() == "popularity");

    adapters::AdapterConfig emb;
    emb.kind = adapters::AdapterKind::embedding_retrieval;
    CHECK(adapters::make_adapter(emb, cat, users)->describe() == "embedding_retrieval");

    adapters::AdapterConfig remote;
    remote.kind = adapters::AdapterKind::remote_http;
    CHECK_THROWS_AS(adapters::make_adapter(remote, cat, users), ConfigError); // no endpoint

    adapters::AdapterConfig scripted;
    scripted.kind = adapters::AdapterKind::scripted;
    CHECK_THROWS_AS(adapters::make_adapter(scripted, cat, users), ConfigError); // no script

    CHECK(adapters::adapter_kind_from_name("popularity") == adapters::AdapterKind::popularity);
    CHECK_THROWS_AS(adapters::adapter_kind_from_name("bogus"), ConfigError);
    CHECK(std::string(adapters::adapter_kind_name(adapters::AdapterKind::remote_http)) ==
          "remote_http");
}

// ---------------------------------------------------------------------------
// user simulator agent
// ---------------------------------------------------------------------------

static pref::PreferenceProfile stub_profile() {
    pref::PreferenceProfile p;
    p.user_id = "u1";
    p.general.user_id = "u1";
    p.general.narrative = "Enjoys tense heist capers, patient pacing.";
    return p;
}

TEST_CASE("user_turn opens from the narrative and reacts to reflections") {
    agents::StubBackend backend;
    pref::PrefContext ctx;
    dialogue::DialogueContext dlg;

    auto opening = agents::user_turn(stub_profile(), dlg, {}, backend, ctx, {});
    CHECK(opening.role == "user");
    CHECK(opening.turn == 1);
    CHECK(opening.text.find("tense heist capers") != std::string::npos);

    dlg.add_user(opening.text);
    dlg.add_system("Here are some picks.");

    pref::ReflectedPreference refl;
    refl.turn = 2;
    pref::BinaryPreference bp;
    bp.item_id = "m3";
    bp.likes = {"rival pilot energy"};
    refl.per_item = {bp};

    auto second = agents::user_turn(stub_profile(), dlg, {refl}, backend, ctx, {});
    CHECK(second.turn == 2);
    CHECK(second.text.find("rival pilot energy") != std::string::npos);
}

TEST_CASE("user_turn refuses a context that is not awaiting the user") {
    agents::StubBackend backend;
    pref::PrefContext ctx;
    dialogue::DialogueContext dlg;
    dlg.add_user("pending");
    CHECK_THROWS_AS(agents::user_turn(stub_profile(), dlg, {}, backend, ctx, {}), DataError);
}

TEST_CASE("user_turn regenerates a leaky utterance once then rejects") {
    pref::PrefContext ctx;
    dialogue::DialogueContext dlg;
    pref::ForbiddenTitles forbidden;
    forbidden.normalized = {"hollow crown road"};

    agents::ScriptedBackend recovers(
        {"I loved Hollow Crown Road, more like that.", "Something eerie, please."});
    auto turn = agents::user_turn(stub_profile(), dlg, {}, recovers, ctx, forbidden);
    CHECK(turn.text == "Something eerie, please.");

    agents::ScriptedBackend leaks(
        {"Hollow Crown Road please.", "HOLLOW crown road (2020) again!"});
    CHECK_THROWS_AS(agents::user_turn(stub_profile(), dlg, {}, leaks, ctx, forbidden),
                    LeakageError);
}

TEST_CASE("user_turn prompt carries the narrative, history, and reflections") {
    agents::StubBackend backend;
    std::vector<agents::GenerationRequest> sent;
    pref::PrefContext ctx;
    ctx.prompt_sink = [&](const agents::GenerationRequest& r) { sent.push_back(r); };

    dialogue::DialogueContext dlg;
    dlg.add_user("opening");
    dlg.add_system("reply");

    pref::ReflectedPreference refl;
    refl.turn = 2;
    pref::BinaryPreference bp;
    bp.item_id = "m3";
    bp.likes = {"velvet texture"};
    bp.dislikes = {"rushed finale"};
    refl.per_item = {bp};

    agents::user_turn(stub_profile(), dlg, {refl}, backend, ctx, {});
    REQUIRE(sent.size() == 1);
    CHECK(sent[0].stage == agents::Stage::user_response);
    const std::string& prompt = sent[0].messages.back().content;
    CHECK(prompt.find("tense heist capers") != std::string::npos);
    CHECK(prompt.find("User: opening") != std::string::npos);
    CHECK(prompt.find("velvet texture") != std::string::npos);
    CHECK(prompt.find("rushed finale") != std::string::npos);
}

TEST_CASE("pairwise_select parses a strict single digit with one retry") {
    auto cat = testsupport::toy_catalog();
    pref::PrefContext ctx;

    agents::ScriptedBackend ok({"1"});
    CHECK(agents::pairwise_select("profile", cat.at("m1"), cat.at("m2"), ok, ctx) == 1);

    agents::ScriptedBackend padded({" 0 \n"});
    CHECK(agents::pairwise_select("profile", cat.at("m1"), cat.at("m2"), padded, ctx) == 0);

    agents::ScriptedBackend recovers({"the first one", "0"});
    CHECK(agents::pairwise_select("profile", cat.at("m1"), cat.at("m2"), recovers, ctx) == 0);

    agents::ScriptedBackend junk({"maybe", "2"});
    CHECK_THROWS_AS(agents::pairwise_select("profile", cat.at("m1"), cat.at("m2"), junk, ctx),
                    DataError);

    // stub picks by token overlap with the profile
    agents::StubBackend stub;
    int pick = agents::pairwise_select("rival pilots racing ships through a nebula",
                                       cat.at("m2"), cat.at("m3"), stub, ctx);
    CHECK(pick == 1);
}
