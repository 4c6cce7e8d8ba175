/*
 * Copyright 2026 The FCM Workbench Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <gtest/gtest.h>

#include <deque>
#include <thread>

#include "fcm/extraction/http_provider.hpp"
#include "fcm/extraction/pipeline.hpp"
#include "scripted_provider.hpp"
#include "test_util.hpp"

using namespace fcm;
using namespace fcm::extraction;
using fcm::testing::fixture;

namespace
{

template <class F>
ErrorKind kind_of(F&& f)
{
    try
    {
        f();
    }
    catch (const Error& e)
    {
        return e.kind();
    }
    ADD_FAILURE() << "expected an fcm::Error";
    return ErrorKind::internal;
}

struct TempDir
{
    fs::path path;
    TempDir()
    {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("fcm-extract-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

/// Replies with canned contents in order and remembers every request.
class SequenceProvider : public llm::Provider
{
  public:
    explicit SequenceProvider(std::deque<std::string> replies) : replies_(std::move(replies)) {}

    llm::Response complete(const llm::Request& r) override
    {
        requests.push_back(r);
        if (replies_.empty())
            throw ProviderError("no more replies", 1, 0);
        llm::Response out{replies_.front(), replies_.front()};
        replies_.pop_front();
        return out;
    }

    std::vector<llm::Request> requests;

  private:
    std::deque<std::string> replies_;
};

ExtractionConfig test_config()
{
    ExtractionConfig c;
    c.templates = PromptTemplates::load(fcm::testing::template_dir());
    c.model = "test-model";
    c.created_at = "2026-01-01T00:00:00Z";
    return c;
}

SourceDocument sample_doc()
{
    return SourceDocument::from_text("Rain raises river levels. High river levels cause floods. Levees reduce floods.");
}

CausalEdgeCandidate edge(std::string quote)
{
    return {"A", "B", Sign::positive, 0.5, std::move(quote), "raises"};
}

} // namespace

TEST(Document, IdIsContentHash)
{
    auto d = SourceDocument::from_text("abc");
    EXPECT_EQ(d.doc_id, sha256_hex("abc"));
    EXPECT_EQ(d.doc_id, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(kind_of([] { SourceDocument::from_text(" \n\t"); }), ErrorKind::input);
}

TEST(Evidence, AcceptsVerbatimAndWhitespacePerturbedQuotes)
{
    auto doc = SourceDocument::from_text("Misinformation on the internet\nthen  enters the data. It causes hallucinations.");
    auto r = validate_evidence({edge("Misinformation on the internet then enters the data"),
                                edge("  Misinformation on\tthe internet   then enters the data. "),
                                edge("\xE2\x80\x9CIt causes hallucinations.\xE2\x80\x9D"), edge("\"It causes hallucinations\"")},
                               doc);
    EXPECT_EQ(r.accepted.size(), 4u);
    EXPECT_TRUE(r.rejected.empty());
}

TEST(Evidence, RejectsFabricatedAndAlteredQuotes)
{
    auto doc = SourceDocument::from_text("AI hallucinations spread misinformation on the internet.");
    auto r = validate_evidence({edge("AI hallucinations cause misinformation"), edge(""), edge("  \" \" "),
                                edge("ai hallucinations spread misinformation")},
                               doc);
    ASSERT_EQ(r.rejected.size(), 4u);
    EXPECT_EQ(r.rejected[0].reason, "quote-not-found");
    EXPECT_EQ(r.rejected[1].reason, "empty-quote");
    EXPECT_EQ(r.rejected[2].reason, "empty-quote");
    // Case is significant: the quote must be verbatim.
    EXPECT_EQ(r.rejected[3].reason, "quote-not-found");
}

TEST(Evidence, NormalizeQuote)
{
    EXPECT_EQ(normalize_quote("  'Levees reduce floods.'  "), "Levees reduce floods");
    EXPECT_EQ(normalize_quote("a \n b?!"), "a b");
    EXPECT_EQ(normalize_quote("..."), "");
}

TEST(Templates, RenderAndHash)
{
    PromptTemplate t{"t", "scale: {{s}} and {{s}}"};
    EXPECT_EQ(t.render({{"s", "x"}}), "scale: x and x");
    EXPECT_EQ(kind_of([&] { t.render({}); }), ErrorKind::input);
    EXPECT_EQ(kind_of([] { PromptTemplate{"u", "broken {{s"}.render({{"s", "x"}}); }), ErrorKind::input);
    auto all = PromptTemplates::load(fcm::testing::template_dir());
    EXPECT_EQ(all.hashes().size(), 3u);
    EXPECT_EQ(all.hashes().at("step1"), sha256_hex(all.nouns.text));
    EXPECT_NO_THROW(all.edges.render({{"weight_scale", "0.25"}}));
    EXPECT_EQ(kind_of([] { PromptTemplates::load("/nonexistent"); }), ErrorKind::io);
}

TEST(Llm, RequestHashCoversSamplingParameters)
{
    llm::Request a{"sys", "user", 1.0, 0.95, "m"};
    auto b = a;
    b.temperature = 0.0;
    EXPECT_NE(llm::request_hash(a), llm::request_hash(b));
    EXPECT_EQ(llm::request_hash(a), llm::request_hash(llm::Request{"sys", "user", 1.0, 0.95, "m"}));
    a.top_p = 0.0;
    EXPECT_EQ(kind_of([&] { llm::validate(a); }), ErrorKind::input);
}

TEST(Replay, RecordThenReplayRoundTrip)
{
    TempDir dir;
    SequenceProvider inner({"first reply\nwith two lines\n"});
    llm::RecordingProvider rec(inner, dir.path);
    llm::Request r{"# header\nbody", "user", 1.0, 0.95, "m"};
    rec.complete(r);
    llm::ReplayProvider replay(dir.path);
    EXPECT_EQ(replay.complete(r).content, "first reply\nwith two lines\n");

    auto other = r;
    other.user_content = "different";
    EXPECT_EQ(kind_of([&] { replay.complete(other); }), ErrorKind::fixture);

    // A transcript stored under the wrong hash is refused.
    fs::copy_file(dir.path / (llm::request_hash(r) + ".txt"), dir.path / (llm::request_hash(other) + ".txt"));
    EXPECT_EQ(kind_of([&] { replay.complete(other); }), ErrorKind::fixture);
    EXPECT_EQ(kind_of([] { llm::ReplayProvider("/nonexistent/replay"); }), ErrorKind::fixture);
}

TEST(Pipeline, RetriesOnceAfterUnparseableOutput)
{
    auto doc = sample_doc();
    SequenceProvider p({"Here are the nouns: rain, river levels", "0 | Rain | -\n1 | river levels | -\n"});
    ExtractionArtifacts a;
    auto nouns = extract_nouns(doc, p, test_config(), a);
    ASSERT_EQ(nouns.size(), 2u);
    ASSERT_EQ(p.requests.size(), 2u);
    EXPECT_NE(p.requests[1].user_content.find("Here are the nouns"), std::string::npos);
    EXPECT_EQ(a.transcripts.size(), 2u);
}

TEST(Pipeline, SecondParseFailureIsPipelineErrorWithTranscript)
{
    SequenceProvider p({"nonsense", "still nonsense"});
    ExtractionArtifacts a;
    try
    {
        extract_nouns(sample_doc(), p, test_config(), a);
        FAIL();
    }
    catch (const PipelineError& e)
    {
        EXPECT_EQ(e.stage(), "step1-nouns");
        EXPECT_EQ(e.kind(), ErrorKind::pipeline);
        EXPECT_EQ(e.transcript().size(), 2u);
    }
}

TEST(Pipeline, ProviderErrorsCarryTheStage)
{
    SequenceProvider p({});
    ExtractionArtifacts a;
    try
    {
        extract_nouns(sample_doc(), p, test_config(), a);
        FAIL();
    }
    catch (const ProviderError& e)
    {
        EXPECT_EQ(e.stage(), "step1-nouns");
    }
}

TEST(Pipeline, NounsNotInDocumentAreDropped)
{
    SequenceProvider p({"0 | rain | -\n1 | volcano | -\n2 | floods | they\n1 | thing | it\n"});
    ExtractionArtifacts a;
    auto nouns = extract_nouns(sample_doc(), p, test_config(), a);
    ASSERT_EQ(nouns.size(), 2u);
    EXPECT_EQ(nouns[0].surface, "rain");
    EXPECT_EQ(nouns[1].surface, "floods");
    EXPECT_EQ(a.log.size(), 2u);
}

TEST(Pipeline, EmptyDocumentIsInputError)
{
    SequenceProvider p({});
    ExtractionArtifacts a;
    SourceDocument empty;
    EXPECT_EQ(kind_of([&] { extract_nouns(empty, p, test_config(), a); }), ErrorKind::input);
}

TEST(Pipeline, RefineNodesValidatesSourcesAndDeduplicates)
{
    std::vector<NounCandidate> nouns{{"rain", 0, {}}, {"river levels", 1, {}}};
    SequenceProvider p({"Rainfall | rain\nRiver Level | river levels\nrainfall | rain\nSnow | snow\n"});
    ExtractionArtifacts a;
    auto nodes = refine_nodes(nouns, sample_doc(), p, test_config(), a);
    ASSERT_EQ(nodes.size(), 2u);
    EXPECT_EQ(nodes[0].id, "rainfall");
    EXPECT_EQ(nodes[0].evidence, "rain");
    EXPECT_EQ(nodes[1].label, "River Level");
    EXPECT_EQ(a.log.size(), 2u);
}

TEST(Pipeline, RefineNodesOnNoNounsMakesNoCall)
{
    SequenceProvider p({});
    ExtractionArtifacts a;
    EXPECT_TRUE(refine_nodes({}, sample_doc(), p, test_config(), a).empty());
    EXPECT_TRUE(p.requests.empty());
}

TEST(Pipeline, EdgeRecordsAreValidatedSnappedAndSigned)
{
    std::vector<ConceptNode> nodes{{"rain", "Rain", {}}, {"river", "River Level", {}}, {"flood", "Floods", {}}};
    SequenceProvider p({"Rain | River Level | + | 0.8 | raises | Rain raises river levels\n"
                        "River Level | Floods | - | 0.5 | cause | High river levels | cause floods\n"
                        "Rain | Snow | + | 1 | makes | nothing\n"
                        "Floods | Floods | + | 1 | self | Levees reduce floods\n"
                        "Floods | Rain | + | 0 | none | no\n"});
    ExtractionArtifacts a;
    auto edges = extract_edges(nodes, sample_doc(), p, test_config(), a);
    ASSERT_EQ(edges.size(), 2u);
    EXPECT_EQ(edges[0].weight, 0.75);
    EXPECT_EQ(edges[1].weight, -0.5);
    EXPECT_EQ(edges[1].sign, Sign::negative);
    EXPECT_EQ(edges[1].evidence_quote, "High river levels | cause floods");
    // Unknown label, a pair not asked (self-loop), and a zero-strength edge.
    EXPECT_EQ(a.log.size(), 4u);
    EXPECT_EQ(p.requests.size(), 1u);
    EXPECT_NE(p.requests[0].system_instruction.find("0.25, 0.50, 0.75, 1.00"), std::string::npos);
}

TEST(Pipeline, MalformedEdgeRecordsTriggerTheRetry)
{
    std::vector<ConceptNode> nodes{{"rain", "Rain", {}}, {"river", "River Level", {}}};
    SequenceProvider p({"Rain | River Level | up | 0.5 | raises | Rain raises river levels\n",
                        "Rain | River Level | + | strong | raises | Rain raises river levels\n"});
    ExtractionArtifacts a;
    EXPECT_EQ(kind_of([&] { extract_edges(nodes, sample_doc(), p, test_config(), a); }), ErrorKind::pipeline);
}

TEST(Pipeline, PairsAreBatchedAndConcurrencyDoesNotChangeTheResult)
{
    auto doc = SourceDocument::from_text(read_file(fixture("docs/ai_hallucination.txt")));
    auto script = fcm::testing::Script::load(fixture("scripts/ai_hallucination.script"));
    auto run = [&](std::size_t batch, std::size_t width) {
        fcm::testing::ScriptedProvider p;
        p.add(doc.text, script);
        auto config = test_config();
        config.pair_batch_size = batch;
        config.max_concurrency = width;
        auto result = extract_fcm(doc, p, config);
        return std::make_pair(result, p.calls());
    };
    auto [base, base_calls] = run(20, 1);
    EXPECT_EQ(base_calls, 3u);
    auto [small, small_calls] = run(3, 1);
    EXPECT_EQ(small_calls, 2u + 7u); // 20 ordered pairs in batches of 3
    auto [wide, wide_calls] = run(3, 4);
    EXPECT_EQ(wide_calls, small_calls);
    EXPECT_EQ(fcm_digest(base.fcm), fcm_digest(small.fcm));
    EXPECT_EQ(small.fcm, wide.fcm);
    EXPECT_EQ(small.artifacts.transcript_hash(), wide.artifacts.transcript_hash());
}

TEST(Pipeline, BuildKeepsStrongestDuplicate)
{
    std::vector<ConceptNode> nodes{{"a", "A", {}}, {"b", "B", {}}};
    std::vector<CausalEdgeCandidate> edges{{"A", "B", Sign::positive, 0.5, "q1", "v1"},
                                           {"a", "b", Sign::negative, -0.75, "q2", "v2"},
                                           {"A", "B", Sign::positive, 0.75, "q3", "v3"}};
    ExtractionArtifacts art;
    auto f = build_fcm(nodes, edges, sample_doc(), art, test_config());
    EXPECT_EQ(f.edges()(0, 1), -0.75);
    EXPECT_EQ(f.annotation(0, 1)->evidence_quote, "q2");
    EXPECT_EQ(f.provenance().source, "extraction");
    EXPECT_EQ(f.provenance().created_at, "2026-01-01T00:00:00Z");
    EXPECT_EQ(f.provenance().template_hashes.size(), 3u);
}

TEST(Pipeline, ReplayOfRecordedFixtureIsDeterministic)
{
    auto doc = SourceDocument::from_text(read_file(fixture("docs/ai_hallucination.txt")));
    llm::ReplayProvider replay(fixture("transcripts"));
    auto config = test_config();
    config.model = "gemini-2.5-pro";
    config.created_at = "2026-03-01T00:00:00Z";
    auto a = extract_fcm(doc, replay, config);
    auto b = extract_fcm(doc, replay, config);
    EXPECT_EQ(serialize_fcm(a.fcm), serialize_fcm(b.fcm));
    EXPECT_EQ(serialize_fcm(a.fcm), read_file(fixture("fcm/ai_hallucination.fcm.json")));
    EXPECT_EQ(a.artifacts.nouns.size(), 22u);
    ASSERT_TRUE(a.artifacts.nouns[12].resolved_from_pronoun.has_value());
    EXPECT_EQ(*a.artifacts.nouns[12].resolved_from_pronoun, "it");

    config.model = "some-other-model";
    EXPECT_EQ(kind_of([&] { extract_fcm(doc, replay, config); }), ErrorKind::fixture);
}

TEST(Pipeline, HallucinatedEdgeIsRejectedNotMapped)
{
    auto doc = SourceDocument::from_text(read_file(fixture("docs/ai_essay.txt")));
    llm::ReplayProvider replay(fixture("transcripts"));
    auto config = test_config();
    config.model = "gemini-2.5-pro";
    config.created_at = "2026-03-01T00:00:00Z";
    auto r = extract_fcm(doc, replay, config);
    EXPECT_EQ(r.fcm.size(), 15u);
    EXPECT_EQ(r.fcm.edges().nonzero_count(), 26u);
    ASSERT_EQ(r.artifacts.rejected.size(), 1u);
    EXPECT_EQ(r.artifacts.rejected[0].edge.source_label, "Intellectual Revolution");
    EXPECT_EQ(r.artifacts.rejected[0].reason, "quote-not-found");
}

// ---- HTTP provider against an in-process server

namespace
{

struct MockServer
{
    httplib::Server server;
    std::thread thread;
    int port = 0;

    template <class Handler>
    explicit MockServer(Handler h)
    {
        server.Post("/v1/chat/completions", h);
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~MockServer()
    {
        server.stop();
        thread.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port) + "/v1"; }
};

std::string completion(const std::string& content)
{
    return json{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})}}.dump();
}

llm::HttpConfig http_config(const std::string& url)
{
    llm::HttpConfig c;
    c.base_url = url;
    c.model = "m";
    c.api_key = "secret";
    c.timeout_seconds = 2.0;
    c.max_retries = 2;
    c.backoff_ms = 1;
    return c;
}

} // namespace

TEST(HttpProvider, SendsChatRequestWithBearerToken)
{
    json seen;
    std::string auth;
    MockServer mock([&](const httplib::Request& req, httplib::Response& res) {
        seen = json::parse(req.body);
        auth = req.get_header_value("Authorization");
        res.set_content(completion("0 | x | -"), "application/json");
    });
    llm::HttpProvider p(http_config(mock.url()));
    auto r = p.complete({"system text", "user text", 0.7, 0.9, ""});
    EXPECT_EQ(r.content, "0 | x | -");
    EXPECT_EQ(auth, "Bearer secret");
    EXPECT_EQ(seen["model"], "m");
    EXPECT_EQ(seen["temperature"], 0.7);
    EXPECT_EQ(seen["messages"][0]["content"], "system text");
    EXPECT_EQ(seen["messages"][1]["role"], "user");
}

TEST(HttpProvider, RetriesServerErrorsThenSucceeds)
{
    std::atomic<int> hits{0};
    MockServer mock([&](const httplib::Request&, httplib::Response& res) {
        if (++hits < 3)
        {
            res.status = 503;
            return;
        }
        res.set_content(completion("ok"), "application/json");
    });
    llm::HttpProvider p(http_config(mock.url()));
    EXPECT_EQ(p.complete({"s", "u", 1.0, 0.95, "m"}).content, "ok");
    EXPECT_EQ(hits.load(), 3);
}

TEST(HttpProvider, AuthFailureIsNotRetried)
{
    std::atomic<int> hits{0};
    MockServer mock([&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 401;
    });
    llm::HttpProvider p(http_config(mock.url()));
    try
    {
        p.complete({"s", "u", 1.0, 0.95, "m"});
        FAIL();
    }
    catch (const ProviderError& e)
    {
        EXPECT_EQ(e.last_status(), 401);
        EXPECT_EQ(e.attempts(), 1);
    }
    EXPECT_EQ(hits.load(), 1);
}

TEST(HttpProvider, TimeoutExhaustsRetriesAsProviderError)
{
    MockServer mock([&](const httplib::Request&, httplib::Response& res) {
        std::this_thread::sleep_for(std::chrono::milliseconds(400));
        res.set_content(completion("late"), "application/json");
    });
    auto c = http_config(mock.url());
    c.timeout_seconds = 0.1;
    c.max_retries = 1;
    llm::HttpProvider p(c);
    try
    {
        p.complete({"s", "u", 1.0, 0.95, "m"});
        FAIL();
    }
    catch (const ProviderError& e)
    {
        EXPECT_EQ(e.attempts(), 2);
        EXPECT_EQ(e.last_status(), 0);
    }
}

TEST(HttpProvider, MalformedBodyIsProviderError)
{
    MockServer mock([&](const httplib::Request&, httplib::Response& res) { res.set_content("{}", "application/json"); });
    llm::HttpProvider p(http_config(mock.url()));
    EXPECT_EQ(kind_of([&] { p.complete({"s", "u", 1.0, 0.95, "m"}); }), ErrorKind::provider);
}

TEST(HttpProvider, Configuration)
{
    llm::ProviderConfig none;
    EXPECT_EQ(kind_of([&] { llm::make_provider(none); }), ErrorKind::input);
    EXPECT_EQ(kind_of([] { llm::HttpProvider(http_config("no-scheme")); }), ErrorKind::input);
    EXPECT_EQ(kind_of([] { llm::make_provider(llm::ProviderConfig::replay("/nonexistent")); }), ErrorKind::fixture);
}
