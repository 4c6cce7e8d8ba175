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

#include <sstream>

#include "fcm/cli/cli.hpp"
#include "test_util.hpp"

using namespace fcm;
using fcm::testing::fixture;

namespace
{

struct Outcome
{
    int code;
    std::string out;
    std::string err;
};

Outcome fcmw(std::vector<std::string> args)
{
    std::ostringstream out, err;
    int code = cli::cli_dispatch(args, out, err);
    return {code, out.str(), err.str()};
}

std::string fx(const std::string& rel)
{
    return fixture(rel).string();
}

struct TempDir
{
    fs::path path;
    TempDir()
    {
        static int counter = 0;
        path = fs::temp_directory_path() / ("fcm-cli-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST(Cli, RunReportsLimitCycle)
{
    auto r = fcmw({"run", fx("fcm/ai_hallucination.fcm.json"), "--init", "1,1,0,1,0"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("limit cycle, period 2"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("t=0 [11010]"), std::string::npos);
}

TEST(Cli, RunExportsTrajectory)
{
    TempDir dir;
    auto csv = (dir.path / "t.csv").string();
    auto r = fcmw({"run", fx("fcm/ai_essay.gemini.fcm.json"), "--init", "ones", "--export", csv});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("limit cycle, period 4"), std::string::npos) << r.out;
    auto labels = load_fcm(fixture("fcm/ai_essay.gemini.fcm.json")).labels();
    auto text = read_file(csv);
    EXPECT_EQ(text.substr(0, text.find('\n')).find(labels.front()), 0u) << text.substr(0, 80);
    EXPECT_TRUE(fs::exists(csv + ".meta.json"));
}

TEST(Cli, RunRejectsWrongInitLength)
{
    auto r = fcmw({"run", fx("fcm/ai_hallucination.fcm.json"), "--init", "1,0"});
    EXPECT_EQ(r.code, cli::kExitUsage);
    EXPECT_NE(r.err.find("usage error"), std::string::npos);
}

TEST(Cli, EnumeratesBasins)
{
    auto r = fcmw({"equilibria", fx("fcm/two_node_swap.json"), "--enumerate-binary"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("3 attractors, basin sizes 1,1,2"), std::string::npos) << r.out;
}

TEST(Cli, EnumerationGuard)
{
    auto r = fcmw({"equilibria", fx("fcm/ai_essay.gemini.fcm.json"), "--enumerate-binary", "--max-nodes", "10"});
    EXPECT_EQ(r.code, cli::kExitFailure);
    EXPECT_NE(r.err.find("resource-error"), std::string::npos) << r.err;
}

TEST(Cli, MixWritesFixtureMixture)
{
    TempDir dir;
    auto out = (dir.path / "m.json").string();
    auto r = fcmw({"mix", fx("fcm/ai_essay.gemini.fcm.json"), fx("fcm/ai_essay.chatgpt.fcm.json"), "--weights",
                   "0.5,0.5", "--out", out});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_file(out), read_file(fixture("fcm/ai_essay.mixed.fcm.json")));
}

TEST(Cli, UsageErrorsExitTwo)
{
    EXPECT_EQ(fcmw({"mix", fx("fcm/two_node_swap.json"), fx("fcm/two_node_swap.json"), "--weights", "0.6,0.5"}).code,
              cli::kExitUsage);
    EXPECT_EQ(fcmw({"run", fx("fcm/two_node_swap.json"), "--init", "1,0", "--bogus"}).code, cli::kExitUsage);
    EXPECT_EQ(fcmw({"nonsense"}).code, cli::kExitUsage);
    EXPECT_EQ(fcmw({}).code, cli::kExitUsage);
    EXPECT_EQ(fcmw({"run", "/no/such/file.json", "--init", "ones"}).code, cli::kExitUsage);
    EXPECT_EQ(fcmw({"--help"}).code, cli::kExitOk);
}

TEST(Cli, ExtractUnderReplay)
{
    TempDir dir;
    auto out = (dir.path / "f.json").string();
    auto r = fcmw({"extract", fx("docs/ai_hallucination.txt"), "--replay", fx("transcripts"), "--model",
                   "gemini-2.5-pro", "--created-at", "2026-03-01T00:00:00Z", "--out", out});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("extracted 5 nodes and 6 edges"), std::string::npos) << r.out;
    EXPECT_EQ(read_file(out), read_file(fixture("fcm/ai_hallucination.fcm.json")));
}

TEST(Cli, PipelineFailureNamesStage)
{
    TempDir dir;
    auto doc = dir.path / "doc.txt";
    write_file_atomic(doc, "A document nobody recorded.\n");
    auto r = fcmw({"extract", doc.string(), "--replay", fx("transcripts"), "--model", "gemini-2.5-pro"});
    EXPECT_EQ(r.code, cli::kExitFailure);
    EXPECT_NE(r.err.find("[step1-nouns]"), std::string::npos) << r.err;
}

TEST(Cli, AgenticRunAndJournalReplay)
{
    TempDir dir;
    auto r = fcmw({"agentic", "--corpus", fx("corpus"), "--seed", fx("fcm/ai_hallucination.fcm.json"), "--iterations",
                   "3", "--replay", fx("transcripts"), "--model", "gemini-2.5-pro", "--created-at",
                   "2026-03-01T00:00:00Z", "--out", dir.path.string()});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_file(dir.path / "journal.jsonl"), read_file(fixture("agentic/journal.jsonl")));
    EXPECT_EQ(read_file(dir.path / "current.json"), read_file(fixture("agentic/current.json")));

    auto replayed = fcmw({"replay-journal", dir.path.string()});
    EXPECT_EQ(replayed.code, 0) << replayed.err;
    EXPECT_EQ(replayed.out, read_file(fixture("agentic/current.json")));
    EXPECT_NE(replayed.err.find("matches"), std::string::npos) << replayed.err;
}

TEST(Cli, BinaryEndToEnd)
{
    auto cmd = std::string(FCM_FCMW_PATH) + " run " + fx("fcm/ai_hallucination.fcm.json") + " --init 1,1,0,1,0";
    FILE* pipe = ::popen(cmd.c_str(), "r");
    ASSERT_NE(pipe, nullptr);
    std::string out;
    char buf[256];
    while (std::fgets(buf, sizeof buf, pipe))
        out += buf;
    int status = ::pclose(pipe);
    EXPECT_EQ(WEXITSTATUS(status), 0);
    EXPECT_NE(out.find("limit cycle, period 2"), std::string::npos) << out;

    auto bad = std::string(FCM_FCMW_PATH) + " mix " + fx("fcm/two_node_swap.json") + " " +
               fx("fcm/two_node_swap.json") + " --weights 0.6,0.5 2>/dev/null";
    EXPECT_EQ(WEXITSTATUS(std::system(bad.c_str())), 2);
}
