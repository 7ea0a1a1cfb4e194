#include <gtest/gtest.h>

#include <httplib.h>

#include "hwhelp/http_api.hpp"
#include "service_fixture.hpp"

using namespace hwhelp;
using namespace testing_support;
using nlohmann::json;

namespace {

class Api : public ::testing::Test {
 protected:
  void SetUp() override {
    server_ = std::make_unique<ApiServer>(*rig_.service, 8);
    port_ = server_->bind("127.0.0.1", 0);
    ASSERT_GT(port_, 0);
    server_->start_background();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  void TearDown() override { server_->stop(); }

  httplib::Headers dev() const { return {{"Authorization", "Bearer dev-secret"}}; }

  std::vector<SseEvent> post_stream(const json& body) {
    SseParser parser;
    std::vector<SseEvent> events;
    auto sink = [&](const SseEvent& e) { events.push_back(e); };
    httplib::Request req;
    req.method = "POST";
    req.path = "/v1/help";
    req.body = body.dump();
    req.set_header("Content-Type", "application/json");
    req.content_receiver = [&](const char* data, size_t n, uint64_t, uint64_t) {
      parser.feed(std::string_view(data, n), sink);
      return true;
    };
    auto res = client_->send(req);
    EXPECT_TRUE(res);
    parser.finish(sink);
    return events;
  }

  ServiceRig rig_;
  std::unique_ptr<ApiServer> server_;
  std::unique_ptr<httplib::Client> client_;
  int port_ = 0;
};

}  // namespace

TEST_F(Api, HelpJson) {
  json body = {{"student", "s1"}, {"source", swapped_add_abs()}};
  auto res = client_->Post("/v1/help", body.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  auto j = json::parse(res->body);
  EXPECT_EQ(j.at("text"), kStubQuestion);
  EXPECT_EQ(j.at("meta").at("problem_id"), "add_abs_value");
  EXPECT_EQ(j.at("meta").at("gated"), false);
}

TEST_F(Api, HelpStream) {
  auto events = post_stream({{"student", "s2"}, {"source", swapped_add_abs()}, {"stream", true}});
  ASSERT_EQ(events.size(), 3u);
  EXPECT_EQ(events[0].data + events[1].data, kStubQuestion);
  EXPECT_EQ(events[2].event, "meta");
  auto meta = json::parse(events[2].data);
  EXPECT_EQ(meta.at("backend"), "stub");
  EXPECT_GE(meta.at("first_chunk_ms").get<int>(), 0);
}

TEST_F(Api, GatedStreamIsOneChunk) {
  auto events = post_stream({{"student", "s3"}, {"source", correct_add_abs()}, {"stream", true}});
  ASSERT_EQ(events.size(), 2u);
  EXPECT_EQ(events[0].data, kCorrectCodePhrase);
  EXPECT_EQ(json::parse(events[1].data).at("gated"), true);
}

TEST_F(Api, HelpErrors) {
  auto bad = client_->Post("/v1/help", "{nope", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(json::parse(bad->body).at("error"), "bad_request");

  auto ambiguous = client_->Post("/v1/help", json{{"student", "s"}, {"source", "x = 1\n"}}.dump(), "application/json");
  EXPECT_EQ(ambiguous->status, 422);

  auto unknown = client_->Post("/v1/help",
                               json{{"student", "s"}, {"source", "x = 1\n"}, {"problem_hint", "zzz"}}.dump(),
                               "application/json");
  EXPECT_EQ(unknown->status, 404);
}

TEST_F(Api, Problems) {
  auto list = client_->Get("/v1/problems");
  ASSERT_TRUE(list);
  EXPECT_EQ(json::parse(list->body).at("problems").size(), 3u);

  auto pub = json::parse(client_->Get("/v1/problems/add_abs_value")->body);
  EXPECT_FALSE(pub.contains("solution_note"));
  auto staff = json::parse(client_->Get("/v1/problems/add_abs_value", dev())->body);
  EXPECT_TRUE(staff.contains("solution_note"));
  EXPECT_EQ(client_->Get("/v1/problems/none")->status, 404);
}

TEST_F(Api, Consent) {
  auto res = client_->Get("/v1/consent");
  EXPECT_EQ(json::parse(res->body).at("text"), "Code you send is shared with a third-party model.");
}

TEST_F(Api, DevRoutesNeedToken) {
  for (const char* path : {"/v1/dev/templates", "/v1/dev/checkpoints", "/v1/stats", "/v1/dev/templates/fig4-v1"}) {
    EXPECT_EQ(client_->Get(path)->status, 401) << path;
  }
  EXPECT_EQ(client_->Post("/v1/dev/replay", "{}", "application/json")->status, 401);
  EXPECT_EQ(client_->Get("/v1/dev/templates", {{"X-Dev-Token", "dev-secret"}})->status, 200);
}

TEST_F(Api, TemplateEditing) {
  auto t = json::parse(client_->Get("/v1/dev/templates/fig4-v1", dev())->body);
  EXPECT_EQ(t.at("readonly"), true);
  EXPECT_NE(t.at("text").get<std::string>().find("%SOLUTION%"), std::string::npos);

  auto put_ro = client_->Put("/v1/dev/templates/fig4-v1", dev(), json{{"text", "x %SOLUTION%"}}.dump(), "application/json");
  EXPECT_EQ(put_ro->status, 409);
  auto put_bad = client_->Put("/v1/dev/templates/draft", dev(), json{{"text", "no marker"}}.dump(), "application/json");
  EXPECT_EQ(put_bad->status, 400);
  auto put_ok = client_->Put("/v1/dev/templates/draft", dev(), json{{"text", "Short.\n%SOLUTION%\n"}}.dump(), "application/json");
  EXPECT_EQ(put_ok->status, 200);
  auto ids = json::parse(client_->Get("/v1/dev/templates", dev())->body).at("templates");
  EXPECT_EQ(ids, json({"draft", "fig4-v1"}));
  EXPECT_EQ(client_->Get("/v1/dev/templates/missing", dev())->status, 404);
}

TEST_F(Api, ReplayAndPreviewAgree) {
  auto cps = json::parse(client_->Get("/v1/dev/checkpoints", dev())->body).at("checkpoints");
  ASSERT_EQ(cps.size(), 12u);

  json replay_body = {{"template_text", "Draft.\n\n%SOLUTION%\n"}, {"template_id", "draft-x"}, {"checkpoint_indices", {1}}};
  auto replay = json::parse(client_->Post("/v1/dev/replay", dev(), replay_body.dump(), "application/json")->body);
  ASSERT_EQ(replay.at("results").size(), 1u);
  EXPECT_EQ(replay.at("results")[0].at("response"), kStubQuestion);
  EXPECT_EQ(replay.at("metrics").at("n"), 1);

  json preview_body = {{"template_text", "Draft.\n\n%SOLUTION%\n"},
                       {"template_id", "draft-x"},
                       {"problem_id", cps[1].at("problem_id")},
                       {"code", cps[1].at("code")}};
  auto preview = json::parse(client_->Post("/v1/dev/assemble", dev(), preview_body.dump(), "application/json")->body);
  ASSERT_EQ(preview.at("prompts").size(), 1u);
  EXPECT_EQ(preview.at("prompts")[0].at("prompt_hash"), replay.at("results")[0].at("prompt_hash"));
  EXPECT_TRUE(preview.at("rendered")[0].get<std::string>().starts_with("template: draft-x\n"));

  auto all = json::parse(client_->Post("/v1/dev/replay", dev(), "{}", "application/json")->body);
  EXPECT_EQ(all.at("metrics").at("false_positive"), 0);
  EXPECT_EQ(all.at("metrics").at("false_negative"), 0);

  auto out_of_range = client_->Post("/v1/dev/replay", dev(), json{{"checkpoint_indices", {99}}}.dump(), "application/json");
  EXPECT_EQ(out_of_range->status, 400);
  auto bad_backend = client_->Post("/v1/dev/replay", dev(), json{{"backend", "gpt"}}.dump(), "application/json");
  EXPECT_EQ(bad_backend->status, 400);
}

TEST_F(Api, SolutionFirstReplayOverHttp) {
  json body = {{"strategy", "solution_first"}, {"checkpoint_indices", {0, 1}}};
  auto res = client_->Post("/v1/dev/replay", dev(), body.dump(), "application/json");
  ASSERT_EQ(res->status, 200);
  auto j = json::parse(res->body);
  EXPECT_EQ(j.at("results").size(), 2u);
}

TEST_F(Api, Stats) {
  client_->Post("/v1/help", json{{"student", "s9"}, {"source", correct_add_abs()}}.dump(), "application/json");
  auto j = json::parse(client_->Get("/v1/stats", dev())->body);
  EXPECT_EQ(j.at("usage").at("records"), 1);
  EXPECT_EQ(j.at("service").at("gated"), 1);
  auto windowed = json::parse(client_->Get("/v1/stats?from=2000-01-01T00:00:00Z&to=2000-01-02T00:00:00Z", dev())->body);
  EXPECT_EQ(windowed.at("usage").at("records"), 0);
  EXPECT_EQ(client_->Get("/v1/stats?from=garbage", dev())->status, 400);
}
