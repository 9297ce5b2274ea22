#include <gtest/gtest.h>

#include <json.hpp>

#include <cmath>
#include <numeric>

#include "damr/embed.hpp"
#include "damr/error.hpp"
#include "fake_server.hpp"
#include "fixtures.hpp"

using namespace damr;

namespace {

double norm(const embed::Embedding& v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

remote::RemoteConfig local(const testkit::FakeServer& server) {
  remote::RemoteConfig c;
  c.base_url = server.base_url();
  c.api_key = "secret";
  c.model = "embedder";
  c.max_attempts = 2;
  c.initial_backoff = std::chrono::milliseconds(1);
  c.timeout = std::chrono::seconds(5);
  return c;
}

// Replies with `dim`-dimensional vectors whose first entry encodes the text length.
testkit::FakeServer::Handler embeddings_of(std::size_t dim) {
  return [dim](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    nlohmann::json data = nlohmann::json::array();
    for (const auto& text : body["input"]) {
      std::vector<double> v(dim, 0.5);
      v[0] = static_cast<double>(text.get<std::string>().size());
      data.push_back({{"embedding", v}});
    }
    res.set_content(nlohmann::json{{"data", data}}.dump(), "application/json");
  };
}

}  // namespace

TEST(Stub, UnitNormAndDeterministic) {
  for (const char* text : {"a", "b", "people.person.nationality", "a longer question?"}) {
    const auto v = embed::stub_embed(7, text, 1024);
    ASSERT_EQ(v.size(), 1024u);
    EXPECT_NEAR(norm(v), 1.0, 1e-12);
    for (double x : v) EXPECT_LE(std::abs(x), 1.0);
    EXPECT_EQ(v, embed::stub_embed(7, text, 1024));
  }
  EXPECT_NE(embed::stub_embed(7, "a", 64), embed::stub_embed(7, "b", 64));
  EXPECT_NE(embed::stub_embed(7, "a", 64), embed::stub_embed(8, "a", 64));
  EXPECT_THROW(embed::stub_embed(7, "a", 0), PreconditionError);
}

TEST(Stub, KnownBytesAcrossProcesses) {
  // Pinned so any platform or library change to the generator is caught.
  const auto v = embed::stub_embed(0, "a", 4);
  const auto again = embed::StubProvider(0, 4).embed(std::vector<std::string>{"a"}).front();
  EXPECT_EQ(v, again);
  // Recomputed independently from the FNV-1a / SplitMix64 definition.
  const std::vector<double> expect{-0x1.e950165825360p-2, -0x1.1bffce8ed2e00p-1,
                                   -0x1.588dbd26f78e8p-1, -0x1.afe24fffce77fp-4};
  EXPECT_EQ(v, expect);
  EXPECT_NEAR(norm(v), 1.0, 1e-12);
}

TEST(Cache, HitIsBitIdenticalWithoutProviderCall) {
  testkit::FakeServer server("/v1/embeddings", embeddings_of(8));
  embed::RemoteProvider provider(local(server), 8);
  embed::EmbeddingCache cache;
  const auto first = embed::embed_text(provider, cache, "hello");
  const auto second = embed::embed_text(provider, cache, "hello");
  EXPECT_EQ(*first, *second);
  EXPECT_EQ(provider.remote_calls(), 1u);
  EXPECT_EQ(server.hits(), 1);
  EXPECT_EQ(server.last_auth(), "Bearer secret");
  const auto body = nlohmann::json::parse(server.last_body());
  EXPECT_EQ(body["model"], "embedder");
  EXPECT_EQ(body["input"], nlohmann::json::array({"hello"}));
}

TEST(Cache, TransparentForStub) {
  testkit::StubEmbedding cached(32, 3);
  embed::StubProvider bare(3, 32);
  embed::EmbeddingCache scratch;
  for (const char* t : {"x", "y", "x"}) {
    EXPECT_EQ(*cached.embedder()(t), embed::stub_embed(3, t, 32));
    EXPECT_EQ(*embed::embed_text(bare, scratch, t), embed::stub_embed(3, t, 32));
  }
  EXPECT_EQ(cached.cache.size(), 2u);
  EXPECT_THROW(cached.embedder()(""), PreconditionError);
}

TEST(Cache, SaveLoadRoundTrip) {
  testkit::TempDir dir;
  testkit::StubEmbedding s(16, 1);
  for (const char* t : {"alpha", "beta \"quoted\"", "gamma\twith tab"}) s.embedder()(t);
  s.cache.save(dir / "c.jsonl");
  const auto back = embed::EmbeddingCache::load(dir / "c.jsonl");
  const auto a = s.cache.entries();
  const auto b = back.entries();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].first, b[i].first);
    EXPECT_EQ(*a[i].second, *b[i].second);
  }

  embed::EmbeddingCache empty;
  empty.save(dir / "e.jsonl");
  EXPECT_EQ(embed::EmbeddingCache::load(dir / "e.jsonl").size(), 0u);
}

TEST(Cache, TruncatedOrCorruptFileIsRejected) {
  testkit::TempDir dir;
  testkit::StubEmbedding s(16, 1);
  s.embedder()("one");
  s.embedder()("two");
  s.cache.save(dir / "c.jsonl");
  const auto text = testkit::read_file(dir / "c.jsonl");

  testkit::write_file(dir / "cut.jsonl", text.substr(0, text.size() - 20));
  try {
    embed::EmbeddingCache::load(dir / "cut.jsonl");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("cut.jsonl:2"), std::string::npos) << e.what();
  }

  testkit::write_file(dir / "bad.jsonl", "{\"text\": \"a\", \"values\": [1, \"x\"]}\n");
  EXPECT_THROW(embed::EmbeddingCache::load(dir / "bad.jsonl"), ParseError);
  EXPECT_THROW(embed::EmbeddingCache::load(dir / "missing.jsonl"), IoError);
}

TEST(Remote, DimensionMismatchIsProtocolError) {
  testkit::FakeServer server("/v1/embeddings", embeddings_of(512));
  embed::RemoteProvider provider(local(server), 1024);
  embed::EmbeddingCache cache;
  EXPECT_THROW(embed::embed_text(provider, cache, "q"), ProtocolError);
  EXPECT_EQ(cache.size(), 0u);
}

TEST(Remote, MalformedReplyIsProtocolError) {
  testkit::FakeServer server("/v1/embeddings", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"data\": []}", "application/json");
  });
  embed::RemoteProvider provider(local(server), 4);
  embed::EmbeddingCache cache;
  EXPECT_THROW(embed::embed_text(provider, cache, "q"), ProtocolError);
}

TEST(Remote, HttpFailureRetriesThenProviderError) {
  testkit::FakeServer server("/v1/embeddings", [](const httplib::Request&, httplib::Response& res) {
    res.status = 503;
    res.set_content("busy", "text/plain");
  });
  embed::RemoteProvider provider(local(server), 4);
  embed::EmbeddingCache cache;
  EXPECT_THROW(embed::embed_text(provider, cache, "q"), ProviderError);
  EXPECT_EQ(server.hits(), 2);
}

TEST(Cosine, Basics) {
  const std::vector<double> a{1, 0}, b{0, 1}, c{2, 0};
  EXPECT_DOUBLE_EQ(embed::cosine(a, b), 0.0);
  EXPECT_DOUBLE_EQ(embed::cosine(a, c), 1.0);
  EXPECT_THROW(embed::cosine(a, std::vector<double>{1, 2, 3}), PreconditionError);
}
