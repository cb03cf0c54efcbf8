#include <cmath>

#include "doctest.h"
#include "jetr/vector_store.hpp"
#include "test_util.hpp"

using namespace jetr;

namespace {

DocRecord doc(const std::string& id, Vector emb,
              Modality m = Modality::Text, const std::string& lesson = "L") {
  DocRecord rec;
  rec.doc_id = id;
  rec.modality = m;
  rec.lesson_id = lesson;
  rec.embedding = std::move(emb);
  return rec;
}

}  // namespace

TEST_SUITE("vector_store") {

TEST_CASE("insert then retrieve self") {
  VectorStore store;
  store.insert(doc("a", {0.6, 0.8}));
  const RankedList top = store.topk({0.6, 0.8}, 1);
  REQUIRE(top.size() == 1);
  CHECK(top[0].doc_id == "a");
  CHECK(top[0].raw_cosine == doctest::Approx(1.0));
  CHECK_FALSE(top[0].enhanced_score.has_value());
}

TEST_CASE("insert rejections") {
  VectorStore store;
  store.insert(doc("a", {1, 0}));
  CHECK_THROWS_AS(store.insert(doc("a", {0, 1})), Error);
  CHECK_THROWS_AS(store.insert(doc("b", {1, 0, 0})), Error);
  CHECK_THROWS_AS(store.insert(doc("c", {0, 0})), Error);
  try {
    store.insert(doc("a", {0, 1}));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DuplicateId);
  }
}

TEST_CASE("topk ordering on the two-doc example") {
  VectorStore store;
  store.insert(doc("a", {1, 0}));
  store.insert(doc("b", {0, 1}));
  const RankedList top = store.topk({1.0, 0.1}, 2);
  REQUIRE(top.size() == 2);
  CHECK(top[0].doc_id == "a");
  CHECK(top[1].doc_id == "b");
  CHECK(top[0].raw_cosine == doctest::Approx(1.0 / std::sqrt(1.01)));
  CHECK(top[1].raw_cosine == doctest::Approx(0.1 / std::sqrt(1.01)));
}

TEST_CASE("k larger than the store returns everything sorted") {
  VectorStore store;
  store.insert(doc("a", {1, 0}));
  store.insert(doc("b", {0.9, 0.1}));
  store.insert(doc("c", {0, 1}));
  const RankedList top = store.topk({1, 0}, 100);
  CHECK(top.size() == 3);
  CHECK(top[0].raw_cosine >= top[1].raw_cosine);
  CHECK(top[1].raw_cosine >= top[2].raw_cosine);
}

TEST_CASE("modality filter and empty-store error") {
  VectorStore store;
  store.insert(doc("t1", {1, 0}, Modality::Text));
  store.insert(doc("t2", {0, 1}, Modality::Text));
  const RankedList text_only = store.topk({1, 0}, 5, Modality::Text);
  CHECK(text_only.size() == 2);
  CHECK_THROWS_AS((void)store.topk({1, 0}, 5, Modality::Image), Error);
  try {
    (void)store.topk({1, 0}, 5, Modality::Image);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyStore);
  }
}

TEST_CASE("query validation") {
  VectorStore store;
  store.insert(doc("a", {1, 0}));
  CHECK_THROWS_AS((void)store.topk({1, 0, 0}, 1), Error);
  CHECK_THROWS_AS((void)store.topk({1, 0}, 0), Error);
}

TEST_CASE("topk(k2) extends topk(k1) as a prefix") {
  SplitMix64 rng(51);
  VectorStore store;
  for (int i = 0; i < 40; ++i) {
    store.insert(doc("doc_" + std::to_string(i),
                     jetr_test::random_vector(rng, 8, -1, 1),
                     i % 3 == 0 ? Modality::Image : Modality::Text));
  }
  const Vector q = jetr_test::random_vector(rng, 8, -1, 1);
  const RankedList big = store.topk(q, 25);
  for (std::size_t k = 1; k < 25; k += 3) {
    const RankedList small = store.topk(q, k);
    REQUIRE(small.size() == k);
    for (std::size_t i = 0; i < k; ++i) {
      CHECK(small[i].doc_id == big[i].doc_id);
    }
  }
}

TEST_CASE("ties break by ascending doc_id") {
  VectorStore store;
  store.insert(doc("zeta", {1, 0}));
  store.insert(doc("alpha", {1, 0}));
  store.insert(doc("mid", {1, 0}));
  const RankedList top = store.topk({1, 0}, 3);
  CHECK(top[0].doc_id == "alpha");
  CHECK(top[1].doc_id == "mid");
  CHECK(top[2].doc_id == "zeta");
}

TEST_CASE("identity-behaving enhancer reproduces the raw ordering") {
  SplitMix64 rng(52);
  VectorStore store;
  for (int i = 0; i < 30; ++i) {
    store.insert(doc("doc_" + std::to_string(i),
                     jetr_test::random_vector(rng, 6, 0.05, 1.0)));
  }
  const EnhancerParams id = jetr_test::identity_params(6);
  const Vector q = jetr_test::random_vector(rng, 6, 0.05, 1.0);
  const RankedList raw = store.topk(q, 30);
  const RankedList enh = store.topk(q, 30, std::nullopt, &id);
  REQUIRE(raw.size() == enh.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    CHECK(raw[i].doc_id == enh[i].doc_id);
    REQUIRE(enh[i].enhanced_score.has_value());
    CHECK(*enh[i].enhanced_score ==
          doctest::Approx(raw[i].raw_cosine).epsilon(1e-12));
    REQUIRE(enh[i].report_score.has_value());
    CHECK(*enh[i].report_score ==
          doctest::Approx(raw[i].raw_cosine + 1.0).epsilon(1e-12));
  }
}

TEST_CASE("count and lookup") {
  VectorStore store;
  store.insert(doc("t", {1, 0}, Modality::Text));
  store.insert(doc("i", {0, 1}, Modality::Image));
  CHECK(store.count(Modality::Text) == 1);
  CHECK(store.count(Modality::Image) == 1);
  CHECK(store.contains("t"));
  CHECK_FALSE(store.contains("x"));
  CHECK(store.doc("i").modality == Modality::Image);
  CHECK_THROWS_AS((void)store.doc("x"), Error);
}

}  // TEST_SUITE
