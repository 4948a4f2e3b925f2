#include <doctest.h>

#include <cmath>

#include "convmf/embeddings.hpp"
#include "testutil.hpp"

using namespace convmf;

namespace {
Vocabulary small_vocab() {
    return Vocabulary::build({{"good", "taste", "zzzq"}}, 1);
}
}  // namespace

TEST_CASE("load_embedding_table: pretrained rows, fallback rows, PAD row") {
    testsupport::TempDir dir("emb");
    testsupport::write_file(dir.file("glove.txt"),
                            "good 0.1 0.2\n"
                            "taste -0.3 0.4\n"
                            "unrelated 9 9\n");
    const Vocabulary vocab = small_vocab();
    const EmbeddingTable table = load_embedding_table(dir.file("glove.txt"), vocab, 7);

    CHECK(table.dimension == 2);
    CHECK(table.vectors.rows() == vocab.size());

    const auto good = vocab.index_of("good");
    CHECK(table.pretrained[good]);
    CHECK(table.vectors(good, 0) == 0.1);
    CHECK(table.vectors(good, 1) == 0.2);

    const auto zzzq = vocab.index_of("zzzq");
    CHECK_FALSE(table.pretrained[zzzq]);
    for (std::size_t d = 0; d < 2; ++d) {
        CHECK(table.vectors(zzzq, d) >= -0.25);
        CHECK(table.vectors(zzzq, d) <= 0.25);
    }

    CHECK(table.vectors(kPadIndex, 0) == 0.0);
    CHECK(table.vectors(kPadIndex, 1) == 0.0);
    CHECK_FALSE(table.pretrained[kPadIndex]);

    // same seed, same fallback rows
    const EmbeddingTable again = load_embedding_table(dir.file("glove.txt"), vocab, 7);
    CHECK(again.vectors == table.vectors);
}

TEST_CASE("load_embedding_table fatal errors") {
    testsupport::TempDir dir("emb_err");
    testsupport::write_file(dir.file("ragged.txt"), "good 0.1 0.2\nbad 0.1\n");
    CHECK_THROWS_AS(load_embedding_table(dir.file("ragged.txt"), small_vocab(), 0), ParseError);
    CHECK_THROWS_AS(load_embedding_table(dir.file("missing.txt"), small_vocab(), 0), IoError);
}

TEST_CASE("cosine_similarity analytic cases") {
    const std::vector<double> u{1.0, 0.0};
    const std::vector<double> v{0.0, 1.0};
    const std::vector<double> w{1.0, 1.0};
    CHECK(*cosine_similarity(u, u) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(*cosine_similarity(u, v) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(*cosine_similarity(u, w) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));

    const std::vector<double> zero{0.0, 0.0};
    CHECK_FALSE(cosine_similarity(u, zero).has_value());
    CHECK_FALSE(cosine_similarity(zero, zero).has_value());
}

TEST_CASE("cosine_similarity properties: symmetry, scale invariance, bounds") {
    Rng rng(13);
    for (int round = 0; round < 500; ++round) {
        std::vector<double> u(5), v(5);
        for (auto& x : u) x = rng.uniform(-10.0, 10.0);
        for (auto& x : v) x = rng.uniform(-10.0, 10.0);
        const auto ab = cosine_similarity(u, v);
        const auto ba = cosine_similarity(v, u);
        REQUIRE(ab.has_value());
        CHECK(*ab == *ba);  // exact symmetry
        CHECK(*ab >= -1.0);
        CHECK(*ab <= 1.0);

        const double alpha = rng.uniform(0.1, 50.0);
        std::vector<double> scaled = u;
        for (auto& x : scaled) x *= alpha;
        CHECK(*cosine_similarity(scaled, v) == doctest::Approx(*ab).epsilon(1e-12));
    }
}
