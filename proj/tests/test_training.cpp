#include <doctest.h>

#include <cmath>

#include "convmf/training.hpp"
#include "synthetic.hpp"
#include "testutil.hpp"

using namespace convmf;
using convmf::testsupport::SyntheticSpec;
using convmf::testsupport::generate_synthetic;

namespace {

struct Pipeline {
    TokenizedCorpus corpus;
    Vocabulary vocabulary;
    EmbeddingTable embeddings;
};

// Desk-size synthetic corpus + aligned embedding table, small enough for
// unit-test budgets.
Pipeline small_pipeline(std::uint64_t seed, std::size_t review_length = 16) {
    SyntheticSpec spec;
    spec.n_users = 40;
    spec.n_items = 24;
    spec.reviews_per_item = 8;
    spec.words_per_review = 14;
    spec.embedding_dim = 8;
    spec.seed = seed;
    const auto data = generate_synthetic(spec);

    PreprocessOptions options;
    options.review_length = review_length;
    options.min_count = 1;
    options.seed = seed;
    const PreprocessResult pre = preprocess(data.records, {}, options);

    testsupport::TempDir dir("pipeline" + std::to_string(seed));
    testsupport::write_file(dir.file("glove.txt"), data.embedding_text);
    EmbeddingTable table = load_embedding_table(dir.file("glove.txt"), pre.vocabulary, seed);

    return {pre.corpus, pre.vocabulary, std::move(table)};
}

TrainConfig fast_config(std::uint64_t seed, double lambda = 0.0) {
    TrainConfig config;
    config.n_factors = 4;
    config.lambda = lambda;
    config.window = 3;
    config.review_length = 16;
    config.batch_size = 8;
    config.epochs = 8;
    config.step_size = 5e-3;
    config.seed = seed;
    return config;
}

double offset_rmse(const TokenizedCorpus& corpus, Split split) {
    std::vector<double> train;
    for (const auto& r : corpus.records)
        if (r.split == Split::Train) train.push_back(r.review.rating);
    Checkpoint ckpt;
    ckpt.kind = ModelKind::Offset;
    ckpt.vocab_hash = corpus.vocab_hash;
    ckpt.global_mean = offset_fit(train).mean_rating;
    return evaluate_rmse(ckpt, corpus, split, nullptr);
}

}  // namespace

TEST_CASE("config validation and provenance marking") {
    TrainConfig config;
    config.validate();
    config.lambda = -0.1;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config.lambda = 0.0;
    config.window = 128;
    CHECK_THROWS_AS(config.validate(), ConfigError);

    TrainConfig fresh;
    CHECK(fresh.provenance.at("window") == Provenance::PaperFixed);
    CHECK(fresh.provenance.at("review_length") == Provenance::PaperFixed);
    CHECK(fresh.provenance.at("epochs") == Provenance::ArtifactDefault);
    fresh.mark_user_set("lambda");
    CHECK(fresh.provenance.at("lambda") == Provenance::UserSet);
    CHECK_THROWS_AS(fresh.mark_user_set("no_such_field"), ConfigError);

    const std::string echo = fresh.to_json();
    CHECK(echo.find("\"lambda\"") != std::string::npos);
    CHECK(echo.find("user-set") != std::string::npos);
}

TEST_CASE("training beats the offset baseline on planted-factor data") {
    Pipeline p = small_pipeline(1);
    const TrainResult result = train_convmf(fast_config(1), p.corpus, p.embeddings);
    CHECK_FALSE(result.aborted_non_finite);
    const double convmf_rmse = result.history.best_validation_rmse;
    const double offset = offset_rmse(p.corpus, Split::Validation);
    CHECK(convmf_rmse < offset);
}

TEST_CASE("identical config and corpus give bit-identical checkpoints and history") {
    Pipeline p = small_pipeline(2);
    TrainConfig config = fast_config(7);
    config.epochs = 4;
    const TrainResult a = train_convmf(config, p.corpus, p.embeddings);
    const TrainResult b = train_convmf(config, p.corpus, p.embeddings);

    REQUIRE(a.history.epochs.size() == b.history.epochs.size());
    CHECK(a.history.initial_validation_rmse == b.history.initial_validation_rmse);
    CHECK(a.history.best_epoch == b.history.best_epoch);
    for (std::size_t e = 0; e < a.history.epochs.size(); ++e) {
        // every logged quantity except wall time must match bit for bit
        CHECK(a.history.epochs[e].epoch == b.history.epochs[e].epoch);
        CHECK(a.history.epochs[e].train_total == b.history.epochs[e].train_total);
        CHECK(a.history.epochs[e].train_rmse == b.history.epochs[e].train_rmse);
        CHECK(a.history.epochs[e].train_entropy_bits == b.history.epochs[e].train_entropy_bits);
        CHECK(a.history.epochs[e].validation_rmse == b.history.epochs[e].validation_rmse);
    }

    testsupport::TempDir dir("determinism");
    save_checkpoint(a.checkpoint, dir.file("a.bin"));
    save_checkpoint(b.checkpoint, dir.file("b.bin"));
    CHECK(testsupport::read_file(dir.file("a.bin")) == testsupport::read_file(dir.file("b.bin")));
}

TEST_CASE("epoch logs satisfy the loss identity and the entropy bound") {
    Pipeline p = small_pipeline(3);
    TrainConfig config = fast_config(3, 0.8);
    const TrainResult result = train_convmf(config, p.corpus, p.embeddings);
    const double max_entropy =
        std::log2(static_cast<double>(config.review_length - config.window + 1));
    for (const auto& e : result.history.epochs) {
        CHECK(std::abs(e.train_total - (e.train_rmse + config.lambda * e.train_entropy_bits)) <=
              1e-10);
        CHECK(e.train_entropy_bits >= 0.0);
        CHECK(e.train_entropy_bits <= max_entropy);
    }
    CHECK(result.history.best_validation_rmse <= result.history.initial_validation_rmse);

    std::size_t last = 0;
    for (const auto& e : result.history.epochs) {
        CHECK(e.epoch > last);
        last = e.epoch;
    }
}

TEST_CASE("higher lambda lowers the final mean batch entropy") {
    Pipeline p = small_pipeline(4);
    TrainConfig plain = fast_config(11, 0.0);
    TrainConfig regularized = fast_config(11, 2.0);
    const TrainResult a = train_convmf(plain, p.corpus, p.embeddings);
    const TrainResult b = train_convmf(regularized, p.corpus, p.embeddings);
    REQUIRE(!a.history.epochs.empty());
    REQUIRE(!b.history.epochs.empty());
    CHECK(b.history.epochs.back().train_entropy_bits <
          a.history.epochs.back().train_entropy_bits);
}

TEST_CASE("zero epochs returns the initialized model, close to the offset baseline") {
    Pipeline p = small_pipeline(5);
    TrainConfig config = fast_config(5);
    config.epochs = 0;
    const TrainResult result = train_convmf(config, p.corpus, p.embeddings);
    CHECK(result.history.epochs.empty());
    CHECK(result.history.best_epoch == 0);
    const double rmse = evaluate_rmse(result.checkpoint, p.corpus, Split::Validation, &p.embeddings);
    CHECK(rmse == result.history.initial_validation_rmse);
    CHECK(std::abs(rmse - offset_rmse(p.corpus, Split::Validation)) < 0.15);
}

TEST_CASE("evaluate_rmse: perfect predictor scores zero, empty split is fatal") {
    TokenizedCorpus corpus;
    corpus.review_length = 4;
    corpus.user_ids = {"u0"};
    corpus.item_ids = {"i0"};
    for (int i = 0; i < 4; ++i) {
        CorpusRecord record;
        record.split = i < 3 ? Split::Train : Split::Test;
        record.review.user_index = 0;
        record.review.item_index = 0;
        record.review.rating = 4.0;  // constant ratings: the mean is perfect
        record.review.tokens.assign(4, kPadIndex);
        corpus.records.push_back(record);
    }
    Checkpoint ckpt;
    ckpt.kind = ModelKind::Offset;
    ckpt.global_mean = 4.0;
    CHECK(evaluate_rmse(ckpt, corpus, Split::Test, nullptr) == 0.0);
    CHECK_THROWS_AS(evaluate_rmse(ckpt, corpus, Split::Validation, nullptr), ConfigError);
}

TEST_CASE("run_grid: cell shape and single-cell equivalence with train_convmf") {
    Pipeline p = small_pipeline(6);
    TrainConfig base = fast_config(13);
    base.epochs = 3;

    const GridResult grid = run_grid(base, {0.0, 2.0}, {4}, p.corpus, p.vocabulary, p.embeddings,
                                     5, 1);
    REQUIRE(grid.cells.size() == 2);
    CHECK(grid.cells[0].lambda == 0.0);
    CHECK(grid.cells[1].lambda == 2.0);
    for (const auto& cell : grid.cells) {
        CHECK(cell.error.empty());
        CHECK(cell.test_rmse.has_value());
    }

    // a 1x1 grid reproduces a direct run exactly
    const GridResult single = run_grid(base, {0.0}, {4}, p.corpus, p.vocabulary, p.embeddings, 5, 1);
    TrainConfig direct = base;
    direct.lambda = 0.0;
    direct.n_factors = 4;
    const TrainResult run = train_convmf(direct, p.corpus, p.embeddings);
    const double rmse = evaluate_rmse(run.checkpoint, p.corpus, Split::Test, &p.embeddings);
    REQUIRE(single.cells.size() == 1);
    CHECK(*single.cells[0].test_rmse == rmse);

    const std::string json_text = grid_to_json(grid);
    CHECK(json_text.find("\"cells\"") != std::string::npos);
    CHECK(json_text.find("\"rmse\"") != std::string::npos);
}

TEST_CASE("history_to_csv emits one row per epoch with the expected header") {
    RunHistory history;
    history.epochs.push_back({1, 1.5, 1.0, 0.5, 1.2, 0.01});
    history.epochs.push_back({2, 1.25, 1.0, 0.25, 1.1, 0.02});
    const std::string csv = history_to_csv(history);
    CHECK(csv.rfind("epoch,train_total,train_rmse,train_entropy_bits,val_rmse,seconds\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv.find("\n1,1.5,1,0.5,1.2,") != std::string::npos);
}
