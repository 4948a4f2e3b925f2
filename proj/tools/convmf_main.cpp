// Command-line front end wiring the pipeline together: preprocess a raw
// review dump, train models, evaluate RMSE, extract topics, score coherence,
// and sweep the lambda x n_factors experiment grid.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "convmf/baselines.hpp"
#include "convmf/corpus.hpp"
#include "convmf/embeddings.hpp"
#include "convmf/manifest.hpp"
#include "convmf/model.hpp"
#include "convmf/topics.hpp"
#include "convmf/training.hpp"

namespace fs = std::filesystem;
using namespace convmf;

namespace {

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write: " + path.string());
    out << content;
    if (!out) throw IoError("failed writing: " + path.string());
}

struct CorpusBundle {
    TokenizedCorpus corpus;
    Vocabulary vocabulary;
    std::string corpus_path;
    std::string vocab_path;
};

// --corpus points at a preprocess output directory (corpus.bin +
// vocabulary.txt). The vocabulary hash must match the one stamped into the
// corpus container.
CorpusBundle load_corpus_dir(const std::string& dir) {
    CorpusBundle bundle;
    bundle.corpus_path = (fs::path(dir) / "corpus.bin").string();
    bundle.vocab_path = (fs::path(dir) / "vocabulary.txt").string();
    bundle.corpus = load_corpus(bundle.corpus_path);
    bundle.vocabulary = Vocabulary::load(bundle.vocab_path);
    const std::uint64_t vocab_hash = bundle.vocabulary.hash();
    if (vocab_hash != bundle.corpus.vocab_hash)
        throw ConsistencyError("vocabulary hash mismatch: corpus " +
                               hash_hex(bundle.corpus.vocab_hash) + " vs vocabulary file " +
                               hash_hex(vocab_hash));
    return bundle;
}

EmbeddingTable table_for_checkpoint(const Checkpoint& ckpt, const EmbeddingTable& loaded) {
    if (!ckpt.embeddings) return loaded;
    if (ckpt.embeddings->rows() != loaded.vectors.rows() ||
        ckpt.embeddings->cols() != loaded.vectors.cols())
        throw ConsistencyError("checkpoint embeddings do not match the loaded table shape");
    EmbeddingTable table = loaded;
    table.vectors = *ckpt.embeddings;
    return table;
}

SplitRatios parse_ratios(const std::string& text) {
    std::vector<double> parts;
    std::stringstream ss(text);
    std::string piece;
    while (std::getline(ss, piece, ',')) parts.push_back(std::stod(piece));
    if (parts.size() != 3) throw ConfigError("--ratios expects three comma-separated values");
    return SplitRatios{parts[0], parts[1], parts[2]};
}

Split parse_split(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "validation" || name == "val") return Split::Validation;
    if (name == "test") return Split::Test;
    throw ConfigError("unknown split: " + name);
}

// --- preprocess -------------------------------------------------------------

struct PreprocessArgs {
    std::string input;
    std::string out_dir;
    std::string stopwords = "data/stopwords_en.txt";
    std::string ratios = "0.8,0.1,0.1";
    std::size_t min_count = 5;
    std::size_t review_length = 64;
    std::uint64_t seed = 0;
};

int cmd_preprocess(const PreprocessArgs& args) {
    PreprocessOptions options;
    options.ratios = parse_ratios(args.ratios);
    options.min_count = args.min_count;
    options.review_length = args.review_length;
    options.seed = args.seed;

    RunManifest manifest;
    manifest.command = "preprocess";
    manifest.seed = args.seed;
    manifest.input_hashes[args.input] = hash_hex(hash_file(args.input));
    manifest.input_hashes[args.stopwords] = hash_hex(hash_file(args.stopwords));
    nlohmann::json cfg;
    cfg["ratios"] = args.ratios;
    cfg["min_count"] = args.min_count;
    cfg["review_length"] = args.review_length;
    manifest.config_json = cfg.dump();
    const fs::path out(args.out_dir);
    manifest.outputs["corpus"] = (out / "corpus.bin").string();
    manifest.outputs["vocabulary"] = (out / "vocabulary.txt").string();
    manifest.outputs["stats"] = (out / "stats.json").string();
    write_manifest(manifest, args.out_dir);

    const StopwordSet stopwords = load_stopwords(args.stopwords);
    const ParsedReviews parsed = parse_review_records_file(args.input);
    for (const auto& err : parsed.errors)
        std::cerr << args.input << ":" << err.line_number << ": " << err.message << "\n";
    const PreprocessResult result = preprocess(parsed.records, stopwords, options);

    save_corpus(result.corpus, (out / "corpus.bin").string());
    result.vocabulary.save((out / "vocabulary.txt").string());
    write_text_file(out / "stats.json", stats_to_json(result.stats));

    const auto& s = result.stats;
    std::cout << "# users                          " << s.n_users << "\n"
              << "# items                          " << s.n_items << "\n"
              << "total # reviews                  " << s.n_reviews << "\n"
              << "avg. # reviews per item          " << s.avg_reviews_per_item << "\n"
              << "total # words                    " << s.total_words << "\n"
              << "avg. number of words per review  " << s.avg_words_per_review << "\n";
    if (!parsed.errors.empty())
        std::cerr << parsed.errors.size() << " malformed line(s) skipped\n";
    return 0;
}

// --- train -------------------------------------------------------------------

struct TrainArgs {
    std::string corpus_dir;
    std::string glove;
    std::string out_dir;
    std::string model = "convmf";
    TrainConfig config;
    std::size_t subsample = 0;
};

int cmd_train(const TrainArgs& args) {
    CorpusBundle bundle = load_corpus_dir(args.corpus_dir);
    if (args.subsample > 0) bundle.corpus = subsample_corpus(bundle.corpus, args.subsample);

    RunManifest manifest;
    manifest.command = "train";
    manifest.seed = args.config.seed;
    manifest.input_hashes[bundle.corpus_path] = hash_hex(hash_file(bundle.corpus_path));
    manifest.input_hashes[bundle.vocab_path] = hash_hex(hash_file(bundle.vocab_path));
    if (args.model == "convmf") manifest.input_hashes[args.glove] = hash_hex(hash_file(args.glove));
    manifest.config_json = args.config.to_json();
    const fs::path out(args.out_dir);
    manifest.outputs["checkpoint"] = (out / "checkpoint.bin").string();
    if (args.model == "convmf") manifest.outputs["metrics"] = (out / "metrics.csv").string();
    write_manifest(manifest, args.out_dir);

    if (args.model == "offset") {
        std::vector<double> ratings;
        for (const auto& r : bundle.corpus.records)
            if (r.split == Split::Train) ratings.push_back(r.review.rating);
        const OffsetModel model = offset_fit(ratings);
        Checkpoint ckpt;
        ckpt.kind = ModelKind::Offset;
        ckpt.vocab_hash = bundle.corpus.vocab_hash;
        ckpt.global_mean = model.mean_rating;
        ckpt.config_echo = nlohmann::json{{"model", "offset"}}.dump();
        save_checkpoint(ckpt, (out / "checkpoint.bin").string());
        std::cout << "offset mean " << format_double(model.mean_rating) << "\n";
        return 0;
    }

    if (args.model == "pmf") {
        PmfConfig config;
        config.n_factors = args.config.n_factors;
        config.epochs = args.config.epochs;
        config.step_size = args.config.step_size;
        config.l2 = args.config.weight_decay;
        config.patience = args.config.patience;
        config.seed = args.config.seed;
        const PmfParams params = pmf_fit(bundle.corpus, config);
        Checkpoint ckpt;
        ckpt.kind = ModelKind::Pmf;
        ckpt.vocab_hash = bundle.corpus.vocab_hash;
        ckpt.global_mean = params.global_mean;
        ckpt.user_factors = params.user_factors;
        ckpt.item_factors = params.item_factors;
        ckpt.config_echo =
            nlohmann::json{{"model", "pmf"}, {"n_factors", config.n_factors}}.dump();
        save_checkpoint(ckpt, (out / "checkpoint.bin").string());
        const double val = evaluate_rmse(ckpt, bundle.corpus, Split::Validation, nullptr);
        std::cout << "pmf validation rmse " << format_double(val) << "\n";
        return 0;
    }

    if (args.model != "convmf") throw ConfigError("unknown model: " + args.model);

    const EmbeddingTable embeddings =
        load_embedding_table(args.glove, bundle.vocabulary, args.config.seed);
    const TrainResult result = train_convmf(args.config, bundle.corpus, embeddings);
    save_checkpoint(result.checkpoint, (out / "checkpoint.bin").string());
    write_text_file(out / "metrics.csv", history_to_csv(result.history));
    if (result.aborted_non_finite) {
        std::cerr << "training aborted on non-finite loss; last good checkpoint kept\n";
        return 4;
    }
    std::cout << "best epoch " << result.history.best_epoch << " validation rmse "
              << format_double(result.history.best_validation_rmse) << "\n";
    return 0;
}

// --- evaluate ------------------------------------------------------------------

struct EvaluateArgs {
    std::string corpus_dir;
    std::string checkpoint;
    std::string glove;
    std::string out_dir;
    std::string model;  // "offset" fits the baseline directly, no checkpoint needed
    std::string split = "test";
};

int cmd_evaluate(const EvaluateArgs& args) {
    CorpusBundle bundle = load_corpus_dir(args.corpus_dir);

    Checkpoint ckpt;
    std::string checkpoint_path = args.checkpoint;
    if (args.model == "offset" && args.checkpoint.empty()) {
        std::vector<double> ratings;
        for (const auto& r : bundle.corpus.records)
            if (r.split == Split::Train) ratings.push_back(r.review.rating);
        ckpt.kind = ModelKind::Offset;
        ckpt.vocab_hash = bundle.corpus.vocab_hash;
        ckpt.global_mean = offset_fit(ratings).mean_rating;
    } else {
        if (args.checkpoint.empty()) throw ConfigError("--checkpoint is required");
        ckpt = load_checkpoint(args.checkpoint);
        verify_checkpoint_corpus(ckpt, bundle.corpus);
    }

    EmbeddingTable embeddings;
    const EmbeddingTable* table = nullptr;
    if (ckpt.kind == ModelKind::ConvMf) {
        if (args.glove.empty()) throw ConfigError("--glove is required for convmf checkpoints");
        embeddings = table_for_checkpoint(
            ckpt, load_embedding_table(args.glove, bundle.vocabulary, 0));
        table = &embeddings;
    }

    const double rmse = evaluate_rmse(ckpt, bundle.corpus, parse_split(args.split), table);

    if (!args.out_dir.empty()) {
        RunManifest manifest;
        manifest.command = "evaluate";
        manifest.input_hashes[bundle.corpus_path] = hash_hex(hash_file(bundle.corpus_path));
        if (!checkpoint_path.empty())
            manifest.input_hashes[checkpoint_path] = hash_hex(hash_file(checkpoint_path));
        if (!args.glove.empty())
            manifest.input_hashes[args.glove] = hash_hex(hash_file(args.glove));
        nlohmann::json cfg;
        cfg["split"] = args.split;
        cfg["model"] = model_kind_name(ckpt.kind);
        manifest.config_json = cfg.dump();
        manifest.outputs["rmse"] = (fs::path(args.out_dir) / "rmse.json").string();
        write_manifest(manifest, args.out_dir);
        nlohmann::json j;
        j["model"] = model_kind_name(ckpt.kind);
        j["split"] = args.split;
        j["rmse"] = rmse;
        write_text_file(fs::path(args.out_dir) / "rmse.json", j.dump(2) + "\n");
    }
    std::cout << model_kind_name(ckpt.kind) << " " << args.split << " rmse "
              << format_double(rmse) << "\n";
    return 0;
}

// --- topics --------------------------------------------------------------------

struct TopicsArgs {
    std::string corpus_dir;
    std::string checkpoint;
    std::string glove;
    std::string out_dir;
    std::size_t top_k = 10;
    std::uint32_t min_occurrences = 5;
    std::uint64_t seed = 0;
};

int cmd_topics(const TopicsArgs& args) {
    CorpusBundle bundle = load_corpus_dir(args.corpus_dir);
    const Checkpoint ckpt = load_checkpoint(args.checkpoint);
    verify_checkpoint_corpus(ckpt, bundle.corpus);
    const EmbeddingTable loaded = load_embedding_table(args.glove, bundle.vocabulary, args.seed);
    const EmbeddingTable model_table = table_for_checkpoint(ckpt, loaded);

    RunManifest manifest;
    manifest.command = "topics";
    manifest.seed = args.seed;
    manifest.input_hashes[bundle.corpus_path] = hash_hex(hash_file(bundle.corpus_path));
    manifest.input_hashes[args.checkpoint] = hash_hex(hash_file(args.checkpoint));
    manifest.input_hashes[args.glove] = hash_hex(hash_file(args.glove));
    nlohmann::json cfg;
    cfg["top_k"] = args.top_k;
    cfg["min_occurrences"] = args.min_occurrences;
    manifest.config_json = cfg.dump();
    const fs::path out(args.out_dir);
    manifest.outputs["topic_report"] = (out / "topic_report.json").string();
    write_manifest(manifest, args.out_dir);

    const WordActivationStats stats = accumulate_word_activations(ckpt, bundle.corpus, model_table);
    // Coherence is always scored against the pretrained vectors, even when
    // the checkpoint carries fine-tuned ones.
    const TopicReport report =
        build_topic_report(stats, bundle.vocabulary, loaded, args.top_k, args.min_occurrences);
    write_text_file(out / "topic_report.json",
                    topic_report_to_json(report, bundle.vocabulary, ckpt.config_echo));

    for (const auto& topic : report.factors)
        if (topic.keywords.size() < args.top_k)
            std::cerr << "factor " << topic.factor << ": only " << topic.keywords.size()
                      << " eligible keyword(s)\n";
    if (report.overall_coherence)
        std::cout << "overall coherence " << format_double(*report.overall_coherence) << "\n";
    else
        std::cout << "overall coherence undefined\n";
    return 0;
}

// --- coherence -------------------------------------------------------------------

struct CoherenceArgs {
    std::string report;
    std::string corpus_dir;
    std::string glove;
    std::string out_dir;
};

int cmd_coherence(const CoherenceArgs& args) {
    CorpusBundle bundle = load_corpus_dir(args.corpus_dir);
    const EmbeddingTable embeddings = load_embedding_table(args.glove, bundle.vocabulary, 0);

    std::ifstream in(args.report);
    if (!in) throw IoError("cannot open topic report: " + args.report);
    nlohmann::json report = nlohmann::json::parse(in, nullptr, false);
    if (report.is_discarded()) throw convmf::ParseError("malformed topic report: " + args.report);

    nlohmann::json out_factors = nlohmann::json::array();
    double sum = 0.0;
    std::size_t defined = 0;
    std::size_t skipped = 0;
    for (const auto& factor : report.at("factors")) {
        std::vector<Keyword> keywords;
        for (const auto& kw : factor.at("keywords")) {
            const std::string token = kw.at("token").get<std::string>();
            if (!bundle.vocabulary.contains(token)) continue;
            keywords.push_back({bundle.vocabulary.index_of(token),
                                kw.value("mean_activation", 0.0),
                                kw.value("count", std::uint32_t{0})});
        }
        const CoherenceResult result = topic_coherence(keywords, embeddings);
        nlohmann::json jf;
        jf["index"] = factor.at("index");
        jf["coherence"] = result.coherence ? nlohmann::json(*result.coherence) : nlohmann::json(nullptr);
        jf["excluded"] = !result.coherence.has_value();
        jf["skipped_pairs"] = result.skipped_pairs;
        out_factors.push_back(std::move(jf));
        skipped += result.skipped_pairs;
        if (result.coherence) {
            sum += *result.coherence;
            ++defined;
        }
    }
    nlohmann::json out;
    out["factors"] = std::move(out_factors);
    out["overall_coherence"] =
        defined > 0 ? nlohmann::json(sum / static_cast<double>(defined)) : nlohmann::json(nullptr);
    out["skipped_pairs"] = skipped;

    if (!args.out_dir.empty()) {
        RunManifest manifest;
        manifest.command = "coherence";
        manifest.input_hashes[args.report] = hash_hex(hash_file(args.report));
        manifest.input_hashes[args.glove] = hash_hex(hash_file(args.glove));
        manifest.outputs["coherence"] = (fs::path(args.out_dir) / "coherence.json").string();
        write_manifest(manifest, args.out_dir);
        write_text_file(fs::path(args.out_dir) / "coherence.json", out.dump(2) + "\n");
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

// --- grid ----------------------------------------------------------------------

struct GridArgs {
    std::string corpus_dir;
    std::string glove;
    std::string out_dir;
    std::string lambdas = "0.0,0.4,0.8,1.2,1.6,2.0";
    std::string factors = "6,8,10,12";
    TrainConfig config;
    std::size_t subsample = 2000;
    std::size_t top_k = 10;
    std::uint32_t min_occurrences = 5;
};

int cmd_grid(const GridArgs& args) {
    CorpusBundle bundle = load_corpus_dir(args.corpus_dir);
    if (args.subsample > 0) bundle.corpus = subsample_corpus(bundle.corpus, args.subsample);

    std::vector<double> lambdas;
    std::vector<std::size_t> factor_counts;
    {
        std::stringstream ls(args.lambdas);
        std::string piece;
        while (std::getline(ls, piece, ',')) lambdas.push_back(std::stod(piece));
        std::stringstream fsord(args.factors);
        while (std::getline(fsord, piece, ',')) factor_counts.push_back(std::stoul(piece));
    }

    RunManifest manifest;
    manifest.command = "grid";
    manifest.seed = args.config.seed;
    manifest.input_hashes[bundle.corpus_path] = hash_hex(hash_file(bundle.corpus_path));
    manifest.input_hashes[bundle.vocab_path] = hash_hex(hash_file(bundle.vocab_path));
    manifest.input_hashes[args.glove] = hash_hex(hash_file(args.glove));
    nlohmann::json cfg = nlohmann::json::parse(args.config.to_json());
    cfg["lambdas"] = args.lambdas;
    cfg["factors"] = args.factors;
    cfg["subsample"] = args.subsample;
    manifest.config_json = cfg.dump();
    const fs::path out(args.out_dir);
    manifest.outputs["grid"] = (out / "grid.json").string();
    write_manifest(manifest, args.out_dir);

    const EmbeddingTable embeddings =
        load_embedding_table(args.glove, bundle.vocabulary, args.config.seed);
    const GridResult grid = run_grid(args.config, lambdas, factor_counts, bundle.corpus,
                                     bundle.vocabulary, embeddings, args.top_k,
                                     args.min_occurrences);
    write_text_file(out / "grid.json", grid_to_json(grid));

    for (const auto& cell : grid.cells) {
        std::cout << "lambda " << format_double(cell.lambda) << " F " << cell.n_factors;
        if (cell.test_rmse) std::cout << " rmse " << format_double(*cell.test_rmse);
        if (cell.coherence) std::cout << " coherence " << format_double(*cell.coherence);
        if (!cell.error.empty()) std::cout << " error: " << cell.error;
        std::cout << "\n";
    }
    return 0;
}

void add_train_config_flags(CLI::App* cmd, TrainConfig& config) {
    cmd->add_option("--seed", config.seed, "run seed; all randomness derives from it");
    cmd->add_option("--lambda", config.lambda, "entropy regularization coefficient");
    cmd->add_option("--factors", config.n_factors, "number of latent factors");
    cmd->add_option("--epochs", config.epochs, "training epochs");
    cmd->add_option("--batch-size", config.batch_size, "items per batch");
    cmd->add_option("--step-size", config.step_size, "optimizer step size");
    cmd->add_option("--weight-decay", config.weight_decay, "L2 decay on factors and filters");
    cmd->add_option("--patience", config.patience, "early stopping patience (epochs)");
    cmd->add_option("--max-reviews-per-item", config.max_reviews_per_item,
                    "cap reviews per item per batch (0 = all)");
    cmd->add_flag("--mask-pad", config.mask_pad, "restrict the regularizer to unpadded windows");
    cmd->add_flag(
        "--finetune-embeddings", [&config](std::int64_t) { config.freeze_embeddings = false; },
        "unfreeze word embeddings during training");
}

void mark_user_set_flags(const CLI::App* cmd, TrainConfig& config) {
    static const std::vector<std::pair<std::string, std::string>> mapping = {
        {"--seed", "seed"},
        {"--lambda", "lambda"},
        {"--factors", "n_factors"},
        {"--epochs", "epochs"},
        {"--batch-size", "batch_size"},
        {"--step-size", "step_size"},
        {"--weight-decay", "weight_decay"},
        {"--patience", "patience"},
        {"--max-reviews-per-item", "max_reviews_per_item"},
        {"--mask-pad", "mask_pad"},
        {"--finetune-embeddings", "freeze_embeddings"},
    };
    for (const auto& [flag, field] : mapping)
        if (cmd->count(flag) > 0) config.mark_user_set(field);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ConvMF with entropy regularization: preprocessing, training, evaluation, "
                 "topic extraction"};
    app.require_subcommand(1);

    PreprocessArgs pre;
    auto* cmd_pre = app.add_subcommand("preprocess", "tokenize a raw JSON-lines review file");
    cmd_pre->add_option("--input", pre.input, "raw JSON-lines review file")->required();
    cmd_pre->add_option("--out", pre.out_dir, "output directory")->required();
    cmd_pre->add_option("--stopwords", pre.stopwords, "stopword list, one token per line");
    cmd_pre->add_option("--ratios", pre.ratios, "train,validation,test ratios");
    cmd_pre->add_option("--min-count", pre.min_count, "vocabulary frequency threshold");
    cmd_pre->add_option("--seed", pre.seed, "split shuffle seed");

    TrainArgs train;
    auto* cmd_tr = app.add_subcommand("train", "train convmf, pmf, or the offset baseline");
    cmd_tr->add_option("--corpus", train.corpus_dir, "preprocess output directory")->required();
    cmd_tr->add_option("--out", train.out_dir, "output directory")->required();
    cmd_tr->add_option("--glove", train.glove, "embedding file (convmf)");
    cmd_tr->add_option("--model", train.model, "convmf | pmf | offset");
    cmd_tr->add_option("--subsample", train.subsample, "keep top-N items by review count");
    add_train_config_flags(cmd_tr, train.config);

    EvaluateArgs eval;
    auto* cmd_ev = app.add_subcommand("evaluate", "RMSE of a checkpoint on a split");
    cmd_ev->add_option("--corpus", eval.corpus_dir, "preprocess output directory")->required();
    cmd_ev->add_option("--checkpoint", eval.checkpoint, "checkpoint file");
    cmd_ev->add_option("--glove", eval.glove, "embedding file (convmf checkpoints)");
    cmd_ev->add_option("--model", eval.model, "offset: fit the baseline directly");
    cmd_ev->add_option("--split", eval.split, "train | validation | test");
    cmd_ev->add_option("--out", eval.out_dir, "optional output directory");

    TopicsArgs topics;
    auto* cmd_to = app.add_subcommand("topics", "extract per-factor keywords from a checkpoint");
    cmd_to->add_option("--corpus", topics.corpus_dir, "preprocess output directory")->required();
    cmd_to->add_option("--checkpoint", topics.checkpoint, "convmf checkpoint")->required();
    cmd_to->add_option("--glove", topics.glove, "embedding file")->required();
    cmd_to->add_option("--out", topics.out_dir, "output directory")->required();
    cmd_to->add_option("--top-k", topics.top_k, "keywords per factor");
    cmd_to->add_option("--min-occurrences", topics.min_occurrences,
                       "occurrence floor for keywords");
    cmd_to->add_option("--seed", topics.seed, "seed for missing-vector initialization");

    CoherenceArgs coh;
    auto* cmd_co = app.add_subcommand("coherence", "re-score a topic report against embeddings");
    cmd_co->add_option("--report", coh.report, "topic_report.json")->required();
    cmd_co->add_option("--corpus", coh.corpus_dir, "preprocess output directory")->required();
    cmd_co->add_option("--glove", coh.glove, "embedding file")->required();
    cmd_co->add_option("--out", coh.out_dir, "optional output directory");

    GridArgs grid;
    auto* cmd_gr = app.add_subcommand("grid", "lambda x n_factors experiment grid");
    cmd_gr->add_option("--corpus", grid.corpus_dir, "preprocess output directory")->required();
    cmd_gr->add_option("--glove", grid.glove, "embedding file")->required();
    cmd_gr->add_option("--out", grid.out_dir, "output directory")->required();
    cmd_gr->add_option("--lambdas", grid.lambdas, "comma-separated lambda values");
    cmd_gr->add_option("--factors", grid.factors, "comma-separated factor counts");
    cmd_gr->add_option("--subsample", grid.subsample, "keep top-N items (0 = all)");
    cmd_gr->add_option("--top-k", grid.top_k, "keywords per factor");
    cmd_gr->add_option("--min-occurrences", grid.min_occurrences, "occurrence floor");
    add_train_config_flags(cmd_gr, grid.config);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (cmd_pre->parsed()) return cmd_preprocess(pre);
        if (cmd_tr->parsed()) {
            mark_user_set_flags(cmd_tr, train.config);
            return cmd_train(train);
        }
        if (cmd_ev->parsed()) return cmd_evaluate(eval);
        if (cmd_to->parsed()) return cmd_topics(topics);
        if (cmd_co->parsed()) return cmd_coherence(coh);
        if (cmd_gr->parsed()) {
            mark_user_set_flags(cmd_gr, grid.config);
            return cmd_grid(grid);
        }
    } catch (const ConsistencyError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
