#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cmt/corpus.hpp"
#include "cmt/metrics.hpp"
#include "cmt/model.hpp"
#include "cmt/preprocess.hpp"
#include "cmt/trainer.hpp"
#include "cmt/vocab.hpp"

#ifndef CMT_DEFAULT_EMOJI_TABLE
#define CMT_DEFAULT_EMOJI_TABLE "data/emoji_table.tsv"
#endif

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;    // bad flags, config, input files
constexpr int kExitNumeric = 3;  // NaN/Inf loss

struct ModelFlags {
    cmt::ModelConfig cfg;
    void attach(CLI::App* cmd) {
        cmd->add_option("--max-len", cfg.max_len, "Sequence length incl. CLS/SEP");
        cmd->add_option("--d-model", cfg.d_model, "Hidden size");
        cmd->add_option("--layers", cfg.num_layers, "Encoder layers");
        cmd->add_option("--heads", cfg.num_heads, "Attention heads");
        cmd->add_option("--d-ff", cfg.d_ff, "Feed-forward size");
        cmd->add_option("--dropout", cfg.dropout_rate, "Dropout rate");
    }
};

struct TrainFlags {
    cmt::TrainConfig cfg;
    std::vector<std::string> freeze_names;
    bool freeze_encoder = false;
    void attach(CLI::App* cmd) {
        cmd->add_option("--epochs", cfg.epochs, "Training epochs");
        cmd->add_option("--max-steps", cfg.max_steps, "Optimizer step cap (0 = none)");
        cmd->add_option("--batch-size", cfg.batch_size, "Mini-batch size");
        cmd->add_option("--lr", cfg.lr, "Adam learning rate");
        cmd->add_option("--freeze", freeze_names,
                        "Parameter groups to freeze (embeddings, encoder_layers, "
                        "mlm_head, sentiment_head, langid_head)")
            ->delimiter(',');
        cmd->add_flag("--freeze-encoder", freeze_encoder,
                      "Freeze embeddings and encoder layers (NFT-TM)");
    }
    void resolve() {
        for (const auto& n : freeze_names)
            cfg.freeze_groups.insert(cmt::parse_param_group(n));
        if (freeze_encoder) {
            cfg.freeze_groups.insert(cmt::ParamGroup::Embeddings);
            cfg.freeze_groups.insert(cmt::ParamGroup::EncoderLayers);
        }
    }
};

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    return out;
}

// CLI11 only processes set_config on the root app, so the per-command
// `--config` is expanded by hand: each `key = value` line becomes a
// `--key=value` token inserted right after the command name. Explicit flags
// come later on the line and win via the take-last policy below.
void add_config_flag(CLI::App* cmd) {
    cmd->add_option("--config", "Flat key = value config file; flags override");
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> expand_config_args(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string path;
    for (std::size_t i = 0; i < args.size();) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size())
                throw std::runtime_error("--config requires a path");
            path = args[i + 1];
            args.erase(args.begin() + i, args.begin() + i + 2);
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            args.erase(args.begin() + i);
        } else {
            ++i;
        }
    }
    if (path.empty()) return args;

    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::vector<std::string> expanded;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        std::string key = eq == std::string::npos ? "" : trim(line.substr(0, eq));
        if (key.empty())
            throw std::runtime_error(path + " line " + std::to_string(lineno) +
                                     ": expected `key = value`");
        std::string value = trim(line.substr(eq + 1));
        expanded.push_back("--" + key + (value.empty() ? "" : "=" + value));
    }
    auto pos = args.begin();
    if (pos != args.end() && !pos->empty() && (*pos)[0] != '-') ++pos;
    args.insert(pos, expanded.begin(), expanded.end());
    return args;
}

void take_last_policy(CLI::App* cmd) {
    for (CLI::Option* opt : cmd->get_options())
        if (opt->get_expected_min() == 1 && opt->get_expected_max() == 1)
            opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
}

int run_preprocess(const std::string& in_path, const std::string& out_path,
                   const std::string& table_path) {
    auto table = cmt::EmojiTable::load_file(table_path);
    std::vector<std::string> dropped;
    auto cleaned = cmt::preprocess_records(cmt::load_conll_file(in_path), table, {},
                                           &dropped);
    for (const auto& id : dropped)
        std::cerr << "dropping record '" << id << "': no tokens survive preprocessing\n";
    cmt::save_conll_file(cleaned, out_path);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Code-mixed tweet sentiment pipeline"};
    app.require_subcommand(1);

    // gen-synthetic
    auto* gen = app.add_subcommand("gen-synthetic", "Generate a seeded synthetic corpus");
    add_config_flag(gen);
    cmt::SyntheticSpec spec = cmt::default_synthetic_spec();
    std::string gen_out;
    gen->add_option("--seed", spec.seed, "RNG seed")->required();
    gen->add_option("--num-records", spec.num_records, "Record count")->required();
    gen->add_option("--min-len", spec.min_len, "Minimum tokens per record");
    gen->add_option("--max-len", spec.max_len, "Maximum tokens per record");
    gen->add_option("--mix-ratio", spec.code_mix_ratio, "Code-mix ratio in [0,1]");
    gen->add_option("--univ-prob", spec.univ_prob, "Univ-token probability");
    gen->add_option("--out", gen_out, "Output dataset path")->required();

    // preprocess
    auto* pre = app.add_subcommand("preprocess", "Emoji substitution + character filtering");
    add_config_flag(pre);
    std::string pre_in, pre_out, emoji_table = CMT_DEFAULT_EMOJI_TABLE;
    pre->add_option("--in", pre_in, "Input dataset")->required();
    pre->add_option("--out", pre_out, "Output dataset")->required();
    pre->add_option("--emoji-table", emoji_table, "Emoji replacement table");

    // build-vocab
    auto* bv = app.add_subcommand("build-vocab", "Build TF-IDF pruned vocabulary");
    add_config_flag(bv);
    std::string bv_in, bv_out;
    std::size_t bv_max_size = 1024;
    double bv_floor = 0.0;
    bv->add_option("--in", bv_in, "Input dataset")->required();
    bv->add_option("--out", bv_out, "Output vocabulary file")->required();
    bv->add_option("--max-size", bv_max_size, "Maximum vocabulary size incl. specials");
    bv->add_option("--tfidf-floor", bv_floor, "Minimum max-tf-idf score (0 = keep all)");

    // pretrain
    auto* pt = app.add_subcommand("pretrain", "Masked-language-model pretraining");
    add_config_flag(pt);
    std::string pt_in, pt_vocab, pt_out, pt_log;
    ModelFlags pt_model;
    TrainFlags pt_train;
    pt->add_option("--in", pt_in, "Training dataset")->required();
    pt->add_option("--vocab", pt_vocab, "Vocabulary file")->required();
    pt->add_option("--out", pt_out, "Output checkpoint")->required();
    pt->add_option("--seed", pt_train.cfg.seed, "RNG seed")->required();
    pt->add_option("--mask-prob", pt_train.cfg.mask_prob, "Token masking probability");
    pt->add_option("--log", pt_log, "Training log path (default stdout)");
    pt_model.attach(pt);
    pt_train.attach(pt);

    // finetune
    auto* ft = app.add_subcommand("finetune", "Multi-task fine-tuning");
    add_config_flag(ft);
    std::string ft_in, ft_vocab, ft_init, ft_dev, ft_out, ft_log;
    ModelFlags ft_model;
    TrainFlags ft_train;
    ft->add_option("--in", ft_in, "Labeled training dataset")->required();
    ft->add_option("--vocab", ft_vocab, "Vocabulary file")->required();
    ft->add_option("--init", ft_init, "Initial checkpoint (default: random init)");
    ft->add_option("--dev", ft_dev, "Dev dataset for per-epoch metrics");
    ft->add_option("--out", ft_out, "Output checkpoint")->required();
    ft->add_option("--seed", ft_train.cfg.seed, "RNG seed")->required();
    ft->add_option("--lambda-sentiment", ft_train.cfg.sentiment_loss_weight,
                   "Sentiment loss weight");
    ft->add_option("--lambda-langid", ft_train.cfg.langid_loss_weight,
                   "Language-ID loss weight");
    ft->add_option("--log", ft_log, "Training log path (default stdout)");
    ft_model.attach(ft);
    ft_train.attach(ft);

    // eval
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint (macro F1)");
    add_config_flag(ev);
    std::string ev_in, ev_vocab, ev_ckpt, ev_out;
    bool ev_json = false;
    ev->add_option("--in", ev_in, "Labeled dataset")->required();
    ev->add_option("--vocab", ev_vocab, "Vocabulary file")->required();
    ev->add_option("--ckpt", ev_ckpt, "Checkpoint to evaluate")->required();
    ev->add_option("--out", ev_out, "Report path (default stdout)");
    ev->add_flag("--json", ev_json, "Emit JSON instead of flat key-value text");

    // predict
    auto* pr = app.add_subcommand("predict", "Write predicted sentiment labels");
    add_config_flag(pr);
    std::string pr_in, pr_vocab, pr_ckpt, pr_out;
    pr->add_option("--in", pr_in, "Input dataset (labels ignored)")->required();
    pr->add_option("--vocab", pr_vocab, "Vocabulary file")->required();
    pr->add_option("--ckpt", pr_ckpt, "Checkpoint")->required();
    pr->add_option("--out", pr_out, "Output dataset with predicted labels")->required();

    for (CLI::App* cmd : {gen, pre, bv, pt, ft, ev, pr}) take_last_policy(cmd);

    try {
        auto args = expand_config_args(argc, argv);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (gen->parsed()) {
            cmt::save_conll_file(cmt::generate_synthetic(spec), gen_out);
        } else if (pre->parsed()) {
            return run_preprocess(pre_in, pre_out, emoji_table);
        } else if (bv->parsed()) {
            cmt::build_vocabulary(cmt::load_conll_file(bv_in), bv_max_size, bv_floor)
                .save(bv_out);
        } else if (pt->parsed()) {
            pt_train.resolve();
            auto records = cmt::load_conll_file(pt_in);
            auto vocab = cmt::Vocabulary::load(pt_vocab);
            pt_model.cfg.vocab_size = vocab.size();
            pt_model.cfg.seed = pt_train.cfg.seed;
            std::ofstream log_file;
            std::ostream* log = &std::cout;
            if (!pt_log.empty()) { log_file = open_out(pt_log); log = &log_file; }
            cmt::pretrain_mlm(records, vocab, pt_model.cfg, pt_train.cfg, *log)
                .save(pt_out);
        } else if (ft->parsed()) {
            ft_train.resolve();
            auto records = cmt::load_conll_file(ft_in);
            auto vocab = cmt::Vocabulary::load(ft_vocab);
            std::vector<cmt::TweetRecord> dev;
            if (!ft_dev.empty()) dev = cmt::load_conll_file(ft_dev);
            ft_model.cfg.vocab_size = vocab.size();
            ft_model.cfg.seed = ft_train.cfg.seed;
            cmt::ModelWeights weights = ft_init.empty()
                                            ? cmt::ModelWeights(ft_model.cfg)
                                            : cmt::ModelWeights::load(ft_init);
            std::ofstream log_file;
            std::ostream* log = &std::cout;
            if (!ft_log.empty()) { log_file = open_out(ft_log); log = &log_file; }
            cmt::finetune_multitask(std::move(weights), records, vocab, ft_train.cfg,
                                    dev.empty() ? nullptr : &dev, *log)
                .save(ft_out);
        } else if (ev->parsed()) {
            auto weights = cmt::ModelWeights::load(ev_ckpt);
            auto vocab = cmt::Vocabulary::load(ev_vocab);
            auto report = cmt::evaluate(weights, cmt::load_conll_file(ev_in), vocab);
            std::ofstream out_file;
            std::ostream* out = &std::cout;
            if (!ev_out.empty()) { out_file = open_out(ev_out); out = &out_file; }
            if (ev_json) cmt::write_report_json(report, *out);
            else cmt::write_report_text(report, *out);
        } else if (pr->parsed()) {
            auto weights = cmt::ModelWeights::load(pr_ckpt);
            auto vocab = cmt::Vocabulary::load(pr_vocab);
            auto records = cmt::load_conll_file(pr_in);
            for (auto& r : records)
                r.sentiment = cmt::Sentiment(cmt::predict_sentiment(weights, r, vocab));
            cmt::save_conll_file(records, pr_out);
        }
    } catch (const cmt::TrainingDiverged& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitOk;
}
