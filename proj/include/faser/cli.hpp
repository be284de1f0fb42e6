#pragma once

// Single entry point wiring every stage into subcommands:
//   ingest, normalize, dedup, vocab build/encode, train, index build/search,
//   eval pools/vuln/zero-shot, fixtures generate
// Exit codes: 0 success, 1 usage error, 2 data/contract error. Mutating
// commands write a reproducibility manifest next to their primary output.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "faser/checkpoint.hpp"
#include "faser/config.hpp"
#include "faser/dedup.hpp"
#include "faser/evaluate.hpp"
#include "faser/fixtures.hpp"
#include "faser/index.hpp"
#include "faser/ingest.hpp"
#include "faser/manifest.hpp"
#include "faser/normalize.hpp"
#include "faser/parallel.hpp"
#include "faser/sampler.hpp"
#include "faser/train.hpp"
#include "faser/version.hpp"
#include "faser/vocab.hpp"

namespace faser {
namespace cli_detail {

inline GlobalAttentionPolicy parse_global_policy(const std::string& text) {
  if (text == "cls") return GlobalAttentionPolicy::cls_only();
  if (text.starts_with("every:")) {
    try {
      return GlobalAttentionPolicy::every(std::stoul(text.substr(6)));
    } catch (const std::exception&) {
    }
  }
  throw ContractError("global policy must be \"cls\" or \"every:<k>\", got \"" + text + "\"");
}

inline std::vector<RawFunction> read_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open corpus: " + path);
  return parse_corpus(in);
}

inline std::vector<FunctionString> read_function_strings_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open function strings: " + path);
  return read_function_strings(in);
}

inline std::vector<NormalizedFunction> read_normalized_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open normalized corpus: " + path);
  return read_normalized(in);
}

template <typename Record>
void write_records_file(const std::string& path, const std::vector<Record>& records) {
  std::ofstream out(path);
  if (!out) throw ContractError("cannot open output: " + path);
  for (const auto& r : records) out << detail::record_to_json(r).dump() << '\n';
  if (!out) throw ContractError("write failed: " + path);
}

// One row per record; each function embeds on its own tape so the matrix is
// independent of ordering and thread count.
template <typename Record>
Tensor embed_corpus(const std::vector<Record>& corpus, const Encoder& encoder,
                    const Vocabulary& vocab, const GlobalAttentionPolicy& policy,
                    size_t threads) {
  if (encoder.config().vocab_size != vocab.size())
    throw ContractError("checkpoint vocab_size " + std::to_string(encoder.config().vocab_size) +
                        " does not match vocabulary of " + std::to_string(vocab.size()) +
                        " tokens");
  Tensor out(corpus.size(), encoder.config().embed_dim);
  parallel_for(corpus.size(), threads, [&](size_t i) {
    EncodedFunction enc = encode(corpus[i], vocab, encoder.config().input_len, policy);
    std::vector<float> e = encoder.embed(enc);
    std::copy(e.begin(), e.end(), out.row(i));
  });
  return out;
}

inline nlohmann::ordered_json summary_json(const EvalSummary& s, size_t pools) {
  return nlohmann::ordered_json{{"pools", pools},
                                {"recall_at_1", s.recall_at_1},
                                {"mrr_at_10", s.mrr_at_10},
                                {"mean_rank", s.mean_rank},
                                {"median_rank", s.median_rank}};
}

struct OutputStream {
  explicit OutputStream(const std::string& path) {
    if (!path.empty()) {
      file.open(path);
      if (!file) throw ContractError("cannot open output: " + path);
    }
  }
  std::ostream& get() { return file.is_open() ? file : std::cout; }
  std::ofstream file;
};

}  // namespace cli_detail

inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Cross-architecture binary function similarity toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  // Lets --threads appear after the subcommand as well as before it.
  app.fallthrough();
  size_t threads = 0;
  app.add_option("--threads", threads,
                 "worker threads for embedding (0 = auto); 1 guarantees bitwise determinism")
      ->envname("FASER_THREADS");

  std::function<void()> action;

  // ingest ------------------------------------------------------------
  {
    auto* cmd = app.add_subcommand("ingest",
                                   "Parse a raw lifted-function corpus into function strings");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--in", *in, "line-delimited JSON corpus")->required();
    cmd->add_option("--out", *out, "function strings output")->required();
    cmd->callback([&action, in, out, argc, argv]() {
      action = [=]() {
        RunManifest manifest(argc, argv);
        manifest.add_input(*in);
        auto raw = cli_detail::read_corpus_file(*in);
        std::vector<FunctionString> fns;
        fns.reserve(raw.size());
        for (const auto& f : raw) fns.push_back(to_function_string(f));
        cli_detail::write_records_file(*out, fns);
        manifest.write(*out + ".manifest.json");
        std::cerr << "ingested " << fns.size() << " functions\n";
      };
    });
  }

  // normalize ----------------------------------------------------------
  {
    auto* cmd = app.add_subcommand("normalize", "Apply token normalization rules");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto mode = std::make_shared<std::string>("nrm");
    auto addr_min = std::make_shared<uint64_t>(kDefaultAddrMin);
    auto regs_path = std::make_shared<std::string>();
    cmd->add_option("--in", *in, "function strings input")->required();
    cmd->add_option("--out", *out, "normalized output")->required();
    cmd->add_option("--mode", *mode, "nrm (no register normalization) or rn")
        ->check(CLI::IsMember({"nrm", "rn"}));
    cmd->add_option("--addr-min", *addr_min, "smallest decimal treated as an address");
    cmd->add_option("--registers", *regs_path, "JSON register table overrides");
    cmd->callback([&action, in, out, mode, addr_min, regs_path, argc, argv]() {
      action = [=]() {
        RunManifest manifest(argc, argv);
        manifest.add_input(*in);
        RegisterTable table = RegisterTable::builtin();
        if (!regs_path->empty()) {
          manifest.add_input(*regs_path);
          table.load_overrides(*regs_path);
        }
        NormalizationMode nm{*mode == "rn"};
        auto fns = cli_detail::read_function_strings_file(*in);
        std::vector<NormalizedFunction> normd;
        normd.reserve(fns.size());
        for (const auto& f : fns) normd.push_back(normalize_function(f, nm, table, *addr_min));
        cli_detail::write_records_file(*out, normd);
        manifest.write(*out + ".manifest.json");
        std::cerr << "normalized " << normd.size() << " functions (" << *mode << ")\n";
      };
    });
  }

  // dedup ----------------------------------------------------------------
  {
    auto* cmd = app.add_subcommand(
        "dedup", "Drop exact (label, body) duplicates and single-variant labels");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto report_path = std::make_shared<std::string>();
    cmd->add_option("--in", *in, "normalized corpus")->required();
    cmd->add_option("--out", *out, "deduplicated output")->required();
    cmd->add_option("--report", *report_path, "write counts as JSON here");
    cmd->callback([&action, in, out, report_path, argc, argv]() {
      action = [=]() {
        RunManifest manifest(argc, argv);
        manifest.add_input(*in);
        auto fns = cli_detail::read_normalized_file(*in);
        DedupReport report;
        auto kept = dedup_corpus(fns, report);
        cli_detail::write_records_file(*out, kept);
        nlohmann::ordered_json rj = to_json(report);
        if (!report_path->empty()) {
          std::ofstream rf(*report_path);
          if (!rf) throw ContractError("cannot open report: " + *report_path);
          rf << rj.dump(2) << '\n';
        }
        manifest.write(*out + ".manifest.json");
        std::cerr << rj.dump() << '\n';
      };
    });
  }

  // vocab ------------------------------------------------------------------
  {
    auto* vocab_cmd = app.add_subcommand("vocab", "Vocabulary construction and encoding");
    vocab_cmd->require_subcommand(1);
    {
      auto* cmd = vocab_cmd->add_subcommand("build", "Build a vocabulary from a corpus");
      auto in = std::make_shared<std::string>();
      auto out = std::make_shared<std::string>();
      auto min_freq = std::make_shared<uint32_t>(1);
      cmd->add_option("--in", *in, "normalized corpus")->required();
      cmd->add_option("--out", *out, "vocabulary file")->required();
      cmd->add_option("--min-frequency", *min_freq, "drop tokens rarer than this");
      cmd->callback([&action, in, out, min_freq, argc, argv]() {
        action = [=]() {
          RunManifest manifest(argc, argv);
          manifest.add_input(*in);
          auto fns = cli_detail::read_normalized_file(*in);
          Vocabulary v = build_vocab(fns, *min_freq);
          v.save(*out);
          manifest.write(*out + ".manifest.json");
          std::cerr << "vocabulary of " << v.size() << " tokens\n";
        };
      });
    }
    {
      auto* cmd = vocab_cmd->add_subcommand("encode", "Encode functions to fixed-length ids");
      auto in = std::make_shared<std::string>();
      auto vocab_path = std::make_shared<std::string>();
      auto out = std::make_shared<std::string>();
      auto len = std::make_shared<uint32_t>(128);
      auto policy_text = std::make_shared<std::string>("cls");
      cmd->add_option("--in", *in, "normalized corpus")->required();
      cmd->add_option("--vocab", *vocab_path, "vocabulary file")->required();
      cmd->add_option("--out", *out, "encoded output (JSON lines)")->required();
      cmd->add_option("--len", *len, "model input length");
      cmd->add_option("--global-policy", *policy_text, "cls or every:<k>");
      cmd->callback([&action, in, vocab_path, out, len, policy_text, argc, argv]() {
        action = [=]() {
          RunManifest manifest(argc, argv);
          manifest.add_input(*in);
          manifest.add_input(*vocab_path);
          Vocabulary v = Vocabulary::load_file(*vocab_path);
          auto policy = cli_detail::parse_global_policy(*policy_text);
          auto fns = cli_detail::read_normalized_file(*in);
          std::ofstream os(*out);
          if (!os) throw ContractError("cannot open output: " + *out);
          for (const auto& f : fns) {
            EncodedFunction enc = encode(f, v, *len, policy);
            nlohmann::ordered_json j{{"label", enc.label},
                                     {"ids", enc.ids},
                                     {"attention_mask", enc.attention_mask},
                                     {"global_mask", enc.global_mask},
                                     {"true_length", enc.true_length}};
            os << j.dump() << '\n';
          }
          manifest.write(*out + ".manifest.json");
          std::cerr << "encoded " << fns.size() << " functions\n";
        };
      });
    }
  }

  // train --------------------------------------------------------------------
  {
    auto* cmd = app.add_subcommand("train", "Train the similarity encoder");
    auto corpus_path = std::make_shared<std::string>();
    auto vocab_path = std::make_shared<std::string>();
    auto config_path = std::make_shared<std::string>();
    auto out_dir = std::make_shared<std::string>();
    auto seed = std::make_shared<uint64_t>(0);
    auto policy_text = std::make_shared<std::string>("cls");
    cmd->add_option("--corpus", *corpus_path, "deduplicated normalized corpus")->required();
    cmd->add_option("--vocab", *vocab_path, "vocabulary file")->required();
    cmd->add_option("--config", *config_path, "key = value config file")->required();
    cmd->add_option("--out-dir", *out_dir, "checkpoints and log directory")->required();
    cmd->add_option("--seed", *seed, "training seed");
    cmd->add_option("--global-policy", *policy_text, "cls or every:<k>");
    cmd->callback([&action, corpus_path, vocab_path, config_path, out_dir, seed, policy_text,
                   argc, argv]() {
      action = [=]() {
        RunManifest manifest(argc, argv);
        manifest.add_input(*corpus_path);
        manifest.add_input(*vocab_path);
        manifest.add_input(*config_path);
        manifest.set_seed(*seed);

        ConfigFile cf = ConfigFile::parse_file(*config_path);
        TrainSettings settings = load_train_settings(cf);
        manifest.set_config(cf.values());
        Vocabulary vocab = Vocabulary::load_file(*vocab_path);
        settings.encoder.vocab_size = static_cast<uint32_t>(vocab.size());
        settings.train.seed = *seed;
        settings.train.sampler.seed = *seed;

        auto corpus = cli_detail::read_normalized_file(*corpus_path);
        if (corpus.empty()) throw ContractError("training corpus is empty");
        if (settings.train.sampler.functions_per_epoch == 0)
          settings.train.sampler.functions_per_epoch = static_cast<uint32_t>(corpus.size());

        auto policy = cli_detail::parse_global_policy(*policy_text);
        std::vector<EncodedFunction> encoded;
        std::vector<std::string> labels;
        encoded.reserve(corpus.size());
        for (const auto& f : corpus) {
          encoded.push_back(encode(f, vocab, settings.encoder.input_len, policy));
          labels.push_back(f.label);
        }

        std::filesystem::create_directories(*out_dir);
        std::ofstream log(*out_dir + "/train_log.jsonl");
        if (!log) throw ContractError("cannot open training log in " + *out_dir);

        Parameters params = Parameters::init(settings.encoder, *seed);
        Trainer trainer(settings.encoder, std::move(params), settings.train);
        BatchSampler sampler(labels, settings.train.sampler);

        auto checkpoint_path = [&](const std::string& tag) {
          return *out_dir + "/checkpoint_" + tag + ".fasr";
        };
        for (uint32_t epoch = 0; epoch < settings.train.epochs; ++epoch) {
          double mean_loss = trainer.train_epoch(
              encoded, sampler, epoch,
              [&log](const StepLog& s) {
                log << nlohmann::ordered_json{{"step", s.step},
                                              {"epoch", s.epoch},
                                              {"loss", s.loss},
                                              {"lr", s.lr}}
                           .dump()
                    << '\n';
              },
              [&, last_step = uint64_t(0)](uint64_t step, uint32_t) mutable {
                // The trainer also calls at epoch end; only save_every hits
                // get a step checkpoint, and each step at most once.
                uint32_t every = settings.train.save_every;
                if (every == 0 || step % every != 0 || step == last_step) return;
                last_step = step;
                save_checkpoint(checkpoint_path("step_" + std::to_string(step)),
                                trainer.config(), trainer.parameters());
              });
          save_checkpoint(checkpoint_path("epoch_" + std::to_string(epoch)), trainer.config(),
                          trainer.parameters());
          std::cerr << "epoch " << epoch << " mean loss " << mean_loss << '\n';
        }
        save_checkpoint(*out_dir + "/checkpoint.fasr", trainer.config(), trainer.parameters());
        manifest.write(*out_dir + "/manifest.json");
      };
    });
  }

  // index ---------------------------------------------------------------------
  {
    auto* index_cmd = app.add_subcommand("index", "Embedding store construction and search");
    index_cmd->require_subcommand(1);
    {
      auto* cmd = index_cmd->add_subcommand("build", "Embed a corpus into a store");
      auto corpus_path = std::make_shared<std::string>();
      auto ck_path = std::make_shared<std::string>();
      auto vocab_path = std::make_shared<std::string>();
      auto out = std::make_shared<std::string>();
      auto policy_text = std::make_shared<std::string>("cls");
      cmd->add_option("--corpus", *corpus_path, "normalized corpus")->required();
      cmd->add_option("--checkpoint", *ck_path, "model checkpoint")->required();
      cmd->add_option("--vocab", *vocab_path, "vocabulary file")->required();
      cmd->add_option("--out", *out, "store output")->required();
      cmd->add_option("--global-policy", *policy_text, "cls or every:<k>");
      cmd->callback([&action, &threads, corpus_path, ck_path, vocab_path, out, policy_text,
                     argc, argv]() {
        action = [=, &threads]() {
          RunManifest manifest(argc, argv);
          manifest.add_input(*corpus_path);
          manifest.add_input(*ck_path);
          manifest.add_input(*vocab_path);
          auto corpus = cli_detail::read_normalized_file(*corpus_path);
          Checkpoint ck = load_checkpoint(*ck_path);
          Vocabulary vocab = Vocabulary::load_file(*vocab_path);
          Encoder encoder(ck.config, std::move(ck.params));
          auto policy = cli_detail::parse_global_policy(*policy_text);
          EmbeddingStore store = build_index(corpus, encoder, vocab, policy, threads);
          store.save(*out);
          manifest.write(*out + ".manifest.json");
          std::cerr << "store of " << store.count() << " embeddings, dim " << store.dim()
                    << '\n';
        };
      });
    }
    {
      auto* cmd = index_cmd->add_subcommand("search", "Query a store by function name");
      auto store_path = std::make_shared<std::string>();
      auto query_fn = std::make_shared<std::string>();
      auto k = std::make_shared<size_t>(10);
      cmd->add_option("--store", *store_path, "embedding store")->required();
      cmd->add_option("--query-fn", *query_fn, "function name to search for")->required();
      cmd->add_option("--k", *k, "results to return");
      cmd->callback([&action, store_path, query_fn, k]() {
        action = [=]() {
          EmbeddingStore store = EmbeddingStore::load_file(*store_path);
          const StoreRow* query = nullptr;
          for (const auto& r : store.rows())
            if (r.label == *query_fn) {
              query = &r;
              break;
            }
          if (!query)
            throw ContractError("function \"" + *query_fn + "\" is not in the store");
          auto hits = store.top_k(query->embedding, *k);
          for (size_t i = 0; i < hits.size(); ++i) {
            const StoreRow& row = store.rows()[hits[i].row];
            std::cout << nlohmann::ordered_json{{"rank", i + 1},
                                                {"label", row.label},
                                                {"id", hits[i].id.hex()},
                                                {"similarity", hits[i].similarity}}
                             .dump()
                      << '\n';
          }
        };
      });
    }
  }

  // eval -----------------------------------------------------------------------
  {
    auto* eval_cmd = app.add_subcommand("eval", "Retrieval evaluation");
    eval_cmd->require_subcommand(1);
    {
      auto* cmd = eval_cmd->add_subcommand("pools", "Recall@1 / MRR@10 over search pools");
      auto corpus_path = std::make_shared<std::string>();
      auto ck_path = std::make_shared<std::string>();
      auto vocab_path = std::make_shared<std::string>();
      auto num_pools = std::make_shared<size_t>(1000);
      auto negatives = std::make_shared<size_t>(100);
      auto seed = std::make_shared<uint64_t>(0);
      auto out = std::make_shared<std::string>();
      auto policy_text = std::make_shared<std::string>("cls");
      cmd->add_option("--corpus", *corpus_path, "normalized eval corpus")->required();
      cmd->add_option("--checkpoint", *ck_path, "model checkpoint")->required();
      cmd->add_option("--vocab", *vocab_path, "vocabulary file")->required();
      cmd->add_option("--num-pools", *num_pools, "pools to sample");
      cmd->add_option("--negatives", *negatives, "negatives per pool");
      cmd->add_option("--seed", *seed, "pool sampling seed");
      cmd->add_option("--out", *out, "per-pool results file (default stdout)");
      cmd->add_option("--global-policy", *policy_text, "cls or every:<k>");
      cmd->callback([&action, &threads, corpus_path, ck_path, vocab_path, num_pools, negatives,
                     seed, out, policy_text, argc, argv]() {
        action = [=, &threads]() {
          auto corpus = cli_detail::read_normalized_file(*corpus_path);
          Checkpoint ck = load_checkpoint(*ck_path);
          Vocabulary vocab = Vocabulary::load_file(*vocab_path);
          Encoder encoder(ck.config, std::move(ck.params));
          auto policy = cli_detail::parse_global_policy(*policy_text);
          std::vector<std::string> labels;
          for (const auto& f : corpus) labels.push_back(f.label);
          Tensor emb = cli_detail::embed_corpus(corpus, encoder, vocab, policy, threads);
          auto pools = build_pools(labels, *num_pools, *negatives, *seed);
          std::vector<RankResult> results;
          results.reserve(pools.size());
          cli_detail::OutputStream os(*out);
          for (size_t p = 0; p < pools.size(); ++p) {
            results.push_back(rank_pool(pools[p], emb, p));
            os.get() << nlohmann::ordered_json{{"pool", p},
                                               {"query_label", labels[pools[p].query]},
                                               {"rank", results.back().rank_of_positive}}
                            .dump()
                     << '\n';
          }
          EvalSummary s = summarize(results);
          nlohmann::ordered_json sj = cli_detail::summary_json(s, results.size());
          os.get() << sj.dump() << '\n';
          if (!out->empty()) {
            std::cout << sj.dump() << '\n';
            RunManifest manifest(argc, argv);
            manifest.add_input(*corpus_path);
            manifest.add_input(*ck_path);
            manifest.add_input(*vocab_path);
            manifest.set_seed(*seed);
            manifest.write(*out + ".manifest.json");
          }
        };
      });
    }
    {
      auto* cmd = eval_cmd->add_subcommand("vuln", "Rank query functions against a target corpus");
      auto queries_path = std::make_shared<std::string>();
      auto targets_path = std::make_shared<std::string>();
      auto ck_path = std::make_shared<std::string>();
      auto vocab_path = std::make_shared<std::string>();
      auto format = std::make_shared<std::string>("json");
      auto policy_text = std::make_shared<std::string>("cls");
      cmd->add_option("--queries", *queries_path, "normalized query functions")->required();
      cmd->add_option("--targets", *targets_path, "normalized target corpus")->required();
      cmd->add_option("--checkpoint", *ck_path, "model checkpoint")->required();
      cmd->add_option("--vocab", *vocab_path, "vocabulary file")->required();
      cmd->add_option("--format", *format, "json or table")
          ->check(CLI::IsMember({"json", "table"}));
      cmd->add_option("--global-policy", *policy_text, "cls or every:<k>");
      cmd->callback([&action, &threads, queries_path, targets_path, ck_path, vocab_path, format,
                     policy_text]() {
        action = [=, &threads]() {
          auto queries = cli_detail::read_normalized_file(*queries_path);
          auto targets = cli_detail::read_normalized_file(*targets_path);
          Checkpoint ck = load_checkpoint(*ck_path);
          Vocabulary vocab = Vocabulary::load_file(*vocab_path);
          Encoder encoder(ck.config, std::move(ck.params));
          auto policy = cli_detail::parse_global_policy(*policy_text);
          Tensor qe = cli_detail::embed_corpus(queries, encoder, vocab, policy, threads);
          Tensor te = cli_detail::embed_corpus(targets, encoder, vocab, policy, threads);
          std::vector<std::string> qlabels, qarchs, tlabels;
          for (const auto& q : queries) {
            qlabels.push_back(q.label);
            qarchs.push_back(q.meta.architecture);
          }
          for (const auto& t : targets) tlabels.push_back(t.label);
          auto results = vuln_search(qlabels, qarchs, qe, tlabels, te);
          EvalSummary s = summarize_vuln(results);
          if (*format == "table") {
            std::cout << vuln_rank_table(results);
            std::cout << "mean " << s.mean_rank << " median " << s.median_rank << '\n';
          } else {
            for (const auto& r : results) {
              nlohmann::ordered_json j{{"query_label", r.query_label},
                                       {"architecture", r.architecture}};
              if (r.absent)
                j["absent"] = true;
              else
                j["rank"] = r.rank;
              std::cout << j.dump() << '\n';
            }
            std::cout << cli_detail::summary_json(s, results.size()).dump() << '\n';
          }
        };
      });
    }
    {
      auto* cmd = eval_cmd->add_subcommand(
          "zero-shot", "Pool evaluation with queries from a held-out architecture");
      auto corpus_path = std::make_shared<std::string>();
      auto train_path = std::make_shared<std::string>();
      auto holdout = std::make_shared<std::string>();
      auto ck_path = std::make_shared<std::string>();
      auto vocab_path = std::make_shared<std::string>();
      auto num_pools = std::make_shared<size_t>(1000);
      auto negatives = std::make_shared<size_t>(100);
      auto seed = std::make_shared<uint64_t>(0);
      auto out = std::make_shared<std::string>();
      auto policy_text = std::make_shared<std::string>("cls");
      cmd->add_option("--corpus", *corpus_path, "normalized eval corpus")->required();
      cmd->add_option("--train-corpus", *train_path, "corpus the model was trained on")
          ->required();
      cmd->add_option("--holdout", *holdout, "held-out architecture")->required();
      cmd->add_option("--checkpoint", *ck_path, "model checkpoint")->required();
      cmd->add_option("--vocab", *vocab_path, "vocabulary file")->required();
      cmd->add_option("--num-pools", *num_pools, "pools to sample");
      cmd->add_option("--negatives", *negatives, "negatives per pool");
      cmd->add_option("--seed", *seed, "pool sampling seed");
      cmd->add_option("--out", *out, "per-pool results file (default stdout)");
      cmd->add_option("--global-policy", *policy_text, "cls or every:<k>");
      cmd->callback([&action, &threads, corpus_path, train_path, holdout, ck_path, vocab_path,
                     num_pools, negatives, seed, out, policy_text]() {
        action = [=, &threads]() {
          auto corpus = cli_detail::read_normalized_file(*corpus_path);
          auto train_corpus = cli_detail::read_normalized_file(*train_path);
          std::vector<std::string> train_archs, eval_archs, labels;
          for (const auto& f : train_corpus) train_archs.push_back(f.meta.architecture);
          for (const auto& f : corpus) {
            eval_archs.push_back(f.meta.architecture);
            labels.push_back(f.label);
          }
          check_zero_shot_split(train_archs, eval_archs, *holdout);
          Checkpoint ck = load_checkpoint(*ck_path);
          Vocabulary vocab = Vocabulary::load_file(*vocab_path);
          Encoder encoder(ck.config, std::move(ck.params));
          auto policy = cli_detail::parse_global_policy(*policy_text);
          Tensor emb = cli_detail::embed_corpus(corpus, encoder, vocab, policy, threads);
          auto pools =
              build_zero_shot_pools(labels, eval_archs, *holdout, *num_pools, *negatives, *seed);
          std::vector<RankResult> results;
          cli_detail::OutputStream os(*out);
          for (size_t p = 0; p < pools.size(); ++p) {
            results.push_back(rank_pool(pools[p], emb, p));
            os.get() << nlohmann::ordered_json{{"pool", p},
                                               {"query_label", labels[pools[p].query]},
                                               {"rank", results.back().rank_of_positive}}
                            .dump()
                     << '\n';
          }
          EvalSummary s = summarize(results);
          nlohmann::ordered_json sj = cli_detail::summary_json(s, results.size());
          os.get() << sj.dump() << '\n';
          if (!out->empty()) std::cout << sj.dump() << '\n';
        };
      });
    }
  }

  // fixtures ---------------------------------------------------------------------
  {
    auto* fixtures_cmd = app.add_subcommand("fixtures", "Synthetic corpus generation");
    fixtures_cmd->require_subcommand(1);
    auto* cmd = fixtures_cmd->add_subcommand("generate", "Generate a paired synthetic corpus");
    auto cfg = std::make_shared<SynthConfig>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--out", *out, "corpus output")->required();
    cmd->add_option("--labels", cfg->num_labels, "distinct function labels");
    cmd->add_option("--variants", cfg->variants_per_label, "variants per label");
    cmd->add_option("--architectures", cfg->architectures, "pseudo-architecture names")
        ->delimiter(',');
    cmd->add_option("--alphabet", cfg->alphabet_size, "opcode alphabet size");
    cmd->add_option("--min-instructions", cfg->min_instructions, "per function");
    cmd->add_option("--max-instructions", cfg->max_instructions, "per function");
    cmd->add_option("--sub-rate", cfg->substitution_rate, "token substitution rate");
    cmd->add_option("--ins-rate", cfg->insertion_rate, "token insertion rate");
    cmd->add_option("--del-rate", cfg->deletion_rate, "token deletion rate");
    cmd->add_option("--rename-rate", cfg->register_renaming_rate, "register renaming rate");
    cmd->add_option("--seed", cfg->seed, "generation seed");
    cmd->callback([&action, cfg, out, argc, argv]() {
      action = [=]() {
        RunManifest manifest(argc, argv);
        manifest.set_seed(cfg->seed);
        auto corpus = generate_fixtures(*cfg);
        std::ofstream os(*out);
        if (!os) throw ContractError("cannot open output: " + *out);
        write_corpus(os, corpus);
        manifest.write(*out + ".manifest.json");
        std::cerr << "generated " << corpus.size() << " functions\n";
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    if (action) action();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace faser
