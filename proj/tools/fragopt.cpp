// fragopt: fragment-vocabulary molecular optimization driver.
//
// Subcommands: decompose, build-vocab, pretrain-lm, train-injection, run, eval.
// Exit codes: 0 success, 1 usage/config, 2 data error, 3 internal error.

#include <CLI11.hpp>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "frag/checkpoint.hpp"
#include "frag/config.hpp"
#include "frag/corpus.hpp"
#include "frag/lm.hpp"
#include "frag/metrics.hpp"
#include "frag/molgen.hpp"
#include "frag/optimizer.hpp"
#include "frag/report.hpp"
#include "frag/train.hpp"
#include "frag/vocab.hpp"

namespace fs = std::filesystem;
using namespace frag;

namespace {

volatile bool g_interrupt = false;

void handle_sigint(int) { g_interrupt = true; }

struct Cli {
  std::string config_path;
  std::string out_dir = ".";
  bool quiet = false;
  std::optional<uint64_t> seed_flag;

  AppConfig app;

  void load_config() {
    if (!config_path.empty()) app = app_config_from_doc(load_config_file(config_path));
    if (seed_flag) app.seed = *seed_flag;
  }

  std::ostream& info() {
    static std::ofstream null_stream;
    if (quiet) {
      null_stream.setstate(std::ios::badbit);
      return null_stream;
    }
    return std::cout;
  }

  fs::path out_path(const std::string& name) const { return fs::path(out_dir) / name; }
};

std::vector<std::pair<MolGraph, double>> load_dataset(const std::string& path,
                                                      DatasetInfo* info = nullptr) {
  std::vector<CorpusEntry> entries = load_corpus_file(path);
  if (info) {
    info->path = path;
    info->hash = file_content_hash(path);
    info->molecules = static_cast<long>(entries.size());
  }
  return parse_corpus(entries, path);
}

int cmd_decompose(Cli& cli, const std::string& input, const std::string& output) {
  std::vector<CorpusEntry> entries = load_corpus_file(input);
  std::mt19937_64 rng(cli.app.seed);
  std::ofstream os(output);
  if (!os) throw IOError("cannot write " + output);
  os << "# fragment\tkind\tsource_line\n";
  long undecomposable = 0, decomposed = 0;
  for (const CorpusEntry& e : entries) {
    MolGraph m;
    try {
      m = parse_smiles(e.smiles);
    } catch (const Error& err) {
      throw ParseError(input + ":" + std::to_string(e.line) + ": " + err.what());
    }
    auto s = slice_arm_linker_arm(m, rng);
    if (!s) {
      ++undecomposable;
      continue;
    }
    ++decomposed;
    for (const Fragment* f : {&s->arm1, &s->linker, &s->arm2})
      os << fragment_to_smiles(*f) << "\t" << kind_name(f->kind()) << "\t" << e.line << "\n";
  }
  cli.info() << "decomposed " << decomposed << " molecules, " << undecomposable
             << " undecomposable\n";
  return 0;
}

int cmd_build_vocab(Cli& cli, const std::string& input, const std::string& output) {
  std::vector<std::pair<MolGraph, double>> dataset = load_dataset(input);
  std::mt19937_64 rng(cli.app.seed);
  VocabConfig vc{.n_frag = cli.app.n_frag,
                 .filter_delta = cli.app.delta,
                 .frag_min_atoms = cli.app.frag_min_atoms,
                 .frag_max_atoms = cli.app.frag_max_atoms};
  FragmentVocabulary v = FragmentVocabulary::build_initial(dataset, vc, rng);
  v.save_file(output);
  cli.info() << "vocabulary: " << v.pool_size(FragmentKind::Arm) << " arms, "
             << v.pool_size(FragmentKind::Linker) << " linkers -> " << output << "\n";
  return 0;
}

int cmd_pretrain(Cli& cli, const std::string& input, const std::string& output) {
  std::vector<std::pair<MolGraph, double>> dataset = load_dataset(input);
  std::vector<MolGraph> mols;
  for (auto& [m, y] : dataset) mols.push_back(m);
  std::vector<std::string> corpus = safe_training_corpus(mols, cli.app.seed);
  TokenVocab vocab = TokenVocab::build(corpus);

  BackboneLM lm;
  lm.init({.d_model = cli.app.d_model,
           .n_layers = cli.app.n_layers,
           .n_heads = cli.app.n_heads,
           .context = cli.app.context},
          vocab, cli.app.seed);
  PretrainConfig hp{.epochs = cli.app.epochs.value_or(20),
                    .batch_size = cli.app.batch_size,
                    .lr = cli.app.lr.value_or(1.5e-3),
                    .seed = cli.app.seed};
  TrainReport rep = pretrain_backbone(lm, corpus, hp);
  for (size_t e = 0; e < rep.epoch_loss.size(); ++e)
    cli.info() << "epoch " << e + 1 << " loss " << rep.epoch_loss[e] << "\n";
  if (rep.skipped_too_long)
    cli.info() << rep.skipped_too_long << " sequences exceeded the context window\n";

  std::mt19937_64 vrng(cli.app.seed + 1);
  SamplingConfig s{.temperature = cli.app.temperature,
                   .top_p = cli.app.top_p,
                   .top_k = cli.app.top_k,
                   .max_new_tokens = cli.app.max_new_tokens};
  double validity = sample_validity(lm, 200, s, vrng);
  cli.info() << "unconditional sample validity: " << validity << "\n";
  save_backbone(output, lm);
  cli.info() << "backbone -> " << output << " (" << lm.n_params() << " parameters)\n";
  return 0;
}

int cmd_train_injection(Cli& cli, const std::string& input, const std::string& output) {
  if (cli.app.backbone_path.empty()) throw ConfigError("train-injection needs --backbone");
  BackboneLM lm = load_backbone(cli.app.backbone_path);
  std::vector<std::pair<MolGraph, double>> dataset = load_dataset(input);
  std::vector<MolGraph> mols;
  for (auto& [m, y] : dataset) mols.push_back(m);

  InjectionData data = build_injection_examples(lm, mols, cli.app.k_soft, cli.app.seed);
  if (data.examples.empty()) throw ConfigError("no usable injection training examples");
  cli.info() << data.examples.size() << " training examples (" << data.skipped << " skipped)\n";

  std::mt19937_64 rng(cli.app.seed);
  InjectionModule inj;
  inj.init(lm.cfg.d_model, lm.cfg.d_model, cli.app.layer_l, rng);
  InjectionTrainConfig hp{.epochs = cli.app.epochs.value_or(8),
                          .lr = cli.app.lr.value_or(1e-4),
                          .batch_size = cli.app.batch_size,
                          .seed = cli.app.seed};
  TrainReport rep = train_injection(lm, inj, data.examples, hp);
  for (size_t e = 0; e < rep.epoch_loss.size(); ++e)
    cli.info() << "epoch " << e + 1 << " loss " << rep.epoch_loss[e] << "\n";
  save_injection(output, inj, lm.cfg.d_model);
  cli.info() << "injection module -> " << output << " (" << inj.parameter_count()
             << " trainable parameters)\n";
  return 0;
}

int cmd_run(Cli& cli) {
  if (cli.app.corpus_path.empty()) throw ConfigError("run needs [data].corpus");
  if (!cli.app.oracle) throw ConfigError("run needs an [oracle] section");
  RunConfig rc = to_run_config(cli.app);

  BackboneLM lm;
  InjectionModule inj;
  bool have_inj = false;
  if (cli.app.backbone_path.empty()) throw ConfigError("run needs [lm].backbone");
  lm = load_backbone(cli.app.backbone_path);
  if (rc.variant == RunVariant::Full) {
    if (cli.app.injection_path.empty())
      throw ConfigError("variant \"full\" needs [lm].injection (or use variant \"hard-ga\")");
    inj = load_injection(cli.app.injection_path, lm.cfg.d_model);
    have_inj = true;
  }

  DatasetInfo dsinfo;
  std::vector<std::pair<MolGraph, double>> dataset = load_dataset(cli.app.corpus_path, &dsinfo);

  Oracle oracle = build_oracle(*cli.app.oracle);
  OptimizationRun run(rc, &lm, have_inj ? &inj : nullptr, oracle);
  run.initialize(dataset);

  std::signal(SIGINT, handle_sigint);
  run.run(&g_interrupt);
  std::signal(SIGINT, SIG_DFL);

  const RunState& st = run.state();
  bool complete = !st.interrupted && !st.stalled;
  std::string run_id = write_run_outputs(cli.out_dir, cli.app, st, dsinfo,
                                         cli.app.oracle->type, complete);
  cli.info() << "run " << run_id << ": " << st.oracle_calls_used << "/" << st.budget
             << " oracle calls, |M|=" << st.generated.size()
             << (st.stalled ? " [stalled]" : "") << (st.interrupted ? " [interrupted]" : "")
             << "\n";
  if (st.interrupted) return 130;
  return 0;
}

int cmd_eval(Cli& cli, const std::string& manifest_path, const std::string& output) {
  ManifestData manifest = load_manifest(manifest_path);
  if (manifest.dataset_path.empty()) throw SchemaError("manifest lacks a dataset path");
  if (hex64(file_content_hash(manifest.dataset_path)) != manifest.dataset_hash)
    throw SchemaError("dataset file changed since the run: " + manifest.dataset_path);
  std::vector<std::pair<MolGraph, double>> dataset = load_dataset(manifest.dataset_path);
  std::vector<Fingerprint> train_fps;
  train_fps.reserve(dataset.size());
  for (auto& [m, y] : dataset) train_fps.push_back(morgan_fingerprint(m));
  EvalResult r = evaluate_manifest(manifest, train_fps);
  write_metrics_csv(output, {r});
  cli.info() << "metrics -> " << output << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fragment-vocabulary molecular optimization engine"};
  app.require_subcommand(1);

  Cli cli;
  app.add_option("--config", cli.config_path, "config file (TOML-style sections)");
  app.add_option("--out-dir", cli.out_dir, "output directory");
  app.add_flag("--quiet", cli.quiet, "suppress progress output");
  uint64_t seed_tmp = 0;
  auto* seed_opt = app.add_option("--seed", seed_tmp, "random seed (overrides config)");

  std::string input, output, manifest_path;

  CLI::App* decompose = app.add_subcommand("decompose", "slice a corpus into arm/linker/arm rows");
  decompose->add_option("--input", input)->required();
  decompose->add_option("--output", output, "fragments file")->required();

  CLI::App* build_vocab = app.add_subcommand("build-vocab", "score fragments, keep top pools");
  build_vocab->add_option("--input", input)->required();
  build_vocab->add_option("--output", output, "vocabulary dump")->required();
  build_vocab->add_option("--n-frag", cli.app.n_frag, "pool capacity");
  double delta_tmp = 0;
  auto* delta_opt = build_vocab->add_option("--delta", delta_tmp, "similarity filter threshold");
  build_vocab->add_option("--frag-min-atoms", cli.app.frag_min_atoms);
  build_vocab->add_option("--frag-max-atoms", cli.app.frag_max_atoms);

  CLI::App* pretrain = app.add_subcommand("pretrain-lm", "train the backbone on SAFE strings");
  pretrain->add_option("--input", input)->required();
  pretrain->add_option("--output", output, "backbone checkpoint")->required();
  int epochs_tmp = 0;
  double lr_tmp = 0;
  auto* ep_opt = pretrain->add_option("--epochs", epochs_tmp);
  auto* lr_opt = pretrain->add_option("--lr", lr_tmp);
  pretrain->add_option("--d-model", cli.app.d_model);
  pretrain->add_option("--n-layers", cli.app.n_layers);
  pretrain->add_option("--n-heads", cli.app.n_heads);
  pretrain->add_option("--context", cli.app.context);
  pretrain->add_option("--batch-size", cli.app.batch_size);

  CLI::App* trainij = app.add_subcommand("train-injection",
                                         "train the soft-fragment injection module");
  trainij->add_option("--input", input)->required();
  trainij->add_option("--output", output, "injection checkpoint")->required();
  trainij->add_option("--backbone", cli.app.backbone_path, "frozen backbone checkpoint");
  auto* ep_opt2 = trainij->add_option("--epochs", epochs_tmp);
  auto* lr_opt2 = trainij->add_option("--lr", lr_tmp);
  trainij->add_option("--layer-l", cli.app.layer_l, "insert after this backbone layer");
  trainij->add_option("--k-soft", cli.app.k_soft, "soft fragments per example");
  trainij->add_option("--batch-size", cli.app.batch_size);

  CLI::App* runcmd = app.add_subcommand("run", "budgeted optimization loop");
  long budget_tmp = 0;
  auto* budget_opt = runcmd->add_option("--budget", budget_tmp, "total oracle calls");

  CLI::App* evalcmd = app.add_subcommand("eval", "metrics from a run manifest");
  evalcmd->add_option("--manifest", manifest_path)->required();
  evalcmd->add_option("--output", output, "metrics CSV");

  // global flags may appear after the subcommand too
  for (CLI::App* sub : {decompose, build_vocab, pretrain, trainij, runcmd, evalcmd})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    cli.load_config();
    if (*seed_opt) cli.app.seed = seed_tmp;
    if (*ep_opt || *ep_opt2) cli.app.epochs = epochs_tmp;
    if (*lr_opt || *lr_opt2) cli.app.lr = lr_tmp;
    if (*delta_opt) cli.app.delta = delta_tmp;
    if (*budget_opt) cli.app.budget = budget_tmp;
    fs::create_directories(cli.out_dir);

    if (decompose->parsed()) return cmd_decompose(cli, input, output);
    if (build_vocab->parsed()) return cmd_build_vocab(cli, input, output);
    if (pretrain->parsed()) return cmd_pretrain(cli, input, output);
    if (trainij->parsed()) return cmd_train_injection(cli, input, output);
    if (runcmd->parsed()) return cmd_run(cli);
    if (evalcmd->parsed())
      return cmd_eval(cli, manifest_path,
                      output.empty() ? cli.out_path("metrics.csv").string() : output);
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "fragopt: " << e.what() << "\n";
    return 1;
  } catch (const IOError& e) {
    std::cerr << "fragopt: " << e.what() << "\n";
    return 2;
  } catch (const SchemaError& e) {
    std::cerr << "fragopt: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "fragopt: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "fragopt: internal: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "fragopt: internal: " << e.what() << "\n";
    return 3;
  }
}
