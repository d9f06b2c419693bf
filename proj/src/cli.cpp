#include "rsarank/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "rsarank/checkpoint.hpp"
#include "rsarank/error.hpp"
#include "rsarank/synthetic.hpp"
#include "rsarank/trainer.hpp"

namespace rsarank::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kModelFile = "model.ckpt";
constexpr const char* kHistoryFile = "history.tsv";

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

Dataset load_dataset(const fs::path& path, const RunConfig& config) {
  ParseOptions options;
  options.k_max_floor = config.k_max_floor;
  Dataset ds = load_letor(path, options);
  validate(ds);
  return ds;
}

Checkpoint load_model(const fs::path& path) { return load_checkpoint_with_metadata(path); }

Normalization checkpoint_normalization(const Metadata& meta) {
  auto it = meta.find("normalize");
  return it == meta.end() ? Normalization::kNone : parse_normalization(it->second);
}

int checkpoint_k_floor(const Metadata& meta) {
  auto it = meta.find("k_max_floor");
  return it == meta.end() ? 4 : std::stoi(it->second);
}

std::string full_precision(double v) {
  std::ostringstream os;
  os.precision(std::numeric_limits<double>::max_digits10);
  os << v;
  return os.str();
}

}  // namespace

Dataset load_for_model(const fs::path& path, std::size_t model_dim, Normalization normalize,
                       int k_max_floor) {
  ParseOptions options;
  options.k_max_floor = k_max_floor;
  options.min_feature_dim = model_dim;
  Dataset ds = load_letor(path, options);
  validate(ds);
  return preprocess(std::move(ds), normalize);
}

int cmd_train(const RunConfig& config, const TrainPaths& paths, std::ostream& out) {
  Dataset train_set = load_dataset(paths.train, config);
  Dataset valid_set = load_dataset(paths.valid, config);
  std::optional<Dataset> test_set;
  if (paths.test) test_set = load_dataset(*paths.test, config);

  std::size_t dim = std::max(train_set.feature_dim, valid_set.feature_dim);
  if (test_set) dim = std::max(dim, test_set->feature_dim);
  const int k_max = std::max({train_set.k_max, valid_set.k_max, test_set ? test_set->k_max : 0});
  auto prepare = [&](Dataset ds) {
    ds = pad_features(std::move(ds), dim);
    ds.k_max = k_max;
    return preprocess(std::move(ds), config.normalize);
  };
  train_set = prepare(std::move(train_set));
  valid_set = prepare(std::move(valid_set));
  if (test_set) test_set = prepare(std::move(*test_set));

  ModelConfig model_config = config.model;
  model_config.input_dim = dim;
  RsaModel model = init_params(model_config, model_config.seed);

  fs::create_directories(paths.out_dir);
  out << "training " << variant_name(model_config.variant) << " on "
      << train_set.groups.size() << " queries (d=" << dim << ", " << model.parameter_count()
      << " parameters)\n";
  TrainResult result = train(std::move(model), train_set, valid_set, config.train,
                             [&](const EpochRecord& e) {
                               out << "epoch " << e.epoch << "\tloss " << e.train_loss
                                   << "\tvalid NDCG@10 " << e.valid_ndcg10 << '\n';
                             });

  const Metadata extra = {{"normalize", std::string(normalization_name(config.normalize))},
                          {"k_max_floor", std::to_string(config.k_max_floor)}};
  save_checkpoint(result.best_model, paths.out_dir / kModelFile, extra);
  {
    auto history = open_output(paths.out_dir / kHistoryFile);
    write_history(history, result.history);
  }
  out << "best epoch " << result.history.best_epoch << '\n';
  out << "valid NDCG@10 " << full_precision(result.history.best_valid_ndcg10) << '\n';
  if (test_set) {
    const MetricReport report = evaluate(result.best_model, *test_set);
    write_report_table(out, report, variant_name(model_config.variant));
  }
  return kExitOk;
}

int cmd_eval(const EvalPaths& paths, std::ostream& out) {
  const Checkpoint ckpt = load_model(paths.model);
  const Dataset data = load_for_model(paths.data, ckpt.model.config.input_dim,
                                      checkpoint_normalization(ckpt.metadata),
                                      checkpoint_k_floor(ckpt.metadata));
  const MetricReport report = evaluate(ckpt.model, data);
  write_report_table(out, report, variant_name(ckpt.model.config.variant));
  out << "NDCG@10 " << full_precision(report.ndcg(10)) << '\n';
  if (paths.out_dir) {
    fs::create_directories(*paths.out_dir);
    auto table = open_output(*paths.out_dir / "report.tsv");
    write_report_table(table, report, variant_name(ckpt.model.config.variant));
    auto per_query = open_output(*paths.out_dir / "per_query.tsv");
    write_per_query(per_query, report);
  }
  return kExitOk;
}

int cmd_predict(const EvalPaths& paths, std::optional<fs::path> out_file, std::ostream& out) {
  const Checkpoint ckpt = load_model(paths.model);
  const Dataset data = load_for_model(paths.data, ckpt.model.config.input_dim,
                                      checkpoint_normalization(ckpt.metadata),
                                      checkpoint_k_floor(ckpt.metadata));
  std::ofstream file;
  if (out_file) file = open_output(*out_file);
  std::ostream& sink = out_file ? static_cast<std::ostream&>(file) : out;
  sink.precision(std::numeric_limits<double>::max_digits10);
  sink << "qid\tdoc\tscore\n";
  for (const auto& g : data.groups) {
    const Vector s = score(ckpt.model, g.features);
    for (Eigen::Index i = 0; i < s.size(); ++i) sink << g.qid << '\t' << i << '\t' << s(i) << '\n';
  }
  return kExitOk;
}

void write_matrix_csv(std::ostream& out, const Matrix& m) {
  std::ostringstream os;
  os.precision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) os << ',';
      os << m(r, c);
    }
    os << '\n';
  }
  out << os.str();
}

Matrix read_matrix_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream fields(line);
    std::string cell;
    while (std::getline(fields, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size()) throw Error("ragged CSV matrix");
    rows.push_back(std::move(row));
  }
  Matrix m(static_cast<Eigen::Index>(rows.size()),
           rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return m;
}

void write_pgm(std::ostream& out, const Matrix& m) {
  std::ostringstream os;
  os << "P2\n" << m.cols() << ' ' << m.rows() << "\n255\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) os << ' ';
      os << static_cast<int>(std::clamp(std::lround(255.0 * m(r, c)), 0L, 255L));
    }
    os << '\n';
  }
  out << os.str();
}

int cmd_attention(const EvalPaths& paths, const std::string& qid, std::ostream& out) {
  const Checkpoint ckpt = load_model(paths.model);
  if (!ckpt.model.config.uses_encoders()) throw Error("listnet models have no attention layers");
  const Dataset data = load_for_model(paths.data, ckpt.model.config.input_dim,
                                      checkpoint_normalization(ckpt.metadata),
                                      checkpoint_k_floor(ckpt.metadata));
  const QueryGroup* group = data.find(qid);
  if (!group) throw Error("unknown qid '" + qid + "'");
  const fs::path dir = paths.out_dir.value_or(fs::path("."));
  fs::create_directories(dir);

  const Prediction pred = predict(ckpt.model, group->features);
  for (std::size_t e = 0; e < pred.kinds.size(); ++e) {
    const EncoderKind kind = pred.kinds[e];
    const std::string name(encoder_name(kind));
    const IdealAttentionMatrix ideal = ideal_attention(group->relevance, kind, data.k_max);
    const double bce = attention_regularizer(pred.attention[e], ideal.weights);
    {
      auto f = open_output(dir / ("attention_" + name + ".csv"));
      write_matrix_csv(f, pred.attention[e]);
    }
    {
      auto f = open_output(dir / ("ideal_" + name + ".csv"));
      write_matrix_csv(f, ideal.weights);
    }
    {
      auto f = open_output(dir / ("attention_" + name + ".pgm"));
      write_pgm(f, pred.attention[e]);
    }
    {
      auto f = open_output(dir / ("ideal_" + name + ".pgm"));
      write_pgm(f, ideal.weights);
    }
    out << "encoder " << encoder_symbol(kind) << " (" << name << ")\tBCE vs ideal " << bce << '\n';
  }
  out << "grades";
  for (int r : group->relevance) out << ' ' << r;
  out << '\n';
  return kExitOk;
}

int cmd_significance(const fs::path& a, const fs::path& b, std::ostream& out) {
  std::ifstream fa(a), fb(b);
  if (!fa) throw Error("cannot open " + a.string());
  if (!fb) throw Error("cannot open " + b.string());
  const MetricReport ra = read_per_query(fa);
  const MetricReport rb = read_per_query(fb);
  write_significance(out, compare_systems(ra, rb));
  return kExitOk;
}

int cmd_synth(const SynthOptions& o, std::ostream& out) {
  const std::size_t total = o.train_queries + o.valid_queries + o.test_queries;
  const Dataset all = generate_synthetic(o.seed, total, o.docs_per_query, o.num_features);
  const std::vector<std::size_t> sizes = {o.train_queries, o.valid_queries, o.test_queries};
  const std::vector<Dataset> parts = split_dataset(all, sizes);
  fs::create_directories(o.out_dir);
  const char* names[] = {"train.txt", "valid.txt", "test.txt"};
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (parts[i].groups.empty()) continue;
    auto f = open_output(o.out_dir / names[i]);
    write_letor(f, parts[i]);
    const DatasetStats stats = dataset_stats(parts[i]);
    out << names[i] << ": " << stats.num_queries << " queries, " << stats.num_documents
        << " documents\n";
  }
  return kExitOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learning to rank with regularized self-attention"};
  app.require_subcommand(1);

  RunConfig config;
  std::optional<fs::path> config_path;
  std::vector<std::string> overrides;
  std::optional<std::string> variant, encoders, normalize;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, hidden, batch, patience;
  std::optional<double> lr;

  auto add_run_options = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Key = value config file");
    cmd->add_option("--set", overrides, "Override one config key (key=value)");
    cmd->add_option("--variant", variant, "listnet, sa or rsa");
    cmd->add_option("--encoders", encoders, "Active encoder kinds, subset of +>-<");
    cmd->add_option("--normalize", normalize, "none or query-minmax");
    cmd->add_option("--seed", seed, "Seed for initialization and shuffling");
    cmd->add_option("--epochs", epochs, "Maximum epochs");
    cmd->add_option("--hidden", hidden, "Encoder hidden width");
    cmd->add_option("--batch", batch, "Queries per optimizer step");
    cmd->add_option("--patience", patience, "Early-stopping patience (epochs)");
    cmd->add_option("--lr", lr, "Learning rate");
  };

  TrainPaths train_paths;
  std::optional<fs::path> test_path;
  auto* train_cmd = app.add_subcommand("train", "Train a model with validation-based selection");
  train_cmd->add_option("--train", train_paths.train, "Training data (LETOR)")->required();
  train_cmd->add_option("--valid", train_paths.valid, "Validation data (LETOR)")->required();
  train_cmd->add_option("--test", test_path, "Optional test data to report on");
  train_cmd->add_option("--out", train_paths.out_dir, "Output directory")->required();
  add_run_options(train_cmd);

  EvalPaths eval_paths;
  std::optional<fs::path> eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "ERR/NDCG at 1, 3, 5, 10");
  eval_cmd->add_option("--model", eval_paths.model, "Checkpoint")->required();
  eval_cmd->add_option("--test", eval_paths.data, "Data to evaluate (LETOR)")->required();
  eval_cmd->add_option("--out", eval_out, "Directory for report.tsv and per_query.tsv");

  EvalPaths predict_paths;
  std::optional<fs::path> predict_out;
  auto* predict_cmd = app.add_subcommand("predict", "Per-document scores in input order");
  predict_cmd->add_option("--model", predict_paths.model, "Checkpoint")->required();
  predict_cmd->add_option("--test", predict_paths.data, "Data to score (LETOR)")->required();
  predict_cmd->add_option("--out", predict_out, "Output file (default stdout)");

  EvalPaths attention_paths;
  std::optional<fs::path> attention_out;
  std::string qid;
  auto* attention_cmd = app.add_subcommand("attention", "Export learned and ideal attention");
  attention_cmd->add_option("--model", attention_paths.model, "Checkpoint")->required();
  attention_cmd->add_option("--test", attention_paths.data, "Data holding the query")->required();
  attention_cmd->add_option("--qid", qid, "Query id")->required();
  attention_cmd->add_option("--out", attention_out, "Output directory (default .)");

  fs::path sig_a, sig_b;
  auto* sig_cmd = app.add_subcommand("significance", "Paired t-tests between two systems");
  sig_cmd->add_option("--a", sig_a, "Per-query metrics of system A (eval --out)")->required();
  sig_cmd->add_option("--b", sig_b, "Per-query metrics of system B")->required();

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic train/valid/test split");
  synth_cmd->add_option("--out", synth.out_dir, "Output directory")->required();
  synth_cmd->add_option("--seed", synth.seed, "Generator seed");
  synth_cmd->add_option("--queries", synth.train_queries, "Training queries");
  synth_cmd->add_option("--valid-queries", synth.valid_queries, "Validation queries");
  synth_cmd->add_option("--test-queries", synth.test_queries, "Test queries");
  synth_cmd->add_option("--docs", synth.docs_per_query, "Documents per query");
  synth_cmd->add_option("--features", synth.num_features, "Features per document");

  auto* dump_cmd = app.add_subcommand("config-dump", "Print every config key with its value");
  add_run_options(dump_cmd);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    err << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    if (config_path) {
      std::ifstream in(*config_path);
      if (!in) throw ConfigError("cannot open config " + config_path->string());
      apply_config_file(config, in);
    }
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      apply_setting(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (variant) config.model.variant = parse_variant(*variant);
    if (encoders) config.model.encoders = parse_encoder_set(*encoders);
    if (normalize) config.normalize = parse_normalization(*normalize);
    if (seed) apply_setting(config, "seed", std::to_string(*seed));
    if (epochs) config.train.max_epochs = *epochs;
    if (hidden) config.model.hidden_dim = *hidden;
    if (batch) config.train.batch_size = *batch;
    if (patience) config.train.patience = *patience;
    if (lr) config.train.learning_rate = *lr;
    config.train.validate();
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*train_cmd) {
      train_paths.test = test_path;
      return cmd_train(config, train_paths, out);
    }
    if (*eval_cmd) {
      eval_paths.out_dir = eval_out;
      return cmd_eval(eval_paths, out);
    }
    if (*predict_cmd) return cmd_predict(predict_paths, predict_out, out);
    if (*attention_cmd) {
      attention_paths.out_dir = attention_out;
      return cmd_attention(attention_paths, qid, out);
    }
    if (*sig_cmd) return cmd_significance(sig_a, sig_b, out);
    if (*synth_cmd) return cmd_synth(synth, out);
    if (*dump_cmd) {
      dump_config(out, config);
      return kExitOk;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace rsarank::cli
