#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rsarank/checkpoint.hpp"
#include "rsarank/cli.hpp"
#include "rsarank/config.hpp"
#include "rsarank/error.hpp"
#include "rsarank/metrics.hpp"

namespace rsarank {
namespace {

namespace fs = std::filesystem;

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("rsarank_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void synth(int queries = 12) {
    const CliResult r = run_cli({"synth", "--out", path("data"), "--seed", "3", "--queries",
                                 std::to_string(queries), "--valid-queries", "6",
                                 "--test-queries", "6", "--docs", "6", "--features", "5"});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  }

  CliResult train(const std::string& out, std::vector<std::string> extra = {}) {
    std::vector<std::string> args = {"train", "--train", path("data/train.txt"), "--valid",
                                     path("data/valid.txt"), "--out", path(out), "--epochs", "3",
                                     "--hidden", "4"};
    args.insert(args.end(), extra.begin(), extra.end());
    return run_cli(args);
  }

  fs::path dir_;
};

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run_cli({}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"train", "--train", "a.txt", "--out", "o"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"train", "--train", "a", "--valid", "b", "--out", "o", "--variant", "bogus"}).code,
            cli::kExitUsage);
  EXPECT_EQ(run_cli({"config-dump", "--set", "no_such_key=1"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"config-dump", "--set", "patience=0"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"eval", "--model", "m"}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"--help"}).code, cli::kExitOk);
}

TEST_F(CliTest, RuntimeErrorsExitOne) {
  const CliResult r = run_cli({"train", "--train", path("missing.txt"), "--valid",
                               path("missing.txt"), "--out", path("o")});
  EXPECT_EQ(r.code, cli::kExitRuntime);
  EXPECT_NE(r.err.find("cannot open"), std::string::npos);
  std::ofstream(path("bad.txt")) << "1 qid:1 1:1\nbad line\n";
  const CliResult bad = run_cli({"train", "--train", path("bad.txt"), "--valid", path("bad.txt"),
                                 "--out", path("o")});
  EXPECT_EQ(bad.code, cli::kExitRuntime);
  EXPECT_NE(bad.err.find("line 2"), std::string::npos) << bad.err;
}

TEST_F(CliTest, ConfigDumpRoundTrips) {
  const CliResult r = run_cli({"config-dump", "--variant", "sa", "--encoders", "<-", "--seed", "9",
                               "--set", "learning_rate=0.25"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("variant = sa"), std::string::npos);
  EXPECT_NE(r.out.find("encoders = <-"), std::string::npos);
  EXPECT_NE(r.out.find("learning_rate = 0.25"), std::string::npos);
  std::ofstream(path("run.cfg")) << r.out;
  const CliResult again = run_cli({"config-dump", "--config", path("run.cfg")});
  EXPECT_EQ(again.out, r.out);
  const CliResult overridden = run_cli({"config-dump", "--config", path("run.cfg"), "--variant", "rsa"});
  EXPECT_NE(overridden.out.find("variant = rsa"), std::string::npos);
}

TEST_F(CliTest, TrainThenEvalAgree) {
  synth();
  const CliResult t = train("rsa");
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_TRUE(fs::exists(path("rsa/model.ckpt")));
  EXPECT_TRUE(fs::exists(path("rsa/history.tsv")));
  const auto line = t.out.substr(t.out.find("valid NDCG@10 ", t.out.find("best epoch")));
  const double reported = std::stod(line.substr(14));

  const CliResult e = run_cli({"eval", "--model", path("rsa/model.ckpt"), "--test",
                               path("data/valid.txt"), "--out", path("eval")});
  ASSERT_EQ(e.code, 0) << e.err;
  const double evaluated = std::stod(e.out.substr(e.out.rfind("NDCG@10 ") + 8));
  EXPECT_NEAR(evaluated, reported, 1e-12);
  EXPECT_TRUE(fs::exists(path("eval/report.tsv")));
  EXPECT_TRUE(fs::exists(path("eval/per_query.tsv")));

  const Dataset valid = load_letor(path("data/valid.txt"));
  const MetricReport direct = evaluate(load_checkpoint(path("rsa/model.ckpt")), valid);
  std::ifstream pq(path("eval/per_query.tsv"));
  const MetricReport from_file = read_per_query(pq);
  EXPECT_EQ(from_file.mean_ndcg, direct.mean_ndcg);
  EXPECT_EQ(from_file.mean_err, direct.mean_err);
}

TEST_F(CliTest, SingleEncoderAblation) {
  synth();
  ASSERT_EQ(train("plus", {"--encoders", "+"}).code, 0);
  const Checkpoint ck = load_checkpoint_with_metadata(path("plus/model.ckpt"));
  EXPECT_EQ(ck.model.config.encoders, std::vector<EncoderKind>{EncoderKind::kPlus});
  EXPECT_EQ(ck.model.encoders.size(), 1u);
  EXPECT_EQ(ck.model.head_w.rows(), 4);
}

TEST_F(CliTest, PredictRowCountAndOrder) {
  synth();
  ASSERT_EQ(train("m", {"--variant", "listnet"}).code, 0);
  const CliResult p = run_cli({"predict", "--model", path("m/model.ckpt"), "--test",
                               path("data/test.txt"), "--out", path("scores.tsv")});
  ASSERT_EQ(p.code, 0) << p.err;
  std::ifstream in(path("scores.tsv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "qid\tdoc\tscore");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(line.substr(line.find('\t') + 1, line.rfind('\t') - line.find('\t') - 1),
              std::to_string(rows % 6));
    ++rows;
  }
  EXPECT_EQ(rows, load_letor(path("data/test.txt")).num_documents());
}

TEST_F(CliTest, AttentionExport) {
  // Sample query with grades 3,0,0,1,3,0,0,1,0,3.
  const std::vector<int> grades = {3, 0, 0, 1, 3, 0, 0, 1, 0, 3};
  {
    std::ofstream f(path("q.txt"));
    for (std::size_t i = 0; i < grades.size(); ++i) {
      f << grades[i] << " qid:42 1:" << 0.1 * static_cast<double>(i) << " 2:" << grades[i] << " 3:1\n";
    }
  }
  ASSERT_EQ(run_cli({"train", "--train", path("q.txt"), "--valid", path("q.txt"), "--out",
                     path("m"), "--epochs", "2", "--hidden", "3"})
                .code,
            0);
  const CliResult a = run_cli({"attention", "--model", path("m/model.ckpt"), "--test", path("q.txt"),
                               "--qid", "42", "--out", path("att")});
  ASSERT_EQ(a.code, 0) << a.err;
  for (const char* name : {"plus", "greater", "minus", "less"}) {
    std::ifstream learned(path(std::string("att/attention_") + name + ".csv"));
    const Matrix sigma = cli::read_matrix_csv(learned);
    ASSERT_EQ(sigma.rows(), 10);
    EXPECT_GT(sigma.minCoeff(), 0.0);
    EXPECT_LT(sigma.maxCoeff(), 1.0);
    EXPECT_TRUE(fs::exists(path(std::string("att/ideal_") + name + ".pgm")));
  }
  std::ifstream ideal(path("att/ideal_plus.csv"));
  const Matrix w = cli::read_matrix_csv(ideal);
  for (Eigen::Index i = 0; i < 10; ++i) {
    for (Eigen::Index j = 0; j < 10; ++j) EXPECT_TRUE(w(i, j) == 0.0 || w(i, j) == 1.0);
    EXPECT_EQ(w.row(i).sum() == 0.0, grades[static_cast<std::size_t>(i)] == 3) << "row " << i;
  }
  EXPECT_EQ(run_cli({"attention", "--model", path("m/model.ckpt"), "--test", path("q.txt"), "--qid",
                     "7", "--out", path("att")})
                .code,
            cli::kExitRuntime);
}

TEST_F(CliTest, MatrixCsvRoundTripAndPgm) {
  Matrix m(2, 3);
  m << 0.1234567890123, 1e-9, 0.5, 0.999999, 0.0, 1.0 / 3.0;
  std::stringstream csv;
  cli::write_matrix_csv(csv, m);
  EXPECT_LT((cli::read_matrix_csv(csv) - m).cwiseAbs().maxCoeff(), 1e-9);
  std::ostringstream pgm;
  cli::write_pgm(pgm, m);
  EXPECT_EQ(pgm.str(), "P2\n3 2\n255\n31 0 128\n255 0 85\n");
}

TEST_F(CliTest, SignificanceMatchesDirectTest) {
  synth();
  ASSERT_EQ(train("a", {"--variant", "listnet"}).code, 0);
  ASSERT_EQ(train("b", {"--variant", "rsa"}).code, 0);
  for (const char* sys : {"a", "b"}) {
    ASSERT_EQ(run_cli({"eval", "--model", path(std::string(sys) + "/model.ckpt"), "--test",
                       path("data/test.txt"), "--out", path(std::string("eval_") + sys)})
                  .code,
              0);
  }
  const CliResult s = run_cli({"significance", "--a", path("eval_a/per_query.tsv"), "--b",
                               path("eval_b/per_query.tsv")});
  ASSERT_EQ(s.code, 0) << s.err;
  std::ifstream fa(path("eval_a/per_query.tsv")), fb(path("eval_b/per_query.tsv"));
  const MetricReport ra = read_per_query(fa), rb = read_per_query(fb);
  std::ostringstream expected;
  write_significance(expected, compare_systems(ra, rb));
  EXPECT_EQ(s.out, expected.str());
}

TEST_F(CliTest, SeparableDataReachesNearPerfectNdcg) {
  {
    std::ofstream tr(path("train.txt")), va(path("valid.txt"));
    for (int q = 0; q < 40; ++q) {
      std::ofstream& f = q < 30 ? tr : va;
      for (int i = 0; i < 8; ++i) {
        const int g = (q * 7 + i * 3) % 5;
        f << g << " qid:" << q << " 1:" << g << " 2:" << (q + i) % 3 << '\n';
      }
    }
  }
  const CliResult t = run_cli({"train", "--train", path("train.txt"), "--valid", path("valid.txt"),
                               "--out", path("m"), "--variant", "listnet", "--lr", "0.05",
                               "--epochs", "60", "--patience", "60"});
  ASSERT_EQ(t.code, 0) << t.err;
  const CliResult e = run_cli({"eval", "--model", path("m/model.ckpt"), "--test", path("valid.txt")});
  ASSERT_EQ(e.code, 0);
  const double ndcg = std::stod(e.out.substr(e.out.rfind("NDCG@10 ") + 8));
  EXPECT_GE(ndcg, 0.99);
}

TEST_F(CliTest, NormalizationIsRecordedAndReapplied) {
  synth();
  ASSERT_EQ(train("n", {"--normalize", "query-minmax"}).code, 0);
  const Checkpoint ck = load_checkpoint_with_metadata(path("n/model.ckpt"));
  EXPECT_EQ(ck.metadata.at("normalize"), "query-minmax");
  const Dataset test = cli::load_for_model(path("data/test.txt"), 5, Normalization::kQueryMinMax, 4);
  const MetricReport direct = evaluate(ck.model, test);
  const CliResult e = run_cli({"eval", "--model", path("n/model.ckpt"), "--test", path("data/test.txt")});
  const double reported = std::stod(e.out.substr(e.out.rfind("NDCG@10 ") + 8));
  EXPECT_NEAR(reported, direct.ndcg(10), 1e-15);
}

TEST_F(CliTest, DeterministicTraining) {
  synth();
  ASSERT_EQ(train("r1").code, 0);
  ASSERT_EQ(train("r2").code, 0);
  EXPECT_EQ(read_file(path("r1/model.ckpt")), read_file(path("r2/model.ckpt")));
  EXPECT_EQ(read_file(path("r1/history.tsv")), read_file(path("r2/history.tsv")));
}

TEST_F(CliTest, CheckpointAgainstWiderDataFails) {
  synth();
  ASSERT_EQ(train("m").code, 0);
  std::ofstream(path("wide.txt")) << "1 qid:1 9:1\n0 qid:1 1:1\n";
  const CliResult e = run_cli({"eval", "--model", path("m/model.ckpt"), "--test", path("wide.txt")});
  EXPECT_EQ(e.code, cli::kExitRuntime);
  EXPECT_NE(e.err.find("dimension"), std::string::npos) << e.err;
}

}  // namespace
}  // namespace rsarank
