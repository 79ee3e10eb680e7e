#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

const std::string kCli = VQIB_CLI_PATH;

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / "vqib_cli_test") {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string sub(const std::string& name) const { return (path / name).string(); }
};

int run(const std::string& args, const std::string& stderr_file = "/dev/null") {
  std::string cmd = kCli + " " + args + " >/dev/null 2>" + stderr_file;
  int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

const std::string kTinyTrain =
    " --gen gaussian_mixture --components 4 --dim 2 --n 64 --spread 2.0 --noise_sigma 0.2"
    " --seed 11 --steps 20 --batch_size 16 --K 4 --code_dim 2 --hidden 4"
    " --learning_rate 0.05 --beta 0.25";

}  // namespace

TEST_CASE("usage and config errors exit with code 2") {
  CHECK(run("") == 2);
  CHECK(run("frobnicate") == 2);

  TempDir tmp;
  std::string err = tmp.sub("err.txt");
  CHECK(run("train --config " + tmp.sub("missing.cfg"), err) == 2);
  CHECK(slurp(err).find("missing.cfg") != std::string::npos);

  CHECK(run("train --mode hard_vqvae --no_such_key 1" + kTinyTrain, err) == 2);
  CHECK(slurp(err).find("no_such_key") != std::string::npos);

  // invalid pairing
  CHECK(run("train --mode soft_em --regularizer_kind none" + kTinyTrain) == 2);
  // no data source
  CHECK(run("train --mode hard_vqvae --steps 1") == 2);
}

TEST_CASE("train writes metrics, checkpoint and echo; steps=0 gives a bare header") {
  TempDir tmp;
  std::string out = tmp.sub("run0");
  CHECK(run("train --mode hard_vqvae" + kTinyTrain + " --steps 0 --out " + out) == 0);
  std::string metrics = slurp(out + "/metrics.csv");
  CHECK(metrics == "step,recon,commitment,codebook,regularizer,total,perplexity,cond_entropy\n");
  CHECK(fs::exists(out + "/checkpoint.txt"));
  CHECK(fs::exists(out + "/config_echo.txt"));

  std::string out1 = tmp.sub("run1");
  CHECK(run("train --mode hard_vqvae" + kTinyTrain + " --out " + out1) == 0);
  CHECK(count_lines(slurp(out1 + "/metrics.csv")) == 21);  // header + 20 steps

  std::string out2 = tmp.sub("run2");
  CHECK(run("train --mode hard_vqvae" + kTinyTrain + " --log_every 5 --out " + out2) == 0);
  CHECK(count_lines(slurp(out2 + "/metrics.csv")) == 5);  // header + steps 5,10,15,20
}

TEST_CASE("exactly one data source is required") {
  TempDir tmp;
  std::ofstream(tmp.sub("d.csv")) << "f0,f1\n0.5,0.5\n1.0,1.0\n";
  CHECK(run("train --mode hard_vqvae" + kTinyTrain + " --data " + tmp.sub("d.csv")) == 2);
}

TEST_CASE("config file with comments plus command-line override") {
  TempDir tmp;
  std::string cfg = tmp.sub("run.cfg");
  {
    std::ofstream f(cfg);
    f << "# tiny run\n";
    f << "mode = hard_vqvae\n";
    f << "gen = gaussian_mixture  # generator\n";
    f << "components = 4\ndim = 2\nn = 64\nspread = 2.0\nnoise_sigma = 0.2\n";
    f << "seed = 11\nsteps = 20\nbatch_size = 16\nK = 4\ncode_dim = 2\nhidden = 4\n";
    f << "learning_rate = 0.05\nbeta = 0.25\n";
  }
  std::string out = tmp.sub("cfg_run");
  CHECK(run("train --config " + cfg + " --steps 5 --out " + out) == 0);
  std::string echo = slurp(out + "/config_echo.txt");
  CHECK(echo.find("steps = 5") != std::string::npos);  // override wins
  CHECK(echo.find("K = 4") != std::string::npos);
  CHECK(count_lines(slurp(out + "/metrics.csv")) == 6);

  // malformed line
  std::string bad = tmp.sub("bad.cfg");
  std::ofstream(bad) << "steps 5\n";
  CHECK(run("train --config " + bad) == 2);
}

TEST_CASE("identical train configs produce byte-identical metrics") {
  TempDir tmp;
  std::string a = tmp.sub("rep_a"), b = tmp.sub("rep_b");
  CHECK(run("train --mode hard_vqvae" + kTinyTrain + " --out " + a) == 0);
  CHECK(run("train --mode hard_vqvae" + kTinyTrain + " --out " + b) == 0);
  CHECK(slurp(a + "/metrics.csv") == slurp(b + "/metrics.csv"));
  CHECK(slurp(a + "/checkpoint.txt") == slurp(b + "/checkpoint.txt"));
}

TEST_CASE("divergence exits with code 3 and keeps the partial trace") {
  TempDir tmp;
  std::string out = tmp.sub("div");
  std::string err = tmp.sub("err.txt");
  CHECK(run("train --mode hard_vqvae" + kTinyTrain + " --learning_rate 1e9 --out " + out,
            err) == 3);
  CHECK(slurp(err).find("diverged") != std::string::npos);
  CHECK(fs::exists(out + "/metrics.csv"));
  CHECK(count_lines(slurp(out + "/metrics.csv")) < 21);
}

TEST_CASE("verify-bounds") {
  TempDir tmp;
  SUBCASE("n = 0 is a usage error") { CHECK(run("verify-bounds --n 0") == 2); }
  SUBCASE("a clean sweep exits 0 and writes sorted rows") {
    std::string out = tmp.sub("vb");
    CHECK(run("verify-bounds --n 25 --seed 3 --out " + out) == 0);
    std::string csv = slurp(out + "/bounds.csv");
    CHECK(csv.rfind("instance_seed,bound_name,gap\n", 0) == 0);
    CHECK(count_lines(csv) == 1 + 25 * 8);
    // instance seeds ascend
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    long long prev = -1;
    while (std::getline(in, line)) {
      long long seed = std::stoll(line.substr(0, line.find(',')));
      CHECK(seed >= prev);
      prev = seed;
    }
  }
  SUBCASE("the corruption hook trips exit code 4") {
    std::string out = tmp.sub("vb_bad");
    CHECK(run("verify-bounds --n 5 --seed 3 --corrupt-gap 1 --out " + out) == 4);
  }
}

TEST_CASE("compare") {
  TempDir tmp;
  const std::string tiny_compare =
      " --gen gaussian_mixture --components 4 --dim 2 --n 64 --spread 2.0 --noise_sigma 0.2"
      " --seed 11 --steps 15 --batch_size 16 --code_dim 2 --hidden 4"
      " --learning_rate 0.05 --beta 0.25 --lambda_reg 0.05 --em_every 5";

  SUBCASE("an explicit mode is rejected") {
    CHECK(run("compare --mode hard_vqvae --K 4" + tiny_compare) == 2);
    CHECK(run("compare --regularizer_kind vib_kl --K 4" + tiny_compare) == 2);
  }
  SUBCASE("writes both traces and a summary line") {
    std::string out = tmp.sub("cmp");
    CHECK(run("compare --K 4" + tiny_compare + " --out " + out) == 0);
    std::string csv = slurp(out + "/compare.csv");
    CHECK(csv.rfind("mode,step,", 0) == 0);
    CHECK(csv.find("\nhard_vqvae,1,") != std::string::npos);
    CHECK(csv.find("\nsoft_em,1,") != std::string::npos);
    CHECK(csv.find("# summary hard_perplexity=") != std::string::npos);
    CHECK(count_lines(csv) == 1 + 15 + 15 + 1);
  }
  SUBCASE("K = 1 forces perplexity 1 in both modes") {
    std::string out = tmp.sub("cmp_k1");
    CHECK(run("compare --K 1" + tiny_compare + " --out " + out) == 0);
    std::string csv = slurp(out + "/compare.csv");
    CHECK(csv.find("hard_perplexity=1 ") != std::string::npos);
    CHECK(csv.find("soft_perplexity=1 ") != std::string::npos);
  }
}

TEST_CASE("eval reloads a checkpoint and reports metrics") {
  TempDir tmp;
  std::string out = tmp.sub("train_out");
  REQUIRE(run("train --mode hard_vqvae" + kTinyTrain + " --out " + out) == 0);

  std::string eval_out = tmp.sub("eval_out");
  CHECK(run("eval --checkpoint " + out + "/checkpoint.txt" +
            " --gen gaussian_mixture --components 4 --dim 2 --n 64 --spread 2.0"
            " --noise_sigma 0.2 --seed 11 --out " + eval_out) == 0);
  std::string csv = slurp(eval_out + "/eval.csv");
  CHECK(csv.rfind("recon,commitment,codebook,regularizer,total,perplexity,cond_entropy\n", 0) ==
        0);
  CHECK(count_lines(csv) == 2);

  CHECK(run("eval --gen gaussian_mixture --components 4 --dim 2 --n 64 --seed 1") == 2);
  CHECK(run("eval --checkpoint " + tmp.sub("nope.txt") + " --data x.csv") == 2);
}
