#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "vpp_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(VPP_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Small model flags so train/eval finish in seconds.
const std::string kTiny =
    " --image-side 16 --dim 8 --heads 2 --layers 1 --queries 2 --epochs 1 --n-train 8 --n-test 4"
    " --mask-width 42 --quiet";

}  // namespace

TEST_CASE("render-axis is byte-stable") {
  fs::remove_all(kRoot);
  CHECK(run("render-axis --quiet --out " + (kRoot / "a").string()) == 0);
  CHECK(run("render-axis --quiet --out " + (kRoot / "b").string()) == 0);
  const std::string a = slurp(kRoot / "a" / "axis.png");
  CHECK(a.size() > 100);
  CHECK(a == slurp(kRoot / "b" / "axis.png"));
  CHECK(run("render-axis --quiet --unit 0.05 --out " + (kRoot / "c").string()) == 0);
  CHECK(a != slurp(kRoot / "c" / "axis.png"));
}

TEST_CASE("exit codes") {
  CHECK(run("") == 1);
  CHECK(run("render-axis --no-such-flag") == 1);
  CHECK(run("render-axis --variant diagonal --out " + kRoot.string()) == 1);
  CHECK(run("eval --checkpoint " + (kRoot / "missing.ckpt").string()) != 0);

  const fs::path bad = kRoot / "bad.jsonl";
  fs::create_directories(kRoot);
  std::ofstream(bad) << "{\"id\": 1, \"image\": \"x.jpg\", \"phrase\": \"cat\"}\n";
  CHECK(run("forge --kind cb-grd --input " + bad.string() + " --out " + kRoot.string()) == 2);
}

TEST_CASE("forge writes unified records") {
  const std::string fx = VPP_FIXTURE_DIR;
  const fs::path out = kRoot / "forge";
  CHECK(run("forge --quiet --kind genixer --input " + fx + "/genixer.jsonl --dims " + fx + "/dims.txt --out " +
            out.string()) == 0);
  std::ifstream in(out / "unified.jsonl");
  int lines = 0;
  for (std::string l; std::getline(in, l);) lines += !l.empty();
  CHECK(lines == 2);
}

TEST_CASE("preview, dump-config, synth, train and eval") {
  const fs::path p = kRoot / "flow";
  CHECK(run("preview-overlay --quiet --synth-index 3 --out " + p.string()) == 0);
  CHECK(fs::exists(p / "preview.png"));

  CHECK(run("render-axis --quiet --alpha 0.5 --dump-config " + (p / "run.conf").string() + " --out " + p.string()) == 0);
  const std::string conf = slurp(p / "run.conf");
  CHECK(conf.find("alpha=0.5") != std::string::npos);
  CHECK(run("render-axis --quiet --config " + (p / "run.conf").string() + " --out " + p.string()) == 0);

  CHECK(run("synth --quiet --n 20 --out " + (p / "data").string()) == 0);
  CHECK(fs::exists(p / "data" / "train.jsonl"));
  CHECK(fs::exists(p / "data" / "test.jsonl"));

  CHECK(run("train" + kTiny + " --data " + (p / "data").string() + " --out " + p.string()) == 0);
  CHECK(fs::exists(p / "model.ckpt"));
  const std::string loss = slurp(p / "loss.csv");
  CHECK(loss.rfind("epoch,mean_loss\n1,", 0) == 0);

  CHECK(run("eval --quiet --checkpoint " + (p / "model.ckpt").string() + " --data " + (p / "data").string() +
            " --out " + p.string()) == 0);
  const std::string md = slurp(p / "eval.md");
  CHECK(md.find("| test | 10 |") != std::string::npos);
  CHECK(fs::exists(p / "eval.csv"));
}
