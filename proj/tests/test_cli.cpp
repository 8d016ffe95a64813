// Black-box tests for the funkrad command-line tool. argv[1] is the path to
// the binary; every check runs it as a subprocess and inspects exit codes,
// stdout, and artifact files. Exits nonzero when any expectation fails.
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace {
int g_failures = 0;
std::string g_bin;

#define EXPECT(cond)                                                       \
  do {                                                                     \
    if (!(cond)) {                                                         \
      ++g_failures;                                                        \
      std::cerr << "FAIL " << __FILE__ << ":" << __LINE__ << "  " #cond    \
                << "\n";                                                   \
    }                                                                      \
  } while (0)

int run(const std::string& args) {
  const std::string cmd = "\"" + g_bin + "\" " + args;
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return -2;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  f << body;
}
}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: funkrad_cli_tests <path-to-funkrad>\n";
    return 2;
  }
  g_bin = argv[1];

  // help and argument errors
  EXPECT(run("--help > cli_help.txt 2>&1") == 0);
  EXPECT(contains(slurp("cli_help.txt"), "phantom"));
  EXPECT(contains(slurp("cli_help.txt"), "reconstruct"));
  EXPECT(run("> cli_noargs.txt 2>&1") == 2);            // missing subcommand
  EXPECT(run("phantom --bogus x > /dev/null 2>&1") == 2);  // unknown flag
  EXPECT(run("phantom > /dev/null 2>&1") == 2);         // missing --out

  // phantom: artifact, config echo, determinism
  const std::string spec =
      "--spec disk:-0.2,0.15,0.3,1.0 --spec gauss:0.25,-0.2,0.12,0.8 "
      "--nx 48 --ny 48 ";
  EXPECT(run("phantom " + spec + "--out cli_f.txt > cli_f.log 2>&1") == 0);
  EXPECT(contains(slurp("cli_f.txt"), "funkgrid 2 48 48"));
  EXPECT(slurp("cli_f.log").rfind("config: {", 0) == 0);
  EXPECT(contains(slurp("cli_f.log"), "\"command\""));
  EXPECT(run("phantom " + spec + "--out cli_f2.txt > /dev/null 2>&1") == 0);
  EXPECT(slurp("cli_f2.txt") == slurp("cli_f.txt"));
  EXPECT(run("phantom --nx 24 --ny 24 --out cli_fe.txt > /dev/null 2>&1") ==
         2);  // no primitives at all
  EXPECT(run("phantom --spec disk:0.4,0.1,0.2,1 --mask half-ball --nx 24 "
             "--ny 24 --out cli_fh.txt > /dev/null 2>&1") == 0);

  // config files: defaults load, flags override, unknown keys rejected
  write_text("cli_conf.json", "{\"nx\": 40, \"ny\": 40}\n");
  EXPECT(run("phantom --config cli_conf.json --spec disk:0,0,0.4,1 --nx 48 "
             "--out cli_fc.txt > /dev/null 2>&1") == 0);
  EXPECT(contains(slurp("cli_fc.txt"), "funkgrid 2 48 40"));
  write_text("cli_badconf.json", "{\"bogus\": 1}\n");
  EXPECT(run("phantom --config cli_badconf.json --spec disk:0,0,0.4,1 "
             "--out cli_fd.txt > /dev/null 2>&1") == 2);

  // forward / backproject round trip
  EXPECT(run("forward --in cli_f.txt --geom full:R=1.5,nd=40,nr=32 "
             "--out cli_g.txt > /dev/null 2>&1") == 0);
  EXPECT(contains(slurp("cli_g.txt"), "funksino 40 32 1.5"));
  EXPECT(run("forward --in cli_missing.txt --geom full:R=1.5,nd=40,nr=32 "
             "--out cli_gx.txt > /dev/null 2>&1") == 2);
  EXPECT(run("backproject --in cli_g.txt --nx 48 --ny 48 --out cli_b.txt "
             "> /dev/null 2>&1") == 0);
  EXPECT(contains(slurp("cli_b.txt"), "funkgrid 2 48 48"));
  EXPECT(run("backproject --in cli_g.txt --nx 48 --ny 48 --dual "
             "--out cli_bd.txt > /dev/null 2>&1") == 0);
  EXPECT(slurp("cli_bd.txt") == slurp("cli_b.txt"));  // full scan: cutoff = 1

  // global --threads parses and stays deterministic
  EXPECT(run("--threads 2 backproject --in cli_g.txt --nx 48 --ny 48 "
             "--out cli_bt.txt > /dev/null 2>&1") == 0);
  EXPECT(slurp("cli_bt.txt") == slurp("cli_b.txt"));

  // adjoint-check report shape
  EXPECT(run("adjoint-check --geom full:R=1.5,nd=30,nr=24 --nx 24 --levels 1 "
             "--out cli_adj.txt > /dev/null 2>&1") == 0);
  EXPECT(slurp("cli_adj.txt").rfind("# config: {", 0) == 0);
  EXPECT(contains(slurp("cli_adj.txt"), "residual"));
  EXPECT(contains(slurp("cli_adj.txt"), "summary: {"));

  // reconstruct: artifact + report, support mask, failure modes
  EXPECT(run("reconstruct --in cli_g.txt --nx 32 --ny 32 --iters 2 "
             "--theta-rel 1e-2 --power-iters 10 --out cli_r.txt "
             "--report cli_rep.txt > /dev/null 2>&1") == 0);
  EXPECT(contains(slurp("cli_r.txt"), "funkgrid 2 32 32"));
  EXPECT(contains(slurp("cli_rep.txt"), "lambda_max"));
  EXPECT(contains(slurp("cli_rep.txt"), "summary: {"));
  EXPECT(run("reconstruct --in cli_g.txt --nx 32 --ny 32 --iters 1 "
             "--truth cli_f.txt --out cli_rt.txt > /dev/null 2>&1") ==
         2);  // 48x48 truth against a 32x32 grid
  EXPECT(run("reconstruct --in cli_g.txt --nx 32 --ny 32 --iters 1 "
             "--mask bogus --out cli_rm.txt > /dev/null 2>&1") == 2);
  EXPECT(run("reconstruct --in cli_g.txt --nx 32 --ny 32 --iters 2 "
             "--cg-fatal --cg-iters 1 --cg-tol 1e-15 --power-iters 10 "
             "--out cli_rf.txt > /dev/null 2>&1") == 3);  // NumericalError

  // range-build / range-check
  EXPECT(run("range-build --deg 1 --freq 3 --out cli_ann.json "
             "> cli_ann.log 2>&1") == 0);
  EXPECT(contains(slurp("cli_ann.json"), "\"degree\": 1"));
  EXPECT(contains(slurp("cli_ann.log"), "certified: max moment residual"));
  EXPECT(run("range-build --deg 2 --freq 2 --out cli_ann2.json "
             "> /dev/null 2>&1") == 2);  // frequency-too-low
  EXPECT(run("range-check --in cli_g.txt --annihilator cli_ann.json "
             "--freq 0 --out cli_rc.txt > /dev/null 2>&1") == 0);
  EXPECT(contains(slurp("cli_rc.txt"), "residual"));
  EXPECT(run("range-check --in cli_g.txt --deg 1 --freq 2 --out cli_rc2.txt "
             "> /dev/null 2>&1") == 0);
  EXPECT(run("forward --in cli_f.txt --geom partial:R=1.5,delta=0.3,nd=40,"
             "nr=32 --out cli_gp.txt > /dev/null 2>&1") == 0);
  EXPECT(run("range-check --in cli_gp.txt --deg 1 --freq 2 --out cli_rc3.txt "
             "> /dev/null 2>&1") == 2);  // partial scans unsupported

  // kernel-probe / spectrum / geom-check diagnostics
  EXPECT(run("kernel-probe --geom full:R=1.5,nd=60,nr=48 --base 0.3,0.1 "
             "--dir 1,0.5 --n 5 --out cli_kp.txt > /dev/null 2>&1") == 0);
  EXPECT(contains(slurp("cli_kp.txt"), "slope"));
  EXPECT(run("spectrum --geom full:R=1.5,nd=24,nr=16 --nx 10 --ny 10 "
             "--klo 2 --khi 12 --out cli_sp.txt > /dev/null 2>&1") == 0);
  EXPECT(contains(slurp("cli_sp.txt"), "slope"));
  EXPECT(run("spectrum --geom full:R=1.5,nd=24,nr=16 --nx 128 --ny 128 "
             "--out cli_spx.txt > /dev/null 2>&1") == 2);  // too many cells
  EXPECT(run("geom-check --geom full:R=1.5,nd=24,nr=20 --samples 60 "
             "--out cli_gc.txt > /dev/null 2>&1") == 0);
  EXPECT(contains(slurp("cli_gc.txt"), "summary: {"));
  EXPECT(run("geom-check --geom partial:R=1.5,delta=0.3,nd=24,nr=20 "
             "--samples 40 --out cli_gc2.txt > /dev/null 2>&1") == 0);

  if (g_failures == 0) {
    std::cout << "cli: all checks passed\n";
    return 0;
  }
  std::cerr << "cli: " << g_failures << " check(s) failed\n";
  return 1;
}
